//! Named propagator strategies: each pairs a closed form with the Hamiltonian
//! it solves and a random-parameter sampler for validation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::matrix::{c, ComplexMatrix, I};
use crate::multispin::{expm_hermitian, hamiltonian_homogeneous, SpinDomain};
use crate::oracle::HamiltonianFn;
use crate::propagator::{
    general_propagator, rest_propagator, rf_propagator, rotation_matrix, static_propagator, FieldParams,
};
use crate::state::PhysicalConstants;

/// Parameters for one closed-form evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub params: FieldParams,
    /// Dimensionless rest ratios for multi-spin builders.
    #[serde(default)]
    pub k_ratios: Vec<f64>,
    pub t: f64,
}

impl Draw {
    pub fn new(params: FieldParams, t: f64) -> Self {
        Self {
            params,
            k_ratios: Vec::new(),
            t,
        }
    }
}

pub trait PropagatorBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn closed_form(&self, draw: &Draw, t: f64) -> Result<ComplexMatrix>;
    /// Hamiltonian solved by the closed form, in units where ħ = 1.
    fn hamiltonian(&self, draw: &Draw) -> Result<HamiltonianFn>;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw;
}

/// log-uniform magnitude in [1e2, 1e9] rad/s with random sign.
pub fn sample_omega(rng: &mut ChaCha8Rng) -> f64 {
    let mag = 10f64.powf(rng.random_range(2.0..9.0));
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

pub fn sample_k(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.0..1e3)
}

/// Time such that (largest frequency)·t lies in (0, 20].
fn sample_time(rng: &mut ChaCha8Rng, f_max: f64) -> f64 {
    let u: f64 = rng.random_range(0.05..=1.0);
    u * 20.0 / f_max
}

fn half(z: Complex64) -> Complex64 {
    0.5 * z
}

fn finish(rng: &mut ChaCha8Rng, params: FieldParams, h: &HamiltonianFn) -> Draw {
    let t = sample_time(rng, h.max_frequency().max(1.0));
    Draw::new(params, t)
}

pub struct StaticBuilder;
pub struct RfBuilder;
pub struct RestBuilder;
pub struct GeneralBuilder;
pub struct RotationBuilder;
pub struct MatrixExpBuilder;

impl PropagatorBuilder for StaticBuilder {
    fn name(&self) -> &'static str {
        "static"
    }
    fn description(&self) -> &'static str {
        "free precession in a static longitudinal field"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        Ok(static_propagator(d.params.omega_z, t))
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let w0 = d.params.omega_z;
        Ok(HamiltonianFn::constant(
            ComplexMatrix::new2(c(0.5 * w0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5 * w0, 0.0)),
            1.0,
        ))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        let p = FieldParams::static_field(sample_omega(rng));
        let h = self.hamiltonian(&Draw::new(p, 0.0)).expect("static Hamiltonian");
        finish(rng, p, &h)
    }
}

impl PropagatorBuilder for RfBuilder {
    fn name(&self) -> &'static str {
        "rf"
    }
    fn description(&self) -> &'static str {
        "rotating RF drive at carrier omega on a precessing spin"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        let p = &d.params;
        Ok(rf_propagator(p.omega_rf, p.omega_z, p.omega_x, t)?.product)
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let (w, w0, w1) = (d.params.omega_rf, d.params.omega_z, d.params.omega_x);
        Ok(HamiltonianFn::new(2, 1.0, move |t| {
            let drive = Complex64::from_polar(0.5 * w1, -w * t);
            ComplexMatrix::new2(c(0.5 * w0, 0.0), drive, drive.conj(), c(-0.5 * w0, 0.0))
        })
        .with_carrier(w))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        let w0 = sample_omega(rng);
        let w1 = sample_omega(rng).abs();
        // Half the draws sit near resonance, the rest use an unrelated carrier.
        let w = if rng.random_bool(0.5) {
            w0 * (1.0 + rng.random_range(-1e-2..1e-2))
        } else {
            sample_omega(rng)
        };
        let p = FieldParams::rf(w, w0, w1);
        let h = self.hamiltonian(&Draw::new(p, 0.0)).expect("rf Hamiltonian");
        finish(rng, p, &h)
    }
}

impl PropagatorBuilder for RestBuilder {
    fn name(&self) -> &'static str {
        "rest"
    }
    fn description(&self) -> &'static str {
        "static field plus rest constant K"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        Ok(rest_propagator(d.params.omega_z, d.params.k_rest, t)?.product)
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let (w0, k) = (d.params.omega_z, d.params.k_rest);
        Ok(HamiltonianFn::constant(
            ComplexMatrix::new2(c(0.5 * (w0 + k), 0.0), c(0.5 * k, 0.0), c(0.5 * k, 0.0), c(0.5 * (k - w0), 0.0)),
            1.0,
        ))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        let p = FieldParams::rest(sample_omega(rng), sample_k(rng));
        let h = self.hamiltonian(&Draw::new(p, 0.0)).expect("rest Hamiltonian");
        finish(rng, p, &h)
    }
}

impl PropagatorBuilder for GeneralBuilder {
    fn name(&self) -> &'static str {
        "general"
    }
    fn description(&self) -> &'static str {
        "arbitrary constant field, rest constant and optional rotating frame"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        Ok(general_propagator(&d.params, t)?.product)
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let p = d.params;
        p.validate()?;
        if p.symmetrize_k_coupling {
            return Ok(HamiltonianFn::new(2, 1.0, move |t| p.hamiltonian_over_hbar(t)).with_carrier(p.omega_rf));
        }
        let (wx, wy, wz, w, k) = (p.omega_x, p.omega_y, p.omega_z, p.omega_rf, p.k_rest);
        Ok(HamiltonianFn::new(2, 1.0, move |t| {
            let rot = Complex64::from_polar(1.0, -w * t);
            let upper = half(c(wx + k, -wy) * rot);
            ComplexMatrix::new2(c(0.5 * (wz + k), 0.0), upper, upper.conj(), c(0.5 * (k - wz), 0.0))
        })
        .with_carrier(w))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        let p = FieldParams {
            omega_x: sample_omega(rng),
            omega_y: sample_omega(rng),
            omega_z: sample_omega(rng),
            omega_rf: if rng.random_bool(0.5) { 0.0 } else { sample_omega(rng) },
            k_rest: sample_k(rng),
            symmetrize_k_coupling: false,
        };
        let h = self.hamiltonian(&Draw::new(p, 0.0)).expect("general Hamiltonian");
        finish(rng, p, &h)
    }
}

impl PropagatorBuilder for RotationBuilder {
    fn name(&self) -> &'static str {
        "rotation"
    }
    fn description(&self) -> &'static str {
        "rotation by |w|t about the unit vector (omega_x, omega_y, omega_z)/|w|"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        let p = &d.params;
        let v = [p.omega_x, p.omega_y, p.omega_z];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 {
            return Err(SpinError::DegenerateDelta);
        }
        rotation_matrix([v[0] / norm, v[1] / norm, v[2] / norm], norm * t)
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let p = &d.params;
        Ok(HamiltonianFn::constant(
            ComplexMatrix::new2(
                c(0.5 * p.omega_z, 0.0),
                c(0.5 * p.omega_x, -0.5 * p.omega_y),
                c(0.5 * p.omega_x, 0.5 * p.omega_y),
                c(-0.5 * p.omega_z, 0.0),
            ),
            1.0,
        ))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        // Random axis on the sphere, random rate.
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).sqrt();
        let rate = sample_omega(rng).abs();
        let p = FieldParams {
            omega_x: rate * r * phi.cos(),
            omega_y: rate * r * phi.sin(),
            ..FieldParams::static_field(rate * z)
        };
        let h = self.hamiltonian(&Draw::new(p, 0.0)).expect("rotation Hamiltonian");
        finish(rng, p, &h)
    }
}

impl MatrixExpBuilder {
    fn domain(d: &Draw) -> Result<SpinDomain> {
        let p = &d.params;
        // With γ = 1 the field in tesla is B = −ω.
        SpinDomain::new(d.k_ratios.len().max(1), [-p.omega_x, -p.omega_y, -p.omega_z], {
            if d.k_ratios.is_empty() {
                vec![0.0]
            } else {
                d.k_ratios.clone()
            }
        })
    }
}

impl PropagatorBuilder for MatrixExpBuilder {
    fn name(&self) -> &'static str {
        "matrix-exp"
    }
    fn description(&self) -> &'static str {
        "eigen-decomposition evolution of a homogeneous multi-spin Hamiltonian"
    }
    fn closed_form(&self, d: &Draw, t: f64) -> Result<ComplexMatrix> {
        let h = hamiltonian_homogeneous(&Self::domain(d)?, &PhysicalConstants::unit())?;
        expm_hermitian(&h, -I * t)
    }
    fn hamiltonian(&self, d: &Draw) -> Result<HamiltonianFn> {
        let h = hamiltonian_homogeneous(&Self::domain(d)?, &PhysicalConstants::unit())?;
        Ok(HamiltonianFn::constant(h, 1.0))
    }
    fn sample(&self, rng: &mut ChaCha8Rng) -> Draw {
        let scale = sample_omega(rng).abs();
        let p = FieldParams {
            omega_x: scale * rng.random_range(-1.0..1.0),
            omega_y: scale * rng.random_range(-1.0..1.0),
            ..FieldParams::static_field(scale * rng.random_range(-1.0..1.0))
        };
        let k_ratios = vec![rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
        let mut d = Draw { params: p, k_ratios, t: 0.0 };
        let h = self.hamiltonian(&d).expect("matrix-exp Hamiltonian");
        d.t = sample_time(rng, h.max_frequency().max(1.0));
        d
    }
}

static BUILDERS: [&dyn PropagatorBuilder; 6] = [
    &StaticBuilder,
    &RfBuilder,
    &RestBuilder,
    &GeneralBuilder,
    &RotationBuilder,
    &MatrixExpBuilder,
];

pub fn registry() -> &'static [&'static dyn PropagatorBuilder] {
    &BUILDERS
}

pub fn builder_names() -> Vec<&'static str> {
    BUILDERS.iter().map(|b| b.name()).collect()
}

pub fn lookup(name: &str) -> Result<&'static dyn PropagatorBuilder> {
    BUILDERS
        .iter()
        .copied()
        .find(|b| b.name() == name)
        .ok_or_else(|| SpinError::UnknownName {
            kind: "builder",
            name: name.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{compare_closed_form, IntegrationConfig};
    use rand::SeedableRng;

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let names = builder_names();
        assert_eq!(names, ["static", "rf", "rest", "general", "rotation", "matrix-exp"]);
        for n in names {
            assert_eq!(lookup(n).unwrap().name(), n);
        }
        assert!(matches!(lookup("nope"), Err(SpinError::UnknownName { .. })));
    }

    #[test]
    fn each_builder_agrees_with_oracle_on_a_few_draws() {
        let cfg = IntegrationConfig::validation();
        for b in registry() {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..5 {
                let d = b.sample(&mut rng);
                let r = compare_closed_form(*b, &d, &[d.t, 0.5 * d.t], &cfg).unwrap();
                assert!(r.passes(), "{}: {:?} for {:?}", b.name(), r, d);
            }
        }
    }

    #[test]
    fn general_matches_spec_example() {
        let p = FieldParams {
            omega_x: 300.0,
            omega_y: 400.0,
            k_rest: 50.0,
            ..FieldParams::static_field(1e5)
        };
        let d = Draw::new(p, 1e-4);
        let r = compare_closed_form(&GeneralBuilder, &d, &[1e-4], &IntegrationConfig::validation()).unwrap();
        assert!(r.max_entry_error < 1e-8, "{r:?}");
    }

    #[test]
    fn general_reduces_to_static_error_profile() {
        let cfg = IntegrationConfig::validation();
        let d = Draw::new(FieldParams::static_field(3.3e6), 4e-6);
        let g = compare_closed_form(&GeneralBuilder, &d, &[d.t], &cfg).unwrap();
        let s = compare_closed_form(&StaticBuilder, &d, &[d.t], &cfg).unwrap();
        assert!(g.max_entry_error < 1e-8);
        assert!((g.max_entry_error - s.max_entry_error).abs() < 1e-12);
    }

    #[test]
    fn rest_with_stiff_ratio() {
        let d = Draw::new(FieldParams::rest(1e8, 1.0), 1.5e-7);
        let r = compare_closed_form(&RestBuilder, &d, &[d.t], &IntegrationConfig::validation()).unwrap();
        assert!(r.max_entry_error < 1e-8);
    }

    #[test]
    fn symmetrized_coupling_is_solved_exactly() {
        let p = FieldParams {
            omega_x: 300.0,
            omega_y: -400.0,
            omega_rf: 2e3,
            k_rest: 80.0,
            symmetrize_k_coupling: true,
            ..FieldParams::static_field(5e3)
        };
        let d = Draw::new(p, 2e-3);
        let r = compare_closed_form(&GeneralBuilder, &d, &[d.t], &IntegrationConfig::validation()).unwrap();
        assert!(r.max_entry_error < 1e-8, "{r:?}");
    }
}
