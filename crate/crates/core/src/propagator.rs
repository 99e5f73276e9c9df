//! Closed-form single-spin evolution operators in factorized `E·R` form.
//!
//! Every builder returns an [`EvolutionPair`] whose `e_part` is diagonal and
//! whose `r_part` is an SU(2) rotation. The general case works in the frame
//! rotating at the carrier `omega_rf`; with `omega_rf = 0` it is the
//! laboratory frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::matrix::{c, pauli, Axis, ComplexMatrix, I, ZERO};
use crate::state::{PhysicalConstants, PolarState};
use crate::tolerance::AXIS_TOL;

/// Angular-frequency parameters of one spin, all in rad/s.
///
/// The transverse drive is `(omega_x, omega_y)` in the frame rotating at
/// `omega_rf`. The drive amplitude ω₁ is derived, see [`FieldParams::derived`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub omega_rf: f64,
    pub k_rest: f64,
    /// Replace the `2Kω_X` coupling by `2K·√(ω_X²+ω_Y²)`.
    #[serde(default)]
    pub symmetrize_k_coupling: bool,
}

/// Quantities derived from [`FieldParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedFreqs {
    /// Ω = ω_Z − ω_rf.
    pub big_omega: f64,
    /// Δ = √(Ω² + ω₁²).
    pub delta: f64,
    /// ω₁ = |w|.
    pub eff_omega1: f64,
    /// Complex transverse coupling w; ω₁² = ω_X² + ω_Y² + K² + 2Kω_X by default.
    pub coupling: Complex64,
}

impl FieldParams {
    /// Free precession at ω₀.
    pub fn static_field(omega0: f64) -> Self {
        Self {
            omega_x: 0.0,
            omega_y: 0.0,
            omega_z: omega0,
            omega_rf: 0.0,
            k_rest: 0.0,
            symmetrize_k_coupling: false,
        }
    }

    /// Rotating drive of amplitude ω₁ at carrier ω on a spin precessing at ω₀.
    pub fn rf(omega_rf: f64, omega0: f64, omega1: f64) -> Self {
        Self {
            omega_x: omega1,
            omega_z: omega0,
            omega_rf,
            ..Self::static_field(omega0)
        }
    }

    /// Static field plus rest constant K.
    pub fn rest(omega0: f64, k_rest: f64) -> Self {
        Self {
            k_rest,
            ..Self::static_field(omega0)
        }
    }

    /// Laboratory fields in tesla, ω_i = −γB_i.
    pub fn from_fields(b: [f64; 3], k_rest: f64, constants: &PhysicalConstants) -> Self {
        Self {
            omega_x: constants.omega(b[0]),
            omega_y: constants.omega(b[1]),
            omega_z: constants.omega(b[2]),
            omega_rf: 0.0,
            k_rest,
            symmetrize_k_coupling: false,
        }
    }

    /// Reading where the longitudinal term is offset by the rest constant, ω_Z = ω₀ − K.
    pub fn with_rest_offset(omega0: f64, k_rest: f64, omega_x: f64, omega_y: f64) -> Self {
        Self {
            omega_x,
            omega_y,
            omega_z: omega0 - k_rest,
            omega_rf: 0.0,
            k_rest,
            symmetrize_k_coupling: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_x, self.omega_y, self.omega_z, self.omega_rf, self.k_rest];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SpinError::NonFinite { context: "field parameters" })
        }
    }

    pub fn coupling(&self) -> Complex64 {
        let transverse = c(self.omega_x, -self.omega_y);
        if self.symmetrize_k_coupling {
            let perp = self.omega_x.hypot(self.omega_y);
            if perp == 0.0 {
                c(self.k_rest, 0.0)
            } else {
                transverse * (1.0 + self.k_rest / perp)
            }
        } else {
            transverse + self.k_rest
        }
    }

    pub fn derived(&self) -> DerivedFreqs {
        let coupling = self.coupling();
        let big_omega = self.omega_z - self.omega_rf;
        let eff_omega1 = coupling.norm();
        DerivedFreqs {
            big_omega,
            delta: big_omega.hypot(eff_omega1),
            eff_omega1,
            coupling,
        }
    }

    /// Laboratory Hamiltonian divided by ħ at time t (rad/s).
    pub fn hamiltonian_over_hbar(&self, t: f64) -> ComplexMatrix {
        let w = self.coupling() * Complex64::from_polar(1.0, -self.omega_rf * t);
        let k = self.k_rest;
        ComplexMatrix::new2(
            c(0.5 * (self.omega_z + k), 0.0),
            0.5 * w,
            0.5 * w.conj(),
            c(0.5 * (k - self.omega_z), 0.0),
        )
    }

    /// Largest frequency present in the Hamiltonian (for step sizing).
    pub fn max_frequency(&self) -> f64 {
        let d = self.derived();
        d.delta.max(self.omega_rf.abs()).max((self.omega_z.abs() + self.k_rest.abs()).max(d.eff_omega1))
    }
}

/// Diagonal evolution factor, rotation factor and their product.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionPair {
    pub e_part: ComplexMatrix,
    pub r_part: ComplexMatrix,
    pub product: ComplexMatrix,
}

impl EvolutionPair {
    pub fn new(e_part: ComplexMatrix, r_part: ComplexMatrix) -> Self {
        let product = e_part.mul(&r_part).expect("2x2 factors");
        Self {
            e_part,
            r_part,
            product,
        }
    }
}

fn phase(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

/// `R` for generator ½(u_x σ^X + u_y σ^Y + u_z σ^Z)·Δ, written with the
/// unnormalized components so that Δ = 0 gives the identity.
fn rotation_unchecked(ux: f64, uy: f64, uz: f64, delta: f64, t: f64) -> ComplexMatrix {
    if delta == 0.0 {
        return ComplexMatrix::identity(2).expect("dimension 2");
    }
    let (s, co) = (0.5 * delta * t).sin_cos();
    let (nx, ny, nz) = (ux / delta, uy / delta, uz / delta);
    ComplexMatrix::new2(
        c(co, -nz * s),
        c(-ny * s, -nx * s),
        c(ny * s, -nx * s),
        c(co, nz * s),
    )
}

/// diag(e^{−iω₀t/2}, e^{+iω₀t/2}).
pub fn static_propagator(omega0: f64, t: f64) -> ComplexMatrix {
    let a = 0.5 * omega0 * t;
    ComplexMatrix::new2(phase(-a), ZERO, ZERO, phase(a))
}

/// The constants C₁..C₄ of the driven solution for an initial polar state.
pub fn rf_coefficients(
    initial: &PolarState,
    omega_big: f64,
    delta: f64,
    omega1: f64,
) -> Result<[Complex64; 4]> {
    if !(omega_big.is_finite() && delta.is_finite() && omega1.is_finite()) {
        return Err(SpinError::NonFinite { context: "rf coefficients" });
    }
    if delta == 0.0 {
        return Err(SpinError::DegenerateDelta);
    }
    let z2 = Complex64::from_polar(initial.r2, initial.phi2);
    let z1 = Complex64::from_polar(initial.r1, initial.phi1);
    let (o, w) = (omega_big / delta, omega1 / delta);
    Ok([
        0.5 * ((1.0 - o) * z2 - w * z1),
        0.5 * ((1.0 + o) * z2 + w * z1),
        0.5 * (-w * z2 + (1.0 + o) * z1),
        0.5 * (w * z2 + (1.0 - o) * z1),
    ])
}

/// Driven spin: E = diag(e^{−iωt/2}, e^{iωt/2}) and a rotation by Δt about
/// (ω₁, 0, Ω)/Δ with Ω = ω₀ − ω.
pub fn rf_propagator(omega_rf: f64, omega0: f64, omega1: f64, t: f64) -> Result<EvolutionPair> {
    if ![omega_rf, omega0, omega1, t].iter().all(|v| v.is_finite()) {
        return Err(SpinError::NonFinite { context: "rf propagator" });
    }
    let big_omega = omega0 - omega_rf;
    let delta = big_omega.hypot(omega1);
    Ok(EvolutionPair::new(
        static_propagator(omega_rf, t),
        rotation_unchecked(omega1, 0.0, big_omega, delta, t),
    ))
}

/// cos(θ/2)·I − i sin(θ/2)(u·σ).
pub fn rotation_matrix(u: [f64; 3], theta: f64) -> Result<ComplexMatrix> {
    if !u.iter().chain(std::iter::once(&theta)).all(|v| v.is_finite()) {
        return Err(SpinError::NonFinite { context: "rotation" });
    }
    let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if (norm - 1.0).abs() > AXIS_TOL {
        return Err(SpinError::NonUnitAxis { norm });
    }
    let (s, co) = (0.5 * theta).sin_cos();
    let mut generator = ComplexMatrix::zeros(2)?;
    for axis in Axis::ALL {
        generator = generator.add(&pauli(axis).scale(c(u[axis.index()], 0.0)))?;
    }
    ComplexMatrix::identity(2)?
        .scale(c(co, 0.0))
        .sub(&generator.scale(I * s))
}

/// Static field plus rest constant: E = e^{−iKt/2}·I and a rotation by Δt
/// about (K, 0, ω₀)/Δ with Δ = √(ω₀² + K²).
pub fn rest_propagator(omega0: f64, k_rest: f64, t: f64) -> Result<EvolutionPair> {
    if ![omega0, k_rest, t].iter().all(|v| v.is_finite()) {
        return Err(SpinError::NonFinite { context: "rest propagator" });
    }
    let g = phase(-0.5 * k_rest * t);
    let delta = omega0.hypot(k_rest);
    Ok(EvolutionPair::new(
        ComplexMatrix::new2(g, ZERO, ZERO, g),
        rotation_unchecked(k_rest, 0.0, omega0, delta, t),
    ))
}

/// General constant-field spin in the frame rotating at `omega_rf`:
/// E = diag(e^{−i(ω_rf+K)t/2}, e^{i(ω_rf−K)t/2}) and a rotation by Δt about
/// (Re w, −Im w, Ω)/Δ with Ω = ω_Z − ω_rf and w the transverse coupling.
pub fn general_propagator(p: &FieldParams, t: f64) -> Result<EvolutionPair> {
    p.validate()?;
    if !t.is_finite() {
        return Err(SpinError::NonFinite { context: "time" });
    }
    let d = p.derived();
    let e_part = ComplexMatrix::new2(
        phase(-0.5 * (p.omega_rf + p.k_rest) * t),
        ZERO,
        ZERO,
        phase(0.5 * (p.omega_rf - p.k_rest) * t),
    );
    let r_part = rotation_unchecked(d.coupling.re, -d.coupling.im, d.big_omega, d.delta, t);
    Ok(EvolutionPair::new(e_part, r_part))
}

/// Ordered product of piecewise propagators; the first segment acts first.
pub fn compose_segments(segments: &[(ComplexMatrix, f64)]) -> Result<ComplexMatrix> {
    let (first, rest) = segments
        .split_first()
        .ok_or_else(|| SpinError::InvalidArgument("no segments to compose".into()))?;
    let mut total = first.0.clone();
    for (m, _) in rest {
        total = m.mul(&total)?;
    }
    Ok(total)
}

/// Applies `x₂(t) = e^{−iωt/2}(C₁e^{iΔt/2} + C₂e^{−iΔt/2})` and the companion
/// `x₁(t)` directly from the coefficients.
pub fn rf_state_from_coefficients(coeffs: &[Complex64; 4], omega_rf: f64, delta: f64, t: f64) -> (Complex64, Complex64) {
    let (plus, minus) = (phase(0.5 * delta * t), phase(-0.5 * delta * t));
    let x2 = phase(-0.5 * omega_rf * t) * (coeffs[0] * plus + coeffs[1] * minus);
    let x1 = phase(0.5 * omega_rf * t) * (coeffs[2] * plus + coeffs[3] * minus);
    (x2, x1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;
    use crate::state::make_state;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        let d = a.max_abs_diff(b);
        assert!(d <= tol, "deviation {d:e} > {tol:e}\n{a:?}\n{b:?}");
    }

    fn id() -> ComplexMatrix {
        ComplexMatrix::identity(2).unwrap()
    }

    #[test]
    fn static_period_is_4pi() {
        let w0 = 2.7e8;
        assert_close(&static_propagator(w0, 0.0), &id(), 0.0);
        assert_close(&static_propagator(w0, 2.0 * PI / w0), &id().scale(c(-1.0, 0.0)), 1e-12);
        assert_close(&static_propagator(w0, 4.0 * PI / w0), &id(), 1e-12);
    }

    #[test]
    fn rf_without_drive_is_static() {
        for &(w, w0, t) in &[(1e6, 1e6, 1e-5), (3e5, 2.7e8, 4e-7), (-2e3, 5e3, 0.3)] {
            let p = rf_propagator(w, w0, 0.0, t).unwrap();
            assert_close(&p.product, &static_propagator(w0, t), 1e-12);
        }
    }

    #[test]
    fn resonance_rotation() {
        let (w0, w1, t) = (2.0e6, 3.0e4, 2.1e-5);
        let p = rf_propagator(w0, w0, w1, t).unwrap();
        let (s, co) = (0.5 * w1 * t).sin_cos();
        let expected = ComplexMatrix::new2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0));
        assert_close(&p.r_part, &expected, 1e-15);
        assert_close(&p.e_part, &static_propagator(w0, t), 0.0);
    }

    #[test]
    fn half_pi_pulse_entries() {
        let w1 = 1e4;
        let p = rf_propagator(5e5, 5e5, w1, PI / (2.0 * w1)).unwrap();
        assert!((p.r_part.get(0, 0) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((p.r_part.get(0, 1) - c(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn rf_factors_do_not_commute() {
        let p = rf_propagator(0.9e6, 1e6, 1e4, 1e-5).unwrap();
        let er = p.e_part.mul(&p.r_part).unwrap();
        let re = p.r_part.mul(&p.e_part).unwrap();
        assert!(er.max_abs_diff(&re) > 1e-3);
    }

    #[test]
    fn coefficients_examples() {
        let ground = PolarState::ground();
        let cs = rf_coefficients(&ground, 0.0, 2.0, 2.0).unwrap();
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (z, e) in cs.iter().zip(expect) {
            assert!((z - c(e, 0.0)).norm() < 1e-15);
        }
        let p = PolarState::new(0.6, 0.8, 0.4, -1.2).unwrap();
        let cs = rf_coefficients(&p, 3.0, 3.0, 0.0).unwrap();
        assert!(cs[0].norm() < 1e-15 && cs[3].norm() < 1e-15);
        assert!((cs[1] - Complex64::from_polar(0.8, -1.2)).norm() < 1e-15);
        assert!((cs[2] - Complex64::from_polar(0.6, 0.4)).norm() < 1e-15);
        assert_eq!(rf_coefficients(&p, 0.0, 0.0, 0.0), Err(SpinError::DegenerateDelta));
    }

    #[test]
    fn coefficients_reproduce_propagated_state() {
        let p = PolarState::new(0.6, 0.8, 0.4, -1.2).unwrap();
        let (w, w0, w1, t) = (9.7e5, 1e6, 2.3e4, 3.3e-5);
        let big: f64 = w0 - w;
        let delta = big.hypot(w1);
        let cs = rf_coefficients(&p, big, delta, w1).unwrap();
        let (x2, x1) = rf_state_from_coefficients(&cs, w, delta, t);
        let s = rf_propagator(w, w0, w1, t)
            .unwrap()
            .product
            .apply_spin(&make_state(&p).unwrap())
            .unwrap();
        assert!((s.x2 - x2).norm() < 1e-12);
        assert!((s.x1 - x1).norm() < 1e-12);
    }

    #[test]
    fn rotation_matrix_matches_rf_rotation() {
        let (w, w0, w1, t) = (1.1e6, 1e6, 4e4, 7e-6);
        let big: f64 = w0 - w;
        let d = big.hypot(w1);
        let r = rotation_matrix([w1 / d, 0.0, big / d], d * t).unwrap();
        assert_close(&r, &rf_propagator(w, w0, w1, t).unwrap().r_part, 1e-15);
        assert_close(&rotation_matrix([0.0, 0.0, 1.0], 0.0).unwrap(), &id(), 0.0);
        let th = 1.3;
        let x = rotation_matrix([1.0, 0.0, 0.0], th).unwrap();
        let (s, co) = (0.5 * th).sin_cos();
        assert_close(&x, &ComplexMatrix::new2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)), 1e-16);
        assert!(matches!(rotation_matrix([1.0, 1.0, 0.0], 1.0), Err(SpinError::NonUnitAxis { .. })));
    }

    #[test]
    fn rest_reductions() {
        let (w0, t) = (3.1e5, 2.2e-5);
        assert_close(&rest_propagator(w0, 0.0, t).unwrap().product, &static_propagator(w0, t), 1e-12);
        let k = 1e3;
        let p = rest_propagator(0.0, k, t).unwrap();
        let x = rotation_matrix([1.0, 0.0, 0.0], k * t).unwrap().scale(phase(-0.5 * k * t));
        assert_close(&p.product, &x, 1e-14);
        // E carries no ω₀ dependence.
        let a = rest_propagator(1e5, k, t).unwrap();
        let b = rest_propagator(7e7, k, t).unwrap();
        assert_eq!(a.e_part, b.e_part);
        assert_close(&rest_propagator(0.0, 0.0, t).unwrap().product, &id(), 0.0);
    }

    #[test]
    fn general_reductions() {
        let (w0, k, t) = (2.5e5, 40.0, 3e-5);
        let g = general_propagator(&FieldParams::static_field(w0), t).unwrap();
        assert_close(&g.product, &static_propagator(w0, t), 1e-12);
        let g = general_propagator(&FieldParams::rest(w0, k), t).unwrap();
        let r = rest_propagator(w0, k, t).unwrap();
        assert_close(&g.product, &r.product, 1e-12);
        assert_close(&g.r_part, &r.r_part, 1e-12);
        let (w, w1) = (2.4e5, 7e3);
        let g = general_propagator(&FieldParams::rf(w, w0, w1), t).unwrap();
        let r = rf_propagator(w, w0, w1, t).unwrap();
        assert_close(&g.product, &r.product, 1e-12);
        assert_close(&g.r_part, &r.r_part, 1e-12);
        // Ω = ω_Z substitution: the lab-frame rotation with ω_Z = ω₀ − ω.
        let sub = FieldParams {
            omega_x: w1,
            ..FieldParams::static_field(w0 - w)
        };
        assert_close(&general_propagator(&sub, t).unwrap().r_part, &r.r_part, 1e-12);
    }

    #[test]
    fn derived_frequencies() {
        let p = FieldParams {
            omega_x: 300.0,
            omega_y: 400.0,
            k_rest: 50.0,
            ..FieldParams::static_field(1e5)
        };
        let d = p.derived();
        let w1sq = 300f64.powi(2) + 400f64.powi(2) + 50f64.powi(2) + 2.0 * 50.0 * 300.0;
        assert!((d.eff_omega1 * d.eff_omega1 - w1sq).abs() < 1e-9);
        assert!((d.delta - (1e10 + w1sq).sqrt()).abs() < 1e-9);
        let sym = FieldParams {
            symmetrize_k_coupling: true,
            ..p
        };
        let w1sq = 500f64.powi(2) + 50f64.powi(2) + 2.0 * 50.0 * 500.0;
        assert!((sym.derived().eff_omega1.powi(2) - w1sq).abs() < 1e-8);
        let offset = FieldParams::with_rest_offset(1e5, 50.0, 0.0, 0.0);
        assert_eq!(offset.omega_z, 1e5 - 50.0);
    }

    #[test]
    fn factorization_and_unitarity() {
        let p = FieldParams {
            omega_x: -300.0,
            omega_y: 400.0,
            omega_rf: 9e4,
            k_rest: 50.0,
            ..FieldParams::static_field(1e5)
        };
        let g = general_propagator(&p, 1e-4).unwrap();
        assert!(g.product.is_unitary(1e-12));
        assert!((g.r_part.det2().unwrap() - ONE).norm() < 1e-12);
        assert!((g.e_part.det2().unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compose_order() {
        let (w0, t1, t2) = (1e5, 1e-5, 2.5e-5);
        let single = static_propagator(w0, t1);
        assert_eq!(compose_segments(&[(single.clone(), t1)]).unwrap(), single);
        let two = compose_segments(&[(static_propagator(w0, t1), t1), (static_propagator(w0, t2), t2)]).unwrap();
        assert_close(&two, &static_propagator(w0, t1 + t2), 1e-12);
        let pulse = rf_propagator(w0, w0, 1e4, 1e-4).unwrap().product;
        let delay = rest_propagator(w0, 3e3, 1e-5).unwrap().product;
        let a = compose_segments(&[(pulse.clone(), 1e-4), (delay.clone(), 1e-5)]).unwrap();
        let b = compose_segments(&[(delay, 1e-5), (pulse, 1e-4)]).unwrap();
        assert!(a.max_abs_diff(&b) > 1e-3);
        assert!(compose_segments(&[]).is_err());
    }
}
