//! Complex susceptibility χ = γħ·x̄₁(t)·x₂(t) of single spins and ensembles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SpinError};
use crate::matrix::{c, ComplexMatrix};
use crate::propagator::FieldParams;
use crate::state::{PhysicalConstants, PolarState, K_BOLTZMANN};

/// Draws per Monte-Carlo chunk; each chunk owns one RNG stream.
pub const MC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilitySample {
    pub t: f64,
    pub value: Complex64,
}

/// Coefficients of χ(t) = γħ e^{−iωt}{D₁(r₂²−r₁²) + r₁r₂(D₂e^{i(φ₁−φ₂)} + D₃e^{i(φ₂−φ₁)})}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DTerms {
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl DTerms {
    /// Evaluates the coefficients for an explicit Ω, Δ and complex coupling w
    /// (w = ω₁ for a real drive). Δ = 0 gives the undriven limit.
    pub fn evaluate(big_omega: f64, delta: f64, coupling: Complex64, t: f64) -> Self {
        if delta == 0.0 {
            return Self {
                d1: c(0.0, 0.0),
                d2: c(0.0, 0.0),
                d3: c(1.0, 0.0),
            };
        }
        let (s, co) = (0.5 * delta * t).sin_cos();
        let o = big_omega / delta;
        let w = coupling / delta;
        Self {
            d1: w * c(o * s * s, co * s),
            d2: w * w * (s * s),
            d3: c(co * co - o * o * s * s, -2.0 * o * co * s),
        }
    }

    pub fn from_params(f: &FieldParams, t: f64) -> Self {
        let d = f.derived();
        Self::evaluate(d.big_omega, d.delta, d.coupling, t)
    }

    /// Curly-brace factor for a given polar state.
    pub fn bracket(&self, p: &PolarState) -> Complex64 {
        let rel = p.phi1 - p.phi2;
        self.d1 * p.polarization()
            + p.r1 * p.r2 * (self.d2 * Complex64::from_polar(1.0, rel) + self.d3 * Complex64::from_polar(1.0, -rel))
    }
}

fn frame(omega: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -omega * t)
}

/// γħ r₁r₂ e^{−i(ω₀t + φ₁ − φ₂)}.
pub fn chi_single_static(p: &PolarState, omega0: f64, t: f64, consts: &PhysicalConstants) -> Complex64 {
    consts.chi_scale() * p.r1 * p.r2 * frame(1.0, omega0 * t + p.phi1 - p.phi2)
}

/// χ(t) for a spin evolving under constant [`FieldParams`]. The oscillating
/// prefactor runs at the frame (carrier) frequency.
pub fn chi_single_general(
    p: &PolarState,
    f: &FieldParams,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<(Complex64, DTerms)> {
    f.validate()?;
    let terms = DTerms::from_params(f, t);
    Ok((consts.chi_scale() * frame(f.omega_rf, t) * terms.bracket(p), terms))
}

/// Phase-averaged single-spin χ after an arbitrary 2×2 propagator U, for a
/// spin with longitudinal polarization `pol` = r₂² − r₁².
pub fn chi_phase_averaged(u: &ComplexMatrix, pol: f64, consts: &PhysicalConstants) -> Result<Complex64> {
    if u.dim() != 2 {
        return Err(SpinError::DimensionMismatch { expected: 2, found: u.dim() });
    }
    let (r2sq, r1sq) = (0.5 * (1.0 + pol), 0.5 * (1.0 - pol));
    let v = r2sq * u.get(0, 0) * u.get(1, 0).conj() + r1sq * u.get(0, 1) * u.get(1, 1).conj();
    Ok(consts.chi_scale() * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhasePolicy {
    AnalyticAverage,
    MonteCarlo { seed: u64, draws: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Number of spins N (a real number: macroscopic samples exceed u64).
    pub n_total: f64,
    /// Mean of r₂² − r₁² over the ensemble.
    pub polarization: f64,
    pub phase_policy: PhasePolicy,
    pub params: FieldParams,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.n_total.is_finite() || self.n_total < 0.0 {
            return Err(SpinError::InvalidArgument(format!("spin count must be >= 0, got {}", self.n_total)));
        }
        if !self.polarization.is_finite() || self.polarization.abs() > 1.0 {
            return Err(SpinError::InvalidArgument(format!(
                "polarization must lie in [-1, 1], got {}",
                self.polarization
            )));
        }
        if let PhasePolicy::MonteCarlo { draws, .. } = self.phase_policy {
            if draws == 0 {
                return Err(SpinError::InvalidArgument("Monte-Carlo needs at least one draw".into()));
            }
        }
        Ok(())
    }
}

/// Ensemble susceptibility in its three scalings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleChi {
    /// Average over spins and phases of the single-spin χ.
    pub per_spin_mean: Complex64,
    /// N · per_spin_mean.
    pub total: Complex64,
    /// N · (N · polarization) · γħ e^{−iωt} D₁, the literal double-N form.
    pub n_squared: Complex64,
    /// Standard error of `per_spin_mean` for Monte-Carlo runs, else 0.
    pub std_error: f64,
}

impl EnsembleChi {
    fn from_mean(mean: Complex64, n: f64, std_error: f64) -> Self {
        Self {
            per_spin_mean: mean,
            total: n * mean,
            n_squared: n * n * mean,
            std_error,
        }
    }
}

/// Analytic phase average from explicit D-terms and frame frequency.
pub fn chi_ensemble_from_dterms(
    n: f64,
    polarization: f64,
    frame_omega: f64,
    terms: &DTerms,
    t: f64,
    consts: &PhysicalConstants,
) -> EnsembleChi {
    let mean = consts.chi_scale() * frame(frame_omega, t) * terms.d1 * polarization;
    EnsembleChi::from_mean(mean, n, 0.0)
}

/// Sample mean and standard error of a complex Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub mean: Complex64,
    /// Sample standard deviation σ = √(E|X − mean|²).
    pub sigma: f64,
    pub draws: u64,
}

impl MonteCarloStats {
    pub fn std_error(&self) -> f64 {
        self.sigma / (self.draws as f64).sqrt()
    }
}

/// Averages `f(φ)` over `draws` uniform phases φ ∈ (−π, π]. Chunks of
/// [`MC_CHUNK`] draws use independent streams of one seed and are combined in
/// chunk order, so the result does not depend on thread scheduling.
pub fn monte_carlo_phase_average(seed: u64, draws: u64, f: impl Fn(f64) -> Complex64 + Sync) -> MonteCarloStats {
    let chunks = draws.div_ceil(MC_CHUNK as u64);
    let partial: Vec<(Complex64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let count = (draws - k * MC_CHUNK as u64).min(MC_CHUNK as u64);
            let mut sum = c(0.0, 0.0);
            let mut sq = 0.0;
            for _ in 0..count {
                let phi = PI - rng.random_range(0.0..2.0 * PI);
                let v = f(phi);
                sum += v;
                sq += v.norm_sqr();
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = partial
        .iter()
        .fold((c(0.0, 0.0), 0.0), |(s, q), (ps, pq)| (s + ps, q + pq));
    let m = draws as f64;
    let mean = sum / m;
    let var = if draws > 1 {
        ((sq - m * mean.norm_sqr()) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    MonteCarloStats {
        mean,
        sigma: var.sqrt(),
        draws,
    }
}

/// Monte-Carlo mean of the phase-dependent part r₁r₂(D₂e^{−iφ} + D₃e^{iφ}),
/// where φ = φ₂ − φ₁.
pub fn phase_term_monte_carlo(terms: &DTerms, r1r2: f64, seed: u64, draws: u64) -> MonteCarloStats {
    monte_carlo_phase_average(seed, draws, |phi| {
        r1r2 * (terms.d2 * Complex64::from_polar(1.0, -phi) + terms.d3 * Complex64::from_polar(1.0, phi))
    })
}

pub fn chi_ensemble(spec: &EnsembleSpec, t: f64, consts: &PhysicalConstants) -> Result<EnsembleChi> {
    spec.validate()?;
    let terms = DTerms::from_params(&spec.params, t);
    let frame_omega = spec.params.omega_rf;
    match spec.phase_policy {
        PhasePolicy::AnalyticAverage => Ok(chi_ensemble_from_dterms(
            spec.n_total,
            spec.polarization,
            frame_omega,
            &terms,
            t,
            consts,
        )),
        PhasePolicy::MonteCarlo { seed, draws } => {
            let pol = spec.polarization;
            let r1r2 = 0.5 * (1.0 - pol * pol).sqrt();
            let scale = consts.chi_scale() * frame(frame_omega, t);
            let stats = monte_carlo_phase_average(seed, draws, |phi| {
                scale
                    * (terms.d1 * pol
                        + r1r2
                            * (terms.d2 * Complex64::from_polar(1.0, -phi)
                                + terms.d3 * Complex64::from_polar(1.0, phi)))
            });
            Ok(EnsembleChi::from_mean(stats.mean, spec.n_total, stats.std_error()))
        }
    }
}

fn two_line(amplitude: f64, omega0: f64, t: f64) -> Complex64 {
    0.5 * amplitude / omega0 * (frame(omega0, t) - frame(2.0 * omega0, t))
}

/// γħ(√2ω_X/2ω₀)(e^{−iω₀t} − e^{−2iω₀t})·N·(N·polarization).
pub fn chi_rf_closed_form(
    n: f64,
    polarization: f64,
    omega_x: f64,
    omega0: f64,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    if omega0 == 0.0 {
        return Err(SpinError::ZeroField);
    }
    Ok(consts.chi_scale() * two_line(2f64.sqrt() * omega_x, omega0, t) * n * (n * polarization))
}

/// Same two-line form with the rest constant K in place of √2ω_X.
pub fn chi_noise_closed_form(
    n: f64,
    polarization: f64,
    k_rest: f64,
    omega0: f64,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    if omega0 == 0.0 {
        return Err(SpinError::ZeroField);
    }
    Ok(consts.chi_scale() * two_line(k_rest, omega0, t) * n * (n * polarization))
}

/// Thermal two-level polarization tanh(ħ|ω₀|/(2k_B T)).
pub fn boltzmann_polarization(temperature: f64, omega0: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(SpinError::NonPositiveTemperature(temperature));
    }
    Ok((consts.hbar * omega0.abs() / (2.0 * K_BOLTZMANN * temperature)).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::general_propagator;
    use crate::state::{make_state, HBAR};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn unit() -> PhysicalConstants {
        PhysicalConstants::unit()
    }

    #[test]
    fn static_chi_cases() {
        let g = PolarState::ground();
        assert_eq!(chi_single_static(&g, 1e6, 0.3, &unit()), c(0.0, 0.0));
        let p = PolarState::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.4, 0.4).unwrap();
        let (w0, t) = (2e3, 1.7e-3);
        let v = chi_single_static(&p, w0, t, &unit());
        assert!((v - 0.5 * Complex64::from_polar(1.0, -w0 * t)).norm() < 1e-15);
        let q = PolarState::new(0.6, 0.8, 0.2, -0.9).unwrap();
        let m0 = chi_single_static(&q, w0, 0.0, &unit()).norm();
        for k in 1..10 {
            assert!((chi_single_static(&q, w0, k as f64 * 1e-3, &unit()).norm() - m0).abs() < 1e-15);
        }
    }

    #[test]
    fn general_chi_initial_instant_and_no_drive() {
        let p = PolarState::new(0.6, 0.8, 0.2, -0.9).unwrap();
        let f = FieldParams {
            omega_x: 300.0,
            k_rest: 20.0,
            ..FieldParams::static_field(1e4)
        };
        let (v, d) = chi_single_general(&p, &f, 0.0, &unit()).unwrap();
        assert_eq!((d.d1, d.d2, d.d3), (c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        assert!((v - 0.48 * Complex64::from_polar(1.0, -0.9 - 0.2)).norm() < 1e-15);
        let w0 = 1e4;
        for &t in &[1e-5, 3.3e-4, 0.1] {
            let (v, _) = chi_single_general(&p, &FieldParams::static_field(w0), t, &unit()).unwrap();
            assert!((v - chi_single_static(&p, w0, t, &unit())).norm() < 1e-12);
        }
    }

    #[test]
    fn general_chi_matches_propagated_amplitudes() {
        let p = PolarState::new(0.6, 0.8, 1.2, -0.3).unwrap();
        let f = FieldParams {
            omega_x: -300.0,
            omega_y: 400.0,
            omega_rf: 8e3,
            k_rest: 50.0,
            ..FieldParams::static_field(1e4)
        };
        for &t in &[0.0, 1e-4, 2.2e-3, 0.5] {
            let s = general_propagator(&f, t).unwrap().product.apply_spin(&make_state(&p).unwrap()).unwrap();
            let (v, _) = chi_single_general(&p, &f, t, &unit()).unwrap();
            assert!((v - s.coherence()).norm() < 1e-10);
            assert!(v.norm() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn phase_averaged_chi_agrees_with_d1() {
        let f = FieldParams::rf(1.01e5, 1e5, 2e3);
        let pol = 0.3;
        let t = 4e-4;
        let u = general_propagator(&f, t).unwrap().product;
        let avg = chi_phase_averaged(&u, pol, &unit()).unwrap();
        let spec = EnsembleSpec {
            n_total: 1.0,
            polarization: pol,
            phase_policy: PhasePolicy::AnalyticAverage,
            params: f,
        };
        let an = chi_ensemble(&spec, t, &unit()).unwrap();
        assert!((avg - an.per_spin_mean).norm() < 1e-12);
    }

    #[test]
    fn zero_polarization_is_silent() {
        let spec = EnsembleSpec {
            n_total: 1e6,
            polarization: 0.0,
            phase_policy: PhasePolicy::AnalyticAverage,
            params: FieldParams::rf(1e5, 1e5, 1e3),
        };
        for k in 0..10 {
            assert_eq!(chi_ensemble(&spec, k as f64 * 1e-5, &unit()).unwrap().total, c(0.0, 0.0));
        }
    }

    #[test]
    fn scalings_are_consistent() {
        let spec = EnsembleSpec {
            n_total: 1e3,
            polarization: 0.25,
            phase_policy: PhasePolicy::AnalyticAverage,
            params: FieldParams::rf(1e5, 1e5, 1e3),
        };
        let e = chi_ensemble(&spec, 3e-4, &unit()).unwrap();
        assert!((e.total - 1e3 * e.per_spin_mean).norm() < 1e-15 * e.total.norm().max(1.0));
        assert!((e.n_squared - 1e6 * e.per_spin_mean).norm() <= 1e-12 * e.n_squared.norm());
    }

    #[test]
    fn monte_carlo_is_reproducible_and_converges() {
        let spec = EnsembleSpec {
            n_total: 1.0,
            polarization: 0.4,
            phase_policy: PhasePolicy::MonteCarlo { seed: 11, draws: 200_000 },
            params: FieldParams::rf(1.02e5, 1e5, 5e3),
        };
        let t = 2.5e-4;
        let a = chi_ensemble(&spec, t, &unit()).unwrap();
        let b = chi_ensemble(&spec, t, &unit()).unwrap();
        assert_eq!(a, b);
        let an = chi_ensemble(
            &EnsembleSpec {
                phase_policy: PhasePolicy::AnalyticAverage,
                ..spec
            },
            t,
            &unit(),
        )
        .unwrap();
        assert!((a.per_spin_mean - an.per_spin_mean).norm() < 5.0 * a.std_error);
    }

    #[test]
    fn rf_closed_form_matches_dterm_ensemble() {
        let (n, pol, wx, w0) = (1e4, 1e-3, 2.0 * PI * 1e3, 2.0 * PI * 1e5);
        for k in 0..50 {
            let t = k as f64 * 3.7e-7;
            let terms = DTerms::evaluate(w0, w0, c(2f64.sqrt() * wx, 0.0), t);
            let e = chi_ensemble_from_dterms(n, pol, w0, &terms, t, &unit());
            let closed = chi_rf_closed_form(n, pol, wx, w0, t, &unit()).unwrap();
            assert!((e.n_squared - closed).norm() <= 1e-12 * closed.norm().max(1.0));
        }
        assert_eq!(chi_rf_closed_form(1.0, 1.0, 0.0, 1e3, 0.4, &unit()).unwrap(), c(0.0, 0.0));
        assert_eq!(chi_rf_closed_form(1.0, 1.0, 1.0, 0.0, 0.4, &unit()), Err(SpinError::ZeroField));
    }

    #[test]
    fn noise_to_rf_ratio() {
        let (n, pol, wx, w0, k) = (50.0, 0.2, 3e3, 1e6, -7.0);
        for i in 1..20 {
            let t = i as f64 * 1.3e-7;
            let rf = chi_rf_closed_form(n, pol, wx, w0, t, &unit()).unwrap();
            let noise = chi_noise_closed_form(n, pol, k, w0, t, &unit()).unwrap();
            let ratio = noise / rf;
            assert!((ratio - c(k / (2f64.sqrt() * wx), 0.0)).norm() < 1e-12);
        }
        assert_eq!(chi_noise_closed_form(1.0, 1.0, 0.0, 1e3, 0.4, &unit()).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn boltzmann_values() {
        let consts = PhysicalConstants::new(2.675e8, HBAR).unwrap();
        let w0 = consts.omega(7.0);
        let p = boltzmann_polarization(300.0, w0, &consts).unwrap();
        assert!((p - 2.383_765_083_134_178_8e-5).abs() < 1e-15);
        assert!(boltzmann_polarization(1e30, w0, &consts).unwrap() < 1e-25);
        assert!((boltzmann_polarization(1e-6, w0, &consts).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            boltzmann_polarization(0.0, w0, &consts),
            Err(SpinError::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn phase_terms_cancel() {
        let terms = DTerms::evaluate(3e3, 5e3, c(4e3, 0.0), 1.1e-3);
        let stats = phase_term_monte_carlo(&terms, 0.5, 3, 100_000);
        assert!(stats.mean.norm() < 5.0 * stats.std_error());
        assert!(stats.sigma > 0.0);
    }
}
