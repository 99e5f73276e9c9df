//! Fixed-step RK4 integration of iħ∂ψ/∂t = H(t)ψ, used as an independent
//! reference for every closed form.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::{Draw, PropagatorBuilder};
use crate::error::{Result, SpinError};
use crate::matrix::{ComplexMatrix, StateVector, ZERO};
use crate::tolerance::{HERMITIAN_TOL, NORM_DRIFT_TOL, ORACLE_TOL};

type EvalFn = dyn Fn(f64) -> ComplexMatrix + Send + Sync;

/// Time-dependent Hermitian Hamiltonian.
#[derive(Clone)]
pub struct HamiltonianFn {
    dim: usize,
    hbar: f64,
    /// Extra frequency (rad/s) that the step size must resolve, e.g. an RF carrier.
    carrier: f64,
    eval: Arc<EvalFn>,
}

impl std::fmt::Debug for HamiltonianFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianFn")
            .field("dim", &self.dim)
            .field("hbar", &self.hbar)
            .field("carrier", &self.carrier)
            .finish_non_exhaustive()
    }
}

impl HamiltonianFn {
    pub fn new(dim: usize, hbar: f64, eval: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static) -> Self {
        Self {
            dim,
            hbar,
            carrier: 0.0,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(h: ComplexMatrix, hbar: f64) -> Self {
        Self::new(h.dim(), hbar, move |_| h.clone())
    }

    pub fn with_carrier(mut self, omega: f64) -> Self {
        self.carrier = omega.abs();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eval(&self, t: f64) -> ComplexMatrix {
        (self.eval)(t)
    }

    /// max(‖H(0)‖∞/ħ, carrier), in rad/s.
    pub fn max_frequency(&self) -> f64 {
        (self.eval(0.0).inf_norm() / self.hbar).max(self.carrier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt_max: f64,
    pub steps_per_period: usize,
    pub renormalize: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt_max: f64::INFINITY,
            steps_per_period: 200,
            renormalize: false,
        }
    }
}

impl IntegrationConfig {
    /// Setting used by the validation suite to reach the 1e−8 comparison tolerance.
    pub fn validation() -> Self {
        Self {
            steps_per_period: 1000,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return Err(SpinError::InvalidArgument("dt_max must be positive".into()));
        }
        if self.steps_per_period < 50 {
            return Err(SpinError::InvalidArgument(format!(
                "steps_per_period must be at least 50, got {}",
                self.steps_per_period
            )));
        }
        Ok(())
    }

    /// Number of equal steps covering `t_final`: dt = 2π/(steps_per_period·f_max), capped by dt_max.
    pub fn step_count(&self, f_max: f64, t_final: f64) -> usize {
        if t_final == 0.0 {
            return 0;
        }
        let mut dt = self.dt_max;
        if f_max > 0.0 {
            dt = dt.min(TAU / (self.steps_per_period as f64 * f_max));
        }
        if !dt.is_finite() {
            return 1;
        }
        (t_final.abs() / dt).ceil().max(1.0) as usize
    }
}

/// States sampled at every integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn check_sample(h: &ComplexMatrix, t: f64) -> Result<()> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs().max(f64::MIN_POSITIVE) {
        return Err(SpinError::NonHermitianSample { t, deviation });
    }
    Ok(())
}

/// `out[:, j] = -(i/ħ)·H·y[:, j]` for a column-major block of `cols` vectors.
fn derivative(h: &ComplexMatrix, y: &[Complex64], cols: usize, hbar: f64, out: &mut [Complex64]) {
    let n = h.dim();
    let entries = h.entries();
    let factor = Complex64::new(0.0, -1.0 / hbar);
    for j in 0..cols {
        let col = &y[j * n..(j + 1) * n];
        for i in 0..n {
            let row = &entries[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(col) {
                acc += a * b;
            }
            out[j * n + i] = factor * acc;
        }
    }
}

fn column_norm_drift(y: &[Complex64], n: usize, reference: &[f64]) -> f64 {
    reference
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let norm = y[j * n..(j + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (norm - r).abs()
        })
        .fold(0.0, f64::max)
}

/// Integrates a block of column vectors, calling `visit` after every step.
fn rk4_block(
    h: &HamiltonianFn,
    y: &mut Vec<Complex64>,
    cols: usize,
    t_final: f64,
    cfg: &IntegrationConfig,
    mut visit: impl FnMut(f64, &[Complex64]),
) -> Result<f64> {
    cfg.validate()?;
    if !t_final.is_finite() || t_final < 0.0 {
        return Err(SpinError::InvalidArgument(format!("t_final must be finite and >= 0, got {t_final}")));
    }
    let n = h.dim();
    let len = n * cols;
    let reference: Vec<f64> = (0..cols)
        .map(|j| y[j * n..(j + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let steps = cfg.step_count(h.max_frequency(), t_final);
    let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
    let mut drift: f64 = 0.0;
    let mut h0 = h.eval(0.0);
    check_sample(&h0, 0.0)?;
    for step in 0..steps {
        let t = step as f64 * dt;
        let hm = h.eval(t + 0.5 * dt);
        let h1 = h.eval(t + dt);
        check_sample(&hm, t + 0.5 * dt)?;
        check_sample(&h1, t + dt)?;
        derivative(&h0, y, cols, h.hbar, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        derivative(&hm, &tmp, cols, h.hbar, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        derivative(&hm, &tmp, cols, h.hbar, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + dt * k3[i];
        }
        derivative(&h1, &tmp, cols, h.hbar, &mut k4);
        for i in 0..len {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        drift = drift.max(column_norm_drift(y, n, &reference));
        if cfg.renormalize {
            for (j, r) in reference.iter().enumerate() {
                let col = &mut y[j * n..(j + 1) * n];
                let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    col.iter_mut().for_each(|z| *z *= r / norm);
                }
            }
        }
        visit(t + dt, y);
        h0 = h1;
    }
    if drift > NORM_DRIFT_TOL {
        return Err(SpinError::StepTooLarge {
            drift,
            limit: NORM_DRIFT_TOL,
        });
    }
    Ok(drift)
}

/// Classic fixed-step RK4 of dψ/dt = −(i/ħ)H(t)ψ from t = 0 to `t_final`.
pub fn integrate_rk4(
    h: &HamiltonianFn,
    psi0: &StateVector,
    t_final: f64,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    if psi0.len() != h.dim() {
        return Err(SpinError::DimensionMismatch {
            expected: h.dim(),
            found: psi0.len(),
        });
    }
    let deviation = psi0.norm() - 1.0;
    if deviation.abs() > crate::tolerance::NORM_TOL {
        return Err(SpinError::NormViolation { deviation });
    }
    let mut y = psi0.amplitudes().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let drift = rk4_block(h, &mut y, 1, t_final, cfg, |t, y| {
        times.push(t);
        states.push(StateVector::from_raw(y.to_vec()));
    })?;
    Ok(Trajectory {
        times,
        states,
        max_norm_drift: drift,
    })
}

/// Propagator U(t_final) obtained by integrating every basis column at once.
/// Returns the matrix and the largest column-norm drift.
pub fn propagate_rk4(h: &HamiltonianFn, t_final: f64, cfg: &IntegrationConfig) -> Result<(ComplexMatrix, f64)> {
    let n = h.dim();
    let mut y = vec![ZERO; n * n];
    for j in 0..n {
        y[j * n + j] = Complex64::new(1.0, 0.0);
    }
    let drift = rk4_block(h, &mut y, n, t_final, cfg, |_, _| {})?;
    // y is column-major; transpose into row-major storage.
    let mut rows = vec![ZERO; n * n];
    for j in 0..n {
        for i in 0..n {
            rows[i * n + j] = y[j * n + i];
        }
    }
    Ok((ComplexMatrix::from_row_major(n, rows)?, drift))
}

/// Matrix exponential by scaling and squaring of a Taylor series, for any
/// square matrix. Used as a reference independent of eigen-decomposition.
pub fn expm_series(m: &ComplexMatrix) -> ComplexMatrix {
    let norm = m.inf_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m.scale(Complex64::new(0.5f64.powi(squarings as i32), 0.0));
    let id = ComplexMatrix::identity(m.dim()).expect("valid dimension");
    let mut sum = id.clone();
    let mut term = id;
    for k in 1..=30 {
        term = term.mul(&scaled).expect("same dimension").scale(Complex64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term).expect("same dimension");
        if term.max_abs() < 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum).expect("same dimension");
    }
    sum
}

/// Largest closed-form versus RK4 deviations over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub builder: String,
    pub max_entry_error: f64,
    pub max_norm_drift: f64,
    pub samples: usize,
}

impl ComparisonReport {
    pub fn passes(&self) -> bool {
        self.max_entry_error < ORACLE_TOL && self.max_norm_drift < NORM_DRIFT_TOL
    }
}

pub fn compare_closed_form(
    builder: &dyn PropagatorBuilder,
    draw: &Draw,
    t_grid: &[f64],
    cfg: &IntegrationConfig,
) -> Result<ComparisonReport> {
    let h = builder.hamiltonian(draw)?;
    let mut report = ComparisonReport {
        builder: builder.name().to_string(),
        max_entry_error: 0.0,
        max_norm_drift: 0.0,
        samples: 0,
    };
    for &t in t_grid {
        let closed = builder.closed_form(draw, t)?;
        let (numeric, drift) = propagate_rk4(&h, t, cfg)?;
        report.max_entry_error = report.max_entry_error.max(closed.max_abs_diff(&numeric));
        report.max_norm_drift = report.max_norm_drift.max(drift);
        report.samples += 1;
    }
    Ok(report)
}

/// Per-builder outcome of the randomized validation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderValidation {
    pub builder: String,
    pub draws: usize,
    pub max_entry_error: f64,
    pub max_norm_drift: f64,
    pub failures: usize,
    pub errors: Vec<String>,
}

impl BuilderValidation {
    pub fn passes(&self) -> bool {
        self.failures == 0 && self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub steps_per_period: usize,
    pub entry_tolerance: f64,
    pub drift_tolerance: f64,
    pub builders: Vec<BuilderValidation>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.builders.iter().all(BuilderValidation::passes)
    }
}

/// Random draws for every builder, compared at the draw's own time. Each draw
/// uses its own RNG stream so results do not depend on scheduling.
pub fn validation_suite(
    builders: &[&dyn PropagatorBuilder],
    draws: usize,
    seed: u64,
    cfg: &IntegrationConfig,
) -> ValidationReport {
    let results = builders
        .iter()
        .enumerate()
        .map(|(b_idx, builder)| {
            let outcomes: Vec<std::result::Result<ComparisonReport, String>> = (0..draws)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(((b_idx as u64) << 32) | i as u64);
                    let draw = builder.sample(&mut rng);
                    compare_closed_form(*builder, &draw, &[draw.t], cfg).map_err(|e| e.to_string())
                })
                .collect();
            let mut v = BuilderValidation {
                builder: builder.name().to_string(),
                draws,
                max_entry_error: 0.0,
                max_norm_drift: 0.0,
                failures: 0,
                errors: Vec::new(),
            };
            for o in outcomes {
                match o {
                    Ok(r) => {
                        v.max_entry_error = v.max_entry_error.max(r.max_entry_error);
                        v.max_norm_drift = v.max_norm_drift.max(r.max_norm_drift);
                        if !r.passes() {
                            v.failures += 1;
                        }
                    }
                    Err(e) => {
                        v.failures += 1;
                        if v.errors.len() < 5 {
                            v.errors.push(e);
                        }
                    }
                }
            }
            v
        })
        .collect();
    ValidationReport {
        seed,
        steps_per_period: cfg.steps_per_period,
        entry_tolerance: ORACLE_TOL,
        drift_tolerance: NORM_DRIFT_TOL,
        builders: results,
    }
}
