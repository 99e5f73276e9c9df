//! Pulse-sequence language: parsing, canonical printing, compilation to
//! evolution segments and FID synthesis.

pub mod ast;
pub mod compile;
pub mod parser;
pub mod printer;

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use ast::{Diagnostic, DiagnosticKind, SequenceProgram, Severity};
pub use compile::{compile_sequence, CompiledSequence, SegmentKind, SignalModel};
pub use parser::{parse_sequence, Parsed};
pub use printer::print_program;

use crate::error::{Result, SpinError};
use crate::matrix::ComplexMatrix;
use crate::propagator::compose_segments;
use crate::spectra::{find_peaks, spectrum_with, Convention, Fid, Peak};
use crate::suscept::{chi_noise_closed_form, monte_carlo_phase_average};

/// Peaks kept in a run report.
pub const REPORT_PEAKS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub event: usize,
    pub label: String,
    pub start: f64,
    pub duration: f64,
    pub kinds: Vec<SegmentKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: SignalModel,
    pub n_total: f64,
    pub polarization: f64,
    pub domains: Vec<String>,
    pub segments: Vec<SegmentSummary>,
    pub duration: f64,
    /// Seed actually used for Monte-Carlo phase draws.
    pub seed: Option<u64>,
    /// Monte-Carlo estimate of ⟨e^{i(φ₂−φ₁)}⟩ and its standard error.
    pub phase_mean: Option<Complex64>,
    pub phase_std_error: Option<f64>,
    pub samples: usize,
    pub dt: Option<f64>,
    pub t0: Option<f64>,
    pub reference: Option<f64>,
    pub peaks: Vec<Peak>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    pub fid: Option<Fid>,
    pub report: RunReport,
}

/// Either source diagnostics or a numerical failure while running.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Diagnostics(Vec<Diagnostic>),
    Runtime(SpinError),
}

impl From<SpinError> for RunError {
    fn from(e: SpinError) -> Self {
        RunError::Runtime(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Diagnostics(ds) => {
                for (i, d) in ds.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
            RunError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Highest demodulated angular frequency present in the FID.
fn bandwidth(c: &CompiledSequence, reference: f64) -> f64 {
    let Some(acq) = c.segments.get(c.preparation().len()) else {
        return 0.0;
    };
    acq.per_domain
        .iter()
        .flat_map(|s| {
            let d = s.params.derived();
            let line = if s.params.omega_z == 0.0 { d.delta } else { s.params.omega_z.signum() * d.delta };
            match c.model {
                SignalModel::ExactPhaseAverage => vec![line],
                SignalModel::NoiseClosedForm => vec![line, 2.0 * line],
            }
        })
        .map(|w| (w - reference).abs())
        .fold(0.0, f64::max)
}

fn density(polarization: f64, coherence: Complex64) -> ComplexMatrix {
    let r2sq = 0.5 * (1.0 + polarization);
    let r1sq = 0.5 * (1.0 - polarization);
    let off = (r1sq * r2sq).sqrt() * coherence;
    ComplexMatrix::new2(
        Complex64::new(r2sq, 0.0),
        off,
        off.conj(),
        Complex64::new(r1sq, 0.0),
    )
}

/// Executes a compiled program. `default_seed` is used for Monte-Carlo
/// phase draws when the program does not fix its own seed.
pub fn run_compiled(c: &CompiledSequence, default_seed: u64) -> Result<SequenceRun> {
    let seed = c.seed.unwrap_or(default_seed);
    let mc = match (c.model, c.draws) {
        (SignalModel::ExactPhaseAverage, Some(draws)) => {
            Some(monte_carlo_phase_average(seed, draws, |phi| Complex64::from_polar(1.0, phi)))
        }
        _ => None,
    };
    let mut report = RunReport {
        model: c.model,
        n_total: c.n_total,
        polarization: c.polarization,
        domains: c.domains.iter().map(|d| d.name.clone()).collect(),
        segments: c
            .segments
            .iter()
            .map(|s| SegmentSummary {
                event: s.event,
                label: s.label.clone(),
                start: s.start,
                duration: s.duration,
                kinds: s.per_domain.iter().map(|d| d.kind).collect(),
            })
            .collect(),
        duration: c.duration(),
        seed: mc.map(|_| seed),
        phase_mean: mc.map(|m| m.mean),
        phase_std_error: mc.map(|m| m.std_error()),
        samples: 0,
        dt: None,
        t0: None,
        reference: None,
        peaks: Vec::new(),
    };
    let Some(acq) = c.acquire else {
        return Ok(SequenceRun { fid: None, report });
    };
    let reference = acq.reference.unwrap_or(0.0);
    let rate = 1.0 / acq.dt;
    let required = 2.0 * bandwidth(c, reference) / TAU;
    if rate <= required {
        return Err(SpinError::NyquistViolation { rate, required });
    }

    let prep = c.preparation();
    let acq_seg = &c.segments[prep.len()];
    let chi_scale = c.constants.chi_scale();
    let mut samples = vec![Complex64::new(0.0, 0.0); acq.n];
    for (d_idx, dom) in c.domains.iter().enumerate() {
        let share = c.n_total * dom.weight;
        let free = &acq_seg.per_domain[d_idx];
        match c.model {
            SignalModel::ExactPhaseAverage => {
                let steps = prep
                    .iter()
                    .map(|s| Ok((s.per_domain[d_idx].propagator(s.duration)?, s.duration)))
                    .collect::<Result<Vec<_>>>()?;
                let u_prep = if steps.is_empty() {
                    ComplexMatrix::identity(2)?
                } else {
                    compose_segments(&steps)?
                };
                let rho = u_prep
                    .mul(&density(c.polarization, mc.map_or(Complex64::new(0.0, 0.0), |m| m.mean)))?
                    .mul(&u_prep.adjoint())?;
                for (k, v) in samples.iter_mut().enumerate() {
                    let u = free.propagator(k as f64 * acq.dt)?;
                    let r = u.mul(&rho)?.mul(&u.adjoint())?;
                    *v += share * chi_scale * r.get(0, 1);
                }
            }
            SignalModel::NoiseClosedForm => {
                let phase: f64 = prep.iter().map(|s| s.omega_shift[d_idx] * s.duration).sum();
                let twist = Complex64::from_polar(1.0, -phase);
                for (k, v) in samples.iter_mut().enumerate() {
                    let t = acq.start + k as f64 * acq.dt;
                    let chi = chi_noise_closed_form(1.0, c.polarization, c.k_rest, free.params.omega_z, t, &c.constants)?;
                    *v += share * chi * twist;
                }
            }
        }
    }
    if acq.reference.is_some() {
        for (k, v) in samples.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, reference * k as f64 * acq.dt);
        }
    }
    let fid = Fid::new(acq.dt, acq.start, samples)?;
    let mut peaks = find_peaks(&spectrum_with(&fid, Convention::NegativeFrequencyFolded));
    peaks.truncate(REPORT_PEAKS);
    report.samples = acq.n;
    report.dt = Some(acq.dt);
    report.t0 = Some(acq.start);
    report.reference = acq.reference;
    report.peaks = peaks;
    Ok(SequenceRun { fid: Some(fid), report })
}

/// Parses, compiles and runs sequence source text.
pub fn run_source(source: &str, default_seed: u64) -> std::result::Result<(SequenceRun, Vec<Diagnostic>), RunError> {
    let parsed = parse_sequence(source).map_err(RunError::Diagnostics)?;
    let compiled = compile_sequence(&parsed.program).map_err(|d| RunError::Diagnostics(vec![d]))?;
    Ok((run_compiled(&compiled, default_seed)?, parsed.warnings))
}
