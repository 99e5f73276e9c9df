//! Lowering of a parsed program to per-domain evolution segments.

use serde::{Deserialize, Serialize};

use super::ast::*;
use crate::error::Result;
use crate::matrix::ComplexMatrix;
use crate::propagator::{general_propagator, rest_propagator, rf_propagator, static_propagator, FieldParams};
use crate::state::{PhysicalConstants, HBAR, PROTON_GAMMA};
use crate::suscept::boltzmann_polarization;

/// Name of the domain created when a program declares none.
pub const BULK_DOMAIN: &str = "bulk";

/// Closed form used for one domain during one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Static,
    Rest,
    Rf,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSegment {
    pub kind: SegmentKind,
    pub params: FieldParams,
}

impl DomainSegment {
    /// Free evolution in the laboratory frame.
    fn free(params: FieldParams) -> Self {
        let kind = if params.omega_x != 0.0 || params.omega_y != 0.0 {
            SegmentKind::General
        } else if params.k_rest != 0.0 {
            SegmentKind::Rest
        } else {
            SegmentKind::Static
        };
        Self { kind, params }
    }

    pub fn propagator(&self, t: f64) -> Result<ComplexMatrix> {
        let p = &self.params;
        Ok(match self.kind {
            SegmentKind::Static => static_propagator(p.omega_z, t),
            SegmentKind::Rest => rest_propagator(p.omega_z, p.k_rest, t)?.product,
            SegmentKind::Rf => rf_propagator(p.omega_rf, p.omega_z, p.omega_x, t)?.product,
            SegmentKind::General => general_propagator(p, t)?.product,
        })
    }
}

/// One source event with the segment it produces in every domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub event: usize,
    pub label: String,
    pub start: f64,
    pub duration: f64,
    pub per_domain: Vec<DomainSegment>,
    /// Extra longitudinal frequency applied to each domain, nonzero only for gradients.
    pub omega_shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledDomain {
    pub name: String,
    pub spins: usize,
    /// Fraction of the ensemble in this domain.
    pub weight: f64,
    /// Free-precession frequencies (ω_X, ω_Y, ω_Z) in rad/s.
    pub omega: [f64; 3],
    pub position: [f64; 3],
}

impl CompiledDomain {
    pub fn is_transverse(&self) -> bool {
        self.omega[0] != 0.0 || self.omega[1] != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquireWindow {
    pub n: usize,
    pub dt: f64,
    pub start: f64,
    /// Demodulation frequency in rad/s; samples are multiplied by e^{iω_ref t}.
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalModel {
    /// Exact propagation of the phase-averaged density matrix.
    ExactPhaseAverage,
    /// Two-line rest-constant susceptibility per domain, for programs without RF.
    NoiseClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSequence {
    pub constants: PhysicalConstants,
    pub n_total: f64,
    pub polarization: f64,
    pub k_rest: f64,
    pub seed: Option<u64>,
    pub draws: Option<u64>,
    pub model: SignalModel,
    pub domains: Vec<CompiledDomain>,
    pub segments: Vec<Segment>,
    pub acquire: Option<AcquireWindow>,
}

impl CompiledSequence {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segments before the acquisition window.
    pub fn preparation(&self) -> &[Segment] {
        match self.segments.iter().position(|s| s.label == "acquire") {
            Some(i) => &self.segments[..i],
            None => &self.segments,
        }
    }
}

fn unsupported(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(DiagnosticKind::UnsupportedCombination, span, msg)
}

fn resolve(c: Carrier, omega0: Option<f64>, span: Span) -> std::result::Result<f64, Diagnostic> {
    match c {
        Carrier::RadPerSec(w) => Ok(w),
        Carrier::Resonant => omega0.ok_or_else(|| unsupported(span, "`resonant` needs a `field b0` declaration")),
    }
}

pub fn compile_sequence(p: &SequenceProgram) -> std::result::Result<CompiledSequence, Diagnostic> {
    let constants = PhysicalConstants {
        gamma: p.gamma.unwrap_or(PROTON_GAMMA),
        hbar: p.hbar.unwrap_or(HBAR),
    };
    let gamma = constants.gamma;
    let omega0 = p.b0.map(|b| b.omega(gamma));
    let k = p.k_rest.unwrap_or(0.0);

    let mut domains: Vec<CompiledDomain> = p
        .domains
        .iter()
        .map(|d| CompiledDomain {
            name: d.name.clone(),
            spins: d.spins,
            weight: 0.0,
            omega: d.field.map(|f| f.omega(gamma)),
            position: d.position,
        })
        .collect();
    if domains.is_empty() {
        match omega0 {
            Some(w) => domains.push(CompiledDomain {
                name: BULK_DOMAIN.into(),
                spins: 1,
                weight: 0.0,
                omega: [0.0, 0.0, w],
                position: [0.0; 3],
            }),
            None => {
                if let Some(e) = p.events.first() {
                    return Err(unsupported(e.span, "no `field b0` or domain declared"));
                }
            }
        }
    }
    let total_spins: usize = domains.iter().map(|d| d.spins).sum();
    for d in &mut domains {
        d.weight = d.spins as f64 / total_spins as f64;
    }

    let has_rf = p.events.iter().any(|e| matches!(e.kind, EventKind::RfPulse { .. }));
    if has_rf {
        if let Some((decl, _)) = p
            .domains
            .iter()
            .zip(&domains)
            .find(|(_, d)| d.is_transverse())
        {
            return Err(unsupported(
                decl.span,
                format!("domain `{}` has a static transverse field; RF pulses need a longitudinal field", decl.name),
            ));
        }
    }
    let model = if has_rf || domains.iter().any(|d| d.is_transverse()) {
        SignalModel::ExactPhaseAverage
    } else {
        SignalModel::NoiseClosedForm
    };

    let free = |d: &CompiledDomain, shift: f64| {
        DomainSegment::free(FieldParams {
            omega_x: d.omega[0],
            omega_y: d.omega[1],
            omega_z: d.omega[2] + shift,
            omega_rf: 0.0,
            k_rest: k,
            symmetrize_k_coupling: false,
        })
    };

    let mut segments = Vec::with_capacity(p.events.len());
    let mut acquire = None;
    for (idx, e) in p.events.iter().enumerate() {
        if acquire.is_some() {
            return Err(unsupported(e.span, "events after `acquire` are not supported"));
        }
        let mut shifts = vec![0.0; domains.len()];
        let per_domain = match &e.kind {
            EventKind::RfPulse {
                amplitude,
                carrier,
                phase,
                target,
                ..
            } => {
                let omega_rf = resolve(*carrier, omega0, e.span)?;
                let omega1 = amplitude.omega(gamma).abs();
                domains
                    .iter()
                    .map(|d| {
                        if target.as_ref().is_some_and(|t| *t != d.name) {
                            return free(d, 0.0);
                        }
                        let params = FieldParams {
                            omega_x: omega1 * phase.cos(),
                            omega_y: omega1 * phase.sin(),
                            omega_z: d.omega[2],
                            omega_rf,
                            k_rest: k,
                            symmetrize_k_coupling: false,
                        };
                        let kind = if *phase == 0.0 && k == 0.0 {
                            SegmentKind::Rf
                        } else {
                            SegmentKind::General
                        };
                        DomainSegment { kind, params }
                    })
                    .collect()
            }
            EventKind::Delay { .. } => domains.iter().map(|d| free(d, 0.0)).collect(),
            EventKind::Gradient { axis, strength, .. } => {
                for (s, d) in shifts.iter_mut().zip(&domains) {
                    *s = -gamma * strength * d.position[axis.index()];
                }
                domains.iter().zip(&shifts).map(|(d, s)| free(d, *s)).collect()
            }
            EventKind::Acquire { n, dt, reference } => {
                acquire = Some(AcquireWindow {
                    n: *n,
                    dt: *dt,
                    start: e.start,
                    reference: reference.map(|r| resolve(r, omega0, e.span)).transpose()?,
                });
                domains.iter().map(|d| free(d, 0.0)).collect()
            }
        };
        segments.push(Segment {
            event: idx,
            label: e.kind.label().to_string(),
            start: e.start,
            duration: e.kind.duration(),
            per_domain,
            omega_shift: shifts,
        });
    }

    let ens = p.ensemble.unwrap_or_default();
    let polarization = match ens.polarization {
        Polarization::Value { value } => value,
        Polarization::Boltzmann { temperature } => {
            let w = omega0.or_else(|| domains.first().map(|d| d.omega[2])).unwrap_or(0.0);
            // The lower-energy level holds the excess: x₂ when ω₀ < 0, x₁ otherwise.
            let magnitude = boltzmann_polarization(temperature, w, &constants)
                .map_err(|e| Diagnostic::error(DiagnosticKind::InvalidValue, Span::new(1, 1), e.to_string()))?;
            -w.signum() * magnitude
        }
    };

    Ok(CompiledSequence {
        constants,
        n_total: ens.n,
        polarization,
        k_rest: k,
        seed: ens.seed,
        draws: ens.draws,
        model,
        domains,
        segments,
        acquire,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::rotation_matrix;
    use crate::sequence::parse_sequence;
    use std::f64::consts::FRAC_PI_2;

    fn compile(src: &str) -> CompiledSequence {
        compile_sequence(&parse_sequence(src).unwrap().program).unwrap()
    }

    fn compile_err(src: &str) -> Diagnostic {
        compile_sequence(&parse_sequence(src).unwrap().program).unwrap_err()
    }

    #[test]
    fn delay_with_rest_constant_uses_rest_segment() {
        let c = compile("field b0 1 T\nrest k -6e-8 rad/s\ndelay 1 ms");
        assert_eq!(c.segments[0].per_domain[0].kind, SegmentKind::Rest);
        let c = compile("field b0 1 T\ndelay 1 ms");
        assert_eq!(c.segments[0].per_domain[0].kind, SegmentKind::Static);
    }

    #[test]
    fn resonant_pulse_is_a_pi_half_rotation() {
        let gamma = PROTON_GAMMA;
        let dur = FRAC_PI_2 / (gamma * 1e-3);
        let c = compile(&format!("field b0 7 T\npulse rf amp 1e-3 T carrier resonant dur {dur:e} s"));
        let seg = &c.segments[0].per_domain[0];
        assert_eq!(seg.kind, SegmentKind::Rf);
        assert_eq!(seg.params.omega_rf, seg.params.omega_z);
        let pair = rf_propagator(seg.params.omega_rf, seg.params.omega_z, seg.params.omega_x, dur).unwrap();
        let quarter = rotation_matrix([1.0, 0.0, 0.0], FRAC_PI_2).unwrap();
        assert!(pair.r_part.max_abs_diff(&quarter) < 1e-12);
    }

    #[test]
    fn gradient_splits_domains() {
        let c = compile(
            "domain a spins 1 field 0 0 1 T at -1 0 0 cm\ndomain b spins 1 field 0 0 1 T at 1 0 0 cm\n\
             gradient x 6e-3 T/m dur 1 ms\nacquire n 16 dt 1 us",
        );
        let s = &c.segments[0];
        let split = s.omega_shift[1] - s.omega_shift[0];
        assert!((split.abs() / (PROTON_GAMMA * 6e-3 * 0.02) - 1.0).abs() < 1e-14);
        for (seg, shift) in s.per_domain.iter().zip(&s.omega_shift) {
            assert_eq!(seg.params.omega_z, -PROTON_GAMMA + shift);
        }
        assert_eq!(c.model, SignalModel::NoiseClosedForm);
        assert_eq!(c.domains[0].weight, 0.5);
    }

    #[test]
    fn compilation_is_total_and_durations_add_up() {
        let c = compile("field b0 1 T\ndelay 1 ms\npulse rf amp 1 uT carrier resonant dur 2 us phase 1\nacquire n 8 dt 1 us");
        assert_eq!(c.segments.len(), 3);
        assert_eq!(c.segments[1].per_domain[0].kind, SegmentKind::General);
        assert!((c.duration() - (1e-3 + 2e-6 + 8e-6)).abs() < 1e-18);
        assert_eq!(c.preparation().len(), 2);
        assert_eq!(c.domains[0].name, BULK_DOMAIN);
    }

    #[test]
    fn unsupported_combinations() {
        let d = compile_err("domain a spins 1 field 1e-3 0 1 T\npulse rf amp 1 uT carrier 1 MHz dur 1 us");
        assert_eq!((d.kind, d.line), (DiagnosticKind::UnsupportedCombination, 1));
        let d = compile_err("domain a spins 1 field 0 0 1 T\npulse rf amp 1 uT carrier resonant dur 1 us");
        assert_eq!((d.kind, d.line), (DiagnosticKind::UnsupportedCombination, 2));
        let d = compile_err("field b0 1 T\nacquire n 8 dt 1 us\ndelay 1 s");
        assert_eq!((d.kind, d.line), (DiagnosticKind::UnsupportedCombination, 3));
        let d = compile_err("delay 1 s");
        assert_eq!((d.kind, d.line), (DiagnosticKind::UnsupportedCombination, 1));
    }

    #[test]
    fn targeted_pulse_leaves_other_domains_free() {
        let c = compile(
            "field b0 1 T\ndomain a spins 1 field 0 0 1 T\ndomain b spins 3 field 0 0 1 T\n\
             pulse rf amp 1 uT carrier resonant dur 1 us on b",
        );
        let kinds: Vec<_> = c.segments[0].per_domain.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SegmentKind::Static, SegmentKind::Rf]);
        assert_eq!(c.domains[1].weight, 0.75);
    }

    #[test]
    fn boltzmann_excess_sits_in_lower_level() {
        let c = compile("field b0 7 T\nensemble n 1 polarization boltzmann 300 K");
        assert!(c.polarization > 0.0);
        let c = compile("set gamma -1.76e11\nfield b0 1 T\nensemble n 1 polarization boltzmann 300 K");
        assert!(c.polarization < 0.0);
    }
}
