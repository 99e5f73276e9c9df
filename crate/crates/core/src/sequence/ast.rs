//! Parsed form of a sequence file. All quantities are stored in SI units
//! (T, rad/s, s, m, T/m, K).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::matrix::Axis;

/// Source position, 1-based. Ignored by structural equality.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn new(line: usize, column: usize) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// A field given either in tesla or directly as an angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldValue {
    Tesla(f64),
    RadPerSec(f64),
}

impl FieldValue {
    /// ω = −γB for tesla values, the value itself otherwise.
    pub fn omega(self, gamma: f64) -> f64 {
        match self {
            FieldValue::Tesla(b) => -gamma * b,
            FieldValue::RadPerSec(w) => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    /// ω_rf equal to the Larmor frequency of the declared `b0`.
    Resonant,
    RadPerSec(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Polarization {
    Value { value: f64 },
    Boltzmann { temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecl {
    pub n: f64,
    pub polarization: Polarization,
    pub seed: Option<u64>,
    /// Monte-Carlo phase draws; analytic phase average when absent.
    pub draws: Option<u64>,
}

impl Default for EnsembleDecl {
    fn default() -> Self {
        Self {
            n: 1.0,
            polarization: Polarization::Value { value: 1.0 },
            seed: None,
            draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDecl {
    pub name: String,
    pub spins: usize,
    /// Static field components, all in the same unit family.
    pub field: [FieldValue; 3],
    /// Position in metres, used by gradients.
    pub position: [f64; 3],
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RfPulse {
        /// Drive amplitude; tesla values give ω₁ = |γB₁|.
        amplitude: FieldValue,
        carrier: Carrier,
        duration: f64,
        /// Drive phase in rad.
        phase: f64,
        /// Restrict the pulse to one domain; all domains otherwise.
        target: Option<String>,
    },
    Delay {
        duration: f64,
    },
    Gradient {
        axis: Axis,
        /// T/m.
        strength: f64,
        duration: f64,
    },
    Acquire {
        n: usize,
        dt: f64,
        reference: Option<Carrier>,
    },
}

impl EventKind {
    pub fn duration(&self) -> f64 {
        match *self {
            EventKind::RfPulse { duration, .. } | EventKind::Delay { duration } | EventKind::Gradient { duration, .. } => {
                duration
            }
            EventKind::Acquire { n, dt, .. } => n as f64 * dt,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EventKind::RfPulse { .. } => "rf_pulse",
            EventKind::Delay { .. } => "delay",
            EventKind::Gradient { .. } => "gradient",
            EventKind::Acquire { .. } => "acquire",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Start time in s, the sum of all earlier durations.
    pub start: f64,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceProgram {
    pub gamma: Option<f64>,
    pub hbar: Option<f64>,
    pub b0: Option<FieldValue>,
    /// Rest constant K in rad/s.
    pub k_rest: Option<f64>,
    pub ensemble: Option<EnsembleDecl>,
    pub domains: Vec<DomainDecl>,
    pub events: Vec<Event>,
}

impl SequenceProgram {
    pub fn duration(&self) -> f64 {
        self.events.iter().map(|e| e.kind.duration()).sum()
    }

    pub fn acquire(&self) -> Option<&Event> {
        self.events.iter().find(|e| matches!(e.kind, EventKind::Acquire { .. }))
    }

    pub fn domain(&self, name: &str) -> Option<&DomainDecl> {
        self.domains.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SyntaxError,
    UnknownUnit,
    InvalidValue,
    DuplicateDeclaration,
    DuplicateAcquire,
    UndeclaredDomain,
    UnsupportedCombination,
    NoAcquire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            kind,
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    pub fn warning(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(kind, span, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}[{:?}]: {}", self.line, self.column, self.kind, self.message)
    }
}
