//! Line-oriented parser. Each non-blank line holds one statement; `#` starts a
//! comment. Errors are collected for every line before giving up.

use std::f64::consts::TAU;

use super::ast::*;
use crate::matrix::Axis;
use crate::tolerance::MAX_SPINS;

/// A successfully parsed program plus any warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub program: SequenceProgram,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    span: Span,
}

fn tokenize(line: &str, line_no: usize) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in code.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, col + 1)),
            (true, Some((b, c))) => {
                out.push(Token {
                    text: &code[b..byte],
                    span: Span::new(line_no, c),
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((b, c)) = start {
        out.push(Token {
            text: &code[b..],
            span: Span::new(line_no, c),
        });
    }
    out
}

type Step<T> = std::result::Result<T, Diagnostic>;

struct Line<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: Span,
}

impl<'a> Line<'a> {
    fn new(tokens: Vec<Token<'a>>, line_no: usize) -> Self {
        let end = tokens
            .last()
            .map(|t| Span::new(line_no, t.span.column + t.text.chars().count()))
            .unwrap_or(Span::new(line_no, 1));
        Self { tokens, pos: 0, end }
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Step<Token<'a>> {
        match self.peek() {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(Diagnostic::error(
                DiagnosticKind::SyntaxError,
                self.end,
                format!("expected {what}, found end of line"),
            )),
        }
    }

    fn keyword(&mut self, kw: &str) -> Step<Token<'a>> {
        let t = self.next(&format!("`{kw}`"))?;
        if t.text == kw {
            Ok(t)
        } else {
            Err(syntax(t, format!("expected `{kw}`, found `{}`", t.text)))
        }
    }

    fn number(&mut self, what: &str) -> Step<(f64, Span)> {
        let t = self.next(what)?;
        match t.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((v, t.span)),
            _ => Err(syntax(t, format!("expected {what}, found `{}`", t.text))),
        }
    }

    fn integer(&mut self, what: &str) -> Step<(u64, Span)> {
        let t = self.next(what)?;
        t.text
            .parse::<u64>()
            .map(|v| (v, t.span))
            .map_err(|_| syntax(t, format!("expected {what}, found `{}`", t.text)))
    }

    fn unit<T>(&mut self, family: &str, table: &[(&str, T)]) -> Step<T>
    where
        T: Copy,
    {
        let t = self.next(&format!("{family} unit"))?;
        table
            .iter()
            .find(|(name, _)| *name == t.text)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let known: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
                Diagnostic::error(
                    DiagnosticKind::UnknownUnit,
                    t.span,
                    format!("unknown {family} unit `{}` (expected one of {})", t.text, known.join(", ")),
                )
            })
    }

    fn ident(&mut self, what: &str) -> Step<Token<'a>> {
        let t = self.next(what)?;
        let mut chars = t.text.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            Ok(t)
        } else {
            Err(syntax(t, format!("expected {what}, found `{}`", t.text)))
        }
    }

    fn finish(&self) -> Step<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(syntax(t, format!("unexpected `{}`", t.text))),
        }
    }
}

fn syntax(t: Token<'_>, msg: String) -> Diagnostic {
    Diagnostic::error(DiagnosticKind::SyntaxError, t.span, msg)
}

fn invalid(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(DiagnosticKind::InvalidValue, span, msg)
}

#[derive(Clone, Copy)]
enum FieldUnit {
    Tesla(f64),
    RadPerSec,
}

const FIELD_UNITS: &[(&str, FieldUnit)] = &[
    ("T", FieldUnit::Tesla(1.0)),
    ("mT", FieldUnit::Tesla(1e-3)),
    ("uT", FieldUnit::Tesla(1e-6)),
    ("nT", FieldUnit::Tesla(1e-9)),
    ("rad/s", FieldUnit::RadPerSec),
];
const TIME_UNITS: &[(&str, f64)] = &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)];
const FREQ_UNITS: &[(&str, f64)] = &[("rad/s", 1.0), ("Hz", TAU), ("kHz", TAU * 1e3), ("MHz", TAU * 1e6)];
const LENGTH_UNITS: &[(&str, f64)] = &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3)];
const GRADIENT_UNITS: &[(&str, f64)] = &[("T/m", 1.0), ("mT/m", 1e-3)];
const PHASE_UNITS: &[(&str, f64)] = &[("rad", 1.0), ("deg", TAU / 360.0)];
const TEMPERATURE_UNITS: &[(&str, f64)] = &[("K", 1.0)];

/// Applies a unit scale. Decimal sub-units divide by an exact integer so that
/// `2.5 us` gives the same double as `2.5e-6 s`.
fn scaled(v: f64, scale: f64) -> f64 {
    let inv = 1.0 / scale;
    if scale < 1.0 && (inv - inv.round()).abs() < 1e-6 {
        v / inv.round()
    } else {
        v * scale
    }
}

fn field_value(v: f64, unit: FieldUnit) -> FieldValue {
    match unit {
        FieldUnit::Tesla(scale) => FieldValue::Tesla(scaled(v, scale)),
        FieldUnit::RadPerSec => FieldValue::RadPerSec(v),
    }
}

fn positive_duration(line: &mut Line<'_>, what: &str) -> Step<f64> {
    let (v, span) = line.number(what)?;
    let scale = line.unit("time", TIME_UNITS)?;
    if v <= 0.0 {
        return Err(invalid(span, format!("{what} must be positive, got {v}")));
    }
    Ok(scaled(v, scale))
}

fn carrier(line: &mut Line<'_>) -> Step<Carrier> {
    if line.peek().is_some_and(|t| t.text == "resonant") {
        line.pos += 1;
        return Ok(Carrier::Resonant);
    }
    let (v, _) = line.number("carrier frequency or `resonant`")?;
    let scale = line.unit("frequency", FREQ_UNITS)?;
    Ok(Carrier::RadPerSec(scaled(v, scale)))
}

/// Rejects a second occurrence of a clause keyword within one statement.
fn once<T>(slot: &Option<T>, kw: Token<'_>) -> Step<()> {
    match slot {
        Some(_) => Err(Diagnostic::error(
            DiagnosticKind::DuplicateDeclaration,
            kw.span,
            format!("`{}` given twice", kw.text),
        )),
        None => Ok(()),
    }
}

enum Statement {
    Gamma(f64),
    Hbar(f64),
    B0(FieldValue),
    Rest(f64),
    Ensemble(EnsembleDecl),
    Domain(DomainDecl, Span),
    Event(EventKind),
}

fn statement(line: &mut Line<'_>) -> Step<Statement> {
    let head = line.next("statement")?;
    let st = match head.text {
        "set" => {
            let name = line.next("constant name")?;
            let (v, span) = line.number("constant value")?;
            match name.text {
                "gamma" if v == 0.0 => return Err(invalid(span, "gamma must be nonzero")),
                "hbar" if v <= 0.0 => return Err(invalid(span, format!("hbar must be positive, got {v}"))),
                "gamma" => Statement::Gamma(v),
                "hbar" => Statement::Hbar(v),
                other => return Err(syntax(name, format!("unknown constant `{other}` (expected gamma or hbar)"))),
            }
        }
        "field" => {
            let name = line.next("field name")?;
            if name.text != "b0" {
                return Err(syntax(name, format!("unknown field `{}` (expected b0)", name.text)));
            }
            let (v, _) = line.number("field value")?;
            let unit = line.unit("field", FIELD_UNITS)?;
            Statement::B0(field_value(v, unit))
        }
        "rest" => {
            line.keyword("k")?;
            let (v, _) = line.number("rest constant")?;
            let scale = line.unit("frequency", FREQ_UNITS)?;
            Statement::Rest(scaled(v, scale))
        }
        "ensemble" => Statement::Ensemble(ensemble(line)?),
        "domain" => {
            let name = line.ident("domain name")?;
            line.keyword("spins")?;
            let (spins, span) = line.integer("spin count")?;
            if spins == 0 || spins as usize > MAX_SPINS {
                return Err(invalid(span, format!("spin count must lie in 1..={MAX_SPINS}, got {spins}")));
            }
            line.keyword("field")?;
            let mut b = [0.0; 3];
            for v in &mut b {
                *v = line.number("field component")?.0;
            }
            let unit = line.unit("field", FIELD_UNITS)?;
            let mut position = [0.0; 3];
            if line.peek().is_some_and(|t| t.text == "at") {
                line.pos += 1;
                for p in &mut position {
                    *p = line.number("coordinate")?.0;
                }
                let scale = line.unit("length", LENGTH_UNITS)?;
                position.iter_mut().for_each(|p| *p = scaled(*p, scale));
            }
            Statement::Domain(
                DomainDecl {
                    name: name.text.to_string(),
                    spins: spins as usize,
                    field: b.map(|v| field_value(v, unit)),
                    position,
                    span: head.span,
                },
                name.span,
            )
        }
        "pulse" => pulse(line)?,
        "delay" => Statement::Event(EventKind::Delay {
            duration: positive_duration(line, "delay")?,
        }),
        "gradient" => {
            let axis_tok = line.next("gradient axis")?;
            let axis = match axis_tok.text {
                "x" => Axis::X,
                "y" => Axis::Y,
                "z" => Axis::Z,
                other => return Err(syntax(axis_tok, format!("expected axis x, y or z, found `{other}`"))),
            };
            let (g, _) = line.number("gradient strength")?;
            let scale = line.unit("gradient", GRADIENT_UNITS)?;
            line.keyword("dur")?;
            Statement::Event(EventKind::Gradient {
                axis,
                strength: scaled(g, scale),
                duration: positive_duration(line, "duration")?,
            })
        }
        "acquire" => {
            line.keyword("n")?;
            let (n, span) = line.integer("sample count")?;
            if n < 8 {
                return Err(invalid(span, format!("acquisition needs at least 8 samples, got {n}")));
            }
            line.keyword("dt")?;
            let dt = positive_duration(line, "sample interval")?;
            let mut reference = None;
            if line.peek().is_some_and(|t| t.text == "ref") {
                line.pos += 1;
                reference = Some(carrier(line)?);
            }
            Statement::Event(EventKind::Acquire {
                n: n as usize,
                dt,
                reference,
            })
        }
        other => return Err(syntax(head, format!("unknown statement `{other}`"))),
    };
    line.finish()?;
    Ok(st)
}

fn pulse(line: &mut Line<'_>) -> Step<Statement> {
    line.keyword("rf")?;
    let (mut amp, mut car, mut dur, mut phase, mut target) = (None, None, None, None, None);
    while let Some(kw) = line.peek() {
        line.pos += 1;
        match kw.text {
            "amp" => {
                once(&amp, kw)?;
                let (v, span) = line.number("amplitude")?;
                let unit = line.unit("field", FIELD_UNITS)?;
                if v == 0.0 {
                    return Err(invalid(span, "pulse amplitude must be nonzero"));
                }
                amp = Some(field_value(v, unit));
            }
            "carrier" => {
                once(&car, kw)?;
                car = Some(carrier(line)?);
            }
            "dur" => {
                once(&dur, kw)?;
                dur = Some(positive_duration(line, "duration")?);
            }
            "phase" => {
                once(&phase, kw)?;
                let (v, _) = line.number("phase")?;
                let scale = if line.peek().is_some_and(|t| PHASE_UNITS.iter().any(|(n, _)| *n == t.text)) {
                    line.unit("phase", PHASE_UNITS)?
                } else {
                    1.0
                };
                phase = Some(scaled(v, scale));
            }
            "on" => {
                once(&target, kw)?;
                target = Some(line.ident("domain name")?);
            }
            other => return Err(syntax(kw, format!("unexpected `{other}` in pulse"))),
        }
    }
    let missing = |what: &str| {
        Diagnostic::error(
            DiagnosticKind::SyntaxError,
            line.end,
            format!("pulse needs `{what}`"),
        )
    };
    let amplitude = amp.ok_or_else(|| missing("amp"))?;
    let carrier = car.ok_or_else(|| missing("carrier"))?;
    let duration = dur.ok_or_else(|| missing("dur"))?;
    Ok(Statement::Event(EventKind::RfPulse {
        amplitude,
        carrier,
        duration,
        phase: phase.unwrap_or(0.0),
        target: target.map(|t| t.text.to_string()),
    }))
}

fn ensemble(line: &mut Line<'_>) -> Step<EnsembleDecl> {
    let (mut n, mut pol, mut seed, mut draws) = (None, None, None, None);
    while let Some(kw) = line.peek() {
        line.pos += 1;
        match kw.text {
            "n" => {
                once(&n, kw)?;
                let (v, span) = line.number("spin count")?;
                if v < 0.0 {
                    return Err(invalid(span, format!("spin count must be >= 0, got {v}")));
                }
                n = Some(v);
            }
            "polarization" => {
                once(&pol, kw)?;
                if line.peek().is_some_and(|t| t.text == "boltzmann") {
                    line.pos += 1;
                    let (t, span) = line.number("temperature")?;
                    line.unit("temperature", TEMPERATURE_UNITS)?;
                    if t <= 0.0 {
                        return Err(invalid(span, format!("temperature must be positive, got {t}")));
                    }
                    pol = Some(Polarization::Boltzmann { temperature: t });
                } else {
                    let (v, span) = line.number("polarization or `boltzmann`")?;
                    if v.abs() > 1.0 {
                        return Err(invalid(span, format!("polarization must lie in [-1, 1], got {v}")));
                    }
                    pol = Some(Polarization::Value { value: v });
                }
            }
            "seed" => {
                once(&seed, kw)?;
                seed = Some(line.integer("seed")?.0);
            }
            "draws" => {
                once(&draws, kw)?;
                let (d, span) = line.integer("draw count")?;
                if d == 0 {
                    return Err(invalid(span, "draw count must be positive"));
                }
                draws = Some(d);
            }
            other => return Err(syntax(kw, format!("unexpected `{other}` in ensemble"))),
        }
    }
    let base = EnsembleDecl::default();
    Ok(EnsembleDecl {
        n: n.unwrap_or(base.n),
        polarization: pol.unwrap_or(base.polarization),
        seed,
        draws,
    })
}

fn duplicate(span: Span, what: &str) -> Diagnostic {
    Diagnostic::error(DiagnosticKind::DuplicateDeclaration, span, format!("{what} declared twice"))
}

fn set_once<T>(slot: &mut Option<T>, v: T, span: Span, what: &str, errors: &mut Vec<Diagnostic>) {
    if slot.is_some() {
        errors.push(duplicate(span, what));
    } else {
        *slot = Some(v);
    }
}

/// Parses a sequence file. On failure every error found is returned, in
/// source order.
pub fn parse_sequence(source: &str) -> std::result::Result<Parsed, Vec<Diagnostic>> {
    let mut p = SequenceProgram::default();
    let mut errors = Vec::new();
    let mut targets: Vec<(String, Span)> = Vec::new();
    let mut clock = 0.0;
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(raw, line_no);
        if tokens.is_empty() {
            continue;
        }
        let head = Span::new(line_no, tokens[0].span.column);
        let target_span = tokens
            .iter()
            .position(|t| t.text == "on")
            .and_then(|i| tokens.get(i + 1))
            .map(|t| t.span);
        let mut line = Line::new(tokens, line_no);
        match statement(&mut line) {
            Err(d) => errors.push(d),
            Ok(Statement::Gamma(v)) => set_once(&mut p.gamma, v, head, "gamma", &mut errors),
            Ok(Statement::Hbar(v)) => set_once(&mut p.hbar, v, head, "hbar", &mut errors),
            Ok(Statement::B0(v)) => set_once(&mut p.b0, v, head, "field b0", &mut errors),
            Ok(Statement::Rest(v)) => set_once(&mut p.k_rest, v, head, "rest constant", &mut errors),
            Ok(Statement::Ensemble(e)) => set_once(&mut p.ensemble, e, head, "ensemble", &mut errors),
            Ok(Statement::Domain(d, name_span)) => {
                if p.domain(&d.name).is_some() {
                    errors.push(duplicate(name_span, &format!("domain `{}`", d.name)));
                } else {
                    p.domains.push(d);
                }
            }
            Ok(Statement::Event(kind)) => {
                if matches!(kind, EventKind::Acquire { .. }) && p.acquire().is_some() {
                    errors.push(Diagnostic::error(
                        DiagnosticKind::DuplicateAcquire,
                        head,
                        "only one acquire statement is allowed",
                    ));
                    continue;
                }
                if let EventKind::RfPulse { target: Some(name), .. } = &kind {
                    targets.push((name.clone(), target_span.unwrap_or(head)));
                }
                let duration = kind.duration();
                p.events.push(Event {
                    kind,
                    start: clock,
                    span: head,
                });
                clock += duration;
            }
        }
    }
    for (name, span) in targets {
        if p.domain(&name).is_none() {
            errors.push(Diagnostic::error(
                DiagnosticKind::UndeclaredDomain,
                span,
                format!("domain `{name}` is not declared"),
            ));
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|d| (d.line, d.column));
        return Err(errors);
    }
    let mut warnings = Vec::new();
    if p.acquire().is_none() {
        warnings.push(Diagnostic::warning(
            DiagnosticKind::NoAcquire,
            Span::new(1, 1),
            "no acquire statement; nothing will be sampled",
        ));
    }
    Ok(Parsed { program: p, warnings })
}
