//! Canonical text form of a program. Every quantity is written in SI units
//! with a shortest round-trip float representation, so parsing the output
//! gives back an equal program.

use std::fmt::Write;

use super::ast::*;

fn field_unit(v: FieldValue) -> (f64, &'static str) {
    match v {
        FieldValue::Tesla(b) => (b, "T"),
        FieldValue::RadPerSec(w) => (w, "rad/s"),
    }
}

fn carrier(c: Carrier) -> String {
    match c {
        Carrier::Resonant => "resonant".into(),
        Carrier::RadPerSec(w) => format!("{w:e} rad/s"),
    }
}

pub fn print_program(p: &SequenceProgram) -> String {
    let mut out = String::new();
    // Writing to a String cannot fail.
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    if let Some(g) = p.gamma {
        line(format!("set gamma {g:e}"));
    }
    if let Some(h) = p.hbar {
        line(format!("set hbar {h:e}"));
    }
    if let Some(b) = p.b0 {
        let (v, u) = field_unit(b);
        line(format!("field b0 {v:e} {u}"));
    }
    if let Some(k) = p.k_rest {
        line(format!("rest k {k:e} rad/s"));
    }
    if let Some(e) = &p.ensemble {
        let mut s = format!("ensemble n {:e} polarization ", e.n);
        match e.polarization {
            Polarization::Value { value } => write!(s, "{value:e}").unwrap(),
            Polarization::Boltzmann { temperature } => write!(s, "boltzmann {temperature:e} K").unwrap(),
        }
        if let Some(seed) = e.seed {
            write!(s, " seed {seed}").unwrap();
        }
        if let Some(d) = e.draws {
            write!(s, " draws {d}").unwrap();
        }
        line(s);
    }
    for d in &p.domains {
        let unit = field_unit(d.field[0]).1;
        let [bx, by, bz] = d.field.map(|f| field_unit(f).0);
        let [x, y, z] = d.position;
        line(format!(
            "domain {} spins {} field {bx:e} {by:e} {bz:e} {unit} at {x:e} {y:e} {z:e} m",
            d.name, d.spins
        ));
    }
    for e in &p.events {
        line(match &e.kind {
            EventKind::RfPulse {
                amplitude,
                carrier: c,
                duration,
                phase,
                target,
            } => {
                let (a, u) = field_unit(*amplitude);
                let mut s = format!("pulse rf amp {a:e} {u} carrier {} dur {duration:e} s phase {phase:e} rad", carrier(*c));
                if let Some(t) = target {
                    write!(s, " on {t}").unwrap();
                }
                s
            }
            EventKind::Delay { duration } => format!("delay {duration:e} s"),
            EventKind::Gradient { axis, strength, duration } => {
                format!("gradient {axis} {strength:e} T/m dur {duration:e} s")
            }
            EventKind::Acquire { n, dt, reference } => {
                let mut s = format!("acquire n {n} dt {dt:e} s");
                if let Some(r) = reference {
                    write!(s, " ref {}", carrier(*r)).unwrap();
                }
                s
            }
        });
    }
    out
}
