//! Loader for the parser golden corpus in `tests/golden`.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spinor::sequence::ast::SequenceProgram;
use spinor::sequence::{parse_sequence, DiagnosticKind};

#[derive(Debug, Deserialize, PartialEq)]
pub struct Position {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Valid { program: SequenceProgram, warnings: Vec<Position> },
    Invalid { diagnostics: Vec<Position> },
}

pub struct Case {
    pub name: String,
    pub source: String,
    pub expected: Expected,
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn load_cases() -> Vec<Case> {
    let mut seqs: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .expect("golden directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "seq"))
        .collect();
    seqs.sort();
    seqs.into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let json = std::fs::read_to_string(p.with_extension("expected.json")).expect("expected file");
            Case {
                source: std::fs::read_to_string(&p).unwrap(),
                expected: serde_json::from_str(&json).unwrap_or_else(|e| panic!("{name}: {e}")),
                name,
            }
        })
        .collect()
}

fn spans(p: &SequenceProgram) -> Vec<(usize, usize)> {
    p.domains
        .iter()
        .map(|d| (d.span.line, d.span.column))
        .chain(p.events.iter().map(|e| (e.span.line, e.span.column)))
        .collect()
}

fn positions(d: &[spinor::sequence::Diagnostic]) -> Vec<(DiagnosticKind, usize, usize)> {
    d.iter().map(|d| (d.kind, d.line, d.column)).collect()
}

fn expected_positions(d: &[Position]) -> Vec<(DiagnosticKind, usize, usize)> {
    d.iter().map(|d| (d.kind, d.line, d.column)).collect()
}

/// Parses one case and describes the first mismatch, if any.
pub fn check(case: &Case) -> Result<(), String> {
    match (&case.expected, parse_sequence(&case.source)) {
        (Expected::Valid { program, warnings }, Ok(parsed)) => {
            if parsed.program != *program {
                return Err(format!("program differs:\n got {:?}\nwant {:?}", parsed.program, program));
            }
            if spans(&parsed.program) != spans(program) {
                return Err(format!("spans differ: got {:?}, want {:?}", spans(&parsed.program), spans(program)));
            }
            let got = positions(&parsed.warnings);
            if got != expected_positions(warnings) {
                return Err(format!("warnings differ: got {got:?}"));
            }
            Ok(())
        }
        (Expected::Invalid { diagnostics }, Err(got)) => {
            let got = positions(&got);
            if got != expected_positions(diagnostics) {
                return Err(format!("diagnostics differ: got {got:?}, want {:?}", expected_positions(diagnostics)));
            }
            Ok(())
        }
        (Expected::Valid { .. }, Err(d)) => Err(format!("unexpected errors: {:?}", positions(&d))),
        (Expected::Invalid { .. }, Ok(_)) => Err("parsed without errors".into()),
    }
}
