//! Runs every acceptance criterion at its stated tolerance and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

mod common;

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinor::builders;
use spinor::io::{fid_to_csv, report_json, spectrum_to_csv};
use spinor::multispin::{eigen_spectrum, expm_hermitian, hamiltonian_distinct_fields, hamiltonian_homogeneous, SpinDomain};
use spinor::oracle::{expm_series, validation_suite, IntegrationConfig};
use spinor::propagator::{rf_propagator, rotation_matrix, static_propagator};
use spinor::sequence::run_source;
use spinor::spectra::experiments;
use spinor::spectra::spectrum_of;
use spinor::suscept::{phase_term_monte_carlo, DTerms};
use spinor::{ComplexMatrix, PhysicalConstants};

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signed_log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let mag = 10f64.powf(r.random_range(lo.log10()..hi.log10()));
    if r.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn random_hermitian(r: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut x = || r.random_range(-2.0..2.0);
    let (a, d) = (x(), x());
    let b = Complex64::new(x(), x());
    ComplexMatrix::new2(Complex64::new(a, 0.0), b, b.conj(), Complex64::new(d, 0.0))
}

fn oracle_equivalence() -> Outcome {
    let report = validation_suite(builders::registry(), 1000, 2024, &IntegrationConfig::validation());
    let worst_entry = report.builders.iter().map(|b| b.max_entry_error).fold(0.0, f64::max);
    let worst_drift = report.builders.iter().map(|b| b.max_norm_drift).fold(0.0, f64::max);
    let failing: Vec<&str> = report.builders.iter().filter(|b| !b.passes()).map(|b| b.builder.as_str()).collect();
    verdict(
        report.passes() && report.builders.len() >= 5,
        format!(
            "{} builders x 1000 draws, max entry error {worst_entry:.2e} (< 1e-8), max drift {worst_drift:.2e} (< 1e-9){}",
            report.builders.len(),
            if failing.is_empty() { String::new() } else { format!(", failing: {failing:?}") }
        ),
    )
}

fn resonance_reduction() -> Outcome {
    let mut r = rng(2);
    let (mut rot_err, mut static_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let w0 = signed_log_uniform(&mut r, 1e2, 1e9);
        let w1 = 10f64.powf(r.random_range(2.0..9.0));
        let t = r.random_range(0.0..20.0) / w1;
        let pair = rf_propagator(w0, w0, w1, t).map_err(|e| e.to_string())?;
        let expected = rotation_matrix([1.0, 0.0, 0.0], w1 * t).map_err(|e| e.to_string())?;
        rot_err = rot_err.max(pair.r_part.max_abs_diff(&expected));

        let w = signed_log_uniform(&mut r, 1e2, 1e9);
        let t = r.random_range(0.0..50.0) / w0.abs().max(w.abs());
        let free = rf_propagator(w, w0, 0.0, t).map_err(|e| e.to_string())?;
        static_err = static_err.max(free.product.max_abs_diff(&static_propagator(w0, t)));
    }
    verdict(
        rot_err <= 4.0 * f64::EPSILON && static_err <= 1e-12,
        format!("rotation factor error {rot_err:.2e} (machine precision), omega1=0 vs static {static_err:.2e} (< 1e-12)"),
    )
}

fn periodicity() -> Outcome {
    let mut r = rng(3);
    let id = ComplexMatrix::identity(2).unwrap();
    let minus = id.scale(Complex64::new(-1.0, 0.0));
    let (mut e4, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let w0 = signed_log_uniform(&mut r, 1e-3, 1e12);
        e4 = e4.max(static_propagator(w0, 4.0 * PI / w0).max_abs_diff(&id));
        e2 = e2.max(static_propagator(w0, TAU / w0).max_abs_diff(&minus));
    }
    verdict(e4 <= 1e-12 && e2 <= 1e-12, format!("4pi: {e4:.2e}, 2pi -> -I: {e2:.2e} (< 1e-12)"))
}

fn experiment(name: &str) -> Outcome {
    let rep = experiments::lookup(name).and_then(|e| e.run()).map_err(|e| e.to_string())?;
    let metrics: Vec<String> = rep.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
    let mut detail = format!("{name}: {}", metrics.join(" "));
    if let Some(reason) = &rep.reason {
        detail.push_str(&format!(" ({reason})"));
    }
    verdict(rep.pass, detail)
}

fn kronecker_identity() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (random_hermitian(&mut r), random_hermitian(&mut r));
        let sum = spinor::multispin::kron_sum(&a, &b).map_err(|e| e.to_string())?;
        let lhs = expm_hermitian(&sum, Complex64::new(0.0, -1.0)).map_err(|e| e.to_string())?;
        let i = Complex64::new(0.0, -1.0);
        let rhs = expm_series(&a.scale(i)).kron(&expm_series(&b.scale(i))).map_err(|e| e.to_string())?;
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    verdict(worst <= 1e-10, format!("100 Hermitian pairs, max deviation {worst:.2e} (< 1e-10)"))
}

fn two_field_spectrum() -> Outcome {
    let consts = PhysicalConstants::proton();
    let mut r = rng(9);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (ba, bb) = (r.random_range(-20.0..20.0), r.random_range(-20.0..20.0));
        let h = hamiltonian_distinct_fields(&[[0.0, 0.0, ba], [0.0, 0.0, bb]], &consts).map_err(|e| e.to_string())?;
        let mut got = eigen_spectrum(&h).map_err(|e| e.to_string())?.eigenvalues;
        got.sort_by(|x, y| x.total_cmp(y));
        let half = 0.5 * consts.gamma * consts.hbar;
        let (sum, diff) = (half * (ba + bb).abs(), half * (ba - bb).abs());
        let mut want = vec![sum, -sum, diff, -diff];
        want.sort_by(|x, y| x.total_cmp(y));
        let scale = half * (ba.abs() + bb.abs());
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs() / scale);
        }
    }
    verdict(worst <= 1e-12, format!("200 field pairs, max relative eigenvalue error {worst:.2e} (< 1e-12)"))
}

/// ⟨σ⁻⟩ of spin `p` in ρ, with index 0 of each factor being x₂.
fn coherence_of(rho: &ComplexMatrix, spins: usize, p: usize) -> Complex64 {
    let bit = 1usize << (spins - 1 - p);
    (0..rho.dim()).filter(|i| i & bit == 0).map(|i| rho.get(i, i | bit)).sum()
}

fn equilibrium_silence() -> Outcome {
    let consts = PhysicalConstants::proton();
    let mut r = rng(10);
    let (mut transfer, mut chi) = (0.0f64, 0.0f64);
    let mut off_diagonal = 0.0f64;
    for n in 1..=4 {
        for _ in 0..25 {
            let bz = r.random_range(-20.0..20.0);
            let h = hamiltonian_homogeneous(&SpinDomain::plain(n, [0.0, 0.0, bz]).unwrap(), &consts).map_err(|e| e.to_string())?;
            let dim = h.dim();
            for i in 0..dim {
                for j in (0..dim).filter(|&j| j != i) {
                    off_diagonal = off_diagonal.max(h.get(i, j).norm());
                }
            }
            let t = r.random_range(0.0..1e-6);
            let u = ComplexMatrix::diagonal(
                &(0..dim).map(|k| Complex64::from_polar(1.0, -h.get(k, k).re * t / consts.hbar)).collect::<Vec<_>>(),
            )
            .unwrap();
            let numeric = expm_hermitian(&h, Complex64::new(0.0, -t / consts.hbar)).map_err(|e| e.to_string())?;
            for i in 0..dim {
                for j in (0..dim).filter(|&j| j != i) {
                    transfer = transfer.max(u.get(i, j).norm_sqr()).max(numeric.get(i, j).norm_sqr());
                }
            }
            // zero polarization: the phase-averaged state is I/dim
            let rho = u.mul(&u.adjoint()).unwrap().scale(Complex64::new(1.0 / dim as f64, 0.0));
            for p in 0..n {
                chi = chi.max((consts.chi_scale() * coherence_of(&rho, n, p)).norm());
            }
        }
    }
    verdict(
        off_diagonal == 0.0 && transfer == 0.0 && chi == 0.0,
        format!("N=1..4: off-diagonal H {off_diagonal:e}, population transfer {transfer:e}, chi {chi:e} (all exactly 0)"),
    )
}

fn phase_cancellation() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    const M: u64 = 1_000_000;
    for k in 0..5 {
        let big_omega: f64 = r.random_range(-1e3..1e3);
        let w1 = r.random_range(1.0..1e3);
        let delta = big_omega.hypot(w1);
        let terms = DTerms::evaluate(big_omega, delta, Complex64::new(w1, 0.0), r.random_range(0.0..0.1));
        let stats = phase_term_monte_carlo(&terms, 0.5, 1000 + k, M);
        let bound = 5.0 * stats.sigma / (M as f64).sqrt();
        if stats.mean.norm() >= bound {
            return Err(format!("draw {k}: |mean| {:.2e} >= 5 sigma/sqrt(M) {bound:.2e}", stats.mean.norm()));
        }
        worst = worst.max(stats.mean.norm() / bound);
    }
    Ok(format!("5 parameter sets x 1e6 draws, worst |mean|/(5 sigma/sqrt(M)) = {worst:.3}"))
}

const RERUN_SOURCES: [&str; 2] = [
    "field b0 7 T\nensemble n 1e3 polarization 1e-3 draws 2000 seed 5\npulse rf amp 1 mT carrier resonant dur 5.87 us\nacquire n 256 dt 1 ns ref resonant\n",
    "rest k -1e-3 rad/s\nfield b0 -1e3 rad/s\nset gamma 1\ndomain a spins 1 field 0 0 -1e3 rad/s at -1 0 0 cm\ndomain b spins 3 field 0 0 -1e3 rad/s at 1 0 0 cm\ngradient x 2e3 T/m dur 1 ms\nacquire n 128 dt 1 ms\n",
];

fn render(src: &str) -> Result<Vec<String>, String> {
    let (run, _) = run_source(src, 7).map_err(|e| e.to_string())?;
    let fid = run.fid.ok_or("no FID")?;
    Ok(vec![
        fid_to_csv(&fid).map_err(|e| e.to_string())?,
        spectrum_to_csv(&spectrum_of(&fid)).map_err(|e| e.to_string())?,
        report_json("run", &run.report).map_err(|e| e.to_string())?,
    ])
}

fn parser_and_reruns() -> Outcome {
    let cases = common::load_cases();
    let failures: Vec<String> = cases.iter().filter_map(|c| common::check(c).err().map(|e| format!("{}: {e}", c.name))).collect();
    if cases.len() != 20 || !failures.is_empty() {
        return Err(format!("{} golden cases, failures: {}", cases.len(), failures.join("; ")));
    }
    let mut files = 0;
    for src in RERUN_SOURCES {
        let (a, b) = (render(src)?, render(src)?);
        if a != b {
            return Err("rerun output differs".into());
        }
        files += a.len();
    }
    for e in experiments::registry() {
        let once = e.run().map_err(|e| e.to_string())?;
        let twice = e.run().map_err(|e| e.to_string())?;
        if report_json("experiment", &once).ok() != report_json("experiment", &twice).ok() {
            return Err(format!("{} report differs across reruns", e.name()));
        }
        files += 1;
    }
    Ok(format!("20 golden cases match; {files} CSV/JSON outputs byte-identical across reruns"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form vs RK4 oracle", oracle_equivalence),
        ("resonance reduction", resonance_reduction),
        ("4pi periodicity", periodicity),
        ("two-resonance spectrum", || experiment("low-field")),
        ("pi/2 calibration", || experiment("pulse-calibration")),
        ("1:2:1 triplet", || experiment("ethanol")),
        ("spin-noise sign and amplitude", || experiment("spin-noise")),
        ("Kronecker identity", kronecker_identity),
        ("two-field eigenvalues", two_field_spectrum),
        ("equilibrium silence", equilibrium_silence),
        ("phase-average cancellation", phase_cancellation),
        ("parser golden corpus and reruns", parser_and_reruns),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2}: {tag} {name} [{:.2?}] {detail}", i + 1, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
