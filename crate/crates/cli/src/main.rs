use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use spinor::builders::{self, PropagatorBuilder};
use spinor::io::{fid_from_rows, fid_to_csv, read_complex_csv, report_json, spectrum_to_csv, write_complex_csv};
use spinor::oracle::{validation_suite, IntegrationConfig};
use spinor::propagator::rf_propagator;
use spinor::sequence::{run_source, RunError};
use spinor::spectra::experiments::{self, defaults};
use spinor::spectra::{find_peaks, spectrum_with, Convention};
use spinor::{Complex, SpinState};

const EXIT_INPUT: u8 = 1;
const EXIT_TOLERANCE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "spinor", version, about = "Closed-form spin-1/2 dynamics and NMR signal simulation")]
struct Cli {
    /// Seed for Monte-Carlo draws and oracle parameter sampling.
    #[arg(long, global = true, env = "SPINOR_SEED", default_value_t = 0)]
    seed: u64,
    /// Directory for CSV and JSON output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Folded,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    /// Pulse length at resonance, in s.
    PulseDuration,
    /// Carrier minus Larmor frequency for a π/2-length pulse, in rad/s.
    CarrierOffset,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a sequence file and write its FID and report.
    Run { file: PathBuf },
    /// Fourier transform an FID CSV.
    Spectrum {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ConventionArg::Folded)]
        convention: ConventionArg,
    },
    /// Compare every closed-form builder against the RK4 oracle.
    Validate {
        /// Random parameter draws per builder.
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        /// Restrict to one builder (repeatable).
        #[arg(long = "builder")]
        builders: Vec<String>,
    },
    /// Run a canned experiment, or `all`.
    Experiments { name: String },
    /// Sweep one pulse parameter and record the transverse term x̄₁x₂.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Larmor frequency ω₀ in rad/s.
        #[arg(long, default_value_t = defaults::OMEGA0, allow_negative_numbers = true)]
        omega0: f64,
        /// Drive amplitude ω₁ in rad/s.
        #[arg(long, default_value_t = defaults::OMEGA1)]
        omega1: f64,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(EXIT_INPUT, format!("{e:#}"))
    }
}

type Outcome = Result<(), Failure>;

struct Output<'a> {
    dir: Option<&'a Path>,
    format: Format,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        if let Some(dir) = self.dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    /// Writes both artifacts and prints the one selected by `--format`.
    fn emit(&self, stem: &str, csv_suffix: &str, csv: Option<&str>, json: &str) -> anyhow::Result<()> {
        if let Some(csv) = csv {
            self.write(&format!("{stem}.{csv_suffix}.csv"), csv)?;
        }
        self.write(&format!("{stem}.report.json"), json)?;
        match (self.format, csv) {
            (Format::Csv, Some(csv)) => print!("{csv}"),
            _ => print!("{json}"),
        }
        Ok(())
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

fn cmd_run(file: &Path, seed: u64, out: &Output) -> Outcome {
    let source = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let (run, warnings) = run_source(&source, seed).map_err(|e| match e {
        RunError::Diagnostics(ds) => Failure::new(
            EXIT_INPUT,
            ds.iter().map(|d| format!("{}:{d}", file.display())).collect::<Vec<_>>().join("\n"),
        ),
        RunError::Runtime(e) => Failure::new(EXIT_INPUT, format!("{}: {e}", file.display())),
    })?;
    for w in warnings {
        eprintln!("{}:{w}", file.display());
    }
    let csv = run.fid.as_ref().map(fid_to_csv).transpose().map_err(|e| anyhow!(e))?;
    let json = report_json("run", &run.report).map_err(|e| anyhow!(e))?;
    out.emit(&stem(file), "fid", csv.as_deref(), &json)?;
    Ok(())
}

fn cmd_spectrum(file: &Path, convention: ConventionArg, out: &Output) -> Outcome {
    let text = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let fid = read_complex_csv(text.as_slice())
        .and_then(|rows| fid_from_rows(&rows))
        .map_err(|e| anyhow!("{}: {e}", file.display()))?;
    let convention = match convention {
        ConventionArg::Folded => Convention::NegativeFrequencyFolded,
        ConventionArg::Full => Convention::FullComplex,
    };
    let spec = spectrum_with(&fid, convention);
    let csv = spectrum_to_csv(&spec).map_err(|e| anyhow!(e))?;
    let body = json!({
        "df": spec.df,
        "bins": spec.len(),
        "convention": spec.convention,
        "peaks": find_peaks(&spec),
    });
    let json = report_json("spectrum", &body).map_err(|e| anyhow!(e))?;
    out.emit(&stem(file), "spectrum", Some(&csv), &json)?;
    Ok(())
}

fn cmd_validate(draws: usize, names: &[String], seed: u64, out: &Output) -> Outcome {
    let selected: Vec<&dyn PropagatorBuilder> = if names.is_empty() {
        builders::registry().to_vec()
    } else {
        names
            .iter()
            .map(|n| builders::lookup(n))
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::new(EXIT_USAGE, format!("{e}; known builders: {}", builders::builder_names().join(", "))))?
    };
    let report = validation_suite(&selected, draws, seed, &IntegrationConfig::validation());
    for b in &report.builders {
        eprintln!(
            "{:<12} draws={:<5} max_entry_error={:.3e} max_norm_drift={:.3e} {}",
            b.builder,
            b.draws,
            b.max_entry_error,
            b.max_norm_drift,
            if b.passes() { "PASS" } else { "FAIL" }
        );
    }
    let json = report_json("validate", &report).map_err(|e| anyhow!(e))?;
    out.emit("validate", "", None, &json)?;
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_TOLERANCE, "closed form and oracle disagree beyond tolerance"))
    }
}

fn cmd_experiments(name: &str, out: &Output) -> Outcome {
    let selected: Vec<&dyn experiments::Experiment> = if name == "all" {
        experiments::registry().to_vec()
    } else {
        let known: Vec<&str> = experiments::registry().iter().map(|e| e.name()).collect();
        vec![experiments::lookup(name)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("{e}; known experiments: all, {}", known.join(", "))))?]
    };
    let results: Vec<_> = selected.par_iter().map(|e| (e.name(), e.run())).collect();
    let mut failed = Vec::new();
    for (name, result) in results {
        let report = result.map_err(|e| anyhow!("{name}: {e}"))?;
        let csv = report.spectrum.as_ref().map(spectrum_to_csv).transpose().map_err(|e| anyhow!(e))?;
        let json = report_json("experiment", &report).map_err(|e| anyhow!(e))?;
        out.emit(name, "spectrum", csv.as_deref(), &json)?;
        eprintln!(
            "{name}: {}{}",
            if report.pass { "PASS" } else { "FAIL" },
            report.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
        );
        if !report.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_TOLERANCE, format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_sweep(param: SweepParam, from: f64, to: f64, steps: usize, omega0: f64, omega1: f64, out: &Output) -> Outcome {
    if steps < 2 || !from.is_finite() || !to.is_finite() {
        return Err(Failure::new(EXIT_USAGE, "sweep needs finite bounds and --steps >= 2"));
    }
    if !(omega1 > 0.0) {
        return Err(Failure::new(EXIT_USAGE, "--omega1 must be positive"));
    }
    let ground = SpinState::ground();
    let rows = (0..steps)
        .map(|k| {
            let x = from + (to - from) * k as f64 / (steps - 1) as f64;
            let (carrier, t) = match param {
                SweepParam::PulseDuration => (omega0, x),
                SweepParam::CarrierOffset => (omega0 + x, FRAC_PI_2 / omega1),
            };
            let s = rf_propagator(carrier, omega0, omega1, t)?.product.apply_spin(&ground)?;
            Ok((x, s.coherence()))
        })
        .collect::<spinor::Result<Vec<(f64, Complex)>>>()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    // First grid point attaining the maximum.
    let best = rows
        .iter()
        .fold(&rows[0], |best, r| if r.1.norm() > best.1.norm() { r } else { best });
    let mut buf = Vec::new();
    write_complex_csv(&mut buf, rows.iter().copied()).map_err(|e| anyhow!(e))?;
    let csv = String::from_utf8(buf).expect("ascii");
    let label = match param {
        SweepParam::PulseDuration => "pulse-duration",
        SweepParam::CarrierOffset => "carrier-offset",
    };
    let mut body = json!({
        "param": label,
        "omega0": omega0,
        "omega1": omega1,
        "steps": steps,
        "argmax": best.0,
        "max_transverse": best.1.norm(),
    });
    if param == SweepParam::PulseDuration {
        body["theta_at_max"] = json!(omega1 * best.0);
        body["pi_half_duration"] = json!(FRAC_PI_2 / omega1);
    } else {
        body["argmax_hz"] = json!(best.0 / TAU);
    }
    let json = report_json("sweep", &body).map_err(|e| anyhow!(e))?;
    out.emit(label, "sweep", Some(&csv), &json)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = Output {
        dir: cli.out_dir.as_deref(),
        format: cli.format,
    };
    let result = match &cli.command {
        Command::Run { file } => cmd_run(file, cli.seed, &out),
        Command::Spectrum { file, convention } => cmd_spectrum(file, *convention, &out),
        Command::Validate { draws, builders } => cmd_validate(*draws, builders, cli.seed, &out),
        Command::Experiments { name } => cmd_experiments(name, &out),
        Command::Sweep {
            param,
            from,
            to,
            steps,
            omega0,
            omega1,
        } => cmd_sweep(*param, *from, *to, *steps, *omega0, *omega1, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
