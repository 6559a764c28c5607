use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use bsrg_core::fields::{newton_background, newton_critical, NewtonOptions};
use bsrg_core::{CVec, Operator, C64};
use bsrg_harness::{
    emit_report, model, run_scenario, Format, HarnessError, ScenarioConfig, SuiteName,
};

#[derive(Parser)]
#[command(
    name = "bsrg",
    version,
    about = "Verify the algebra of one block-spin renormalization-group step"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and emit a report
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Run only these suites (repeatable); defaults to the config's list
        #[arg(long = "suite")]
        suites: Vec<SuiteName>,
        /// json or text
        #[arg(long, default_value = "json")]
        format: String,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record per-suite wall-clock timings
        #[arg(long)]
        timings: bool,
    },
    /// Newton background field at a point {"psi_star": [[re, im], ...], "psi": [...]}
    SolveBackground {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Newton critical fields at a point {"theta_star": [[re, im], ...], "theta": [...]}
    SolveCritical {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Kernels of the scenario model with their condition numbers
    Kernels {
        #[arg(long)]
        config: PathBuf,
        /// Include every matrix entry
        #[arg(long)]
        dump: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(passed)`, or an error for configuration and runtime failures.
fn run(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Verify {
            config,
            suites,
            format,
            out,
            timings,
        } => {
            let format: Format = format.parse()?;
            let mut cfg = ScenarioConfig::load(&config)?;
            if !suites.is_empty() {
                cfg.suites = suites;
            }
            cfg.record_timings |= timings;
            let report = run_scenario(&cfg)?;
            let bytes = emit_report(&report, format);
            match out {
                Some(path) => std::fs::write(path, bytes)?,
                None => write_stdout(&bytes)?,
            }
            for (suite, check) in report.failures() {
                eprintln!("failed: {suite} / {check}");
            }
            Ok(report.passed())
        }
        Command::SolveBackground { config, point } => {
            let spec = model::build_spec(&ScenarioConfig::load(&config)?)?;
            let p = read_point(&point, "psi")?;
            let sol = newton_background(&spec, &p.star, &p.plain, &NewtonOptions::default())?;
            print_json(&json!({
                "phi_star": pairs(&sol.star),
                "phi": pairs(&sol.plain),
                "iterations": sol.iterations,
                "residual": sol.residual,
            }))?;
            Ok(true)
        }
        Command::SolveCritical { config, point } => {
            let spec = model::build_spec(&ScenarioConfig::load(&config)?)?;
            let p = read_point(&point, "theta")?;
            let cp = newton_critical(&spec, &p.star, &p.plain, &NewtonOptions::default())?;
            print_json(&json!({
                "psi_star": pairs(&cp.psi_star),
                "psi": pairs(&cp.psi),
                "phi_star": pairs(&cp.phi_star),
                "phi": pairs(&cp.phi),
                "iterations": cp.iterations,
                "residual": cp.residual,
            }))?;
            Ok(true)
        }
        Command::Kernels { config, dump } => {
            let spec = model::build_spec(&ScenarioConfig::load(&config)?)?;
            let ks = &spec.kernels;
            let mut ops: BTreeMap<&str, &Operator> = BTreeMap::new();
            ops.insert("Qcheck", &ks.qcheck);
            ops.insert("Qcheck_minus", &ks.qcheck_minus);
            ops.insert("K", &ks.k);
            ops.insert("S", &ks.s);
            ops.insert("Scheck", &ks.scheck);
            ops.insert("Delta", &ks.delta);
            ops.insert("C", &ks.c);
            let kernels: BTreeMap<&str, Value> = ops
                .into_iter()
                .map(|(name, op)| {
                    let mut v = json!({
                        "rows": op.entries().nrows(),
                        "cols": op.entries().ncols(),
                    });
                    if op.is_square() {
                        v["condition"] = json!(op.condition_number());
                    }
                    if dump {
                        v["entries"] = matrix(op);
                    }
                    (name, v)
                })
                .collect();
            let (nm, nh, np) = spec.dims();
            print_json(&json!({
                "dims": [nm, nh, np],
                "b": spec.rg.b,
                "kernels": kernels,
                "inversions": ks.diagnostics,
            }))?;
            Ok(true)
        }
    }
}

struct Point {
    star: CVec,
    plain: CVec,
}

fn read_point(path: &Path, name: &str) -> Result<Point, HarnessError> {
    #[derive(Deserialize)]
    struct Raw(BTreeMap<String, Vec<[f64; 2]>>);
    let bad = |m: String| HarnessError::Config(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let Raw(mut raw) = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let mut take = |key: String| {
        raw.remove(&key)
            .map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|[re, im]| C64::new(re, im))))
            .ok_or_else(|| bad(format!("missing field `{key}`")))
    };
    Ok(Point {
        star: take(format!("{name}_star"))?,
        plain: take(name.to_string())?,
    })
}

fn pairs(v: &CVec) -> Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn matrix(op: &Operator) -> Value {
    let m = op.entries();
    json!((0..m.nrows())
        .map(|i| (0..m.ncols())
            .map(|j| [m[(i, j)].re, m[(i, j)].im])
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn print_json(v: &Value) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(v).expect("plain data");
    text.push('\n');
    write_stdout(text.as_bytes())
}

/// A reader that closes the pipe early is not an error.
fn write_stdout(bytes: &[u8]) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}
