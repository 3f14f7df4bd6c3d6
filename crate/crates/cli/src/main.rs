use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use warpflow_cli::config::{parse_config, parse_str, Mode, Overrides};
use warpflow_cli::run::{report, run_command, RunError, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "warpflow", version, about = "Warped product Ricci flow runs, soliton shooting, and curvature checks")]
struct Cli {
    /// Run configuration (TOML); see docs/schema.md.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; for `report`, the directory holding finished runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random oracle states.
    #[arg(long)]
    seed: Option<u64>,
    /// One of run-s1, run-surface, soliton-shoot, oracle-check, report.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Initial warping on the axis for soliton-shoot; may be repeated.
    #[arg(long)]
    v0: Vec<f64>,
    /// Classify a sweep of axis values instead of writing individual profiles.
    #[arg(long)]
    sweep: bool,
    /// Outer radius for soliton shots.
    #[arg(long)]
    rmax: Option<f64>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| {
        let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("WARPFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("WARPFLOW_THREADS = {raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let overrides = Overrides {
        mode: cli.mode,
        seed: cli.seed,
        out: cli.out,
        v0: cli.v0,
        sweep: cli.sweep,
        r_max: cli.rmax,
    };
    let cfg = match &cli.config {
        Some(p) => parse_config(p, &overrides),
        None => parse_str("", &overrides),
    };
    let code = match cfg.map_err(RunError::from).and_then(|cfg| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cfg: &warpflow_cli::RunConfig) -> Result<i32, RunError> {
    if cfg.mode == Mode::Report {
        let doc = report(&cfg.out)?;
        for run in &doc.runs {
            for v in &run.verdicts {
                let tag = if v.pass { "PASS" } else { "FAIL" };
                println!("{tag} {:<4} {:<14} {:<10} {}", v.criterion, run.mode, run.path, v.detail);
            }
        }
        println!("verdict: {}", doc.verdict);
        return Ok(doc.exit_code());
    }
    let summary = run_command(cfg)?;
    for v in &summary.verdicts {
        println!("{} {:<4} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.criterion, v.name, v.detail);
    }
    for s in &summary.skipped {
        println!("SKIP {s}");
    }
    println!("artifacts: {}", cfg.out.display());
    Ok(summary.exit_code())
}
