//! `tds`: run experiments, generate hard instances and verify records.
//!
//! Exit codes: 0 on success, 1 when a contract violation is found, 2 on a
//! configuration or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tds_core::gaussian::SeededSampler;
use tds_core::hard_instances::lp::{exact_moment_match_lp, DEFAULT_FLOOR};
use tds_core::hard_instances::quadrature::{gauss_hermite, perturb_weights};
use tds_core::hard_instances::{build_hard_instance, build_mass_relocated_1d};
use tds_core::harness::{run_scenario, verify_records, RunConfig};

#[derive(Parser)]
#[command(name = "tds", version, about = "Distribution-shift-testable learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config across its seeds and write JSON Lines records plus a CSV table.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Records file; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a one-dimensional hard instance as JSON.
    GenHard {
        #[arg(long, value_enum)]
        kind: HardKind,
        /// Accuracy for `mass-relocated`; relative weight noise for `lp-moment-match`.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Degree to match (`lp-moment-match`).
        #[arg(long, default_value_t = 8)]
        degree: u32,
        /// Quadrature nodes in the source distribution (`lp-moment-match`).
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        /// Initial number of draws (`mass-relocated`); doubled up to 16x on retry.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
    /// Recompute held-out errors from stored hypotheses and re-check soundness.
    Verify {
        #[arg(long)]
        records: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HardKind {
    LpMomentMatch,
    MassRelocated,
}

enum Outcome {
    Ok,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run { config, out, seed } => run(&config, out, seed),
        Command::GenHard { kind, eps, out, seed, degree, nodes, draws } => {
            let value = match kind {
                HardKind::LpMomentMatch => lp_instance(eps, seed, degree, nodes)?,
                HardKind::MassRelocated => relocated_instance(eps, seed, draws)?,
            };
            write_json(&out, &value)?;
            println!("wrote {}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Verify { records } => {
            let report = verify_records(&records)?;
            for v in &report.violations {
                println!("violation seed={} {}", v.seed, v.what);
            }
            println!("checked {} records, {} violations", report.checked, report.violations.len());
            Ok(if report.ok() { Outcome::Ok } else { Outcome::Violation })
        }
    }
}

fn run(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Outcome> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let Some(out) = out.or_else(|| cfg.output.clone()) else {
        bail!("no output path: pass --out or set `output` in the config");
    };
    let output = run_scenario(&cfg)?;
    output.write(&out)?;
    let s = &output.summary;
    println!(
        "{} records: accept rate {:.3}, max held-out error {}, rejects {:?}, errors {}, violations {}",
        s.n_records,
        s.accept_rate,
        s.max_holdout_error.map_or("n/a".into(), |e| format!("{e:.5}")),
        s.reject_histogram,
        s.errors,
        s.violations
    );
    Ok(if s.violations == 0 { Outcome::Ok } else { Outcome::Violation })
}

fn lp_instance(noise: f64, seed: u64, degree: u32, nodes: usize) -> Result<serde_json::Value> {
    if !(0.0..1.0).contains(&noise) {
        bail!("--eps must lie in [0, 1) for lp-moment-match");
    }
    let mut rng = SeededSampler::new(seed, 0).rng();
    let source = perturb_weights(&gauss_hermite(nodes)?, noise, &mut rng)?;
    let matched = exact_moment_match_lp(&source, degree, DEFAULT_FLOOR)?;
    let reverified = matched.dist.max_moment_error(degree);
    Ok(json!({
        "kind": "lp-moment-match",
        "noise": noise,
        "seed": seed,
        "nodes": nodes,
        "degree": degree,
        "source": source,
        "result": matched,
        "reverified_max_moment_error": reverified,
        "min_mu": matched.min_mu(),
    }))
}

fn relocated_instance(eps: f64, seed: u64, draws: usize) -> Result<serde_json::Value> {
    let reloc = build_mass_relocated_1d(eps)?;
    let inst = build_hard_instance(eps, draws, draws.saturating_mul(16), &SeededSampler::new(seed, 0))
        .context("discretizing the relocated distribution")?;
    Ok(json!({
        "kind": "mass-relocated",
        "eps": eps,
        "seed": seed,
        "tau": reloc.tau,
        "continuous_tail_mass": reloc.tail_mass(),
        "instance": inst,
    }))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}
