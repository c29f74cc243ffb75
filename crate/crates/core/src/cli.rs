//! Command-line harness. Every subcommand reads a flat `key=value` config,
//! writes plot-ready CSV plus a JSON summary into `--out`, and embeds the
//! fully resolved config in the JSON so any result file names the exact run
//! that produced it. Exit codes: 0 success, 2 bad config, 3 selftest
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config;
use crate::error::Error;
use crate::experiments::{self, mixing, selftest};
use crate::targets::{Roughness, Target};
use crate::theory;
use crate::KernelKind;

#[derive(Debug, Parser)]
#[command(
    name = "mwg",
    about = "Partial-update Metropolis samplers: optimal-scaling curves, variance sweeps, tuning, and mixing studies",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form acceptance and efficiency curves over a grid of scales.
    #[command(name = "theory-curve")]
    TheoryCurve(RunArgs),
    /// Measure acceptance and first-order efficiency over a σ² grid.
    Sweep(RunArgs),
    /// Tune σ to a target acceptance rate by stochastic approximation.
    Tune(RunArgs),
    /// Mixing time of the coordinate average across dimensions.
    Mixing(RunArgs),
    /// Run the fast invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for CSV/JSON results.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap worker threads (1 gives identical results to the default).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Cap worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A failed run: message for stderr plus the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn config_failure(e: Error) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let threads = match &cli.command {
        Command::TheoryCurve(a) | Command::Sweep(a) | Command::Tune(a) | Command::Mixing(a) => {
            a.threads
        }
        Command::Selftest(a) => a.threads,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure { code: 2, message: "--threads must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: format!("thread pool: {e}") })?;
    }
    match &cli.command {
        Command::TheoryCurve(args) => cmd_theory_curve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Mixing(args) => cmd_mixing(args),
        Command::Selftest(_) => cmd_selftest(),
    }
}

fn load_config(args: &RunArgs) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read config {}: {e}", args.config.display()),
    })?;
    config::parse_kv(&text).map_err(config_failure)
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_output(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {e}", dir.display()),
    })?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| Failure { code: 1, message: format!("cannot write {}: {e}", path.display()) })?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable summary");
    text.push('\n');
    text
}

/// Theory optimum from the target's analytic constants, when it has them.
fn analytic_optimum(target: &Target, kind: KernelKind, c: f64) -> Option<theory::OptimalScale> {
    let konst = match kind {
        KernelKind::Rwm => match target.roughness_i() {
            Roughness::Exact(i) => i,
            Roughness::MonteCarlo { .. } => return None,
        },
        KernelKind::Mala => target.mala_k2()?.sqrt(),
    };
    theory::optimal_l(kind, c, konst).ok()
}

#[derive(Serialize)]
struct TheoryCurveSummary<'a> {
    config: &'a BTreeMap<String, String>,
    l_hat: f64,
    accept_at_l_hat: f64,
    speed_at_l_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_optimal_c: Option<f64>,
}

fn cmd_theory_curve(args: &RunArgs) -> Result<(), Failure> {
    let cfg = config::resolve_theory_curve(load_config(args)?, args.seed).map_err(config_failure)?;

    let mut csv = String::from("l,sigma2,accept,speed\n");
    for i in 0..cfg.points {
        let l = cfg.l_min + (cfg.l_max - cfg.l_min) * i as f64 / (cfg.points - 1) as f64;
        let (accept, speed) = match cfg.kind {
            KernelKind::Rwm => (
                theory::rwm_accept(cfg.c, l, cfg.constant),
                theory::rwm_speed(cfg.c, l, cfg.constant),
            ),
            KernelKind::Mala => (
                theory::mala_accept(cfg.c, l, cfg.constant),
                theory::mala_speed(cfg.c, l, cfg.constant),
            ),
        };
        let accept = accept.map_err(config_failure)?;
        let speed = speed.map_err(config_failure)?;
        let sigma2 = theory::sigma2_from_l(cfg.kind, l, cfg.d);
        csv.push_str(&format!("{},{},{},{}\n", g17(l), g17(sigma2), g17(accept), g17(speed)));
    }

    let opt = theory::optimal_l(cfg.kind, cfg.c, cfg.constant).map_err(config_failure)?;
    let cost_optimal_c = match cfg.cost {
        Some((a, b)) => Some(theory::cost_optimal_c(a, b).map_err(config_failure)?),
        None => None,
    };
    let summary = TheoryCurveSummary {
        config: &cfg.resolved,
        l_hat: opt.l_hat,
        accept_at_l_hat: opt.accept,
        speed_at_l_hat: opt.speed,
        cost_optimal_c,
    };

    let csv_path = write_output(&args.out, "theory_curve.csv", &csv)?;
    let json_path = write_output(&args.out, "theory_curve.json", &to_json(&summary))?;
    println!(
        "theory-curve: {} points; l_hat = {:.4}, accept = {:.4}; wrote {} and {}",
        cfg.points,
        opt.l_hat,
        opt.accept,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config: &'a BTreeMap<String, String>,
    accept_star: f64,
    fose_star: f64,
    theory_accept_star: Option<f64>,
    theory_speed: Option<f64>,
}

fn cmd_sweep(args: &RunArgs) -> Result<(), Failure> {
    let cfg = config::resolve_sweep(load_config(args)?, args.seed).map_err(config_failure)?;
    let spec = cfg.to_spec().map_err(config_failure)?;
    let outcome = experiments::run_sweep(&spec).map_err(config_failure)?;

    let mut csv = String::from("sigma2,l,accept_hat,accept_se,fose_raw,fose_norm\n");
    for r in &outcome.records {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g17(r.sigma2),
            g17(r.l_equivalent),
            g17(r.accept_hat),
            g17(r.accept_se),
            g17(r.fose_raw),
            g17(r.fose_norm)
        ));
    }

    let opt = analytic_optimum(&cfg.target, cfg.kind, cfg.c);
    // same normalized units as fose_star, so the two are directly comparable
    // (for unit-roughness targets the factor is 1)
    let norm = match cfg.kind {
        KernelKind::Rwm => cfg.target.roughness_i().value(),
        KernelKind::Mala => cfg.target.roughness_i().value() / (cfg.c * cfg.c).cbrt(),
    };
    let summary = SweepSummary {
        config: &cfg.resolved,
        accept_star: outcome.optimum.accept_star,
        fose_star: outcome.optimum.fose_star,
        theory_accept_star: opt.as_ref().map(|o| o.accept),
        theory_speed: opt.as_ref().map(|o| o.speed * norm),
    };

    let csv_path = write_output(&args.out, "sweep.csv", &csv)?;
    let json_path = write_output(&args.out, "sweep.json", &to_json(&summary))?;
    println!(
        "sweep: {} grid points; accept* = {:.3}, peak efficiency = {:.3}; wrote {} and {}",
        outcome.records.len(),
        outcome.optimum.accept_star,
        outcome.optimum.fose_star,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    config: &'a BTreeMap<String, String>,
    l_tuned: f64,
    sigma2: f64,
    accept_final: f64,
    converged: bool,
}

fn cmd_tune(args: &RunArgs) -> Result<(), Failure> {
    let cfg = config::resolve_tune(load_config(args)?, args.seed).map_err(config_failure)?;
    let outcome = experiments::tune_scale(
        &cfg.target,
        cfg.kind,
        cfg.c,
        cfg.target_accept,
        cfg.budget,
        cfg.seed,
    )
    .map_err(config_failure)?;

    let summary = TuneSummary {
        config: &cfg.resolved,
        l_tuned: outcome.l_tuned,
        sigma2: outcome.sigma2,
        accept_final: outcome.accept_final,
        converged: outcome.converged,
    };
    let json_path = write_output(&args.out, "tune.json", &to_json(&summary))?;
    println!(
        "tune: l = {:.4} (sigma2 = {:.6}), accept = {:.4}, converged = {}; wrote {}",
        outcome.l_tuned,
        outcome.sigma2,
        outcome.accept_final,
        outcome.converged,
        json_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MixingSummary<'a> {
    config: &'a BTreeMap<String, String>,
    slope: f64,
    slope_se: f64,
}

fn cmd_mixing(args: &RunArgs) -> Result<(), Failure> {
    let cfg = config::resolve_mixing(load_config(args)?, args.seed).map_err(config_failure)?;
    let result = mixing::mean_mixing_experiment(
        cfg.kind,
        cfg.rho,
        cfg.c,
        &cfg.ds,
        cfg.steps_per_d,
        cfg.seed,
    )
    .map_err(config_failure)?;

    let mut csv = String::from("d,iat,stderr\n");
    for p in &result.points {
        csv.push_str(&format!("{},{},{}\n", p.d, g17(p.iat), g17(p.stderr)));
    }
    let summary =
        MixingSummary { config: &cfg.resolved, slope: result.slope, slope_se: result.slope_se };

    let csv_path = write_output(&args.out, "mixing.csv", &csv)?;
    let json_path = write_output(&args.out, "mixing.json", &to_json(&summary))?;
    println!(
        "mixing: {} dimensions; slope = {:.3} ± {:.3}; wrote {} and {}",
        result.points.len(),
        result.slope,
        result.slope_se,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

fn cmd_selftest() -> Result<(), Failure> {
    let results = selftest::run_selftest();
    let mut failed = Vec::new();
    for r in &results {
        if r.pass {
            println!("ok   {} — {}", r.name, r.detail);
        } else {
            println!("FAIL {} — {}", r.name, r.detail);
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("selftest: all {} checks passed", results.len());
        Ok(())
    } else {
        Err(Failure { code: 3, message: format!("selftest failed: {}", failed.join(", ")) })
    }
}
