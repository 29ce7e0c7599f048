//! `pc`: experiment runner for the probability-collectives optimization
//! toolkit. `pc run` drives optimization sweeps and writes per-iteration
//! CSV histories; the demo subcommands print closed-form versus Monte
//! Carlo comparisons for the risk, surrogate-integral, and elite-objective
//! estimators.

mod config;
mod csv;
mod demos;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{preset, ExperimentConfig, ScheduleKind};
use pc_core::oracle::BenchmarkId;
use pc_core::optimizer::run;
use pc_core::schedule::fit_log_multiplicative_rule;
use pc_core::special::median;
use pc_core::Real;

#[derive(Parser)]
#[command(name = "pc", version, about = "Probability-collectives blackbox optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization sweep and write one CSV row per (run, iteration)
    Run(RunArgs),
    /// Two-estimator selection risk: closed forms vs Monte Carlo
    RiskDemo(RiskDemoArgs),
    /// Factual importance sampling vs fit-based integral estimation
    FbmcDemo(FbmcDemoArgs),
    /// Elite (best-of-K) objective estimates over candidate densities
    EliteDemo(EliteDemoArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Named experiment preset
    #[arg(long, value_parser = config::PRESET_NAMES.to_vec())]
    preset: Option<String>,
    /// Flat `key = value` config file (overrides the preset)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; run i uses seed + i (overrides file/preset)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent runs (overrides file/preset)
    #[arg(long)]
    runs: Option<usize>,
    /// Output CSV path (overrides file/preset)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prior sweep CSV whose log(beta) trajectories define the best-fit
    /// multiplicative schedule (required by `woods-bestfit`)
    #[arg(long)]
    prior_csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RiskDemoArgs {
    #[arg(long)]
    mu1: Real,
    #[arg(long)]
    mu2: Real,
    #[arg(long)]
    sigma_a: Real,
    #[arg(long)]
    sigma_b: Real,
    #[arg(long)]
    l1: Real,
    #[arg(long)]
    l2: Real,
    /// Monte Carlo draws
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct FbmcDemoArgs {
    /// 2-D benchmark id (quadratic2d or rosenbrock2d)
    #[arg(long, default_value = "quadratic2d")]
    benchmark: String,
    #[arg(long, default_value_t = 30)]
    n_factual: usize,
    #[arg(long, default_value_t = 10_000)]
    n_fictitious: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct EliteDemoArgs {
    /// Tuple size K (best-of-K objective)
    #[arg(short, long, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Number of tuples
    #[arg(long, default_value_t = 2000)]
    n_tuples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::RiskDemo(a) => {
            demos::risk_demo(a.mu1, a.mu2, a.sigma_a, a.sigma_b, a.l1, a.l2, a.n, a.seed)
        }
        Command::FbmcDemo(a) => match BenchmarkId::parse(&a.benchmark) {
            Ok(benchmark) => demos::fbmc_demo(benchmark, a.n_factual, a.n_fictitious, a.seed),
            Err(e) => Err(e.to_string()),
        },
        Command::EliteDemo(a) => demos::elite_demo(a.k as usize, a.n_tuples, a.seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.preset {
        Some(name) => preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        cfg.apply_file(&text)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(out) = &args.out {
        cfg.out = out.display().to_string();
    }
    if cfg.runs < 1 {
        return Err("bad value for key `runs`: need at least one run".into());
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let cfg = resolve_config(&args)?;

    // Second phase of the best-fit comparison: pull beta trajectories out
    // of a prior sweep and fit the multiplicative rule they imply.
    let bestfit_rule = if cfg.schedule == ScheduleKind::BestFit {
        let path = args
            .prior_csv
            .as_ref()
            .ok_or("schedule `bestfit` requires --prior-csv <prior sweep results>")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read prior CSV {}: {e}", path.display()))?;
        let trajectories = csv::parse_beta_trajectories(&text)?;
        let (beta_init, k_beta) = fit_log_multiplicative_rule(&trajectories)
            .ok_or("prior CSV betas admit no least-squares line")?;
        if k_beta <= 1.0 {
            return Err(format!(
                "fitted multiplicative rule does not grow (k = {k_beta:.4}); nothing to compare"
            ));
        }
        eprintln!("best-fit rule from {}: beta_1 = {beta_init:.6e}, k = {k_beta:.4}", path.display());
        Some((beta_init, k_beta))
    } else {
        None
    };

    let sidecar = format!("{}.config", cfg.out);
    std::fs::write(&sidecar, cfg.render()).map_err(|e| format!("cannot write {sidecar}: {e}"))?;

    let mut file = std::fs::File::create(&cfg.out)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out))?;
    writeln!(file, "{}", csv::HEADER).map_err(|e| e.to_string())?;

    let mut final_e_qg = Vec::new();
    let mut total_calls: u64 = 0;
    for run_index in 0..cfg.runs {
        let run_cfg = cfg.run_config(run_index, bestfit_rule)?;
        let history = run(&run_cfg).map_err(|e| {
            format!("run {run_index} failed after flushing prior runs: {e}")
        })?;
        for row in csv::rows(run_index as u64, &history) {
            writeln!(file, "{row}").map_err(|e| e.to_string())?;
        }
        // Flush per run so interrupted sweeps keep completed histories.
        file.flush().map_err(|e| e.to_string())?;
        if let Some(record) = history.records.last() {
            if let Some(e) = record.e_qg {
                final_e_qg.push(e);
            }
            total_calls += record.cumulative_oracle_calls;
        }
        if history.aborted {
            return Err(format!("run {run_index} aborted after repeated empty-support fits"));
        }
    }

    let median_final = if final_e_qg.is_empty() {
        "n/a".to_string()
    } else {
        csv::sig9(median(&final_e_qg))
    };
    println!(
        "runs = {}; median final e_qg = {}; total oracle calls = {}; wrote {}",
        cfg.runs, median_final, total_calls, cfg.out
    );
    Ok(())
}
