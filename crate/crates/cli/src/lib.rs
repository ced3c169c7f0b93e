//! Experiment driver for the `hucrl` binary.

mod config;
mod matrix;
mod summary;

pub use config::{load_config, load_json, ConfigFile, ExperimentMatrix};
pub use matrix::{cell_dir_name, run_matrix};
pub use summary::{collect_manifests, percentile, summarize, write_summary_csv, SummaryRow, SUMMARY_HEADER};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use hucrl::agent::{oracle_return, run_with, write_curve_csv, OracleConfig, RunConfig, RunManifest};
use hucrl::env::{run_bandit, BanditProblem};
use hucrl::hallucination::StrategyTag;

#[derive(Parser, Debug)]
#[command(name = "hucrl", version, about = "Optimistic model-based RL experiments on the sparse pendulum")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration and write manifest.json and curve.csv.
    Run(RunArgs),
    /// Run the strategy x rho x seed matrix and write summary.csv.
    Matrix(MatrixArgs),
    /// GP-UCB on the two-bump bandit for each beta.
    Bandit(BanditArgs),
    /// Estimate the true-dynamics planner return used as regret baseline.
    Oracle(RunArgs),
    /// Aggregate manifests below the given directories into summary.csv.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<StrategyTag>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(s) = self.strategy {
            config.strategy.kind = s;
        }
        if let Some(r) = self.rho {
            config.env.rho = r;
        }
        if let Some(e) = self.episodes {
            config.episodes = e;
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write one trajectory CSV per episode.
    #[arg(long)]
    pub trajectories: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Restrict to one seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<StrategyTag>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BanditArgs {
    #[arg(long, num_args = 1.., default_values_t = [0.0, 2.0])]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Location of the first query (the decoy bump by default).
    #[arg(long, default_value_t = 0.2)]
    pub start: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directories searched recursively for manifest.json.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "summary.csv")]
    pub out: PathBuf,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Matrix(args) => cmd_matrix(&args),
        Command::Bandit(args) => cmd_bandit(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn run_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::new(20),
    };
    overrides.apply(&mut config);
    config.validate().context("invalid run config")?;
    Ok(config)
}

/// Runs one config into `dir`, leaving a valid (possibly partial) manifest.
pub fn run_into(config: &RunConfig, dir: &Path, trajectories: bool) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let names = vec!["theta".to_string(), "omega".to_string()];
    let mut write_err = None;
    let manifest = run_with(config, |record, traj| {
        if trajectories && write_err.is_none() {
            let path = dir.join(format!("trajectory_{:03}.csv", record.index));
            if let Err(e) = traj.save_csv(&path, &names) {
                write_err = Some(e);
            }
        }
    })?;
    manifest.save(&dir.join("manifest.json"))?;
    write_curve_csv(&manifest, std::fs::File::create(dir.join("curve.csv"))?)?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    if let Some(e) = &manifest.error {
        bail!("run did not complete: {e}");
    }
    Ok(manifest)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = run_config(args.config.as_deref(), &args.overrides)?;
    let m = run_into(&config, &args.out, args.trajectories)?;
    let last = m.episodes.last();
    println!(
        "{} rho={} seed={}: {} episodes, final return {:.3}, solved {}",
        config.strategy.kind,
        config.env.rho,
        config.seed,
        m.episodes.len(),
        last.map_or(f64::NAN, |e| e.episode_return),
        m.final_solved()
    );
    Ok(())
}

fn cmd_matrix(args: &MatrixArgs) -> Result<()> {
    let mut matrix = match &args.config {
        Some(p) => load_json::<ExperimentMatrix>(p)?,
        None => ExperimentMatrix::default(),
    };
    if let Some(s) = args.seed {
        matrix.seeds = vec![s];
    }
    if let Some(s) = args.strategy {
        matrix.strategies = vec![s];
    }
    if let Some(r) = args.rho {
        matrix.rhos = vec![r];
    }
    if let Some(e) = args.episodes {
        matrix.base.episodes = e;
    }
    matrix.validate()?;
    let rows = run_matrix(&matrix, &args.out, args.workers)?;
    for r in &rows {
        println!(
            "{:>8} rho={:<4} median={:.3} iqr=[{:.3}, {:.3}] solve_rate={:.2}",
            r.strategy, r.rho, r.median_final_return, r.iqr_lo, r.iqr_hi, r.solve_rate
        );
    }
    Ok(())
}

fn cmd_bandit(args: &BanditArgs) -> Result<()> {
    let problem = BanditProblem::default();
    let kernel = problem.default_kernel()?;
    std::fs::create_dir_all(&args.out)?;
    let grid = problem.grid();
    let best = problem.argmax_index();
    for &beta in &args.beta {
        let trace = run_bandit(&problem, &kernel, beta, args.start, args.rounds, args.seed)?;
        let path = args.out.join(format!("bandit_beta{beta}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["round", "index", "x", "y"])?;
        for (i, (&idx, y)) in trace.selections.iter().zip(&trace.observations).enumerate() {
            w.write_record([i.to_string(), idx.to_string(), grid[idx].to_string(), y.to_string()])?;
        }
        w.flush()?;
        let last = *trace.selections.last().unwrap_or(&0);
        println!(
            "beta={beta}: final x={:.2} ({} cells from the global argmax x={:.2})",
            grid[last],
            last.abs_diff(best),
            grid[best]
        );
    }
    Ok(())
}

fn cmd_oracle(args: &RunArgs) -> Result<()> {
    let config = run_config(args.config.as_deref(), &args.overrides)?;
    let oracle = config.oracle.clone().unwrap_or_default();
    let est = oracle_return(&config.env, &config.planner, &oracle, config.strategy.planning_noise, config.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let report = serde_json::json!({
        "kind": "true-dynamics planner",
        "config_hash": hucrl::agent::config_hash(&config),
        "rho": config.env.rho,
        "oracle": OracleConfig { ..oracle },
        "mean_return": est.mean,
        "returns": est.returns,
    });
    std::fs::write(args.out.join("oracle.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    println!("oracle return (rho={}): {:.3}", config.env.rho, est.mean);
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut manifests = Vec::new();
    for dir in &args.inputs {
        manifests.extend(collect_manifests(dir)?);
    }
    if manifests.is_empty() {
        bail!("no manifest.json found");
    }
    let rows = summarize(&manifests);
    write_summary_csv(&rows, std::fs::File::create(&args.out)?)?;
    println!("{} manifests -> {} rows in {}", manifests.len(), rows.len(), args.out.display());
    Ok(())
}
