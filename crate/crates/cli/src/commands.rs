//! Command-line interface.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, PRESETS};
use crate::report::{all_passed, checks_csv, csv_bytes, write_artifacts, Check};
use crate::{bounds, evaluate, learning, pipeline, tables};

#[derive(Debug, Parser)]
#[command(name = "causal-transfer", version, about = "Causal-bound transfer learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interventional effects, naive estimates and causal bounds at the
    /// critical pairs, checked against the expected tables.
    ReproduceTables(CommonArgs),
    /// Bounded model, value bounds and Q bounds, checked for soundness.
    ComputeBounds(CommonArgs),
    /// Multi-seed learning curves for the configured algorithms.
    RunLearning(LearningArgs),
    /// Monte-Carlo returns of the naive-model policy and the optimal policy.
    Evaluate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Config file or preset name; repeat for several experiments.
    /// Defaults to every shipped preset.
    #[arg(long = "config", value_name = "PATH")]
    pub configs: Vec<String>,
    /// First seed; seeds are consecutive from here.
    #[arg(long, value_name = "N")]
    pub seed_base: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory; each experiment writes to a subdirectory named
    /// after it.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LearningArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Override the number of learning episodes.
    #[arg(long, value_name = "N")]
    pub episodes: Option<usize>,
}

impl CommonArgs {
    pub fn load(&self) -> anyhow::Result<Vec<ExperimentConfig>> {
        let specs: Vec<String> = if self.configs.is_empty() {
            PRESETS.iter().map(|(name, _)| name.to_string()).collect()
        } else {
            self.configs.clone()
        };
        specs
            .iter()
            .map(|spec| {
                let mut cfg = ExperimentConfig::load(spec)?;
                if let Some(base) = self.seed_base {
                    cfg.learning.seed_base = base;
                }
                Ok(cfg)
            })
            .collect()
    }
}

/// Outcome of one experiment under one command.
pub struct Outcome {
    pub name: String,
    pub checks: Vec<Check>,
    pub dir: PathBuf,
}

fn finish(
    cfg: &ExperimentConfig,
    out: &std::path::Path,
    checks: Vec<Check>,
    mut files: Vec<(String, Vec<u8>)>,
    prefix: &str,
) -> anyhow::Result<Outcome> {
    let dir = out.join(&cfg.name);
    files.push((format!("{prefix}-checks.csv"), checks_csv(&checks)?));
    write_artifacts(&dir, &files)?;
    Ok(Outcome {
        name: cfg.name.clone(),
        checks,
        dir,
    })
}

pub fn reproduce_tables(cfg: &ExperimentConfig, out: &std::path::Path) -> anyhow::Result<Outcome> {
    let p = pipeline::prepare(cfg)?;
    let report = tables::reproduce(cfg, &p)?;
    println!("{}\n{}", cfg.name, tables::render(&report.rows));
    let files = vec![("tables.csv".to_string(), csv_bytes(&report.rows)?)];
    finish(cfg, out, report.checks, files, "tables")
}

pub fn compute_bounds(cfg: &ExperimentConfig, out: &std::path::Path) -> anyhow::Result<Outcome> {
    let p = pipeline::prepare(cfg)?;
    let report = bounds::compute_bounds(&p)?;
    println!(
        "{}: value bounds at start [{:.4}, {:.4}], optimum {:.4}",
        cfg.name, p.v_bounds.lo[p.start], p.v_bounds.hi[p.start], p.v_star[p.start]
    );
    finish(cfg, out, report.checks, report.files, "bounds")
}

pub fn run_learning(cfg: &ExperimentConfig, out: &std::path::Path) -> anyhow::Result<Outcome> {
    let p = pipeline::prepare(cfg)?;
    let report = learning::run_learning(cfg, &p)?;
    println!(
        "{}: optimum {:.4}, naive plan {:.4}, {} seeds x {} episodes",
        cfg.name,
        report.v_star,
        report.naive_plan,
        cfg.learning.seeds,
        cfg.learning.episodes
    );
    let files = learning::artifacts(cfg, &report)?;
    finish(cfg, out, report.checks, files, "learning")
}

pub fn evaluate(cfg: &ExperimentConfig, out: &std::path::Path) -> anyhow::Result<Outcome> {
    let p = pipeline::prepare(cfg)?;
    let report = evaluate::evaluate(cfg, &p)?;
    println!(
        "{}: optimum {:.4}, naive plan {:.4} (exact return {:.4})",
        cfg.name, report.v_star, report.naive_planned, report.naive_exact
    );
    let files = vec![("evaluation.csv".to_string(), csv_bytes(&report.rows)?)];
    finish(cfg, out, report.checks, files, "evaluation")
}

/// Runs a command and returns whether every embedded check passed.
pub fn run(cli: Cli) -> anyhow::Result<bool> {
    let (common, episodes) = match &cli.command {
        Command::RunLearning(a) => (a.common.clone(), a.episodes),
        Command::ReproduceTables(c) | Command::ComputeBounds(c) | Command::Evaluate(c) => (c.clone(), None),
    };
    let mut configs = common.load()?;
    if let Some(n) = episodes {
        for cfg in &mut configs {
            cfg.learning.episodes = n;
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        anyhow::ensure!(n >= 1, "need at least one worker");
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("starting worker pool")?;
    let command = |cfg: &ExperimentConfig| -> anyhow::Result<Outcome> {
        match &cli.command {
            Command::ReproduceTables(_) => reproduce_tables(cfg, &common.out),
            Command::ComputeBounds(_) => compute_bounds(cfg, &common.out),
            Command::RunLearning(_) => run_learning(cfg, &common.out),
            Command::Evaluate(_) => evaluate(cfg, &common.out),
        }
    };
    let mut ok = true;
    for cfg in &configs {
        let outcome = pool.install(|| command(cfg))?;
        for check in &outcome.checks {
            println!("  {check}");
        }
        println!("  artifacts in {}", outcome.dir.display());
        ok &= all_passed(&outcome.checks);
    }
    Ok(ok)
}
