//! Monte-Carlo evaluation of the naive-model plan and the true optimum.

use causal_transfer::demonstrator::naive_model;
use causal_transfer::learners::{evaluate_policy, Evaluation};
use causal_transfer::mdp::{policy_value, value_iteration};
use causal_transfer::{Policy, ValueTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::pipeline::{Prepared, VI_TOL};
use crate::report::{Check, CsvRow};

/// Stream reserved for evaluation runs, distinct from the learners' streams.
const EVAL_STREAM: u64 = 2;

/// Greedy plan on the model fitted naively to the demonstrator's data.
pub struct NaivePlan {
    /// Values the naive model promises.
    pub planned: ValueTable,
    pub policy: Policy,
    /// Exact values of that policy in the true environment, averaged over
    /// contexts held fixed for a whole episode.
    pub actual: ValueTable,
}

pub fn naive_plan(p: &Prepared) -> anyhow::Result<NaivePlan> {
    let (low, _) = p.marginal.reward_range();
    let model = naive_model(&p.obs, &p.marginal, low)?;
    let (planned, policy) = value_iteration(&model, VI_TOL);
    let mut actual = vec![0.0; p.env.n_states()];
    for (u, &w) in p.env.context_dist().iter().enumerate() {
        let v = policy_value(p.env.context(u), &policy, VI_TOL);
        for (acc, x) in actual.iter_mut().zip(v.as_slice()) {
            *acc += w * x;
        }
    }
    let actual = ValueTable(actual);
    Ok(NaivePlan { planned, policy, actual })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub policy: &'static str,
    pub seed: u64,
    pub episodes: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl CsvRow for EvaluationRow {
    const HEADER: &'static [&'static str] = &["policy", "seed", "episodes", "mean", "stderr"];
}

/// Equal-size per-seed estimates combined into one mean and standard error.
pub fn pooled(rows: &[&EvaluationRow]) -> (f64, f64) {
    let k = rows.len() as f64;
    let mean = rows.iter().map(|r| r.mean).sum::<f64>() / k;
    let se = rows.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / k;
    (mean, se)
}

pub struct EvaluationReport {
    pub v_star: f64,
    pub naive_planned: f64,
    pub naive_exact: f64,
    pub rows: Vec<EvaluationRow>,
    pub checks: Vec<Check>,
}

fn run(p: &Prepared, policy: &Policy, seed: u64, episodes: usize, horizon: usize) -> anyhow::Result<Evaluation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    Ok(evaluate_policy(&p.env, policy, episodes, horizon, &mut rng)?)
}

pub fn evaluate(cfg: &ExperimentConfig, p: &Prepared) -> anyhow::Result<EvaluationReport> {
    let naive = naive_plan(p)?;
    let e = &cfg.evaluation;
    let jobs: Vec<(&'static str, &Policy, u64)> = cfg
        .seeds()
        .into_iter()
        .flat_map(|seed| [("naive", &naive.policy, seed), ("optimal", &p.optimal_policy, seed)])
        .collect();
    let rows: Vec<EvaluationRow> = jobs
        .par_iter()
        .map(|&(name, policy, seed)| {
            let ev = run(p, policy, seed, e.episodes, e.horizon)?;
            Ok(EvaluationRow {
                policy: name,
                seed,
                episodes: ev.episodes,
                mean: ev.mean,
                stderr: ev.stderr,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let v_star = p.v_star[p.start];
    let naive_planned = naive.planned[p.start];
    let of = |name: &str| rows.iter().filter(|r| r.policy == name).collect::<Vec<_>>();
    let (naive_mean, naive_se) = pooled(&of("naive"));
    let (opt_mean, opt_se) = pooled(&of("optimal"));
    let checks = vec![
        Check::new(
            "naive-plan-overoptimistic",
            naive_planned > v_star,
            format!("naive planning value {naive_planned:.4} vs optimum {v_star:.4}"),
        ),
        Check::new(
            "naive-policy-underperforms",
            v_star - naive_mean >= 5.0 * naive_se,
            format!(
                "naive policy return {naive_mean:.4} ± {naive_se:.4}, {:.1} standard errors below {v_star:.4}",
                (v_star - naive_mean) / naive_se
            ),
        ),
        Check::new(
            "optimal-policy-matches-optimum",
            (opt_mean - v_star).abs() <= 2.0 * opt_se + 1e-9,
            format!("optimal policy return {opt_mean:.4} ± {opt_se:.4} vs {v_star:.4}"),
        ),
    ];
    Ok(EvaluationReport {
        v_star,
        naive_planned,
        naive_exact: naive.actual[p.start],
        rows,
        checks,
    })
}
