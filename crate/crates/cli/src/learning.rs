//! Multi-seed learner comparisons, their summaries and embedded checks.

use causal_transfer::learners::{run_learner, write_curves_csv, Algorithm, LearnerConfig, LearningCurve, LearningRun};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::evaluate::naive_plan;
use crate::pipeline::Prepared;
use crate::report::{csv_bytes, Check, CsvRow};
use crate::svg::{Chart, Reference, Series};

pub struct AlgorithmRuns {
    pub algorithm: Algorithm,
    pub runs: Vec<LearningRun>,
}

impl AlgorithmRuns {
    pub fn curves(&self) -> Vec<LearningCurve> {
        self.runs.iter().map(|r| r.curve.clone()).collect()
    }

    /// Checkpoint episodes, shared by every seed.
    pub fn episodes(&self) -> Vec<usize> {
        self.runs
            .first()
            .map(|r| r.curve.points.iter().map(|p| p.episode).collect())
            .unwrap_or_default()
    }

    /// Value estimates of every seed at checkpoint `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.runs.iter().map(|r| r.curve.points[i].value_estimate).collect()
    }
}

pub struct LearningReport {
    pub v_star: f64,
    pub naive_plan: f64,
    pub results: Vec<AlgorithmRuns>,
    pub checks: Vec<Check>,
}

impl LearningReport {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmRuns> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

pub fn learner_config(cfg: &ExperimentConfig, seed: u64) -> LearnerConfig {
    let l = &cfg.learning;
    let mut out = LearnerConfig::new(l.episodes, l.horizon);
    out.learning_rate = l.learning_rate;
    out.epsilon = l.epsilon;
    out.bonus_scale = l.bonus_scale;
    out.delta = l.delta;
    out.checkpoint_every = l.checkpoint_every;
    out.eval_episodes = l.eval_episodes;
    out.seed = seed;
    out
}

/// Median of a sample; an infinite middle element makes the median infinite.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

pub fn run_matrix(cfg: &ExperimentConfig, p: &Prepared) -> anyhow::Result<Vec<AlgorithmRuns>> {
    let seeds = cfg.seeds();
    let jobs: Vec<(Algorithm, u64)> = cfg
        .learning
        .algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs: Vec<LearningRun> = jobs
        .par_iter()
        .map(|&(alg, seed)| run_learner(&p.env, &learner_config(cfg, seed), alg, Some(&p.q_bounds)))
        .collect::<Result<_, _>>()?;
    let mut runs = runs.into_iter();
    Ok(cfg
        .learning
        .algorithms
        .iter()
        .map(|&algorithm| AlgorithmRuns {
            algorithm,
            runs: runs.by_ref().take(seeds.len()).collect(),
        })
        .collect())
}

fn episodes_to_tolerance(runs: &AlgorithmRuns, v_star: f64, tol: f64) -> f64 {
    let per_seed: Vec<f64> = runs
        .runs
        .iter()
        .map(|r| r.curve.episodes_to_tolerance(v_star, tol).map_or(f64::INFINITY, |e| e as f64))
        .collect();
    median(&per_seed)
}

fn final_error(runs: &AlgorithmRuns, v_star: f64) -> f64 {
    let errs: Vec<f64> = runs
        .runs
        .iter()
        .map(|r| r.curve.final_value().map_or(f64::INFINITY, |v| (v - v_star).abs()))
        .collect();
    median(&errs)
}

fn median_abs_error(runs: &AlgorithmRuns, v_star: f64, i: usize) -> f64 {
    let errs: Vec<f64> = runs.column(i).iter().map(|v| (v - v_star).abs()).collect();
    median(&errs)
}

pub fn learning_checks(cfg: &ExperimentConfig, v_star: f64, naive: f64, results: &[AlgorithmRuns]) -> Vec<Check> {
    let l = &cfg.learning;
    let get = |a: Algorithm| results.iter().find(|r| r.algorithm == a);
    let mut checks = vec![Check::new(
        "naive-plan-overoptimistic",
        naive > v_star,
        format!("naive planning value {naive:.4} vs optimum {v_star:.4}"),
    )];
    if let (Some(q), Some(cbc)) = (get(Algorithm::Q), get(Algorithm::CbcQ)) {
        let tol = l.relative_tol * v_star.abs();
        let (eq, ec) = (episodes_to_tolerance(q, v_star, tol), episodes_to_tolerance(cbc, v_star, tol));
        checks.push(Check::new(
            "cbc-q-needs-fewer-episodes",
            ec < eq,
            format!("median episodes to within {tol:.4}: cbc-q {ec}, q {eq}"),
        ));
        for runs in [q, cbc] {
            let err = final_error(runs, v_star);
            checks.push(Check::new(
                format!("{}-converges", runs.algorithm.name()),
                err <= l.final_tol,
                format!("median final |V - V*| = {err:.4} (tolerance {})", l.final_tol),
            ));
        }
    }
    if let (Some(ucb), Some(cb)) = (get(Algorithm::UcbQ), get(Algorithm::CbUcbQ)) {
        let warm = (l.warm_up * l.episodes as f64).floor() as usize;
        let mut worst: Option<(usize, f64, f64)> = None;
        let mut compared = 0;
        for (i, &episode) in ucb.episodes().iter().enumerate() {
            if episode <= warm {
                continue;
            }
            compared += 1;
            let (eu, ec) = (median_abs_error(ucb, v_star, i), median_abs_error(cb, v_star, i));
            if ec > eu && worst.is_none_or(|w| ec - eu > w.2 - w.1) {
                worst = Some((episode, eu, ec));
            }
        }
        let detail = match worst {
            None => format!("cb-ucb-q error <= ucb-q error at all {compared} checkpoints after episode {warm}"),
            Some((e, eu, ec)) => format!("at episode {e}: cb-ucb-q {ec:.4} > ucb-q {eu:.4}"),
        };
        checks.push(Check::new("cb-ucb-q-error-dominated", worst.is_none() && compared > 0, detail));
        let violations: u64 = cb.runs.iter().map(|r| r.cap_violations).sum();
        checks.push(Check::new(
            "cb-ucb-q-below-upper-bound",
            violations == 0,
            format!("{violations} updates left Q_U above the causal upper bound"),
        ));
    }
    checks
}

pub fn run_learning(cfg: &ExperimentConfig, p: &Prepared) -> anyhow::Result<LearningReport> {
    let v_star = p.v_star[p.start];
    let naive = naive_plan(p)?.planned[p.start];
    let results = run_matrix(cfg, p)?;
    let checks = learning_checks(cfg, v_star, naive, &results);
    Ok(LearningReport {
        v_star,
        naive_plan: naive,
        results,
        checks,
    })
}

#[derive(Serialize)]
struct SummaryRow {
    algorithm: &'static str,
    episode: usize,
    mean: f64,
    median: f64,
    min: f64,
    max: f64,
    median_abs_error: f64,
}

impl CsvRow for SummaryRow {
    const HEADER: &'static [&'static str] = &["algorithm", "episode", "mean", "median", "min", "max", "median_abs_error"];
}

fn summary_rows(report: &LearningReport) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for r in &report.results {
        for (i, &episode) in r.episodes().iter().enumerate() {
            let col = r.column(i);
            rows.push(SummaryRow {
                algorithm: r.algorithm.name(),
                episode,
                mean: col.iter().sum::<f64>() / col.len() as f64,
                median: median(&col),
                min: col.iter().cloned().fold(f64::INFINITY, f64::min),
                max: col.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                median_abs_error: median_abs_error(r, report.v_star, i),
            });
        }
    }
    rows
}

const MAX_PLOT_POINTS: usize = 400;

fn color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Q | Algorithm::UcbQ => "#1f5fbf",
        Algorithm::CbcQ | Algorithm::CbUcbQ => "#c0267a",
    }
}

/// Mean curve with a ± one standard deviation band across seeds.
fn series(r: &AlgorithmRuns) -> Series {
    let episodes = r.episodes();
    let stride = episodes.len().div_ceil(MAX_PLOT_POINTS).max(1);
    let mut points = Vec::new();
    let mut band = Vec::new();
    for i in (0..episodes.len()).step_by(stride) {
        let col = r.column(i);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let x = episodes[i] as f64;
        points.push((x, mean));
        band.push((x, mean - sd, mean + sd));
    }
    Series {
        name: r.algorithm.name().to_string(),
        color: color(r.algorithm),
        points,
        band,
    }
}

fn chart(cfg: &ExperimentConfig, report: &LearningReport, family: [Algorithm; 2], title: &str) -> Option<String> {
    let series: Vec<Series> = family.iter().filter_map(|&a| report.get(a)).map(series).collect();
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return None;
    }
    let mut references = vec![Reference {
        name: "optimum".into(),
        color: "#2a9d3a",
        y: report.v_star,
    }];
    if family[0] == Algorithm::Q {
        references.push(Reference {
            name: "naive plan".into(),
            color: "black",
            y: report.naive_plan,
        });
    }
    // Optimistic starts dwarf the interesting range, so the axis covers the
    // reference lines plus the post-warm-up curves.
    let warm = cfg.learning.warm_up * cfg.learning.episodes as f64;
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().filter(|p| p.0 > warm).map(|p| p.1))
        .chain(references.iter().map(|r| r.y));
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let pad = 0.1 * (hi - lo).max(1.0);
    Some(
        Chart {
            title: format!("{} ({})", title, cfg.name),
            x_label: "episode".into(),
            y_label: "value estimate at start".into(),
            series,
            references,
            y_range: Some((lo - pad, hi + pad)),
        }
        .render(),
    )
}

pub fn artifacts(cfg: &ExperimentConfig, report: &LearningReport) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for r in &report.results {
        let mut bytes = Vec::new();
        write_curves_csv(&r.curves(), &mut bytes)?;
        files.push((format!("curves-{}.csv", r.algorithm.name()), bytes));
    }
    files.push(("summary.csv".into(), csv_bytes(&summary_rows(report))?));
    if let Some(svg) = chart(cfg, report, [Algorithm::Q, Algorithm::CbcQ], "Q learning vs CBC-Q") {
        files.push(("q-learning.svg".into(), svg.into_bytes()));
    }
    if let Some(svg) = chart(cfg, report, [Algorithm::UcbQ, Algorithm::CbUcbQ], "UCB-Q vs CB-UCB-Q") {
        files.push(("ucb-q-learning.svg".into(), svg.into_bytes()));
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::median;

    #[test]
    fn median_handles_even_counts_and_infinity() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[1.0, 2.0, f64::INFINITY]), 2.0);
    }
}
