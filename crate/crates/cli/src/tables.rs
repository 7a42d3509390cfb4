//! Interventional effect, naive estimate and causal bounds per critical pair.

use causal_transfer::demonstrator::{naive_reward, naive_transition};
use causal_transfer::environments::{Cell, Direction};
use serde::Serialize;

use crate::config::{ExpectedRow, ExperimentConfig};
use crate::pipeline::Prepared;
use crate::report::{Check, CsvRow};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub kind: &'static str,
    pub state: String,
    pub action: usize,
    pub next: String,
    pub do_effect: f64,
    pub naive: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CsvRow for TableRow {
    const HEADER: &'static [&'static str] = &["kind", "state", "action", "next", "do_effect", "naive", "lower", "upper"];
}

impl TableRow {
    pub fn render(&self) -> String {
        let target = if self.next.is_empty() {
            format!("({}, {})", self.state, self.action)
        } else {
            format!("({}, {}, {})", self.state, self.action, self.next)
        };
        format!(
            "{:<22} {:>8.4} {:>8.4}  [{:.4}, {:.4}]",
            target, self.do_effect, self.naive, self.lower, self.upper
        )
    }
}

fn reward_row(p: &Prepared, cell: Cell, action: Direction) -> anyhow::Result<TableRow> {
    let s = p.state(cell)?;
    let a = action.index();
    let bound = p.model.pair(s, a).reward;
    Ok(TableRow {
        kind: "reward",
        state: p.grid.cell_label(s),
        action: action.number(),
        next: String::new(),
        do_effect: p.marginal.expected_reward(s, a),
        naive: naive_reward(&p.obs, s, a)?,
        lower: bound.lo,
        upper: bound.hi,
    })
}

fn transition_row(p: &Prepared, cell: Cell, action: Direction, next: Cell) -> anyhow::Result<TableRow> {
    let s = p.state(cell)?;
    let a = action.index();
    let n = p.state(next)?;
    let (lower, upper) = p
        .model
        .pair(s, a)
        .successors
        .iter()
        .find(|b| b.next == n)
        .map_or((0.0, 0.0), |b| (b.lo, b.hi));
    let naive = naive_transition(&p.obs, s, a)?
        .into_iter()
        .find(|&(o, _)| o == n)
        .map_or(0.0, |(_, q)| q);
    Ok(TableRow {
        kind: "transition",
        state: p.grid.cell_label(s),
        action: action.number(),
        next: p.grid.cell_label(n),
        do_effect: p.marginal.transition(s, a)[n],
        naive,
        lower,
        upper,
    })
}

fn expected_row(p: &Prepared, e: &ExpectedRow) -> anyhow::Result<TableRow> {
    match e.next {
        Some(next) => transition_row(p, e.cell, e.action, next),
        None => reward_row(p, e.cell, e.action),
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

fn compare(row: &TableRow, e: &ExpectedRow, tol: f64) -> Check {
    let naive = e.naive_decimals.map_or(row.naive, |d| round_to(row.naive, d));
    let diffs = [
        (row.do_effect - e.do_effect).abs(),
        (naive - e.naive).abs(),
        (row.lower - e.lower).abs(),
        (row.upper - e.upper).abs(),
    ];
    let worst = diffs.iter().cloned().fold(0.0, f64::max);
    let label = if row.next.is_empty() {
        format!("{} ({}, {})", row.kind, row.state, row.action)
    } else {
        format!("{} ({}, {}, {})", row.kind, row.state, row.action, row.next)
    };
    Check::new(
        label,
        worst <= tol,
        format!(
            "do {:.4} (want {}), naive {:.4} (want {}), bounds [{:.4}, {:.4}] (want [{}, {}]), max deviation {:.2e}",
            row.do_effect, e.do_effect, row.naive, e.naive, row.lower, row.upper, e.lower, e.upper, worst
        ),
    )
}

/// Rows for every configured expectation, or for every covered pair when
/// the config lists none.
pub fn table_rows(cfg: &ExperimentConfig, p: &Prepared) -> anyhow::Result<Vec<TableRow>> {
    let expected: Vec<&ExpectedRow> = cfg.expected.rewards.iter().chain(&cfg.expected.transitions).collect();
    if !expected.is_empty() {
        return expected.into_iter().map(|e| expected_row(p, e)).collect();
    }
    let mut rows = Vec::new();
    for pair in &cfg.bounds.pairs {
        rows.push(reward_row(p, pair.cell, pair.action)?);
        let s = p.state(pair.cell)?;
        for b in &p.model.pair(s, pair.action.index()).successors {
            rows.push(transition_row(p, pair.cell, pair.action, p.grid.cell(b.next))?);
        }
    }
    Ok(rows)
}

pub struct TableReport {
    pub rows: Vec<TableRow>,
    pub checks: Vec<Check>,
}

pub fn reproduce(cfg: &ExperimentConfig, p: &Prepared) -> anyhow::Result<TableReport> {
    let rows = table_rows(cfg, p)?;
    let tol = cfg.expected.tolerance;
    let expected: Vec<&ExpectedRow> = cfg.expected.rewards.iter().chain(&cfg.expected.transitions).collect();
    let checks = rows
        .iter()
        .zip(&expected)
        .map(|(row, e)| compare(row, e, tol))
        .collect();
    Ok(TableReport { rows, checks })
}

pub fn render(rows: &[TableRow]) -> String {
    let mut out = format!("{:<22} {:>8} {:>8}  {}\n", "target", "do", "naive", "bounds");
    for row in rows {
        out.push_str(&row.render());
        out.push('\n');
    }
    out
}
