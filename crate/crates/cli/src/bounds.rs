//! Bound artifacts and their soundness checks against the known model.

use serde::Serialize;

use crate::pipeline::Prepared;
use crate::report::{csv_bytes, Check, CsvRow};

const SOUNDNESS_TOL: f64 = 1e-7;

#[derive(Serialize)]
struct ValueRow {
    state: usize,
    cell: String,
    v_star: f64,
    lower: f64,
    upper: f64,
}

impl CsvRow for ValueRow {
    const HEADER: &'static [&'static str] = &["state", "cell", "v_star", "lower", "upper"];
}

#[derive(Serialize)]
struct QRow {
    state: usize,
    cell: String,
    action: usize,
    q_star: f64,
    lower: f64,
    upper: f64,
}

impl CsvRow for QRow {
    const HEADER: &'static [&'static str] = &["state", "cell", "action", "q_star", "lower", "upper"];
}

pub struct BoundsReport {
    pub checks: Vec<Check>,
    pub files: Vec<(String, Vec<u8>)>,
}

pub fn soundness_checks(p: &Prepared) -> Vec<Check> {
    let ns = p.marginal.n_states();
    let na = p.marginal.n_actions();
    let v_bad = (0..ns)
        .filter(|&s| !(p.v_bounds.lo[s] <= p.v_star[s] + SOUNDNESS_TOL && p.v_star[s] <= p.v_bounds.hi[s] + SOUNDNESS_TOL))
        .count();
    let q_bad = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .filter(|&(s, a)| !p.q_bounds.contains(s, a, p.q_star.get(s, a), SOUNDNESS_TOL))
        .count();
    vec![
        Check::new(
            "model-contains-truth",
            p.model.contains_mdp(&p.marginal, 1e-9),
            "interventional rewards and transitions lie inside their intervals",
        ),
        Check::new("value-bounds-sound", v_bad == 0, format!("{v_bad} of {ns} states have V* outside [V_lo, V_hi]")),
        Check::new(
            "q-bounds-sound",
            q_bad == 0,
            format!("{q_bad} of {} pairs have Q* outside [Q_lo, Q_hi]", ns * na),
        ),
    ]
}

pub fn compute_bounds(p: &Prepared) -> anyhow::Result<BoundsReport> {
    let ns = p.marginal.n_states();
    let na = p.marginal.n_actions();
    let values: Vec<ValueRow> = (0..ns)
        .map(|s| ValueRow {
            state: s,
            cell: p.grid.cell_label(s),
            v_star: p.v_star[s],
            lower: p.v_bounds.lo[s],
            upper: p.v_bounds.hi[s],
        })
        .collect();
    let qs: Vec<QRow> = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| QRow {
            state: s,
            cell: p.grid.cell_label(s),
            action: a + 1,
            q_star: p.q_star.get(s, a),
            lower: p.q_bounds.lo(s, a),
            upper: p.q_bounds.hi(s, a),
        })
        .collect();
    let files = vec![
        ("observations.json".to_string(), p.obs.to_json().into_bytes()),
        ("bounded-model.json".to_string(), p.model.to_json().into_bytes()),
        ("q-bounds.json".to_string(), p.q_bounds.to_json().into_bytes()),
        ("value-bounds.csv".to_string(), csv_bytes(&values)?),
        ("q-bounds.csv".to_string(), csv_bytes(&qs)?),
    ];
    Ok(BoundsReport {
        checks: soundness_checks(p),
        files,
    })
}
