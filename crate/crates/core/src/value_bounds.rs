//! Interval MDPs and the value and Q bounds they imply.
//!
//! A [`BoundedMdpModel`] gives, for every `(s, a)`, an interval on the mean
//! reward and an interval on each successor probability. The set of MDPs it
//! admits is a product over pairs, so the best and worst optimal value
//! functions are attained pointwise and can be computed by value iteration
//! whose backup extremizes over the local intervals.

use serde::{Deserialize, Serialize};

use crate::mdp::{Mdp, ValueTable};
use crate::{Error, Result};

/// Slack allowed when checking that transition intervals admit a
/// distribution.
pub const AMBIGUITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Probability interval for one successor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessorBound {
    pub next: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Reward and transition intervals at one `(s, a)`. Successors not listed
/// have probability zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub reward: Interval,
    pub successors: Vec<SuccessorBound>,
}

impl PairBounds {
    fn lows(&self) -> Vec<f64> {
        self.successors.iter().map(|b| b.lo).collect()
    }

    fn highs(&self) -> Vec<f64> {
        self.successors.iter().map(|b| b.hi).collect()
    }

    fn values(&self, v: &[f64]) -> Vec<f64> {
        self.successors.iter().map(|b| v[b.next]).collect()
    }

    /// `max` or `min` of `Σ P(s') v(s')` over the admissible distributions.
    pub fn extremal_next_value(&self, v: &[f64], ext: Extremum) -> Result<f64> {
        let vals = self.values(v);
        let p = extremal_distribution(&vals, &self.lows(), &self.highs(), ext)?;
        Ok(p.iter().zip(&vals).map(|(p, x)| p * x).sum())
    }
}

/// An interval-valued MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedMdpModel {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    reward_range: (f64, f64),
    pairs: Vec<PairBounds>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    reward_min: f64,
    reward_max: f64,
    pairs: Vec<PairRecord>,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    state: usize,
    action: usize,
    r_lo: f64,
    r_hi: f64,
    successors: Vec<SuccessorBound>,
}

const MODEL_FORMAT_VERSION: u32 = 1;

impl BoundedMdpModel {
    /// Validates and stores per-pair bounds indexed by `s * n_actions + a`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        pairs: Vec<PairBounds>,
        gamma: f64,
        reward_range: (f64, f64),
    ) -> Result<Self> {
        if pairs.len() != n_states * n_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} pair bounds, got {}",
                n_states * n_actions,
                pairs.len()
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!("discount {gamma} not in (0, 1)")));
        }
        let (r_min, r_max) = reward_range;
        if !(r_min.is_finite() && r_max.is_finite() && r_min <= r_max) {
            return Err(Error::InvalidModel(format!("invalid reward range [{r_min}, {r_max}]")));
        }
        for (idx, pair) in pairs.iter().enumerate() {
            let r = pair.reward;
            if !(r.lo <= r.hi) || r.lo < r_min - AMBIGUITY_TOL || r.hi > r_max + AMBIGUITY_TOL {
                return Err(Error::InvalidModel(format!(
                    "pair {idx}: reward interval [{}, {}] invalid or outside [{r_min}, {r_max}]",
                    r.lo, r.hi
                )));
            }
            let mut seen = vec![false; n_states];
            for b in &pair.successors {
                if b.next >= n_states || seen[b.next] {
                    return Err(Error::InvalidModel(format!("pair {idx}: bad successor {}", b.next)));
                }
                seen[b.next] = true;
                if !(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "pair {idx}: probability interval [{}, {}] invalid",
                        b.lo, b.hi
                    )));
                }
            }
            check_nonempty(&pair.lows(), &pair.highs())?;
        }
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            reward_range,
            pairs,
        })
    }

    /// The point model of a known MDP.
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let (lo, hi) = mdp.reward_range();
        let na = mdp.n_actions();
        let pairs = (0..mdp.n_states() * na)
            .map(|pair| {
                let (s, a) = (pair / na, pair % na);
                PairBounds {
                    reward: Interval::point(mdp.expected_reward(s, a)),
                    successors: mdp
                        .transition(s, a)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(next, &p)| SuccessorBound { next, lo: p, hi: p })
                        .collect(),
                }
            })
            .collect();
        Self::new(mdp.n_states(), na, pairs, mdp.gamma(), (lo, hi)).expect("a valid MDP is a valid point model")
    }

    /// No information: rewards anywhere in the range, any transitions.
    pub fn vacuous(n_states: usize, n_actions: usize, gamma: f64, reward_range: (f64, f64)) -> Result<Self> {
        let pair = PairBounds {
            reward: Interval::new(reward_range.0, reward_range.1),
            successors: (0..n_states)
                .map(|next| SuccessorBound {
                    next,
                    lo: 0.0,
                    hi: 1.0,
                })
                .collect(),
        };
        Self::new(n_states, n_actions, vec![pair; n_states * n_actions], gamma, reward_range)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }

    /// `[R̲/(1−γ), R̄/(1−γ)]`, the range of any discounted return.
    pub fn value_range(&self) -> (f64, f64) {
        let scale = 1.0 / (1.0 - self.gamma);
        (self.reward_range.0 * scale, self.reward_range.1 * scale)
    }

    pub fn pair(&self, s: usize, a: usize) -> &PairBounds {
        &self.pairs[s * self.n_actions + a]
    }

    /// Replaces the bounds at one pair, revalidating them.
    pub fn set_pair(&mut self, s: usize, a: usize, bounds: PairBounds) -> Result<()> {
        let mut pairs = self.pairs.clone();
        pairs[s * self.n_actions + a] = bounds;
        *self = Self::new(self.n_states, self.n_actions, pairs, self.gamma, self.reward_range)?;
        Ok(())
    }

    /// Whether the MDP's mean rewards and transitions lie inside every
    /// interval (to within `tol`).
    pub fn contains_mdp(&self, mdp: &Mdp, tol: f64) -> bool {
        (0..self.n_states).all(|s| {
            (0..self.n_actions).all(|a| {
                let pair = self.pair(s, a);
                if !pair.reward.contains(mdp.expected_reward(s, a), tol) {
                    return false;
                }
                mdp.transition(s, a).iter().enumerate().all(|(next, &p)| {
                    match pair.successors.iter().find(|b| b.next == next) {
                        Some(b) => p >= b.lo - tol && p <= b.hi + tol,
                        None => p <= tol,
                    }
                })
            })
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            reward_min: self.reward_range.0,
            reward_max: self.reward_range.1,
            pairs: self
                .pairs
                .iter()
                .enumerate()
                .map(|(idx, p)| PairRecord {
                    state: idx / self.n_actions,
                    action: idx % self.n_actions,
                    r_lo: p.reward.lo,
                    r_hi: p.reward.hi,
                    successors: p.successors.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: doc.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut pairs = vec![None; doc.n_states * doc.n_actions];
        for rec in doc.pairs {
            if rec.state >= doc.n_states || rec.action >= doc.n_actions {
                return Err(Error::Parse(format!("pair ({}, {}) out of range", rec.state, rec.action)));
            }
            pairs[rec.state * doc.n_actions + rec.action] = Some(PairBounds {
                reward: Interval::new(rec.r_lo, rec.r_hi),
                successors: rec.successors,
            });
        }
        let pairs = pairs
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("model document is missing pairs".into()))?;
        Self::new(
            doc.n_states,
            doc.n_actions,
            pairs,
            doc.gamma,
            (doc.reward_min, doc.reward_max),
        )
    }
}

fn check_nonempty(lo: &[f64], hi: &[f64]) -> Result<()> {
    let lo_sum: f64 = lo.iter().sum();
    let hi_sum: f64 = hi.iter().sum();
    if lo_sum > 1.0 + AMBIGUITY_TOL || hi_sum < 1.0 - AMBIGUITY_TOL {
        return Err(Error::EmptyAmbiguitySet { lo_sum, hi_sum });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

/// The distribution in `{p : lo ≤ p ≤ hi, Σp = 1}` that maximizes or
/// minimizes `pᵀv`.
///
/// Starts from the lower bounds and pours the remaining mass into
/// successors in order of value (best first for `Max`, worst first for
/// `Min`), each up to its upper bound. Equal values are filled in index
/// order.
pub fn extremal_distribution(v: &[f64], lo: &[f64], hi: &[f64], ext: Extremum) -> Result<Vec<f64>> {
    if v.len() != lo.len() || v.len() != hi.len() {
        return Err(Error::InvalidArgument("value and bound vectors differ in length".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(*l <= *h)) {
        return Err(Error::InvalidArgument("lower probability bound exceeds upper bound".into()));
    }
    check_nonempty(lo, hi)?;
    let mut order: Vec<usize> = (0..v.len()).collect();
    match ext {
        Extremum::Max => order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b))),
        Extremum::Min => order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b))),
    }
    let mut p = lo.to_vec();
    let mut remaining = 1.0 - lo.iter().sum::<f64>();
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (hi[i] - lo[i]).min(remaining);
        p[i] += add;
        remaining -= add;
    }
    Ok(p)
}

/// Which end of the value range a robust iteration targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Best case: upper rewards, transitions chosen to maximize.
    Optimistic,
    /// Worst case: lower rewards, transitions chosen to minimize.
    Pessimistic,
}

/// Output of [`robust_value_iteration`].
#[derive(Clone, Debug, PartialEq)]
pub struct RobustSolution {
    pub values: ValueTable,
    /// Max-norm change of each sweep.
    pub residuals: Vec<f64>,
}

fn robust_backup(model: &BoundedMdpModel, s: usize, v: &[f64], dir: Direction) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in 0..model.n_actions {
        let pair = model.pair(s, a);
        let q = match dir {
            Direction::Optimistic => pair.reward.hi + model.gamma * pair.extremal_next_value(v, Extremum::Max)?,
            Direction::Pessimistic => pair.reward.lo + model.gamma * pair.extremal_next_value(v, Extremum::Min)?,
        };
        best = best.max(q);
    }
    Ok(best)
}

/// Interval value iteration.
///
/// The policy still maximizes over actions in both directions; only the
/// model is chosen adversarially or favourably. Starting from zero, sweeps
/// contract by `γ` and stop once the change drops to `tol`.
pub fn robust_value_iteration(model: &BoundedMdpModel, dir: Direction, tol: f64) -> Result<RobustSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let ns = model.n_states;
    let mut v = vec![0.0; ns];
    let mut residuals = Vec::new();
    loop {
        let next = (0..ns)
            .map(|s| robust_backup(model, s, &v, dir))
            .collect::<Result<Vec<_>>>()?;
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        residuals.push(delta);
        if delta <= tol {
            return Ok(RobustSolution {
                values: ValueTable(v),
                residuals,
            });
        }
    }
}

/// Pointwise best- or worst-case optimal value function of the model.
pub fn robust_value_bounds(model: &BoundedMdpModel, dir: Direction, tol: f64) -> Result<ValueTable> {
    Ok(robust_value_iteration(model, dir, tol)?.values)
}

/// Positive state-relevance weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateWeights(Vec<f64>);

impl StateWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("state weights must be finite and positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n_states: usize) -> Self {
        Self(vec![1.0; n_states])
    }

    /// Weight `focus` at `state` and 1 elsewhere.
    pub fn emphasize(n_states: usize, state: usize, focus: f64) -> Result<Self> {
        let mut w = vec![1.0; n_states];
        w[state] = focus;
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `Σ c(s) V(s)`.
    pub fn weighted_sum(&self, v: &ValueTable) -> f64 {
        self.0.iter().zip(v.as_slice()).map(|(c, x)| c * x).sum()
    }
}

/// Upper and lower value bounds at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBound {
    pub upper: f64,
    pub lower: f64,
}

/// Value bounds at `state` obtained from the weighted optimum of the
/// optimistic and pessimistic programs, relaxing the other states' terms by
/// the global reward range:
///
/// `upper = V̄(s) + (Σ_{t≠s} c(t)V̄(t) − R̲/(1−γ) Σ_{t≠s} c(t)) / c(s)`
///
/// `lower = V̲(s) − (R̄/(1−γ) Σ_{t≠s} c(t) − Σ_{t≠s} c(t)V̲(t)) / c(s)`
pub fn weighted_state_bounds(
    model: &BoundedMdpModel,
    weights: &StateWeights,
    state: usize,
    tol: f64,
) -> Result<StateBound> {
    let v_opt = robust_value_bounds(model, Direction::Optimistic, tol)?;
    let v_pess = robust_value_bounds(model, Direction::Pessimistic, tol)?;
    weighted_bounds_from_tables(model, weights, state, &v_opt, &v_pess)
}

fn weighted_bounds_from_tables(
    model: &BoundedMdpModel,
    weights: &StateWeights,
    state: usize,
    v_opt: &ValueTable,
    v_pess: &ValueTable,
) -> Result<StateBound> {
    let c = weights.as_slice();
    if c.len() != model.n_states || state >= model.n_states {
        return Err(Error::InvalidArgument("weights or state do not match the model".into()));
    }
    let (v_min, v_max) = model.value_range();
    let others = |f: &dyn Fn(usize) -> f64| -> f64 { (0..c.len()).filter(|&t| t != state).map(f).sum() };
    let c_rest = others(&|t| c[t]);
    let upper = v_opt[state] + (others(&|t| c[t] * v_opt[t]) - v_min * c_rest) / c[state];
    let lower = v_pess[state] - (v_max * c_rest - others(&|t| c[t] * v_pess[t])) / c[state];
    Ok(StateBound { upper, lower })
}

/// Per-state `[lo, hi]` value bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VBoundTable {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl VBoundTable {
    /// The pointwise robust bounds.
    pub fn robust(model: &BoundedMdpModel, tol: f64) -> Result<Self> {
        Ok(Self {
            lo: robust_value_bounds(model, Direction::Pessimistic, tol)?.0,
            hi: robust_value_bounds(model, Direction::Optimistic, tol)?.0,
        })
    }

    /// Bounds from [`weighted_state_bounds`] at every state, with weight `focus` on
    /// the queried state and 1 elsewhere, clamped to the value range.
    pub fn weighted(model: &BoundedMdpModel, focus: f64, tol: f64) -> Result<Self> {
        let v_opt = robust_value_bounds(model, Direction::Optimistic, tol)?;
        let v_pess = robust_value_bounds(model, Direction::Pessimistic, tol)?;
        let (v_min, v_max) = model.value_range();
        let mut lo = Vec::with_capacity(model.n_states);
        let mut hi = Vec::with_capacity(model.n_states);
        for s in 0..model.n_states {
            let w = StateWeights::emphasize(model.n_states, s, focus)?;
            let b = weighted_bounds_from_tables(model, &w, s, &v_opt, &v_pess)?;
            lo.push(b.lower.clamp(v_min, v_max));
            hi.push(b.upper.clamp(v_min, v_max));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// Per-pair `[Q̲, Q̄]` intervals used to constrain learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QBoundTable {
    n_actions: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl QBoundTable {
    pub fn new(n_actions: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || lo.len() != hi.len() || lo.len() % n_actions != 0 {
            return Err(Error::InvalidArgument("Q bound table has the wrong shape".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument("Q lower bound exceeds upper bound".into()));
        }
        Ok(Self { n_actions, lo, hi })
    }

    /// `[-∞, +∞]` everywhere; projection becomes the identity.
    pub fn unbounded(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            lo: vec![f64::NEG_INFINITY; n_states * n_actions],
            hi: vec![f64::INFINITY; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.lo.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn lo(&self, s: usize, a: usize) -> f64 {
        self.lo[s * self.n_actions + a]
    }

    pub fn hi(&self, s: usize, a: usize) -> f64 {
        self.hi[s * self.n_actions + a]
    }

    /// Clips `x` into `[Q̲(s,a), Q̄(s,a)]`.
    pub fn project(&self, s: usize, a: usize, x: f64) -> f64 {
        x.max(self.lo(s, a)).min(self.hi(s, a))
    }

    pub fn contains(&self, s: usize, a: usize, x: f64, tol: f64) -> bool {
        x >= self.lo(s, a) - tol && x <= self.hi(s, a) + tol
    }

    /// Keeps only the upper bounds, as used when clipping optimistic
    /// estimates.
    pub fn upper_only(&self) -> Self {
        Self {
            n_actions: self.n_actions,
            lo: vec![f64::NEG_INFINITY; self.lo.len()],
            hi: self.hi.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite Q bounds serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        Self::new(t.n_actions, t.lo, t.hi)
    }
}

/// `Q̄(s,a) = r̄ + γ max_P Σ P v_hi` and `Q̲(s,a) = r̲ + γ min_P Σ P v_lo`,
/// clamped to the value range.
pub fn q_bounds(model: &BoundedMdpModel, v: &VBoundTable) -> Result<QBoundTable> {
    if v.lo.len() != model.n_states || v.hi.len() != model.n_states {
        return Err(Error::InvalidArgument("value bounds do not match the model".into()));
    }
    if v.lo.iter().zip(&v.hi).any(|(l, h)| l > h) {
        return Err(Error::InvalidArgument("value lower bound exceeds upper bound".into()));
    }
    let (v_min, v_max) = model.value_range();
    let mut lo = Vec::with_capacity(model.n_states * model.n_actions);
    let mut hi = Vec::with_capacity(model.n_states * model.n_actions);
    for s in 0..model.n_states {
        for a in 0..model.n_actions {
            let pair = model.pair(s, a);
            let upper = pair.reward.hi + model.gamma * pair.extremal_next_value(&v.hi, Extremum::Max)?;
            let lower = pair.reward.lo + model.gamma * pair.extremal_next_value(&v.lo, Extremum::Min)?;
            hi.push(upper.clamp(v_min, v_max));
            lo.push(lower.clamp(v_min, v_max).min(upper.clamp(v_min, v_max)));
        }
    }
    QBoundTable::new(model.n_actions, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, Outcome, Space};
    use proptest::prelude::*;

    #[test]
    fn forced_distribution() {
        let p = [0.2, 0.5, 0.3];
        for ext in [Extremum::Max, Extremum::Min] {
            assert_eq!(extremal_distribution(&[3.0, 1.0, 2.0], &p, &p, ext).unwrap(), p.to_vec());
        }
    }

    #[test]
    fn greedy_fill_two_successors() {
        let p = extremal_distribution(&[1.0, 0.0], &[0.0, 0.0], &[0.882, 0.898], Extremum::Max).unwrap();
        assert!((p[0] - 0.882).abs() < 1e-15 && (p[1] - 0.118).abs() < 1e-12);
        let p = extremal_distribution(&[1.0, 0.0], &[0.0, 0.0], &[0.882, 0.898], Extremum::Min).unwrap();
        assert!((p[0] - 0.102).abs() < 1e-12 && (p[1] - 0.898).abs() < 1e-15);
    }

    #[test]
    fn equal_values_fill_in_index_order() {
        let p = extremal_distribution(&[1.0, 1.0, 1.0], &[0.0; 3], &[0.5; 3], Extremum::Max).unwrap();
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn empty_ambiguity_set_is_rejected() {
        assert!(matches!(
            extremal_distribution(&[0.0, 1.0], &[0.6, 0.6], &[1.0, 1.0], Extremum::Max),
            Err(Error::EmptyAmbiguitySet { .. })
        ));
        assert!(extremal_distribution(&[0.0, 1.0], &[0.0, 0.0], &[0.4, 0.4], Extremum::Min).is_err());
    }

    fn chain() -> Mdp {
        Mdp::new(
            Space::new(3).unwrap(),
            Space::new(2).unwrap(),
            vec![
                vec![Outcome::new(1, 0.0, 1.0)],
                vec![Outcome::new(0, 1.0, 0.5), Outcome::new(2, 1.0, 0.5)],
                vec![Outcome::new(2, 2.0, 1.0)],
                vec![Outcome::new(0, -1.0, 1.0)],
                vec![Outcome::new(2, 0.0, 1.0)],
                vec![Outcome::new(1, 0.5, 1.0)],
            ],
            0.8,
            vec![1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn point_model_reduces_to_value_iteration() {
        let mdp = chain();
        let model = BoundedMdpModel::from_mdp(&mdp);
        let (v, _) = value_iteration(&mdp, 1e-12);
        for dir in [Direction::Optimistic, Direction::Pessimistic] {
            let r = robust_value_bounds(&model, dir, 1e-12).unwrap();
            for s in 0..3 {
                assert!((r[s] - v[s]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vacuous_model_hits_the_value_range() {
        let model = BoundedMdpModel::vacuous(4, 3, 0.9, (-1.0, 10.0)).unwrap();
        let hi = robust_value_bounds(&model, Direction::Optimistic, 1e-10).unwrap();
        let lo = robust_value_bounds(&model, Direction::Pessimistic, 1e-10).unwrap();
        for s in 0..4 {
            assert!((hi[s] - 100.0).abs() < 1e-7);
            assert!((lo[s] + 10.0).abs() < 1e-7);
        }
        let q = q_bounds(&model, &VBoundTable { lo: lo.0, hi: hi.0 }).unwrap();
        assert!((q.hi(2, 1) - 100.0).abs() < 1e-7);
    }

    #[test]
    fn residuals_contract_by_gamma() {
        let model = BoundedMdpModel::vacuous(3, 2, 0.7, (0.0, 1.0)).unwrap();
        let sol = robust_value_iteration(&model, Direction::Optimistic, 1e-10).unwrap();
        for w in sol.residuals.windows(2) {
            assert!(w[1] <= 0.7 * w[0] + 1e-15);
        }
    }

    #[test]
    fn single_state_weighted_bound_is_the_program_value() {
        let mdp = Mdp::new(
            Space::new(1).unwrap(),
            Space::new(1).unwrap(),
            vec![vec![Outcome::new(0, 1.0, 1.0)]],
            0.5,
            vec![1.0],
        )
        .unwrap();
        let model = BoundedMdpModel::from_mdp(&mdp);
        let b = weighted_state_bounds(&model, &StateWeights::uniform(1), 0, 1e-12).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-10 && (b.lower - 2.0).abs() < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let model = BoundedMdpModel::from_mdp(&chain());
        assert_eq!(BoundedMdpModel::from_json(&model.to_json()).unwrap(), model);
        let q = QBoundTable::new(2, vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(QBoundTable::from_json(&q.to_json()).unwrap(), q);
    }

    fn grid_best(v: &[f64], lo: &[f64], hi: &[f64], ext: Extremum, step: f64) -> f64 {
        // Enumerate all but the last coordinate on the grid; the last is
        // determined by the simplex constraint.
        let n = v.len();
        let mut best = match ext {
            Extremum::Max => f64::NEG_INFINITY,
            Extremum::Min => f64::INFINITY,
        };
        let steps = (1.0 / step).round() as usize;
        let mut idx = vec![0usize; n - 1];
        loop {
            let head: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
            let last = 1.0 - head.iter().sum::<f64>();
            let mut p = head.clone();
            p.push(last);
            if p.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| *x >= l - 1e-12 && *x <= h + 1e-12) {
                let val: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
                best = match ext {
                    Extremum::Max => best.max(val),
                    Extremum::Min => best.min(val),
                };
            }
            let mut k = 0;
            loop {
                if k == n - 1 {
                    return best;
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn extremal_matches_grid_search(
            raw in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5, 0.0f64..1.0), 2..=4),
            max in any::<bool>(),
        ) {
            // Bounds snapped to the search grid put every vertex of the
            // feasible set on the grid.
            let step = if raw.len() == 4 { 1e-2 } else { 1e-3 };
            let snap = |x: f64| (x / step).round() * step;
            let v: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let lo: Vec<f64> = raw.iter().map(|r| snap(r.1 / raw.len() as f64)).collect();
            let hi: Vec<f64> = raw.iter().zip(&lo).map(|(r, l)| snap((l + r.2).min(1.0))).collect();
            prop_assume!(lo.iter().sum::<f64>() <= 1.0 && hi.iter().sum::<f64>() >= 1.0);
            let ext = if max { Extremum::Max } else { Extremum::Min };
            let p = extremal_distribution(&v, &lo, &hi, ext).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..p.len() {
                prop_assert!(p[i] >= lo[i] - 1e-12 && p[i] <= hi[i] + 1e-12);
            }
            let value: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            let grid = grid_best(&v, &lo, &hi, ext, step);
            prop_assert!((value - grid).abs() <= 2e-3, "greedy {} grid {}", value, grid);
            match ext {
                Extremum::Max => prop_assert!(value >= grid - 1e-9),
                Extremum::Min => prop_assert!(value <= grid + 1e-9),
            }
        }
    }
}
