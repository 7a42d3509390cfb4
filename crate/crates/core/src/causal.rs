//! Partial-identification bounds on interventional rewards and transitions.
//!
//! At a single state the demonstrator's data gives a joint `P(o, a)` over
//! outcomes `o` (reward values or next states) and actions `a`. Any
//! confounded system consistent with that joint can be written as a
//! distribution `q` over pairs `(i, j)`, where `i` is the action the
//! demonstrator would take and `j` indexes a *response mapping* fixing the
//! outcome of every action. The interventional quantity is linear in `q`, so
//! its sharp range is a pair of linear programs.
//!
//! Mappings are enumerated in mixed radix with the last action varying
//! fastest; mapping `j` sends action `a` to outcome
//! `(j / N_o^(N_a - 1 - a)) mod N_o`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demonstrator::{naive_reward, naive_transition, JointTable, ObservationalDistribution, OutcomeKey};
use crate::lp::{self, LinearProgram, Sense};
use crate::value_bounds::{BoundedMdpModel, Interval, PairBounds, SuccessorBound};
use crate::{Error, Result};

/// Largest number of response mappings enumerated by default.
pub const DEFAULT_MAPPING_CAP: usize = 1 << 20;

/// Tolerance for projecting empirical joints onto the simplex.
pub const PROJECTION_TOL: f64 = 1e-9;

/// All deterministic maps from `n_actions` actions to `n_outcomes` outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResponseMappings {
    n_actions: usize,
    n_outcomes: usize,
    len: usize,
}

impl ResponseMappings {
    pub fn new(n_actions: usize, n_outcomes: usize) -> Result<Self> {
        Self::with_cap(n_actions, n_outcomes, DEFAULT_MAPPING_CAP)
    }

    pub fn with_cap(n_actions: usize, n_outcomes: usize, cap: usize) -> Result<Self> {
        if n_actions == 0 || n_outcomes == 0 {
            return Err(Error::InvalidArgument("need at least one action and one outcome".into()));
        }
        let too_large = || Error::EnumerationTooLarge {
            outcomes: n_outcomes,
            actions: n_actions,
            cap,
        };
        let mut len: usize = 1;
        for _ in 0..n_actions {
            len = len.checked_mul(n_outcomes).filter(|&l| l <= cap).ok_or_else(too_large)?;
        }
        Ok(Self {
            n_actions,
            n_outcomes,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    /// Outcome index that mapping `j` assigns to `action`.
    pub fn outcome(&self, action: usize, j: usize) -> usize {
        let stride = self.n_outcomes.pow((self.n_actions - 1 - action) as u32);
        (j / stride) % self.n_outcomes
    }

    /// Mappings sending `action` to `outcome`, ascending.
    pub fn index_set(&self, outcome: usize, action: usize) -> Vec<usize> {
        (0..self.len).filter(|&j| self.outcome(action, j) == outcome).collect()
    }

    /// Number of LP variables, one per (demonstrator action, mapping) pair.
    pub fn n_variables(&self) -> usize {
        self.n_actions * self.len
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    RewardExpectation,
    TransitionProbability,
}

/// What an interval bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundTarget {
    pub state: usize,
    pub action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<usize>,
}

/// A closed interval on `E[r | s, do(a)]` or `P(s' | s, do(a))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalInterval {
    pub lo: f64,
    pub hi: f64,
    pub target: BoundTarget,
    pub kind: BoundKind,
}

impl CausalInterval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Known interventional distribution `P(o | do(action))` at a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoPrior<O> {
    pub action: usize,
    pub dist: Vec<(O, f64)>,
}

impl<O: OutcomeKey> DoPrior<O> {
    pub fn point(action: usize, outcome: O) -> Self {
        Self {
            action,
            dist: vec![(outcome, 1.0)],
        }
    }

    fn validate(&self, n_actions: usize) -> Result<()> {
        if self.action >= n_actions {
            return Err(Error::InvalidArgument(format!("prior on unknown action {}", self.action)));
        }
        if self.dist.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("prior has a negative probability".into()));
        }
        let total: f64 = self.dist.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("prior sums to {total}")));
        }
        Ok(())
    }
}

/// Settings shared by every interval LP at a state.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSettings {
    pub tol: f64,
    pub mapping_cap: usize,
    /// Assume `P(o | do(a)) = 0` for any outcome never seen together with
    /// `a`, provided `a` itself was observed.
    pub positivity: bool,
}

impl Default for LpSettings {
    fn default() -> Self {
        Self {
            tol: lp::DEFAULT_TOL,
            mapping_cap: DEFAULT_MAPPING_CAP,
            positivity: false,
        }
    }
}

/// Builds the response-mapping program for `target` with objective
/// `Σ_j value[f(target, j)] · Σ_i q_ij`.
///
/// `outcomes` is the outcome space (observed outcomes plus any that only
/// priors mention); `joint` masses are looked up by outcome.
fn mapping_program<O: OutcomeKey>(
    joint: &JointTable<O>,
    outcomes: &[O],
    values: &[f64],
    priors: &[DoPrior<O>],
    settings: &LpSettings,
    target: usize,
) -> Result<(LinearProgram, ResponseMappings)> {
    let na = joint.n_actions();
    let maps = ResponseMappings::with_cap(na, outcomes.len(), settings.mapping_cap)?;
    let m = maps.len();
    let n = maps.n_variables();
    let objective = (0..n).map(|v| values[maps.outcome(target, v % m)]).collect();
    let mut lp = LinearProgram::new(Sense::Minimize, objective);

    let observed_mass = |o: usize, a: usize| joint.position(outcomes[o]).map_or(0.0, |p| joint.mass(p, a));

    // The demonstrator's own action reveals that action's outcome.
    for a in 0..na {
        for o in 0..outcomes.len() {
            let mut row = vec![0.0; n];
            for j in 0..m {
                if maps.outcome(a, j) == o {
                    row[a * m + j] = 1.0;
                }
            }
            lp.add_equality(row, observed_mass(o, a));
        }
    }
    lp.add_equality(vec![1.0; n], 1.0);

    let do_row = |action: usize, o: usize| {
        let mut row = vec![0.0; n];
        for i in 0..na {
            for j in 0..m {
                if maps.outcome(action, j) == o {
                    row[i * m + j] = 1.0;
                }
            }
        }
        row
    };
    for prior in priors {
        for (o, key) in outcomes.iter().enumerate() {
            let p: f64 = prior.dist.iter().filter(|(k, _)| k == key).map(|(_, p)| p).sum();
            lp.add_equality(do_row(prior.action, o), p);
        }
    }
    if settings.positivity {
        for a in 0..na {
            if joint.action_mass(a) <= 0.0 {
                continue;
            }
            for o in 0..outcomes.len() {
                if observed_mass(o, a) <= 0.0 {
                    lp.add_equality(do_row(a, o), 0.0);
                }
            }
        }
    }
    Ok((lp, maps))
}

/// Outcome space: observed outcomes plus any mentioned by priors, sorted.
fn outcome_space<O: OutcomeKey>(joint: &JointTable<O>, priors: &[DoPrior<O>]) -> Vec<O> {
    let mut outcomes: Vec<O> = joint.outcomes().to_vec();
    for prior in priors {
        for (o, p) in &prior.dist {
            if *p > 0.0 && !outcomes.contains(o) {
                outcomes.push(*o);
            }
        }
    }
    outcomes.sort_by(|a, b| a.order(b));
    outcomes
}

fn solve_range(lp: &LinearProgram, tol: f64, state: usize, action: usize) -> Result<(f64, f64)> {
    let map = |e: lp::LpError| match e {
        lp::LpError::Infeasible => Error::InconsistentData { state, action },
        other => Error::Lp(other),
    };
    let lo = lp::solve(&lp.with_sense(Sense::Minimize), tol).map_err(map)?.value;
    let hi = lp::solve(&lp.with_sense(Sense::Maximize), tol).map_err(map)?.value;
    Ok((lo, hi.max(lo)))
}

/// Sharp bounds on `E[r | s, do(target)]` from `P(r, a | s)` and optional
/// interventional priors on other (or the same) actions.
pub fn reward_do_bounds(
    joint: &JointTable<f64>,
    state: usize,
    target: usize,
    priors: &[DoPrior<f64>],
    settings: &LpSettings,
) -> Result<CausalInterval> {
    check_inputs(joint, target, priors)?;
    let joint = joint.project(PROJECTION_TOL)?;
    let outcomes = outcome_space(&joint, priors);
    let (lp, _) = mapping_program(&joint, &outcomes, &outcomes, priors, settings, target)?;
    let (lo, hi) = solve_range(&lp, settings.tol, state, target)?;
    Ok(CausalInterval {
        lo,
        hi,
        target: BoundTarget {
            state,
            action: target,
            next: None,
        },
        kind: BoundKind::RewardExpectation,
    })
}

/// Sharp bounds on `P(next | s, do(target))` from `P(s', a | s)`.
pub fn transition_do_bounds(
    joint: &JointTable<usize>,
    state: usize,
    target: usize,
    next: usize,
    priors: &[DoPrior<usize>],
    settings: &LpSettings,
) -> Result<CausalInterval> {
    check_inputs(joint, target, priors)?;
    let joint = joint.project(PROJECTION_TOL)?;
    let outcomes = outcome_space(&joint, priors);
    let target_bound = |lo: f64, hi: f64| CausalInterval {
        lo: lo.clamp(0.0, 1.0),
        hi: hi.clamp(0.0, 1.0),
        target: BoundTarget {
            state,
            action: target,
            next: Some(next),
        },
        kind: BoundKind::TransitionProbability,
    };
    if !outcomes.contains(&next) {
        // Outside the modeled outcome space: never observed, never named.
        return Ok(target_bound(0.0, 0.0));
    }
    let values: Vec<f64> = outcomes.iter().map(|&o| if o == next { 1.0 } else { 0.0 }).collect();
    let (lp, _) = mapping_program(&joint, &outcomes, &values, priors, settings, target)?;
    let (lo, hi) = solve_range(&lp, settings.tol, state, target)?;
    Ok(target_bound(lo, hi))
}

/// All successor intervals for one `(s, a)`, sharing a single program
/// structure across successors.
pub fn transition_do_bounds_all(
    joint: &JointTable<usize>,
    state: usize,
    target: usize,
    priors: &[DoPrior<usize>],
    settings: &LpSettings,
) -> Result<Vec<CausalInterval>> {
    let outcomes = outcome_space(joint, priors);
    outcomes
        .iter()
        .map(|&next| transition_do_bounds(joint, state, target, next, priors, settings))
        .collect()
}

fn check_inputs<O: OutcomeKey>(joint: &JointTable<O>, target: usize, priors: &[DoPrior<O>]) -> Result<()> {
    if target >= joint.n_actions() {
        return Err(Error::InvalidArgument(format!("target action {target} out of range")));
    }
    if joint.is_empty() {
        return Err(Error::InvalidArgument("empty observational joint".into()));
    }
    for p in priors {
        p.validate(joint.n_actions())?;
    }
    Ok(())
}

/// Which `(s, a)` pairs get LP bounds; the rest use point estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pairs", rename_all = "kebab-case")]
pub enum Coverage {
    /// Every observed pair.
    All,
    /// Pairs with more than one observed reward value or successor.
    Heuristic,
    /// An explicit list of `(state, action)` pairs.
    Pairs(Vec<(usize, usize)>),
}

/// Interventional knowledge supplied for one state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatePriors {
    #[serde(default)]
    pub rewards: Vec<DoPrior<f64>>,
    #[serde(default)]
    pub transitions: Vec<DoPrior<usize>>,
}

/// Assembly options for [`bound_all`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConfig {
    pub coverage: Coverage,
    /// Global reward range `[R̲, R̄]`, used for unobserved pairs.
    pub reward_range: (f64, f64),
    pub gamma: f64,
    /// Treat every non-target action whose observed outcome is unique as
    /// deterministic under intervention.
    pub deterministic_priors: bool,
    /// Explicit priors keyed by state.
    pub priors: Vec<(usize, StatePriors)>,
    pub lp: LpSettings,
}

impl BoundConfig {
    pub fn new(reward_range: (f64, f64), gamma: f64) -> Self {
        Self {
            coverage: Coverage::All,
            reward_range,
            gamma,
            deterministic_priors: false,
            priors: Vec::new(),
            lp: LpSettings::default(),
        }
    }

    fn state_priors(&self, s: usize) -> StatePriors {
        let mut out = StatePriors::default();
        for (state, p) in &self.priors {
            if *state == s {
                out.rewards.extend(p.rewards.iter().cloned());
                out.transitions.extend(p.transitions.iter().cloned());
            }
        }
        out
    }
}

fn is_covered(coverage: &Coverage, obs: &ObservationalDistribution, s: usize, a: usize) -> bool {
    match coverage {
        Coverage::All => true,
        Coverage::Pairs(pairs) => pairs.contains(&(s, a)),
        Coverage::Heuristic => {
            let st = obs.state(s);
            let distinct = |count: usize| count > 1;
            let rewards = (0..st.rewards.n_outcomes()).filter(|&o| st.rewards.mass(o, a) > 0.0).count();
            let nexts = (0..st.successors.n_outcomes())
                .filter(|&o| st.successors.mass(o, a) > 0.0)
                .count();
            distinct(rewards) || distinct(nexts)
        }
    }
}

/// Point priors for every non-target action with a single observed outcome.
fn deterministic_priors<O: OutcomeKey>(joint: &JointTable<O>, target: usize) -> Vec<DoPrior<O>> {
    (0..joint.n_actions())
        .filter(|&a| a != target)
        .filter_map(|a| {
            let seen: Vec<usize> = (0..joint.n_outcomes()).filter(|&o| joint.mass(o, a) > 0.0).collect();
            (seen.len() == 1).then(|| DoPrior::point(a, joint.outcomes()[seen[0]]))
        })
        .collect()
}

fn vacuous_pair(n_states: usize, range: (f64, f64)) -> PairBounds {
    PairBounds {
        reward: Interval::new(range.0, range.1),
        successors: (0..n_states)
            .map(|next| SuccessorBound {
                next,
                lo: 0.0,
                hi: 1.0,
            })
            .collect(),
    }
}

fn bound_pair(
    obs: &ObservationalDistribution,
    config: &BoundConfig,
    priors: &StatePriors,
    s: usize,
    a: usize,
) -> Result<PairBounds> {
    let st = obs.state(s);
    if !st.is_observed() || st.rewards.action_mass(a) <= 0.0 {
        return Ok(vacuous_pair(obs.n_states(), config.reward_range));
    }
    if !is_covered(&config.coverage, obs, s, a) {
        let r = naive_reward(obs, s, a)?;
        return Ok(PairBounds {
            reward: Interval::point(r),
            successors: naive_transition(obs, s, a)?
                .into_iter()
                .map(|(next, p)| SuccessorBound { next, lo: p, hi: p })
                .collect(),
        });
    }

    let mut reward_priors: Vec<DoPrior<f64>> = priors.rewards.clone();
    let mut transition_priors: Vec<DoPrior<usize>> = priors.transitions.clone();
    if config.deterministic_priors {
        let explicit_r: Vec<usize> = reward_priors.iter().map(|p| p.action).collect();
        let explicit_t: Vec<usize> = transition_priors.iter().map(|p| p.action).collect();
        reward_priors.extend(
            deterministic_priors(&st.rewards, a)
                .into_iter()
                .filter(|p| !explicit_r.contains(&p.action)),
        );
        transition_priors.extend(
            deterministic_priors(&st.successors, a)
                .into_iter()
                .filter(|p| !explicit_t.contains(&p.action)),
        );
    }

    let reward = reward_do_bounds(&st.rewards, s, a, &reward_priors, &config.lp)?;
    let mut successors = Vec::new();
    for bound in transition_do_bounds_all(&st.successors, s, a, &transition_priors, &config.lp)? {
        if bound.hi > 0.0 {
            successors.push(SuccessorBound {
                next: bound.target.next.expect("transition bound has a successor"),
                lo: bound.lo,
                hi: bound.hi,
            });
        }
    }
    // Rewards that a pair can never receive under the target are still
    // bounded by the LP, but keep the interval inside the global range so
    // value bounds stay well defined.
    let (lo, hi) = config.reward_range;
    Ok(PairBounds {
        reward: Interval::new(reward.lo.clamp(lo, hi), reward.hi.clamp(lo, hi)),
        successors,
    })
}

/// Interval model over every `(s, a)`: LP bounds on covered pairs, point
/// estimates on other observed pairs and vacuous intervals where the
/// demonstrator left no data.
pub fn bound_all(obs: &ObservationalDistribution, config: &BoundConfig) -> Result<BoundedMdpModel> {
    let (lo, hi) = config.reward_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid reward range [{lo}, {hi}]")));
    }
    for st in obs.states() {
        if let (Some(first), Some(last)) = (st.rewards.outcomes().first(), st.rewards.outcomes().last()) {
            if *first < lo || *last > hi {
                return Err(Error::InvalidArgument(format!(
                    "observed rewards [{first}, {last}] fall outside the range [{lo}, {hi}]"
                )));
            }
        }
    }
    let na = obs.n_actions();
    let pairs: Vec<PairBounds> = (0..obs.n_states() * na)
        .into_par_iter()
        .map(|pair| {
            let (s, a) = (pair / na, pair % na);
            bound_pair(obs, config, &config.state_priors(s), s, a)
        })
        .collect::<Result<_>>()?;
    BoundedMdpModel::new(obs.n_states(), na, pairs, config.gamma, config.reward_range)
}
