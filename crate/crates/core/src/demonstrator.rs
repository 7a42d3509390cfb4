//! The context-aware demonstrator and the observational data it leaves behind.
//!
//! The learner never sees the context. What it gets, per state, is the joint
//! distribution of (reward, action) and of (next state, action), either
//! computed exactly by summing over contexts or estimated from sampled
//! episodes.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mdp::{
    simulate_episode, simulate_from, value_iteration, Behavior, ContextualMdp, Mdp, Outcome, Policy, Transition,
};
use crate::{Error, Result};

/// Version tag of the JSON joint-table document.
pub const OBSERVATIONS_FORMAT_VERSION: u32 = 1;
/// Version tag written as the first line of dataset CSV files.
pub const DATASET_FORMAT_VERSION: u32 = 1;

const DATASET_HEADER_PREFIX: &str = "# causal-transfer dataset v";
const EPISODES_PER_CHUNK: usize = 1024;

/// One policy per context, `π(a | s, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextPolicy {
    per_context: Vec<Policy>,
}

impl ContextPolicy {
    pub fn new(per_context: Vec<Policy>) -> Result<Self> {
        let first = per_context
            .first()
            .ok_or_else(|| Error::InvalidModel("context policy needs at least one context".into()))?;
        if per_context
            .iter()
            .any(|p| p.n_states() != first.n_states() || p.n_actions() != first.n_actions())
        {
            return Err(Error::InvalidModel("context policies have different shapes".into()));
        }
        Ok(Self { per_context })
    }

    pub fn n_contexts(&self) -> usize {
        self.per_context.len()
    }

    pub fn n_states(&self) -> usize {
        self.per_context[0].n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.per_context[0].n_actions()
    }

    pub fn policy(&self, context: usize) -> &Policy {
        &self.per_context[context]
    }

    pub fn prob(&self, state: usize, context: usize, action: usize) -> f64 {
        self.per_context[context].prob(state, action)
    }

    /// The most probable action at `(state, context)`.
    pub fn greedy_action(&self, state: usize, context: usize) -> usize {
        self.per_context[context].mode(state)
    }

    /// Makes the policy pick `action` deterministically at `(state, context)`.
    pub fn set_action(&mut self, state: usize, context: usize, action: usize) -> Result<()> {
        if context >= self.n_contexts() || state >= self.n_states() || action >= self.n_actions() {
            return Err(Error::InvalidArgument(format!(
                "override ({state}, {context}, {action}) out of range"
            )));
        }
        let mut row = vec![0.0; self.n_actions()];
        row[action] = 1.0;
        self.per_context[context].set_row(state, &row)
    }
}

impl Behavior for ContextPolicy {
    fn action_probs(&self, state: usize, context: usize) -> &[f64] {
        self.per_context[context].probs(state)
    }
}

/// Plans separately in every context with full knowledge of the model.
pub fn contextual_optimal_policy(cmdp: &ContextualMdp, tol: f64) -> ContextPolicy {
    let per_context = (0..cmdp.n_contexts())
        .map(|u| value_iteration(cmdp.context(u), tol).1)
        .collect();
    ContextPolicy { per_context }
}

/// Keeps probability `1 − ε` on each row's greedy action and spreads `ε`
/// evenly over the remaining actions.
pub fn epsilon_greedy(base: &ContextPolicy, epsilon: f64) -> Result<ContextPolicy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} not in [0, 1]")));
    }
    if epsilon == 0.0 {
        return Ok(base.clone());
    }
    let na = base.n_actions();
    let other = if na > 1 { epsilon / (na - 1) as f64 } else { 0.0 };
    let per_context = base
        .per_context
        .iter()
        .map(|p| {
            let mut probs = Vec::with_capacity(p.n_states() * na);
            for s in 0..p.n_states() {
                let greedy = p.mode(s);
                probs.extend((0..na).map(|a| {
                    if a == greedy {
                        if na > 1 {
                            1.0 - epsilon
                        } else {
                            1.0
                        }
                    } else {
                        other
                    }
                }));
            }
            Policy::new(na, probs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContextPolicy { per_context })
}

/// Outcome labels that can index a joint table: reward values or successor
/// states.
pub trait OutcomeKey: Copy + PartialEq + std::fmt::Debug {
    fn order(&self, other: &Self) -> Ordering;
}

impl OutcomeKey for f64 {
    fn order(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

impl OutcomeKey for usize {
    fn order(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

/// A joint distribution `P(o, a)` over sorted outcomes and actions, stored
/// row-major by outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTable<O> {
    outcomes: Vec<O>,
    n_actions: usize,
    mass: Vec<f64>,
}

impl<O: OutcomeKey> JointTable<O> {
    pub fn new(outcomes: Vec<O>, n_actions: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != outcomes.len() * n_actions {
            return Err(Error::InvalidModel("joint table has the wrong shape".into()));
        }
        if outcomes.windows(2).any(|w| w[0].order(&w[1]) != Ordering::Less) {
            return Err(Error::InvalidModel("joint table outcomes must be strictly increasing".into()));
        }
        if mass.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("joint table has a non-finite entry".into()));
        }
        Ok(Self {
            outcomes,
            n_actions,
            mass,
        })
    }

    /// Accumulates `(outcome, action, mass)` triples, merging duplicates and
    /// dropping outcomes whose total mass is zero.
    pub fn from_entries<I>(n_actions: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (O, usize, f64)>,
    {
        let mut rows: Vec<(O, Vec<f64>)> = Vec::new();
        for (o, a, m) in entries {
            if m == 0.0 {
                continue;
            }
            match rows.iter_mut().find(|(k, _)| *k == o) {
                Some((_, row)) => row[a] += m,
                None => {
                    let mut row = vec![0.0; n_actions];
                    row[a] = m;
                    rows.push((o, row));
                }
            }
        }
        rows.sort_by(|x, y| x.0.order(&y.0));
        let outcomes = rows.iter().map(|(o, _)| *o).collect();
        let mass = rows.into_iter().flat_map(|(_, r)| r).collect();
        Self {
            outcomes,
            n_actions,
            mass,
        }
    }

    pub fn outcomes(&self) -> &[O] {
        &self.outcomes
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// `P(o, a)` by outcome position.
    pub fn mass(&self, outcome: usize, action: usize) -> f64 {
        self.mass[outcome * self.n_actions + action]
    }

    pub fn position(&self, outcome: O) -> Option<usize> {
        self.outcomes.iter().position(|o| *o == outcome)
    }

    /// `P(a)`.
    pub fn action_mass(&self, action: usize) -> f64 {
        (0..self.n_outcomes()).map(|o| self.mass(o, action)).sum()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `P(o | a)` over [`JointTable::outcomes`], or `None` if `P(a) = 0`.
    pub fn conditional(&self, action: usize) -> Option<Vec<f64>> {
        let pa = self.action_mass(action);
        (pa > 0.0).then(|| (0..self.n_outcomes()).map(|o| self.mass(o, action) / pa).collect())
    }

    /// Clips negative entries and rescales to total mass one. Tables that
    /// are already a distribution to within `tol` are returned unchanged.
    pub fn project(&self, tol: f64) -> Result<Self> {
        if self.mass.iter().all(|&m| m >= 0.0) && (self.total() - 1.0).abs() <= tol {
            return Ok(self.clone());
        }
        let clipped: Vec<f64> = self.mass.iter().map(|&m| m.max(0.0)).collect();
        let kept: f64 = clipped.iter().sum();
        if kept <= 0.0 {
            return Err(Error::InvalidModel("joint table has no positive mass".into()));
        }
        Ok(Self {
            outcomes: self.outcomes.clone(),
            n_actions: self.n_actions,
            mass: clipped.into_iter().map(|m| m / kept).collect(),
        })
    }
}

/// Observational summaries at one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateObservations {
    /// `P(r, a | s)`.
    pub rewards: JointTable<f64>,
    /// `P(s', a | s)`.
    pub successors: JointTable<usize>,
    /// Number of recorded transitions out of the state (zero for exact
    /// distributions).
    pub visits: u64,
}

impl StateObservations {
    pub fn is_observed(&self) -> bool {
        !self.rewards.is_empty()
    }
}

/// Per-state observational joints for the whole state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationalDistribution {
    format_version: u32,
    n_states: usize,
    n_actions: usize,
    states: Vec<StateObservations>,
}

impl ObservationalDistribution {
    pub fn new(n_actions: usize, states: Vec<StateObservations>) -> Result<Self> {
        for (s, obs) in states.iter().enumerate() {
            if obs.rewards.n_actions() != n_actions || obs.successors.n_actions() != n_actions {
                return Err(Error::InvalidModel(format!("state {s} has tables of the wrong width")));
            }
            if obs.successors.outcomes().iter().any(|&n| n >= states.len()) {
                return Err(Error::InvalidModel(format!("state {s} lists an unknown successor")));
            }
        }
        Ok(Self {
            format_version: OBSERVATIONS_FORMAT_VERSION,
            n_states: states.len(),
            n_actions,
            states,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn state(&self, s: usize) -> &StateObservations {
        &self.states[s]
    }

    pub fn states(&self) -> &[StateObservations] {
        &self.states
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("observational tables serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != OBSERVATIONS_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: header.format_version,
                expected: OBSERVATIONS_FORMAT_VERSION,
            });
        }
        let parsed: Self = serde_json::from_str(text)?;
        Self::new(parsed.n_actions, parsed.states)
    }
}

/// Exact observational joints, summing the context out with weights `ρ(u)`
/// at every state.
pub fn analytic_observational(cmdp: &ContextualMdp, policy: &ContextPolicy) -> ObservationalDistribution {
    let na = cmdp.n_actions();
    let states = (0..cmdp.n_states())
        .map(|s| {
            let mut reward_entries = Vec::new();
            let mut successor_entries = Vec::new();
            for (u, &pu) in cmdp.context_dist().iter().enumerate() {
                let m = cmdp.context(u);
                for a in 0..na {
                    let w = pu * policy.prob(s, u, a);
                    if w == 0.0 {
                        continue;
                    }
                    for o in m.outcomes(s, a) {
                        reward_entries.push((o.reward, a, w * o.prob));
                        successor_entries.push((o.next, a, w * o.prob));
                    }
                }
            }
            StateObservations {
                rewards: JointTable::from_entries(na, reward_entries),
                successors: JointTable::from_entries(na, successor_entries),
                visits: 0,
            }
        })
        .collect();
    ObservationalDistribution::new(na, states).expect("tables built from a valid model")
}

/// Sufficient statistics of a transition dataset: per-state counts of
/// `(r, a)` and `(s', a)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationCounts {
    n_states: usize,
    n_actions: usize,
    rewards: Vec<HashMap<(u64, usize), u64>>,
    successors: Vec<HashMap<(usize, usize), u64>>,
    visits: Vec<u64>,
}

impl ObservationCounts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            rewards: vec![HashMap::new(); n_states],
            successors: vec![HashMap::new(); n_states],
            visits: vec![0; n_states],
        }
    }

    pub fn record(&mut self, t: &Transition) {
        // Normalise -0.0 so both zeros share a bucket.
        let reward = if t.reward == 0.0 { 0.0f64 } else { t.reward };
        *self.rewards[t.s].entry((reward.to_bits(), t.a)).or_insert(0) += 1;
        *self.successors[t.s].entry((t.next, t.a)).or_insert(0) += 1;
        self.visits[t.s] += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for s in 0..self.n_states {
            for (k, v) in &other.rewards[s] {
                *self.rewards[s].entry(*k).or_insert(0) += v;
            }
            for (k, v) in &other.successors[s] {
                *self.successors[s].entry(*k).or_insert(0) += v;
            }
            self.visits[s] += other.visits[s];
        }
        self
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    /// Empirical joints; states never visited get empty tables.
    pub fn to_distribution(&self) -> ObservationalDistribution {
        let states = (0..self.n_states)
            .map(|s| {
                let n = self.visits[s].max(1) as f64;
                StateObservations {
                    rewards: JointTable::from_entries(
                        self.n_actions,
                        self.rewards[s]
                            .iter()
                            .map(|(&(bits, a), &c)| (f64::from_bits(bits), a, c as f64 / n)),
                    ),
                    successors: JointTable::from_entries(
                        self.n_actions,
                        self.successors[s].iter().map(|(&(next, a), &c)| (next, a, c as f64 / n)),
                    ),
                    visits: self.visits[s],
                }
            })
            .collect();
        ObservationalDistribution::new(self.n_actions, states).expect("counts index valid states")
    }
}

/// How demonstrator samples are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CollectionMode {
    /// Full episodes of `horizon` steps from the initial distribution.
    Episodes { horizon: usize },
    /// Single steps from a uniformly drawn state under a freshly drawn
    /// context, so every state sees contexts in proportion `ρ(u)`.
    UniformStart,
}

/// Samples demonstrator experience in parallel chunks with independent RNG
/// streams derived from `seed`; the result does not depend on the number of
/// worker threads.
pub fn collect_counts(
    cmdp: &ContextualMdp,
    policy: &ContextPolicy,
    episodes: usize,
    mode: CollectionMode,
    seed: u64,
) -> Result<ObservationCounts> {
    if let CollectionMode::Episodes { horizon: 0 } = mode {
        return Err(Error::InvalidArgument("episode horizon must be at least 1".into()));
    }
    let ns = cmdp.n_states();
    let na = cmdp.n_actions();
    let chunks = episodes.div_ceil(EPISODES_PER_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = EPISODES_PER_CHUNK.min(episodes - chunk * EPISODES_PER_CHUNK);
            let mut counts = ObservationCounts::new(ns, na);
            for _ in 0..n {
                let log = match mode {
                    CollectionMode::Episodes { horizon } => simulate_episode(cmdp, policy, horizon, &mut rng),
                    CollectionMode::UniformStart => {
                        let context = cmdp.sample_context(&mut rng);
                        let start = rng.gen_range(0..ns);
                        simulate_from(cmdp, policy, start, context, 1, &mut rng)
                    }
                };
                for t in log.transitions() {
                    counts.record(t);
                }
            }
            counts
        })
        .reduce(|| ObservationCounts::new(ns, na), ObservationCounts::merge);
    Ok(counts)
}

/// Empirical observational distribution from `episodes` sampled runs.
pub fn collect_observations(
    cmdp: &ContextualMdp,
    policy: &ContextPolicy,
    episodes: usize,
    mode: CollectionMode,
    seed: u64,
) -> Result<ObservationalDistribution> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    Ok(collect_counts(cmdp, policy, episodes, mode, seed)?.to_distribution())
}

/// Raw demonstrator transitions without context.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub transitions: Vec<Transition>,
}

impl Dataset {
    /// Records `episodes` episodes of `horizon` steps.
    pub fn collect<R: Rng + ?Sized>(
        cmdp: &ContextualMdp,
        policy: &ContextPolicy,
        episodes: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Self {
        let mut transitions = Vec::with_capacity(episodes * horizon);
        for _ in 0..episodes {
            transitions.extend(simulate_episode(cmdp, policy, horizon, rng).into_transitions());
        }
        Self { transitions }
    }

    pub fn counts(&self, n_states: usize, n_actions: usize) -> Result<ObservationCounts> {
        let mut counts = ObservationCounts::new(n_states, n_actions);
        for t in &self.transitions {
            if t.s >= n_states || t.next >= n_states || t.a >= n_actions {
                return Err(Error::InvalidArgument(format!("transition {t:?} out of range")));
            }
            counts.record(t);
        }
        Ok(counts)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DATASET_HEADER_PREFIX}{DATASET_FORMAT_VERSION}")?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["s", "a", "s_next", "r"])?;
        for t in &self.transitions {
            writer.serialize((t.s, t.a, t.next, t.reward))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let version = first
            .trim()
            .strip_prefix(DATASET_HEADER_PREFIX)
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::Parse("missing dataset version line".into()))?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let mut csv_reader = csv::Reader::from_reader(reader);
        let mut transitions = Vec::new();
        for row in csv_reader.deserialize() {
            let (s, a, next, reward): (usize, usize, usize, f64) = row?;
            transitions.push(Transition { s, a, next, reward });
        }
        Ok(Self { transitions })
    }
}

/// `E[r | s, a]` from the observational joint; biased under confounding.
pub fn naive_reward(obs: &ObservationalDistribution, s: usize, a: usize) -> Result<f64> {
    let table = &obs.state(s).rewards;
    let pa = table.action_mass(a);
    if pa <= 0.0 {
        return Err(Error::UnobservedAction { state: s, action: a });
    }
    Ok((0..table.n_outcomes())
        .map(|o| table.outcomes()[o] * table.mass(o, a))
        .sum::<f64>()
        / pa)
}

/// `P(· | s, a)` from the observational joint as `(next, probability)` pairs.
pub fn naive_transition(obs: &ObservationalDistribution, s: usize, a: usize) -> Result<Vec<(usize, f64)>> {
    let table = &obs.state(s).successors;
    let cond = table
        .conditional(a)
        .ok_or(Error::UnobservedAction { state: s, action: a })?;
    Ok(table
        .outcomes()
        .iter()
        .copied()
        .zip(cond)
        .filter(|(_, p)| *p > 0.0)
        .collect())
}

/// The MDP a learner would fit by conditioning on observed actions.
///
/// Pairs the demonstrator never tried become self-loops paying
/// `unobserved_reward`. Reward and successor are treated as independent,
/// which preserves both the mean reward and the transition kernel.
pub fn naive_model(
    obs: &ObservationalDistribution,
    template: &Mdp,
    unobserved_reward: f64,
) -> Result<Mdp> {
    if obs.n_states() != template.n_states() || obs.n_actions() != template.n_actions() {
        return Err(Error::InvalidArgument("observations do not match the model shape".into()));
    }
    let mut outcomes = Vec::with_capacity(obs.n_states() * obs.n_actions());
    for s in 0..obs.n_states() {
        for a in 0..obs.n_actions() {
            let rewards = obs.state(s).rewards.conditional(a);
            let next = naive_transition(obs, s, a).ok();
            match (rewards, next) {
                (Some(rewards), Some(next)) => {
                    let table = &obs.state(s).rewards;
                    let mut list = Vec::new();
                    for (&r, pr) in table.outcomes().iter().zip(rewards) {
                        if pr > 0.0 {
                            list.extend(next.iter().map(|&(n, pn)| Outcome::new(n, r, pr * pn)));
                        }
                    }
                    // Renormalise away rounding from the conditionals.
                    let total: f64 = list.iter().map(|o| o.prob).sum();
                    list.iter_mut().for_each(|o| o.prob /= total);
                    outcomes.push(list);
                }
                _ => outcomes.push(vec![Outcome::new(s, unobserved_reward, 1.0)]),
            }
        }
    }
    Mdp::new(
        template.states().clone(),
        template.actions().clone(),
        outcomes,
        template.gamma(),
        template.initial().to_vec(),
    )
}
