//! Finite MDPs and contextual MDPs.
//!
//! Each `(s, a)` pair carries a finite joint distribution over
//! `(next state, reward)` outcomes. Planning only needs the transition
//! matrix and the mean reward, but the causal bounds consume the full reward
//! distribution, so both views are kept.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::sample_index;
use crate::{Error, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default stopping tolerance for value iteration.
pub const DEFAULT_VI_TOL: f64 = 1e-10;

/// A dense index space `0..size` with optional display labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Space {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidModel("space must have at least one element".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut space = Self::new(labels.len())?;
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(labels) => labels[index].clone(),
            None => index.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// One entry of the `(s', r)` outcome distribution of a state-action pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: usize,
    pub reward: f64,
    pub prob: f64,
}

impl Outcome {
    pub fn new(next: usize, reward: f64, prob: f64) -> Self {
        Self { next, reward, prob }
    }
}

/// A finite discounted MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    states: Space,
    actions: Space,
    outcomes: Vec<Vec<Outcome>>,
    transition: Vec<f64>,
    mean_reward: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
}

impl Mdp {
    /// Builds an MDP from per-pair outcome lists indexed by `s * |A| + a`.
    ///
    /// Zero-probability outcomes are dropped and duplicates merged, so two
    /// MDPs describing the same kernel compare equal.
    pub fn new(
        states: Space,
        actions: Space,
        outcomes: Vec<Vec<Outcome>>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let ns = states.size();
        let na = actions.size();
        if outcomes.len() != ns * na {
            return Err(Error::InvalidModel(format!(
                "expected {} outcome lists, got {}",
                ns * na,
                outcomes.len()
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!("discount {gamma} not in (0, 1)")));
        }
        check_distribution(&initial, ns, "initial distribution")?;

        let mut normalized = Vec::with_capacity(outcomes.len());
        let mut transition = vec![0.0; ns * na * ns];
        let mut mean_reward = vec![0.0; ns * na];
        for (pair, list) in outcomes.into_iter().enumerate() {
            let list = normalize_outcomes(list, ns)
                .map_err(|e| Error::InvalidModel(format!("pair {pair}: {e}")))?;
            let total: f64 = list.iter().map(|o| o.prob).sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!(
                    "outcomes of pair {pair} sum to {total}"
                )));
            }
            for o in &list {
                transition[pair * ns + o.next] += o.prob;
                mean_reward[pair] += o.prob * o.reward;
            }
            normalized.push(list);
        }

        Ok(Self {
            states,
            actions,
            outcomes: normalized,
            transition,
            mean_reward,
            gamma,
            initial,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.size()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.size()
    }

    pub fn states(&self) -> &Space {
        &self.states
    }

    pub fn actions(&self) -> &Space {
        &self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.outcomes[s * self.n_actions() + a]
    }

    /// Row `P(. | s, a)` of the transition matrix.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states();
        let start = (s * self.n_actions() + a) * ns;
        &self.transition[start..start + ns]
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_reward[s * self.n_actions() + a]
    }

    /// Marginal reward distribution of `(s, a)` as `(value, probability)`
    /// pairs sorted by value.
    pub fn reward_distribution(&self, s: usize, a: usize) -> Vec<(f64, f64)> {
        let mut dist: Vec<(f64, f64)> = Vec::new();
        for o in self.outcomes(s, a) {
            match dist.iter_mut().find(|(r, _)| *r == o.reward) {
                Some(entry) => entry.1 += o.prob,
                None => dist.push((o.reward, o.prob)),
            }
        }
        dist.sort_by(|x, y| x.0.total_cmp(&y.0));
        dist
    }

    /// Next states reachable with positive probability, ascending.
    pub fn successors(&self, s: usize, a: usize) -> Vec<usize> {
        self.transition(s, a)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Smallest and largest reward value with positive probability.
    pub fn reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for o in self.outcomes.iter().flatten() {
            lo = lo.min(o.reward);
            hi = hi.max(o.reward);
        }
        (lo, hi)
    }

    /// Samples `(next state, reward)` for one step.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64) {
        let list = self.outcomes(s, a);
        let o = list[sample_index(list.iter().map(|o| o.prob), rng)];
        (o.next, o.reward)
    }

    /// `Σ_s' P(s'|s,a) v(s')`.
    pub fn expected_next_value(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
    }

    fn backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.expected_reward(s, a) + self.gamma * self.expected_next_value(s, a, v)
    }
}

fn check_distribution(probs: &[f64], len: usize, what: &str) -> Result<()> {
    if probs.len() != len {
        return Err(Error::InvalidModel(format!(
            "{what} has length {}, expected {len}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn normalize_outcomes(list: Vec<Outcome>, n_states: usize) -> std::result::Result<Vec<Outcome>, String> {
    let mut merged: Vec<Outcome> = Vec::with_capacity(list.len());
    for o in list {
        if o.next >= n_states {
            return Err(format!("next state {} out of range", o.next));
        }
        if !(o.prob.is_finite() && o.prob >= 0.0) || !o.reward.is_finite() {
            return Err(format!("invalid outcome {o:?}"));
        }
        if o.prob == 0.0 {
            continue;
        }
        match merged
            .iter_mut()
            .find(|m| m.next == o.next && m.reward == o.reward)
        {
            Some(m) => m.prob += o.prob,
            None => merged.push(o),
        }
    }
    merged.sort_by(|x, y| x.next.cmp(&y.next).then(x.reward.total_cmp(&y.reward)));
    Ok(merged)
}

/// A state-value function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    pub fn zeros(n_states: usize) -> Self {
        Self(vec![0.0; n_states])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `Σ_s ρ(s) V(s)`.
    pub fn expectation(&self, dist: &[f64]) -> f64 {
        self.0.iter().zip(dist).map(|(v, p)| v * p).sum()
    }
}

impl std::ops::Index<usize> for ValueTable {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}

/// A state-action value function stored row-major by state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    pub fn state_values(&self) -> ValueTable {
        ValueTable((0..self.n_states()).map(|s| self.max(s)).collect())
    }

    pub fn greedy_policy(&self) -> Policy {
        Policy::deterministic(
            &(0..self.n_states()).map(|s| self.argmax(s)).collect::<Vec<_>>(),
            self.n_actions,
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A stationary stochastic policy `π(a | s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || probs.len() % n_actions != 0 {
            return Err(Error::InvalidModel("policy table has the wrong shape".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(row, n_actions, &format!("policy row {s}"))?;
        }
        Ok(Self { n_actions, probs })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// Most probable action at `s`, lowest index on ties.
    pub fn mode(&self, s: usize) -> usize {
        argmax(self.probs(s))
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    pub fn set_row(&mut self, s: usize, row: &[f64]) -> Result<()> {
        check_distribution(row, self.n_actions, &format!("policy row {s}"))?;
        self.probs[s * self.n_actions..(s + 1) * self.n_actions].copy_from_slice(row);
        Ok(())
    }
}

/// Anything that can pick an action given the state and the (possibly
/// ignored) episode context.
pub trait Behavior {
    fn action_probs(&self, state: usize, context: usize) -> &[f64];

    fn sample_action<R: Rng + ?Sized>(&self, state: usize, context: usize, rng: &mut R) -> usize {
        sample_index(self.action_probs(state, context).iter().copied(), rng)
    }
}

impl Behavior for Policy {
    fn action_probs(&self, state: usize, _context: usize) -> &[f64] {
        self.probs(state)
    }
}

/// Max-norm Bellman optimality residual `‖T V − V‖∞`.
pub fn bellman_residual(mdp: &Mdp, v: &ValueTable) -> f64 {
    (0..mdp.n_states())
        .map(|s| {
            let best = (0..mdp.n_actions())
                .map(|a| mdp.backup(s, a, &v.0))
                .fold(f64::NEG_INFINITY, f64::max);
            (best - v[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Bellman optimality iteration with synchronous sweeps.
///
/// Stops once a sweep moves no entry by more than `tol`, which bounds the
/// residual of the returned table by `γ·tol`. The policy is greedy with
/// respect to the returned values, lowest action index on ties.
pub fn value_iteration(mdp: &Mdp, tol: f64) -> (ValueTable, Policy) {
    assert!(tol > 0.0, "value iteration tolerance must be positive");
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    loop {
        let mut delta: f64 = 0.0;
        for (s, slot) in next.iter_mut().enumerate() {
            let best = (0..na)
                .map(|a| mdp.backup(s, a, &v))
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            *slot = best;
        }
        std::mem::swap(&mut v, &mut next);
        if delta <= tol {
            break;
        }
    }
    let v = ValueTable(v);
    let policy = q_from_v(mdp, &v).greedy_policy();
    (v, policy)
}

/// `Q(s,a) = E[r(s,a)] + γ Σ_s' P(s'|s,a) V(s')`.
pub fn q_from_v(mdp: &Mdp, v: &ValueTable) -> QTable {
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            q.set(s, a, mdp.backup(s, a, &v.0));
        }
    }
    q
}

/// Exact-model evaluation of a stationary policy by fixed-point iteration.
pub fn policy_value(mdp: &Mdp, policy: &Policy, tol: f64) -> ValueTable {
    assert!(tol > 0.0);
    let ns = mdp.n_states();
    let mut v = vec![0.0; ns];
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                policy
                    .probs(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(a, &p)| p * mdp.backup(s, a, &v))
                    .sum()
            })
            .collect();
        for (old, new) in v.iter().zip(&next) {
            delta = delta.max((old - new).abs());
        }
        v = next;
        if delta <= tol {
            return ValueTable(v);
        }
    }
}

/// A contextual MDP: one MDP per context sharing spaces, discount and
/// initial distribution, plus the context distribution `ρ(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualMdp {
    contexts: Vec<Mdp>,
    context_dist: Vec<f64>,
}

impl ContextualMdp {
    pub fn new(contexts: Vec<Mdp>, context_dist: Vec<f64>) -> Result<Self> {
        let first = contexts
            .first()
            .ok_or_else(|| Error::InvalidModel("need at least one context".into()))?;
        check_distribution(&context_dist, contexts.len(), "context distribution")?;
        for (u, m) in contexts.iter().enumerate().skip(1) {
            if m.states != first.states || m.actions != first.actions {
                return Err(Error::InvalidModel(format!("context {u} has different spaces")));
            }
            if m.gamma != first.gamma {
                return Err(Error::InvalidModel(format!("context {u} has a different discount")));
            }
            if m.initial != first.initial {
                return Err(Error::InvalidModel(format!(
                    "context {u} has a different initial distribution"
                )));
            }
        }
        Ok(Self {
            contexts,
            context_dist,
        })
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn context(&self, u: usize) -> &Mdp {
        &self.contexts[u]
    }

    pub fn context_dist(&self) -> &[f64] {
        &self.context_dist
    }

    fn base(&self) -> &Mdp {
        &self.contexts[0]
    }

    pub fn n_states(&self) -> usize {
        self.base().n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.base().n_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.base().gamma()
    }

    pub fn initial(&self) -> &[f64] {
        self.base().initial()
    }

    pub fn states(&self) -> &Space {
        self.base().states()
    }

    pub fn actions(&self) -> &Space {
        self.base().actions()
    }

    /// Mixes the per-context kernels by `ρ(u)`, giving the MDP a
    /// context-unaware learner effectively faces.
    pub fn marginalize(&self) -> Mdp {
        let base = self.base();
        let na = base.n_actions();
        let mut outcomes = Vec::with_capacity(base.n_states() * na);
        for s in 0..base.n_states() {
            for a in 0..na {
                let mut mixed = Vec::new();
                for (m, &w) in self.contexts.iter().zip(&self.context_dist) {
                    if w == 0.0 {
                        continue;
                    }
                    mixed.extend(
                        m.outcomes(s, a)
                            .iter()
                            .map(|o| Outcome::new(o.next, o.reward, w * o.prob)),
                    );
                }
                outcomes.push(mixed);
            }
        }
        // Mixing stochastic rows by a stochastic weight vector keeps them
        // stochastic, so construction cannot fail.
        Mdp::new(
            base.states.clone(),
            base.actions.clone(),
            outcomes,
            base.gamma,
            base.initial.clone(),
        )
        .expect("mixture of valid MDPs is valid")
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.context_dist.iter().copied(), rng)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.initial().iter().copied(), rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, context: usize, rng: &mut R) -> (usize, f64) {
        self.contexts[context].step(s, a, rng)
    }
}

/// One recorded step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub next: usize,
    pub reward: f64,
}

/// The steps of one episode. The context is kept for diagnostics but is not
/// part of [`EpisodeLog::transitions`], which is what gets exported.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    context: usize,
    steps: Vec<Transition>,
}

impl EpisodeLog {
    pub fn transitions(&self) -> &[Transition] {
        &self.steps
    }

    pub fn into_transitions(self) -> Vec<Transition> {
        self.steps
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut discount = 1.0;
        for t in &self.steps {
            g += discount * t.reward;
            discount *= gamma;
        }
        g
    }
}

/// Runs one `horizon`-step episode: the context is drawn once from `ρ(u)`
/// and held fixed, the start state comes from `ρ0`.
pub fn simulate_episode<B, R>(cmdp: &ContextualMdp, behavior: &B, horizon: usize, rng: &mut R) -> EpisodeLog
where
    B: Behavior + ?Sized,
    R: Rng + ?Sized,
{
    assert!(horizon >= 1, "episode horizon must be at least 1");
    let context = cmdp.sample_context(rng);
    let start = cmdp.sample_initial(rng);
    simulate_from(cmdp, behavior, start, context, horizon, rng)
}

/// Like [`simulate_episode`] with the start state and context given.
pub fn simulate_from<B, R>(
    cmdp: &ContextualMdp,
    behavior: &B,
    start: usize,
    context: usize,
    horizon: usize,
    rng: &mut R,
) -> EpisodeLog
where
    B: Behavior + ?Sized,
    R: Rng + ?Sized,
{
    let mut steps = Vec::with_capacity(horizon);
    let mut s = start;
    for _ in 0..horizon {
        let a = behavior.sample_action(s, context, rng);
        let (next, reward) = cmdp.step(s, a, context, rng);
        steps.push(Transition { s, a, next, reward });
        s = next;
    }
    EpisodeLog { context, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state(reward: f64, gamma: f64) -> Mdp {
        Mdp::new(
            Space::new(1).unwrap(),
            Space::new(1).unwrap(),
            vec![vec![Outcome::new(0, reward, 1.0)]],
            gamma,
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_reward_absorbing_state_has_zero_value() {
        let mdp = Mdp::new(
            Space::new(1).unwrap(),
            Space::new(3).unwrap(),
            vec![vec![Outcome::new(0, 0.0, 1.0)]; 3],
            0.95,
            vec![1.0],
        )
        .unwrap();
        let (v, policy) = value_iteration(&mdp, 1e-10);
        assert_eq!(v.0, vec![0.0]);
        assert_eq!(policy.mode(0), 0);
    }

    #[test]
    fn constant_reward_is_geometric_series() {
        for gamma in [0.5, 0.9, 0.99] {
            let mdp = single_state(2.5, gamma);
            let (v, _) = value_iteration(&mdp, 1e-10);
            assert!((v[0] - 2.5 / (1.0 - gamma)).abs() < 1e-8);
            assert!(bellman_residual(&mdp, &v) <= 1e-10);

            let q = q_from_v(&mdp, &ValueTable(vec![2.5 / (1.0 - gamma)]));
            assert!((q.get(0, 0) - 2.5 / (1.0 - gamma)).abs() < 1e-12);
        }
    }

    #[test]
    fn q_of_zero_values_is_expected_reward() {
        let mdp = Mdp::new(
            Space::new(2).unwrap(),
            Space::new(2).unwrap(),
            vec![
                vec![Outcome::new(0, 1.0, 0.25), Outcome::new(1, 3.0, 0.75)],
                vec![Outcome::new(1, -1.0, 1.0)],
                vec![Outcome::new(1, 0.0, 1.0)],
                vec![Outcome::new(0, 4.0, 0.5), Outcome::new(0, 2.0, 0.5)],
            ],
            0.9,
            vec![1.0, 0.0],
        )
        .unwrap();
        let q = q_from_v(&mdp, &ValueTable::zeros(2));
        assert_eq!(q.get(0, 0), 2.5);
        assert_eq!(q.get(0, 1), -1.0);
        assert_eq!(q.get(1, 0), 0.0);
        assert_eq!(q.get(1, 1), 3.0);
        assert_eq!(mdp.reward_distribution(1, 1), vec![(2.0, 0.5), (4.0, 0.5)]);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = Mdp::new(
            Space::new(1).unwrap(),
            Space::new(1).unwrap(),
            vec![vec![Outcome::new(0, 0.0, 0.9)]],
            0.9,
            vec![1.0],
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));

        let err = Mdp::new(
            Space::new(1).unwrap(),
            Space::new(1).unwrap(),
            vec![vec![Outcome::new(0, 0.0, 1.0)]],
            1.0,
            vec![1.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn single_context_marginal_is_identity() {
        let mdp = single_state(1.0, 0.9);
        let cmdp = ContextualMdp::new(vec![mdp.clone()], vec![1.0]).unwrap();
        assert_eq!(cmdp.marginalize(), mdp);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn simulation_is_reproducible() {
        let mdp = Mdp::new(
            Space::new(2).unwrap(),
            Space::new(2).unwrap(),
            vec![
                vec![Outcome::new(0, 1.0, 0.5), Outcome::new(1, 0.0, 0.5)],
                vec![Outcome::new(1, 2.0, 1.0)],
                vec![Outcome::new(0, 0.0, 1.0)],
                vec![Outcome::new(1, 1.0, 0.3), Outcome::new(0, 5.0, 0.7)],
            ],
            0.9,
            vec![0.5, 0.5],
        )
        .unwrap();
        let cmdp = ContextualMdp::new(vec![mdp.clone(), mdp], vec![0.4, 0.6]).unwrap();
        let policy = Policy::uniform(2, 2);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| simulate_episode(&cmdp, &policy, 15, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }
}
