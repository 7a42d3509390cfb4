//! Tabular learners for the context-unaware agent.
//!
//! Four variants share one episode loop: Q learning with ε-greedy
//! exploration, the same with every update projected into causal Q bounds
//! (CBC-Q), UCB-Q acting greedily on an optimistic estimate, and UCB-Q whose
//! estimate is capped by the causal upper bound after every update
//! (CB-UCB-Q). The context is drawn once per episode and never shown to the
//! learner.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{Behavior, ContextualMdp, Policy, QTable};
use crate::value_bounds::QBoundTable;
use crate::{Error, Result};

/// Step-size schedule as a function of the visit count `k ≥ 1` of the
/// updated pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearningRate {
    Constant { alpha: f64 },
    /// `1 / k`.
    InverseVisits,
    /// `(H + 1) / (H + k)`.
    Ucb { horizon: usize },
}

impl LearningRate {
    pub fn alpha(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match *self {
            LearningRate::Constant { alpha } => alpha,
            LearningRate::InverseVisits => 1.0 / k as f64,
            LearningRate::Ucb { horizon } => (horizon as f64 + 1.0) / (horizon as f64 + k as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LearningRate::Constant { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::InvalidArgument(format!("constant learning rate {alpha} not in (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Q,
    CbcQ,
    UcbQ,
    CbUcbQ,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Q, Algorithm::CbcQ, Algorithm::UcbQ, Algorithm::CbUcbQ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Q => "q",
            Algorithm::CbcQ => "cbc-q",
            Algorithm::UcbQ => "ucb-q",
            Algorithm::CbUcbQ => "cb-ucb-q",
        }
    }

    pub fn uses_bounds(self) -> bool {
        matches!(self, Algorithm::CbcQ | Algorithm::CbUcbQ)
    }

    pub fn is_ucb(self) -> bool {
        matches!(self, Algorithm::UcbQ | Algorithm::CbUcbQ)
    }
}

/// Hyperparameters shared by all learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub learning_rate: LearningRate,
    /// Exploration rate of the ε-greedy learners; UCB learners are greedy.
    pub epsilon: f64,
    /// Bonus scale `c_b`.
    pub bonus_scale: f64,
    /// Confidence level `δ` inside the bonus logarithm.
    pub delta: f64,
    /// Optimistic starting value for UCB learners; defaults to
    /// `R̄ / (1 − γ)` of the environment.
    #[serde(default)]
    pub optimistic_init: Option<f64>,
    /// Record a checkpoint every this many episodes (and after the last).
    pub checkpoint_every: usize,
    /// Monte-Carlo episodes used to score the greedy policy at each
    /// checkpoint; zero disables that metric.
    pub eval_episodes: usize,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(episodes: usize, horizon: usize) -> Self {
        Self {
            episodes,
            horizon,
            learning_rate: LearningRate::Ucb { horizon },
            epsilon: 0.1,
            bonus_scale: 1.0,
            delta: 0.05,
            optimistic_init: None,
            checkpoint_every: 50,
            eval_episodes: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learning_rate.validate()?;
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon {} not in [0, 1]", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta {} not in (0, 1)", self.delta)));
        }
        if self.bonus_scale < 0.0 {
            return Err(Error::InvalidArgument("bonus scale must be nonnegative".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidArgument("checkpoint cadence must be at least 1".into()));
        }
        Ok(())
    }

    /// `b = c_b √(ln(|S||A|KT/δ) / k)`.
    pub fn bonus(&self, n_states: usize, n_actions: usize, k: u64) -> f64 {
        let total = (n_states * n_actions) as f64 * self.episodes.max(1) as f64 * self.horizon as f64;
        self.bonus_scale * ((total / self.delta).ln() / k as f64).sqrt()
    }
}

/// One observed transition as seen by the learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub s: usize,
    pub a: usize,
    pub next: usize,
    pub reward: f64,
}

/// `Q(s,a) ← (1 − α) Q(s,a) + α (r + γ max_a' Q(s',a'))`.
pub fn q_learning_step(q: &mut QTable, step: Step, alpha: f64, gamma: f64) {
    let target = step.reward + gamma * q.max(step.next);
    let old = q.get(step.s, step.a);
    q.set(step.s, step.a, (1.0 - alpha) * old + alpha * target);
}

/// A Q-learning step followed by projection into `[Q̲(s,a), Q̄(s,a)]`.
pub fn cbc_q_learning_step(q: &mut QTable, step: Step, alpha: f64, gamma: f64, bounds: &QBoundTable) {
    q_learning_step(q, step, alpha, gamma);
    let clipped = bounds.project(step.s, step.a, q.get(step.s, step.a));
    q.set(step.s, step.a, clipped);
}

/// `Q_U(s,a) ← (1 − α) Q_U(s,a) + α (r + γ max_a' Q_U(s',a') + b)`.
pub fn ucb_q_learning_step(q: &mut QTable, step: Step, alpha: f64, gamma: f64, bonus: f64) {
    let target = step.reward + gamma * q.max(step.next) + bonus;
    let old = q.get(step.s, step.a);
    q.set(step.s, step.a, (1.0 - alpha) * old + alpha * target);
}

/// A UCB-Q step followed by `Q_U(s,a) ← min(Q_U(s,a), Q̄(s,a))`.
pub fn cb_ucb_q_learning_step(q: &mut QTable, step: Step, alpha: f64, gamma: f64, bonus: f64, bounds: &QBoundTable) {
    ucb_q_learning_step(q, step, alpha, gamma, bonus);
    let capped = q.get(step.s, step.a).min(bounds.hi(step.s, step.a));
    q.set(step.s, step.a, capped);
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    pub stderr: f64,
    pub episodes: usize,
}

/// Discounted return of `policy` over `episodes` runs of `horizon` steps,
/// resampling the start state and the context every run.
pub fn evaluate_policy<B, R>(env: &ContextualMdp, policy: &B, episodes: usize, horizon: usize, rng: &mut R) -> Result<Evaluation>
where
    B: Behavior + ?Sized,
    R: Rng + ?Sized,
{
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one evaluation episode".into()));
    }
    let gamma = env.gamma();
    // Welford's running mean and squared deviation.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=episodes {
        let u = env.sample_context(rng);
        let mut s = env.sample_initial(rng);
        let mut g = 0.0;
        let mut discount = 1.0;
        for _ in 0..horizon {
            let a = policy.sample_action(s, u, rng);
            let (next, r) = env.step(s, a, u, rng);
            g += discount * r;
            discount *= gamma;
            s = next;
        }
        let delta = g - mean;
        mean += delta / n as f64;
        m2 += delta * (g - mean);
    }
    let n = episodes as f64;
    let var = if episodes > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok(Evaluation {
        mean,
        stderr: (var / n).sqrt(),
        episodes,
    })
}

/// Learner-side metrics at one checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// `Σ_s ρ0(s) max_a Q(s, a)`.
    pub value_estimate: f64,
    /// Monte-Carlo return of the greedy policy, when evaluation is enabled.
    pub greedy_return: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn final_value(&self) -> Option<f64> {
        self.points.last().map(|p| p.value_estimate)
    }

    /// First checkpoint episode after which every recorded value estimate
    /// stays within `tol` of `target`.
    pub fn episodes_to_tolerance(&self, target: f64, tol: f64) -> Option<usize> {
        let mut first = None;
        for p in &self.points {
            if (p.value_estimate - target).abs() <= tol {
                first.get_or_insert(p.episode);
            } else {
                first = None;
            }
        }
        first
    }
}

/// Writes curves as `seed,episode,metric,value` rows.
pub fn write_curves_csv<W: Write>(curves: &[LearningCurve], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["seed", "episode", "metric", "value"])?;
    for curve in curves {
        for p in &curve.points {
            writer.serialize((curve.seed, p.episode, "value_estimate", p.value_estimate))?;
            if let Some(g) = p.greedy_return {
                writer.serialize((curve.seed, p.episode, "greedy_return", g))?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Result of one learning run.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningRun {
    pub q: QTable,
    pub curve: LearningCurve,
    /// Steps after which the updated entry exceeded its causal upper bound.
    /// Always zero for CB-UCB-Q; reported for auditing.
    pub cap_violations: u64,
}

fn greedy_with_epsilon<R: Rng + ?Sized>(q: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.n_actions())
    } else {
        q.argmax(s)
    }
}

fn checkpoint(env: &ContextualMdp, q: &QTable, cfg: &LearnerConfig, episode: usize, eval_rng: &mut ChaCha8Rng) -> Result<CurvePoint> {
    let value_estimate = env
        .initial()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| p * q.max(s))
        .sum();
    let greedy_return = if cfg.eval_episodes > 0 {
        let policy: Policy = q.greedy_policy();
        Some(evaluate_policy(env, &policy, cfg.eval_episodes, cfg.horizon, eval_rng)?.mean)
    } else {
        None
    };
    Ok(CurvePoint {
        episode,
        value_estimate,
        greedy_return,
    })
}

/// Runs `algorithm` for `cfg.episodes` episodes.
///
/// Learning and evaluation draw from separate streams of the same seed, so
/// turning evaluation on or off leaves the learning trajectory unchanged.
/// `bounds` is required for the bound-aware algorithms and ignored by the
/// others.
pub fn run_learner(
    env: &ContextualMdp,
    cfg: &LearnerConfig,
    algorithm: Algorithm,
    bounds: Option<&QBoundTable>,
) -> Result<LearningRun> {
    cfg.validate()?;
    let ns = env.n_states();
    let na = env.n_actions();
    let gamma = env.gamma();
    let bounds = match (algorithm.uses_bounds(), bounds) {
        (true, None) => {
            return Err(Error::InvalidArgument(format!("{} needs Q bounds", algorithm.name())));
        }
        (true, Some(b)) if b.n_states() != ns || b.n_actions() != na => {
            return Err(Error::InvalidArgument("Q bounds do not match the environment".into()));
        }
        (true, Some(b)) => Some(b),
        (false, _) => None,
    };

    let mut q = if algorithm.is_ucb() {
        let init = cfg.optimistic_init.unwrap_or_else(|| {
            let (_, r_max) = env.marginalize().reward_range();
            r_max / (1.0 - gamma)
        });
        QTable::filled(ns, na, init)
    } else {
        QTable::zeros(ns, na)
    };
    if let (Algorithm::CbcQ, Some(b)) = (algorithm, bounds) {
        for s in 0..ns {
            for a in 0..na {
                q.set(s, a, b.project(s, a, q.get(s, a)));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eval_rng.set_stream(1);
    let mut visits = vec![0u64; ns * na];
    let mut points = Vec::new();
    let mut cap_violations = 0;

    for episode in 1..=cfg.episodes {
        let u = env.sample_context(&mut rng);
        let mut s = env.sample_initial(&mut rng);
        for _ in 0..cfg.horizon {
            let a = if algorithm.is_ucb() {
                q.argmax(s)
            } else {
                greedy_with_epsilon(&q, s, cfg.epsilon, &mut rng)
            };
            let (next, reward) = env.step(s, a, u, &mut rng);
            let k = &mut visits[s * na + a];
            *k += 1;
            let alpha = cfg.learning_rate.alpha(*k);
            let step = Step { s, a, next, reward };
            match algorithm {
                Algorithm::Q => q_learning_step(&mut q, step, alpha, gamma),
                Algorithm::CbcQ => cbc_q_learning_step(&mut q, step, alpha, gamma, bounds.expect("checked above")),
                Algorithm::UcbQ => ucb_q_learning_step(&mut q, step, alpha, gamma, cfg.bonus(ns, na, *k)),
                Algorithm::CbUcbQ => {
                    let b = bounds.expect("checked above");
                    cb_ucb_q_learning_step(&mut q, step, alpha, gamma, cfg.bonus(ns, na, *k), b);
                    if q.get(s, a) > b.hi(s, a) {
                        cap_violations += 1;
                    }
                }
            }
            s = next;
        }
        if episode % cfg.checkpoint_every == 0 || episode == cfg.episodes {
            points.push(checkpoint(env, &q, cfg, episode, &mut eval_rng)?);
        }
    }

    Ok(LearningRun {
        q,
        curve: LearningCurve { seed: cfg.seed, points },
        cap_violations,
    })
}

/// Plain ε-greedy Q learning.
pub fn run_q_learning(env: &ContextualMdp, cfg: &LearnerConfig) -> Result<LearningRun> {
    run_learner(env, cfg, Algorithm::Q, None)
}

/// Q learning with every update projected into the causal Q bounds.
pub fn run_cbc_q(env: &ContextualMdp, cfg: &LearnerConfig, bounds: &QBoundTable) -> Result<LearningRun> {
    run_learner(env, cfg, Algorithm::CbcQ, Some(bounds))
}

/// Greedy-in-`Q_U` UCB-Q learning.
pub fn run_ucb_q(env: &ContextualMdp, cfg: &LearnerConfig) -> Result<LearningRun> {
    run_learner(env, cfg, Algorithm::UcbQ, None)
}

/// UCB-Q learning with `Q_U` capped by the causal upper bound.
pub fn run_cb_ucb_q(env: &ContextualMdp, cfg: &LearnerConfig, bounds: &QBoundTable) -> Result<LearningRun> {
    run_learner(env, cfg, Algorithm::CbUcbQ, Some(bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{Mdp, Outcome, Space};

    fn constant_chain(reward: f64, gamma: f64) -> ContextualMdp {
        let m = Mdp::new(
            Space::new(1).unwrap(),
            Space::new(1).unwrap(),
            vec![vec![Outcome::new(0, reward, 1.0)]],
            gamma,
            vec![1.0],
        )
        .unwrap();
        ContextualMdp::new(vec![m], vec![1.0]).unwrap()
    }

    fn step(reward: f64) -> Step {
        Step {
            s: 0,
            a: 0,
            next: 1,
            reward,
        }
    }

    #[test]
    fn q_step_arithmetic() {
        let mut q = QTable::zeros(2, 2);
        q_learning_step(&mut q, step(3.0), 1.0, 0.9);
        assert_eq!(q.get(0, 0), 3.0);
        let before = q.clone();
        q_learning_step(&mut q, step(100.0), 0.0, 0.9);
        assert_eq!(q, before);
        q.set(1, 1, 2.0);
        q_learning_step(&mut q, step(1.0), 0.5, 0.5);
        assert_eq!(q.get(0, 0), 0.5 * 3.0 + 0.5 * (1.0 + 0.5 * 2.0));
        assert_eq!(q.get(0, 1), 0.0);
    }

    #[test]
    fn projection_clips_only_when_active() {
        let bounds = QBoundTable::new(2, vec![-1.0, -1.0, -1.0, -1.0], vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        let mut plain = QTable::zeros(2, 2);
        let mut clipped = QTable::zeros(2, 2);
        q_learning_step(&mut plain, step(1.0), 1.0, 0.9);
        cbc_q_learning_step(&mut clipped, step(1.0), 1.0, 0.9, &bounds);
        assert_eq!(plain, clipped);
        cbc_q_learning_step(&mut clipped, step(5.0), 1.0, 0.9, &bounds);
        assert_eq!(clipped.get(0, 0), 2.0);
        cbc_q_learning_step(&mut clipped, step(-5.0), 1.0, 0.9, &bounds);
        assert_eq!(clipped.get(0, 0), -1.0);
    }

    #[test]
    fn zero_bonus_matches_q_step() {
        let mut a = QTable::filled(2, 2, 1.0);
        let mut b = a.clone();
        q_learning_step(&mut a, step(0.5), 0.3, 0.9);
        ucb_q_learning_step(&mut b, step(0.5), 0.3, 0.9, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn bonus_scales_as_inverse_root_of_visits() {
        let cfg = LearnerConfig::new(100, 10);
        let b1 = cfg.bonus(5, 4, 3);
        let b2 = cfg.bonus(5, 4, 6);
        assert!((b1 * b1 / (b2 * b2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn learning_rate_schedules() {
        assert_eq!(LearningRate::InverseVisits.alpha(4), 0.25);
        assert_eq!(LearningRate::Ucb { horizon: 9 }.alpha(1), 1.0);
        assert_eq!(LearningRate::Ucb { horizon: 9 }.alpha(11), 0.5);
        assert_eq!(LearningRate::Constant { alpha: 0.2 }.alpha(7), 0.2);
    }

    #[test]
    fn repeated_updates_reach_geometric_value() {
        let mut q = QTable::zeros(1, 1);
        let s = Step {
            s: 0,
            a: 0,
            next: 0,
            reward: 2.0,
        };
        for _ in 0..10_000 {
            q_learning_step(&mut q, s, 0.1, 0.9);
        }
        assert!((q.get(0, 0) - 20.0).abs() < 1e-4);
    }

    #[test]
    fn ucb_converges_from_above_on_a_chain() {
        let env = constant_chain(1.0, 0.5);
        let mut cfg = LearnerConfig::new(1000, 100);
        cfg.checkpoint_every = 100;
        // The bonus inflates the fixed point by about b / (1 − γ); a smaller
        // scale brings that under the tolerance within 10^5 visits.
        cfg.bonus_scale = 0.25;
        let run = run_ucb_q(&env, &cfg).unwrap();
        let values: Vec<f64> = run.curve.points.iter().map(|p| p.value_estimate).collect();
        assert!(values.iter().all(|&v| v >= 2.0));
        assert!((values.last().unwrap() - 2.0).abs() < 1e-2, "{values:?}");
    }

    #[test]
    fn zero_episodes_give_an_empty_curve() {
        let env = constant_chain(1.0, 0.5);
        let cfg = LearnerConfig::new(0, 10);
        let run = run_q_learning(&env, &cfg).unwrap();
        assert!(run.curve.points.is_empty());
        let mut buf = Vec::new();
        write_curves_csv(&[run.curve], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "seed,episode,metric,value\n");
    }

    #[test]
    fn checkpoints_include_the_final_episode() {
        let env = constant_chain(1.0, 0.5);
        let mut cfg = LearnerConfig::new(120, 5);
        cfg.checkpoint_every = 50;
        let run = run_q_learning(&env, &cfg).unwrap();
        let eps: Vec<usize> = run.curve.points.iter().map(|p| p.episode).collect();
        assert_eq!(eps, vec![50, 100, 120]);
    }

    #[test]
    fn episodes_to_tolerance_requires_staying_close() {
        let curve = LearningCurve {
            seed: 0,
            points: [(10, 5.0), (20, 1.05), (30, 2.0), (40, 1.02), (50, 0.99)]
                .iter()
                .map(|&(episode, value_estimate)| CurvePoint {
                    episode,
                    value_estimate,
                    greedy_return: None,
                })
                .collect(),
        };
        assert_eq!(curve.episodes_to_tolerance(1.0, 0.1), Some(40));
        assert_eq!(curve.episodes_to_tolerance(10.0, 0.1), None);
    }

    #[test]
    fn stay_forever_policy_returns_minus_ten() {
        let env = constant_chain(-1.0, 0.9);
        let policy = Policy::deterministic(&[0], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eval = evaluate_policy(&env, &policy, 10, 400, &mut rng).unwrap();
        assert!((eval.mean + 10.0).abs() < 1e-9);
        assert!(eval.stderr < 1e-9);
    }
}
