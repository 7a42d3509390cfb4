mod common;

use causal_transfer::causal::{bound_all, reward_do_bounds, transition_do_bounds, BoundConfig, Coverage, DoPrior, LpSettings};
use causal_transfer::demonstrator::{analytic_observational, naive_reward, ContextPolicy, JointTable};
use causal_transfer::environments::GridSpec;
use causal_transfer::mdp::{q_from_v, value_iteration, Policy};
use causal_transfer::value_bounds::{q_bounds, BoundedMdpModel};
use causal_transfer::VBoundTable;
use common::{reward_setup, transition_setup, VI_TOL};
use proptest::prelude::*;

/// A random joint over the demonstrator's action and the vector of potential
/// outcomes (one per action), from which both the observational table and
/// the interventional distributions follow.
#[derive(Clone, Debug)]
struct Scm {
    n_actions: usize,
    n_outcomes: usize,
    // weight of (chosen action, outcome vector) flattened; vectors in base n_outcomes
    weights: Vec<f64>,
}

impl Scm {
    fn vectors(&self) -> usize {
        self.n_outcomes.pow(self.n_actions as u32)
    }

    fn potential(&self, vector: usize, action: usize) -> usize {
        let mut v = vector;
        for _ in 0..action {
            v /= self.n_outcomes;
        }
        v % self.n_outcomes
    }

    fn prob(&self, chosen: usize, vector: usize) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights[chosen * self.vectors() + vector] / total
    }

    /// Observational table over the full outcome space, zero rows included.
    fn observed<O: causal_transfer::demonstrator::OutcomeKey>(&self, label: impl Fn(usize) -> O) -> JointTable<O> {
        let mut mass = vec![0.0; self.n_outcomes * self.n_actions];
        for a in 0..self.n_actions {
            for y in 0..self.vectors() {
                mass[self.potential(y, a) * self.n_actions + a] += self.prob(a, y);
            }
        }
        JointTable::new((0..self.n_outcomes).map(label).collect(), self.n_actions, mass).unwrap()
    }

    fn interventional(&self, action: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n_outcomes];
        for a in 0..self.n_actions {
            for y in 0..self.vectors() {
                p[self.potential(y, action)] += self.prob(a, y);
            }
        }
        p
    }
}

fn scm() -> impl Strategy<Value = Scm> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(na, no)| {
        let len = na * no.pow(na as u32);
        prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], len)
            .prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.0)
            .prop_map(move |weights| Scm {
                n_actions: na,
                n_outcomes: no,
                weights,
            })
    })
}

const REWARDS: [f64; 3] = [-1.0, 0.5, 4.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn no_prior_bounds_are_the_natural_bounds(m in scm()) {
        let settings = LpSettings::default();
        let rewards = m.observed(|o| REWARDS[o]);
        let successors = m.observed(|o| o);
        for a in 0..m.n_actions {
            // The unobserved mass 1 - P(a) may land on any single outcome.
            let pa = rewards.action_mass(a);
            let seen: f64 = (0..m.n_outcomes).map(|o| REWARDS[o] * rewards.mass(o, a)).sum();
            let shifted: Vec<f64> = (0..m.n_outcomes).map(|o| seen + (1.0 - pa) * REWARDS[o]).collect();
            let b = reward_do_bounds(&rewards, 0, a, &[], &settings).unwrap();
            prop_assert!((b.lo - shifted.iter().cloned().fold(f64::INFINITY, f64::min)).abs() < 1e-9);
            prop_assert!((b.hi - shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).abs() < 1e-9);
            for next in 0..m.n_outcomes {
                let landing: Vec<f64> = (0..m.n_outcomes)
                    .map(|o| successors.mass(next, a) + if o == next { 1.0 - pa } else { 0.0 })
                    .collect();
                let b = transition_do_bounds(&successors, 0, a, next, &[], &settings).unwrap();
                prop_assert!((b.lo - landing.iter().cloned().fold(f64::INFINITY, f64::min)).abs() < 1e-9);
                prop_assert!((b.hi - landing.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn priors_shrink_bounds_around_the_truth(m in scm(), prior_action in 0usize..3) {
        let prior_action = prior_action % m.n_actions;
        let settings = LpSettings::default();
        let successors = m.observed(|o| o);
        let prior = DoPrior {
            action: prior_action,
            dist: m.interventional(prior_action).into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect(),
        };
        for a in 0..m.n_actions {
            let truth = m.interventional(a);
            for next in 0..m.n_outcomes {
                let loose = transition_do_bounds(&successors, 0, a, next, &[], &settings).unwrap();
                let tight = transition_do_bounds(&successors, 0, a, next, std::slice::from_ref(&prior), &settings).unwrap();
                prop_assert!(tight.lo >= loose.lo - 1e-9 && tight.hi <= loose.hi + 1e-9);
                prop_assert!(tight.contains(truth[next], 1e-9));
            }
        }
    }
}

#[test]
fn context_free_demonstrator_gives_unbiased_naive_estimates() {
    let env = GridSpec::reward_default().build().unwrap();
    let uniform = Policy::uniform(25, 4);
    let policy = ContextPolicy::new(vec![uniform.clone(), uniform]).unwrap();
    let obs = analytic_observational(&env, &policy);
    let marginal = env.marginalize();
    let s = GridSpec::reward_default().state_index([1, 4]).unwrap();
    for a in 0..4 {
        let naive = naive_reward(&obs, s, a).unwrap();
        assert!((naive - marginal.expected_reward(s, a)).abs() < 1e-12);
        // Width is the unobserved mass times the reward spread.
        let b = reward_do_bounds(&obs.state(s).rewards, s, a, &[], &LpSettings::default()).unwrap();
        let rewards = obs.state(s).rewards.outcomes();
        let spread = rewards.last().unwrap() - rewards[0];
        assert!((b.hi - b.lo - 0.75 * spread).abs() < 1e-9);
    }
}

#[test]
fn deterministic_demonstrator_pins_its_own_action() {
    let joint = JointTable::from_entries(2, [(3.0, 0, 1.0)]);
    let b = reward_do_bounds(&joint, 0, 0, &[], &LpSettings::default()).unwrap();
    assert!((b.lo - 3.0).abs() < 1e-12 && (b.hi - 3.0).abs() < 1e-12);
}

fn q_star_inside(model: &BoundedMdpModel, marginal: &causal_transfer::Mdp) {
    let (v, _) = value_iteration(marginal, VI_TOL);
    let vb = VBoundTable::robust(model, VI_TOL).unwrap();
    let qb = q_bounds(model, &vb).unwrap();
    let q = q_from_v(marginal, &v);
    for s in 0..marginal.n_states() {
        assert!(vb.lo[s] <= v[s] + 1e-7 && v[s] <= vb.hi[s] + 1e-7, "state {s}");
        for a in 0..marginal.n_actions() {
            assert!(qb.contains(s, a, q.get(s, a), 1e-7), "({s}, {a}): {} not in [{}, {}]", q.get(s, a), qb.lo(s, a), qb.hi(s, a));
        }
    }
}

#[test]
fn benchmark_bounds_contain_the_true_model_and_values() {
    for setup in [reward_setup(), transition_setup()] {
        assert!(setup.model.contains_mdp(&setup.marginal, 1e-9));
        q_star_inside(&setup.model, &setup.marginal);
    }
}

#[test]
fn full_coverage_without_priors_is_sound() {
    for grid in [GridSpec::reward_default(), GridSpec::transition_default()] {
        let setup = common::build(grid, &[], &[]);
        let mut cfg = BoundConfig::new((-1.0, 10.0), 0.9);
        cfg.coverage = Coverage::All;
        let model = bound_all(&setup.obs, &cfg).unwrap();
        assert!(model.contains_mdp(&setup.marginal, 1e-9));
        q_star_inside(&model, &setup.marginal);
    }
}

#[test]
fn critical_pair_upper_q_bound_uses_the_reward_bound() {
    let setup = reward_setup();
    let s = setup.state([1, 4]);
    let a = causal_transfer::environments::Direction::Left.index();
    let next = setup.state([0, 4]);
    let want = 8.592 + 0.9 * setup.v_bounds.hi[next];
    assert!((setup.q_bounds.hi(s, a) - want).abs() < 1e-3);
}
