mod common;

use causal_transfer::causal::{bound_all, BoundConfig, Coverage};
use causal_transfer::demonstrator::analytic_observational;
use causal_transfer::environments::GridSpec;
use causal_transfer::learners::{run_learner, write_curves_csv, Algorithm, LearnerConfig, LearningRate};
use causal_transfer::mdp::{q_from_v, value_iteration};
use causal_transfer::value_bounds::q_bounds;
use causal_transfer::{QBoundTable, VBoundTable};
use common::{reward_setup, VI_TOL};

fn config(episodes: usize, seed: u64) -> LearnerConfig {
    let mut cfg = LearnerConfig::new(episodes, 60);
    cfg.seed = seed;
    cfg
}

#[test]
fn vacuous_bounds_reproduce_the_unconstrained_learners() {
    let setup = reward_setup();
    let open = QBoundTable::unbounded(25, 4);
    let cfg = config(300, 4);
    for (plain, bounded) in [(Algorithm::Q, Algorithm::CbcQ), (Algorithm::UcbQ, Algorithm::CbUcbQ)] {
        let a = run_learner(&setup.env, &cfg, plain, None).unwrap();
        let b = run_learner(&setup.env, &cfg, bounded, Some(&open)).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.curve, b.curve);
    }
}

#[test]
fn runs_are_reproducible() {
    let setup = reward_setup();
    let mut cfg = config(200, 8);
    cfg.eval_episodes = 20;
    for alg in Algorithm::ALL {
        let a = run_learner(&setup.env, &cfg, alg, Some(&setup.q_bounds)).unwrap();
        let b = run_learner(&setup.env, &cfg, alg, Some(&setup.q_bounds)).unwrap();
        assert_eq!(a, b);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_curves_csv(&[a.curve], &mut x).unwrap();
        write_curves_csv(&[b.curve], &mut y).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn evaluation_does_not_perturb_learning() {
    let setup = reward_setup();
    let cfg = config(200, 2);
    let mut with_eval = cfg.clone();
    with_eval.eval_episodes = 10;
    let a = run_learner(&setup.env, &cfg, Algorithm::Q, None).unwrap();
    let b = run_learner(&setup.env, &with_eval, Algorithm::Q, None).unwrap();
    assert_eq!(a.q, b.q);
}

#[test]
fn capped_ucb_never_exceeds_the_upper_bound() {
    let setup = reward_setup();
    let run = run_learner(&setup.env, &config(500, 1), Algorithm::CbUcbQ, Some(&setup.q_bounds)).unwrap();
    assert_eq!(run.cap_violations, 0);
    let plain = run_learner(&setup.env, &config(500, 1), Algorithm::UcbQ, None).unwrap();
    // Without the cap the optimistic table sits far above the causal bound.
    let above = (0..25)
        .flat_map(|s| (0..4).map(move |a| (s, a)))
        .filter(|&(s, a)| plain.q.get(s, a) > setup.q_bounds.hi(s, a) + 1e-9)
        .count();
    assert!(above > 0);
}

#[test]
fn cbc_table_stays_inside_the_bounds() {
    let setup = reward_setup();
    let run = run_learner(&setup.env, &config(500, 6), Algorithm::CbcQ, Some(&setup.q_bounds)).unwrap();
    for s in 0..25 {
        for a in 0..4 {
            assert!(setup.q_bounds.contains(s, a, run.q.get(s, a), 1e-12));
        }
    }
}

#[test]
fn projection_does_not_change_the_limit() {
    // Goals pay out deterministically, so a constant step size converges
    // exactly and both learners must land on the same table.
    let mut grid = GridSpec::reward_default();
    for goal in &mut grid.goals {
        goal.success = vec![1.0, 1.0];
    }
    let setup = common::build(grid, &[], &[]);
    let obs = analytic_observational(&setup.env, &setup.demonstrator);
    let mut bcfg = BoundConfig::new((-1.0, 10.0), 0.9);
    bcfg.coverage = Coverage::All;
    let model = bound_all(&obs, &bcfg).unwrap();
    let bounds = q_bounds(&model, &VBoundTable::robust(&model, VI_TOL).unwrap()).unwrap();

    let mut cfg = config(3000, 21);
    cfg.epsilon = 1.0;
    cfg.learning_rate = LearningRate::Constant { alpha: 0.5 };
    let plain = run_learner(&setup.env, &cfg, Algorithm::Q, None).unwrap();
    let cbc = run_learner(&setup.env, &cfg, Algorithm::CbcQ, Some(&bounds)).unwrap();
    let (v, _) = value_iteration(&setup.marginal, VI_TOL);
    let q_star = q_from_v(&setup.marginal, &v);
    for s in 0..25 {
        for a in 0..4 {
            assert!((plain.q.get(s, a) - cbc.q.get(s, a)).abs() < 1e-6, "({s}, {a})");
            assert!((plain.q.get(s, a) - q_star.get(s, a)).abs() < 1e-6, "({s}, {a})");
        }
    }
}
