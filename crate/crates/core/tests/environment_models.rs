mod common;

use causal_transfer::demonstrator::{analytic_observational, collect_observations, naive_model, CollectionMode};
use causal_transfer::environments::{Direction, GridSpec};
use causal_transfer::learners::evaluate_policy;
use causal_transfer::mdp::{bellman_residual, policy_value, value_iteration, Policy};
use common::{reward_setup, transition_setup, VI_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Expected reward of moving into a goal, from the goal's raw parameters.
fn goal_reward(grid: &GridSpec, goal: usize) -> f64 {
    let g = &grid.goals[goal];
    grid.context_probs
        .iter()
        .zip(&g.success)
        .map(|(rho, p)| rho * (p * g.payout + (1.0 - p) * grid.step_reward))
        .sum()
}

#[test]
fn reward_grid_do_effects_from_goal_parameters() {
    let setup = reward_setup();
    let red = goal_reward(&setup.grid, 0);
    let green = goal_reward(&setup.grid, 1);
    assert!((red - 1.2).abs() < 1e-12 && (green - 3.2).abs() < 1e-12);
    let m = &setup.marginal;
    use Direction::*;
    for (cell, dir, want) in [([0, 3], Up, red), ([1, 4], Left, red), ([3, 4], Right, green), ([4, 3], Up, green)] {
        let got = m.expected_reward(setup.state(cell), dir.index());
        assert!((got - want).abs() < 1e-12, "{cell:?} {dir:?}: {got}");
    }
    // Any other move costs one step.
    assert_eq!(m.expected_reward(setup.state([2, 2]), Up.index()), -1.0);
}

#[test]
fn transition_grid_do_effects_from_slip_parameters() {
    let setup = transition_setup();
    let m = &setup.marginal;
    for slip in &setup.grid.slips {
        let s = setup.state(slip.cell);
        let up: f64 = setup.grid.context_probs.iter().zip(&slip.success).map(|(r, p)| r * p).sum();
        let above = setup.state([slip.cell[0], slip.cell[1] + 1]);
        let below = setup.state([slip.cell[0], slip.cell[1] - 1]);
        let row = m.transition(s, slip.action.index());
        assert!((row[above] - up).abs() < 1e-12);
        assert!((row[below] - (1.0 - up)).abs() < 1e-12);
    }
}

#[test]
fn marginal_is_the_context_average() {
    for setup in [reward_setup(), transition_setup()] {
        let rho = setup.env.context_dist();
        for s in 0..setup.marginal.n_states() {
            for a in 0..4 {
                let r: f64 = (0..rho.len()).map(|u| rho[u] * setup.env.context(u).expected_reward(s, a)).sum();
                assert!((r - setup.marginal.expected_reward(s, a)).abs() < 1e-12);
                for next in 0..setup.marginal.n_states() {
                    let p: f64 = (0..rho.len()).map(|u| rho[u] * setup.env.context(u).transition(s, a)[next]).sum();
                    assert!((p - setup.marginal.transition(s, a)[next]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn optimal_values_satisfy_bellman() {
    for setup in [reward_setup(), transition_setup()] {
        let (v, policy) = value_iteration(&setup.marginal, VI_TOL);
        assert!(bellman_residual(&setup.marginal, &v) < 1e-9);
        let pv = policy_value(&setup.marginal, &policy, VI_TOL);
        for s in 0..v.0.len() {
            assert!((pv[s] - v[s]).abs() < 1e-8);
        }
    }
}

#[test]
fn greedy_marginal_policy_matches_its_value_by_simulation() {
    let setup = reward_setup();
    let (v, policy) = value_iteration(&setup.marginal, VI_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eval = evaluate_policy(&setup.env, &policy, 40_000, 200, &mut rng).unwrap();
    assert!(
        (eval.mean - v[setup.start]).abs() <= 2.0 * eval.stderr,
        "{} vs {} (se {})",
        eval.mean,
        v[setup.start],
        eval.stderr
    );
}

#[test]
fn stay_forever_policy_costs_one_per_step() {
    let setup = reward_setup();
    // Pushing into the bottom border from the start never moves.
    let policy = Policy::deterministic(&[Direction::Down.index(); 25], 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eval = evaluate_policy(&setup.env, &policy, 10, 400, &mut rng).unwrap();
    assert!((eval.mean + 10.0).abs() < 1e-9);
}

#[test]
fn context_frequencies_match_rho() {
    let setup = reward_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let hits = (0..n).filter(|_| setup.env.sample_context(&mut rng) == 0).count();
    let p = setup.env.context_dist()[0];
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - p).abs() <= 3.0 * se);
}

#[test]
fn sampled_observations_converge_to_analytic() {
    let setup = transition_setup();
    let analytic = analytic_observational(&setup.env, &setup.demonstrator);
    let empirical = collect_observations(&setup.env, &setup.demonstrator, 2_000_000, CollectionMode::UniformStart, 9).unwrap();
    for s in 0..25 {
        let (a_obs, e_obs) = (analytic.state(s), empirical.state(s));
        for (i, &next) in a_obs.successors.outcomes().iter().enumerate() {
            let j = e_obs.successors.position(next).unwrap();
            for a in 0..4 {
                let diff = (a_obs.successors.mass(i, a) - e_obs.successors.mass(j, a)).abs();
                assert!(diff < 5e-3, "state {s} next {next} action {a}: {diff}");
            }
        }
    }
}

#[test]
fn naive_planning_is_overoptimistic_and_underperforms() {
    for setup in [reward_setup(), transition_setup()] {
        let (v, _) = value_iteration(&setup.marginal, VI_TOL);
        let naive = naive_model(&setup.obs, &setup.marginal, -1.0).unwrap();
        let (v_naive, p_naive) = value_iteration(&naive, VI_TOL);
        let actual = policy_value(&setup.marginal, &p_naive, VI_TOL);
        let s0 = setup.start;
        assert!(v_naive[s0] > v[s0], "plan {} vs optimum {}", v_naive[s0], v[s0]);
        assert!(actual[s0] < v[s0] - 0.5, "actual {} vs optimum {}", actual[s0], v[s0]);
    }
}
