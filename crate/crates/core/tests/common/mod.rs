#![allow(dead_code)]

use causal_transfer::causal::{bound_all, BoundConfig, Coverage};
use causal_transfer::demonstrator::{analytic_observational, contextual_optimal_policy, epsilon_greedy, ContextPolicy, ObservationalDistribution};
use causal_transfer::environments::{Cell, Direction, GridSpec};
use causal_transfer::value_bounds::q_bounds;
use causal_transfer::{BoundedMdpModel, ContextualMdp, Mdp, QBoundTable, VBoundTable};

pub const VI_TOL: f64 = 1e-10;

/// A benchmark grid with its demonstrator data and the bounds derived from it.
pub struct Setup {
    pub grid: GridSpec,
    pub env: ContextualMdp,
    pub marginal: Mdp,
    pub demonstrator: ContextPolicy,
    pub obs: ObservationalDistribution,
    pub model: BoundedMdpModel,
    pub v_bounds: VBoundTable,
    pub q_bounds: QBoundTable,
    pub start: usize,
}

impl Setup {
    pub fn state(&self, cell: Cell) -> usize {
        self.grid.state_index(cell).unwrap()
    }
}

pub fn reward_critical() -> Vec<(Cell, Direction)> {
    use Direction::*;
    vec![([0, 3], Up), ([1, 4], Left), ([3, 4], Right), ([4, 3], Up)]
}

pub fn transition_critical() -> Vec<(Cell, Direction)> {
    vec![([0, 2], Direction::Up), ([4, 2], Direction::Up)]
}

fn demonstrator(grid: &GridSpec, env: &ContextualMdp, overrides: &[(Cell, usize, Direction)]) -> ContextPolicy {
    let mut base = contextual_optimal_policy(env, VI_TOL);
    for &(cell, u, dir) in overrides {
        base.set_action(grid.state_index(cell).unwrap(), u, dir.index()).unwrap();
    }
    epsilon_greedy(&base, 0.3).unwrap()
}

pub fn build(grid: GridSpec, overrides: &[(Cell, usize, Direction)], critical: &[(Cell, Direction)]) -> Setup {
    let env = grid.build().unwrap();
    let marginal = env.marginalize();
    let demonstrator = demonstrator(&grid, &env, overrides);
    let obs = analytic_observational(&env, &demonstrator);
    let mut cfg = BoundConfig::new((-1.0, 10.0), grid.gamma);
    cfg.coverage = Coverage::Pairs(
        critical
            .iter()
            .map(|&(c, d)| (grid.state_index(c).unwrap(), d.index()))
            .collect(),
    );
    cfg.deterministic_priors = true;
    cfg.lp.positivity = true;
    let model = bound_all(&obs, &cfg).unwrap();
    let v_bounds = VBoundTable::robust(&model, VI_TOL).unwrap();
    let q_bounds = q_bounds(&model, &v_bounds).unwrap();
    let start = grid.state_index(grid.start).unwrap();
    Setup {
        grid,
        env,
        marginal,
        demonstrator,
        obs,
        model,
        v_bounds,
        q_bounds,
        start,
    }
}

pub fn reward_setup() -> Setup {
    use Direction::*;
    build(
        GridSpec::reward_default(),
        &[([3, 4], 0, Right), ([3, 4], 1, Left)],
        &reward_critical(),
    )
}

pub fn transition_setup() -> Setup {
    use Direction::*;
    build(
        GridSpec::transition_default(),
        &[([4, 2], 0, Up), ([4, 2], 1, Left)],
        &transition_critical(),
    )
}
