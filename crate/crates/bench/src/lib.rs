//! Shared fixtures for the criterion benchmarks under `benches/`.

use causal_transfer::causal::{bound_all, BoundConfig, Coverage};
use causal_transfer::demonstrator::{analytic_observational, contextual_optimal_policy, epsilon_greedy, ObservationalDistribution};
use causal_transfer::environments::{Direction, GridSpec};
use causal_transfer::value_bounds::q_bounds;
use causal_transfer::{BoundedMdpModel, ContextualMdp, QBoundTable, VBoundTable};

pub const VI_TOL: f64 = 1e-10;

pub struct Fixture {
    pub env: ContextualMdp,
    pub obs: ObservationalDistribution,
    pub config: BoundConfig,
    pub model: BoundedMdpModel,
    pub q_bounds: QBoundTable,
}

/// The reward-confounded grid with an ε-greedy demonstrator and bounds at
/// every observed pair.
pub fn reward_grid() -> Fixture {
    let grid = GridSpec::reward_default();
    let env = grid.build().expect("default grid is valid");
    let mut base = contextual_optimal_policy(&env, VI_TOL);
    let s = grid.state_index([3, 4]).expect("cell on grid");
    base.set_action(s, 0, Direction::Right.index()).expect("valid override");
    base.set_action(s, 1, Direction::Left.index()).expect("valid override");
    let demonstrator = epsilon_greedy(&base, 0.3).expect("valid epsilon");
    let obs = analytic_observational(&env, &demonstrator);
    let mut config = BoundConfig::new((-1.0, 10.0), grid.gamma);
    config.coverage = Coverage::All;
    config.deterministic_priors = true;
    config.lp.positivity = true;
    let model = bound_all(&obs, &config).expect("bounds solve");
    let v = VBoundTable::robust(&model, VI_TOL).expect("robust iteration converges");
    let q_bounds = q_bounds(&model, &v).expect("q bounds");
    Fixture {
        env,
        obs,
        config,
        model,
        q_bounds,
    }
}
