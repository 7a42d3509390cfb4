//! Environment, demonstrator data and bounds for one experiment.

use std::fs::File;
use std::io::BufReader;

use anyhow::Context;
use causal_transfer::causal::{bound_all, BoundConfig, Coverage, DoPrior, StatePriors};
use causal_transfer::demonstrator::{
    analytic_observational, collect_observations, contextual_optimal_policy, epsilon_greedy, CollectionMode, ContextPolicy,
    Dataset, ObservationalDistribution,
};
use causal_transfer::environments::{Cell, Direction, GridSpec};
use causal_transfer::mdp::{q_from_v, value_iteration};
use causal_transfer::value_bounds::q_bounds;
use causal_transfer::{BoundedMdpModel, ContextualMdp, Mdp, Policy, QBoundTable, QTable, VBoundTable, ValueTable};

use crate::config::{Collection, CoverageKind, ExperimentConfig, ObservationSource};

pub const VI_TOL: f64 = 1e-10;

/// Everything downstream commands need, derived deterministically from a
/// config.
pub struct Prepared {
    pub grid: GridSpec,
    pub env: ContextualMdp,
    pub marginal: Mdp,
    pub demonstrator: ContextPolicy,
    pub obs: ObservationalDistribution,
    pub model: BoundedMdpModel,
    pub v_bounds: VBoundTable,
    pub q_bounds: QBoundTable,
    pub v_star: ValueTable,
    pub q_star: QTable,
    pub optimal_policy: Policy,
    pub start: usize,
}

impl Prepared {
    pub fn state(&self, cell: Cell) -> anyhow::Result<usize> {
        Ok(self.grid.state_index(cell)?)
    }
}

fn demonstrator(cfg: &ExperimentConfig, grid: &GridSpec, env: &ContextualMdp) -> anyhow::Result<ContextPolicy> {
    let mut base = contextual_optimal_policy(env, VI_TOL);
    for o in &cfg.demonstrator.overrides {
        base.set_action(grid.state_index(o.cell)?, o.context, o.action.index())
            .with_context(|| format!("override at {:?}", o.cell))?;
    }
    Ok(epsilon_greedy(&base, cfg.demonstrator.epsilon)?)
}

pub fn observations(
    cfg: &ExperimentConfig,
    env: &ContextualMdp,
    policy: &ContextPolicy,
) -> anyhow::Result<ObservationalDistribution> {
    let d = &cfg.demonstrator;
    Ok(match d.source {
        ObservationSource::Analytic => analytic_observational(env, policy),
        ObservationSource::Empirical => {
            let mode = match d.collection {
                Collection::Episodes => CollectionMode::Episodes { horizon: d.horizon },
                Collection::UniformStart => CollectionMode::UniformStart,
            };
            collect_observations(env, policy, d.episodes, mode, d.seed)?
        }
        ObservationSource::Dataset => {
            let path = cfg.resolve(d.dataset.as_deref().context("dataset path missing")?);
            let file = File::open(&path).with_context(|| format!("opening dataset {}", path.display()))?;
            let data = Dataset::read_csv(BufReader::new(file))?;
            data.counts(env.n_states(), env.n_actions())?.to_distribution()
        }
    })
}

fn pair_index(grid: &GridSpec, cell: Cell, action: Direction) -> anyhow::Result<(usize, usize)> {
    Ok((grid.state_index(cell)?, action.index()))
}

pub fn bound_config(cfg: &ExperimentConfig, grid: &GridSpec) -> anyhow::Result<BoundConfig> {
    let b = &cfg.bounds;
    let mut out = BoundConfig::new(b.reward_range, grid.gamma);
    out.coverage = match b.coverage {
        CoverageKind::All => Coverage::All,
        CoverageKind::Heuristic => Coverage::Heuristic,
        CoverageKind::Pairs => Coverage::Pairs(
            b.pairs
                .iter()
                .map(|p| pair_index(grid, p.cell, p.action))
                .collect::<anyhow::Result<_>>()?,
        ),
    };
    out.deterministic_priors = b.deterministic_priors;
    out.lp.positivity = b.positivity;
    for p in &b.priors {
        let (s, a) = pair_index(grid, p.cell, p.action)?;
        let mut priors = StatePriors::default();
        if !p.rewards.is_empty() {
            priors.rewards.push(DoPrior {
                action: a,
                dist: p.rewards.clone(),
            });
        }
        if !p.successors.is_empty() {
            let dist = p
                .successors
                .iter()
                .map(|&(c, prob)| Ok((grid.state_index(c)?, prob)))
                .collect::<anyhow::Result<_>>()?;
            priors.transitions.push(DoPrior { action: a, dist });
        }
        out.priors.push((s, priors));
    }
    Ok(out)
}

pub fn prepare(cfg: &ExperimentConfig) -> anyhow::Result<Prepared> {
    let grid = cfg.grid()?;
    let env = grid.build()?;
    let marginal = env.marginalize();
    let demonstrator = demonstrator(cfg, &grid, &env)?;
    let obs = observations(cfg, &env, &demonstrator)?;
    let model = bound_all(&obs, &bound_config(cfg, &grid)?)?;
    let v_bounds = VBoundTable::robust(&model, VI_TOL)?;
    let q_bounds = q_bounds(&model, &v_bounds)?;
    let (v_star, optimal_policy) = value_iteration(&marginal, VI_TOL);
    let q_star = q_from_v(&marginal, &v_star);
    let start = grid.state_index(grid.start)?;
    Ok(Prepared {
        grid,
        env,
        marginal,
        demonstrator,
        obs,
        model,
        v_bounds,
        q_bounds,
        v_star,
        q_star,
        optimal_policy,
        start,
    })
}
