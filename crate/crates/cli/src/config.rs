//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use causal_transfer::environments::{Cell, Direction, GridSpec};
use causal_transfer::learners::{Algorithm, LearningRate};
use serde::{Deserialize, Serialize};

pub const REWARD_GRID_PRESET: &str = include_str!("../presets/reward-grid.toml");
pub const TRANSITION_GRID_PRESET: &str = include_str!("../presets/transition-grid.toml");

/// Names accepted by `--config` in place of a file path.
pub const PRESETS: [(&str, &str); 2] = [
    ("reward-grid", REWARD_GRID_PRESET),
    ("transition-grid", TRANSITION_GRID_PRESET),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub environment: EnvironmentConfig,
    pub demonstrator: DemonstratorConfig,
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub expected: ExpectedTables,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    RewardGrid,
    TransitionGrid,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvironmentKind,
    /// Grid description for `custom`; overrides the built-in layout otherwise.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationSource {
    /// Exact observational distribution from the model and policy.
    Analytic,
    /// Sampled demonstrator experience.
    Empirical,
    /// A recorded dataset CSV.
    Dataset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collection {
    Episodes,
    UniformStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverride {
    pub cell: Cell,
    pub context: usize,
    pub action: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemonstratorConfig {
    pub epsilon: f64,
    pub source: ObservationSource,
    #[serde(default = "default_demo_episodes")]
    pub episodes: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_collection")]
    pub collection: Collection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Replaces the value-iteration action of the demonstrator's base policy.
    #[serde(default)]
    pub overrides: Vec<PolicyOverride>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageKind {
    Pairs,
    Heuristic,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRef {
    pub cell: Cell,
    pub action: Direction,
}

/// Known interventional distribution of one action at one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub cell: Cell,
    pub action: Direction,
    /// `(reward, probability)` pairs.
    #[serde(default)]
    pub rewards: Vec<(f64, f64)>,
    /// `(next cell, probability)` pairs.
    #[serde(default)]
    pub successors: Vec<(Cell, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub coverage: CoverageKind,
    #[serde(default)]
    pub pairs: Vec<PairRef>,
    /// Global reward range, also the fallback for unobserved pairs.
    pub reward_range: (f64, f64),
    #[serde(default)]
    pub deterministic_priors: bool,
    #[serde(default)]
    pub positivity: bool,
    #[serde(default)]
    pub priors: Vec<PriorConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    pub algorithms: Vec<Algorithm>,
    pub seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    pub episodes: usize,
    pub horizon: usize,
    pub checkpoint_every: usize,
    pub learning_rate: LearningRate,
    pub epsilon: f64,
    pub bonus_scale: f64,
    pub delta: f64,
    #[serde(default)]
    pub eval_episodes: usize,
    /// Fraction of the run ignored when comparing UCB learners.
    #[serde(default = "default_warm_up")]
    pub warm_up: f64,
    /// Relative tolerance on `|V*|` for episodes-to-tolerance.
    #[serde(default = "default_relative_tol")]
    pub relative_tol: f64,
    /// Absolute tolerance on the final median value error.
    #[serde(default = "default_final_tol")]
    pub final_tol: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            seeds: 10,
            seed_base: 0,
            episodes: 2000,
            horizon: 60,
            checkpoint_every: 50,
            learning_rate: LearningRate::Ucb { horizon: 60 },
            epsilon: 0.1,
            bonus_scale: 1.0,
            delta: 0.05,
            eval_episodes: 0,
            warm_up: default_warm_up(),
            relative_tol: default_relative_tol(),
            final_tol: default_final_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Monte-Carlo episodes per seed.
    pub episodes: usize,
    pub horizon: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            horizon: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedTables {
    #[serde(default = "default_table_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub rewards: Vec<ExpectedRow>,
    #[serde(default)]
    pub transitions: Vec<ExpectedRow>,
}

/// One published table row: interventional value, naive estimate and bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedRow {
    pub cell: Cell,
    pub action: Direction,
    /// Successor cell for transition rows.
    #[serde(default)]
    pub next: Option<Cell>,
    pub do_effect: f64,
    pub naive: f64,
    /// Decimal places the naive value was published with, if rounded.
    #[serde(default)]
    pub naive_decimals: Option<i32>,
    pub lower: f64,
    pub upper: f64,
}

impl Default for ExpectedTables {
    fn default() -> Self {
        Self {
            tolerance: default_table_tol(),
            rewards: Vec::new(),
            transitions: Vec::new(),
        }
    }
}

fn default_demo_episodes() -> usize {
    100_000
}

fn default_horizon() -> usize {
    60
}

fn default_collection() -> Collection {
    Collection::UniformStart
}

fn default_warm_up() -> f64 {
    0.05
}

fn default_relative_tol() -> f64 {
    0.1
}

fn default_final_tol() -> f64 {
    0.05
}

fn default_table_tol() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut cfg: Self = toml::from_str(text).context("invalid experiment config")?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a preset by name or a config file by path.
    pub fn load(spec: &str) -> anyhow::Result<Self> {
        if let Some((_, text)) = PRESETS.iter().find(|(name, _)| *name == spec) {
            return Self::from_toml_str(text, Path::new("."));
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml_str(&text, &base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn grid(&self) -> anyhow::Result<GridSpec> {
        let grid = match (&self.environment.file, self.environment.kind) {
            (Some(file), _) => {
                let path = self.resolve(file);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading grid {}", path.display()))?;
                GridSpec::from_toml_str(&text)?
            }
            (None, EnvironmentKind::RewardGrid) => GridSpec::reward_default(),
            (None, EnvironmentKind::TransitionGrid) => GridSpec::transition_default(),
            (None, EnvironmentKind::Custom) => bail!("custom environment needs a grid file"),
        };
        Ok(grid)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.learning.seeds as u64).map(|i| self.learning.seed_base + i).collect()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(!self.name.is_empty(), "config needs a name");
        let d = &self.demonstrator;
        ensure!((0.0..=1.0).contains(&d.epsilon), "demonstrator epsilon {} not in [0, 1]", d.epsilon);
        if d.source == ObservationSource::Dataset {
            let path = d.dataset.as_ref().context("dataset source needs a dataset path")?;
            let path = self.resolve(path);
            ensure!(path.is_file(), "dataset {} does not exist", path.display());
        }
        if let Some(file) = &self.environment.file {
            let path = self.resolve(file);
            ensure!(path.is_file(), "grid file {} does not exist", path.display());
        }
        if d.source == ObservationSource::Empirical {
            ensure!(d.episodes > 0 && d.horizon > 0, "empirical source needs episodes and horizon");
        }
        let b = &self.bounds;
        ensure!(b.reward_range.0 <= b.reward_range.1, "reward range is reversed");
        if b.coverage == CoverageKind::Pairs {
            ensure!(!b.pairs.is_empty(), "pairs coverage needs at least one pair");
        }
        let l = &self.learning;
        ensure!(l.horizon >= 1, "learning horizon must be at least 1");
        ensure!(l.checkpoint_every >= 1, "checkpoint cadence must be at least 1");
        ensure!(l.seeds >= 1, "need at least one seed");
        let unique: HashSet<_> = l.algorithms.iter().collect();
        ensure!(unique.len() == l.algorithms.len(), "algorithms listed twice");
        ensure!((0.0..1.0).contains(&l.warm_up), "warm-up fraction must be in [0, 1)");
        ensure!(self.evaluation.episodes >= 1, "evaluation needs at least one episode");
        Ok(())
    }
}
