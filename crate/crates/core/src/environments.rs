//! The 5×5 gridworld benchmarks and their text config format.
//!
//! Cells are `[x, y]` with `x` growing to the right and `y` growing upwards;
//! the start cell `[2, 0]` sits at the bottom. Moves are deterministic unless a
//! slip rule applies, and bumping into the boundary or a wall leaves the agent
//! in place. Entering a goal pays out and the goal is absorbing with reward 0
//! afterwards.
//!
//! ```
//! use causal_transfer::environments::{build_reward_gridworld, GridSpec, Direction};
//!
//! let grid = GridSpec::reward_default();
//! let env = build_reward_gridworld();
//! let marginal = env.marginalize();
//! let s = grid.state_index([0, 3]).unwrap();
//! let r = marginal.expected_reward(s, Direction::Up.index());
//! assert!((r - 1.2).abs() < 1e-12);
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mdp::{ContextualMdp, Mdp, Outcome, Space};
use crate::{Error, Result};

/// A grid cell `[x, y]`.
pub type Cell = [usize; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Right,
    Down,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Right, Direction::Down, Direction::Left];

    /// Zero-based action index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// One-based action number used in printed tables (1 = up, ..., 4 = left).
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Right => "right",
            Direction::Down => "down",
            Direction::Left => "left",
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (0, 1),
            Direction::Right => (1, 0),
            Direction::Down => (0, -1),
            Direction::Left => (-1, 0),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An absorbing goal cell. Entering it pays `payout` with probability
/// `success[u]` under context `u` and the ordinary step reward otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub name: String,
    pub cell: Cell,
    pub payout: f64,
    pub success: Vec<f64>,
}

/// A context-dependent slip: taking `action` in `cell` moves as intended with
/// probability `success[u]` and as `otherwise` the rest of the time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slip {
    pub cell: Cell,
    pub action: Direction,
    pub success: Vec<f64>,
    pub otherwise: Direction,
}

/// Full description of a gridworld contextual MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub gamma: f64,
    pub step_reward: f64,
    /// `ρ(u)`; its length fixes the number of contexts.
    pub context_probs: Vec<f64>,
    /// Blocked moves between adjacent cells, in both directions.
    #[serde(default)]
    pub walls: Vec<[Cell; 2]>,
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub slips: Vec<Slip>,
}

impl GridSpec {
    /// The reward-confounded grid: context changes how often goals pay out.
    pub fn reward_default() -> Self {
        Self {
            width: 5,
            height: 5,
            start: [2, 0],
            gamma: 0.9,
            step_reward: -1.0,
            context_probs: vec![0.2, 0.8],
            walls: vec![
                [[1, 2], [1, 3]],
                [[3, 2], [3, 3]],
                [[0, 3], [1, 3]],
                [[3, 3], [4, 3]],
            ],
            goals: vec![
                Goal {
                    name: "red".into(),
                    cell: [0, 4],
                    payout: 10.0,
                    success: vec![0.6, 0.1],
                },
                Goal {
                    name: "green".into(),
                    cell: [4, 4],
                    payout: 5.0,
                    success: vec![0.3, 0.8],
                },
            ],
            slips: Vec::new(),
        }
    }

    /// The transition-confounded grid: goals pay deterministically, but two
    /// upward moves slip downwards with context-dependent probability.
    pub fn transition_default() -> Self {
        Self {
            width: 5,
            height: 5,
            start: [2, 0],
            gamma: 0.9,
            step_reward: -1.0,
            context_probs: vec![0.2, 0.8],
            walls: vec![
                [[1, 2], [1, 3]],
                [[3, 2], [3, 3]],
                [[0, 3], [1, 3]],
                [[0, 4], [1, 4]],
                [[3, 3], [4, 3]],
            ],
            goals: vec![
                Goal {
                    name: "red".into(),
                    cell: [0, 4],
                    payout: 10.0,
                    success: vec![1.0, 1.0],
                },
                Goal {
                    name: "green".into(),
                    cell: [4, 4],
                    payout: 5.0,
                    success: vec![1.0, 1.0],
                },
            ],
            slips: vec![
                Slip {
                    cell: [0, 2],
                    action: Direction::Up,
                    success: vec![0.7, 0.05],
                    otherwise: Direction::Down,
                },
                Slip {
                    cell: [4, 2],
                    action: Direction::Up,
                    success: vec![0.4, 0.8],
                    otherwise: Direction::Down,
                },
            ],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("grid spec is always representable as TOML")
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn n_contexts(&self) -> usize {
        self.context_probs.len()
    }

    /// Row-major state index, `y * width + x`.
    pub fn state_index(&self, cell: Cell) -> Result<usize> {
        if cell[0] >= self.width || cell[1] >= self.height {
            return Err(Error::InvalidArgument(format!(
                "cell [{}, {}] outside the {}x{} grid",
                cell[0], cell[1], self.width, self.height
            )));
        }
        Ok(cell[1] * self.width + cell[0])
    }

    pub fn cell(&self, state: usize) -> Cell {
        [state % self.width, state / self.width]
    }

    pub fn cell_label(&self, state: usize) -> String {
        let [x, y] = self.cell(state);
        format!("[{x},{y}]")
    }

    pub fn goal_at(&self, cell: Cell) -> Option<&Goal> {
        self.goals.iter().find(|g| g.cell == cell)
    }

    fn blocked(&self) -> BTreeSet<(Cell, Cell)> {
        let mut set = BTreeSet::new();
        for [a, b] in &self.walls {
            set.insert((*a, *b));
            set.insert((*b, *a));
        }
        set
    }

    /// Where a deterministic move from `cell` ends up, honouring walls and
    /// the boundary.
    pub fn move_from(&self, cell: Cell, dir: Direction) -> Cell {
        self.move_with(&self.blocked(), cell, dir)
    }

    fn move_with(&self, blocked: &BTreeSet<(Cell, Cell)>, cell: Cell, dir: Direction) -> Cell {
        let (dx, dy) = dir.delta();
        let x = cell[0] as isize + dx;
        let y = cell[1] as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            return cell;
        }
        let target = [x as usize, y as usize];
        if blocked.contains(&(cell, target)) {
            cell
        } else {
            target
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be at least 1x1".into());
        }
        self.state_index(self.start)?;
        if self.context_probs.is_empty() {
            return bad("need at least one context".into());
        }
        let per_context = |what: &str, probs: &[f64]| -> Result<()> {
            if probs.len() != self.n_contexts() {
                return Err(Error::InvalidModel(format!(
                    "{what} has {} entries for {} contexts",
                    probs.len(),
                    self.n_contexts()
                )));
            }
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidModel(format!("{what} has a probability outside [0, 1]")));
            }
            Ok(())
        };
        for [a, b] in &self.walls {
            self.state_index(*a)?;
            self.state_index(*b)?;
            if a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]) != 1 {
                return bad(format!("wall between non-adjacent cells {a:?} and {b:?}"));
            }
        }
        let mut goal_cells = BTreeSet::new();
        for goal in &self.goals {
            self.state_index(goal.cell)?;
            per_context(&format!("goal '{}' success", goal.name), &goal.success)?;
            if !goal_cells.insert(goal.cell) {
                return bad(format!("two goals share cell {:?}", goal.cell));
            }
        }
        if goal_cells.contains(&self.start) {
            return bad("start cell is a goal".into());
        }
        let mut slip_keys = BTreeSet::new();
        for slip in &self.slips {
            self.state_index(slip.cell)?;
            per_context("slip success", &slip.success)?;
            if goal_cells.contains(&slip.cell) {
                return bad(format!("slip defined on goal cell {:?}", slip.cell));
            }
            if !slip_keys.insert((slip.cell, slip.action)) {
                return bad(format!("duplicate slip at {:?} {}", slip.cell, slip.action));
            }
        }
        Ok(())
    }

    /// Builds the contextual MDP. Actions are ordered up, right, down, left.
    pub fn build(&self) -> Result<ContextualMdp> {
        self.validate()?;
        let ns = self.n_states();
        let blocked = self.blocked();
        let states = Space::with_labels((0..ns).map(|s| self.cell_label(s)).collect())?;
        let actions = Space::with_labels(Direction::ALL.iter().map(|d| d.name().to_string()).collect())?;
        let mut initial = vec![0.0; ns];
        initial[self.state_index(self.start)?] = 1.0;

        let mut contexts = Vec::with_capacity(self.n_contexts());
        for u in 0..self.n_contexts() {
            let mut outcomes = Vec::with_capacity(ns * 4);
            for s in 0..ns {
                let cell = self.cell(s);
                for dir in Direction::ALL {
                    if self.goal_at(cell).is_some() {
                        outcomes.push(vec![Outcome::new(s, 0.0, 1.0)]);
                        continue;
                    }
                    let moves = match self.slips.iter().find(|sl| sl.cell == cell && sl.action == dir) {
                        Some(slip) => vec![
                            (slip.action, slip.success[u]),
                            (slip.otherwise, 1.0 - slip.success[u]),
                        ],
                        None => vec![(dir, 1.0)],
                    };
                    let mut list = Vec::new();
                    for (d, p) in moves {
                        let dest = self.move_with(&blocked, cell, d);
                        let next = self.state_index(dest)?;
                        match self.goal_at(dest) {
                            Some(goal) => {
                                list.push(Outcome::new(next, goal.payout, p * goal.success[u]));
                                list.push(Outcome::new(next, self.step_reward, p * (1.0 - goal.success[u])));
                            }
                            None => list.push(Outcome::new(next, self.step_reward, p)),
                        }
                    }
                    outcomes.push(list);
                }
            }
            contexts.push(Mdp::new(
                states.clone(),
                actions.clone(),
                outcomes,
                self.gamma,
                initial.clone(),
            )?);
        }
        ContextualMdp::new(contexts, self.context_probs.clone())
    }
}

/// The reward-confounded benchmark with its shipped wall layout.
pub fn build_reward_gridworld() -> ContextualMdp {
    GridSpec::reward_default()
        .build()
        .expect("shipped reward grid is valid")
}

/// The transition-confounded benchmark with its shipped wall layout.
pub fn build_transition_gridworld() -> ContextualMdp {
    GridSpec::transition_default()
        .build()
        .expect("shipped transition grid is valid")
}
