//! Causal bounds for transfer reinforcement learning under hidden context.
//!
//! A context-aware demonstrator acts in a contextual MDP and hands its
//! `(s, a, s', r)` experience, stripped of the context, to a learner that
//! cannot observe the context. Naively fitting a model to that data is
//! confounded. This crate instead computes partial-identification bounds on
//! the interventional rewards and transitions, lifts them to value-function
//! and Q-function bounds, and uses those to constrain tabular Q learning and
//! UCB-Q learning.
//!
//! Module map:
//!
//! - [`mdp`]: finite (contextual) MDPs, value iteration, episode simulation
//! - [`environments`]: the two gridworld benchmarks and their config format
//! - [`demonstrator`]: context-aware policies and observational distributions
//! - [`lp`]: a small dense simplex solver
//! - [`causal`]: response-mapping LPs for interventional bounds
//! - [`value_bounds`]: interval MDPs, robust value iteration, Q bounds
//! - [`learners`]: Q, CBC-Q, UCB-Q and CB-UCB-Q learning

pub mod causal;
pub mod demonstrator;
pub mod environments;
pub mod error;
pub mod learners;
pub mod lp;
pub mod mdp;
pub mod value_bounds;

mod sampling;

pub use error::{Error, Result};
pub use mdp::{ContextualMdp, Mdp, Policy, QTable, ValueTable};
pub use value_bounds::{BoundedMdpModel, QBoundTable, VBoundTable};
