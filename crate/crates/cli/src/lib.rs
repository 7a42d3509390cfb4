//! Experiment runner for causal-bound transfer learning: builds the gridworld
//! benchmarks, derives demonstrator data and causal bounds, runs learner
//! comparisons and writes tables, CSV curves and SVG plots.

pub mod bounds;
pub mod commands;
pub mod config;
pub mod evaluate;
pub mod learning;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod tables;
