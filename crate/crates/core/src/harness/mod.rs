//! Experiment harness: wires simulator, featurizer, learner and detector
//! into episodes, scores them against the corruption mask and aggregates
//! Monte-Carlo runs.

pub mod config;
pub mod episode;
pub mod metrics;
pub mod montecarlo;
pub mod presets;
