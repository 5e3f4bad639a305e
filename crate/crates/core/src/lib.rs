//! Robust online prediction for linear dynamical systems whose outputs are,
//! with a fixed probability, replaced wholesale by noise.
//!
//! The pipeline per step: featurize the input history with spectral (wave)
//! filters, predict with a least-squares map, compare the squared error
//! against an adaptive threshold `mean(L) + c * std(L)` whose coefficient
//! follows an additive-decrease / multiplicative-increase rule, and learn
//! only from samples judged normal.

pub mod detector;
pub mod eigen;
pub mod error;
pub mod featurizer;
pub mod harness;
pub mod learner;
pub mod rifs;
pub mod sim;
pub mod spectral;

pub use detector::{Decision, DetectorConfig, ExtraConfig, ThresholdState};
pub use error::{Error, Result};
pub use featurizer::{featurize, Featurization};
pub use harness::{
    config::ExperimentConfig,
    episode::{run_baseline, run_episode, EpisodeRecord},
    metrics::{score, Metrics},
    montecarlo::{run_monte_carlo, AggregateReport},
    presets::preset,
};
pub use learner::{LearnerConfig, ModelState};
pub use rifs::{average_contractivity, ks_distance, stationary_distribution, RifsMap, RifsSpec};
pub use sim::{
    check_assumptions, simulate, AssumptionBounds, AssumptionReport, CorruptionModel, InputGen,
    NoiseModel, SystemSpec, Trajectory, XiDist,
};
pub use spectral::{hankel_matrix, top_eigenpairs, FilterBank};
