//! Shared fixtures for the benchmarks.

use robust_lds::harness::config::ExperimentConfig;

/// The two-state SISO preset shortened to `horizon` steps.
pub fn siso_config(horizon: usize) -> ExperimentConfig {
    let mut cfg = robust_lds::preset("hazan-siso").expect("built-in preset");
    cfg.horizon = horizon;
    cfg
}
