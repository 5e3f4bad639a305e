//! Built-in experiment presets.

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, FilterConfig, Seeds};
use crate::learner::LearnerConfig;
use crate::sim::{BSchedule, CorruptionModel, InputGen, NoiseModel, SystemSchedule, SystemSpec, XiDist};

pub const PRESET_NAMES: [&str; 2] = ["hazan-siso", "time-varying-sinusoid"];

/// Two-state SISO system `A = diag(0.999, 0.5)`, `B^T = C = [1 1]`, `D = 0`.
pub fn hazan_siso_system() -> SystemSpec {
    SystemSpec::from_rows(
        &[vec![0.999, 0.0], vec![0.0, 0.5]],
        &[vec![1.0], vec![1.0]],
        &[vec![1.0, 1.0]],
        &[vec![0.0]],
    )
    .expect("preset system is well formed")
}

fn hazan_siso() -> ExperimentConfig {
    ExperimentConfig {
        system: SystemSchedule::constant(hazan_siso_system()),
        h0: None,
        noise: NoiseModel::gaussian(0.1, 0.1),
        corruption: CorruptionModel { p: 0.1, xi: XiDist::Uniform { low: 0.0, high: 100.0 } },
        horizon: 100,
        input_gen: InputGen::Gaussian,
        filters: FilterConfig::default(),
        learner: LearnerConfig::default(),
        detector: DetectorConfig::default(),
        seeds: Seeds::Count(100),
        out_dir: None,
        filter_cache: None,
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "hazan-siso" => Ok(hazan_siso()),
        "time-varying-sinusoid" => {
            let mut cfg = hazan_siso();
            cfg.system.b = BSchedule::Sinusoid { start: 50, offset: 1.01, period: 180.0 };
            Ok(cfg)
        }
        other => Err(Error::config(format!(
            "unknown preset `{other}` (expected one of: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}
