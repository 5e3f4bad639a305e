//! Experiment configuration and its file format.
//!
//! The file is flat TOML: every setting is a top-level typed key, the first
//! key is `version = 1`, and unknown or inapplicable keys are errors. Keys
//! that only apply to one variant (e.g. `xi_low` for `xi = "uniform"`) must
//! be absent for the others. See the README for the full schema.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorConfig, ExtraConfig};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::sim::{
    mat_to_rows, BSchedule, CorruptionModel, InputGen, NoiseDist, NoiseFamily, NoiseModel,
    SimOptions, SystemSchedule, SystemSpec, XiDist,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub k: usize,
    /// Filter horizon `T_f`; the episode horizon when `None`.
    pub horizon: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { k: 25, horizon: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seeds {
    /// Seeds `0..n`.
    Count(usize),
    List(Vec<u64>),
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n as u64).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemSchedule,
    pub h0: Option<DVector<f64>>,
    pub noise: NoiseModel,
    pub corruption: CorruptionModel,
    pub horizon: usize,
    pub input_gen: InputGen,
    pub filters: FilterConfig,
    pub learner: LearnerConfig,
    pub detector: DetectorConfig,
    pub seeds: Seeds,
    pub out_dir: Option<PathBuf>,
    pub filter_cache: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn filter_horizon(&self) -> usize {
        self.filters.horizon.unwrap_or(self.horizon)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions { input_gen: self.input_gen, horizon: self.horizon, h0: self.h0.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        let tf = self.filter_horizon();
        if tf == 0 {
            return Err(Error::config("filter horizon must be >= 1"));
        }
        if self.filters.k == 0 || self.filters.k > tf {
            return Err(Error::config(format!("filters_k={} must be in 1..={tf}", self.filters.k)));
        }
        if let Some(h0) = &self.h0 {
            if h0.len() != self.system.base.state_dim() {
                return Err(Error::config("h0 length must match the state dimension"));
            }
        }
        if matches!(self.seeds, Seeds::Count(0)) || matches!(&self.seeds, Seeds::List(v) if v.is_empty()) {
            return Err(Error::config("at least one seed is required"));
        }
        self.learner.validate()?;
        self.detector.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&ConfigFile::from_config(self)).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// On-disk representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: u32,

    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h0: Option<Vec<f64>>,
    #[serde(default = "default_schedule")]
    b_schedule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_schedule_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_schedule_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_schedule_period: Option<f64>,

    #[serde(default = "default_family")]
    eta_family: NoiseFamily,
    #[serde(default = "default_noise_std")]
    eta_std: f64,
    #[serde(default = "default_family")]
    zeta_family: NoiseFamily,
    #[serde(default = "default_noise_std")]
    zeta_std: f64,
    #[serde(default = "default_budget")]
    noise_budget: f64,

    p: f64,
    xi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_delta: Option<f64>,

    horizon: usize,
    #[serde(default = "default_input")]
    input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_period: Option<f64>,

    #[serde(default = "default_k")]
    filters_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filters_horizon: Option<usize>,

    #[serde(default = "default_ridge")]
    ridge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    incremental_iters: Option<usize>,

    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_c")]
    c_min: f64,
    #[serde(default = "default_c")]
    c_init: f64,
    #[serde(default = "default_warmup")]
    warmup: usize,
    #[serde(default)]
    extra: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extra_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extra_level: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed_list: Option<Vec<u64>>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter_cache: Option<PathBuf>,
}

fn default_schedule() -> String {
    "constant".into()
}
fn default_family() -> NoiseFamily {
    NoiseFamily::Gaussian
}
fn default_noise_std() -> f64 {
    0.1
}
fn default_budget() -> f64 {
    f64::INFINITY
}
fn default_input() -> String {
    "gaussian".into()
}
fn default_k() -> usize {
    FilterConfig::default().k
}
fn default_ridge() -> f64 {
    LearnerConfig::default().ridge
}
fn default_alpha() -> f64 {
    DetectorConfig::default().alpha
}
fn default_beta() -> f64 {
    DetectorConfig::default().beta
}
fn default_c() -> f64 {
    1.0
}
fn default_warmup() -> usize {
    DetectorConfig::default().warmup
}

fn require<T>(v: Option<T>, key: &str, ctx: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(format!("`{key}` is required when {ctx}")))
}

fn forbid<T>(v: &Option<T>, key: &str, ctx: &str) -> Result<()> {
    match v {
        Some(_) => Err(Error::config(format!("`{key}` is not applicable when {ctx}"))),
        None => Ok(()),
    }
}

impl ConfigFile {
    fn into_config(self) -> Result<ExperimentConfig> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Parse(format!("unsupported config version {}", self.version)));
        }
        let base = SystemSpec::from_rows(&self.a, &self.b, &self.c, &self.d)?;
        let b_sched = match self.b_schedule.as_str() {
            "constant" => {
                let ctx = "b_schedule = \"constant\"";
                forbid(&self.b_schedule_start, "b_schedule_start", ctx)?;
                forbid(&self.b_schedule_offset, "b_schedule_offset", ctx)?;
                forbid(&self.b_schedule_period, "b_schedule_period", ctx)?;
                BSchedule::Constant
            }
            "sinusoid" => {
                let ctx = "b_schedule = \"sinusoid\"";
                BSchedule::Sinusoid {
                    start: require(self.b_schedule_start, "b_schedule_start", ctx)?,
                    offset: require(self.b_schedule_offset, "b_schedule_offset", ctx)?,
                    period: require(self.b_schedule_period, "b_schedule_period", ctx)?,
                }
            }
            other => return Err(Error::config(format!("unknown b_schedule `{other}`"))),
        };

        let xi = match self.xi.as_str() {
            "uniform" => {
                let ctx = "xi = \"uniform\"";
                forbid(&self.xi_mean, "xi_mean", ctx)?;
                forbid(&self.xi_std, "xi_std", ctx)?;
                forbid(&self.xi_delta, "xi_delta", ctx)?;
                XiDist::Uniform {
                    low: require(self.xi_low, "xi_low", ctx)?,
                    high: require(self.xi_high, "xi_high", ctx)?,
                }
            }
            "gaussian" => {
                let ctx = "xi = \"gaussian\"";
                forbid(&self.xi_low, "xi_low", ctx)?;
                forbid(&self.xi_high, "xi_high", ctx)?;
                forbid(&self.xi_delta, "xi_delta", ctx)?;
                XiDist::Gaussian {
                    mean: require(self.xi_mean, "xi_mean", ctx)?,
                    std: require(self.xi_std, "xi_std", ctx)?,
                }
            }
            "constant_offset" => {
                let ctx = "xi = \"constant_offset\"";
                forbid(&self.xi_low, "xi_low", ctx)?;
                forbid(&self.xi_high, "xi_high", ctx)?;
                forbid(&self.xi_mean, "xi_mean", ctx)?;
                forbid(&self.xi_std, "xi_std", ctx)?;
                XiDist::ConstantOffset { delta: require(self.xi_delta, "xi_delta", ctx)? }
            }
            other => return Err(Error::config(format!("unknown xi distribution `{other}`"))),
        };

        let input_gen = match self.input.as_str() {
            "gaussian" | "uniform" => {
                forbid(&self.input_period, "input_period", "input is not \"sinusoid\"")?;
                if self.input == "gaussian" {
                    InputGen::Gaussian
                } else {
                    InputGen::Uniform
                }
            }
            "sinusoid" => InputGen::Sinusoid {
                period: require(self.input_period, "input_period", "input = \"sinusoid\"")?,
            },
            other => return Err(Error::config(format!("unknown input generator `{other}`"))),
        };

        let extra = if self.extra {
            let d = ExtraConfig::default();
            Some(ExtraConfig {
                window: self.extra_window.unwrap_or(d.window),
                level: self.extra_level.unwrap_or(d.level),
            })
        } else {
            forbid(&self.extra_window, "extra_window", "extra = false")?;
            forbid(&self.extra_level, "extra_level", "extra = false")?;
            None
        };

        let seeds = match (self.seeds, self.seed_list) {
            (Some(n), None) => Seeds::Count(n),
            (None, Some(list)) => Seeds::List(list),
            (None, None) => Seeds::Count(1),
            (Some(_), Some(_)) => return Err(Error::config("give either `seeds` or `seed_list`, not both")),
        };

        let cfg = ExperimentConfig {
            system: SystemSchedule { base, b: b_sched },
            h0: self.h0.map(DVector::from_vec),
            noise: NoiseModel {
                eta: NoiseDist { family: self.eta_family, std: self.eta_std },
                zeta: NoiseDist { family: self.zeta_family, std: self.zeta_std },
                budget: self.noise_budget,
            },
            corruption: CorruptionModel { p: self.p, xi },
            horizon: self.horizon,
            input_gen,
            filters: FilterConfig { k: self.filters_k, horizon: self.filters_horizon },
            learner: LearnerConfig {
                ridge: self.ridge,
                window: self.window,
                incremental_iters: self.incremental_iters,
            },
            detector: DetectorConfig {
                alpha: self.alpha,
                beta: self.beta,
                c_min: self.c_min,
                c_init: self.c_init,
                warmup: self.warmup,
                extra,
            },
            seeds,
            out_dir: self.out_dir,
            filter_cache: self.filter_cache,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_config(cfg: &ExperimentConfig) -> Self {
        let base = &cfg.system.base;
        let (b_schedule, b_schedule_start, b_schedule_offset, b_schedule_period) = match cfg.system.b {
            BSchedule::Constant => ("constant".to_string(), None, None, None),
            BSchedule::Sinusoid { start, offset, period } => {
                ("sinusoid".to_string(), Some(start), Some(offset), Some(period))
            }
        };
        let (mut xi_low, mut xi_high, mut xi_mean, mut xi_std, mut xi_delta) = (None, None, None, None, None);
        let xi = match cfg.corruption.xi {
            XiDist::Uniform { low, high } => {
                xi_low = Some(low);
                xi_high = Some(high);
                "uniform"
            }
            XiDist::Gaussian { mean, std } => {
                xi_mean = Some(mean);
                xi_std = Some(std);
                "gaussian"
            }
            XiDist::ConstantOffset { delta } => {
                xi_delta = Some(delta);
                "constant_offset"
            }
        };
        let (input, input_period) = match cfg.input_gen {
            InputGen::Gaussian => ("gaussian", None),
            InputGen::Uniform => ("uniform", None),
            InputGen::Sinusoid { period } => ("sinusoid", Some(period)),
        };
        let (seeds, seed_list) = match &cfg.seeds {
            Seeds::Count(n) => (Some(*n), None),
            Seeds::List(v) => (None, Some(v.clone())),
        };
        ConfigFile {
            version: CONFIG_VERSION,
            a: mat_to_rows(base.a()),
            b: mat_to_rows(base.b()),
            c: mat_to_rows(base.c()),
            d: mat_to_rows(base.d()),
            h0: cfg.h0.as_ref().map(|h| h.iter().copied().collect()),
            b_schedule,
            b_schedule_start,
            b_schedule_offset,
            b_schedule_period,
            eta_family: cfg.noise.eta.family,
            eta_std: cfg.noise.eta.std,
            zeta_family: cfg.noise.zeta.family,
            zeta_std: cfg.noise.zeta.std,
            noise_budget: cfg.noise.budget,
            p: cfg.corruption.p,
            xi: xi.into(),
            xi_low,
            xi_high,
            xi_mean,
            xi_std,
            xi_delta,
            horizon: cfg.horizon,
            input: input.into(),
            input_period,
            filters_k: cfg.filters.k,
            filters_horizon: cfg.filters.horizon,
            ridge: cfg.learner.ridge,
            window: cfg.learner.window,
            incremental_iters: cfg.learner.incremental_iters,
            alpha: cfg.detector.alpha,
            beta: cfg.detector.beta,
            c_min: cfg.detector.c_min,
            c_init: cfg.detector.c_init,
            warmup: cfg.detector.warmup,
            extra: cfg.detector.extra.is_some(),
            extra_window: cfg.detector.extra.map(|e| e.window),
            extra_level: cfg.detector.extra.map(|e| e.level),
            seeds,
            seed_list,
            out_dir: cfg.out_dir.clone(),
            filter_cache: cfg.filter_cache.clone(),
        }
    }
}
