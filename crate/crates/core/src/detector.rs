//! Additive-decrease / multiplicative-increase (ADMI) anomaly threshold.
//!
//! At step `t` the threshold is `D_t = mean(L) + c * std(L)` over the losses
//! `L` of samples accepted so far (population standard deviation). A loss
//! above `D_t` is flagged and `c <- beta * c`; otherwise the loss joins `L`
//! and `c <- max(c_min, c - alpha)`. The anomaly count `e` gives the running
//! corruption estimate `p_hat = e / t`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Normal,
    Anomaly,
}

impl Decision {
    pub fn is_anomaly(self) -> bool {
        self == Decision::Anomaly
    }
}

/// Windowed under-reporting test; see [`extra`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraConfig {
    /// Window length `t0`.
    pub window: usize,
    /// One-sided level `delta`.
    pub level: f64,
}

impl Default for ExtraConfig {
    fn default() -> Self {
        ExtraConfig { window: 50, level: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub c_min: f64,
    pub c_init: f64,
    /// The first `warmup` steps are always accepted.
    pub warmup: usize,
    pub extra: Option<ExtraConfig>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { alpha: 0.05, beta: 1.5, c_min: 1.0, c_init: 1.0, warmup: 10, extra: None }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 1.0) {
            return Err(Error::config(format!("beta must be > 1, got {}", self.beta)));
        }
        if !self.c_min.is_finite() {
            return Err(Error::config("c_min must be finite"));
        }
        if !(self.c_init.is_finite() && self.c_init >= self.c_min) {
            return Err(Error::config("c_init must be finite and >= c_min"));
        }
        if let Some(extra) = self.extra {
            if extra.window == 0 {
                return Err(Error::config("extra window t0 must be >= 1"));
            }
            if !(extra.level > 0.0 && extra.level < 1.0) {
                return Err(Error::config("extra level delta must be in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Result of one [`ThresholdState::observe`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub decision: Decision,
    /// `D_t` the loss was compared against.
    pub threshold: f64,
    /// Coefficient `c` used in `D_t`.
    pub c: f64,
    /// The windowed test forced the anomaly.
    pub extra_fired: bool,
}

#[derive(Debug, Clone)]
pub struct ThresholdState {
    config: DetectorConfig,
    c: f64,
    losses: Vec<f64>,
    // Welford accumulators over `losses`.
    mean: f64,
    m2: f64,
    e: usize,
    t: usize,
    recent: VecDeque<(f64, f64)>,
    p_hat_history: Vec<f64>,
    schedule: Option<Vec<f64>>,
}

impl ThresholdState {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(ThresholdState {
            c: config.c_init,
            config,
            losses: Vec::new(),
            mean: 0.0,
            m2: 0.0,
            e: 0,
            t: 0,
            recent: VecDeque::new(),
            p_hat_history: Vec::new(),
            schedule: None,
        })
    }

    /// Replaces the ADMI threshold with a fixed per-step schedule
    /// (`schedule[t-1]` at step `t`, last entry repeated). The `c`
    /// bookkeeping still runs but no longer affects decisions.
    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Result<Self> {
        if schedule.is_empty() || schedule.iter().any(|d| d.is_nan()) {
            return Err(Error::config("threshold schedule must be non-empty and free of NaN"));
        }
        self.schedule = Some(schedule);
        Ok(self)
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Losses of accepted samples, in order.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Anomaly count `e_t`.
    pub fn anomalies(&self) -> usize {
        self.e
    }

    /// Steps observed so far.
    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn p_hat(&self) -> f64 {
        self.e as f64 / self.t.max(1) as f64
    }

    pub fn mean_loss(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation of the accepted losses.
    pub fn std_loss(&self) -> f64 {
        if self.losses.is_empty() {
            0.0
        } else {
            (self.m2 / self.losses.len() as f64).sqrt()
        }
    }

    /// `D_t` for the upcoming step.
    pub fn threshold(&self) -> f64 {
        if let Some(schedule) = &self.schedule {
            return schedule[self.t.min(schedule.len() - 1)];
        }
        if self.t < self.config.warmup || self.losses.is_empty() {
            return f64::INFINITY;
        }
        self.mean + self.c * self.std_loss()
    }

    fn push_loss(&mut self, l: f64) {
        self.losses.push(l);
        let n = self.losses.len() as f64;
        let delta = l - self.mean;
        self.mean += delta / n;
        self.m2 += delta * (l - self.mean);
    }

    /// Classifies the loss of the current step and advances the state.
    pub fn observe(&mut self, loss: f64) -> Result<Observation> {
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::config(format!("loss must be finite and >= 0, got {loss}")));
        }
        let threshold = self.threshold();
        let c = self.c;
        let above = loss > threshold;

        let mut extra_fired = false;
        if let Some(extra_cfg) = self.config.extra {
            self.recent.push_back((loss, threshold));
            while self.recent.len() > extra_cfg.window {
                self.recent.pop_front();
            }
            if !above && self.t >= self.config.warmup && !self.p_hat_history.is_empty() {
                let recent = self.recent.make_contiguous();
                extra_fired = extra(recent, extra_cfg.window, &self.p_hat_history, extra_cfg.level)?;
            }
        }

        let decision = if above || extra_fired { Decision::Anomaly } else { Decision::Normal };
        match decision {
            Decision::Anomaly => {
                self.c *= self.config.beta;
                self.e += 1;
            }
            Decision::Normal => {
                self.c = (self.c - self.config.alpha).max(self.config.c_min);
                self.push_loss(loss);
            }
        }
        self.t += 1;
        if self.config.extra.is_some() && self.t > self.config.warmup {
            self.p_hat_history.push(self.p_hat());
        }
        Ok(Observation { decision, threshold, c, extra_fired })
    }
}

/// Windowed under-reporting test.
///
/// With `r` the fraction of the last `window` `(loss, threshold)` pairs whose
/// loss exceeds the threshold, returns `true` iff `r` lies strictly below the
/// lower empirical `level`-quantile of `p_hat_samples`, i.e. anomalies are
/// being flagged less often than the running estimate says they occur.
/// Fewer than `window` pairs always yields `false`.
pub fn extra(recent: &[(f64, f64)], window: usize, p_hat_samples: &[f64], level: f64) -> Result<bool> {
    if p_hat_samples.is_empty() {
        return Err(Error::config("extra needs a non-empty p_hat sample"));
    }
    if window == 0 || recent.len() < window {
        return Ok(false);
    }
    let tail = &recent[recent.len() - window..];
    let hits = tail.iter().filter(|(l, d)| l > d).count();
    let rate = hits as f64 / window as f64;
    Ok(rate < lower_quantile(p_hat_samples, level))
}

/// Smallest sample `x` with empirical CDF `F(x) >= level`.
fn lower_quantile(samples: &[f64], level: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}
