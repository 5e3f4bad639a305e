//! One episode of online prediction with anomaly detection.
//!
//! Per step `t`: featurize, predict `y_hat_t`, observe `y_t`, compute
//! `l_t = |y_t - y_hat_t|^2`, classify against the detector threshold, and
//! learn from the pair only when the step is judged normal. After an
//! anomalous step the autoregressive input `y_prev` is the model's own
//! prediction instead of the rejected observation.
//!
//! The baseline arm predicts `y_hat_t = y_{t-1}` (observed, `y_hat_1 = 0`)
//! and shares the detector.
//!
//! Episode CSV columns:
//!
//! ```text
//! t, x_1..x_n, y_observed_1..m, y_clean_1..m, corrupted,
//! y_pred_1..m, loss, threshold, c, decision, e, p_hat
//! ```
//!
//! `c` is the coefficient used in that step's threshold, `decision` is
//! `anomaly` or `normal`, and `e`, `p_hat` are the counts after the step.

use std::path::Path;

use nalgebra::DVector;

use crate::detector::{Decision, ThresholdState};
use crate::error::{Error, Result};
use crate::featurizer::{feature_dim, featurize};
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::{score, Metrics};
use crate::learner::ModelState;
use crate::sim::{simulate_schedule, Trajectory};
use crate::spectral::FilterBank;

/// Which predictor produced an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Spectral-filter learner.
    Method,
    /// Last-value prediction.
    Baseline,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Method => "method",
            Arm::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub arm: Arm,
    pub trajectory: Trajectory,
    pub predictions: Vec<DVector<f64>>,
    pub losses: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub decisions: Vec<Decision>,
    pub c: Vec<f64>,
    pub e: Vec<usize>,
    pub p_hat: Vec<f64>,
}

impl EpisodeRecord {
    fn with_capacity(seed: u64, arm: Arm, trajectory: Trajectory) -> Self {
        let t = trajectory.len();
        EpisodeRecord {
            seed,
            arm,
            trajectory,
            predictions: Vec::with_capacity(t),
            losses: Vec::with_capacity(t),
            thresholds: Vec::with_capacity(t),
            decisions: Vec::with_capacity(t),
            c: Vec::with_capacity(t),
            e: Vec::with_capacity(t),
            p_hat: Vec::with_capacity(t),
        }
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn final_p_hat(&self) -> f64 {
        self.p_hat.last().copied().unwrap_or(0.0)
    }

    pub fn flags(&self) -> Vec<bool> {
        self.decisions.iter().map(|d| d.is_anomaly()).collect()
    }

    pub fn metrics(&self) -> Metrics {
        score(&self.flags(), &self.trajectory.mask).expect("record series have equal lengths")
    }

    fn record_step(&mut self, y_hat: DVector<f64>, loss: f64, detector: &ThresholdState, obs: crate::detector::Observation) {
        self.predictions.push(y_hat);
        self.losses.push(loss);
        self.thresholds.push(obs.threshold);
        self.decisions.push(obs.decision);
        self.c.push(obs.c);
        self.e.push(detector.anomalies());
        self.p_hat.push(detector.p_hat());
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let traj = &self.trajectory;
        let (n, m) = (traj.input_dim(), traj.output_dim());
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("y_observed_{i}")));
        header.extend((1..=m).map(|i| format!("y_clean_{i}")));
        header.push("corrupted".into());
        header.extend((1..=m).map(|i| format!("y_pred_{i}")));
        header.extend(["loss", "threshold", "c", "decision", "e", "p_hat"].map(String::from));
        wtr.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(traj.inputs[t].iter().map(f64::to_string));
            row.extend(traj.observed[t].iter().map(f64::to_string));
            row.extend(traj.clean[t].iter().map(f64::to_string));
            row.push(u8::from(traj.mask[t]).to_string());
            row.extend(self.predictions[t].iter().map(f64::to_string));
            row.push(self.losses[t].to_string());
            row.push(self.thresholds[t].to_string());
            row.push(self.c[t].to_string());
            row.push(if self.decisions[t].is_anomaly() { "anomaly" } else { "normal" }.into());
            row.push(self.e[t].to_string());
            row.push(self.p_hat[t].to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Parses a file written by [`EpisodeRecord::write_csv`]. Hidden states
    /// are not stored, so `trajectory.hidden` comes back empty.
    pub fn read_csv<R: std::io::Read>(r: R, seed: u64, arm: Arm) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
        let (n, m) = (count("x_"), count("y_observed_"));
        let expected = 1 + n + 3 * m + 1 + 6;
        if header.len() != expected || header.get(0) != Some("t") {
            return Err(Error::Parse(format!("episode header has {} columns, expected {expected}", header.len())));
        }

        let mut rec = EpisodeRecord::with_capacity(
            seed,
            arm,
            Trajectory { inputs: vec![], observed: vec![], clean: vec![], mask: vec![], hidden: vec![] },
        );
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let float = |i: usize| -> Result<f64> {
                field(i).parse().map_err(|_| Error::Parse(format!("row {}: bad number `{}`", line + 1, field(i))))
            };
            let vector = |start: usize, len: usize| -> Result<DVector<f64>> {
                (start..start + len).map(float).collect::<Result<Vec<_>>>().map(DVector::from_vec)
            };
            if field(0) != (line + 1).to_string() {
                return Err(Error::Parse(format!("row {}: expected t = {}", line + 1, line + 1)));
            }
            let mut i = 1;
            rec.trajectory.inputs.push(vector(i, n)?);
            i += n;
            rec.trajectory.observed.push(vector(i, m)?);
            i += m;
            rec.trajectory.clean.push(vector(i, m)?);
            i += m;
            rec.trajectory.mask.push(match field(i) {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("row {}: bad corrupted flag `{other}`", line + 1))),
            });
            i += 1;
            rec.predictions.push(vector(i, m)?);
            i += m;
            rec.losses.push(float(i)?);
            rec.thresholds.push(float(i + 1)?);
            rec.c.push(float(i + 2)?);
            rec.decisions.push(match field(i + 3) {
                "anomaly" => Decision::Anomaly,
                "normal" => Decision::Normal,
                other => return Err(Error::Parse(format!("row {}: bad decision `{other}`", line + 1))),
            });
            rec.e.push(field(i + 4).parse().map_err(|_| Error::Parse(format!("row {}: bad count", line + 1)))?);
            rec.p_hat.push(float(i + 5)?);
        }
        Ok(rec)
    }

    pub fn load(path: &Path, seed: u64, arm: Arm) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?), seed, arm)
    }
}

/// Simulates the configured system for `seed`.
pub fn simulate_episode(config: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    config.validate()?;
    simulate_schedule(&config.system, &config.noise, &config.corruption, &config.sim_options(), seed)
}

fn loss_of(y: &DVector<f64>, y_hat: &DVector<f64>, t: usize) -> Result<f64> {
    let loss = (y - y_hat).norm_squared();
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss at step {t}")));
    }
    Ok(loss)
}

/// Runs the spectral-filter learner with detection on a given trajectory.
pub fn run_method_on(config: &ExperimentConfig, trajectory: Trajectory, seed: u64) -> Result<EpisodeRecord> {
    config.validate()?;
    let bank = FilterBank::shared_cached(config.filter_cache.as_deref(), config.filter_horizon(), config.filters.k)?;
    let (n, m) = (trajectory.input_dim(), trajectory.output_dim());
    let mut learner = ModelState::new(feature_dim(n, m, bank.k()), m, config.learner)?;
    let mut detector = ThresholdState::new(config.detector)?;
    let mut rec = EpisodeRecord::with_capacity(seed, Arm::Method, trajectory);

    let mut y_prev = DVector::zeros(m);
    for t in 1..=rec.trajectory.len() {
        let feat = featurize(&rec.trajectory.inputs[..t], &y_prev, &bank, t)?;
        let y_hat = learner.predict(&feat)?;
        let y = &rec.trajectory.observed[t - 1];
        let loss = loss_of(y, &y_hat, t)?;
        let obs = detector.observe(loss)?;
        match obs.decision {
            Decision::Normal => {
                learner.learn(&feat.vec, y)?;
                y_prev = y.clone();
            }
            Decision::Anomaly => y_prev = y_hat.clone(),
        }
        rec.record_step(y_hat, loss, &detector, obs);
    }
    Ok(rec)
}

/// Runs last-value prediction with the same detector on a given trajectory.
pub fn run_baseline_on(config: &ExperimentConfig, trajectory: Trajectory, seed: u64) -> Result<EpisodeRecord> {
    config.validate()?;
    let m = trajectory.output_dim();
    let mut detector = ThresholdState::new(config.detector)?;
    let mut rec = EpisodeRecord::with_capacity(seed, Arm::Baseline, trajectory);
    for t in 1..=rec.trajectory.len() {
        let y_hat = if t == 1 { DVector::zeros(m) } else { rec.trajectory.observed[t - 2].clone() };
        let loss = loss_of(&rec.trajectory.observed[t - 1], &y_hat, t)?;
        let obs = detector.observe(loss)?;
        rec.record_step(y_hat, loss, &detector, obs);
    }
    Ok(rec)
}

/// Simulates and runs the spectral-filter arm.
pub fn run_episode(config: &ExperimentConfig, seed: u64) -> Result<EpisodeRecord> {
    run_method_on(config, simulate_episode(config, seed)?, seed)
}

/// Simulates and runs the last-value arm.
pub fn run_baseline(config: &ExperimentConfig, seed: u64) -> Result<EpisodeRecord> {
    run_baseline_on(config, simulate_episode(config, seed)?, seed)
}
