//! Monte-Carlo aggregation over seeds.
//!
//! Output files:
//!
//! ```text
//! aggregate.csv: t, method_loss_mean, method_loss_std, baseline_loss_mean, baseline_loss_std
//! summary.csv:   arm, episodes, mean_f1, mean_precision, mean_recall, mean_final_p_hat
//! ```
//!
//! Standard deviations are population (divide by the number of seeds).

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::episode::{run_baseline_on, run_method_on, simulate_episode, Arm, EpisodeRecord};

/// Both arms on the same simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePair {
    pub method: EpisodeRecord,
    pub baseline: EpisodeRecord,
}

pub fn run_arms(config: &ExperimentConfig, seed: u64) -> Result<EpisodePair> {
    let traj = simulate_episode(config, seed)?;
    let baseline = run_baseline_on(config, traj.clone(), seed)?;
    let method = run_method_on(config, traj, seed)?;
    Ok(EpisodePair { method, baseline })
}

/// Per-arm summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSummary {
    pub episodes: usize,
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_final_p_hat: f64,
    pub loss_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub seeds: Vec<u64>,
    pub method_loss_mean: Vec<f64>,
    pub method_loss_std: Vec<f64>,
    pub baseline_loss_mean: Vec<f64>,
    pub baseline_loss_std: Vec<f64>,
    pub method: ArmSummary,
    pub baseline: ArmSummary,
}

fn mean_std(rows: &[&[f64]], t: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[t]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(records: &[&EpisodeRecord]) -> ArmSummary {
    let n = records.len() as f64;
    let metrics: Vec<_> = records.iter().map(|r| r.metrics()).collect();
    let avg = |f: &dyn Fn(usize) -> f64| (0..records.len()).map(f).sum::<f64>() / n;
    ArmSummary {
        episodes: records.len(),
        mean_f1: avg(&|i| metrics[i].f1),
        mean_precision: avg(&|i| metrics[i].precision),
        mean_recall: avg(&|i| metrics[i].recall),
        mean_final_p_hat: avg(&|i| records[i].final_p_hat()),
        loss_mean: avg(&|i| records[i].losses.iter().sum::<f64>() / records[i].len() as f64),
    }
}

/// Folds episode pairs (in the given order) into a report.
pub fn aggregate(pairs: &[EpisodePair]) -> Result<AggregateReport> {
    let first = pairs.first().ok_or_else(|| Error::config("aggregation needs at least one episode"))?;
    let horizon = first.method.len();
    if pairs.iter().any(|p| p.method.len() != horizon || p.baseline.len() != horizon) {
        return Err(Error::config("episodes have different horizons"));
    }
    let method: Vec<&[f64]> = pairs.iter().map(|p| p.method.losses.as_slice()).collect();
    let baseline: Vec<&[f64]> = pairs.iter().map(|p| p.baseline.losses.as_slice()).collect();
    let (method_loss_mean, method_loss_std) = (0..horizon).map(|t| mean_std(&method, t)).unzip();
    let (baseline_loss_mean, baseline_loss_std) = (0..horizon).map(|t| mean_std(&baseline, t)).unzip();
    Ok(AggregateReport {
        seeds: pairs.iter().map(|p| p.method.seed).collect(),
        method_loss_mean,
        method_loss_std,
        baseline_loss_mean,
        baseline_loss_std,
        method: summarize(&pairs.iter().map(|p| &p.method).collect::<Vec<_>>()),
        baseline: summarize(&pairs.iter().map(|p| &p.baseline).collect::<Vec<_>>()),
    })
}

/// Runs both arms for every seed in parallel and aggregates in seed order.
pub fn run_monte_carlo_pairs(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<EpisodePair>> {
    if seeds.is_empty() {
        return Err(Error::config("Monte-Carlo run needs at least one seed"));
    }
    config.validate()?;
    seeds.par_iter().map(|&s| run_arms(config, s)).collect()
}

/// Runs seeds `0..n_seeds`.
pub fn run_monte_carlo(config: &ExperimentConfig, n_seeds: usize) -> Result<AggregateReport> {
    let seeds: Vec<u64> = (0..n_seeds as u64).collect();
    aggregate(&run_monte_carlo_pairs(config, &seeds)?)
}

impl AggregateReport {
    pub fn arm(&self, arm: Arm) -> &ArmSummary {
        match arm {
            Arm::Method => &self.method,
            Arm::Baseline => &self.baseline,
        }
    }

    pub fn write_aggregate_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "method_loss_mean", "method_loss_std", "baseline_loss_mean", "baseline_loss_std"])?;
        for t in 0..self.method_loss_mean.len() {
            wtr.write_record([
                (t + 1).to_string(),
                self.method_loss_mean[t].to_string(),
                self.method_loss_std[t].to_string(),
                self.baseline_loss_mean[t].to_string(),
                self.baseline_loss_std[t].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["arm", "episodes", "mean_f1", "mean_precision", "mean_recall", "mean_final_p_hat"])?;
        for arm in [Arm::Method, Arm::Baseline] {
            let s = self.arm(arm);
            wtr.write_record([
                arm.name().to_string(),
                s.episodes.to_string(),
                s.mean_f1.to_string(),
                s.mean_precision.to_string(),
                s.mean_recall.to_string(),
                s.mean_final_p_hat.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `aggregate.csv` and `summary.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_aggregate_csv(std::fs::File::create(dir.join("aggregate.csv"))?)?;
        self.write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;

    fn small() -> ExperimentConfig {
        let mut cfg = preset("hazan-siso").unwrap();
        cfg.horizon = 40;
        cfg.filters.k = 6;
        cfg
    }

    #[test]
    fn single_seed_equals_episode() {
        let cfg = small();
        let report = run_monte_carlo(&cfg, 1).unwrap();
        let pair = run_arms(&cfg, 0).unwrap();
        assert_eq!(report.method_loss_mean, pair.method.losses);
        assert!(report.method_loss_std.iter().all(|&s| s == 0.0));
        assert_eq!(report.method.mean_f1, pair.method.metrics().f1);
        assert_eq!(report.baseline.mean_final_p_hat, pair.baseline.final_p_hat());
    }

    #[test]
    fn std_nonnegative_and_order_independent_of_threads() {
        let cfg = small();
        let a = run_monte_carlo(&cfg, 6).unwrap();
        assert!(a.method_loss_std.iter().chain(&a.baseline_loss_std).all(|&s| s >= 0.0));
        let serial: Vec<_> = (0..6).map(|s| run_arms(&cfg, s).unwrap()).collect();
        assert_eq!(aggregate(&serial).unwrap(), a);
    }

    #[test]
    fn arms_share_trajectory() {
        let pair = run_arms(&small(), 4).unwrap();
        assert_eq!(pair.method.trajectory, pair.baseline.trajectory);
        assert_eq!(pair.method.trajectory, simulate_episode(&small(), 4).unwrap());
    }

    #[test]
    fn empty_rejected() {
        assert!(run_monte_carlo(&small(), 0).is_err());
        assert!(aggregate(&[]).is_err());
    }
}
