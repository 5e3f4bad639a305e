use crate::error::{Error, Result};

/// Detection quality against the ground-truth corruption mask.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores per-step anomaly flags against the mask (`true` = corrupted).
///
/// Precision and recall are 0 when their denominators are 0; F1 is their
/// harmonic mean, and 0 when there are no true positives.
pub fn score(flags: &[bool], mask: &[bool]) -> Result<Metrics> {
    if flags.len() != mask.len() {
        return Err(Error::config(format!(
            "score needs equal lengths, got {} flags and {} mask entries",
            flags.len(),
            mask.len()
        )));
    }
    let mut m = Metrics::default();
    for (&f, &truth) in flags.iter().zip(mask) {
        match (f, truth) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn_);
    m.f1 = if m.tp == 0 { 0.0 } else { 2.0 * m.precision * m.recall / (m.precision + m.recall) };
    Ok(m)
}
