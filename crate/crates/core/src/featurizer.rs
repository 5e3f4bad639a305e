//! Overparametrised regression vector for the improper LDS learner.
//!
//! Layout, for `n` inputs, `m` outputs and `k` filters:
//!
//! ```text
//! [ conv_1 (n) | ... | conv_k (n) | x_t (n) | x_{t-1} (n) | y_prev (m) ]
//! ```
//!
//! with `conv_j = sigma_j^{1/4} * sum_{u=1}^{min(t, T_f)} phi_j(u) x_{t-u+1}`,
//! i.e. the first filter tap weights the most recent input.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spectral::FilterBank;

#[derive(Debug, Clone, PartialEq)]
pub struct Featurization {
    pub vec: DVector<f64>,
}

impl Featurization {
    pub fn len(&self) -> usize {
        self.vec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vec.is_empty()
    }
}

/// Feature dimension `n (k + 2) + m`.
pub fn feature_dim(n: usize, m: usize, k: usize) -> usize {
    n * (k + 2) + m
}

/// Builds the features for step `t` (1-indexed) from `x_hist = x_1..x_t`
/// and the sanitized previous output.
pub fn featurize(
    x_hist: &[DVector<f64>],
    y_prev: &DVector<f64>,
    bank: &FilterBank,
    t: usize,
) -> Result<Featurization> {
    if bank.horizon() == 0 {
        return Err(Error::config("filter bank has zero horizon"));
    }
    if t == 0 || x_hist.len() != t {
        return Err(Error::config(format!(
            "featurize at t={t} needs exactly t inputs, got {}",
            x_hist.len()
        )));
    }
    let n = x_hist[t - 1].len();
    if x_hist.iter().any(|x| x.len() != n) {
        return Err(Error::config("input history has inconsistent dimensions"));
    }
    let m = y_prev.len();
    let k = bank.k();
    let mut vec = DVector::zeros(feature_dim(n, m, k));

    let taps = t.min(bank.horizon());
    for j in 0..k {
        let phi = bank.phi(j);
        let weight = bank.sigma()[j].max(0.0).powf(0.25);
        let mut acc = DVector::<f64>::zeros(n);
        for u in 0..taps {
            acc.axpy(phi[u], &x_hist[t - 1 - u], 1.0);
        }
        vec.rows_mut(j * n, n).copy_from(&(acc * weight));
    }
    let base = k * n;
    vec.rows_mut(base, n).copy_from(&x_hist[t - 1]);
    if t >= 2 {
        vec.rows_mut(base + n, n).copy_from(&x_hist[t - 2]);
    }
    vec.rows_mut(base + 2 * n, m).copy_from(y_prev);
    Ok(Featurization { vec })
}
