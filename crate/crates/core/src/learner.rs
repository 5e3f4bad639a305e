//! Least-squares map from features to outputs over the accepted samples.
//!
//! Minimizes `f(M) = sum_i ||y_i - M x_i||^2 + ridge * ||M||_F^2` through the
//! sufficient statistics `G = sum x_i x_i^T`, `H = sum x_i y_i^T`. The batch
//! solver re-solves `(G + ridge I) M^T = H` exactly; the incremental solver
//! warm-starts from the current `M` and runs cyclic coordinate-descent sweeps.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::featurizer::Featurization;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub ridge: f64,
    /// Keep only the most recent `window` accepted pairs.
    pub window: Option<usize>,
    /// `Some(iters)` switches from exact re-solves to `iters` coordinate
    /// sweeps per accepted sample.
    pub incremental_iters: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { ridge: 1e-6, window: None, incremental_iters: None }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::config("ridge must be finite and >= 0"));
        }
        if self.window == Some(0) {
            return Err(Error::config("window must be positive"));
        }
        if self.incremental_iters == Some(0) {
            return Err(Error::config("incremental iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelState {
    config: LearnerConfig,
    coef: DMatrix<f64>,
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    y_sq: f64,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    accepted: usize,
    diagnostic: Option<String>,
}

impl ModelState {
    /// Zero map from `q` features to `m` outputs.
    pub fn new(q: usize, m: usize, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        if q == 0 || m == 0 {
            return Err(Error::config("learner dimensions must be positive"));
        }
        Ok(ModelState {
            config,
            coef: DMatrix::zeros(m, q),
            gram: DMatrix::zeros(q, q),
            cross: DMatrix::zeros(q, m),
            y_sq: 0.0,
            pairs: VecDeque::new(),
            accepted: 0,
            diagnostic: None,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    /// The current `m x q` map.
    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn set_coef(&mut self, coef: DMatrix<f64>) -> Result<()> {
        if coef.shape() != self.coef.shape() {
            return Err(Error::config("coefficient shape mismatch"));
        }
        self.coef = coef;
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.coef.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.coef.nrows()
    }

    /// Total accepted pairs, including any that have left the window.
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    /// Set when the last solve had to fall back to the pseudoinverse.
    pub fn diagnostic(&self) -> Option<&str> {
        self.diagnostic.as_deref()
    }

    pub fn predict(&self, feat: &Featurization) -> Result<DVector<f64>> {
        if feat.len() != self.feature_dim() {
            return Err(Error::config(format!(
                "feature length {} does not match learner width {}",
                feat.len(),
                self.feature_dim()
            )));
        }
        Ok(&self.coef * &feat.vec)
    }

    fn check_pair(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if x.len() != self.feature_dim() || y.len() != self.output_dim() {
            return Err(Error::config(format!(
                "pair dimensions ({}, {}) do not match learner ({}, {})",
                x.len(),
                y.len(),
                self.feature_dim(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Adds a pair to the statistics without touching `M`.
    pub fn accept(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        self.check_pair(x, y)?;
        self.accepted += 1;
        match self.config.window {
            None => {
                self.gram.ger(1.0, x, x, 1.0);
                self.cross.ger(1.0, x, y, 1.0);
                self.y_sq += y.norm_squared();
            }
            Some(w) => {
                self.pairs.push_back((x.clone(), y.clone()));
                while self.pairs.len() > w {
                    self.pairs.pop_front();
                }
                // Rebuilt from the window rather than downdated, so the
                // statistics carry no cancellation error.
                self.gram.fill(0.0);
                self.cross.fill(0.0);
                self.y_sq = 0.0;
                for (xi, yi) in &self.pairs {
                    self.gram.ger(1.0, xi, xi, 1.0);
                    self.cross.ger(1.0, xi, yi, 1.0);
                    self.y_sq += yi.norm_squared();
                }
            }
        }
        Ok(())
    }

    /// Accepts `pairs` and sets `M` to the exact regularized minimizer.
    pub fn update_batch(&mut self, pairs: &[(DVector<f64>, DVector<f64>)]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::config("update_batch needs at least one pair"));
        }
        for (x, y) in pairs {
            self.accept(x, y)?;
        }
        self.solve()
    }

    /// Accepts one pair and moves `M` by `iters` coordinate sweeps.
    pub fn update_incremental(&mut self, pair: (&DVector<f64>, &DVector<f64>), iters: usize) -> Result<()> {
        if iters == 0 {
            return Err(Error::config("update_incremental needs iters >= 1"));
        }
        self.accept(pair.0, pair.1)?;
        self.coordinate_sweeps(iters);
        Ok(())
    }

    /// Accepts one pair and updates `M` according to the configured solver.
    pub fn learn(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        match self.config.incremental_iters {
            Some(iters) => self.update_incremental((x, y), iters),
            None => {
                self.accept(x, y)?;
                self.solve()
            }
        }
    }

    /// Exact minimizer of the current objective.
    pub fn solve(&mut self) -> Result<()> {
        self.diagnostic = None;
        let q = self.feature_dim();
        let mut lhs = self.gram.clone();
        for i in 0..q {
            lhs[(i, i)] += self.config.ridge;
        }
        let max_diag = (0..q).map(|i| lhs[(i, i)]).fold(0.0, f64::max);
        if let Some(chol) = lhs.clone().cholesky() {
            // A factor with a (numerically) zero pivot means G + lambda I is singular.
            let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
            if min_pivot > f64::EPSILON * q as f64 * max_diag {
                self.coef = chol.solve(&self.cross).transpose();
                return Ok(());
            }
        }
        // Singular normal equations (ridge = 0 and rank-deficient design):
        // G^+ H is the minimum-Frobenius-norm least-squares solution.
        let svd = lhs.svd(true, true);
        let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let tol = f64::EPSILON * q as f64 * max_sv.max(f64::MIN_POSITIVE);
        let pinv = svd.pseudo_inverse(tol).map_err(|e| Error::Numerical(e.to_string()))?;
        self.coef = (pinv * &self.cross).transpose();
        self.diagnostic = Some(format!(
            "rank-deficient normal equations after {} samples; used minimum-norm solution",
            self.accepted
        ));
        Ok(())
    }

    /// `iters` cyclic coordinate-descent sweeps over every entry of `M`.
    /// Each coordinate step is an exact line minimization, so the objective
    /// never increases.
    pub fn coordinate_sweeps(&mut self, iters: usize) {
        let q = self.feature_dim();
        let ridge = self.config.ridge;
        for _ in 0..iters {
            for r in 0..self.output_dim() {
                for j in 0..q {
                    let diag = self.gram[(j, j)] + ridge;
                    if diag <= 0.0 {
                        continue;
                    }
                    let mut dot = 0.0;
                    for l in 0..q {
                        dot += self.gram[(j, l)] * self.coef[(r, l)];
                    }
                    dot += ridge * self.coef[(r, j)];
                    self.coef[(r, j)] += (self.cross[(j, r)] - dot) / diag;
                }
            }
        }
    }

    /// `f(M) + ridge ||M||_F^2` at an arbitrary `M`, from the statistics.
    pub fn objective_at(&self, coef: &DMatrix<f64>) -> f64 {
        let quad = (coef * &self.gram).component_mul(coef).sum();
        let lin = (coef * &self.cross).trace();
        quad - 2.0 * lin + self.y_sq + self.config.ridge * coef.norm_squared()
    }

    pub fn objective(&self) -> f64 {
        self.objective_at(&self.coef)
    }

    /// Analytic gradient `2 (M G - H^T) + 2 ridge M` at `coef`.
    pub fn gradient_at(&self, coef: &DMatrix<f64>) -> DMatrix<f64> {
        (coef * &self.gram - self.cross.transpose()) * 2.0 + coef * (2.0 * self.config.ridge)
    }

    /// Writes `M` as a headerless CSV matrix, one output per row.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for r in 0..self.output_dim() {
            wtr.write_record(self.coef.row(r).iter().map(f64::to_string))?;
        }
        wtr.flush()?;
        Ok(())
    }
}
