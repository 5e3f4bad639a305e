//! Corrupted linear dynamical system: simulation and parameter checks.
//!
//! ```text
//! h_k = A h_{k-1} + B x_k + eta_k
//! y_k = xi_k                      with probability p
//!       C h_k + D x_k + zeta_k    otherwise
//! ```

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrices of a linear dynamical system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl SystemSpec {
    /// Validates that `a` is `d x d`, `b` is `d x n`, `c` is `m x d`,
    /// `d` is `m x n`, all dimensions positive and all entries finite.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let sd = a.nrows();
        if sd == 0 || a.ncols() != sd {
            return Err(Error::config(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = b.ncols();
        let m = c.nrows();
        if n == 0 || m == 0 {
            return Err(Error::config("input and output dimensions must be positive"));
        }
        if b.nrows() != sd {
            return Err(Error::config(format!("B must be {sd}x{n}, got {}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != sd {
            return Err(Error::config(format!("C must be {m}x{sd}, got {}x{}", c.nrows(), c.ncols())));
        }
        if d.nrows() != m || d.ncols() != n {
            return Err(Error::config(format!("D must be {m}x{n}, got {}x{}", d.nrows(), d.ncols())));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("{name} has non-finite entries")));
            }
        }
        Ok(SystemSpec { a, b, c, d })
    }

    /// Builds a system from row-major nested vectors.
    pub fn from_rows(
        a: &[Vec<f64>],
        b: &[Vec<f64>],
        c: &[Vec<f64>],
        d: &[Vec<f64>],
    ) -> Result<Self> {
        Self::new(mat_from_rows(a)?, mat_from_rows(b)?, mat_from_rows(c)?, mat_from_rows(d)?)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Same system with `B` replaced; dimensions must match.
    pub fn with_b(&self, b: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b, self.c.clone(), self.d.clone())
    }
}

pub(crate) fn mat_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::config("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// One noiseless-or-noisy step of the system dynamics.
///
/// Returns `(h, y_clean)` with `h = A h_prev + B x + eta` and
/// `y_clean = C h + D x + zeta`.
pub fn step(
    h_prev: &DVector<f64>,
    x: &DVector<f64>,
    eta: &DVector<f64>,
    zeta: &DVector<f64>,
    spec: &SystemSpec,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (sd, n, m) = (spec.state_dim(), spec.input_dim(), spec.output_dim());
    if h_prev.len() != sd || eta.len() != sd || x.len() != n || zeta.len() != m {
        return Err(Error::config(format!(
            "step dimension mismatch: h {} eta {} (want {sd}), x {} (want {n}), zeta {} (want {m})",
            h_prev.len(),
            eta.len(),
            x.len(),
            zeta.len()
        )));
    }
    let h = &spec.a * h_prev + &spec.b * x + eta;
    let y = &spec.c * &h + &spec.d * x + zeta;
    Ok((h, y))
}

/// Zero-mean per-coordinate noise family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Uniform on `[-std * sqrt(3), std * sqrt(3)]`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDist {
    pub family: NoiseFamily,
    pub std: f64,
}

impl NoiseDist {
    pub fn gaussian(std: f64) -> Self {
        NoiseDist { family: NoiseFamily::Gaussian, std }
    }

    pub fn none() -> Self {
        Self::gaussian(0.0)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.std * z
            }
            NoiseFamily::Uniform => {
                let half = self.std * 3f64.sqrt();
                rng.random_range(-1.0..=1.0) * half
            }
        }
    }
}

/// Process and measurement noise with a cumulative squared-norm budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub eta: NoiseDist,
    pub zeta: NoiseDist,
    /// Episodes abort once `sum ||eta_k||^2 + ||zeta_k||^2` reaches this value.
    pub budget: f64,
}

impl NoiseModel {
    pub fn gaussian(eta_std: f64, zeta_std: f64) -> Self {
        NoiseModel {
            eta: NoiseDist::gaussian(eta_std),
            zeta: NoiseDist::gaussian(zeta_std),
            budget: f64::INFINITY,
        }
    }

    pub fn none() -> Self {
        Self::gaussian(0.0, 0.0)
    }

    fn validate(&self) -> Result<()> {
        for (name, dist) in [("eta", self.eta), ("zeta", self.zeta)] {
            if !(dist.std.is_finite() && dist.std >= 0.0) {
                return Err(Error::config(format!("{name} std must be finite and >= 0")));
            }
        }
        if self.budget.is_nan() || self.budget < 0.0 {
            return Err(Error::config("noise budget must be >= 0"));
        }
        Ok(())
    }
}

/// Distribution of the replacement samples `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiDist {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
    /// The clean output shifted by `delta` in every coordinate.
    ConstantOffset { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionModel {
    pub p: f64,
    pub xi: XiDist,
}

impl CorruptionModel {
    pub fn none() -> Self {
        CorruptionModel { p: 0.0, xi: XiDist::ConstantOffset { delta: 0.0 } }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::config(format!("corruption probability must be in [0, 1), got {}", self.p)));
        }
        let ok = match self.xi {
            XiDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            XiDist::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            XiDist::ConstantOffset { delta } => delta.is_finite(),
        };
        if !ok {
            return Err(Error::config(format!("invalid xi distribution {:?}", self.xi)));
        }
        Ok(())
    }

    fn sample_xi<R: Rng>(&self, rng: &mut R, clean: &DVector<f64>) -> DVector<f64> {
        match self.xi {
            XiDist::Uniform { low, high } => {
                DVector::from_fn(clean.len(), |_, _| low + (high - low) * rng.random::<f64>())
            }
            XiDist::Gaussian { mean, std } => DVector::from_fn(clean.len(), |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }),
            XiDist::ConstantOffset { delta } => clean.add_scalar(delta),
        }
    }
}

/// How the exogenous inputs `x_t` are generated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InputGen {
    /// i.i.d. standard normal per coordinate.
    #[default]
    Gaussian,
    /// i.i.d. uniform on `[-1, 1]` per coordinate.
    Uniform,
    /// `sin(2 pi t / period + j pi / n)` for coordinate `j`.
    Sinusoid { period: f64 },
}

/// Per-step input-matrix schedule; the simulator evaluates `B_k` every step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BSchedule {
    #[default]
    Constant,
    /// Every entry of `B_k` equals `offset + sin(pi (k - start) / period)`
    /// for `k >= start`; before that `B_k` is the base `B`.
    Sinusoid { start: usize, offset: f64, period: f64 },
}

/// A possibly time-varying system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSchedule {
    pub base: SystemSpec,
    pub b: BSchedule,
}

impl SystemSchedule {
    pub fn constant(spec: SystemSpec) -> Self {
        SystemSchedule { base: spec, b: BSchedule::Constant }
    }

    /// `B_k` for the 1-indexed step `k`.
    pub fn b_at(&self, k: usize) -> DMatrix<f64> {
        match self.b {
            BSchedule::Constant => self.base.b.clone(),
            BSchedule::Sinusoid { start, offset, period } => {
                if k < start {
                    self.base.b.clone()
                } else {
                    let v = offset + (std::f64::consts::PI * (k - start) as f64 / period).sin();
                    DMatrix::from_element(self.base.b.nrows(), self.base.b.ncols(), v)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let BSchedule::Sinusoid { offset, period, .. } = self.b {
            if !offset.is_finite() || !period.is_finite() || period == 0.0 {
                return Err(Error::config("sinusoid schedule needs finite offset and non-zero period"));
            }
        }
        Ok(())
    }
}

/// A simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_1..x_T`.
    pub inputs: Vec<DVector<f64>>,
    /// `y_1..y_T` as seen by the learner.
    pub observed: Vec<DVector<f64>>,
    /// Uncorrupted `C h_k + D x_k + zeta_k`.
    pub clean: Vec<DVector<f64>>,
    /// `true` where the observation was replaced by `xi`.
    pub mask: Vec<bool>,
    /// `h_0..h_T` (length `T + 1`).
    pub hidden: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, DVector::len)
    }

    pub fn output_dim(&self) -> usize {
        self.observed.first().map_or(0, DVector::len)
    }

    /// Writes `t, x_1..x_n, y_observed_1..m, y_clean_1..m, corrupted`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let (n, m) = (self.input_dim(), self.output_dim());
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("y_observed_{i}")));
        header.extend((1..=m).map(|i| format!("y_clean_{i}")));
        header.push("corrupted".into());
        wtr.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(self.inputs[t].iter().map(f64::to_string));
            row.extend(self.observed[t].iter().map(f64::to_string));
            row.extend(self.clean[t].iter().map(f64::to_string));
            row.push(u8::from(self.mask[t]).to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

// Independent ChaCha streams so that, e.g., changing p leaves the clean
// trajectory untouched.
const STREAM_INPUT: u64 = 1;
const STREAM_ETA: u64 = 2;
const STREAM_ZETA: u64 = 3;
const STREAM_CORRUPT_FLAG: u64 = 4;
const STREAM_CORRUPT_VALUE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Options of [`simulate_schedule`] beyond the models themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub input_gen: InputGen,
    pub horizon: usize,
    /// Initial hidden state; zero when `None`.
    pub h0: Option<DVector<f64>>,
}

/// Simulates a time-invariant system from `h_0 = 0`.
pub fn simulate(
    spec: &SystemSpec,
    noise: &NoiseModel,
    corruption: &CorruptionModel,
    input_gen: InputGen,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let opts = SimOptions { input_gen, horizon, h0: None };
    simulate_schedule(&SystemSchedule::constant(spec.clone()), noise, corruption, &opts, seed)
}

/// Simulates `horizon` steps. Fully deterministic in `seed`.
pub fn simulate_schedule(
    system: &SystemSchedule,
    noise: &NoiseModel,
    corruption: &CorruptionModel,
    opts: &SimOptions,
    seed: u64,
) -> Result<Trajectory> {
    let horizon = opts.horizon;
    if horizon == 0 {
        return Err(Error::config("horizon must be >= 1"));
    }
    noise.validate()?;
    corruption.validate()?;
    system.validate()?;

    let spec = &system.base;
    let (sd, n, m) = (spec.state_dim(), spec.input_dim(), spec.output_dim());
    let h0 = match &opts.h0 {
        Some(h) if h.len() != sd => {
            return Err(Error::config(format!("h0 has length {}, expected {sd}", h.len())))
        }
        Some(h) => h.clone(),
        None => DVector::zeros(sd),
    };
    if let InputGen::Sinusoid { period } = opts.input_gen {
        if !period.is_finite() || period == 0.0 {
            return Err(Error::config("sinusoid input needs a finite non-zero period"));
        }
    }

    let mut rng_x = stream(seed, STREAM_INPUT);
    let mut rng_eta = stream(seed, STREAM_ETA);
    let mut rng_zeta = stream(seed, STREAM_ZETA);
    let mut rng_flag = stream(seed, STREAM_CORRUPT_FLAG);
    let mut rng_xi = stream(seed, STREAM_CORRUPT_VALUE);

    let mut traj = Trajectory {
        inputs: Vec::with_capacity(horizon),
        observed: Vec::with_capacity(horizon),
        clean: Vec::with_capacity(horizon),
        mask: Vec::with_capacity(horizon),
        hidden: Vec::with_capacity(horizon + 1),
    };
    traj.hidden.push(h0);

    let time_varying = !matches!(system.b, BSchedule::Constant);
    let mut spent = 0.0;
    for k in 1..=horizon {
        let x = match opts.input_gen {
            InputGen::Gaussian => DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng_x)),
            InputGen::Uniform => DVector::from_fn(n, |_, _| rng_x.random_range(-1.0..=1.0)),
            InputGen::Sinusoid { period } => DVector::from_fn(n, |j, _| {
                let phase = std::f64::consts::PI * j as f64 / n as f64;
                (std::f64::consts::TAU * k as f64 / period + phase).sin()
            }),
        };
        let eta = DVector::from_fn(sd, |_, _| noise.eta.sample(&mut rng_eta));
        let zeta = DVector::from_fn(m, |_, _| noise.zeta.sample(&mut rng_zeta));
        spent += eta.norm_squared() + zeta.norm_squared();
        if spent >= noise.budget {
            return Err(Error::NoiseBudget { step: k, cumulative: spent, budget: noise.budget });
        }

        let h_prev = traj.hidden.last().expect("h0 pushed above");
        let (h, y_clean) = if time_varying {
            step(h_prev, &x, &eta, &zeta, &spec.with_b(system.b_at(k))?)?
        } else {
            step(h_prev, &x, &eta, &zeta, spec)?
        };

        let u: f64 = rng_flag.random();
        let corrupted = u < corruption.p;
        // Drawn every step so xi_k does not depend on earlier flags.
        let xi = corruption.sample_xi(&mut rng_xi, &y_clean);
        let observed = if corrupted { xi } else { y_clean.clone() };

        traj.inputs.push(x);
        traj.observed.push(observed);
        traj.clean.push(y_clean);
        traj.mask.push(corrupted);
        traj.hidden.push(h);
    }
    Ok(traj)
}

/// Bounds the system is checked against.
///
/// `r_1`, `r_inf` and `tau` describe the phase polynomial of the
/// eigenvalues; they are carried as metadata and never evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBounds {
    pub r_x: f64,
    pub r_y: f64,
    pub r_psi: f64,
    pub r_theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
}

impl Default for AssumptionBounds {
    fn default() -> Self {
        AssumptionBounds {
            r_x: f64::INFINITY,
            r_y: f64::INFINITY,
            r_psi: f64::INFINITY,
            r_theta: f64::INFINITY,
            r_1: None,
            r_inf: None,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Largest singular value of `A`.
    pub spectral_radius: f64,
    /// `||Psi||_F ||Psi^-1||_F` for `A = Psi Lambda Psi^-1` with unit-norm
    /// eigenvector columns; infinite when `A` is not diagonalizable.
    pub r_psi: f64,
    /// 2-norm condition number of `Psi` (infinite when singular).
    pub psi_condition: f64,
    /// `max(||B||_2, ||C||_2, ||D||_2)`.
    pub r_theta: f64,
    pub lyapunov_ok: bool,
    /// Eigendecomposition succeeded and `r_psi <= bounds.r_psi`.
    pub diagonalizable_ok: bool,
    pub theta_ok: bool,
    pub bounds: AssumptionBounds,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Evaluates the checkable stability and conditioning assumptions of `spec`.
pub fn check_assumptions(spec: &SystemSpec, bounds: &AssumptionBounds) -> AssumptionReport {
    let spectral_radius = spectral_norm(&spec.a);
    let r_theta = spectral_norm(&spec.b).max(spectral_norm(&spec.c)).max(spectral_norm(&spec.d));
    let (r_psi, psi_condition) = match eigenvector_matrix(&spec.a) {
        Some(psi) => {
            let cond = {
                let sv = psi.singular_values();
                let max = sv.iter().copied().fold(0.0, f64::max);
                let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
                if min > 0.0 {
                    max / min
                } else {
                    f64::INFINITY
                }
            };
            match psi.clone().try_inverse() {
                Some(inv) => (psi.norm() * inv.norm(), cond),
                None => (f64::INFINITY, f64::INFINITY),
            }
        }
        None => (f64::INFINITY, f64::INFINITY),
    };
    AssumptionReport {
        spectral_radius,
        r_psi,
        psi_condition,
        r_theta,
        lyapunov_ok: spectral_radius <= 1.0,
        diagonalizable_ok: r_psi.is_finite() && r_psi <= bounds.r_psi,
        theta_ok: r_theta <= bounds.r_theta,
        bounds: *bounds,
    }
}

/// Unit-norm eigenvector matrix of `a`, or `None` when `a` is (numerically)
/// defective.
fn eigenvector_matrix(a: &DMatrix<f64>) -> Option<DMatrix<Complex<f64>>> {
    let d = a.nrows();
    let scale = spectral_norm(a).max(1.0);
    let mut eigs: Vec<Complex<f64>> = a.clone().complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    // Group numerically coincident eigenvalues.
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for ev in eigs {
        match clusters.iter_mut().find(|(c, _)| (c - ev).norm() <= cluster_tol) {
            Some((_, count)) => *count += 1,
            None => clusters.push((ev, 1)),
        }
    }

    let ac = a.map(|v| Complex::new(v, 0.0));
    let null_tol = 1e-8 * scale;
    let mut columns: Vec<DVector<Complex<f64>>> = Vec::with_capacity(d);
    for (lambda, multiplicity) in clusters {
        let shifted = &ac - DMatrix::<Complex<f64>>::identity(d, d) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let nullity = idx.iter().filter(|&&i| svd.singular_values[i] <= null_tol).count();
        if nullity < multiplicity {
            return None;
        }
        for &i in idx.iter().take(multiplicity) {
            let v = v_t.row(i).adjoint();
            let norm = v.norm();
            columns.push(v / Complex::new(norm, 0.0));
        }
    }
    if columns.len() != d {
        return None;
    }
    Some(DMatrix::from_columns(&columns))
}

/// Largest observed `||x_t||` and `||y_t||` against the input/output bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalBoundsReport {
    pub max_input_norm: f64,
    pub max_output_norm: f64,
    pub inputs_ok: bool,
    pub outputs_ok: bool,
}

pub fn check_signal_bounds(traj: &Trajectory, bounds: &AssumptionBounds) -> SignalBoundsReport {
    let max_input_norm = traj.inputs.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let max_output_norm = traj.observed.iter().map(|y| y.norm()).fold(0.0, f64::max);
    SignalBoundsReport {
        max_input_norm,
        max_output_norm,
        inputs_ok: max_input_norm <= bounds.r_x,
        outputs_ok: max_output_norm <= bounds.r_y,
    }
}
