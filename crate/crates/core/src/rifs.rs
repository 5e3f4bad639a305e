//! Scalar (recurrent) iterated function systems.
//!
//! A RIFS applies one of `K` maps per step; which one is chosen by a Markov
//! chain over map indices with row-stochastic transition matrix `P` (an
//! ordinary IFS is the case where every row of `P` is the same). It converges
//! in distribution when it is contractive on average,
//! `sum_i m(i) log L_i < 0`, with `m` the stationary distribution of `P` and
//! `L_i` the Lipschitz constants.
//!
//! The coefficient `c` of the ADMI detector is such a system with maps
//! `c -> beta c` and `c -> max(c_min, c - alpha)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything with a known global Lipschitz constant on `(R, |.|)`.
pub trait LipschitzMap {
    fn apply(&self, x: f64) -> f64;
    fn lipschitz(&self) -> f64;
}

/// `x -> scale * x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: f64,
    pub offset: f64,
}

impl LipschitzMap for AffineMap {
    fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    fn lipschitz(&self) -> f64 {
        self.scale.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RifsMap {
    Affine { scale: f64, offset: f64 },
    /// `x -> max(floor, scale * x + offset)`; clamping keeps the constant `|scale|`.
    Clamped { scale: f64, offset: f64, floor: f64 },
}

impl RifsMap {
    pub fn affine(scale: f64, offset: f64) -> Self {
        RifsMap::Affine { scale, offset }
    }

    /// The two coefficient updates of the ADMI detector.
    pub fn admi_pair(alpha: f64, beta: f64, c_min: Option<f64>) -> [RifsMap; 2] {
        let decrease = match c_min {
            Some(floor) => RifsMap::Clamped { scale: 1.0, offset: -alpha, floor },
            None => RifsMap::affine(1.0, -alpha),
        };
        [RifsMap::affine(beta, 0.0), decrease]
    }
}

impl LipschitzMap for RifsMap {
    fn apply(&self, x: f64) -> f64 {
        match *self {
            RifsMap::Affine { scale, offset } => scale * x + offset,
            RifsMap::Clamped { scale, offset, floor } => (scale * x + offset).max(floor),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            RifsMap::Affine { scale, .. } | RifsMap::Clamped { scale, .. } => scale.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RifsSpec {
    pub maps: Vec<RifsMap>,
    /// Row-stochastic `K x K` selector chain.
    pub transition: Vec<Vec<f64>>,
    pub x0: f64,
    pub i0: usize,
}

impl RifsSpec {
    /// Maps chosen i.i.d. with probabilities `weights`.
    pub fn iid(maps: Vec<RifsMap>, weights: &[f64], x0: f64) -> Self {
        let transition = vec![weights.to_vec(); weights.len()];
        RifsSpec { maps, transition, x0, i0: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.maps.len();
        if k == 0 {
            return Err(Error::config("RIFS needs at least one map"));
        }
        validate_transition(&self.transition)?;
        if self.transition.len() != k {
            return Err(Error::config(format!("transition matrix is {0}x{0} but there are {k} maps", self.transition.len())));
        }
        if self.i0 >= k {
            return Err(Error::config(format!("initial index {} out of range", self.i0)));
        }
        if !self.x0.is_finite() {
            return Err(Error::config("x0 must be finite"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        // `version` is checked separately so the body can be parsed with
        // `deny_unknown_fields`.
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let version = table
            .remove("version")
            .and_then(|v| v.as_integer())
            .ok_or_else(|| Error::Parse("RIFS spec needs an integer `version`".into()))?;
        if version != 1 {
            return Err(Error::Parse(format!("unsupported RIFS spec version {version}")));
        }
        let spec: RifsSpec = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Parse(e.to_string()))?;
        table.insert("version".into(), toml::Value::Integer(1));
        toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn validate_transition(p: &[Vec<f64>]) -> Result<()> {
    let k = p.len();
    if k == 0 {
        return Err(Error::config("transition matrix is empty"));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != k {
            return Err(Error::config(format!("transition row {i} has {} entries, expected {k}", row.len())));
        }
        if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::config(format!("transition row {i} has negative or non-finite entries")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("transition row {i} sums to {s}")));
        }
    }
    Ok(())
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

fn row_times(m: &[f64], p: &[Vec<f64>]) -> Vec<f64> {
    let k = m.len();
    (0..k).map(|j| (0..k).map(|i| m[i] * p[i][j]).sum()).collect()
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `true` if some power `P^s`, `s <= K^2`, is entrywise positive
/// (irreducible and aperiodic).
pub fn is_primitive(p: &[Vec<f64>]) -> bool {
    let k = p.len();
    let base: Vec<Vec<bool>> = p.iter().map(|row| row.iter().map(|&v| v > 0.0).collect()).collect();
    let mut pow = base.clone();
    for _ in 0..k * k {
        if pow.iter().all(|row| row.iter().all(|&b| b)) {
            return true;
        }
        pow = (0..k)
            .map(|i| (0..k).map(|j| (0..k).any(|l| pow[i][l] && base[l][j])).collect())
            .collect();
    }
    false
}

const STATIONARY_TOL: f64 = 1e-12;

/// Stationary distribution `m = m P` of a primitive chain, from the uniform
/// start vector.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = p.len();
    stationary_distribution_from(p, &vec![1.0 / k.max(1) as f64; k])
}

/// As [`stationary_distribution`], starting power iteration from `start`
/// (any non-negative vector with positive sum).
pub fn stationary_distribution_from(p: &[Vec<f64>], start: &[f64]) -> Result<Vec<f64>> {
    validate_transition(p)?;
    let k = p.len();
    if start.len() != k || start.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::config("start vector must be non-negative with one entry per state"));
    }
    let total: f64 = start.iter().sum();
    if total <= 0.0 {
        return Err(Error::config("start vector must have positive mass"));
    }
    if !is_primitive(p) {
        return Err(Error::NotErgodic("transition matrix is reducible or periodic".into()));
    }

    let normalize = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let mut m = normalize(start.to_vec());
    // Power iteration with a stride P^(2^s) that is squared every round.
    // Convergence is judged against the stride as well as P: for a slowly
    // mixing chain the one-step residual is tiny long before m is accurate.
    let mut stride = p.to_vec();
    for _ in 0..64 {
        for _ in 0..4 {
            m = normalize(row_times(&m, &stride));
        }
        let far = l1_diff(&row_times(&m, &stride), &m);
        let near = l1_diff(&row_times(&m, p), &m);
        if far <= STATIONARY_TOL && near <= STATIONARY_TOL {
            return Ok(m);
        }
        stride = mat_mul(&stride, &stride).into_iter().map(normalize).collect();
    }
    Err(Error::Numerical("power iteration did not reach the stationary residual".into()))
}

/// `sum_i m(i) log L_i`; negative means contractive on average. Returns
/// `-inf` when a map with positive stationary weight has `L_i = 0`.
pub fn average_contractivity(spec: &RifsSpec) -> Result<f64> {
    spec.validate()?;
    let m = stationary_distribution(&spec.transition)?;
    let mut acc = 0.0;
    for (mi, map) in m.iter().zip(&spec.maps) {
        if *mi == 0.0 {
            continue;
        }
        let l = map.lipschitz();
        if l == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += mi * l.ln();
    }
    Ok(acc)
}

/// One sample path `(x_k, i_k)` for `k = 0..=steps`; entry 0 is `(x0, i0)`.
pub fn simulate(spec: &RifsSpec, steps: usize, seed: u64) -> Result<Vec<(f64, usize)>> {
    spec.validate()?;
    if steps == 0 {
        return Err(Error::config("RIFS simulation needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(steps + 1);
    let (mut x, mut i) = (spec.x0, spec.i0);
    path.push((x, i));
    for _ in 0..steps {
        i = sample_index(&spec.transition[i], rng.random::<f64>());
        x = spec.maps[i].apply(x);
        path.push((x, i));
    }
    Ok(path)
}

fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in row.iter().enumerate() {
        if w > 0.0 {
            last_positive = j;
            acc += w;
            if u < acc {
                return j;
            }
        }
    }
    // Rounding left the cumulative sum just below u.
    last_positive
}

/// Writes `k,x_k,i_k` rows.
pub fn write_path_csv<W: std::io::Write>(path: &[(f64, usize)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "x_k", "i_k"])?;
    for (k, (x, i)) in path.iter().enumerate() {
        wtr.write_record([k.to_string(), x.to_string(), i.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::config("ks_distance needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::config("ks_distance samples contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}
