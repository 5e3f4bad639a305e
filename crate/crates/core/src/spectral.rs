//! Wave filters: top eigenpairs of the Hankel matrix
//! `Z_ij = 2 / ((i + j)^3 - (i + j))` (1-indexed).
//!
//! The matrix depends only on the horizon, so banks are memoized per
//! `(horizon, k)` and can be persisted to a small CSV cache file:
//!
//! ```text
//! version,horizon,k
//! 1,<T_f>,<k>
//! sigma_1,phi_1(1),...,phi_1(T_f)
//! ...
//! sigma_k,phi_k(1),...,phi_k(T_f)
//! ```
//!
//! Floats are written in shortest round-trip form, so a reloaded bank is
//! bit-identical to the one that was saved.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::eigen::symmetric_eigen_top;
use crate::error::{Error, Result};

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// `T_f x T_f` Hankel matrix with entries `2 / ((i+j)^3 - (i+j))`.
pub fn hankel_matrix(horizon: usize) -> DMatrix<f64> {
    DMatrix::from_fn(horizon, horizon, |i, j| {
        let s = (i + j + 2) as f64;
        2.0 / (s * s * s - s)
    })
}

/// Top-`k` eigenpairs of a fixed Hankel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    horizon: usize,
    sigma: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

impl FilterBank {
    /// Builds the bank for `horizon` with `k` filters.
    pub fn build(horizon: usize, k: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("filter horizon must be >= 1"));
        }
        top_eigenpairs(&hankel_matrix(horizon), k)
    }

    /// Process-wide memoized [`FilterBank::build`].
    pub fn shared(horizon: usize, k: usize) -> Result<Arc<Self>> {
        Self::shared_cached(None, horizon, k)
    }

    /// Like [`FilterBank::shared`], but a miss goes through
    /// [`FilterBank::load_or_build`] when `path` is given.
    pub fn shared_cached(path: Option<&Path>, horizon: usize, k: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<FilterBank>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        // Held across the build so concurrent episodes build each bank once.
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(bank) = guard.get(&(horizon, k)) {
            return Ok(Arc::clone(bank));
        }
        let bank = Arc::new(match path {
            Some(p) => Self::load_or_build(p, horizon, k)?,
            None => Self::build(horizon, k)?,
        });
        guard.insert((horizon, k), Arc::clone(&bank));
        Ok(bank)
    }

    /// Loads the bank from `path` if it holds `(horizon, k)`, otherwise
    /// builds it and writes the file.
    pub fn load_or_build(path: &Path, horizon: usize, k: usize) -> Result<Self> {
        if path.exists() {
            let bank = Self::read_csv(std::fs::File::open(path)?)?;
            if bank.horizon == horizon && bank.k() == k {
                return Ok(bank);
            }
        }
        let bank = Self::build(horizon, k)?;
        bank.write_csv(std::fs::File::create(path)?)?;
        Ok(bank)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// Eigenvalues, descending.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Unit eigenvector `j` (0-indexed) of length `horizon`.
    pub fn phi(&self, j: usize) -> &[f64] {
        &self.phi[j]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        wtr.write_record(["version", "horizon", "k"])?;
        wtr.write_record([
            CACHE_FORMAT_VERSION.to_string(),
            self.horizon.to_string(),
            self.k().to_string(),
        ])?;
        for (s, phi) in self.sigma.iter().zip(&self.phi) {
            let mut row = Vec::with_capacity(self.horizon + 1);
            row.push(s.to_string());
            row.extend(phi.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut records = rdr.records();
        let mut next = |what: &str| -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| Error::Parse(format!("filter cache truncated before {what}")))?
                .map_err(Error::from)
        };
        let header = next("header")?;
        if header.iter().collect::<Vec<_>>() != ["version", "horizon", "k"] {
            return Err(Error::Parse("filter cache has an unexpected header".into()));
        }
        let meta = next("metadata")?;
        let field = |i: usize| -> Result<usize> {
            meta.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad filter cache metadata field {i}")))
        };
        let version = field(0)?;
        if version != CACHE_FORMAT_VERSION as usize {
            return Err(Error::Parse(format!("unsupported filter cache version {version}")));
        }
        let (horizon, k) = (field(1)?, field(2)?);
        let mut sigma = Vec::with_capacity(k);
        let mut phi = Vec::with_capacity(k);
        for j in 0..k {
            let row = next(&format!("filter {j}"))?;
            if row.len() != horizon + 1 {
                return Err(Error::Parse(format!(
                    "filter row {j} has {} fields, expected {}",
                    row.len(),
                    horizon + 1
                )));
            }
            let vals: Vec<f64> = row
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("filter row {j}: {e}"))))
                .collect::<Result<_>>()?;
            sigma.push(vals[0]);
            phi.push(vals[1..].to_vec());
        }
        Ok(FilterBank { horizon, sigma, phi })
    }
}

/// Top-`k` eigenpairs of the symmetric matrix `z`, descending, with each
/// eigenvector's first entry above `1e-12` in magnitude made positive.
pub fn top_eigenpairs(z: &DMatrix<f64>, k: usize) -> Result<FilterBank> {
    let n = z.nrows();
    if n == 0 || z.ncols() != n {
        return Err(Error::config("top_eigenpairs needs a non-empty square matrix"));
    }
    if k == 0 || k > n {
        return Err(Error::config(format!("filter count k={k} must be in 1..={n}")));
    }
    let scale = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (z[(i, j)] - z[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::config("matrix is not symmetric"));
            }
        }
    }
    // Column-major storage of a symmetric matrix reads the same row-major.
    let eig = symmetric_eigen_top(z.as_slice(), n, k)?;

    let mut sigma = Vec::with_capacity(k);
    let mut phi = Vec::with_capacity(k);
    for j in 0..k {
        let v = eig.vector(j).to_vec();
        let lambda = eig.values[j];
        let resid = (z * nalgebra::DVector::from_column_slice(&v) - nalgebra::DVector::from_column_slice(&v) * lambda)
            .norm();
        if resid > 1e-8 {
            return Err(Error::Numerical(format!("eigenpair {j} residual {resid:e} exceeds 1e-8")));
        }
        sigma.push(lambda);
        phi.push(v);
    }
    Ok(FilterBank { horizon: n, sigma, phi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hankel_small_cases() {
        let z1 = hankel_matrix(1);
        assert_eq!(z1[(0, 0)], 2.0 / 6.0);
        let z2 = hankel_matrix(2);
        assert!((z2[(0, 0)] - 1.0 / 3.0).abs() < 1e-16);
        assert!((z2[(0, 1)] - 1.0 / 12.0).abs() < 1e-16);
        assert!((z2[(1, 0)] - 1.0 / 12.0).abs() < 1e-16);
        assert!((z2[(1, 1)] - 1.0 / 30.0).abs() < 1e-16);
    }

    #[test]
    fn hankel_is_symmetric() {
        let z = hankel_matrix(40);
        assert_eq!(z, z.transpose());
    }

    #[test]
    fn diagonal_top_two() {
        let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let bank = top_eigenpairs(&z, 2).unwrap();
        assert_eq!(bank.sigma(), &[3.0, 2.0]);
        assert_eq!(bank.phi(0), &[1.0, 0.0, 0.0]);
        assert_eq!(bank.phi(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_single_filter() {
        let z = DMatrix::identity(7, 7);
        let bank = top_eigenpairs(&z, 1).unwrap();
        assert_eq!(bank.sigma(), &[1.0]);
        let v = nalgebra::DVector::from_column_slice(bank.phi(0));
        assert_eq!((&z * &v - &v).norm(), 0.0);
    }

    #[test]
    fn k_larger_than_horizon_rejected() {
        assert!(matches!(FilterBank::build(3, 4), Err(Error::Config(_))));
        assert!(matches!(FilterBank::build(3, 0), Err(Error::Config(_))));
        assert!(matches!(FilterBank::build(0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn asymmetric_rejected() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(top_eigenpairs(&z, 1).is_err());
    }

    #[test]
    fn sign_convention_first_entry_positive() {
        let bank = FilterBank::build(64, 10).unwrap();
        for j in 0..10 {
            let first = bank.phi(j).iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let bank = FilterBank::build(30, 5).unwrap();
        let mut buf = Vec::new();
        bank.write_csv(&mut buf).unwrap();
        let back = FilterBank::read_csv(buf.as_slice()).unwrap();
        assert_eq!(bank, back);
    }

    #[test]
    fn csv_rejects_wrong_version_and_truncation() {
        let bad = "version,horizon,k\n2,3,1\n1,1,0,0\n";
        assert!(matches!(FilterBank::read_csv(bad.as_bytes()), Err(Error::Parse(_))));
        let short = "version,horizon,k\n1,3,2\n1,1,0,0\n";
        assert!(matches!(FilterBank::read_csv(short.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn load_or_build_writes_then_reuses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.csv");
        let a = FilterBank::load_or_build(&path, 20, 4).unwrap();
        assert!(path.exists());
        let b = FilterBank::load_or_build(&path, 20, 4).unwrap();
        assert_eq!(a, b);
        // Different key rebuilds and overwrites.
        let c = FilterBank::load_or_build(&path, 21, 4).unwrap();
        assert_eq!(c.horizon(), 21);
    }

    #[test]
    fn shared_returns_same_instance() {
        let a = FilterBank::shared(17, 3).unwrap();
        let b = FilterBank::shared(17, 3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
