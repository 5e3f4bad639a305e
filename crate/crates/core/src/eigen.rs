//! Dense symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts. Every loop runs in a fixed order,
//! so two calls on the same input return bit-identical results.

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column-major `n x len` buffer; column `j` is the unit eigenvector for `values[j]`.
    vectors: Vec<f64>,
    n: usize,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

/// Decompose the symmetric matrix stored row-major in `a` (`n x n`).
///
/// Only the lower triangle is read. The result is sorted by descending
/// eigenvalue, and each eigenvector has its first non-negligible entry
/// positive.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    check_input(a, n)?;

    // Column-major working copy: v[j * n + i] = a[i][j]. Symmetric, so the
    // row-major input can be copied straight across from the lower triangle.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let x = a[i * n + j];
            v[j * n + i] = x;
            v[i * n + j] = x;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    tridiagonalize(&mut v, &mut d, &mut e, n);
    ql_implicit(Some(&mut v), &mut d, &mut e, n)?;

    // Descending order; ties resolved by original index so the permutation
    // is deterministic.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(x.cmp(&y)));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &order {
        values.push(d[j]);
        push_signed(&mut vectors, &v[j * n..(j + 1) * n]);
    }
    Ok(SymmetricEigen { values, vectors, n })
}

fn check_input(a: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("eigensolver needs a non-empty matrix"));
    }
    if a.len() != n * n {
        return Err(Error::config(format!(
            "matrix buffer has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("matrix has non-finite entries"));
    }
    Ok(())
}

/// Appends `col`, negated if its first entry above `1e-12` in magnitude is negative.
fn push_signed(out: &mut Vec<f64>, col: &[f64]) {
    let flip = col.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0);
    if flip {
        out.extend(col.iter().map(|x| -x));
    } else {
        out.extend_from_slice(col);
    }
}

/// The `k` largest eigenpairs of the symmetric matrix stored row-major in
/// `a` (only the lower triangle is read).
///
/// Same ordering and sign conventions as [`symmetric_eigen`], at
/// `O(n^3 / 3 + k n^2)` cost: Householder reduction without forming `Q`,
/// eigenvalues of each unreduced tridiagonal block by QL, eigenvectors by
/// inverse iteration (reorthogonalized within clusters) and back-transformation.
pub fn symmetric_eigen_top(a: &[f64], n: usize, k: usize) -> Result<SymmetricEigen> {
    check_input(a, n)?;
    if k == 0 || k > n {
        return Err(Error::config(format!("eigenpair count k={k} must be in 1..={n}")));
    }
    let mut work = a.to_vec();
    let tri = householder_lower(&mut work, n);
    let (d, e) = (&tri.diag, &tri.sub);
    let tnorm = (0..n)
        .map(|i| d[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |x| x.abs()))
        .fold(0.0, f64::max);

    // Unreduced blocks [start, end).
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n - 1 {
        if e[i].abs() <= f64::EPSILON * (d[i].abs() + d[i + 1].abs()) {
            blocks.push((start, i + 1));
            start = i + 1;
        }
    }
    blocks.push((start, n));

    // (eigenvalue, block, index within block)
    let mut pairs = Vec::with_capacity(n);
    for (b, &(lo, hi)) in blocks.iter().enumerate() {
        let mut bd = d[lo..hi].to_vec();
        let mut be = vec![0.0; hi - lo];
        be[1..].copy_from_slice(&e[lo..hi - 1]);
        ql_implicit(None, &mut bd, &mut be, hi - lo)?;
        pairs.extend(bd.into_iter().enumerate().map(|(i, lambda)| (lambda, b, i)));
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    pairs.truncate(k);

    let cluster_tol = 1e-3 * tnorm;
    let mut values = Vec::with_capacity(k);
    let mut tri_vectors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(k);
    let mut last_shift: Option<(usize, f64)> = None;
    for (j, &(lambda, b, _)) in pairs.iter().enumerate() {
        let (lo, hi) = blocks[b];
        // Repeated eigenvalues get distinct shifts so the solves differ.
        let pert = 10.0 * f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
        let shift = match last_shift {
            Some((pb, prev)) if pb == b && lambda > prev - pert => prev - pert,
            _ => lambda,
        };
        last_shift = Some((b, shift));
        let cluster: Vec<&[f64]> = tri_vectors
            .iter()
            .zip(&values)
            .filter(|&(&(pb, _), &pv): &(&(usize, Vec<f64>), &f64)| pb == b && (pv - lambda).abs() <= cluster_tol)
            .map(|((_, v), _)| v.as_slice())
            .collect();
        let y = inverse_iteration(&d[lo..hi], &e[lo..hi - 1], shift, tnorm, &cluster, j as u64)?;
        values.push(lambda);
        tri_vectors.push((b, y));
    }

    let mut vectors = Vec::with_capacity(n * k);
    let mut x = vec![0.0; n];
    for (b, y) in &tri_vectors {
        let (lo, hi) = blocks[*b];
        x.fill(0.0);
        x[lo..hi].copy_from_slice(y);
        tri.apply_q(&mut x);
        push_signed(&mut vectors, &x);
    }
    Ok(SymmetricEigen { values, vectors, n })
}

/// Tridiagonal form `T = Q^T A Q` with `Q = H_0 H_1 ... H_{n-3}` kept as
/// reflectors `H_j = I - beta_j v_j v_j^T` acting on indices `j+1..n`.
struct Tridiagonal {
    diag: Vec<f64>,
    /// `sub[i] = T[i+1][i]`.
    sub: Vec<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl Tridiagonal {
    /// `x <- Q x`.
    fn apply_q(&self, x: &mut [f64]) {
        for (j, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let tail = &mut x[j + 1..];
            let s = beta * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Householder reduction working on the lower triangle of the row-major
/// buffer `a` (destroyed).
fn householder_lower(a: &mut [f64], n: usize) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];

    for j in 0..n.saturating_sub(2) {
        let m = n - j - 1;
        diag[j] = a[j * n + j];
        let mut v: Vec<f64> = (j + 1..n).map(|r| a[r * n + j]).collect();
        let scale = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if scale == 0.0 {
            sub[j] = 0.0;
            reflectors.push((v, 0.0));
            continue;
        }
        let norm = scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        sub[j] = alpha;
        v[0] -= alpha;
        let beta = 2.0 / dot(&v, &v);

        // p = beta B v over the trailing block B, from its lower triangle.
        let p = &mut p[..m];
        p.fill(0.0);
        for r in 0..m {
            let row = &a[(j + 1 + r) * n + j + 1..][..=r];
            let vr = v[r];
            let mut acc = row[r] * vr;
            for c in 0..r {
                acc += row[c] * v[c];
                p[c] += row[c] * vr;
            }
            p[r] += acc;
        }
        for pi in p.iter_mut() {
            *pi *= beta;
        }
        let kappa = 0.5 * beta * dot(p, &v);
        for (pi, vi) in p.iter_mut().zip(&v) {
            *pi -= kappa * vi;
        }
        // B -= v w^T + w v^T with w = p.
        for r in 0..m {
            let row = &mut a[(j + 1 + r) * n + j + 1..][..=r];
            let (vr, wr) = (v[r], p[r]);
            for c in 0..=r {
                row[c] -= vr * p[c] + wr * v[c];
            }
        }
        reflectors.push((v, beta));
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        sub[n - 2] = a[(n - 1) * n + n - 2];
    }
    diag[n - 1] = a[(n - 1) * n + n - 1];
    Tridiagonal { diag, sub, reflectors }
}

const INVERSE_ITERATIONS: usize = 5;

/// Eigenvector of the unreduced tridiagonal `(d, e)` for the eigenvalue
/// approximation `shift`, orthogonal to the unit vectors in `against`.
fn inverse_iteration(
    d: &[f64],
    e: &[f64],
    shift: f64,
    tnorm: f64,
    against: &[&[f64]],
    seed: u64,
) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let tiny = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
    let lu = TridiagonalLu::factor(d, e, shift, tiny);

    // Deterministic start vector in (-1, 1).
    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ seed.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    let mut y: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect();

    for _ in 0..INVERSE_ITERATIONS {
        let norm = y.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("inverse iteration lost its iterate".into()));
        }
        for yi in y.iter_mut() {
            *yi /= norm;
        }
        lu.solve(&mut y);
        for q in against {
            let s = dot(q, &y);
            for (yi, qi) in y.iter_mut().zip(q.iter()) {
                *yi -= s * qi;
            }
        }
    }
    let norm = dot(&y, &y).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical("inverse iteration produced a degenerate vector".into()));
    }
    for yi in y.iter_mut() {
        *yi /= norm;
    }
    Ok(y)
}

/// `P (T - shift I) = L U` for a symmetric tridiagonal `T`, with row
/// interchanges; `U` has two super-diagonals.
struct TridiagonalLu {
    diag: Vec<f64>,
    sup1: Vec<f64>,
    sup2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(d: &[f64], e: &[f64], shift: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut diag: Vec<f64> = d.iter().map(|x| x - shift).collect();
        let mut sup1 = e.to_vec();
        let mut sup2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n - 1];
        let mut swapped = vec![false; n - 1];
        let guard = |x: f64| if x.abs() < tiny { if x < 0.0 { -tiny } else { tiny } } else { x };
        for i in 0..n - 1 {
            let below = e[i];
            if diag[i].abs() >= below.abs() {
                diag[i] = guard(diag[i]);
                mult[i] = below / diag[i];
                diag[i + 1] -= mult[i] * sup1[i];
            } else {
                // Row i+1 becomes the pivot row.
                mult[i] = diag[i] / below;
                diag[i] = below;
                let next_diag = diag[i + 1];
                diag[i + 1] = sup1[i] - mult[i] * next_diag;
                sup1[i] = next_diag;
                if i + 1 < n - 1 {
                    sup2[i] = sup1[i + 1];
                    sup1[i + 1] = -mult[i] * sup1[i + 1];
                }
                swapped[i] = true;
            }
        }
        diag[n - 1] = guard(diag[n - 1]);
        TridiagonalLu { diag, sup1, sup2, mult, swapped }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        x[n - 1] /= self.diag[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.sup1[n - 2] * x[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.sup1[i] * x[i + 1] - self.sup2[i] * x[i + 2]) / self.diag[i];
        }
    }
}

#[inline]
fn at(n: usize, row: usize, col: usize) -> usize {
    col * n + row
}

/// Householder tridiagonalization with accumulation of the orthogonal
/// transform into `v`. On exit `d` holds the diagonal and `e[1..]` the
/// sub-diagonal.
fn tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }

    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = 0.0;
                v[at(n, j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            for j in 0..i {
                let f = d[j];
                v[at(n, j, i)] = f;
                let col = &v[j * n..j * n + i];
                let mut g = e[j] + col[j] * f;
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }

            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n - 1 {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(n, k, i + 1)] * v[at(n, k, j)];
                }
                let col = &mut v[j * n..j * n + i + 1];
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = 0.0;
    }
    v[at(n, n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

const MAX_QL_ITERATIONS: usize = 60;

/// Implicit QL on the tridiagonal `(d, e)`, rotating the columns of `v`
/// when given.
fn ql_implicit(mut v: Option<&mut [f64]>, d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n - 1] == 0 always stops the scan at n - 1.
        let m = m.min(n - 1);

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::Numerical(format!(
                        "implicit QL failed to converge for eigenvalue {l}"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(v) = v.as_deref_mut() {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let ci = &mut lo[i * n..];
                        let ci1 = &mut hi[..n];
                        for (a, b) in ci.iter_mut().zip(ci1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[f64], n: usize, eig: &SymmetricEigen, j: usize) -> f64 {
        let v = eig.vector(j);
        let mut r2 = 0.0;
        for i in 0..n {
            let av: f64 = (0..n).map(|k| a[i * n + k] * v[k]).sum();
            r2 += (av - eig.values[j] * v[i]).powi(2);
        }
        r2.sqrt()
    }

    #[test]
    fn diagonal_matrix() {
        let a = [1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0];
        let eig = symmetric_eigen(&a, 3).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(eig.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(eig.vector(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_by_one() {
        let eig = symmetric_eigen(&[-4.0], 1).unwrap();
        assert_eq!(eig.values, vec![-4.0]);
        assert_eq!(eig.vector(0), &[1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2,1],[1,2]] has eigenpairs 3 -> (1,1)/sqrt2 and 1 -> (1,-1)/sqrt2.
        let a = [2.0, 1.0, 1.0, 2.0];
        let eig = symmetric_eigen(&a, 2).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.vector(0)[0] - s).abs() < 1e-14);
        assert!((eig.vector(0)[1] - s).abs() < 1e-14);
        assert!((eig.vector(1)[0] - s).abs() < 1e-14);
        assert!((eig.vector(1)[1] + s).abs() < 1e-14);
    }

    #[test]
    fn dense_random_residuals_and_orthogonality() {
        let n = 37;
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let eig = symmetric_eigen(&a, n).unwrap();
        for j in 0..n {
            assert!(residual(&a, n, &eig, j) < 1e-12);
            for i in 0..j {
                let dot: f64 = eig.vector(i).iter().zip(eig.vector(j)).map(|(x, y)| x * y).sum();
                assert!(dot.abs() < 1e-12);
            }
        }
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let sum: f64 = eig.values.iter().sum();
        assert!((trace - sum).abs() < 1e-12);
    }

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed | 1;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let x = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        a
    }

    fn assert_top_matches_full(a: &[f64], n: usize, k: usize) {
        let full = symmetric_eigen(a, n).unwrap();
        let top = symmetric_eigen_top(a, n, k).unwrap();
        assert_eq!(top.len(), k);
        for j in 0..k {
            assert!((top.values[j] - full.values[j]).abs() < 1e-12, "value {j}");
            assert!(residual(a, n, &top, j) < 1e-12, "residual {j}");
            for i in 0..j {
                let dot: f64 = top.vector(i).iter().zip(top.vector(j)).map(|(x, y)| x * y).sum();
                assert!(dot.abs() < 1e-12, "orthogonality {i} {j}");
            }
        }
    }

    #[test]
    fn top_path_matches_full_on_random() {
        for (n, k) in [(1, 1), (2, 1), (3, 3), (17, 5), (60, 12)] {
            assert_top_matches_full(&random_symmetric(n, n as u64 * 77), n, k);
        }
    }

    #[test]
    fn top_path_on_repeated_eigenvalues() {
        // Q diag(2, 2, 2, 1, 0, ...) Q^T built from a fixed Householder reflector.
        let n = 12;
        let w: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let q = |i: usize, j: usize| f64::from(u8::from(i == j)) - 2.0 * w[i] * w[j] / ww;
        let lam = |i: usize| match i {
            0..=2 => 2.0,
            3 => 1.0,
            _ => 0.0,
        };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|l| q(i, l) * lam(l) * q(j, l)).sum();
            }
        }
        for i in 0..n {
            for j in 0..i {
                a[j * n + i] = a[i * n + j];
            }
        }
        assert_top_matches_full(&a, n, 4);
    }

    #[test]
    fn top_path_diagonal_is_exact() {
        let a = [1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0];
        let top = symmetric_eigen_top(&a, 3, 2).unwrap();
        assert_eq!(top.values, vec![3.0, 2.0]);
        assert_eq!(top.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(top.vector(1), &[0.0, 0.0, 1.0]);
        let eye = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(symmetric_eigen_top(&eye, 2, 1).unwrap().vector(0), &[1.0, 0.0]);
    }

    #[test]
    fn top_path_is_deterministic() {
        let a = random_symmetric(40, 5);
        assert_eq!(symmetric_eigen_top(&a, 40, 7).unwrap(), symmetric_eigen_top(&a, 40, 7).unwrap());
    }

    #[test]
    fn top_path_rejects_bad_k() {
        assert!(symmetric_eigen_top(&[1.0], 1, 0).is_err());
        assert!(symmetric_eigen_top(&[1.0], 1, 2).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(symmetric_eigen(&[], 0).is_err());
        assert!(symmetric_eigen(&[1.0, 2.0], 2).is_err());
        assert!(symmetric_eigen(&[f64::NAN], 1).is_err());
    }
}
