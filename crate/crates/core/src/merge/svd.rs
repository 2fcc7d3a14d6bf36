//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working matrix are rotated pairwise until every pair is
//! orthogonal to within `CONVERGENCE_TOL` relative to the column norms. The
//! Gram matrix is never formed. Wide inputs are handled by factoring the
//! transpose, so the rotated matrix always has at least as many rows as
//! columns. All arithmetic is f64.

use crate::error::{Error, Result};

pub const CONVERGENCE_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;

/// `A = U · diag(s) · Vt`, with `U` `m×k`, `Vt` `k×n`, `k = min(m, n)`.
/// Matrices are row-major. Singular values are non-increasing and `U` has
/// orthonormal columns even when `A` is rank deficient.
#[derive(Debug, Clone)]
pub struct Svd {
    pub rows: usize,
    pub cols: usize,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub vt: Vec<f64>,
}

impl Svd {
    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let (m, n, k) = (self.rows, self.cols, self.k());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let us = self.u[i * k + p] * self.s[p];
                if us == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += us * self.vt[p * n + j];
                }
            }
        }
        out
    }
}

pub fn thin_svd(a: &[f64], rows: usize, cols: usize) -> Result<Svd> {
    assert_eq!(a.len(), rows * cols, "thin_svd: data does not match {rows}x{cols}");
    if rows == 0 || cols == 0 {
        return Err(Error::Validation("cannot factor an empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if rows >= cols {
        let cols_of_a: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| a[i * cols + j]).collect())
            .collect();
        let f = hestenes(cols_of_a, rows)?;
        // U: rows x k from left columns; Vt = V^T.
        let k = cols;
        let u = columns_to_row_major(&f.left, rows);
        let mut vt = vec![0.0; k * cols];
        for (p, v) in f.right.iter().enumerate() {
            vt[p * cols..(p + 1) * cols].copy_from_slice(v);
        }
        Ok(Svd { rows, cols, u, s: f.sigma, vt })
    } else {
        // A^T = L S R^T  =>  A = R S L^T.
        let cols_of_at: Vec<Vec<f64>> = (0..rows).map(|i| a[i * cols..(i + 1) * cols].to_vec()).collect();
        let f = hestenes(cols_of_at, cols)?;
        let u = columns_to_row_major(&f.right, rows);
        let k = rows;
        let mut vt = vec![0.0; k * cols];
        for (p, l) in f.left.iter().enumerate() {
            vt[p * cols..(p + 1) * cols].copy_from_slice(l);
        }
        Ok(Svd { rows, cols, u, s: f.sigma, vt })
    }
}

fn columns_to_row_major(columns: &[Vec<f64>], len: usize) -> Vec<f64> {
    let k = columns.len();
    let mut out = vec![0.0; len * k];
    for (p, c) in columns.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            out[i * k + p] = v;
        }
    }
    out
}

struct Factors {
    /// Orthonormal left singular vectors, each of the working column length.
    left: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    /// Right singular vectors (columns of V), each of length `left.len()`.
    right: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `columns` are the `n` columns (each of length `m >= n`) of the matrix.
fn hestenes(mut columns: Vec<Vec<f64>>, m: usize) -> Result<Factors> {
    let n = columns.len();
    debug_assert!(m >= n);
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let frob_sq: f64 = columns.iter().map(|c| dot(c, c)).sum();
    let negligible = f64::EPSILON * f64::EPSILON * frob_sq;

    let mut converged = frob_sq == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&columns[p], &columns[p]);
                let beta = dot(&columns[q], &columns[q]);
                let gamma = dot(&columns[p], &columns[q]);
                let scale = (alpha * beta).sqrt();
                if gamma == 0.0 || scale <= negligible || gamma.abs() <= CONVERGENCE_TOL * scale {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut columns, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }

    let norms: Vec<f64> = columns.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let s_max = norms[order[0]];
    let cutoff = s_max * (m as f64) * f64::EPSILON;

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let norm = norms[j];
        if norm > cutoff && norm > 0.0 {
            left.push(columns[j].iter().map(|x| x / norm).collect());
            sigma.push(norm);
        } else {
            left.push(Vec::new());
            sigma.push(0.0);
            deficient.push(slot);
        }
        right.push(v[j].clone());
    }
    for slot in deficient {
        left[slot] = orthogonal_complement_vector(&left, m);
    }
    Ok(Factors { left, sigma, right })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// A unit vector orthogonal to every non-empty vector in `basis`.
///
/// Projects each standard basis vector off `basis` and keeps the longest
/// residual. With `k < m` basis vectors the squared residual norms sum to
/// `m - k`, so the longest one has norm at least `sqrt((m - k) / m)`.
fn orthogonal_complement_vector(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        // Two Gram-Schmidt passes for stability.
        for _ in 0..2 {
            for b in basis.iter().filter(|b| !b.is_empty()) {
                let d = dot(&e, b);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&e, &e).sqrt();
        if best.as_ref().is_none_or(|(n, _)| norm > *n) {
            best = Some((norm, e));
        }
    }
    let (norm, e) = best.expect("m >= 1");
    assert!(norm > 0.0, "basis already spans the space");
    e.into_iter().map(|x| x / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random(m: usize, n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..m * n).map(|_| lcg(&mut s)).collect()
    }

    fn check(a: &[f64], m: usize, n: usize) {
        let svd = thin_svd(a, m, n).unwrap();
        let k = m.min(n);
        assert_eq!(svd.k(), k);
        let back = svd.reconstruct();
        let err = a.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "reconstruction error {err} for {m}x{n}");
        for p in 0..k {
            for q in 0..k {
                let d: f64 = (0..m).map(|i| svd.u[i * k + p] * svd.u[i * k + q]).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10, "U^T U [{p},{q}] = {d}");
                let d: f64 = (0..n).map(|j| svd.vt[p * n + j] * svd.vt[q * n + j]).sum();
                if svd.s[p] > 0.0 && svd.s[q] > 0.0 {
                    assert!((d - want).abs() < 1e-10, "V^T V [{p},{q}] = {d}");
                }
            }
        }
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn tall_wide_square() {
        for (m, n, seed) in [(6, 4, 1), (4, 6, 2), (5, 5, 3), (1, 7, 4), (7, 1, 5), (20, 60, 6)] {
            check(&random(m, n, seed), m, n);
        }
    }

    #[test]
    fn known_singular_values() {
        // diag(3, 2) padded: singular values are 3 and 2.
        let a = [0.0, 3.0, 2.0, 0.0, 0.0, 0.0];
        let svd = thin_svd(&a, 3, 2).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-12 && (svd.s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_keeps_orthonormal_u() {
        // [W | W] has rank <= 2.
        let w = random(4, 2, 9);
        let mut a = Vec::new();
        for i in 0..4 {
            a.extend_from_slice(&w[i * 2..i * 2 + 2]);
            a.extend_from_slice(&w[i * 2..i * 2 + 2]);
        }
        check(&a, 4, 4);
        let svd = thin_svd(&a, 4, 4).unwrap();
        assert_eq!(svd.s[2], 0.0);
        check(&[0.0; 6], 2, 3);
    }

    #[test]
    fn rank_one_completes_large_null_space() {
        // Outer product u·vᵀ in 12x12: eleven basis vectors must be filled in.
        let u = random(12, 1, 4);
        let v = random(1, 12, 5);
        let a: Vec<f64> = (0..144).map(|i| u[i / 12] * v[i % 12]).collect();
        check(&a, 12, 12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(thin_svd(&[f64::NAN, 1.0], 1, 2), Err(Error::Numerical(_))));
    }
}
