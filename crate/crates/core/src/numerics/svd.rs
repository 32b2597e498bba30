//! Truncated SVD.
//!
//! One-sided Jacobi for min(m, n) <= 512 (exact to near machine precision),
//! randomized subspace iteration (4 power iterations, oversampling 8) above
//! that. Both paths are deterministic for a fixed input: the sketch seed is a
//! fixed constant mixed with the matrix shape.

use super::mat::Mat;
use super::rng::RandomSource;
use crate::error::{Error, Result};
use crate::matio::WeightMatrix;

/// Largest min-dimension handled by the exact Jacobi path.
pub const JACOBI_LIMIT: usize = 512;
const SUBSPACE_ITERS: usize = 4;
const OVERSAMPLE: usize = 8;
const SKETCH_SEED: u64 = 0x5EED_5EED_5EED_5EED;
const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// m x r, orthonormal columns.
    pub u: Mat,
    /// r singular values, nonincreasing, nonnegative.
    pub s: Vec<f64>,
    /// n x r, orthonormal columns.
    pub v: Mat,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// U * diag(S) * V^T.
    pub fn reconstruct(&self) -> Mat {
        let r = self.rank();
        let mut us = self.u.clone();
        for c in 0..r {
            for row in 0..us.rows {
                us.data[row * r + c] *= self.s[c];
            }
        }
        us.matmul(&self.v.transpose())
    }

    /// Max absolute deviation of U^T U and V^T V from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for factor in [&self.u, &self.v] {
            let gram = factor.transpose().matmul(factor);
            for i in 0..gram.rows {
                for j in 0..gram.cols {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gram.get(i, j) - target).abs());
                }
            }
        }
        worst
    }
}

/// Column-major working copy used by the Jacobi sweep.
struct ColMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>, // column stride = rows
}

impl ColMat {
    fn from_mat(m: &Mat) -> Self {
        let mut data = vec![0.0; m.rows * m.cols];
        for r in 0..m.rows {
            for c in 0..m.cols {
                data[c * m.rows + r] = m.get(r, c);
            }
        }
        ColMat {
            rows: m.rows,
            cols: m.cols,
            data,
        }
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        ColMat {
            rows: n,
            cols: n,
            data,
        }
    }

    #[inline]
    fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Rotate columns p and q in place: (p, q) <- (c*p - s*q, s*p + c*q).
    fn rotate(&mut self, p: usize, q: usize, cs: f64, sn: f64) {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let (head, tail) = self.data.split_at_mut(hi * self.rows);
        let a = &mut head[lo * self.rows..(lo + 1) * self.rows];
        let b = &mut tail[..self.rows];
        // a is column lo, b is column hi; caller passes (p, q) = (lo, hi)
        debug_assert!(p < q);
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let xp = cs * *x - sn * *y;
            let yq = sn * *x + cs * *y;
            *x = xp;
            *y = yq;
        }
    }

    fn to_mat(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(r, c, self.data[c * self.rows + r]);
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full thin SVD by one-sided Jacobi. Input must have rows >= cols; the
/// public wrappers transpose when needed. Returns (U m x n, s, V n x n)
/// sorted by nonincreasing singular value.
fn jacobi_svd_tall(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    debug_assert!(a.rows >= a.cols);
    let n = a.cols;
    let mut work = ColMat::from_mat(a);
    let mut v = ColMat::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(work.col(p), work.col(p));
                let beta = dot(work.col(q), work.col(q));
                let gamma = dot(work.col(p), work.col(q));
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                work.rotate(p, q, cs, sn);
                v.rotate(p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut svals: Vec<f64> = (0..n).map(|c| dot(work.col(c), work.col(c)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svals[j].partial_cmp(&svals[i]).unwrap());

    let mut u = Mat::zeros(a.rows, n);
    let mut vm = Mat::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (new_c, &old_c) in order.iter().enumerate() {
        let s = svals[old_c];
        sorted.push(s);
        let col = work.col(old_c);
        if s > 0.0 {
            for r in 0..a.rows {
                u.set(r, new_c, col[r] / s);
            }
        }
        let vcol = v.col(old_c);
        for r in 0..n {
            vm.set(r, new_c, vcol[r]);
        }
    }
    svals.clear();
    (u, sorted, vm)
}

/// Full thin SVD of an arbitrary dense matrix (exact Jacobi path).
fn jacobi_svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    if a.rows >= a.cols {
        jacobi_svd_tall(a)
    } else {
        let (u, s, v) = jacobi_svd_tall(&a.transpose());
        (v, s, u)
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass per column.
/// Columns that collapse to (near) zero are left as zero vectors.
fn orthonormalize(m: &Mat) -> Mat {
    let mut cols: Vec<Vec<f64>> = (0..m.cols).map(|c| m.col(c)).collect();
    for i in 0..cols.len() {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = dot(&cols[i], &cols[j]);
                if proj != 0.0 {
                    let (lo, hi) = cols.split_at_mut(i);
                    for (x, y) in hi[0].iter_mut().zip(&lo[j]) {
                        *x -= proj * y;
                    }
                }
            }
        }
        let norm = dot(&cols[i], &cols[i]).sqrt();
        if norm > 1e-300 {
            for x in cols[i].iter_mut() {
                *x /= norm;
            }
        } else {
            for x in cols[i].iter_mut() {
                *x = 0.0;
            }
        }
    }
    let mut out = Mat::zeros(m.rows, m.cols);
    for (c, col) in cols.iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            out.set(r, c, x);
        }
    }
    out
}

/// Randomized subspace iteration for the top-k subspace of a (m x n).
fn randomized_topk(a: &Mat, k: usize) -> (Mat, Vec<f64>, Mat) {
    let k = k.min(a.rows).min(a.cols);
    let mut rng = RandomSource::new(
        SKETCH_SEED ^ (a.rows as u64).rotate_left(32) ^ a.cols as u64,
    );
    let mut omega = Mat::zeros(a.cols, k);
    for x in omega.data.iter_mut() {
        *x = rng.normal();
    }
    let at = a.transpose();
    let mut q = orthonormalize(&a.matmul(&omega));
    for _ in 0..SUBSPACE_ITERS {
        let z = orthonormalize(&at.matmul(&q));
        q = orthonormalize(&a.matmul(&z));
    }
    let b = q.transpose().matmul(a); // k x n
    let (ub, s, v) = jacobi_svd(&b);
    let u = q.matmul(&ub);
    (u, s, v)
}

fn validate_input(w: &WeightMatrix, r: usize) -> Result<()> {
    if !w.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite entry in matrix '{}'",
            w.name
        )));
    }
    let d = w.min_dim();
    if r == 0 || r > d {
        return Err(Error::config(format!(
            "rank {} out of range 1..={} for {}x{}",
            r, d, w.rows, w.cols
        )));
    }
    Ok(())
}

fn truncate(u: Mat, s: Vec<f64>, v: Mat, r: usize) -> SvdFactors {
    let mut ur = Mat::zeros(u.rows, r);
    let mut vr = Mat::zeros(v.rows, r);
    for c in 0..r {
        for row in 0..u.rows {
            ur.set(row, c, u.get(row, c));
        }
        for row in 0..v.rows {
            vr.set(row, c, v.get(row, c));
        }
    }
    SvdFactors {
        u: ur,
        s: s[..r].to_vec(),
        v: vr,
    }
}

/// Best rank-r factors of W in the Frobenius sense.
pub fn truncated_svd(w: &WeightMatrix, r: usize) -> Result<SvdFactors> {
    validate_input(w, r)?;
    let a = Mat::from_weight(w);
    let d = w.min_dim();
    let (u, s, v) = if d <= JACOBI_LIMIT {
        jacobi_svd(&a)
    } else {
        randomized_topk(&a, r + OVERSAMPLE)
    };
    Ok(truncate(u, s, v, r))
}

/// All singular values of W, nonincreasing (exact Jacobi regardless of size).
pub fn singular_values(w: &WeightMatrix) -> Result<Vec<f64>> {
    if !w.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite entry in matrix '{}'",
            w.name
        )));
    }
    let a = Mat::from_weight(w);
    Ok(jacobi_svd(&a).1)
}

/// Relative tail energy sqrt(sum_{i>r} s_i^2 / sum_i s_i^2) from a full,
/// sorted singular spectrum.
pub fn tail_rank_error(svals: &[f64], r: usize) -> f64 {
    let total: f64 = svals.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = svals.iter().skip(r).map(|s| s * s).sum();
    (tail / total).max(0.0).sqrt()
}

/// E_r(W) = ||W - W_r||_F / ||W||_F computed from tail singular-value energy.
pub fn rank_error(w: &WeightMatrix, r: usize) -> Result<f64> {
    validate_input(w, r)?;
    let a = Mat::from_weight(w);
    let total_energy: f64 = a.data.iter().map(|v| v * v).sum();
    if total_energy == 0.0 {
        return Err(Error::numeric(format!(
            "rank_error undefined for the zero matrix '{}'",
            w.name
        )));
    }
    let d = w.min_dim();
    if r == d {
        return Ok(0.0);
    }
    if d <= JACOBI_LIMIT {
        let svals = jacobi_svd(&a).1;
        Ok(tail_rank_error(&svals, r))
    } else {
        let (_, s, _) = randomized_topk(&a, r + OVERSAMPLE);
        let top: f64 = s.iter().take(r).map(|x| x * x).sum();
        Ok((1.0 - (top / total_energy).min(1.0)).max(0.0).sqrt())
    }
}
