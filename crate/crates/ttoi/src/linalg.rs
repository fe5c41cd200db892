//! Truncated SVD primitives and subspace-distance metrics.
//!
//! Three engines back the public operations:
//!
//! * one-sided Jacobi on the matrix itself ([`full_svd`]), the high-accuracy
//!   reference used for s_min, sinΘ and rank probing;
//! * a dense route for matrices whose smaller dimension is at most 64:
//!   Gram matrix `A Aᵀ` plus a symmetric Jacobi eigensolve when `A` is wide,
//!   Householder QR followed by Jacobi on the small triangular factor when
//!   `A` is tall;
//! * block power iteration with orthonormalization for everything larger,
//!   started from a fixed-seed Gaussian block so results are deterministic,
//!   finished with a Rayleigh-Ritz alignment step.
//!
//! All returned frames share one sign convention: in each column the entry of
//! largest absolute value is made positive (ties to the lowest index).

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Matrix;

/// Matrices whose smaller dimension is at most this use the dense route.
const DENSE_LIMIT: usize = 64;
const POWER_MAX_ITERS: usize = 300;
const POWER_TOL: f64 = 1e-10;
/// σ_r and σ_{r+1} closer than this (relative to σ_1) flag a degenerate gap.
const GAP_TOL: f64 = 1e-12;
/// Singular values below this (relative to σ_1) count as numerically zero.
const PAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTag {
    Left,
    Right,
}

/// A `p x r` matrix with orthonormal columns, as produced by the truncated
/// SVD operations, together with diagnostics about how trustworthy the
/// spanned subspace is.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    matrix: Matrix,
    singular_values: Vec<f64>,
    tag: FrameTag,
    /// σ_r = σ_{r+1} within tolerance: the subspace is genuinely non-unique.
    gap_degenerate: bool,
    /// The requested rank exceeded the numerical rank; trailing columns are
    /// an arbitrary orthonormal completion.
    padded: bool,
}

impl OrthonormalFrame {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn tag(&self) -> FrameTag {
        self.tag
    }

    pub fn gap_degenerate(&self) -> bool {
        self.gap_degenerate
    }

    pub fn padded(&self) -> bool {
        self.padded
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn rank(&self) -> usize {
        self.matrix.cols()
    }
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric("matrix contains non-finite entries"))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Rotate columns p, q of `m` by the Givens pair (c, s).
fn rotate_cols(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows();
    let (po, qo) = (p * rows, q * rows);
    let data = m.data_mut();
    for i in 0..rows {
        let a = data[po + i];
        let b = data[qo + i];
        data[po + i] = c * a - s * b;
        data[qo + i] = s * a + c * b;
    }
}

/// Hestenes one-sided Jacobi: sweeps of plane rotations until all column
/// pairs of `w` are numerically orthogonal; rotations accumulate into `v`.
fn jacobi_orthogonalize(w: &mut Matrix, v: &mut Matrix) {
    let n = w.cols();
    let tol = 1e-15;
    for _ in 0..64 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let wp = &w.data()[p * w.rows()..(p + 1) * w.rows()];
                let wq = &w.data()[q * w.rows()..(q + 1) * w.rows()];
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_cols(w, p, q, c, s);
                rotate_cols(v, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
}

/// A unit vector orthogonal to every column in `existing`, taken from the
/// canonical basis. Exists whenever `existing.len() < m`.
fn orthonormal_fallback(m: usize, existing: &[Vec<f64>]) -> Vec<f64> {
    for i in 0..m {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        for _ in 0..2 {
            for u in existing {
                let d = dot(u, &v);
                for (vv, uu) in v.iter_mut().zip(u) {
                    *vv -= d * uu;
                }
            }
        }
        let nn = norm(&v);
        if nn > 0.1 {
            for vv in &mut v {
                *vv /= nn;
            }
            return v;
        }
    }
    let mut v = vec![0.0; m];
    v[0] = 1.0;
    v
}

/// Modified Gram-Schmidt with reorthogonalization; degenerate columns are
/// replaced by canonical-basis completions so the result is always a frame.
fn orthonormalize(w: &Matrix) -> Matrix {
    let (m, b) = (w.rows(), w.cols());
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(b);
    for j in 0..b {
        let mut v = w.column(j).to_vec();
        let orig = norm(&v);
        for _ in 0..2 {
            for u in &out {
                let d = dot(u, &v);
                for (vv, uu) in v.iter_mut().zip(u) {
                    *vv -= d * uu;
                }
            }
        }
        let nn = norm(&v);
        if nn == 0.0 || nn <= orig * 1e-12 {
            v = orthonormal_fallback(m, &out);
        } else {
            for vv in &mut v {
                *vv /= nn;
            }
        }
        out.push(v);
    }
    let mut q = Matrix::zeros(m, b);
    for (j, col) in out.iter().enumerate() {
        q.column_mut(j).copy_from_slice(col);
    }
    q
}

/// Make the largest-magnitude entry of each column positive (ties broken by
/// lowest index). Returns which columns were negated.
fn fix_signs(m: &mut Matrix) -> Vec<bool> {
    let rows = m.rows();
    let mut flips = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let col = m.column(j);
        let mut best = 0usize;
        let mut best_abs = col[0].abs();
        for (i, &x) in col.iter().enumerate().skip(1) {
            if x.abs() > best_abs {
                best = i;
                best_abs = x.abs();
            }
        }
        let flip = col[best] < 0.0;
        if flip {
            for x in m.column_mut(j) {
                *x = -*x;
            }
        }
        flips.push(flip);
        let _ = rows;
    }
    flips
}

fn apply_flips(m: &mut Matrix, flips: &[bool]) {
    for (j, &f) in flips.iter().enumerate() {
        if f {
            for x in m.column_mut(j) {
                *x = -*x;
            }
        }
    }
}

/// Full SVD `A = U diag(s) Vᵀ` via one-sided Jacobi, all min(m, n) triplets,
/// singular values descending. Reference-grade accuracy; cost is a few
/// sweeps of `O(max(m, n) * min(m, n)^2)`.
pub fn full_svd(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    check_finite(a)?;
    let transposed = a.rows() < a.cols();
    let mut w = if transposed { a.transpose() } else { a.clone() };
    let (m, n) = (w.rows(), w.cols());
    let mut v = Matrix::identity(n);
    jacobi_orthogonalize(&mut w, &mut v);

    let norms: Vec<f64> = (0..n).map(|j| norm(w.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let sigma1 = norms[order[0]];
    let mut s = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut pending: Vec<usize> = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        v_sorted.column_mut(pos).copy_from_slice(v.column(j));
        if norms[j] > 0.0 && norms[j] > sigma1 * 1e-300 {
            let col: Vec<f64> = w.column(j).iter().map(|x| x / norms[j]).collect();
            u_cols.push(col);
        } else {
            u_cols.push(Vec::new());
            pending.push(pos);
        }
    }
    for pos in pending {
        u_cols[pos] = orthonormal_fallback(
            m,
            &u_cols
                .iter()
                .filter(|c| !c.is_empty())
                .cloned()
                .collect::<Vec<_>>(),
        );
    }
    let mut u = Matrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        u.column_mut(j).copy_from_slice(col);
    }

    let (mut u_out, mut v_out) = if transposed { (v_sorted, u) } else { (u, v_sorted) };
    let flips = fix_signs(&mut u_out);
    apply_flips(&mut v_out, &flips);
    Ok((u_out, s, v_out))
}

/// Left singular vectors and singular values by the dense Gram route:
/// eigendecomposition of `A Aᵀ`. Returns all `m` pairs.
fn gram_left_svd(a: &Matrix) -> (Matrix, Vec<f64>) {
    let g = a.gram_aat();
    let (vals, vecs) = jacobi_eig_sym(&g);
    let s = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    (vecs, s)
}

/// Symmetric eigendecomposition via cyclic two-sided Jacobi; eigenvalues
/// descending, eigenvectors in columns.
pub(crate) fn jacobi_eig_sym(g: &Matrix) -> (Vec<f64>, Matrix) {
    let n = g.rows();
    debug_assert_eq!(n, g.cols());
    let mut a = g.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                if apq == 0.0 || apq.abs() <= 1e-15 * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // two-sided rotation: columns then rows
                for i in 0..n {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    a.set(i, p, c * x - s * y);
                    a.set(i, q, s * x + c * y);
                }
                for j in 0..n {
                    let x = a.get(p, j);
                    let y = a.get(q, j);
                    a.set(p, j, c * x - s * y);
                    a.set(q, j, s * x + c * y);
                }
                rotate_cols(&mut v, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = Matrix::zeros(n, n);
    for (pos, &i) in order.iter().enumerate() {
        sorted_vecs.column_mut(pos).copy_from_slice(v.column(i));
    }
    (sorted_vals, sorted_vecs)
}

/// Thin Householder QR of a tall matrix: `A = Q R` with `Q` m x n, `R` n x n.
pub(crate) fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        let normx = norm(&v);
        if normx == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        let alpha = -sign * normx;
        v[0] -= alpha;
        let vn = norm(&v);
        if vn == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for x in &mut v {
            *x /= vn;
        }
        for j in k..n {
            let mut d = 0.0;
            for i in k..m {
                d += v[i - k] * r.get(i, j);
            }
            for i in k..m {
                r.set(i, j, r.get(i, j) - 2.0 * d * v[i - k]);
            }
        }
        reflectors.push(v);
    }
    let mut r_top = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j.min(n - 1) {
            r_top.set(i, j, r.get(i, j));
        }
    }
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q.set(j, j, 1.0);
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let mut d = 0.0;
            for i in k..m {
                d += v[i - k] * q.get(i, j);
            }
            for i in k..m {
                q.set(i, j, q.get(i, j) - 2.0 * d * v[i - k]);
            }
        }
    }
    (q, r_top)
}

/// Block power iteration for the leading left singular subspace of a large
/// matrix, with a Rayleigh-Ritz alignment at the end. One extra column is
/// carried so σ_{r+1} is available for the gap diagnostic.
fn block_power_left(a: &Matrix, r: usize) -> Result<(Matrix, Vec<f64>)> {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    let b = (r + 1).min(k);
    if a.frob_norm_sq() == 0.0 {
        let mut u = Matrix::zeros(m, b);
        for j in 0..b {
            u.set(j, j, 1.0);
        }
        return Ok((u, vec![0.0; b]));
    }
    let mut rng = SeededRng::new(0x0b5e55ed, 0);
    let start = Matrix::from_fn(m, b, |_, _| rng.standard_normal());
    let mut q = orthonormalize(&start);
    for _ in 0..POWER_MAX_ITERS {
        let z = a.matmul_tn(&q)?;
        let w = a.matmul(&z)?;
        let qn = orthonormalize(&w);
        let overlap = q.matmul_tn(&qn)?;
        let (_, s, _) = full_svd(&overlap)?;
        let smin = s.last().copied().unwrap_or(0.0);
        let change = (1.0 - (smin * smin).min(1.0)).max(0.0).sqrt();
        q = qn;
        if change <= POWER_TOL {
            break;
        }
    }
    let proj = q.matmul_tn(a)?;
    let (um, s, _) = full_svd(&proj)?;
    let u = q.matmul(&um)?;
    Ok((u, s))
}

fn build_frame(
    u: Matrix,
    sigma: Vec<f64>,
    r: usize,
    min_dim: usize,
    tag: FrameTag,
) -> OrthonormalFrame {
    let sigma1 = sigma.first().copied().unwrap_or(0.0);
    let next = if r < sigma.len() { sigma[r] } else { 0.0 };
    let gap_degenerate = if sigma1 == 0.0 {
        true
    } else {
        r < min_dim && (sigma[r - 1] - next).abs() <= GAP_TOL * sigma1
    };
    let padded = sigma1 == 0.0 || sigma[..r].iter().any(|&s| s <= PAD_TOL * sigma1);
    let mut matrix = Matrix::zeros(u.rows(), r);
    for j in 0..r {
        matrix.column_mut(j).copy_from_slice(u.column(j));
    }
    fix_signs(&mut matrix);
    OrthonormalFrame {
        matrix,
        singular_values: sigma[..r].to_vec(),
        tag,
        gap_degenerate,
        padded,
    }
}

/// Leading `r` left singular vectors of `a` (SVD_r^L).
pub fn svd_left(a: &Matrix, r: usize) -> Result<OrthonormalFrame> {
    check_finite(a)?;
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    if r < 1 || r > k {
        return Err(Error::argument(format!(
            "svd_left rank {} out of range 1..={} for {}x{} matrix",
            r, k, m, n
        )));
    }
    let (u, sigma) = if k <= DENSE_LIMIT {
        if m <= n {
            gram_left_svd(a)
        } else {
            let (q, rt) = householder_qr(a);
            let (ur, s, _) = full_svd(&rt)?;
            (q.matmul(&ur)?, s)
        }
    } else {
        block_power_left(a, r)?
    };
    Ok(build_frame(u, sigma, r, k, FrameTag::Left))
}

/// Leading `r` right singular vectors of `a` (SVD_r^R).
pub fn svd_right(a: &Matrix, r: usize) -> Result<OrthonormalFrame> {
    let f = svd_left(&a.transpose(), r)?;
    Ok(OrthonormalFrame {
        tag: FrameTag::Right,
        ..f
    })
}

/// sinΘ distance between the column spans of two orthonormal bases:
/// `sqrt(1 - s_min(UᵀV)^2)`, evaluated in the equivalent residual form
/// `‖(I - V Vᵀ) U‖_2` which stays accurate near zero.
pub fn sin_theta_between(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return Err(Error::argument(format!(
            "sin_theta shape mismatch: {}x{} vs {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let vtu = v.matmul_tn(u)?;
    let mut resid = u.clone();
    let proj = v.matmul(&vtu)?;
    for (r, p) in resid.data_mut().iter_mut().zip(proj.data()) {
        *r -= p;
    }
    let (_, s, _) = full_svd(&resid)?;
    Ok(s.first().copied().unwrap_or(0.0).min(1.0))
}

/// sinΘ distance between two frames of equal ambient dimension and rank.
pub fn sin_theta(u: &OrthonormalFrame, v: &OrthonormalFrame) -> Result<f64> {
    sin_theta_between(u.matrix(), v.matrix())
}

/// The smallest singular value s_min(A), reference accuracy.
pub fn smallest_singular_value(a: &Matrix) -> Result<f64> {
    check_finite(a)?;
    let (_, s, _) = full_svd(a)?;
    Ok(s.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_na(a: &Matrix) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
    }

    fn na_left_frame(a: &Matrix, r: usize) -> Matrix {
        let svd = to_na(a).svd(true, false);
        let u = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
        Matrix::from_fn(a.rows(), r, |i, j| u[(i, idx[j])])
    }

    fn diag_321() -> Matrix {
        let mut m = Matrix::zeros(3, 3);
        m.set(0, 0, 3.0);
        m.set(1, 1, 2.0);
        m.set(2, 2, 1.0);
        m
    }

    #[test]
    fn svd_left_diagonal() {
        let f = svd_left(&diag_321(), 2).unwrap();
        assert!((f.matrix().get(0, 0) - 1.0).abs() < 1e-12);
        assert!((f.matrix().get(1, 1) - 1.0).abs() < 1e-12);
        assert!(f.matrix().get(2, 0).abs() < 1e-12);
        assert!((f.singular_values()[0] - 3.0).abs() < 1e-10);
        assert!((f.singular_values()[1] - 2.0).abs() < 1e-10);
        assert!(!f.gap_degenerate());
        assert!(!f.padded());
    }

    #[test]
    fn svd_left_of_orthonormal_input() {
        let mut rng = SeededRng::new(21, 0);
        let a = random_matrix(7, 4, &mut rng);
        let (q, _) = householder_qr(&a);
        let f = svd_left(&q, 4).unwrap();
        assert!(sin_theta_between(f.matrix(), &q).unwrap() <= 1e-10);
    }

    #[test]
    fn svd_left_vs_oracle() {
        let mut rng = SeededRng::new(22, 0);
        let a = random_matrix(8, 6, &mut rng);
        let f = svd_left(&a, 3).unwrap();
        let reference = na_left_frame(&a, 3);
        assert!(sin_theta_between(f.matrix(), &reference).unwrap() <= 1e-8);
    }

    #[test]
    fn svd_right_diagonal_and_transpose_symmetry() {
        let f = svd_right(&diag_321(), 1).unwrap();
        assert!((f.matrix().get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(f.tag(), FrameTag::Right);

        let mut rng = SeededRng::new(23, 0);
        let a = random_matrix(5, 9, &mut rng);
        let fr = svd_right(&a, 2).unwrap();
        let fl = svd_left(&a.transpose(), 2).unwrap();
        assert!(sin_theta_between(fr.matrix(), fl.matrix()).unwrap() <= 1e-10);
        let reference = na_left_frame(&a.transpose(), 2);
        assert!(sin_theta_between(fr.matrix(), &reference).unwrap() <= 1e-8);
    }

    #[test]
    fn sin_theta_trivial_cases() {
        let mut rng = SeededRng::new(24, 0);
        let a = random_matrix(6, 2, &mut rng);
        let (q, _) = householder_qr(&a);
        assert!(sin_theta_between(&q, &q).unwrap() <= 1e-12);

        let mut e1 = Matrix::zeros(4, 1);
        e1.set(0, 0, 1.0);
        let mut e2 = Matrix::zeros(4, 1);
        e2.set(1, 0, 1.0);
        assert!((sin_theta_between(&e1, &e2).unwrap() - 1.0).abs() <= 1e-12);

        let theta: f64 = 0.7;
        let v = Matrix::new(2, 1, vec![theta.cos(), theta.sin()]).unwrap();
        let u = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!((sin_theta_between(&u, &v).unwrap() - theta.sin().abs()).abs() <= 1e-12);
    }

    #[test]
    fn sin_theta_symmetry_and_rotation_invariance() {
        let mut rng = SeededRng::new(25, 0);
        let (qa, _) = householder_qr(&random_matrix(8, 3, &mut rng));
        let (qb, _) = householder_qr(&random_matrix(8, 3, &mut rng));
        let ab = sin_theta_between(&qa, &qb).unwrap();
        let ba = sin_theta_between(&qb, &qa).unwrap();
        assert!((ab - ba).abs() <= 1e-10);

        let (rot, _) = householder_qr(&random_matrix(3, 3, &mut rng));
        let qa_rot = qa.matmul(&rot).unwrap();
        assert!((sin_theta_between(&qa_rot, &qb).unwrap() - ab).abs() <= 1e-10);
    }

    #[test]
    fn smallest_singular_value_cases() {
        assert!((smallest_singular_value(&Matrix::identity(4)).unwrap() - 1.0).abs() <= 1e-12);

        // rank-deficient: duplicate columns
        let mut rng = SeededRng::new(26, 0);
        let col = random_matrix(5, 1, &mut rng);
        let mut m = Matrix::zeros(5, 2);
        m.column_mut(0).copy_from_slice(col.column(0));
        m.column_mut(1).copy_from_slice(col.column(0));
        assert!(smallest_singular_value(&m).unwrap() <= 1e-10);

        let a = random_matrix(6, 4, &mut rng);
        let na_s = to_na(&a).svd(false, false).singular_values;
        let expect = na_s.iter().cloned().fold(f64::INFINITY, f64::min);
        let got = smallest_singular_value(&a).unwrap();
        assert!((got - expect).abs() <= 1e-10 * na_s.max());
    }

    #[test]
    fn full_svd_reconstructs() {
        let mut rng = SeededRng::new(27, 0);
        for &(m, n) in &[(5usize, 8usize), (8, 5), (6, 6)] {
            let a = random_matrix(m, n, &mut rng);
            let (u, s, v) = full_svd(&a).unwrap();
            let k = m.min(n);
            assert_eq!(u.cols(), k);
            assert_eq!(v.cols(), k);
            let mut us = u.clone();
            for j in 0..k {
                for x in us.column_mut(j) {
                    *x *= s[j];
                }
            }
            let recon = us.matmul(&v.transpose()).unwrap();
            let err: f64 = recon
                .data()
                .iter()
                .zip(a.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-12 * a.frob_norm(), "({}, {}) err {}", m, n, err);
            for w in s.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn projector_is_idempotent() {
        let mut rng = SeededRng::new(28, 0);
        let a = random_matrix(9, 5, &mut rng);
        let f = svd_left(&a, 3).unwrap();
        let p = f.matrix().matmul(&f.matrix().transpose()).unwrap();
        let pp = p.matmul(&p).unwrap();
        let err: f64 = pp
            .data()
            .iter()
            .zip(p.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10);
    }

    #[test]
    fn svd_left_maximizes_projected_energy() {
        let mut rng = SeededRng::new(29, 0);
        let a = random_matrix(8, 10, &mut rng);
        let f = svd_left(&a, 3).unwrap();
        let best = f.matrix().matmul_tn(&a).unwrap().frob_norm();
        for _ in 0..100 {
            let (q, _) = householder_qr(&random_matrix(8, 3, &mut rng));
            let val = q.matmul_tn(&a).unwrap().frob_norm();
            assert!(val < best + 1e-12);
        }
    }

    #[test]
    fn deterministic_output() {
        let mut rng = SeededRng::new(30, 0);
        let a = random_matrix(70, 90, &mut rng);
        let f1 = svd_left(&a, 4).unwrap();
        let f2 = svd_left(&a, 4).unwrap();
        assert_eq!(f1.matrix().data(), f2.matrix().data());
        assert_eq!(f1.singular_values(), f2.singular_values());
    }

    #[test]
    fn block_power_path_matches_oracle() {
        // min-dim > 64 triggers the iterative route
        let mut rng = SeededRng::new(31, 0);
        let a = random_matrix(80, 70, &mut rng);
        let f = svd_left(&a, 3).unwrap();
        let reference = na_left_frame(&a, 3);
        assert!(sin_theta_between(f.matrix(), &reference).unwrap() <= 1e-8);
        let na_s = to_na(&a).svd(false, false).singular_values;
        let mut svals: Vec<f64> = na_s.iter().cloned().collect();
        svals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for j in 0..3 {
            assert!((f.singular_values()[j] - svals[j]).abs() <= 1e-8 * svals[0]);
        }
    }

    #[test]
    fn padded_frame_on_rank_deficient_input() {
        let mut rng = SeededRng::new(32, 0);
        let u = random_matrix(6, 1, &mut rng);
        let v = random_matrix(5, 1, &mut rng);
        let a = u.matmul(&v.transpose()).unwrap();
        let f = svd_left(&a, 3).unwrap();
        assert!(f.padded());
        let g = f.matrix().matmul_tn(f.matrix()).unwrap();
        let err: f64 = g
            .data()
            .iter()
            .zip(Matrix::identity(3).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10);
    }

    #[test]
    fn degenerate_gap_flagged() {
        let f = svd_left(&Matrix::identity(4), 2).unwrap();
        assert!(f.gap_degenerate());
    }

    #[test]
    fn error_paths() {
        let a = Matrix::zeros(3, 3);
        assert!(svd_left(&a, 0).is_err());
        assert!(svd_left(&a, 4).is_err());
        let mut b = Matrix::zeros(2, 2);
        b.set(0, 0, f64::NAN);
        assert!(svd_left(&b, 1).is_err());
        assert!(smallest_singular_value(&b).is_err());
    }
}
