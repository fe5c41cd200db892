//! Dense tensor storage and the matricization / reshape algebra behind the
//! tensor-train routines.
//!
//! A [`DenseTensor`] of order d stores its entries so that `vectorize` is the
//! identity on the underlying buffer: entry `(i_1, ..., i_d)` (0-based) lives
//! at linear offset `i_1 + i_2 p_1 + i_3 p_1 p_2 + ...`, i.e. mode 1 is
//! fastest. With this layout the sequential unfolding `[X]_k` (rows enumerate
//! modes `1..k`, columns modes `k+1..d`) and the matrix `Reshape` operation
//! are pure reinterpretations of the same buffer, and Frobenius norms are
//! trivially preserved.
//!
//! [`kronecker`] and [`realignment_matrix`] materialize the structured
//! matrices used in the representation identities; they are oracle/test
//! helpers. Production paths multiply by Kronecker chains implicitly via
//! [`forward_sequential_multiply`] / [`backward_sequential_multiply`] and the
//! `mult_kron_identity_right` / `kron_identity_apply` primitives, which cost
//! `O(size(input) * r)` instead of materializing anything.

use crate::error::{Error, Result};

/// Upper bound on the number of f64 entries any single object may hold.
const MAX_ELEMS: usize = 1 << 33;

/// Checked product of dimension lists.
pub fn checked_product(dims: &[usize]) -> Result<usize> {
    let mut acc: usize = 1;
    for &d in dims {
        acc = acc
            .checked_mul(d)
            .filter(|&n| n <= MAX_ELEMS)
            .ok_or_else(|| {
                Error::Resource(format!("dimension product overflows: {:?}", dims))
            })?;
    }
    Ok(acc)
}

/// Dense column-major matrix.
///
/// Element `(i, j)` (0-based) lives at `data[i + j * rows]`, matching the
/// index conventions used by the sequential unfoldings.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let n = checked_product(&[rows, cols])?;
        if data.len() != n {
            return Err(Error::argument(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i + j * rows] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[j + i * self.cols] = self.data[i + j * self.rows];
            }
        }
        out
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= s;
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::argument(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for j in 0..n {
            let bcol = &other.data[j * k..(j + 1) * k];
            let ccol = &mut out.data[j * m..(j + 1) * m];
            for (l, &b) in bcol.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let acol = &self.data[l * m..(l + 1) * m];
                for i in 0..m {
                    ccol[i] += acol[i] * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other` without forming the transpose.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::argument(format!(
                "matmul_tn shape mismatch: {}x{}^T * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.cols, self.rows, other.cols);
        let mut out = Matrix::zeros(m, n);
        for j in 0..n {
            let bcol = &other.data[j * k..(j + 1) * k];
            for i in 0..m {
                let acol = &self.data[i * k..(i + 1) * k];
                let mut acc = 0.0;
                for l in 0..k {
                    acc += acol[l] * bcol[l];
                }
                out.data[i + j * m] = acc;
            }
        }
        Ok(out)
    }

    /// `self * self^T`, accumulated in a single pass over the columns.
    pub fn gram_aat(&self) -> Matrix {
        let m = self.rows;
        let mut g = Matrix::zeros(m, m);
        for j in 0..self.cols {
            let col = self.column(j);
            for c in 0..m {
                let v = col[c];
                if v == 0.0 {
                    continue;
                }
                let gcol = &mut g.data[c * m..(c + 1) * m];
                for r in 0..m {
                    gcol[r] += col[r] * v;
                }
            }
        }
        g
    }

    /// Reinterpret the buffer under a different (rows, cols) split.
    /// Valid because storage is column-major with a single contiguous buffer.
    pub(crate) fn reinterpret(self, rows: usize, cols: usize) -> Result<Matrix> {
        if rows * cols != self.data.len() {
            return Err(Error::argument(format!(
                "cannot reinterpret {} elements as {}x{}",
                self.data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix {
            rows,
            cols,
            data: self.data,
        })
    }
}

/// Order-d dense tensor with mode-1-fastest linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::argument("tensor must have order >= 1"));
        }
        if dims.iter().any(|&p| p == 0) {
            return Err(Error::argument("all dimensions must be >= 1"));
        }
        let n = checked_product(&dims)?;
        if data.len() != n {
            return Err(Error::argument(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = checked_product(dims)?;
        DenseTensor::new(dims.to_vec(), vec![0.0; n])
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[k]);
            off += i * stride;
            stride *= self.dims[k];
        }
        off
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// vec(X): the identity on the stored buffer.
    pub fn vectorize(&self) -> &[f64] {
        &self.data
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::argument("tensor subtraction: dims differ"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseTensor::new(self.dims.clone(), data)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::argument("tensor addition: dims differ"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseTensor::new(self.dims.clone(), data)
    }
}

/// Sequential unfolding `[X]_k`: a `(p_1...p_k) x (p_{k+1}...p_d)` matrix.
///
/// Row index enumerates modes `1..k` with mode 1 fastest; column index
/// enumerates modes `k+1..d` with mode `k+1` fastest. A pure permutation
/// (here: a buffer reinterpretation), bit-exact.
pub fn sequential_unfold(t: &DenseTensor, k: usize) -> Result<Matrix> {
    let d = t.order();
    if k < 1 || k > d.saturating_sub(1) {
        return Err(Error::argument(format!(
            "unfold mode count k={} out of range 1..={}",
            k,
            d.saturating_sub(1)
        )));
    }
    let rows = checked_product(&t.dims[..k])?;
    let cols = checked_product(&t.dims[k..])?;
    Matrix::new(rows, cols, t.data.clone())
}

/// Inverse of [`sequential_unfold`]: rebuild the tensor from `[X]_k`.
pub fn fold(m: &Matrix, dims: &[usize], k: usize) -> Result<DenseTensor> {
    let d = dims.len();
    if k < 1 || k > d.saturating_sub(1) {
        return Err(Error::argument(format!(
            "fold mode count k={} out of range 1..={}",
            k,
            d.saturating_sub(1)
        )));
    }
    let rows = checked_product(&dims[..k])?;
    let cols = checked_product(&dims[k..])?;
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::argument(format!(
            "fold shape mismatch: matrix is {}x{}, dims {:?} at k={} require {}x{}",
            m.rows(),
            m.cols(),
            dims,
            k,
            rows,
            cols
        )));
    }
    DenseTensor::new(dims.to_vec(), m.data().to_vec())
}

/// Matrix `Reshape`: regroup a `q1 x (q2 q3)` matrix as `(q1 q2) x q3` (or
/// back), with `A~_{(i2-1)q1+i1, i3} = A_{i1, (i3-1)q2+i2}`. Pure buffer
/// reinterpretation under the column-major layout.
pub fn reshape_matrix(a: &Matrix, rows: usize, cols: usize) -> Result<Matrix> {
    if rows == 0 || cols == 0 || rows * cols != a.rows() * a.cols() {
        return Err(Error::argument(format!(
            "reshape {}x{} -> {}x{}: element counts differ",
            a.rows(),
            a.cols(),
            rows,
            cols
        )));
    }
    let factorable = (rows % a.rows() == 0 && a.cols() % cols == 0)
        || (a.rows() % rows == 0 && cols % a.cols() == 0);
    if !factorable {
        return Err(Error::argument(format!(
            "reshape {}x{} -> {}x{}: shapes do not factor",
            a.rows(),
            a.cols(),
            rows,
            cols
        )));
    }
    a.clone().reinterpret(rows, cols)
}

/// Kronecker product `U (x) V` with block `(a, b)` equal to `U_{ab} V`.
/// Oracle/test use only; hot paths apply Kronecker chains implicitly.
pub fn kronecker(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let rows = checked_product(&[u.rows(), v.rows()])?;
    let cols = checked_product(&[u.cols(), v.cols()])?;
    let mut out = Matrix::zeros(rows, cols);
    for a in 0..u.rows() {
        for c in 0..u.cols() {
            let s = u.get(a, c);
            if s == 0.0 {
                continue;
            }
            for b in 0..v.rows() {
                for e in 0..v.cols() {
                    out.set(a * v.rows() + b, c * v.cols() + e, s * v.get(b, e));
                }
            }
        }
    }
    Ok(out)
}

/// Realignment matrix `A^{(i,j)}` of shape `(i^2 j) x j`: column `l` stacks
/// the canonical bases `e^{(ij)}_{i(l-1)+b}` for block rows `b = 1..i`.
/// Used as a test oracle for the reshape identities; `A^{(1,j)} = I_j`.
pub fn realignment_matrix(i: usize, j: usize) -> Result<Matrix> {
    if i == 0 || j == 0 {
        return Err(Error::argument("realignment_matrix requires i, j >= 1"));
    }
    let rows = checked_product(&[i, i, j])?;
    let mut out = Matrix::zeros(rows, j);
    for l in 0..j {
        for b in 0..i {
            // block b, basis vector index i*l + b within R^{ij}
            out.set(b * i * j + i * l + b, l, 1.0);
        }
    }
    Ok(out)
}

/// `m * (a (x) I_block)` where `m` has `block * a.rows()` columns with the
/// block index fastest. Computed by reinterpreting `m` as a
/// `(m.rows * block) x a.rows` matrix; no Kronecker product is formed.
pub fn mult_kron_identity_right(m: &Matrix, a: &Matrix, block: usize) -> Result<Matrix> {
    let q = m.rows();
    if m.cols() != block * a.rows() {
        return Err(Error::argument(format!(
            "kron-right shape mismatch: {} cols vs block {} * {} rows",
            m.cols(),
            block,
            a.rows()
        )));
    }
    let wide = m.clone().reinterpret(q * block, a.rows())?;
    let prod = wide.matmul(a)?;
    prod.reinterpret(q, block * a.cols())
}

/// `(I_p (x) prev) * u` where `u` has `prev.cols() * p` rows with the
/// `prev.cols()` index fastest. Again a reinterpret-multiply-reinterpret.
pub fn kron_identity_apply(prev: &Matrix, u: &Matrix, p: usize) -> Result<Matrix> {
    if u.rows() != prev.cols() * p {
        return Err(Error::argument(format!(
            "kron-apply shape mismatch: {} rows vs {} * {}",
            u.rows(),
            prev.cols(),
            p
        )));
    }
    let wide = u.clone().reinterpret(prev.cols(), p * u.cols())?;
    let prod = prev.matmul(&wide)?;
    prod.reinterpret(prev.rows() * p, u.cols())
}

/// `(prev (x) I_p) * u` where `u` has `p * prev.cols()` rows with the `p`
/// index fastest. Realized through [`mult_kron_identity_right`] on the
/// transposed problem.
pub fn kron_identity_expand(prev: &Matrix, u: &Matrix, p: usize) -> Result<Matrix> {
    if u.rows() != p * prev.cols() {
        return Err(Error::argument(format!(
            "kron-expand shape mismatch: {} rows vs {} * {}",
            u.rows(),
            p,
            prev.cols()
        )));
    }
    let t = mult_kron_identity_right(&u.transpose(), &prev.transpose(), p)?;
    Ok(t.transpose())
}

/// Forward sequential multiplication: `S_1 = [T]_1`, then
/// `S~_k = M_k^T S_k`, `S_{k+1} = Reshape(S~_k, r_k p_{k+1}, ...)`.
///
/// Returns `(S_k, S~_k)` for `k = 1..d-1`. The factor `M_k` must have
/// `r_{k-1} p_k` rows (`r_0 = 1`). Equivalent to projecting `[T]_k` by the
/// full Kronecker chain, at a fraction of the cost.
pub fn forward_sequential_multiply(
    t: &DenseTensor,
    factors: &[Matrix],
) -> Result<Vec<(Matrix, Matrix)>> {
    let d = t.order();
    if d < 2 || factors.len() != d - 1 {
        return Err(Error::argument(format!(
            "forward multiply needs d-1 = {} factors, got {}",
            d.saturating_sub(1),
            factors.len()
        )));
    }
    let dims = t.dims();
    let mut out = Vec::with_capacity(d - 1);
    let mut s = sequential_unfold(t, 1)?;
    let mut r_prev = 1usize;
    for k in 1..d {
        let m = &factors[k - 1];
        if m.rows() != r_prev * dims[k - 1] {
            return Err(Error::argument(format!(
                "factor {} has {} rows, expected {}",
                k,
                m.rows(),
                r_prev * dims[k - 1]
            )));
        }
        let st = m.matmul_tn(&s)?;
        let r_k = m.cols();
        let next = if k < d - 1 {
            Some(reshape_matrix(
                &st,
                r_k * dims[k],
                checked_product(&dims[k + 1..])?,
            )?)
        } else {
            None
        };
        out.push((s, st));
        if let Some(next) = next {
            s = next;
        } else {
            break;
        }
        r_prev = r_k;
    }
    Ok(out)
}

/// Backward sequential multiplication: `W_{d-1} = [T]_{d-1}`, then
/// `W~_k = W_k B_{k+1}`, `W_{k-1} = Reshape(W~_k, p_1...p_{k-1}, p_k r_k)`.
///
/// `factors[j]` is `B_{j+2}` of shape `(p_{j+2} r_{j+2}) x r_{j+1}` with
/// `r_d = 1`. Returns `(W_k, W~_k)` for `k = 1..d-1` (index `k-1`).
pub fn backward_sequential_multiply(
    t: &DenseTensor,
    factors: &[Matrix],
) -> Result<Vec<(Matrix, Matrix)>> {
    let d = t.order();
    if d < 2 || factors.len() != d - 1 {
        return Err(Error::argument(format!(
            "backward multiply needs d-1 = {} factors, got {}",
            d.saturating_sub(1),
            factors.len()
        )));
    }
    let dims = t.dims();
    let mut out: Vec<Option<(Matrix, Matrix)>> = (0..d - 1).map(|_| None).collect();
    let mut w = sequential_unfold(t, d - 1)?;
    for k in (1..d).rev() {
        let b = &factors[k - 1]; // B_{k+1}
        let r_k = b.cols();
        if w.cols() != b.rows() {
            return Err(Error::argument(format!(
                "backward factor B_{} has {} rows, expected {}",
                k + 1,
                b.rows(),
                w.cols()
            )));
        }
        let wt = w.matmul(b)?;
        let prev = if k > 1 {
            Some(reshape_matrix(
                &wt,
                checked_product(&dims[..k - 1])?,
                dims[k - 1] * r_k,
            )?)
        } else {
            None
        };
        out[k - 1] = Some((w, wt));
        match prev {
            Some(p) => w = p,
            None => break,
        }
    }
    Ok(out.into_iter().map(|o| o.unwrap()).collect())
}

/// Multiply `m` (whose columns enumerate the trailing modes, first one
/// fastest) by the chain `(B_d (x) I)...(B_{k+2} (x) I) B_{k+1}` without
/// materializing any Kronecker factor. `factors[j]` is `B_{k+1+j}`.
pub fn apply_backward_chain(
    m: &Matrix,
    trailing_dims: &[usize],
    factors: &[&Matrix],
) -> Result<Matrix> {
    if factors.is_empty() || trailing_dims.len() != factors.len() {
        return Err(Error::argument(
            "backward chain: one factor per trailing mode required",
        ));
    }
    let mut t = m.clone();
    for j in (1..factors.len()).rev() {
        let block = checked_product(&trailing_dims[..j])?;
        t = mult_kron_identity_right(&t, factors[j], block)?;
    }
    t.matmul(factors[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_tensor(dims: &[usize], rng: &mut SeededRng) -> DenseTensor {
        let n = checked_product(dims).unwrap();
        let data = (0..n).map(|_| rng.standard_normal()).collect();
        DenseTensor::new(dims.to_vec(), data).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
    }

    fn frob_diff(a: &Matrix, b: &Matrix) -> f64 {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn unfold_order2_is_identity() {
        let t = DenseTensor::new(vec![2, 3], (0..6).map(|x| x as f64).collect()).unwrap();
        let m = sequential_unfold(&t, 1).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.data(), t.data());
    }

    #[test]
    fn unfold_index_formula_2x2x2() {
        let mut t = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        // 1-based (1,1,2) -> 0-based (0,0,1)
        t.set(&[0, 0, 1], 7.0);
        let m = sequential_unfold(&t, 1).unwrap();
        // row 1, column (i3-1)p2 + i2 = 3 (1-based) -> (0, 2)
        assert_eq!(m.get(0, 2), 7.0);
    }

    #[test]
    fn unfold_matches_index_tuple_oracle() {
        let mut rng = SeededRng::new(1, 0);
        let dims = [3usize, 4, 2, 5];
        let t = random_tensor(&dims, &mut rng);
        for k in 1..dims.len() {
            let m = sequential_unfold(&t, k).unwrap();
            for i0 in 0..dims[0] {
                for i1 in 0..dims[1] {
                    for i2 in 0..dims[2] {
                        for i3 in 0..dims[3] {
                            let idx = [i0, i1, i2, i3];
                            let mut row = 0;
                            let mut stride = 1;
                            for (kk, &i) in idx.iter().enumerate().take(k) {
                                row += i * stride;
                                stride *= dims[kk];
                            }
                            let mut col = 0;
                            let mut stride = 1;
                            for (kk, &i) in idx.iter().enumerate().skip(k) {
                                col += i * stride;
                                stride *= dims[kk];
                            }
                            assert_eq!(m.get(row, col), t.get(&idx));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fold_round_trip() {
        let mut rng = SeededRng::new(2, 0);
        let dims = [2usize, 3, 4];
        let t = random_tensor(&dims, &mut rng);
        for k in 1..dims.len() {
            let m = sequential_unfold(&t, k).unwrap();
            let back = fold(&m, &dims, k).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn fold_order1() {
        let m = Matrix::new(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // an order-2 (1, 4) tensor carries the same data; order-1 handled by DenseTensor::new
        let t = DenseTensor::new(vec![4], m.data().to_vec()).unwrap();
        assert_eq!(t.vectorize(), m.data());
    }

    #[test]
    fn fold_entries_by_oracle() {
        let mut rng = SeededRng::new(3, 0);
        let dims = [2usize, 3, 2];
        let m = random_matrix(6, 2, &mut rng);
        let t = fold(&m, &dims, 2).unwrap();
        for i0 in 0..2 {
            for i1 in 0..3 {
                for i2 in 0..2 {
                    assert_eq!(t.get(&[i0, i1, i2]), m.get(i0 + i1 * 2, i2));
                }
            }
        }
    }

    #[test]
    fn fold_shape_mismatch_errors() {
        let m = Matrix::zeros(4, 3);
        assert!(fold(&m, &[2, 3, 2], 2).is_err());
        assert!(sequential_unfold(&DenseTensor::zeros(&[2, 2]).unwrap(), 2).is_err());
    }

    #[test]
    fn reshape_identity_when_q2_is_1() {
        let mut rng = SeededRng::new(4, 0);
        let a = random_matrix(3, 5, &mut rng);
        let b = reshape_matrix(&a, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reshape_index_formula() {
        // q1 = q2 = q3 = 2, A_{1,2} = 5 (1-based; i2 = 2, i3 = 1)
        let mut a = Matrix::zeros(2, 4);
        a.set(0, 1, 5.0);
        let b = reshape_matrix(&a, 4, 2).unwrap();
        // A~_{(i2-1)q1 + i1, i3} = A~_{3,1} (1-based) -> (2, 0)
        assert_eq!(b.get(2, 0), 5.0);
    }

    #[test]
    fn reshape_matches_triple_loop_oracle() {
        let mut rng = SeededRng::new(5, 0);
        let (q1, q2, q3) = (3usize, 4usize, 5usize);
        let a = random_matrix(q1, q2 * q3, &mut rng);
        let b = reshape_matrix(&a, q1 * q2, q3).unwrap();
        for i1 in 0..q1 {
            for i2 in 0..q2 {
                for i3 in 0..q3 {
                    assert_eq!(b.get(i2 * q1 + i1, i3), a.get(i1, i3 * q2 + i2));
                }
            }
        }
        // inverse direction round-trips
        let back = reshape_matrix(&b, q1, q2 * q3).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn reshape_rejects_non_factorable() {
        let a = Matrix::zeros(4, 6);
        assert!(reshape_matrix(&a, 3, 8).is_err());
    }

    #[test]
    fn realignment_small_cases() {
        let a = realignment_matrix(1, 4).unwrap();
        assert_eq!(a, Matrix::identity(4));
        let b = realignment_matrix(2, 1).unwrap();
        assert_eq!(b.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn realignment_reshaping_identity() {
        // [T]_2 = (I_{p2} (x) [T]_1) A^{(p2, p3)} on a (2, 2, 3) tensor
        let mut rng = SeededRng::new(6, 0);
        let t = random_tensor(&[2, 2, 3], &mut rng);
        let t1 = sequential_unfold(&t, 1).unwrap();
        let t2 = sequential_unfold(&t, 2).unwrap();
        let a = realignment_matrix(2, 3).unwrap();
        let lhs = kronecker(&Matrix::identity(2), &t1).unwrap().matmul(&a).unwrap();
        assert_eq!(frob_diff(&lhs, &t2), 0.0);
    }

    #[test]
    fn realignment_identity_all_mode_pairs() {
        let mut rng = SeededRng::new(7, 0);
        let dims = [2usize, 3, 2, 2];
        let t = random_tensor(&dims, &mut rng);
        for i in 1..dims.len() - 1 {
            for j in i + 1..dims.len() {
                if j > dims.len() - 1 {
                    continue;
                }
                let ti = sequential_unfold(&t, i).unwrap();
                let tj = sequential_unfold(&t, j).unwrap();
                let mid = checked_product(&dims[i..j]).unwrap();
                let tail = checked_product(&dims[j..]).unwrap();
                let a = realignment_matrix(mid, tail).unwrap();
                let lhs = kronecker(&Matrix::identity(mid), &ti)
                    .unwrap()
                    .matmul(&a)
                    .unwrap();
                assert_eq!(frob_diff(&lhs, &tj), 0.0, "i={} j={}", i, j);
            }
        }
    }

    #[test]
    fn kronecker_small_cases() {
        let v = Matrix::new(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let i1 = Matrix::identity(1);
        assert_eq!(kronecker(&i1, &v).unwrap(), v);
        let s = Matrix::new(1, 1, vec![2.0]).unwrap();
        let out = kronecker(&s, &Matrix::identity(2)).unwrap();
        assert_eq!(out.data(), &[2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn kronecker_matches_quadruple_loop() {
        let mut rng = SeededRng::new(8, 0);
        let u = random_matrix(2, 3, &mut rng);
        let v = random_matrix(3, 2, &mut rng);
        let k = kronecker(&u, &v).unwrap();
        for a in 0..2 {
            for c in 0..3 {
                for b in 0..3 {
                    for e in 0..2 {
                        assert_eq!(k.get(a * 3 + b, c * 2 + e), u.get(a, c) * v.get(b, e));
                    }
                }
            }
        }
    }

    // Materialize M^{(L)}_{prod,k} = (I (x) M_1)...(I (x) M_{k-1}) M_k.
    fn materialize_m_prod(factors: &[Matrix], dims: &[usize], k: usize) -> Matrix {
        let mut prod = factors[0].clone();
        for i in 1..k {
            let eye = Matrix::identity(dims[i]);
            prod = kronecker(&eye, &prod).unwrap().matmul(&factors[i]).unwrap();
        }
        prod
    }

    // Materialize the backward chain mapping the trailing modes
    // p_{start}...p_d down to r_{start-1}:
    //   (B_d (x) I_{p_start..p_{d-1}}) ... (B_{start+1} (x) I_{p_start}) B_start
    // with factors[j] = B_{j+2} (1-based modes).
    fn materialize_b_prod(factors: &[Matrix], dims: &[usize], start: usize) -> Matrix {
        let d = dims.len();
        let mut prod = factors[start - 2].clone(); // B_start
        for j in start + 1..=d {
            let block: usize = dims[start - 1..j - 1].iter().product();
            prod = kronecker(&factors[j - 2], &Matrix::identity(block))
                .unwrap()
                .matmul(&prod)
                .unwrap();
        }
        prod
    }

    #[test]
    fn forward_multiply_single_step() {
        let mut rng = SeededRng::new(9, 0);
        let t = random_tensor(&[3, 4], &mut rng);
        let m1 = random_matrix(3, 2, &mut rng);
        let out = forward_sequential_multiply(&t, std::slice::from_ref(&m1)).unwrap();
        let expect = m1.matmul_tn(&sequential_unfold(&t, 1).unwrap()).unwrap();
        assert!(frob_diff(&out[0].1, &expect) < 1e-14);
    }

    #[test]
    fn forward_multiply_matches_kronecker_oracle() {
        let mut rng = SeededRng::new(10, 0);
        let dims = [2usize, 2, 2];
        let t = random_tensor(&dims, &mut rng);
        let factors = vec![random_matrix(2, 1, &mut rng), random_matrix(2, 1, &mut rng)];
        let out = forward_sequential_multiply(&t, &factors).unwrap();
        for k in 1..dims.len() {
            let tk = sequential_unfold(&t, k).unwrap();
            let mprod = materialize_m_prod(&factors, &dims, k);
            let expect = mprod.matmul_tn(&tk).unwrap();
            let rel = frob_diff(&out[k - 1].1, &expect) / expect.frob_norm().max(1e-300);
            assert!(rel <= 1e-12, "k={} rel={}", k, rel);
            if k >= 2 {
                let mprev = materialize_m_prod(&factors, &dims, k - 1);
                let eye = Matrix::identity(dims[k - 1]);
                let expect_s = kronecker(&eye, &mprev.transpose())
                    .unwrap()
                    .matmul(&tk)
                    .unwrap();
                let rel = frob_diff(&out[k - 1].0, &expect_s) / expect_s.frob_norm().max(1e-300);
                assert!(rel <= 1e-12);
            }
        }
    }

    #[test]
    fn forward_multiply_zero_tensor() {
        let mut rng = SeededRng::new(11, 0);
        let t = DenseTensor::zeros(&[2, 3, 2]).unwrap();
        let factors = vec![random_matrix(2, 2, &mut rng), random_matrix(6, 1, &mut rng)];
        let out = forward_sequential_multiply(&t, &factors).unwrap();
        for (s, st) in out {
            assert_eq!(s.frob_norm(), 0.0);
            assert_eq!(st.frob_norm(), 0.0);
        }
    }

    #[test]
    fn backward_multiply_single_step() {
        let mut rng = SeededRng::new(12, 0);
        let t = random_tensor(&[3, 4], &mut rng);
        let b2 = random_matrix(4, 2, &mut rng);
        let out = backward_sequential_multiply(&t, std::slice::from_ref(&b2)).unwrap();
        let expect = sequential_unfold(&t, 1).unwrap().matmul(&b2).unwrap();
        assert!(frob_diff(&out[0].1, &expect) < 1e-14);
    }

    #[test]
    fn backward_multiply_matches_kronecker_oracle() {
        let mut rng = SeededRng::new(13, 0);
        let dims = [2usize, 3, 2];
        let ranks = [2usize, 1];
        let t = random_tensor(&dims, &mut rng);
        // factors[j] = B_{j+2}: B_2 in (p2 r2) x r1, B_3 in (p3 r3) x r2
        let factors = vec![
            random_matrix(dims[1] * ranks[1], ranks[0], &mut rng),
            random_matrix(dims[2] * 1, ranks[1], &mut rng),
        ];
        let out = backward_sequential_multiply(&t, &factors).unwrap();
        for k in 1..dims.len() {
            let tk = sequential_unfold(&t, k).unwrap();
            let bprod = materialize_b_prod(&factors, &dims, k + 1);
            let expect_wt = tk.matmul(&bprod).unwrap();
            let rel = frob_diff(&out[k - 1].1, &expect_wt) / expect_wt.frob_norm().max(1e-300);
            assert!(rel <= 1e-12, "k={} rel={}", k, rel);
            if k + 2 <= dims.len() {
                let bprod2 = materialize_b_prod(&factors, &dims, k + 2);
                let eye = Matrix::identity(dims[k]);
                let expect_w = tk.matmul(&kronecker(&bprod2, &eye).unwrap()).unwrap();
                let rel = frob_diff(&out[k - 1].0, &expect_w) / expect_w.frob_norm().max(1e-300);
                assert!(rel <= 1e-12);
            } else {
                let rel = frob_diff(&out[k - 1].0, &tk) / tk.frob_norm().max(1e-300);
                assert!(rel <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_multiply_zero_tensor() {
        let mut rng = SeededRng::new(14, 0);
        let t = DenseTensor::zeros(&[2, 3, 2]).unwrap();
        let factors = vec![random_matrix(3, 1, &mut rng), random_matrix(2, 1, &mut rng)];
        let out = backward_sequential_multiply(&t, &factors).unwrap();
        for (w, wt) in out {
            assert_eq!(w.frob_norm(), 0.0);
            assert_eq!(wt.frob_norm(), 0.0);
        }
    }

    #[test]
    fn multiplies_are_linear_in_tensor() {
        let mut rng = SeededRng::new(15, 0);
        let dims = [2usize, 2, 3];
        let a = random_tensor(&dims, &mut rng);
        let b = random_tensor(&dims, &mut rng);
        let sum = a.add(&b).unwrap();
        let factors = vec![random_matrix(2, 2, &mut rng), random_matrix(4, 1, &mut rng)];
        let fa = forward_sequential_multiply(&a, &factors).unwrap();
        let fb = forward_sequential_multiply(&b, &factors).unwrap();
        let fs = forward_sequential_multiply(&sum, &factors).unwrap();
        for k in 0..fa.len() {
            for i in 0..fa[k].1.data().len() {
                let lhs = fs[k].1.data()[i];
                let rhs = fa[k].1.data()[i] + fb[k].1.data()[i];
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vectorize_cases() {
        let t = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.vectorize(), &[1.0, 2.0, 3.0]);
        // dims (2,2): vec equals column-stacking
        let m = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.get(&[0, 0]), 1.0);
        assert_eq!(m.get(&[1, 0]), 2.0);
        assert_eq!(m.get(&[0, 1]), 3.0);
        let mut rng = SeededRng::new(16, 0);
        let t = random_tensor(&[3, 2, 4], &mut rng);
        for i0 in 0..3 {
            for i1 in 0..2 {
                for i2 in 0..4 {
                    let lin = i0 + i1 * 3 + i2 * 6;
                    assert_eq!(t.vectorize()[lin], t.get(&[i0, i1, i2]));
                }
            }
        }
    }

    #[test]
    fn frobenius_invariant_under_permutation_ops() {
        let mut rng = SeededRng::new(17, 0);
        let t = random_tensor(&[3, 2, 2, 2], &mut rng);
        let n = t.frob_norm();
        for k in 1..4 {
            let m = sequential_unfold(&t, k).unwrap();
            assert!((m.frob_norm() - n).abs() < 1e-12);
            let back = fold(&m, t.dims(), k).unwrap();
            assert!((back.frob_norm() - n).abs() < 1e-12);
        }
        let m = sequential_unfold(&t, 1).unwrap();
        let r = reshape_matrix(&m, 6, 4).unwrap();
        assert!((r.frob_norm() - n).abs() < 1e-12);
    }

    #[test]
    fn kron_helpers_match_materialized_products() {
        let mut rng = SeededRng::new(18, 0);
        let m = random_matrix(3, 8, &mut rng); // q x (block * P) with block = 2, P = 4
        let a = random_matrix(4, 2, &mut rng);
        let fast = mult_kron_identity_right(&m, &a, 2).unwrap();
        let slow = m.matmul(&kronecker(&a, &Matrix::identity(2)).unwrap()).unwrap();
        assert!(frob_diff(&fast, &slow) < 1e-12);

        let prev = random_matrix(4, 2, &mut rng);
        let u = random_matrix(6, 3, &mut rng); // (r_prev * p) x r with p = 3
        let fast = kron_identity_apply(&prev, &u, 3).unwrap();
        let slow = kronecker(&Matrix::identity(3), &prev).unwrap().matmul(&u).unwrap();
        assert!(frob_diff(&fast, &slow) < 1e-12);

        let prev = random_matrix(4, 2, &mut rng);
        let u = random_matrix(6, 3, &mut rng); // (p * r_prev) x r with p = 3
        let fast = kron_identity_expand(&prev, &u, 3).unwrap();
        let slow = kronecker(&prev, &Matrix::identity(3)).unwrap().matmul(&u).unwrap();
        assert!(frob_diff(&fast, &slow) < 1e-12);
    }
}
