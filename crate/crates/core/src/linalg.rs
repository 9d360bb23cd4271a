//! Dense symmetric matrices in packed lower-triangular storage and their
//! Cholesky factors.
//!
//! Row `i` of a packed matrix occupies `data[i(i+1)/2 .. i(i+1)/2 + i + 1]`,
//! so every row prefix is contiguous. That layout is what the factorization
//! and the forward substitutions below iterate over.

use rayon::prelude::*;
use thiserror::Error;

/// Smallest admissible squared pivot during factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

const BLOCK: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Symmetric matrix stored once as its lower triangle, mirrored on read.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; row_offset(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from the packed lower triangle (row-major).
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != row_offset(dim) {
            return Err(LinalgError::DimensionMismatch {
                expected: row_offset(dim),
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds from a closure evaluated on the lower triangle `j <= i`.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut m = Self::zeros(dim);
        m.rows_mut()
            .into_par_iter()
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(i, j);
                }
            });
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.data[row_offset(i) + j]
        } else {
            self.data[row_offset(j) + i]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        self.data[row_offset(r) + c] = v;
    }

    /// Lower-triangle row `i` (columns `0..=i`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let o = row_offset(i);
        &self.data[o..o + i + 1]
    }

    fn rows_mut(&mut self) -> Vec<&mut [f64]> {
        split_rows(&mut self.data, 0, self.dim)
    }

    /// Principal submatrix on the given (ascending or arbitrary) index list.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Self, LinalgError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(LinalgError::IndexOutOfRange {
                index: bad,
                dim: self.dim,
            });
        }
        Ok(Self::from_fn(indices.len(), |a, b| {
            self.get(indices[a], indices[b])
        }))
    }

    /// Principal submatrix on a contiguous index range.
    pub fn block(&self, range: std::ops::Range<usize>) -> Result<Self, LinalgError> {
        if range.end > self.dim {
            return Err(LinalgError::IndexOutOfRange {
                index: range.end.saturating_sub(1),
                dim: self.dim,
            });
        }
        let start = range.start;
        Ok(Self::from_fn(range.len(), |a, b| self.get(start + a, start + b)))
    }

    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        Cholesky::factor(self)
    }
}

/// Splits packed storage holding rows `first..first+count` into row slices.
fn split_rows(mut data: &mut [f64], first: usize, count: usize) -> Vec<&mut [f64]> {
    let mut rows = Vec::with_capacity(count);
    for i in first..first + count {
        let (head, tail) = data.split_at_mut(i + 1);
        rows.push(head);
        data = tail;
    }
    rows
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Lower-triangular Cholesky factor `Σ = F Fᵀ`, packed like [`SymmetricMatrix`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    data: Vec<f64>,
}

impl Cholesky {
    /// Blocked left-looking factorization. Rows below each diagonal block are
    /// filled in parallel; the result does not depend on the thread count.
    pub fn factor(matrix: &SymmetricMatrix) -> Result<Self, LinalgError> {
        let n = matrix.dim;
        let mut data = matrix.data.clone();
        let mut k0 = 0;
        while k0 < n {
            let k1 = (k0 + BLOCK).min(n);
            // Diagonal block, sequential.
            for i in k0..k1 {
                let oi = row_offset(i);
                for j in k0..=i {
                    let oj = row_offset(j);
                    let s = data[oi + j] - dot(&data[oi..oi + j], &data[oj..oj + j]);
                    if j == i {
                        if !(s > PIVOT_FLOOR) {
                            return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                        }
                        data[oi + i] = s.sqrt();
                    } else {
                        data[oi + j] = s / data[oj + j];
                    }
                }
            }
            if k1 < n {
                let (done, rest) = data.split_at_mut(row_offset(k1));
                let done: &[f64] = done;
                split_rows(rest, k1, n - k1)
                    .into_par_iter()
                    .for_each(|row| {
                        for j in k0..k1 {
                            let oj = row_offset(j);
                            let s = row[j] - dot(&row[..j], &done[oj..oj + j]);
                            row[j] = s / done[oj + j];
                        }
                    });
            }
            k0 = k1;
        }
        Ok(Self { dim: n, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let o = row_offset(i);
        &self.data[o..o + i + 1]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[row_offset(i) + i]
    }

    /// log det of the leading `k×k` principal submatrix.
    pub fn logdet_leading(&self, k: usize) -> f64 {
        2.0 * crate::numeric::compensated_sum((0..k.min(self.dim)).map(|i| self.diag(i).ln()))
    }

    pub fn logdet(&self) -> f64 {
        self.logdet_leading(self.dim)
    }

    /// Solves `F e = z` for the first `z.len()` entries (prefix forward
    /// substitution). `e[i]` is the standardized innovation at position `i`.
    pub fn forward_solve(&self, z: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if z.len() > self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        let mut e = Vec::with_capacity(z.len());
        for (i, &zi) in z.iter().enumerate() {
            let r = self.row(i);
            let v = (zi - dot(&r[..i], &e)) / r[i];
            e.push(v);
        }
        Ok(e)
    }

    /// Computes `F e` for a standard-normal vector `e` of full length.
    pub fn mul_lower(&self, e: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if e.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                got: e.len(),
            });
        }
        Ok((0..self.dim).map(|i| dot(self.row(i), &e[..=i])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_reconstruct(f: &Cholesky) -> Vec<Vec<f64>> {
        let n = f.dim();
        let get = |i: usize, j: usize| if j <= i { f.row(i)[j] } else { 0.0 };
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| get(i, k) * get(j, k)).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn factor_reconstructs_matrix_across_block_boundary() {
        let n = 150;
        let m = SymmetricMatrix::from_fn(n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            0.6f64.powf(d) + if i == j { 0.1 } else { 0.0 }
        });
        let f = m.cholesky().unwrap();
        let r = dense_reconstruct(&f);
        for i in 0..n {
            for j in 0..n {
                assert!((r[i][j] - m.get(i, j)).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn logdet_of_ar1_matches_closed_form() {
        // AR(1) correlation matrix: det = (1-φ²)^(n-1)
        let (n, phi) = (200usize, 0.7f64);
        let m = SymmetricMatrix::from_fn(n, |i, j| phi.powi((i - j) as i32));
        let f = m.cholesky().unwrap();
        let expect = (n as f64 - 1.0) * (1.0 - phi * phi).ln();
        assert!((f.logdet() - expect).abs() < 1e-10);
        assert!((f.logdet_leading(10) - 9.0 * (1.0 - phi * phi).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let mut m = SymmetricMatrix::identity(3);
        m.set(1, 0, 1.5);
        assert!(matches!(
            m.cholesky(),
            Err(LinalgError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn forward_solve_inverts_mul() {
        let m = SymmetricMatrix::from_fn(70, |i, j| 0.5f64.powi((i - j) as i32));
        let f = m.cholesky().unwrap();
        let e: Vec<f64> = (0..70).map(|k| (k as f64 * 0.37).sin()).collect();
        let z = f.mul_lower(&e).unwrap();
        let back = f.forward_solve(&z).unwrap();
        for (a, b) in e.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_reads_mirror() {
        let mut m = SymmetricMatrix::zeros(4);
        m.set(0, 3, 0.25);
        assert_eq!(m.get(3, 0), 0.25);
        assert_eq!(m.get(0, 3), 0.25);
    }
}
