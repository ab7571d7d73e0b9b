//! Sparse storage and a banded LU used by the large-dimension solver path.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::spin_ops::{C64, ZERO};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors as columns.
///
/// LAPACK is handed a column-major copy: for row-major complex input the
/// backend returns eigenvectors of the conjugate matrix.
pub fn eigh_hermitian(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let mut f = Array2::zeros(a.dim().f());
    f.assign(a);
    f.eigh(UPLO::Lower).map_err(|e| Error::Eigensolver(e.to_string()))
}

/// Compressed sparse row matrix, column indices sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        // drop exact zeros produced by cancellation
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.iter().zip(col_idx).zip(values) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n_rows, n_cols, row_ptr, col_idx: keep_cols, values: keep_vals }
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        let (r, c) = m.dim();
        let trip = m
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self::from_triplets(r, c, trip)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.n_rows);
        self.matvec_into(x.as_slice().unwrap(), y.as_slice_mut().unwrap());
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.n_rows {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// `A† x`.
    pub fn adjoint_matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.n_cols);
        for r in 0..self.n_rows {
            let xr = x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k].conj() * xr;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n_rows {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factorization with partial pivoting of a banded square matrix.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl`
/// super-diagonals hold pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Storage in bytes for an `n × n` matrix with the given bandwidths.
    pub fn storage_bytes(n: usize, kl: usize, ku: usize) -> u64 {
        (n as u64) * (2 * kl + ku + 1) as u64 * std::mem::size_of::<C64>() as u64
    }

    /// Factors `A + shift I`.
    pub fn factor(a: &CsrMatrix, shift: C64) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::DimensionMismatch { expected: n, found: a.n_cols() });
        }
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, width, data: vec![ZERO; n * width], pivots: vec![0; n] };
        for r in 0..n {
            for (c, v) in a.row(r) {
                let idx = lu.idx(r, c);
                lu.data[idx] = v;
            }
            let idx = lu.idx(r, r);
            lu.data[idx] += shift;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Linalg(format!("band LU: zero pivot at column {k}")));
            }
            self.pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = self.idx(k, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let factor = self.data[ik] / pivot;
                self.data[ik] = factor;
                if factor == ZERO {
                    continue;
                }
                let row_k = self.idx(k, k);
                let row_i = self.idx(i, k);
                for off in 1..=(last_col - k) {
                    let upper = self.data[row_k + off];
                    self.data[row_i + off] -= factor * upper;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &Array1<C64>) -> Array1<C64> {
        let n = self.n;
        let mut x = b.clone();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        let reach = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut acc = x[k];
            let base = self.idx(k, k);
            for off in 1..=((k + reach).min(n - 1) - k) {
                acc -= self.data[base + off] * x[k + off];
            }
            x[k] = acc / self.data[base];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::Solve;

    fn banded(n: usize, kl: usize, ku: usize) -> Array2<C64> {
        Array2::from_shape_fn((n, n), |(i, j)| {
            if j + kl >= i && j <= i + ku {
                let s = ((i * 31 + j * 17) % 23) as f64 - 11.0;
                C64::new(s, ((i + 3 * j) % 7) as f64 - 3.0)
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn csr_matches_dense() {
        let d = banded(9, 2, 3);
        let csr = CsrMatrix::from_dense(&d);
        assert_eq!(csr.to_dense(), d);
        assert_eq!(csr.bandwidths(), (2, 3));
        let x = Array1::from_shape_fn(9, |k| C64::new(k as f64, 1.0));
        let diff = &csr.matvec(&x) - &d.dot(&x);
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
        let adj = d.t().mapv(|z| z.conj()).dot(&x);
        let diff = &csr.adjoint_matvec(&x) - &adj;
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let one = C64::new(1.0, 0.0);
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, one), (0, 1, one), (1, 0, one), (1, 0, -one)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), C64::new(2.0, 0.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        for (n, kl, ku) in [(12, 2, 1), (30, 5, 7), (25, 0, 3), (40, 9, 9)] {
            let a = banded(n, kl, ku);
            let shift = C64::new(0.25, -0.5);
            let lu = BandLu::factor(&CsrMatrix::from_dense(&a), shift).unwrap();
            let b = Array1::from_shape_fn(n, |k| C64::new((k as f64).sin(), (k as f64).cos()));
            let x = lu.solve(&b);
            let shifted = &a + &Array2::eye(n).mapv(|z: C64| z * shift);
            let reference = shifted.solve(&b).unwrap();
            let err = (&x - &reference).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn eigh_vectors_satisfy_eigen_equation() {
        let a = ndarray::arr2(&[
            [C64::new(1.0, 0.0), C64::new(0.3, 0.7), C64::new(0.0, -0.2)],
            [C64::new(0.3, -0.7), C64::new(-0.5, 0.0), C64::new(0.1, 0.4)],
            [C64::new(0.0, 0.2), C64::new(0.1, -0.4), C64::new(2.0, 0.0)],
        ]);
        let (w, v) = eigh_hermitian(&a).unwrap();
        let lhs = a.dot(&v);
        let rhs = Array2::from_shape_fn((3, 3), |(i, k)| v[[i, k]] * w[k]);
        let err = (&lhs - &rhs).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn band_lu_singular() {
        let a = Array2::<C64>::zeros((4, 4));
        assert!(BandLu::factor(&CsrMatrix::from_dense(&a), ZERO).is_err());
    }
}
