use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::spin_ops::{max_abs, C64, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Array2<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity (1e-10), unit trace (1e-10) and
    /// positivity (min eigenvalue >= -1e-8).
    pub fn new(matrix: Array2<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Square check only.
    pub fn from_matrix_unchecked(matrix: Array2<C64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        Ok(Self { matrix })
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut m = Array2::zeros((dim, dim));
        m[[index, index]] = C64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: Array2::eye(dim).mapv(|z: C64| z / dim as f64) }
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(ket: &Array1<C64>) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero ket".into()));
        }
        let d = ket.len();
        let m = Array2::from_shape_fn((d, d), |(i, j)| ket[i] * ket[j].conj() / (norm * norm));
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        let (vals, _) = self.matrix.eigh(UPLO::Lower)?;
        Ok(vals)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    pub fn validate(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::Numeric(format!("density matrix not hermitian ({defect:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Numeric(format!("density matrix trace is {tr}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::Numeric(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.matrix[[i, k]] * self.matrix[[k, i]];
            }
        }
        acc.re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        crate::spin_ops::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Copy with negative eigenvalues clamped to zero and the trace
    /// renormalized. For reporting only; solvers never call this.
    pub fn clamped_for_reporting(&self) -> Result<Self> {
        let (vals, vecs) = crate::linalg::eigh_hermitian(&self.matrix)?;
        let d = self.dim();
        let clamped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let mut m = Array2::zeros((d, d));
        for (k, &w) in clamped.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = vecs.column(k);
            for i in 0..d {
                for j in 0..d {
                    m[[i, j]] += col[i] * col[j].conj() * (w / total);
                }
            }
        }
        Ok(Self { matrix: m })
    }

    /// Column-stacked vectorization, `vec[i + d j] = ρ[i, j]`.
    pub fn to_vec(&self) -> Array1<C64> {
        vectorize(&self.matrix)
    }
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

pub(crate) fn vectorize(m: &Array2<C64>) -> Array1<C64> {
    let d = m.nrows();
    Array1::from_shape_fn(d * d, |k| m[[k % d, k / d]])
}

pub(crate) fn unvectorize(v: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j])
}
