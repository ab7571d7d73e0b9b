//! Collective angular-momentum operators in the maximal-spin Dicke block.
//!
//! The basis is `|j, m⟩` with `j = N/2` and `m` running from `+j` down to
//! `-j`; index `k` holds `m = j - k`. Every other module relies on this
//! ordering, so `|j, +j⟩` is always basis vector 0.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance for the `hermitian` flag on operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// The `(N+1)`-dimensional `j = N/2` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularMomentumBasis {
    n_spins: usize,
}

impl AngularMomentumBasis {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::InvalidArgument("n_spins must be at least 1".into()));
        }
        Ok(Self { n_spins })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Total spin `j = N/2`.
    pub fn j(&self) -> f64 {
        self.n_spins as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        self.j() - k as f64
    }

    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m(k)).collect()
    }

    /// `j(j+1)`, the eigenvalue of `J²` on the block.
    pub fn casimir(&self) -> f64 {
        let j = self.j();
        j * (j + 1.0)
    }
}

/// Builds the maximal-spin basis for `n_spins` spins.
pub fn build_basis(n_spins: usize) -> Result<AngularMomentumBasis> {
    AngularMomentumBasis::new(n_spins)
}

/// Dense square complex operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: Array2<C64>,
    hermitian: bool,
}

impl Operator {
    /// Wraps a matrix. With `hermitian = true` the matrix is checked against
    /// `max|A - A†| <= 1e-12 max|A|`.
    pub fn new(matrix: Array2<C64>, hermitian: bool) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        let op = Self { matrix, hermitian: false };
        if hermitian {
            let defect = op.hermiticity_defect();
            if defect > HERMITIAN_TOL * op.max_abs().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "operator flagged hermitian has max|A - A†| = {defect:e}"
                )));
            }
        }
        Ok(Self { hermitian, ..op })
    }

    pub(crate) fn from_parts(matrix: Array2<C64>, hermitian: bool) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix, hermitian }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(Array2::eye(dim), true)
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

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(self.matrix.t().mapv(|z| z.conj()), self.hermitian)
    }

    pub fn dot(&self, other: &Operator) -> Self {
        Self::from_parts(self.matrix.dot(&other.matrix), false)
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        let ab = self.matrix.dot(&other.matrix);
        let ba = other.matrix.dot(&self.matrix);
        Self::from_parts(ab - ba, false)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let herm = self.hermitian && factor.im == 0.0;
        Self::from_parts(self.matrix.mapv(|z| z * factor), herm)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// `max|A - A†|`.
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

    /// Elementwise `max|A - B|`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_parts(&self.matrix + &rhs.matrix, self.hermitian && rhs.hermitian)
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_parts(&self.matrix - &rhs.matrix, self.hermitian && rhs.hermitian)
    }
}

pub(crate) fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub(crate) fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn build_jz(basis: &AngularMomentumBasis) -> Operator {
    let diag = Array1::from_iter(basis.m_values().into_iter().map(|m| C64::new(m, 0.0)));
    Operator::from_parts(Array2::from_diag(&diag), true)
}

/// Raising operator. `J₊|j,m⟩ = √((j-m)(j+m+1)) |j,m+1⟩`, which in the
/// descending ordering is the super-diagonal `(k, k+1)` with amplitude
/// `√((k+1)(N-k))`.
pub fn build_jplus(basis: &AngularMomentumBasis) -> Operator {
    let n = basis.n_spins();
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    for k in 0..n {
        let amp = (((k + 1) * (n - k)) as f64).sqrt();
        m[[k, k + 1]] = C64::new(amp, 0.0);
    }
    Operator::from_parts(m, false)
}

pub fn build_jminus(basis: &AngularMomentumBasis) -> Operator {
    build_jplus(basis).dagger()
}

/// `J_x = (J₊ + J₋)/2`.
pub fn build_jx(basis: &AngularMomentumBasis) -> Operator {
    let jp = build_jplus(basis);
    let jm = jp.dagger();
    Operator::from_parts((jp.matrix + jm.matrix).mapv(|z| z * 0.5), true)
}

/// `J_y = (J₊ - J₋)/(2i)`.
pub fn build_jy(basis: &AngularMomentumBasis) -> Operator {
    let jp = build_jplus(basis);
    let jm = jp.dagger();
    let factor = C64::new(0.0, -0.5);
    Operator::from_parts((jp.matrix - jm.matrix).mapv(|z| z * factor), true)
}

/// `J² = J_x² + J_y² + J_z²` assembled from the component operators.
pub fn build_j_squared(basis: &AngularMomentumBasis) -> Operator {
    let jx = build_jx(basis);
    let jy = build_jy(basis);
    let jz = build_jz(basis);
    let sum = jx.matrix.dot(&jx.matrix) + jy.matrix.dot(&jy.matrix) + jz.matrix.dot(&jz.matrix);
    Operator::from_parts(sum, true)
}

/// Parity sign selecting a projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ParitySign {
    Positive,
    Negative,
}

impl ParitySign {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Self::Positive),
            -1 => Ok(Self::Negative),
            other => Err(Error::InvalidArgument(format!("parity sign must be ±1, got {other}"))),
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Self::Positive => 1,
            Self::Negative => -1,
        }
    }
}

/// `P± = [1 ± exp(iπJ_z) exp(iπN/2)] / 2`.
///
/// `exp(iπ(m + N/2)) = (-1)^(m+j)` and `m + j = N - k` is an integer, so the
/// diagonal is evaluated exactly as 0 or 1.
pub fn build_parity_projector(basis: &AngularMomentumBasis, sign: ParitySign) -> Operator {
    let n = basis.n_spins();
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    for k in 0..dim {
        let phase = if (n - k).is_multiple_of(2) { 1 } else { -1 };
        let value = (1 + sign.as_i32() * phase) / 2;
        m[[k, k]] = C64::new(value as f64, 0.0);
    }
    Operator::from_parts(m, true)
}

/// `Tr(op ρ)`.
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    let r = rho.matrix();
    if op.dim() != r.nrows() {
        return Err(Error::DimensionMismatch { expected: op.dim(), found: r.nrows() });
    }
    Ok(trace_product(op.matrix(), r))
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[[i, k]] * b[[k, i]];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_values() {
        let b = build_basis(2).unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(b.m_values(), vec![1.0, 0.0, -1.0]);
        let b = build_basis(1).unwrap();
        assert_eq!(b.m_values(), vec![0.5, -0.5]);
        assert_eq!(build_basis(50).unwrap().dim(), 51);
        assert!(matches!(build_basis(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn jz_diagonal() {
        let jz = build_jz(&build_basis(2).unwrap());
        let diag: Vec<f64> = jz.matrix().diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
        let jz1 = build_jz(&build_basis(1).unwrap());
        assert_eq!(jz1.matrix()[[0, 0]].re, 0.5);
        assert_eq!(jz1.matrix()[[1, 1]].re, -0.5);
        assert_eq!(build_jz(&build_basis(4).unwrap()).trace(), ZERO);
    }

    #[test]
    fn jplus_entries() {
        let jp = build_jplus(&build_basis(2).unwrap());
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(jp.matrix()[[0, 1]].re, s2, epsilon = 1e-15);
        assert_abs_diff_eq!(jp.matrix()[[1, 2]].re, s2, epsilon = 1e-15);
        let jp1 = build_jplus(&build_basis(1).unwrap());
        assert_eq!(jp1.matrix()[[0, 1]].re, 1.0);
        for n in 1..8 {
            let jp = build_jplus(&build_basis(n).unwrap());
            // top of the ladder: column 0 is empty
            assert!(jp.matrix().column(0).iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn spin_half_jx_is_half_sigma_x() {
        let jx = build_jx(&build_basis(1).unwrap());
        assert_eq!(jx.matrix()[[0, 1]], C64::new(0.5, 0.0));
        assert_eq!(jx.matrix()[[1, 0]], C64::new(0.5, 0.0));
        assert_eq!(jx.matrix()[[0, 0]], ZERO);
    }

    #[test]
    fn jx_spectrum_spin_one() {
        use ndarray_linalg::{Eigh, UPLO};
        let jx = build_jx(&build_basis(2).unwrap());
        let (vals, _) = jx.matrix().eigh(UPLO::Lower).unwrap();
        let expected = [-1.0, 0.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn j_squared_is_casimir() {
        for n in [2usize, 50] {
            let b = build_basis(n).unwrap();
            let j2 = build_j_squared(&b);
            let expected = Operator::identity(b.dim()).scaled(C64::new(b.casimir(), 0.0));
            assert!(j2.max_abs_diff(&expected) < 1e-12 * b.casimir());
        }
        assert_eq!(build_basis(50).unwrap().casimir(), 650.0);
    }

    #[test]
    fn j_squared_commutes_with_generators() {
        let b = build_basis(12).unwrap();
        let j2 = build_j_squared(&b);
        assert!(j2.commutator(&build_jz(&b)).max_abs() < 1e-10);
        assert!(j2.commutator(&build_jplus(&b)).max_abs() < 1e-10);
    }

    #[test]
    fn parity_spin_one() {
        let b = build_basis(2).unwrap();
        let p = build_parity_projector(&b, ParitySign::Positive);
        let diag: Vec<f64> = p.matrix().diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 0.0, 1.0]);
        assert!(ParitySign::from_sign(0).is_err());
    }

    #[test]
    fn expectation_values() {
        let b = build_basis(6).unwrap();
        let top = DensityMatrix::basis_state(b.dim(), 0);
        assert_eq!(expectation(&build_jz(&b), &top).unwrap().re, 3.0);
        let mixed = DensityMatrix::maximally_mixed(b.dim());
        assert_eq!(expectation(&build_jplus(&b), &mixed).unwrap(), ZERO);
        let j2 = expectation(&build_j_squared(&b), &mixed).unwrap();
        assert_abs_diff_eq!(j2.re, b.casimir(), epsilon = 1e-12);
        let other = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            expectation(&build_jz(&b), &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hermitian_flag_is_checked() {
        let jp = build_jplus(&build_basis(3).unwrap());
        assert!(Operator::new(jp.into_matrix(), true).is_err());
    }
}
