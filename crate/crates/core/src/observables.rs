//! Spin moments, the symmetric-state concurrence and its two-qubit oracle.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::closed::{check_uniform, finite_difference};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::eigh_hermitian;
use crate::spin_ops::{
    build_jplus, build_jx, build_jy, build_jz, expectation, AngularMomentumBasis, Operator, C64, ZERO,
};

/// Relative tolerance on `⟨Jx²⟩ + ⟨Jy²⟩ + ⟨Jz²⟩ = j(j+1)`.
pub const CASIMIR_REL_TOL: f64 = 1e-8;

/// Steady-state spin expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub jz: f64,
    pub jz_normalized: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub jplus2_abs: f64,
    pub concurrence: f64,
    pub purity: f64,
}

/// The moments entering the concurrence formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMoments {
    pub jz: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub jplus2_abs: f64,
}

/// Operators reused across many density matrices of one basis.
#[derive(Debug, Clone)]
pub struct ObservableOperators {
    basis: AngularMomentumBasis,
    jz: Operator,
    jx2: Operator,
    jy2: Operator,
    jz2: Operator,
    jplus2: Operator,
}

impl ObservableOperators {
    pub fn new(basis: &AngularMomentumBasis) -> Self {
        let jz = build_jz(basis);
        let jx = build_jx(basis);
        let jy = build_jy(basis);
        let jp = build_jplus(basis);
        Self {
            basis: *basis,
            jx2: jx.dot(&jx),
            jy2: jy.dot(&jy),
            jz2: jz.dot(&jz),
            jplus2: jp.dot(&jp),
            jz,
        }
    }

    pub fn basis(&self) -> &AngularMomentumBasis {
        &self.basis
    }

    pub fn moments(&self, rho: &DensityMatrix) -> Result<SpinMoments> {
        let m = SpinMoments {
            jz: expectation(&self.jz, rho)?.re,
            jx2: expectation(&self.jx2, rho)?.re,
            jy2: expectation(&self.jy2, rho)?.re,
            jz2: expectation(&self.jz2, rho)?.re,
            jplus2_abs: expectation(&self.jplus2, rho)?.norm(),
        };
        let casimir = self.basis.casimir();
        let sum = m.jx2 + m.jy2 + m.jz2;
        if (sum - casimir).abs() > CASIMIR_REL_TOL * casimir.max(1.0) {
            return Err(Error::Numeric(format!("⟨J²⟩ = {sum} but j(j+1) = {casimir}")));
        }
        Ok(m)
    }

    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<ObservableSet> {
        let m = self.moments(rho)?;
        let n = self.basis.n_spins();
        let concurrence = if n >= 2 { concurrence_from_moments(&m, n)?.value } else { 0.0 };
        Ok(ObservableSet {
            jz: m.jz,
            jz_normalized: m.jz / self.basis.j(),
            jx2: m.jx2,
            jy2: m.jy2,
            jz2: m.jz2,
            jplus2_abs: m.jplus2_abs,
            concurrence,
            purity: rho.purity(),
        })
    }
}

pub fn observables(rho: &DensityMatrix, basis: &AngularMomentumBasis) -> Result<ObservableSet> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: rho.dim() });
    }
    ObservableOperators::new(basis).evaluate(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConcurrenceBranch {
    /// Coherence branch, `2 max{0, |⟨J₊²⟩|/N - (⟨Jx²⟩+⟨Jy²⟩)/N + 1/2}`.
    One,
    /// Population branch, `2 max{0, N/4 - ⟨Jz²⟩/N - S}`.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcurrenceDetail {
    pub value: f64,
    pub branch: ConcurrenceBranch,
    pub s: f64,
    pub b: f64,
    pub branch_one_value: f64,
    pub branch_two_value: f64,
    /// The alternative printed condition `(N² - 4⟨Jz²⟩)/N >= B` disagrees
    /// with the selector used here.
    pub selectors_disagree: bool,
}

/// Rescaled pairwise concurrence of a symmetric state.
pub fn concurrence(rho: &DensityMatrix, n_spins: usize) -> Result<f64> {
    let basis = AngularMomentumBasis::new(n_spins)?;
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: rho.dim() });
    }
    let m = ObservableOperators::new(&basis).moments(rho)?;
    Ok(concurrence_from_moments(&m, n_spins)?.value)
}

pub fn concurrence_from_moments(m: &SpinMoments, n_spins: usize) -> Result<ConcurrenceDetail> {
    if n_spins < 2 {
        return Err(Error::InvalidArgument("concurrence needs at least two spins".into()));
    }
    let n = n_spins as f64;
    let a = n * (n - 2.0) + 4.0 * m.jz2;
    let c = 4.0 * (n - 1.0) * m.jz;
    let mut radicand = a * a - c * c;
    let scale = (a * a).max(c * c).max(1.0);
    if radicand < 0.0 {
        if radicand < -1e-10 * scale {
            return Err(Error::NumericDomain(format!("negative radicand {radicand:e} in S")));
        }
        radicand = 0.0;
    }
    let s = radicand.sqrt() / (4.0 * n);
    let b = s + m.jplus2_abs / n;
    let branch_one_value = 2.0 * (m.jplus2_abs / n - (m.jx2 + m.jy2) / n + 0.5).max(0.0);
    let branch_two_value = 2.0 * (n / 4.0 - m.jz2 / n - s).max(0.0);
    let lhs = n * n - 4.0 * m.jz2;
    let selects_one = lhs / (2.0 * n) < b;
    let alt_selects_two = lhs / n >= b;
    let selectors_disagree = selects_one == alt_selects_two;
    let (branch, value) = if selects_one {
        (ConcurrenceBranch::One, branch_one_value)
    } else {
        (ConcurrenceBranch::Two, branch_two_value)
    };
    if selectors_disagree {
        log::info!(
            "concurrence selectors disagree (N={n_spins}): branch one {branch_one_value}, branch two {branch_two_value}"
        );
    }
    if value > 1.0 + 1e-8 {
        return Err(Error::NumericDomain(format!("concurrence {value} exceeds 1")));
    }
    Ok(ConcurrenceDetail { value, branch, s, b, branch_one_value, branch_two_value, selectors_disagree })
}

fn sigma_y_sigma_y() -> Array2<C64> {
    // σy ⊗ σy in the |uu⟩, |ud⟩, |du⟩, |dd⟩ basis
    let mut m = Array2::zeros((4, 4));
    let one = C64::new(1.0, 0.0);
    m[[0, 3]] = -one;
    m[[3, 0]] = -one;
    m[[1, 2]] = one;
    m[[2, 1]] = one;
    m
}

fn hermitian_sqrt(m: &Array2<C64>) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh_hermitian(m)?;
    let d = m.nrows();
    let mut out = Array2::zeros((d, d));
    for (k, &v) in vals.iter().enumerate() {
        let w = v.max(0.0).sqrt();
        if w == 0.0 {
            continue;
        }
        let col = vecs.column(k);
        for i in 0..d {
            for j in 0..d {
                out[[i, j]] += col[i] * col[j].conj() * w;
            }
        }
    }
    Ok(out)
}

/// Wootters concurrence of a two-qubit state.
///
/// The `λᵢ` are taken as square roots of the eigenvalues of the Hermitian
/// matrix `√ρ ρ̃ √ρ`, which share the spectrum of `ρ ρ̃`.
pub fn wootters_concurrence(rho2: &DensityMatrix) -> Result<f64> {
    if rho2.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho2.dim() });
    }
    let yy = sigma_y_sigma_y();
    let rho = rho2.matrix();
    let tilde = yy.dot(&rho.mapv(|z| z.conj())).dot(&yy);
    let root = hermitian_sqrt(rho)?;
    let r = root.dot(&tilde).dot(&root);
    let r = (&r + &r.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (vals, _) = r.eigh(UPLO::Lower)?;
    let mut lambdas: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Maps the spin-1 triplet of two spins into the product basis
/// `|uu⟩, |ud⟩, |du⟩, |dd⟩`.
pub fn embed_two_qubit(rho: &DensityMatrix, basis: &AngularMomentumBasis) -> Result<DensityMatrix> {
    if basis.n_spins() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two-qubit embedding needs N = 2, got {}",
            basis.n_spins()
        )));
    }
    if rho.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: rho.dim() });
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = Array2::<C64>::zeros((4, 3));
    v[[0, 0]] = C64::new(1.0, 0.0);
    v[[1, 1]] = C64::new(r, 0.0);
    v[[2, 1]] = C64::new(r, 0.0);
    v[[3, 2]] = C64::new(1.0, 0.0);
    let out = v.dot(rho.matrix()).dot(&v.t().mapv(|z| z.conj()));
    DensityMatrix::from_matrix_unchecked(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMinimum {
    pub derivative: Vec<f64>,
    pub argmin_index: usize,
    /// Sub-grid location from a parabola through the three samples around
    /// the minimum; the grid point itself at either edge.
    pub location: f64,
    pub value: f64,
}

/// First derivative of a sampled series and the refined position of its
/// minimum.
pub fn sweep_derivative(grid: &[f64], values: &[f64]) -> Result<DerivativeMinimum> {
    if grid.len() < 5 {
        return Err(Error::InvalidArgument("derivative sweep needs at least 5 points".into()));
    }
    let step = check_uniform(grid)?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-14 * hi.abs().max(lo.abs()).max(1e-300)) {
        return Err(Error::NoMinimum("series is flat".into()));
    }
    let derivative = finite_difference(grid, values, 1)?;
    let (idx, &dmin) = derivative
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let last = derivative.len() - 1;
    let (location, value) = if idx == 0 || idx == last {
        (grid[idx], dmin)
    } else {
        let (fm, f0, fp) = (derivative[idx - 1], dmin, derivative[idx + 1]);
        let curvature = fm - 2.0 * f0 + fp;
        if curvature > 0.0 {
            let offset = 0.5 * (fm - fp) / curvature;
            (grid[idx] + offset * step, f0 - 0.125 * (fm - fp) * (fm - fp) / curvature)
        } else {
            (grid[idx], f0)
        }
    };
    Ok(DerivativeMinimum { derivative, argmin_index: idx, location, value })
}

/// Normalized product-basis ket helper for tests and examples.
pub fn product_ket(amplitudes: [C64; 4]) -> Array1<C64> {
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Array1::from_iter(amplitudes.iter().map(|z| if norm > 0.0 { z / norm } else { ZERO }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> DensityMatrix {
        DensityMatrix::pure(&product_ket([c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap()
    }

    #[test]
    fn wootters_reference_states() {
        assert_abs_diff_eq!(wootters_concurrence(&bell()).unwrap(), 1.0, epsilon = 1e-10);
        let uu = DensityMatrix::basis_state(4, 0);
        assert_abs_diff_eq!(wootters_concurrence(&uu).unwrap(), 0.0, epsilon = 1e-10);
        for p in [0.1, 0.5, 0.8, 1.0] {
            let w = bell().matrix().mapv(|z| z * p) + Array2::eye(4).mapv(|z: C64| z * ((1.0 - p) / 4.0));
            let w = DensityMatrix::new(w).unwrap();
            let expected = ((3.0 * p - 1.0) / 2.0).max(0.0);
            assert_abs_diff_eq!(wootters_concurrence(&w).unwrap(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn embedding_examples() {
        let b = AngularMomentumBasis::new(2).unwrap();
        let e = embed_two_qubit(&DensityMatrix::basis_state(3, 1), &b).unwrap();
        assert!(e.max_abs_diff(&bell()) < 1e-15);
        let mixed = embed_two_qubit(&DensityMatrix::maximally_mixed(3), &b).unwrap();
        assert_abs_diff_eq!(mixed.matrix()[[1, 2]].re, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.trace().re, 1.0, epsilon = 1e-15);
        assert!(embed_two_qubit(&DensityMatrix::maximally_mixed(4), &AngularMomentumBasis::new(3).unwrap()).is_err());
    }

    #[test]
    fn coherent_and_bell_concurrence() {
        for n in [2, 5, 20] {
            let top = DensityMatrix::basis_state(n + 1, 0);
            assert_abs_diff_eq!(concurrence(&top, n).unwrap(), 0.0, epsilon = 1e-12);
        }
        let dicke = DensityMatrix::basis_state(3, 1);
        assert_abs_diff_eq!(concurrence(&dicke, 2).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn observable_set_of_top_state() {
        let b = AngularMomentumBasis::new(6).unwrap();
        let o = observables(&DensityMatrix::basis_state(7, 0), &b).unwrap();
        assert_abs_diff_eq!(o.jz_normalized, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.jx2 + o.jy2 + o.jz2, b.casimir(), epsilon = 1e-12);
        assert_eq!(o.concurrence, 0.0);
    }

    #[test]
    fn derivative_minimum_at_edge_for_parabola() {
        let grid: Vec<f64> = (0..11).map(|k| 0.5 + 0.1 * k as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|g| -(g - 1.0) * (g - 1.0)).collect();
        let d = sweep_derivative(&grid, &vals).unwrap();
        assert_eq!(d.argmin_index, 10);
        assert_abs_diff_eq!(d.location, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn derivative_minimum_refined_between_nodes() {
        let grid: Vec<f64> = (0..41).map(|k| 0.05 * k as f64).collect();
        // derivative -exp(-(g-1.013)^2/0.1) has its minimum off-grid
        let vals: Vec<f64> = grid
            .iter()
            .map(|g| -0.5 * (0.1f64 * std::f64::consts::PI).sqrt() * libm_erf((g - 1.013) / 0.1f64.sqrt()))
            .collect();
        let d = sweep_derivative(&grid, &vals).unwrap();
        assert!((d.location - 1.013).abs() < 0.01, "{}", d.location);
    }

    // Abramowitz-Stegun 7.1.26, adequate for a smooth test series.
    fn libm_erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t + 0.254829592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }

    fn random_triplet_state(rng: &mut rand_chacha::ChaCha8Rng) -> DensityMatrix {
        use rand::Rng;
        let a = Array2::from_shape_fn((3, 3), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut m = a.dot(&a.t().mapv(|z| z.conj()));
        // parity average: the closed form holds for states without
        // odd-offset coherences
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            m[[i, j]] = ZERO;
        }
        let tr = m.diag().sum();
        DensityMatrix::new(m.mapv(|z| z / tr)).unwrap()
    }

    #[test]
    fn closed_form_matches_wootters_for_two_spins() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
        let b = AngularMomentumBasis::new(2).unwrap();
        for _ in 0..50 {
            let rho = random_triplet_state(&mut rng);
            let closed = concurrence(&rho, 2).unwrap();
            let oracle = wootters_concurrence(&embed_two_qubit(&rho, &b).unwrap()).unwrap();
            assert_abs_diff_eq!(closed, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn two_spin_steady_state_matches_wootters() {
        use crate::closed::ModelParams;
        use crate::liouvillian::Feedback;
        use crate::steady::{solve_model, SolverOptions};
        let b = AngularMomentumBasis::new(2).unwrap();
        for theta in [0.0, 2.0] {
            let p = ModelParams::new(2, 1.0, 0.5, 0.05).with_theta(theta, 0.0, 0.0);
            let rho = solve_model(&p, Feedback::On, &SolverOptions::default()).unwrap().rho;
            let closed = concurrence(&rho, 2).unwrap();
            let oracle = wootters_concurrence(&embed_two_qubit(&rho, &b).unwrap()).unwrap();
            assert_abs_diff_eq!(closed, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_series_has_no_minimum() {
        let grid: Vec<f64> = (0..6).map(|k| k as f64).collect();
        assert!(matches!(sweep_derivative(&grid, &[2.0; 6]), Err(Error::NoMinimum(_))));
    }
}
