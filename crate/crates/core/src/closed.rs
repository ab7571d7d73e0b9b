//! Closed LMG model: Hamiltonian, spectrum with parity labels, ground-state
//! energy curves and the density of states.

use ndarray::Array2;
use ndarray_linalg::{Eigh, EigValsh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_ops::{
    build_basis, build_jx, build_jz, build_parity_projector, AngularMomentumBasis, Operator,
    ParitySign, C64,
};

/// Model parameters. Energies are in the same unit as `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub h: f64,
    pub gamma_x: f64,
    pub kappa: f64,
    pub n_spins: usize,
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
}

impl ModelParams {
    pub fn new(n_spins: usize, h: f64, gamma_x: f64, kappa: f64) -> Self {
        Self { h, gamma_x, kappa, n_spins, theta_x: 0.0, theta_y: 0.0, theta_z: 0.0 }
    }

    pub fn with_theta(mut self, theta_x: f64, theta_y: f64, theta_z: f64) -> Self {
        self.theta_x = theta_x;
        self.theta_y = theta_y;
        self.theta_z = theta_z;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::InvalidArgument("n_spins must be at least 1".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.h == 0.0 {
            return Err(Error::InvalidArgument("h must be nonzero".into()));
        }
        let all = [self.h, self.gamma_x, self.kappa, self.theta_x, self.theta_y, self.theta_z];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<AngularMomentumBasis> {
        build_basis(self.n_spins)
    }
}

fn check_basis(params: &ModelParams, basis: &AngularMomentumBasis) -> Result<()> {
    if basis.n_spins() != params.n_spins {
        return Err(Error::DimensionMismatch { expected: params.n_spins + 1, found: basis.dim() });
    }
    Ok(())
}

/// `H = -h J_z - (γ_x/N) J_x²`.
pub fn build_hamiltonian(params: &ModelParams, basis: &AngularMomentumBasis) -> Result<Operator> {
    check_basis(params, basis)?;
    let jz = build_jz(basis);
    let jx = build_jx(basis);
    let jx2 = jx.matrix().dot(jx.matrix());
    let n = basis.n_spins() as f64;
    let m = jz.matrix().mapv(|z| z * (-params.h)) - jx2.mapv(|z| z * (params.gamma_x / n));
    // Assembled from hermitian pieces; symmetrize the rounding of J_x².
    let sym = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    Operator::new(sym, true)
}

/// Parity label of an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityLabel {
    Positive,
    Negative,
    /// Neither projector expectation exceeds `1 - 1e-8`.
    Unlabeled,
}

impl ParityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "+1",
            Self::Negative => "-1",
            Self::Unlabeled => "unlabeled",
        }
    }
}

pub const PARITY_LABEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub states: Array2<C64>,
    pub parities: Vec<ParityLabel>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `⟨v_k|P₊|v_k⟩`.
    pub fn positive_parity_weight(&self, k: usize) -> f64 {
        let col = self.states.column(k);
        let n = self.dim() - 1;
        (0..self.dim()).filter(|i| (n - i).is_multiple_of(2)).map(|i| col[i].norm_sqr()).sum()
    }
}

fn is_real(m: &Array2<C64>) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Full eigendecomposition of a hermitian operator in the `j = N/2` block,
/// with each eigenvector labeled by parity.
pub fn diagonalize(hamiltonian: &Operator) -> Result<Spectrum> {
    if !hamiltonian.is_hermitian() {
        return Err(Error::InvalidArgument("diagonalize requires a hermitian operator".into()));
    }
    let dim = hamiltonian.dim();
    let basis = build_basis(dim - 1)?;
    let (energies, states) = if is_real(hamiltonian.matrix()) {
        let real = hamiltonian.matrix().mapv(|z| z.re);
        let (vals, vecs) =
            real.eigh(UPLO::Lower).map_err(|e| Error::Eigensolver(e.to_string()))?;
        (vals.to_vec(), vecs.mapv(|x| C64::new(x, 0.0)))
    } else {
        let (vals, vecs) = crate::linalg::eigh_hermitian(hamiltonian.matrix())?;
        (vals.to_vec(), vecs)
    };
    let plus = build_parity_projector(&basis, ParitySign::Positive);
    let plus_diag: Vec<f64> = plus.matrix().diag().iter().map(|z| z.re).collect();
    let mut spectrum = Spectrum { energies, states, parities: Vec::with_capacity(dim) };
    for k in 0..dim {
        let w_plus: f64 =
            spectrum.states.column(k).iter().zip(&plus_diag).map(|(v, p)| p * v.norm_sqr()).sum();
        let label = if w_plus > 1.0 - PARITY_LABEL_TOL {
            ParityLabel::Positive
        } else if 1.0 - w_plus > 1.0 - PARITY_LABEL_TOL {
            ParityLabel::Negative
        } else {
            ParityLabel::Unlabeled
        };
        spectrum.parities.push(label);
    }
    Ok(spectrum)
}

pub(crate) fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    let step = grid[1] - grid[0];
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("grid must be strictly ascending".into()));
    }
    for (index, w) in grid.windows(2).enumerate() {
        let s = w[1] - w[0];
        if (s - step).abs() > 1e-9 * step.abs() {
            return Err(Error::NonUniformGrid { index, step: s, expected: step });
        }
    }
    Ok(step)
}

/// Ground-state energy per spin, `e0 = E₀/N`, along a uniform `γ_x` grid.
pub fn ground_state_energy_curve(
    n_spins: usize,
    h: f64,
    gamma_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if gamma_grid.len() < 5 {
        return Err(Error::InvalidArgument("ground-state curve needs at least 5 grid points".into()));
    }
    check_uniform(gamma_grid)?;
    let basis = build_basis(n_spins)?;
    gamma_grid
        .iter()
        .map(|&g| {
            let params = ModelParams::new(n_spins, h, g, 0.0);
            let ham = build_hamiltonian(&params, &basis)?;
            let real = ham.matrix().mapv(|z| z.re);
            let vals = real.eigvalsh(UPLO::Lower).map_err(|e| Error::Eigensolver(e.to_string()))?;
            Ok((g, vals[0] / n_spins as f64))
        })
        .collect()
}

/// First or second derivative of samples on a uniform grid.
///
/// Central differences in the interior. At the edges the first derivative
/// uses the second-order one-sided stencil (plain difference for two
/// points) and the second derivative uses the forward/backward 3-point stencil.
pub fn finite_difference(grid: &[f64], values: &[f64], order: u8) -> Result<Vec<f64>> {
    if grid.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidArgument(format!("derivative order must be 1 or 2, got {order}")));
    }
    let n = values.len();
    if n < order as usize + 1 {
        return Err(Error::InvalidArgument(format!(
            "order {order} derivative needs at least {} points",
            order + 1
        )));
    }
    let dx = check_uniform(grid)?;
    let y = values;
    let out = match order {
        1 => (0..n)
            .map(|i| {
                if n == 2 {
                    (y[1] - y[0]) / dx
                } else if i == 0 {
                    (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dx)
                } else if i == n - 1 {
                    (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dx)
                } else {
                    (y[i + 1] - y[i - 1]) / (2.0 * dx)
                }
            })
            .collect(),
        _ => (0..n)
            .map(|i| {
                let c = i.clamp(1, n - 2);
                (y[c + 1] - 2.0 * y[c] + y[c - 1]) / (dx * dx)
            })
            .collect(),
    };
    Ok(out)
}

/// Normalized histogram of eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOfStates {
    pub bin_centers: Vec<f64>,
    pub density: Vec<f64>,
    pub bin_width: f64,
}

impl DensityOfStates {
    /// Index of the largest density excluding the first and last bins.
    pub fn interior_argmax(&self) -> Option<usize> {
        let n = self.density.len();
        if n < 3 {
            return None;
        }
        (1..n - 1).max_by(|&a, &b| self.density[a].total_cmp(&self.density[b]))
    }

    pub fn median(&self) -> f64 {
        let mut v = self.density.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Interior bins that are local maxima and exceed `factor × median`.
    pub fn interior_peaks(&self, factor: f64) -> Vec<usize> {
        let threshold = factor * self.median();
        let d = &self.density;
        (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > threshold)
            .collect()
    }
}

/// Histogram over `[min ε, max ε]` normalized to unit integral.
pub fn density_of_states(energies: &[f64], n_bins: usize) -> Result<DensityOfStates> {
    if n_bins < 10 {
        return Err(Error::InvalidArgument(format!("n_bins must be at least 10, got {n_bins}")));
    }
    if energies.is_empty() {
        return Err(Error::DegenerateRange("no energies".into()));
    }
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRange(format!("all energies equal to {lo}")));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &e in energies {
        let idx = (((e - lo) / width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = energies.len() as f64;
    Ok(DensityOfStates {
        bin_centers: (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        bin_width: width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_ops::build_parity_projector;
    use approx::assert_abs_diff_eq;

    fn spectrum(n: usize, gamma: f64) -> Spectrum {
        let p = ModelParams::new(n, 1.0, gamma, 0.0);
        diagonalize(&build_hamiltonian(&p, &p.basis().unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn spin_half_levels() {
        for gamma in [0.0, 0.7, 3.0] {
            let s = spectrum(1, gamma);
            assert_abs_diff_eq!(s.energies[0], -0.5 - gamma / 4.0, epsilon = 1e-14);
            assert_abs_diff_eq!(s.energies[1], 0.5 - gamma / 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn free_field_levels_and_parity() {
        let s = spectrum(6, 0.0);
        for (k, e) in s.energies.iter().enumerate() {
            assert_abs_diff_eq!(*e, -3.0 + k as f64, epsilon = 1e-12);
        }
        // ground state |j,+j⟩ has m + j = N even
        for (k, p) in s.parities.iter().enumerate() {
            let expected = if k % 2 == 0 { ParityLabel::Positive } else { ParityLabel::Negative };
            assert_eq!(*p, expected);
        }
    }

    /// N = 2, γ_x = 2h. In the basis (|1⟩, |0⟩, |-1⟩), `J_x² ` has entries
    /// 1/2 on (±1,±1), 1 on (0,0) and 1/2 on (1,-1). The odd-parity state
    /// |0⟩ decouples with E = -γ/2 = -1; the even block is
    /// [[-1 - γ/4, -γ/4], [-γ/4, 1 - γ/4]] with eigenvalues
    /// -γ/4 ± √(1 + γ²/16).
    #[test]
    fn spin_one_closed_form() {
        let gamma = 2.0;
        let s = spectrum(2, gamma);
        let r = (1.0f64 + gamma * gamma / 16.0).sqrt();
        let mut expected = vec![-gamma / 4.0 - r, -gamma / 2.0, -gamma / 4.0 + r];
        expected.sort_by(f64::total_cmp);
        for (e, x) in s.energies.iter().zip(expected) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn parity_conserved_normal_phase() {
        let s = spectrum(50, 0.5);
        for k in 0..s.dim() {
            let w = s.positive_parity_weight(k);
            assert!(!(1e-8..=1.0 - 1e-8).contains(&w), "state {k} weight {w}");
            assert_ne!(s.parities[k], ParityLabel::Unlabeled);
        }
    }

    #[test]
    fn broken_phase_doublets() {
        let gaps: Vec<f64> = [30, 50, 70, 100]
            .iter()
            .map(|&n| {
                let s = spectrum(n, 1.5);
                assert_eq!(s.parities[0], ParityLabel::Positive);
                assert_eq!(s.parities[1], ParityLabel::Negative);
                s.energies[1] - s.energies[0]
            })
            .collect();
        assert!(gaps[1] < 1e-4);
        assert!(gaps[3] < 1e-6);
        // tunnelling splitting closes exponentially with N
        for w in gaps.windows(2) {
            assert!(w[1] < 0.1 * w[0]);
        }
    }

    #[test]
    fn hamiltonian_commutes_with_parity() {
        for (n, g) in [(5, 0.3), (20, 1.2), (33, 2.5)] {
            let p = ModelParams::new(n, 1.0, g, 0.0);
            let b = p.basis().unwrap();
            let h = build_hamiltonian(&p, &b).unwrap();
            let pp = build_parity_projector(&b, ParitySign::Positive);
            assert!(h.commutator(&pp).max_abs() <= 1e-10 * h.max_abs());
        }
    }

    #[test]
    fn hamiltonian_basis_mismatch() {
        let p = ModelParams::new(4, 1.0, 1.0, 0.0);
        let b = build_basis(5).unwrap();
        assert!(matches!(build_hamiltonian(&p, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ground_state_curve_limits() {
        let grid: Vec<f64> = (0..6).map(|i| i as f64 * 0.6).collect();
        let curve = ground_state_energy_curve(50, 1.0, &grid).unwrap();
        assert_abs_diff_eq!(curve[0].1, -0.5, epsilon = 1e-14);
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-14);
        }
        assert!(ground_state_energy_curve(50, 1.0, &grid[..4]).is_err());
    }

    /// Large-γ_x oracle: the ground state approaches |J_x = ±j⟩ with energy
    /// -γ_x N/4. Second-order perturbation in the field couples it to
    /// |j-1⟩_x through |⟨j-1|J_z|j⟩_x|² = N/4 across a gap
    /// γ_x (N-1)/N, giving e0 ≈ -γ_x/4 - h² N / (4 γ_x (N-1)).
    #[test]
    fn ground_state_strong_coupling_oracle() {
        let n = 50usize;
        let gamma = 3.0;
        let grid: Vec<f64> = (0..5).map(|i| gamma - 0.04 + 0.01 * i as f64).collect();
        let curve = ground_state_energy_curve(n, 1.0, &grid).unwrap();
        let e0 = curve[4].1;
        let nf = n as f64;
        let oracle = -gamma / 4.0 - nf / (4.0 * gamma * (nf - 1.0));
        assert!(((e0 - oracle) / oracle).abs() < 0.02, "e0 {e0} oracle {oracle}");
        let coarse = -gamma * (nf + 1.0) / (4.0 * nf) - 1.0 / (4.0 * gamma);
        assert!(((e0 - coarse) / coarse).abs() < 0.02);
    }

    #[test]
    fn e0_below_free_value_at_strong_coupling() {
        let grid: Vec<f64> = (0..5).map(|i| 1.26 + 0.01 * i as f64).collect();
        let curve = ground_state_energy_curve(200, 1.0, &grid).unwrap();
        assert!(curve[4].1 < -0.5);
    }

    #[test]
    fn finite_difference_stencils() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let sq: Vec<f64> = grid.iter().map(|x| x * x).collect();
        for d in finite_difference(&grid, &sq, 2).unwrap() {
            assert_abs_diff_eq!(d, 2.0, epsilon = 1e-10);
        }
        let d1 = finite_difference(&grid, &sq, 1).unwrap();
        for (x, d) in grid.iter().zip(d1) {
            assert_abs_diff_eq!(d, 2.0 * x, epsilon = 1e-10);
        }
        let c = vec![3.0; 11];
        assert!(finite_difference(&grid, &c, 1).unwrap().iter().all(|d| *d == 0.0));
        assert!(finite_difference(&grid, &c, 2).unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn finite_difference_rejects_bad_grids() {
        let grid = [0.0, 0.1, 0.25, 0.3];
        let y = [0.0; 4];
        assert!(matches!(finite_difference(&grid, &y, 1), Err(Error::NonUniformGrid { .. })));
        assert!(finite_difference(&grid[..2], &y[..2], 2).is_err());
        assert!(finite_difference(&[0.0, 1.0], &[1.0, 2.0], 1).is_ok());
    }

    #[test]
    fn dos_uniform_comb_is_flat() {
        let s = spectrum(99, 0.0);
        let dos = density_of_states(&s.energies, 10).unwrap();
        let first = dos.density[0];
        assert!(dos.density.iter().all(|d| (d - first).abs() < 1e-12));
        let integral: f64 = dos.density.iter().map(|d| d * dos.bin_width).sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dos_errors() {
        assert!(matches!(density_of_states(&[1.0, 1.0], 10), Err(Error::DegenerateRange(_))));
        assert!(density_of_states(&[0.0, 1.0], 5).is_err());
    }
}
