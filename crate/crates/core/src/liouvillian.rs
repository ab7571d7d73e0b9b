//! Open-system generator with and without jump-conditioned feedback.
//!
//! Density matrices are vectorized by column stacking,
//! `vec(ρ)[i + d j] = ρ[i, j]`, so that `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//! With this convention
//!
//! ```text
//! L = -i (I ⊗ H_eff) + i (conj(H_eff) ⊗ I) + (κ/N) (conj(A) ⊗ A)
//! ```
//!
//! where `A = J₊` without feedback and `A = U_C J₊` with feedback.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::closed::{build_hamiltonian, ModelParams};
use crate::density::{unvectorize, vectorize};
use crate::error::{Error, Result};
use crate::linalg::{eigh_hermitian, BandLu, CsrMatrix};
use crate::spin_ops::{
    build_j_squared, build_jminus, build_jplus, build_jx, build_jy, build_jz,
    AngularMomentumBasis, Operator, C64, ZERO,
};

/// `H_eff = H_LMG - (i/2)(κ/N) J₋J₊`.
pub fn build_effective_hamiltonian(
    params: &ModelParams,
    basis: &AngularMomentumBasis,
) -> Result<Operator> {
    params.validate()?;
    let h = build_hamiltonian(params, basis)?;
    if params.kappa == 0.0 {
        return Ok(h);
    }
    let jp = build_jplus(basis);
    let jm = build_jminus(basis);
    let decay = jm.matrix().dot(jp.matrix());
    let factor = C64::new(0.0, -0.5 * params.kappa / params.n_spins as f64);
    Ok(Operator::from_parts(h.matrix() + &decay.mapv(|z| z * factor), false))
}

/// Unitary applied after every detected jump.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlUnitary {
    matrix: Array2<C64>,
}

impl ControlUnitary {
    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn as_operator(&self) -> Operator {
        Operator::from_parts(self.matrix.clone(), false)
    }

    /// `max|U U† - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.nrows();
        let uu = self.matrix.dot(&self.matrix.t().mapv(|z| z.conj()));
        crate::spin_ops::max_abs_diff(&uu, &Array2::eye(d))
    }
}

/// `U_C = exp(-i G)` with `G = (θ_x J_x + θ_y J_y + θ_z J_z)/√N`, evaluated
/// through the eigendecomposition of the hermitian generator.
pub fn build_control_unitary(
    params: &ModelParams,
    basis: &AngularMomentumBasis,
) -> Result<ControlUnitary> {
    params.validate()?;
    let d = basis.dim();
    let (tx, ty, tz) = (params.theta_x, params.theta_y, params.theta_z);
    if tx == 0.0 && ty == 0.0 && tz == 0.0 {
        return Ok(ControlUnitary { matrix: Array2::eye(d) });
    }
    let scale = 1.0 / (basis.n_spins() as f64).sqrt();
    let mut generator: Array2<C64> = Array2::zeros((d, d));
    for (theta, op) in [(tx, build_jx(basis)), (ty, build_jy(basis)), (tz, build_jz(basis))] {
        if theta != 0.0 {
            generator = generator + op.matrix().mapv(|z| z * (theta * scale));
        }
    }
    let (vals, vecs) = eigh_hermitian(&generator)?;
    let mut matrix = Array2::zeros((d, d));
    for (k, lambda) in vals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda);
        let col = vecs.column(k);
        for i in 0..d {
            let ci = col[i] * phase;
            if ci == ZERO {
                continue;
            }
            for j in 0..d {
                matrix[[i, j]] += ci * col[j].conj();
            }
        }
    }
    Ok(ControlUnitary { matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Off,
    On,
}

/// Assembly limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Largest Hilbert dimension stored densely.
    pub dense_max_dim: usize,
    pub memory_budget_bytes: u64,
}

pub const DEFAULT_DENSE_MAX_DIM: usize = 64;
pub const DEFAULT_MEMORY_BUDGET_BYTES: u64 = 2 << 30;

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { dense_max_dim: DEFAULT_DENSE_MAX_DIM, memory_budget_bytes: DEFAULT_MEMORY_BUDGET_BYTES }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(Array2<C64>),
    Sparse(CsrMatrix),
}

/// Linear map on column-stacked `d × d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim_h: usize,
    storage: Storage,
}

impl SuperOperator {
    pub fn from_dense(dim_h: usize, matrix: Array2<C64>) -> Result<Self> {
        let n = dim_h * dim_h;
        if matrix.dim() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        Ok(Self { dim_h, storage: Storage::Dense(matrix) })
    }

    pub fn from_sparse(dim_h: usize, matrix: CsrMatrix) -> Result<Self> {
        let n = dim_h * dim_h;
        if matrix.n_rows() != n || matrix.n_cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.n_rows() });
        }
        Ok(Self { dim_h, storage: Storage::Sparse(matrix) })
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    /// `d²`.
    pub fn dim(&self) -> usize {
        self.dim_h * self.dim_h
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[[row, col]],
            Storage::Sparse(m) => m.get(row, col),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    pub fn apply_vec(&self, x: &Array1<C64>) -> Array1<C64> {
        match &self.storage {
            Storage::Dense(m) => m.dot(x),
            Storage::Sparse(m) => m.matvec(x),
        }
    }

    pub fn apply_adjoint_vec(&self, x: &Array1<C64>) -> Array1<C64> {
        match &self.storage {
            Storage::Dense(m) => m.t().mapv(|z| z.conj()).dot(x),
            Storage::Sparse(m) => m.adjoint_matvec(x),
        }
    }

    /// `L(ρ)` on a `d × d` matrix.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        unvectorize(&self.apply_vec(&vectorize(rho)), self.dim_h)
    }

    /// Elementwise `max|L₁ - L₂|`.
    pub fn max_abs_diff(&self, other: &SuperOperator) -> f64 {
        match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => crate::spin_ops::max_abs_diff(a, b),
            _ => {
                let (a, b) = (self.to_csr(), other.to_csr());
                let mut worst = 0.0f64;
                for r in 0..a.n_rows() {
                    for (c, v) in a.row(r) {
                        worst = worst.max((v - b.get(r, c)).norm());
                    }
                    for (c, v) in b.row(r) {
                        worst = worst.max((v - a.get(r, c)).norm());
                    }
                }
                worst
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => crate::spin_ops::max_abs(m),
            Storage::Sparse(m) => {
                (0..m.n_rows()).flat_map(|r| m.row(r)).fold(0.0f64, |acc, (_, v)| acc.max(v.norm()))
            }
        }
    }

    /// Row functional `vec(I)† L`; zero for a trace-preserving generator.
    pub fn trace_row(&self) -> Array1<C64> {
        let d = self.dim_h;
        let mut acc = Array1::zeros(self.dim());
        for i in 0..d {
            let r = i + d * i;
            match &self.storage {
                Storage::Dense(m) => acc += &m.row(r),
                Storage::Sparse(m) => {
                    for (c, v) in m.row(r) {
                        acc[c] += v;
                    }
                }
            }
        }
        acc
    }

    /// Largest singular value estimated by power iteration on `L†L`.
    pub fn spectral_norm_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = Array1::from_shape_fn(n, |k| C64::new(1.0 + 0.1 * (k as f64).sin(), 0.3 * (k as f64).cos()));
        let mut sigma = 0.0;
        for _ in 0..200 {
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            x.mapv_inplace(|z| z / norm);
            let y = self.apply_vec(&x);
            let z = self.apply_adjoint_vec(&y);
            let next = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().sqrt();
            let converged = (next - sigma).abs() <= 1e-10 * next;
            sigma = next;
            x = z;
            if converged {
                break;
            }
        }
        sigma
    }
}

fn nnz(m: &Array2<C64>) -> usize {
    m.iter().filter(|z| **z != ZERO).count()
}

/// Adds `scale (B ⊗ A)` into a sink, visiting only nonzero factor entries.
fn kron_for_each(
    b: &Array2<C64>,
    a: &Array2<C64>,
    scale: C64,
    mut sink: impl FnMut(usize, usize, C64),
) {
    let d = a.nrows();
    let a_nz: Vec<(usize, usize, C64)> =
        a.indexed_iter().filter(|(_, v)| **v != ZERO).map(|((i, j), v)| (i, j, *v)).collect();
    for ((j, jp), bv) in b.indexed_iter() {
        if *bv == ZERO {
            continue;
        }
        let f = *bv * scale;
        for &(i, ip, av) in &a_nz {
            sink(i + d * j, ip + d * jp, f * av);
        }
    }
}

/// Builds `L = L₀ + J` (feedback off) or `L = L₀ + C J` (feedback on).
pub fn build_liouvillian(
    params: &ModelParams,
    basis: &AngularMomentumBasis,
    feedback: Feedback,
) -> Result<SuperOperator> {
    build_liouvillian_with(params, basis, feedback, &AssemblyOptions::default())
}

pub fn build_liouvillian_with(
    params: &ModelParams,
    basis: &AngularMomentumBasis,
    feedback: Feedback,
    options: &AssemblyOptions,
) -> Result<SuperOperator> {
    params.validate()?;
    let d = basis.dim();
    let n = d * d;
    let h_eff = build_effective_hamiltonian(params, basis)?;
    let jump = match feedback {
        Feedback::Off => build_jplus(basis).into_matrix(),
        Feedback::On => build_control_unitary(params, basis)?.matrix().dot(build_jplus(basis).matrix()),
    };
    let rate = params.kappa / params.n_spins as f64;

    let h = h_eff.matrix();
    let h_conj = h.mapv(|z| z.conj());
    let jump_conj = jump.mapv(|z| z.conj());
    let identity: Array2<C64> = Array2::eye(d);

    let entry_bound = 2 * nnz(h) * d + if rate != 0.0 { nnz(&jump).pow(2) } else { 0 };
    let dense_bytes = (n as u64).pow(2) * std::mem::size_of::<C64>() as u64;
    let sparse_bytes = entry_bound as u64 * (std::mem::size_of::<C64>() + 2 * std::mem::size_of::<usize>()) as u64;
    // Above the dense threshold, a pattern that fills a quarter of the
    // matrix (feedback rotations mixing every m) is kept dense.
    let dense = d <= options.dense_max_dim || entry_bound as u64 * 4 > (n as u64).pow(2);
    let required = if dense { dense_bytes } else { sparse_bytes };
    if required > options.memory_budget_bytes {
        return Err(Error::Resource {
            required_mb: required.div_ceil(1 << 20),
            budget_mb: options.memory_budget_bytes >> 20,
        });
    }

    let minus_i = C64::new(0.0, -1.0);
    let plus_i = C64::new(0.0, 1.0);
    let rate_c = C64::new(rate, 0.0);
    if dense {
        let mut m = Array2::zeros((n, n));
        {
            let mut add = |r: usize, c: usize, v: C64| m[[r, c]] += v;
            kron_for_each(&identity, h, minus_i, &mut add);
            kron_for_each(&h_conj, &identity, plus_i, &mut add);
            if rate != 0.0 {
                kron_for_each(&jump_conj, &jump, rate_c, &mut add);
            }
        }
        SuperOperator::from_dense(d, m)
    } else {
        let mut trip = Vec::with_capacity(entry_bound);
        {
            let mut add = |r: usize, c: usize, v: C64| trip.push((r, c, v));
            kron_for_each(&identity, h, minus_i, &mut add);
            kron_for_each(&h_conj, &identity, plus_i, &mut add);
            if rate != 0.0 {
                kron_for_each(&jump_conj, &jump, rate_c, &mut add);
            }
        }
        SuperOperator::from_sparse(d, CsrMatrix::from_triplets(n, n, trip))
    }
}

/// Jump superoperator alone, `ρ ↦ (κ/N) A ρ A†`, applied directly.
pub fn apply_jump(
    params: &ModelParams,
    basis: &AngularMomentumBasis,
    feedback: Feedback,
    rho: &Array2<C64>,
) -> Result<Array2<C64>> {
    let jump = match feedback {
        Feedback::Off => build_jplus(basis).into_matrix(),
        Feedback::On => build_control_unitary(params, basis)?.matrix().dot(build_jplus(basis).matrix()),
    };
    let rate = params.kappa / params.n_spins as f64;
    Ok(jump.dot(rho).dot(&jump.t().mapv(|z| z.conj())).mapv(|z| z * rate))
}

/// Checks `[U, J²] = 0` for a control unitary.
pub fn control_commutes_with_casimir(u: &ControlUnitary, basis: &AngularMomentumBasis) -> f64 {
    let j2 = build_j_squared(basis);
    u.as_operator().commutator(&j2).max_abs()
}

/// Band storage estimate for factoring this generator.
pub(crate) fn band_factor_bytes(csr: &CsrMatrix) -> u64 {
    let (kl, ku) = csr.bandwidths();
    BandLu::storage_bytes(csr.n_rows(), kl, ku)
}
