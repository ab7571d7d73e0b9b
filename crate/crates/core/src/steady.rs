//! Stationary states of a Liouvillian and a fixed-step propagator used to
//! cross-check them.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{FactorizeInto, JobSvd, Solve, SVDDCInto};
use serde::{Deserialize, Serialize};

pub use crate::density::{purity, DensityMatrix};
use crate::density::{unvectorize, vectorize};
use crate::error::{Error, Result};
use crate::linalg::BandLu;
use crate::liouvillian::{
    band_factor_bytes, build_liouvillian_with, AssemblyOptions, Feedback, Storage, SuperOperator,
    DEFAULT_DENSE_MAX_DIM, DEFAULT_MEMORY_BUDGET_BYTES,
};
use crate::closed::ModelParams;
use crate::spin_ops::{C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    DirectNullspace,
    ShiftedInverse,
    TimeEvolution,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirectNullspace => "direct-nullspace",
            Self::ShiftedInverse => "shifted-inverse",
            Self::TimeEvolution => "time-evolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Hilbert dimensions up to this use the SVD null-space route.
    pub dense_max_dim: usize,
    pub memory_budget_bytes: u64,
    /// Singular values `<= tol · σ_max` count toward the null space.
    pub nullspace_rel_tol: f64,
    /// Accept only if `‖L vec ρ‖∞ <= tol · ‖L‖`.
    pub residual_rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_max_dim: DEFAULT_DENSE_MAX_DIM,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET_BYTES,
            nullspace_rel_tol: 1e-9,
            residual_rel_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions { dense_max_dim: self.dense_max_dim, memory_budget_bytes: self.memory_budget_bytes }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// `‖L vec ρ‖∞`.
    pub residual: f64,
    pub nullspace_dim: usize,
    pub solver: SolverKind,
    /// Spectral norm of `L` used for the relative thresholds.
    pub generator_norm: f64,
}

/// Trace-normalized, hermitized stationary state of `l`.
pub fn solve_steady_state(l: &SuperOperator) -> Result<SteadyStateResult> {
    solve_steady_state_with(l, &SolverOptions::default())
}

pub fn solve_steady_state_with(l: &SuperOperator, options: &SolverOptions) -> Result<SteadyStateResult> {
    let (vec_rho, nullspace_dim, norm, solver) = if l.dim_h() <= options.dense_max_dim {
        direct_nullspace(l, options)?
    } else {
        let norm = l.spectral_norm_estimate();
        check_trace_preserving(l, norm)?;
        let (v, dim) = shifted_inverse_iteration(l, norm, options)?;
        (v, dim, norm, SolverKind::ShiftedInverse)
    };
    let d = l.dim_h();
    let mut m = unvectorize(&vec_rho, d);
    let herm = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    m = herm;
    let tr = m.diag().sum();
    if tr.norm() == 0.0 || !tr.re.is_finite() {
        return Err(Error::Numeric("null vector has zero trace".into()));
    }
    m.mapv_inplace(|z| z / tr.re);
    let residual = l.apply_vec(&vectorize(&m)).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if residual > options.residual_rel_tol * norm {
        return Err(Error::Numeric(format!(
            "steady-state residual {residual:e} exceeds {:e}",
            options.residual_rel_tol * norm
        )));
    }
    let rho = DensityMatrix::new(m)?;
    Ok(SteadyStateResult { rho, residual, nullspace_dim, solver, generator_norm: norm })
}

/// Builds the generator for `params` and solves for its steady state.
pub fn solve_model(
    params: &ModelParams,
    feedback: Feedback,
    options: &SolverOptions,
) -> Result<SteadyStateResult> {
    let basis = params.basis()?;
    let l = build_liouvillian_with(params, &basis, feedback, &options.assembly())?;
    solve_steady_state_with(&l, options)
}

fn check_trace_preserving(l: &SuperOperator, norm: f64) -> Result<()> {
    let worst = l.trace_row().iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if worst > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "generator is not trace preserving (|vec(I)† L| = {worst:e})"
        )));
    }
    Ok(())
}

/// Singular values give the null-space dimension; the null vector itself
/// comes from the system with one diagonal row replaced by the trace
/// functional, which is exact because the diagonal rows of a
/// trace-preserving generator sum to zero. Both steps run per connected
/// block of the sparsity pattern (parity sectors when the jump operator
/// preserves parity), whose singular values together are those of `L`.
fn direct_nullspace(
    l: &SuperOperator,
    options: &SolverOptions,
) -> Result<(Array1<C64>, usize, f64, SolverKind)> {
    let m = l.to_dense();
    let n = m.nrows();
    let d = l.dim_h();
    let blocks = connected_blocks(&m);
    let mut spectra = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let sub = m.select(Axis(0), block).select(Axis(1), block);
        let (_, sv, _) = sub.svddc_into(JobSvd::None)?;
        spectra.push(sv);
    }
    let sigma_max = spectra.iter().flatten().cloned().fold(0.0f64, f64::max);
    check_trace_preserving(l, sigma_max)?;
    let threshold = options.nullspace_rel_tol * sigma_max;
    let counts: Vec<usize> = spectra.iter().map(|sv| sv.iter().filter(|s| **s <= threshold).count()).collect();
    let nullspace_dim: usize = counts.iter().sum();
    if nullspace_dim != 1 {
        return Err(Error::DegenerateSteadyState { dim: nullspace_dim });
    }
    let block = &blocks[counts.iter().position(|&c| c == 1).expect("one null block")];
    let diagonal: Vec<usize> = block.iter().enumerate().filter(|(_, &g)| g % (d + 1) == 0).map(|(k, _)| k).collect();
    let Some(&pivot) = diagonal.first() else {
        return Err(Error::Numeric("null vector has zero trace".into()));
    };
    let mut a = m.select(Axis(0), block).select(Axis(1), block);
    a.row_mut(pivot).fill(ZERO);
    for &k in &diagonal {
        a[[pivot, k]] = ONE;
    }
    let mut rhs = Array1::zeros(block.len());
    rhs[pivot] = ONE;
    let x_block = a.solve_into(rhs)?;
    let mut x = Array1::zeros(n);
    for (k, &g) in block.iter().enumerate() {
        x[g] = x_block[k];
    }
    Ok((x, nullspace_dim, sigma_max, SolverKind::DirectNullspace))
}

/// Index sets of the connected components of the graph with an edge
/// wherever `m[i, j]` or `m[j, i]` is nonzero.
fn connected_blocks(m: &Array2<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for ((i, j), z) in m.indexed_iter() {
        if *z != ZERO && i != j {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut index_of_root = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if index_of_root[r] == usize::MAX {
            index_of_root[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[index_of_root[r]].push(i);
    }
    blocks
}

enum ShiftedFactor {
    Band(BandLu),
    Dense(ndarray_linalg::LUFactorized<ndarray::OwnedRepr<C64>>),
}

impl ShiftedFactor {
    fn solve(&self, b: &Array1<C64>) -> Result<Array1<C64>> {
        match self {
            Self::Band(lu) => Ok(lu.solve(b)),
            Self::Dense(lu) => Ok(lu.solve(b)?),
        }
    }
}

fn trace_of(v: &Array1<C64>, d: usize) -> C64 {
    (0..d).map(|i| v[i + d * i]).sum()
}

fn norm2(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inverse iteration on `L - σI` with a tiny negative shift. Every
/// non-stationary eigenvector of a trace-preserving `L` is traceless, so
/// normalizing by the trace functional pins the stationary component.
fn shifted_inverse_iteration(
    l: &SuperOperator,
    norm: f64,
    options: &SolverOptions,
) -> Result<(Array1<C64>, usize)> {
    let d = l.dim_h();
    let n = l.dim();
    let shift = C64::new(-1e-10 * norm, 0.0);
    let dense_bytes = (n as u64).pow(2) * std::mem::size_of::<C64>() as u64;
    let factor = match l.storage() {
        Storage::Sparse(csr) => {
            let band_bytes = band_factor_bytes(csr);
            if band_bytes <= dense_bytes {
                check_budget(band_bytes, options)?;
                ShiftedFactor::Band(BandLu::factor(csr, shift)?)
            } else {
                check_budget(dense_bytes, options)?;
                let mut m = csr.to_dense();
                m.diag_mut().mapv_inplace(|z| z + shift);
                ShiftedFactor::Dense(m.factorize_into()?)
            }
        }
        Storage::Dense(m) => {
            check_budget(dense_bytes, options)?;
            let mut m = m.clone();
            m.diag_mut().mapv_inplace(|z| z + shift);
            ShiftedFactor::Dense(m.factorize_into()?)
        }
    };

    let mut x = vectorize(&Array2::eye(d).mapv(|z: C64| z / d as f64));
    let mut converged = false;
    for _ in 0..30 {
        let y = factor.solve(&x)?;
        let tr = trace_of(&y, d);
        if tr.norm() == 0.0 || !tr.norm().is_finite() {
            return Err(Error::Numeric("inverse iteration lost the trace component".into()));
        }
        let next = y.mapv(|z| z / tr);
        let change = (&next - &x).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        x = next;
        if change <= 1e-13 {
            converged = true;
            break;
        }
    }

    // Second-smallest eigenvalue magnitude from inverse iteration on the
    // traceless complement.
    let mut y = Array1::from_shape_fn(n, |k| C64::new((0.37 * k as f64).sin(), (0.11 * k as f64).cos()));
    let project = |v: &mut Array1<C64>| {
        let t = trace_of(v, d);
        v.zip_mut_with(&x, |a, b| *a -= t * b);
    };
    project(&mut y);
    let mut growth = [0.0f64; 2];
    for it in 0..12 {
        let ny = norm2(&y);
        y.mapv_inplace(|z| z / ny);
        let mut z = factor.solve(&y)?;
        project(&mut z);
        growth[it % 2] = norm2(&z);
        y = z;
    }
    let second = 1.0 / (growth[0] * growth[1]).sqrt();
    let nullspace_dim = if second <= options.nullspace_rel_tol * norm { 2 } else { 1 };
    if nullspace_dim != 1 {
        return Err(Error::DegenerateSteadyState { dim: nullspace_dim });
    }
    if !converged {
        return Err(Error::Numeric("shifted inverse iteration did not converge".into()));
    }
    Ok((x, nullspace_dim))
}

fn check_budget(bytes: u64, options: &SolverOptions) -> Result<()> {
    if bytes > options.memory_budget_bytes {
        return Err(Error::Resource {
            required_mb: bytes.div_ceil(1 << 20),
            budget_mb: options.memory_budget_bytes >> 20,
        });
    }
    Ok(())
}

/// Outcome of a fixed-step propagation.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub rho: DensityMatrix,
    pub steps: usize,
    pub dt: f64,
    /// Number of steps after which the trace was renormalized.
    pub trace_corrections: usize,
    /// Largest `|Tr ρ - 1|` seen before any correction.
    pub max_trace_drift: f64,
}

pub const TRACE_DRIFT_TOL: f64 = 1e-12;

/// Classical fourth-order Runge-Kutta on `vec(ρ)` with a fixed step.
///
/// `dt` must satisfy `dt <= 0.1/‖L‖`; the step actually used is
/// `t_final / ceil(t_final/dt)`.
pub fn evolve(rho0: &DensityMatrix, l: &SuperOperator, t_final: f64, dt: f64) -> Result<Evolution> {
    if rho0.dim() != l.dim_h() {
        return Err(Error::DimensionMismatch { expected: l.dim_h(), found: rho0.dim() });
    }
    rho0.validate()?;
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument("t_final must be >= 0 and dt > 0".into()));
    }
    let norm = l.spectral_norm_estimate();
    if dt * norm > 0.1 * (1.0 + 1e-9) {
        return Err(Error::StepSize(format!("dt = {dt:e} exceeds 0.1/‖L‖ = {:e}", 0.1 / norm)));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let csr = l.to_csr();
    let d = l.dim_h();
    let n = l.dim();

    let mut x: Vec<C64> = rho0.to_vec().to_vec();
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut corrections = 0;
    let mut max_drift = 0.0f64;
    for _ in 0..steps {
        csr.matvec_into(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + k1[i] * (0.5 * h);
        }
        csr.matvec_into(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + k2[i] * (0.5 * h);
        }
        csr.matvec_into(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + k3[i] * h;
        }
        csr.matvec_into(&tmp, &mut k4);
        let mut frob = 0.0;
        for i in 0..n {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            frob += x[i].norm_sqr();
        }
        if !(frob.sqrt() <= 10.0) {
            return Err(Error::StepSize(format!("propagation unstable (‖ρ‖ = {:e})", frob.sqrt())));
        }
        let tr: C64 = (0..d).map(|i| x[i + d * i]).sum();
        let drift = (tr - ONE).norm();
        max_drift = max_drift.max(drift);
        if drift > TRACE_DRIFT_TOL {
            for v in x.iter_mut() {
                *v /= tr;
            }
            corrections += 1;
        }
    }
    let rho = DensityMatrix::from_matrix_unchecked(unvectorize(&Array1::from(x), d))?;
    Ok(Evolution { rho, steps, dt: h, trace_corrections: corrections, max_trace_drift: max_drift })
}

/// Largest step allowed by `evolve` for this generator.
pub fn max_stable_step(l: &SuperOperator) -> f64 {
    0.1 / l.spectral_norm_estimate()
}
