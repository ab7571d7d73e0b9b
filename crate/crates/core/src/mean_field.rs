//! Mean-field equations of the dissipative model without feedback.

use nalgebra::{Matrix2, Matrix3, Matrix4x3, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closed::ModelParams;
use crate::error::{Error, Result};

/// Real parts with `|Re λ|` at or below this are marginal.
pub const MARGINAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub h: f64,
    pub gamma_x: f64,
    pub kappa: f64,
}

impl MfParams {
    pub fn new(h: f64, gamma_x: f64, kappa: f64) -> Self {
        Self { h, gamma_x, kappa }
    }

    pub fn with_gamma(self, gamma_x: f64) -> Self {
        Self { gamma_x, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.gamma_x.is_finite() && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument("mean-field parameters must be finite".into()));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidArgument(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

impl From<&ModelParams> for MfParams {
    fn from(p: &ModelParams) -> Self {
        Self { h: p.h, gamma_x: p.gamma_x, kappa: p.kappa }
    }
}

/// `(X, Y, Z) = ⟨J⟩/j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MeanFieldState {
    pub const NORTH: Self = Self { x: 0.0, y: 0.0, z: 1.0 };
    pub const SOUTH: Self = Self { x: 0.0, y: 0.0, z: -1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self { x: v[0], y: v[1], z: v[2] }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Marginal => "marginal",
        }
    }

    fn classify(re_parts: impl IntoIterator<Item = f64>) -> Self {
        let mut all_negative = true;
        let mut any_positive = false;
        for re in re_parts {
            if re > MARGINAL_TOL {
                any_positive = true;
            }
            if re >= -MARGINAL_TOL {
                all_negative = false;
            }
        }
        if any_positive {
            Self::Unstable
        } else if all_negative {
            Self::Stable
        } else {
            Self::Marginal
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub state: MeanFieldState,
    pub stability: Stability,
    /// Eigenvalues of the full 3×3 Jacobian. One of them is always zero:
    /// the radial direction is neutral because the flow conserves `|state|`.
    pub eigenvalues: [Complex64; 3],
    /// Eigenvalues of the Jacobian restricted to the tangent plane of the
    /// unit sphere; these decide `stability`.
    pub tangent_eigenvalues: [Complex64; 2],
}

impl FixedPoint {
    pub fn re_lambda_max(&self) -> f64 {
        self.tangent_eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn mf_rhs(state: MeanFieldState, params: &MfParams) -> MeanFieldState {
    MeanFieldState::from_vector(&rhs(&state.to_vector(), params))
}

fn rhs(v: &Vector3<f64>, p: &MfParams) -> Vector3<f64> {
    let (x, y, z) = (v[0], v[1], v[2]);
    let half_k = 0.5 * p.kappa;
    Vector3::new(
        p.h * y - half_k * z * x,
        -p.h * x + p.gamma_x * z * x - half_k * z * y,
        -p.gamma_x * x * y + half_k * (x * x + y * y),
    )
}

pub fn jacobian(state: MeanFieldState, p: &MfParams) -> Matrix3<f64> {
    let (x, y, z) = (state.x, state.y, state.z);
    let half_k = 0.5 * p.kappa;
    Matrix3::new(
        -half_k * z,
        p.h,
        -half_k * x,
        -p.h + p.gamma_x * z,
        -half_k * z,
        p.gamma_x * x - half_k * y,
        -p.gamma_x * y + p.kappa * x,
        -p.gamma_x * x + p.kappa * y,
        0.0,
    )
}

/// Orthonormal pair spanning the plane orthogonal to `n`.
fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = n.normalize();
    let helper = if n[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

pub fn classify(state: MeanFieldState, params: &MfParams) -> FixedPoint {
    let j = jacobian(state, params);
    let full = j.complex_eigenvalues();
    let (e1, e2) = tangent_basis(&state.to_vector());
    let basis = [e1, e2];
    let m = Matrix2::from_fn(|a, b| basis[a].dot(&(j * basis[b])));
    let tangent = m.complex_eigenvalues();
    let tangent_eigenvalues = [tangent[0], tangent[1]];
    let stability = Stability::classify(tangent_eigenvalues.iter().map(|z| z.re));
    FixedPoint { state, stability, eigenvalues: [full[0], full[1], full[2]], tangent_eigenvalues }
}

/// `h + κ²/(4h)`.
pub fn mf_critical_coupling(params: &MfParams) -> Result<f64> {
    if !(params.h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be > 0, got {}", params.h)));
    }
    Ok(params.h + params.kappa * params.kappa / (4.0 * params.h))
}

/// Closed-form symmetry-broken pair, if it lies on the unit sphere.
pub fn broken_pair(params: &MfParams) -> Option<[MeanFieldState; 2]> {
    let (h, g, k) = (params.h, params.gamma_x, params.kappa);
    if k == 0.0 {
        if g <= 0.0 || h.abs() > g {
            return None;
        }
        let z = h / g;
        let x = (1.0 - z * z).max(0.0).sqrt();
        return Some([MeanFieldState::new(x, 0.0, z), MeanFieldState::new(-x, 0.0, z)]);
    }
    if g < k {
        return None;
    }
    let b = (g * g - k * k).sqrt();
    let z = 2.0 * h / (k * k) * (g - b);
    let a_minus = k * k - 4.0 * h * h;
    let a_plus = k * k + 4.0 * h * h;
    let radicand = a_minus + b / g * a_plus;
    if radicand < 0.0 {
        return None;
    }
    let x = radicand.sqrt() / (std::f64::consts::SQRT_2 * k);
    let y = k / (2.0 * h) * x * z;
    let pair = [MeanFieldState::new(x, y, z), MeanFieldState::new(-x, -y, z)];
    if (pair[0].norm() - 1.0).abs() > 1e-8 {
        return None;
    }
    Some(pair)
}

/// Closed-form fixed points on the unit sphere: both poles and, when it
/// exists, the symmetry-broken pair.
pub fn mf_fixed_points(params: &MfParams) -> Result<Vec<FixedPoint>> {
    params.validate()?;
    if params.gamma_x < 0.0 {
        return Err(Error::InvalidArgument("gamma_x must be >= 0".into()));
    }
    let mut states = vec![MeanFieldState::NORTH, MeanFieldState::SOUTH];
    if let Some(pair) = broken_pair(params) {
        for s in pair {
            if s.distance(MeanFieldState::NORTH) > 1e-9 {
                states.push(s);
            }
        }
    }
    Ok(states.into_iter().map(|s| classify(s, params)).collect())
}

/// Largest tangent-plane growth rate at the north pole.
pub fn north_pole_growth_rate(params: &MfParams) -> f64 {
    classify(MeanFieldState::NORTH, params).re_lambda_max()
}

/// Coupling where the north pole loses stability, by bisection on its
/// largest tangent-plane eigenvalue real part.
pub fn mf_stability_crossing(params: &MfParams, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    params.validate()?;
    let f = |g: f64| north_pole_growth_rate(&params.with_gamma(g));
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::NoCrossing(format!(
            "growth rate does not change sign on [{lo}, {hi}] ({fa:e}, {fb:e})"
        )));
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if f(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Gauss-Newton on `[f(x); (|x|² - 1)/2] = 0`.
fn refine_root(seed: Vector3<f64>, p: &MfParams) -> Option<Vector3<f64>> {
    let mut x = seed.normalize();
    for _ in 0..60 {
        let f = rhs(&x, p);
        let r = Vector4::new(f[0], f[1], f[2], 0.5 * (x.norm_squared() - 1.0));
        if r.norm() <= 1e-14 {
            return Some(x);
        }
        let j = jacobian(MeanFieldState::from_vector(&x), p);
        let mut a = Matrix4x3::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
        a.set_row(3, &x.transpose());
        let step = a.svd(true, true).solve(&(-r), 1e-14).ok()?;
        x += step;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > 10.0 {
            return None;
        }
    }
    let f = rhs(&x, p);
    (f.norm() <= 1e-10 && (x.norm() - 1.0).abs() <= 1e-10).then_some(x)
}

/// Every fixed point reached by Newton from a cubic seed lattice
/// projected onto the sphere, deduplicated.
pub fn mf_numeric_fixed_points(params: &MfParams) -> Result<Vec<FixedPoint>> {
    params.validate()?;
    let ticks: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    let mut seeds = Vec::new();
    for &x in &ticks {
        for &y in &ticks {
            for &z in &ticks {
                let v = Vector3::new(x, y, z);
                if v.norm() > 0.1 {
                    seeds.push(v);
                }
            }
        }
    }
    if let Some(pair) = broken_pair(params) {
        seeds.extend(pair.iter().map(|s| s.to_vector()));
    }
    let mut roots: Vec<Vector3<f64>> = Vec::new();
    for seed in seeds {
        if let Some(r) = refine_root(seed, params) {
            if roots.iter().all(|q| (q - r).norm() > 1e-6) {
                roots.push(r);
            }
        }
    }
    roots.sort_by(|a, b| b[2].total_cmp(&a[2]).then(b[0].total_cmp(&a[0])));
    Ok(roots.iter().map(|r| classify(MeanFieldState::from_vector(r), params)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> MeanFieldState {
        *self.states.last().expect("trajectory holds the initial state")
    }
}

/// Samples kept per trajectory; the final state is always included.
pub const MAX_TRAJECTORY_SAMPLES: usize = 10_000;

/// Fixed-step RK4 integration of the mean-field flow.
pub fn mf_integrate(
    state0: MeanFieldState,
    params: &MfParams,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    params.validate()?;
    if ((state0.norm()) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state has norm {}", state0.norm())));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument("t_final must be >= 0 and dt > 0".into()));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let stride = steps.div_ceil(MAX_TRAJECTORY_SAMPLES).max(1);
    let mut x = state0.to_vector();
    let mut times = vec![0.0];
    let mut states = vec![state0];
    let mut max_drift = 0.0f64;
    for step in 1..=steps {
        let k1 = rhs(&x, params);
        let k2 = rhs(&(x + k1 * (0.5 * h)), params);
        let k3 = rhs(&(x + k2 * (0.5 * h)), params);
        let k4 = rhs(&(x + k3 * h), params);
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        let drift = (x.norm() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if !(drift <= 1e-6) {
            return Err(Error::StepSize(format!("norm drift {drift:e} at t = {}", step as f64 * h)));
        }
        if step % stride == 0 || step == steps {
            times.push(step as f64 * h);
            states.push(MeanFieldState::from_vector(&x));
        }
    }
    Ok(Trajectory { times, states, max_norm_drift: max_drift })
}

/// Branch labels used in the bifurcation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    North,
    South,
    BrokenPlus,
    BrokenMinus,
    Other,
}

impl Branch {
    pub fn id(self) -> u32 {
        self as u32
    }

    fn of(state: MeanFieldState) -> Self {
        if state.distance(MeanFieldState::NORTH) < 1e-6 {
            Self::North
        } else if state.distance(MeanFieldState::SOUTH) < 1e-6 {
            Self::South
        } else if state.x > 0.0 {
            Self::BrokenPlus
        } else if state.x < 0.0 {
            Self::BrokenMinus
        } else {
            Self::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRow {
    pub gamma_x: f64,
    pub branch: Branch,
    pub state: MeanFieldState,
    pub stability: Stability,
    pub re_lambda_max: f64,
}

/// Every fixed point found at each coupling, labelled by branch.
pub fn mf_bifurcation_scan(params: &MfParams, gamma_grid: &[f64]) -> Result<Vec<BifurcationRow>> {
    if gamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("gamma grid must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &g in gamma_grid {
        let p = params.with_gamma(g);
        let mut found: Vec<BifurcationRow> = mf_numeric_fixed_points(&p)?
            .into_iter()
            .map(|fp| BifurcationRow {
                gamma_x: g,
                branch: Branch::of(fp.state),
                state: fp.state,
                stability: fp.stability,
                re_lambda_max: fp.re_lambda_max(),
            })
            .collect();
        found.sort_by_key(|r| r.branch);
        rows.extend(found);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(g: f64, k: f64) -> MfParams {
        MfParams::new(1.0, g, k)
    }

    #[test]
    fn north_pole_is_fixed() {
        for (g, k) in [(0.0, 0.0), (0.7, 0.05), (3.0, 2.0)] {
            assert_eq!(mf_rhs(MeanFieldState::NORTH, &p(g, k)), MeanFieldState::new(0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn flow_conserves_spin_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let params = MfParams::new(rng.gen_range(0.1..2.0), rng.gen_range(0.0..3.0), rng.gen_range(0.0..1.0));
            let s = MeanFieldState::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let f = mf_rhs(s, &params);
            assert!((2.0 * (s.x * f.x + s.y * f.y + s.z * f.z)).abs() <= 1e-12);
        }
    }

    #[test]
    fn larmor_period() {
        let params = p(0.0, 0.0);
        let start = MeanFieldState::new(1.0, 0.0, 0.0);
        let period = 2.0 * std::f64::consts::PI;
        let traj = mf_integrate(start, &params, period, 1e-3).unwrap();
        assert!(traj.last().distance(start) < 1e-6);
        let quarter = mf_integrate(start, &params, period / 4.0, 1e-3).unwrap();
        assert!(quarter.last().distance(MeanFieldState::new(0.0, -1.0, 0.0)) < 1e-6);
    }

    #[test]
    fn critical_coupling_values() {
        assert_abs_diff_eq!(mf_critical_coupling(&p(0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(mf_critical_coupling(&p(0.0, 0.05)).unwrap(), 1.000625, epsilon = 1e-15);
        assert_abs_diff_eq!(mf_critical_coupling(&p(0.0, 2.0)).unwrap(), 2.0);
        assert!(mf_critical_coupling(&MfParams::new(0.0, 1.0, 0.1)).is_err());
    }

    #[test]
    fn bisection_reproduces_critical_coupling() {
        for k in [0.05, 0.3, 1.0] {
            let params = p(0.0, k);
            let g = mf_stability_crossing(&params, 0.5, 5.0, 1e-9).unwrap();
            assert!((g - mf_critical_coupling(&params).unwrap()).abs() <= 1e-6);
        }
    }

    #[test]
    fn pair_is_a_root_and_matches_closed_form() {
        let params = p(2.0, 0.05);
        let pair = broken_pair(&params).unwrap();
        let b = (4.0f64 - 0.0025).sqrt();
        let z = 2.0 / 0.0025 * (2.0 - b);
        assert_abs_diff_eq!(pair[0].z, z, epsilon = 1e-12);
        assert!((pair[0].z - 0.5001).abs() < 1e-4);
        for s in pair {
            assert!(mf_rhs(s, &params).to_vector().norm() <= 1e-10);
        }
        assert_eq!(pair[0].x, -pair[1].x);
    }

    #[test]
    fn branches_merge_at_critical_coupling() {
        let params = p(0.0, 0.05);
        let g = mf_critical_coupling(&params).unwrap();
        let pair = broken_pair(&params.with_gamma(g)).unwrap();
        assert_abs_diff_eq!(pair[0].z, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn random_pairs_are_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut checked = 0;
        while checked < 100 {
            let h = rng.gen_range(0.2..2.0);
            let k = rng.gen_range(0.01..1.0);
            let g = rng.gen_range(k..4.0);
            let params = MfParams::new(h, g, k);
            if let Some(pair) = broken_pair(&params) {
                for s in pair {
                    assert!(mf_rhs(s, &params).to_vector().norm() <= 1e-10);
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn only_north_stable_below_critical() {
        let fps = mf_fixed_points(&p(0.9, 0.05)).unwrap();
        let stable: Vec<_> = fps.iter().filter(|f| f.stability == Stability::Stable).collect();
        assert_eq!(stable.len(), 1);
        assert_eq!(stable[0].state, MeanFieldState::NORTH);
    }

    #[test]
    fn broken_phase_has_stable_pair() {
        let fps = mf_fixed_points(&p(2.0, 0.05)).unwrap();
        let stable: Vec<_> = fps.iter().filter(|f| f.stability == Stability::Stable).collect();
        assert_eq!(stable.len(), 2);
        assert!(stable.iter().all(|f| f.state.z < 1.0));
        for f in &fps {
            // radial direction is neutral
            assert!(f.eigenvalues.iter().any(|l| l.norm() < 1e-12));
        }
    }

    #[test]
    fn numeric_search_finds_four_roots_in_broken_phase() {
        let params = p(2.0, 0.05);
        let found = mf_numeric_fixed_points(&params).unwrap();
        assert_eq!(found.len(), 4);
        let analytic = mf_fixed_points(&params).unwrap();
        for a in &analytic {
            assert!(found.iter().any(|f| f.state.distance(a.state) < 1e-9));
        }
        let below = mf_numeric_fixed_points(&p(0.5, 0.05)).unwrap();
        assert_eq!(below.len(), 2);
    }

    #[test]
    fn closed_system_limit_pair() {
        let params = p(2.0, 0.0);
        let pair = broken_pair(&params).unwrap();
        assert_abs_diff_eq!(pair[0].z, 0.5, epsilon = 1e-15);
        assert!(mf_rhs(pair[0], &params).to_vector().norm() < 1e-14);
    }

    #[test]
    fn normal_phase_relaxes() {
        let params = p(0.5, 0.05);
        let start = MeanFieldState::new(0.05, 0.0, (1.0f64 - 0.0025).sqrt());
        let traj = mf_integrate(start, &params, 1e3, 1e-3).unwrap();
        assert!(traj.last().distance(MeanFieldState::NORTH) <= 1e-6);
        assert!(traj.max_norm_drift <= 1e-8);
    }

    #[test]
    fn broken_phase_leaves_north_pole() {
        let params = p(2.0, 0.05);
        let start = MeanFieldState::new(0.01, 0.0, (1.0f64 - 1e-4).sqrt());
        let traj = mf_integrate(start, &params, 2e3, 1e-3).unwrap();
        let pair = broken_pair(&params).unwrap();
        let d = pair.iter().map(|s| s.distance(traj.last())).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn closed_system_energy_conserved() {
        let params = p(1.7, 0.0);
        let energy = |s: MeanFieldState| -params.h * s.z - 0.5 * params.gamma_x * s.x * s.x;
        let start = MeanFieldState::new(0.6, 0.0, 0.8);
        let traj = mf_integrate(start, &params, 100.0, 1e-3).unwrap();
        for s in &traj.states {
            assert!((energy(*s) - energy(start)).abs() <= 1e-8);
        }
    }

    #[test]
    fn scan_branch_count_changes_at_critical_point() {
        let params = p(0.0, 0.05);
        let grid: Vec<f64> = (0..11).map(|k| 0.99 + 0.002 * k as f64).collect();
        let rows = mf_bifurcation_scan(&params, &grid).unwrap();
        let gc = mf_critical_coupling(&params).unwrap();
        for &g in &grid {
            let stable = rows.iter().filter(|r| r.gamma_x == g && r.stability == Stability::Stable).count();
            assert_eq!(stable, if g >= gc { 2 } else { 1 }, "g={g}");
        }
        let wide: Vec<f64> = (0..20).map(|k| 1.1 + 0.1 * k as f64).collect();
        let rows = mf_bifurcation_scan(&params, &wide).unwrap();
        let plus: Vec<_> = rows.iter().filter(|r| r.branch == Branch::BrokenPlus).collect();
        let minus: Vec<_> = rows.iter().filter(|r| r.branch == Branch::BrokenMinus).collect();
        assert_eq!(plus.len(), wide.len());
        assert!(plus.windows(2).all(|w| w[1].state.z < w[0].state.z));
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a.state.x + b.state.x).abs() < 1e-12);
        }
    }

    #[test]
    fn equivariance() {
        let params = p(1.3, 0.2);
        let s = MeanFieldState::new(0.3, -0.4, 0.5);
        let f = mf_rhs(s, &params);
        let g = mf_rhs(MeanFieldState::new(-0.3, 0.4, 0.5), &params);
        assert_eq!((g.x, g.y, g.z), (-f.x, -f.y, f.z));
    }
}
