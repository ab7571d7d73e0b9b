//! Two-dimensional `(γ_x, θ)` steady-state sweeps, feature extraction on
//! the resulting grids, and CSV/JSON export.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::closed::ModelParams;
use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian_with, Feedback, DEFAULT_DENSE_MAX_DIM};
use crate::observables::{sweep_derivative, DerivativeMinimum, ObservableOperators, ObservableSet};
use crate::spin_ops::AngularMomentumBasis;
use crate::steady::{solve_steady_state_with, SolverKind, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaAxis {
    X,
    Z,
}

impl ThetaAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    /// Uniform in `ln(θ + 1)`.
    Log1p,
}

/// Observable names accepted in `outputs`.
pub const OBSERVABLE_NAMES: [&str; 8] =
    ["jz", "jz_over_j", "jx2", "jy2", "jz2", "jplus2_abs", "concurrence", "purity"];

fn default_h() -> f64 {
    1.0
}
fn default_feedback() -> Feedback {
    Feedback::On
}
fn default_scale() -> AxisScale {
    AxisScale::Linear
}
fn default_outputs() -> Vec<String> {
    OBSERVABLE_NAMES.iter().map(|s| s.to_string()).collect()
}
fn default_workers() -> usize {
    1
}
fn default_dense_max_dim() -> usize {
    DEFAULT_DENSE_MAX_DIM
}
fn default_memory_budget_mb() -> u64 {
    2048
}

/// Sweep recipe. Parsed from a flat TOML table; unknown keys are rejected.
///
/// `theta_max` may be omitted, in which case each `N` uses `π√N`.
/// `output_path` may contain `{n}` to write one file per `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    #[serde(default = "default_h")]
    pub h: f64,
    pub kappa: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_count: usize,
    pub theta_axis: ThetaAxis,
    #[serde(default)]
    pub theta_min: f64,
    #[serde(default)]
    pub theta_max: Option<f64>,
    pub theta_count: usize,
    #[serde(default = "default_scale")]
    pub theta_scale: AxisScale,
    #[serde(default = "default_feedback")]
    pub feedback: Feedback,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub worker_count: usize,
    #[serde(default = "default_dense_max_dim")]
    pub dense_max_dim: usize,
    #[serde(default = "default_memory_budget_mb")]
    pub memory_budget_mb: u64,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.contains(&0) {
            return bad("n_list entries must be >= 1".into());
        }
        if self.gamma_count < 2 || self.theta_count < 2 {
            return bad("gamma_count and theta_count must be >= 2".into());
        }
        let finite = [self.h, self.kappa, self.gamma_min, self.gamma_max, self.theta_min];
        if finite.iter().any(|v| !v.is_finite()) || self.theta_max.is_some_and(|t| !t.is_finite()) {
            return bad("axis bounds and model parameters must be finite".into());
        }
        if self.h == 0.0 || self.kappa < 0.0 {
            return bad("h must be nonzero and kappa >= 0".into());
        }
        if !(self.gamma_max > self.gamma_min) {
            return bad("gamma_max must exceed gamma_min".into());
        }
        if self.theta_min < 0.0 {
            return bad("theta_min must be >= 0".into());
        }
        for &n in &self.n_list {
            let limit = std::f64::consts::PI * (n as f64).sqrt();
            let hi = self.theta_max.unwrap_or(limit);
            if hi > limit * (1.0 + 1e-12) {
                return bad(format!("theta_max {hi} exceeds π√N = {limit} for N = {n}"));
            }
            if !(hi > self.theta_min) {
                return bad(format!("theta_max must exceed theta_min for N = {n}"));
            }
        }
        for name in &self.outputs {
            if !OBSERVABLE_NAMES.contains(&name.as_str()) {
                return bad(format!("unknown output '{name}'"));
            }
        }
        if self.outputs.iter().any(|o| o == "concurrence") && self.n_list.iter().any(|&n| n < 2) {
            return bad("concurrence needs N >= 2".into());
        }
        if self.worker_count == 0 {
            return bad("worker_count must be >= 1".into());
        }
        Ok(())
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        linear_axis(self.gamma_min, self.gamma_max, self.gamma_count)
    }

    pub fn theta_grid(&self, n: usize) -> Vec<f64> {
        let hi = self.theta_max.unwrap_or(std::f64::consts::PI * (n as f64).sqrt());
        match self.theta_scale {
            AxisScale::Linear => linear_axis(self.theta_min, hi, self.theta_count),
            AxisScale::Log1p => {
                let mut axis: Vec<f64> = linear_axis(self.theta_min.ln_1p(), hi.ln_1p(), self.theta_count)
                    .into_iter()
                    .map(f64::exp_m1)
                    .collect();
                axis[0] = self.theta_min;
                *axis.last_mut().unwrap() = hi;
                axis
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            dense_max_dim: self.dense_max_dim,
            memory_budget_bytes: self.memory_budget_mb << 20,
            ..SolverOptions::default()
        }
    }

    pub fn params(&self, n: usize, gamma_x: f64, theta: f64) -> ModelParams {
        let base = ModelParams::new(n, self.h, gamma_x, self.kappa);
        match self.theta_axis {
            ThetaAxis::X => base.with_theta(theta, 0.0, 0.0),
            ThetaAxis::Z => base.with_theta(0.0, 0.0, theta),
        }
    }

    /// Hex SHA-256 of the canonical JSON echo of this config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Output path for one `N`, with `{n}` substituted.
    pub fn output_path_for(&self, n: usize) -> Option<PathBuf> {
        self.output_path.as_ref().map(|p| PathBuf::from(p.to_string_lossy().replace("{n}", &n.to_string())))
    }
}

/// `count` points from `lo` to `hi` inclusive, each computed directly.
pub fn linear_axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|k| if k + 1 == count { hi } else { lo + step * k as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellData {
    pub observables: ObservableSet,
    pub residual: f64,
    pub nullspace_dim: usize,
    pub solver: SolverKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub n: usize,
    pub gamma_x: f64,
    pub theta: f64,
    pub message: String,
    /// Reported null-space dimension for degenerate steady states.
    pub nullspace_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub gamma_x: f64,
    pub theta: f64,
    pub outcome: std::result::Result<CellData, CellError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_sha256: String,
    pub code_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// `N`-major, then `θ`, then `γ_x` ascending.
    pub cells: Vec<SweepCell>,
    pub metadata: RunMetadata,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Solves one grid point with the sweep's solver settings.
pub fn solve_cell(
    params: &ModelParams,
    feedback: Feedback,
    options: &SolverOptions,
    ops: &ObservableOperators,
) -> Result<CellData> {
    let l = build_liouvillian_with(params, ops.basis(), feedback, &options.assembly())?;
    let steady = solve_steady_state_with(&l, options)?;
    let observables = ops.evaluate(&steady.rho)?;
    Ok(CellData { observables, residual: steady.residual, nullspace_dim: steady.nullspace_dim, solver: steady.solver })
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let started = unix_now();
    let options = config.solver_options();
    let gammas = config.gamma_grid();

    // Global resource check on the most demanding cell of each N.
    for &n in &config.n_list {
        let basis = AngularMomentumBasis::new(n)?;
        let theta = *config.theta_grid(n).last().unwrap();
        let params = config.params(n, gammas[gammas.len() - 1], theta);
        build_liouvillian_with(&params, &basis, config.feedback, &options.assembly())?;
        if n + 1 > options.dense_max_dim {
            let dense_factor = ((n as u64 + 1).pow(4)) * 16;
            if config.theta_axis == ThetaAxis::X && dense_factor > options.memory_budget_bytes {
                return Err(Error::Resource {
                    required_mb: dense_factor.div_ceil(1 << 20),
                    budget_mb: config.memory_budget_mb,
                });
            }
        }
    }

    let mut jobs = Vec::new();
    let mut ops = Vec::new();
    for (slot, &n) in config.n_list.iter().enumerate() {
        ops.push(ObservableOperators::new(&AngularMomentumBasis::new(n)?));
        for theta in config.theta_grid(n) {
            for &g in &gammas {
                jobs.push((slot, n, g, theta));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(slot, n, g, theta)| {
                let params = config.params(n, g, theta);
                let outcome = solve_cell(&params, config.feedback, &options, &ops[slot]).map_err(|e| {
                    log::warn!("cell N={n} gamma_x={g} theta={theta}: {e}");
                    CellError {
                        n,
                        gamma_x: g,
                        theta,
                        nullspace_dim: match e {
                            Error::DegenerateSteadyState { dim } => Some(dim),
                            _ => None,
                        },
                        message: e.to_string(),
                    }
                });
                SweepCell { n, gamma_x: g, theta, outcome }
            })
            .collect()
    });
    Ok(SweepResult {
        config: config.clone(),
        cells,
        metadata: RunMetadata {
            config_sha256: config.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: started,
            finished_unix_s: unix_now(),
        },
    })
}

impl SweepResult {
    pub fn errors(&self) -> Vec<&CellError> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().err()).collect()
    }

    pub fn cells_for(&self, n: usize) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.n == n)
    }

    /// Grid of one observable for one `N`; failed cells hold NaN.
    pub fn grid(&self, n: usize, observable: &str) -> Result<Grid2D> {
        let gammas = self.config.gamma_grid();
        let thetas = self.config.theta_grid(n);
        let mut values = Array2::from_elem((thetas.len(), gammas.len()), f64::NAN);
        for (k, cell) in self.cells_for(n).enumerate() {
            if let Ok(data) = &cell.outcome {
                values[[k / gammas.len(), k % gammas.len()]] = observable_value(&data.observables, observable)?;
            }
        }
        Ok(Grid2D { gammas, thetas, values })
    }
}

pub fn observable_value(o: &ObservableSet, name: &str) -> Result<f64> {
    Ok(match name {
        "jz" => o.jz,
        "jz_over_j" => o.jz_normalized,
        "jx2" => o.jx2,
        "jy2" => o.jy2,
        "jz2" => o.jz2,
        "jplus2_abs" => o.jplus2_abs,
        "concurrence" => o.concurrence,
        "purity" => o.purity,
        other => return Err(Error::InvalidArgument(format!("unknown observable '{other}'"))),
    })
}

/// Values on a `θ × γ_x` grid (rows are `θ`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub gammas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub values: Array2<f64>,
}

impl Grid2D {
    pub fn new(gammas: Vec<f64>, thetas: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (thetas.len(), gammas.len()) {
            return Err(Error::DimensionMismatch { expected: thetas.len() * gammas.len(), found: values.len() });
        }
        Ok(Self { gammas, thetas, values })
    }

    pub fn from_fn(gammas: Vec<f64>, thetas: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((thetas.len(), gammas.len()), |(i, k)| f(gammas[k], thetas[i]));
        Self { gammas, thetas, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoContour {
    /// `(θ, γ_x)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Row indices without a crossing.
    pub missing_rows: Vec<usize>,
}

/// First crossing of `level` along each `θ` row, scanning up in `γ_x`,
/// by linear interpolation.
pub fn iso_contour(grid: &Grid2D, level: f64) -> Result<IsoContour> {
    let mut points = Vec::new();
    let mut missing_rows = Vec::new();
    for (i, &theta) in grid.thetas.iter().enumerate() {
        let row = grid.values.row(i);
        let mut hit = None;
        for k in 0..row.len() {
            let a = row[k] - level;
            if a == 0.0 {
                hit = Some(grid.gammas[k]);
                break;
            }
            if k + 1 < row.len() {
                let b = row[k + 1] - level;
                if a.is_finite() && b.is_finite() && (a < 0.0) != (b < 0.0) && b != 0.0 {
                    let t = a / (a - b);
                    hit = Some(grid.gammas[k] + t * (grid.gammas[k + 1] - grid.gammas[k]));
                    break;
                }
            }
        }
        match hit {
            Some(g) => points.push((theta, g)),
            None => missing_rows.push(i),
        }
    }
    if points.is_empty() {
        return Err(Error::NoCrossing(format!("no row crosses level {level}")));
    }
    Ok(IsoContour { points, missing_rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMaximum {
    pub theta: f64,
    pub gamma_star: f64,
    pub value: f64,
    /// Every sample in the row is zero (or failed).
    pub all_zero: bool,
}

/// Per-row maximum with parabolic refinement around interior maxima.
pub fn locate_concurrence_max(grid: &Grid2D) -> Vec<RowMaximum> {
    let step = grid.gammas[1] - grid.gammas[0];
    grid.thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let row = grid.values.row(i);
            let best = row
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .max_by(|a, b| a.1.total_cmp(b.1));
            let Some((k, &vmax)) = best else {
                return RowMaximum { theta, gamma_star: f64::NAN, value: f64::NAN, all_zero: true };
            };
            if vmax <= 0.0 {
                return RowMaximum { theta, gamma_star: grid.gammas[k], value: 0.0, all_zero: true };
            }
            let (gamma_star, value) = if k > 0 && k + 1 < row.len() && row[k - 1].is_finite() && row[k + 1].is_finite() {
                let (fm, f0, fp) = (row[k - 1], vmax, row[k + 1]);
                let curvature = fm - 2.0 * f0 + fp;
                if curvature < 0.0 {
                    let offset = 0.5 * (fm - fp) / curvature;
                    (grid.gammas[k] + offset * step, f0 - 0.125 * (fm - fp) * (fm - fp) / curvature)
                } else {
                    (grid.gammas[k], f0)
                }
            } else {
                (grid.gammas[k], vmax)
            };
            RowMaximum { theta, gamma_star, value, all_zero: false }
        })
        .collect()
}

/// `∂/∂γ_x` minimum of every row.
pub fn derivative_minima(grid: &Grid2D) -> Vec<(f64, Result<DerivativeMinimum>)> {
    grid.thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| (theta, sweep_derivative(&grid.gammas, &grid.values.row(i).to_vec())))
        .collect()
}

pub const CSV_HEADER: &str =
    "N,h,kappa,gamma_x,theta_axis,theta,jz,jz_over_j,jx2,jy2,jz2,jplus2_abs,concurrence,purity,residual,nullspace_dim";

/// 17 significant digits; round-trips exactly through `str::parse`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(out: &mut String, cfg: &SweepConfig, cell: &SweepCell) {
    let f = format_f64;
    let _ = write!(
        out,
        "{},{},{},{},{},{}",
        cell.n,
        f(cfg.h),
        f(cfg.kappa),
        f(cell.gamma_x),
        cfg.theta_axis.as_str(),
        f(cell.theta)
    );
    let requested = |name: &str| cfg.outputs.iter().any(|o| o == name);
    match &cell.outcome {
        Ok(d) => {
            for name in OBSERVABLE_NAMES {
                let v = if requested(name) { observable_value(&d.observables, name).unwrap() } else { f64::NAN };
                let _ = write!(out, ",{}", f(v));
            }
            let _ = write!(out, ",{},{}", f(d.residual), d.nullspace_dim);
        }
        Err(e) => {
            for _ in 0..OBSERVABLE_NAMES.len() + 1 {
                let _ = write!(out, ",{}", f(f64::NAN));
            }
            let _ = write!(out, ",{}", e.nullspace_dim.unwrap_or(0));
        }
    }
    out.push('\n');
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io { path: path.into(), source })?;
    file.write_all(bytes).map_err(|source| Error::Io { path: path.into(), source })
}

/// CSV text of the given cells in stored order.
pub fn csv_string<'a>(cfg: &SweepConfig, cells: impl IntoIterator<Item = &'a SweepCell>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for cell in cells {
        csv_row(&mut out, cfg, cell);
    }
    out
}

pub fn export_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_file(path, csv_string(&result.config, &result.cells).as_bytes())
}

/// One CSV per `N` when the path contains `{n}`, else everything in one
/// file. Returns the paths written.
pub fn export_csv_split(result: &SweepResult, template: &Path) -> Result<Vec<PathBuf>> {
    let text = template.to_string_lossy();
    if !text.contains("{n}") {
        export_csv(result, template)?;
        return Ok(vec![template.to_path_buf()]);
    }
    let mut written = Vec::new();
    for &n in &result.config.n_list {
        let path = PathBuf::from(text.replace("{n}", &n.to_string()));
        write_file(&path, csv_string(&result.config, result.cells_for(n)).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct MetadataDoc<'a> {
    config: &'a SweepConfig,
    config_sha256: &'a str,
    code_version: &'a str,
    started_unix_s: f64,
    finished_unix_s: f64,
    cell_count: usize,
    error_count: usize,
    errors: Vec<&'a CellError>,
}

pub fn export_json_metadata(result: &SweepResult, path: &Path) -> Result<()> {
    let errors = result.errors();
    let doc = MetadataDoc {
        config: &result.config,
        config_sha256: &result.metadata.config_sha256,
        code_version: &result.metadata.code_version,
        started_unix_s: result.metadata.started_unix_s,
        finished_unix_s: result.metadata.finished_unix_s,
        cell_count: result.cells.len(),
        error_count: errors.len(),
        errors,
    };
    let text = serde_json::to_string_pretty(&doc).expect("metadata serializes");
    write_file(path, text.as_bytes())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub kappa: f64,
    pub gamma_x: f64,
    pub theta_axis: ThetaAxis,
    pub theta: f64,
    pub jz: f64,
    pub jz_over_j: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub jplus2_abs: f64,
    pub concurrence: f64,
    pub purity: f64,
    pub residual: f64,
    pub nullspace_dim: usize,
}

impl CsvRecord {
    pub fn value(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "jz" => self.jz,
            "jz_over_j" => self.jz_over_j,
            "jx2" => self.jx2,
            "jy2" => self.jy2,
            "jz2" => self.jz2,
            "jplus2_abs" => self.jplus2_abs,
            "concurrence" => self.concurrence,
            "purity" => self.purity,
            other => return Err(Error::InvalidArgument(format!("unknown observable '{other}'"))),
        })
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.into(), source })?;
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec.map_err(|source| Error::Csv { path: path.into(), source })?);
    }
    Ok(rows)
}

/// Rebuilds the `θ × γ_x` grid of one observable for one `N` from CSV rows.
pub fn grid_from_records(records: &[CsvRecord], n: usize, observable: &str) -> Result<Grid2D> {
    let rows: Vec<&CsvRecord> = records.iter().filter(|r| r.n == n).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("no rows for N = {n}")));
    }
    let mut gammas: Vec<f64> = Vec::new();
    let mut thetas: Vec<f64> = Vec::new();
    for r in &rows {
        if !gammas.contains(&r.gamma_x) {
            gammas.push(r.gamma_x);
        }
        if !thetas.contains(&r.theta) {
            thetas.push(r.theta);
        }
    }
    gammas.sort_by(f64::total_cmp);
    thetas.sort_by(f64::total_cmp);
    if gammas.len() < 2 || rows.len() != gammas.len() * thetas.len() {
        return Err(Error::InvalidArgument("CSV rows do not form a complete grid".into()));
    }
    let mut values = Array2::from_elem((thetas.len(), gammas.len()), f64::NAN);
    for r in rows {
        let i = thetas.iter().position(|t| *t == r.theta).unwrap();
        let k = gammas.iter().position(|g| *g == r.gamma_x).unwrap();
        values[[i, k]] = r.value(observable)?;
    }
    Grid2D::new(gammas, thetas, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> SweepConfig {
        SweepConfig::from_toml_str(
            r#"
            n_list = [4]
            kappa = 0.2
            gamma_min = 0.5
            gamma_max = 1.5
            gamma_count = 3
            theta_axis = "x"
            theta_max = 2.0
            theta_count = 2
            "#,
        )
        .unwrap()
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = SweepConfig::from_toml_str(
            "n_list=[4]\nkappa=0.1\ngamma_min=0\ngamma_max=1\ngamma_count=3\ntheta_axis='x'\ntheta_count=2\ngama=1",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn validation_rules() {
        let mut c = small_config();
        c.gamma_count = 1;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.theta_max = Some(10.0);
        assert!(c.validate().is_err(), "θ above π√4");
        let mut c = small_config();
        c.outputs = vec!["entropy".into()];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.n_list.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn log1p_axis_is_uniform_in_log() {
        let mut c = small_config();
        c.theta_scale = AxisScale::Log1p;
        c.theta_count = 5;
        c.theta_max = None;
        let axis = c.theta_grid(16);
        assert_eq!(axis[0], 0.0);
        assert_abs_diff_eq!(axis[4], 4.0 * std::f64::consts::PI, epsilon = 1e-15);
        let logs: Vec<f64> = axis.iter().map(|t| t.ln_1p()).collect();
        for w in logs.windows(3) {
            assert_abs_diff_eq!(w[2] - w[1], w[1] - w[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn sweep_matches_direct_calls() {
        let c = small_config();
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.cells.len(), 6);
        assert!(r.errors().is_empty());
        let cell = &r.cells[4];
        assert_eq!((cell.gamma_x, cell.theta), (1.0, 2.0));
        let b = AngularMomentumBasis::new(4).unwrap();
        let direct = solve_cell(&c.params(4, 1.0, 2.0), Feedback::On, &c.solver_options(), &ObservableOperators::new(&b))
            .unwrap();
        assert_eq!(cell.outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let c = small_config();
        let r = run_sweep(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        export_csv(&r, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), r.cells.len());
        for (row, cell) in rows.iter().zip(&r.cells) {
            let d = cell.outcome.as_ref().unwrap();
            assert_eq!(row.gamma_x.to_bits(), cell.gamma_x.to_bits());
            assert_eq!(row.theta.to_bits(), cell.theta.to_bits());
            assert_eq!(row.jz.to_bits(), d.observables.jz.to_bits());
            assert_eq!(row.concurrence.to_bits(), d.observables.concurrence.to_bits());
            assert_eq!(row.residual.to_bits(), d.residual.to_bits());
        }
        let meta = dir.path().join("meta.json");
        export_json_metadata(&r, &meta).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(v["config_sha256"].as_str().unwrap(), c.hash());
        assert_eq!(v["error_count"], 0);
    }

    #[test]
    fn iso_contour_of_linear_field() {
        let gammas = linear_axis(0.0, 1.0, 101);
        let thetas = linear_axis(0.0, 3.0, 4);
        let g = Grid2D::from_fn(gammas, thetas, |gx, _| 1.0 - gx);
        let c = iso_contour(&g, 0.93).unwrap();
        assert_eq!(c.points.len(), 4);
        for (_, gx) in c.points {
            assert_abs_diff_eq!(gx, 0.07, epsilon = 1e-12);
        }
        assert!(matches!(iso_contour(&g, 5.0), Err(Error::NoCrossing(_))));
    }

    #[test]
    fn ridge_is_recovered() {
        let gammas = linear_axis(0.0, 3.0, 151);
        let thetas = linear_axis(0.0, 5.0, 6);
        let g = Grid2D::from_fn(gammas, thetas, |gx, th| (-(gx - (1.5 - 0.1 * th)).powi(2)).exp());
        for m in locate_concurrence_max(&g) {
            assert!((m.gamma_star - (1.5 - 0.1 * m.theta)).abs() < 0.02 * 0.1, "{m:?}");
            assert!(!m.all_zero);
        }
        let zero = Grid2D::from_fn(linear_axis(0.0, 1.0, 5), vec![0.0], |_, _| 0.0);
        assert!(locate_concurrence_max(&zero)[0].all_zero);
    }

    #[test]
    fn output_template() {
        let mut c = small_config();
        c.output_path = Some("runs/n{n}.csv".into());
        assert_eq!(c.output_path_for(30).unwrap(), PathBuf::from("runs/n30.csv"));
    }
}
