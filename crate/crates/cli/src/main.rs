use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use lmg_core::closed::{density_of_states, diagonalize, finite_difference, ground_state_energy_curve};
use lmg_core::mean_field::{mf_bifurcation_scan, mf_critical_coupling, MfParams};
use lmg_core::observables::{sweep_derivative, ObservableOperators};
use lmg_core::steady::{solve_model, SolverOptions};
use lmg_core::sweep::{
    export_csv_split, export_json_metadata, format_f64, grid_from_records, iso_contour, linear_axis,
    locate_concurrence_max, read_csv, run_sweep, SweepConfig,
};
use lmg_core::{build_basis, build_hamiltonian, Feedback, ModelParams};

mod settings;

use settings::{merged_table, resolve};

#[derive(Parser)]
#[command(name = "lmg", version, about = "Dissipative LMG model with jump-conditioned feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum of the closed model with parity labels
    Spectrum(SpectrumArgs),
    /// Density of states of the closed model versus E/(jh)
    Dos(DosArgs),
    /// Ground-state energy per spin and its γ_x derivatives
    Groundstate(GroundstateArgs),
    /// Mean-field fixed points along a γ_x grid
    Meanfield(MeanfieldArgs),
    /// Steady state and observables at one parameter point
    Steady(SteadyArgs),
    /// Steady-state sweep over (γ_x, θ)
    Sweep(SweepArgs),
    /// Iso-contours, derivative minima or maxima from a sweep CSV
    Extract(ExtractArgs),
}

/// Shared by every subcommand.
#[derive(Args, Serialize)]
struct Common {
    /// TOML file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent); `{n}` expands to N
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SpectrumArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_x: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumSettings {
    n: usize,
    #[serde(default = "one")]
    h: f64,
    gamma_x: f64,
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DosArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_x: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

fn default_bins() -> usize {
    50
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DosSettings {
    n: usize,
    #[serde(default = "one")]
    h: f64,
    gamma_x: f64,
    #[serde(default = "default_bins")]
    bins: usize,
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GroundstateArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_count: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundstateSettings {
    n_list: Vec<usize>,
    #[serde(default = "one")]
    h: f64,
    gamma_min: f64,
    gamma_max: f64,
    gamma_count: usize,
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MeanfieldArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_count: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanfieldSettings {
    #[serde(default = "one")]
    h: f64,
    kappa: f64,
    gamma_min: f64,
    gamma_max: f64,
    gamma_count: usize,
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SteadyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_x: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_x: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_y: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_z: Option<f64>,
    /// on | off
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    feedback: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

fn feedback_on() -> Feedback {
    Feedback::On
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SteadySettings {
    n: usize,
    #[serde(default = "one")]
    h: f64,
    kappa: f64,
    gamma_x: f64,
    #[serde(default)]
    theta_x: f64,
    #[serde(default)]
    theta_y: f64,
    #[serde(default)]
    theta_z: f64,
    #[serde(default = "feedback_on")]
    feedback: Feedback,
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_count: Option<usize>,
    /// x | z
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_axis: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_min: Option<f64>,
    /// Defaults to π√N
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_count: Option<usize>,
    /// linear | log1p
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_scale: Option<String>,
    /// on | off
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    feedback: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<String>>,
    /// CSV path; `{n}` writes one file per N
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output_path: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    worker_count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dense_max_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    memory_budget_mb: Option<u64>,
    /// TOML file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    /// Sweep CSV
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// iso | argmin | argmax
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    observable: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "lowercase")]
enum ExtractMode {
    Iso,
    Argmin,
    Argmax,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractSettings {
    input: PathBuf,
    mode: ExtractMode,
    n: Option<usize>,
    observable: Option<String>,
    level: Option<f64>,
    output: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn expand(path: &Path, n: usize) -> PathBuf {
    PathBuf::from(path.to_string_lossy().replace("{n}", &n.to_string()))
}

fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let s: SpectrumSettings = resolve(args, args.common.config.as_deref())?;
    let params = ModelParams::new(s.n, s.h, s.gamma_x, 0.0);
    let basis = build_basis(s.n)?;
    let spec = diagonalize(&build_hamiltonian(&params, &basis)?)?;
    let j = basis.j();
    let mut out = String::from("k,energy,energy_over_jh,parity\n");
    for (k, (e, p)) in spec.energies.iter().zip(&spec.parities).enumerate() {
        out.push_str(&format!("{k},{},{},{}\n", format_f64(*e), format_f64(e / (j * s.h)), p.as_str()));
    }
    write_output(s.output.as_deref(), &out)
}

fn dos(args: &DosArgs) -> Result<()> {
    let s: DosSettings = resolve(args, args.common.config.as_deref())?;
    let params = ModelParams::new(s.n, s.h, s.gamma_x, 0.0);
    let basis = build_basis(s.n)?;
    let spec = diagonalize(&build_hamiltonian(&params, &basis)?)?;
    let scaled: Vec<f64> = spec.energies.iter().map(|e| e / (basis.j() * s.h)).collect();
    let d = density_of_states(&scaled, s.bins)?;
    let mut out = String::from("bin_center,density\n");
    for (c, v) in d.bin_centers.iter().zip(&d.density) {
        out.push_str(&format!("{},{}\n", format_f64(*c), format_f64(*v)));
    }
    write_output(s.output.as_deref(), &out)
}

fn groundstate(args: &GroundstateArgs) -> Result<()> {
    let s: GroundstateSettings = resolve(args, args.common.config.as_deref())?;
    if s.gamma_count < 5 {
        bail!("gamma_count must be at least 5");
    }
    let multi = s.n_list.len() > 1;
    if multi && !s.output.as_ref().is_some_and(|p| p.to_string_lossy().contains("{n}")) {
        bail!("several N need an output path containing {{n}}");
    }
    let grid = linear_axis(s.gamma_min, s.gamma_max, s.gamma_count);
    for &n in &s.n_list {
        let curve = ground_state_energy_curve(n, s.h, &grid)?;
        let e0: Vec<f64> = curve.iter().map(|c| c.1).collect();
        let d1 = finite_difference(&grid, &e0, 1)?;
        let d2 = finite_difference(&grid, &e0, 2)?;
        let mut out = String::from("gamma_x,e0,de0,d2e0\n");
        for k in 0..grid.len() {
            out.push_str(&format!("{},{},{},{}\n", format_f64(grid[k]), format_f64(e0[k]), format_f64(d1[k]), format_f64(d2[k])));
        }
        write_output(s.output.as_ref().map(|p| expand(p, n)).as_deref(), &out)?;
    }
    Ok(())
}

fn meanfield(args: &MeanfieldArgs) -> Result<()> {
    let s: MeanfieldSettings = resolve(args, args.common.config.as_deref())?;
    let params = MfParams::new(s.h, s.gamma_min, s.kappa);
    let grid = linear_axis(s.gamma_min, s.gamma_max, s.gamma_count);
    let rows = mf_bifurcation_scan(&params, &grid)?;
    log::info!("critical coupling h + κ²/(4h) = {}", mf_critical_coupling(&params)?);
    let mut out = String::from("gamma_x,branch_id,X,Y,Z,stability,re_lambda_max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_f64(r.gamma_x),
            r.branch.id(),
            format_f64(r.state.x),
            format_f64(r.state.y),
            format_f64(r.state.z),
            r.stability.as_str(),
            format_f64(r.re_lambda_max)
        ));
    }
    write_output(s.output.as_deref(), &out)
}

fn steady(args: &SteadyArgs) -> Result<()> {
    let s: SteadySettings = resolve(args, args.common.config.as_deref())?;
    let params = ModelParams::new(s.n, s.h, s.gamma_x, s.kappa).with_theta(s.theta_x, s.theta_y, s.theta_z);
    let result = solve_model(&params, s.feedback, &SolverOptions::default())?;
    let obs = ObservableOperators::new(&build_basis(s.n)?).evaluate(&result.rho)?;
    let doc = serde_json::json!({
        "params": params,
        "feedback": s.feedback,
        "observables": obs,
        "residual": result.residual,
        "nullspace_dim": result.nullspace_dim,
        "solver": result.solver,
        "min_eigenvalue": result.rho.min_eigenvalue()?,
    });
    write_output(s.output.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn metadata_path(csv: &Path) -> PathBuf {
    let text = csv.to_string_lossy().replace("{n}", "all");
    PathBuf::from(text).with_extension("json")
}

/// Returns the number of failed cells.
fn sweep(args: &SweepArgs) -> Result<usize> {
    let table = merged_table(args, args.config.as_deref())?;
    let config = SweepConfig::from_toml_str(&toml::to_string(&table)?)?;
    let result = run_sweep(&config)?;
    let errors = result.errors().len();
    match &config.output_path {
        Some(path) => {
            for written in export_csv_split(&result, path)? {
                log::info!("wrote {}", written.display());
            }
            export_json_metadata(&result, &metadata_path(path))?;
        }
        None => write_output(None, &lmg_core::sweep::csv_string(&config, &result.cells))?,
    }
    for e in result.errors() {
        eprintln!("cell N={} gamma_x={} theta={}: {}", e.n, e.gamma_x, e.theta, e.message);
    }
    Ok(errors)
}

fn extract(args: &ExtractArgs) -> Result<()> {
    let s: ExtractSettings = resolve(args, args.common.config.as_deref())?;
    let records = read_csv(&s.input)?;
    let n = match s.n {
        Some(n) => n,
        None => records.first().map(|r| r.n).context("empty CSV")?,
    };
    let default_obs = if s.mode == ExtractMode::Argmax { "concurrence" } else { "jz_over_j" };
    let observable = s.observable.as_deref().unwrap_or(default_obs);
    let grid = grid_from_records(&records, n, observable)?;
    let mut out = String::new();
    match s.mode {
        ExtractMode::Iso => {
            let level = s.level.context("iso mode needs --level")?;
            let contour = iso_contour(&grid, level)?;
            out.push_str("theta,gamma_x\n");
            for (t, g) in contour.points {
                out.push_str(&format!("{},{}\n", format_f64(t), format_f64(g)));
            }
            if !contour.missing_rows.is_empty() {
                log::warn!("rows without crossing: {:?}", contour.missing_rows);
            }
        }
        ExtractMode::Argmin => {
            out.push_str("theta,gamma_x,derivative\n");
            for (i, t) in grid.thetas.iter().enumerate() {
                match sweep_derivative(&grid.gammas, &grid.values.row(i).to_vec()) {
                    Ok(m) => out.push_str(&format!("{},{},{}\n", format_f64(*t), format_f64(m.location), format_f64(m.value))),
                    Err(e) => log::warn!("theta={t}: {e}"),
                }
            }
        }
        ExtractMode::Argmax => {
            out.push_str("theta,gamma_x,value,all_zero\n");
            for m in locate_concurrence_max(&grid) {
                out.push_str(&format!("{},{},{},{}\n", format_f64(m.theta), format_f64(m.gamma_star), format_f64(m.value), m.all_zero));
            }
        }
    }
    write_output(s.output.as_deref(), &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Keep dense kernels single-threaded so results never depend on BLAS
    // thread scheduling; parallelism comes from sweep workers.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectrum(a) => spectrum(a).map(|_| 0),
        Command::Dos(a) => dos(a).map(|_| 0),
        Command::Groundstate(a) => groundstate(a).map(|_| 0),
        Command::Meanfield(a) => meanfield(a).map(|_| 0),
        Command::Steady(a) => steady(a).map(|_| 0),
        Command::Sweep(a) => sweep(a),
        Command::Extract(a) => extract(a).map(|_| 0),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
