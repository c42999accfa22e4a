//! Configuration ingestion and the execution entry points behind the
//! `warpflow` binary: single runs with file artifacts, phase-diagram grids,
//! and the closed-form Gaussian predictions.
//!
//! Config files are TOML with a strict schema: unknown keys are rejected so
//! that experiment records stay reproducible. Time series and the phase
//! matrix are CSV; the outcome report is JSON.

use crate::composer::{
    classify_outcome, simulate, FlowOutcome, FlowTuning, OutcomeTag, SimOptions,
};
use crate::gaussian::{classify_gaussian_case, threshold_fraction, GaussianConfig};
use crate::radial::RadialOptions;
use crate::space::{
    AngularDensity, CubicTable, DensitySpec, LatLonGrid, RadialDensity, WarpedSpace,
};
use crate::sphere_flow::{
    diagnostics, make_fourier_curve, make_latitude_circle, write_snapshot, SphericalCurve,
};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] crate::composer::SimError),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
    #[error(transparent)]
    Curve(#[from] crate::sphere_flow::CurveError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub density: DensityConfig,
    pub initial: InitialConfig,
    pub r0: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// One of `euclidean`, `hyperbolic`, `power`, `table`.
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glue_radius: Option<f64>,
    /// Knot table for `table`: one `r w` pair per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    /// One of `none`, `gaussian` (needs `mu`), `log_power` (needs `a`,`b`,`c`
    /// for φ = a·ln r + b·r²/2 + c/r).
    pub phi: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// One of `zero`, `z_squared` (needs `psi_amplitude`), `table`
    /// (needs `psi_path`: header `n_theta n_phi`, then values row-major).
    #[serde(default = "default_psi")]
    pub psi: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_path: Option<PathBuf>,
}

fn default_psi() -> String {
    "zero".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `latitude` or `fourier`.
    pub kind: String,
    pub theta0: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cos_coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sin_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_nodes: usize,
    pub cfl: f64,
    pub reparam_every: usize,
    pub snapshot_every: f64,
    pub t_budget: f64,
    pub max_sphere_steps: usize,
    pub diag_every: usize,
    pub embed_check_every: usize,
    pub rtol: f64,
    pub window: usize,
    pub len_eps_factor: f64,
    pub kpsi_eps_factor: f64,
    pub blowup_ratio: f64,
    pub time_match_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_nodes: 512,
            cfl: 0.25,
            reparam_every: 25,
            snapshot_every: 0.0,
            t_budget: 50.0,
            max_sphere_steps: 2_000_000,
            diag_every: 1,
            embed_check_every: 100,
            rtol: 1e-10,
            window: 50,
            len_eps_factor: 1e-3,
            kpsi_eps_factor: 1e-5,
            blowup_ratio: 1e3,
            time_match_tol: 1e-3,
            pole_eps: None,
            root_eps: None,
            r_max: None,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Validation(m));
        match self.space.preset.as_str() {
            "euclidean" | "hyperbolic" => {}
            "power" => {
                if self.space.p.is_none() {
                    return fail("space.preset = \"power\" requires space.p".into());
                }
            }
            "table" => {
                if self.space.path.is_none() {
                    return fail("space.preset = \"table\" requires space.path".into());
                }
            }
            other => return fail(format!("unknown space preset {other:?}")),
        }
        match self.density.phi.as_str() {
            "none" => {}
            "gaussian" => {
                if !self.density.mu.map(|m| m > 0.0).unwrap_or(false) {
                    return fail("density.phi = \"gaussian\" requires density.mu > 0".into());
                }
            }
            "log_power" => {
                if self.density.a.is_none() || self.density.b.is_none() || self.density.c.is_none()
                {
                    return fail("density.phi = \"log_power\" requires a, b and c".into());
                }
            }
            other => return fail(format!("unknown phi preset {other:?}")),
        }
        match self.density.psi.as_str() {
            "zero" => {}
            "z_squared" => {
                if self.density.psi_amplitude.is_none() {
                    return fail("density.psi = \"z_squared\" requires psi_amplitude".into());
                }
            }
            "table" => {
                if self.density.psi_path.is_none() {
                    return fail("density.psi = \"table\" requires psi_path".into());
                }
            }
            other => return fail(format!("unknown psi preset {other:?}")),
        }
        match self.initial.kind.as_str() {
            "latitude" | "fourier" => {}
            other => return fail(format!("unknown initial curve kind {other:?}")),
        }
        if !(self.initial.theta0 > 0.0 && self.initial.theta0 <= std::f64::consts::FRAC_PI_2) {
            return fail("initial.theta0 must lie in (0, π/2]".into());
        }
        if !(self.r0 > 0.0) {
            return fail("r0 must be positive".into());
        }
        let s = &self.solver;
        if s.n_nodes < 16 {
            return fail(format!("solver.n_nodes must be ≥ 16, got {}", s.n_nodes));
        }
        if !(s.cfl > 0.0 && s.cfl <= 0.25) {
            return fail("solver.cfl must lie in (0, 0.25]".into());
        }
        for (name, v) in [
            ("t_budget", s.t_budget),
            ("rtol", s.rtol),
            ("len_eps_factor", s.len_eps_factor),
            ("kpsi_eps_factor", s.kpsi_eps_factor),
            ("blowup_ratio", s.blowup_ratio),
            ("time_match_tol", s.time_match_tol),
        ] {
            if !(v > 0.0) {
                return fail(format!("solver.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn build_space(&self) -> Result<WarpedSpace, CliError> {
        Ok(match self.space.preset.as_str() {
            "euclidean" => WarpedSpace::Euclidean,
            "hyperbolic" => WarpedSpace::Hyperbolic,
            "power" => WarpedSpace::power(
                self.space.p.unwrap(),
                self.space.glue_radius.unwrap_or(1.0),
            )?,
            "table" => {
                let path = self.space.path.as_ref().unwrap();
                let (xs, ys) = read_pair_table(path)?;
                WarpedSpace::Tabulated(CubicTable::new(xs, ys)?)
            }
            _ => unreachable!("validated"),
        })
    }

    pub fn build_density(&self) -> Result<DensitySpec, CliError> {
        let radial = match self.density.phi.as_str() {
            "none" => RadialDensity::Uniform,
            "gaussian" => RadialDensity::Gaussian {
                mu: self.density.mu.unwrap(),
            },
            "log_power" => RadialDensity::LogPower {
                a: self.density.a.unwrap(),
                b: self.density.b.unwrap(),
                c: self.density.c.unwrap(),
            },
            _ => unreachable!("validated"),
        };
        let angular = match self.density.psi.as_str() {
            "zero" => AngularDensity::Zero,
            "z_squared" => AngularDensity::ZSquared {
                amplitude: self.density.psi_amplitude.unwrap(),
            },
            "table" => {
                let path = self.density.psi_path.as_ref().unwrap();
                AngularDensity::LatLonGrid(read_psi_grid(path)?)
            }
            _ => unreachable!("validated"),
        };
        Ok(DensitySpec::new(radial, angular))
    }

    pub fn build_initial(&self, rho: f64) -> Result<SphericalCurve, CliError> {
        let n = self.solver.n_nodes;
        Ok(match self.initial.kind.as_str() {
            "latitude" => make_latitude_circle(self.initial.theta0, n, rho)?,
            "fourier" => make_fourier_curve(
                self.initial.theta0,
                &self.initial.cos_coeffs,
                &self.initial.sin_coeffs,
                n,
                rho,
            )?,
            _ => unreachable!("validated"),
        })
    }

    pub fn sim_options(&self) -> SimOptions {
        let s = &self.solver;
        SimOptions {
            t_budget: s.t_budget,
            radial: RadialOptions {
                rtol: s.rtol,
                pole_eps: s.pole_eps,
                root_eps: s.root_eps,
                r_max: s.r_max,
                max_step: s.max_step,
            },
            flow: FlowTuning {
                cfl: s.cfl,
                reparam_every: s.reparam_every,
                snapshot_every: s.snapshot_every,
                max_steps: s.max_sphere_steps,
                diag_every: s.diag_every,
                embed_check_every: s.embed_check_every,
                window: s.window,
                len_eps_factor: s.len_eps_factor,
                kpsi_eps_factor: s.kpsi_eps_factor,
                blowup_ratio: s.blowup_ratio,
            },
            time_match_tol: s.time_match_tol,
        }
    }

    /// Requested initial area fraction of the polar cap; the exact half-area
    /// intent of θ0 = π/2 is restored from the f64 rounding of cos(π/2).
    pub fn requested_fraction(&self) -> f64 {
        snap_fraction(0.5 * (1.0 - self.initial.theta0.cos()))
    }

    /// Gaussian oracle configuration, when the density is Gaussian with ψ ≡ 0.
    pub fn gaussian_config(&self) -> Option<GaussianConfig> {
        if self.density.phi != "gaussian" || self.density.psi != "zero" {
            return None;
        }
        GaussianConfig::new(self.density.mu?, self.r0, self.requested_fraction()).ok()
    }
}

fn snap_fraction(f: f64) -> f64 {
    if (f - 0.5).abs() < 1e-12 {
        0.5
    } else {
        f
    }
}

fn read_pair_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split([',', ' ', '\t']).filter(|s| !s.is_empty());
        let parse = |s: Option<&str>| -> Result<f64, CliError> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: expected `r w`", i + 1),
            })
        };
        xs.push(parse(parts.next())?);
        ys.push(parse(parts.next())?);
    }
    Ok((xs, ys))
}

fn read_psi_grid(path: &Path) -> Result<LatLonGrid, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut tokens = text.split_whitespace();
    let bad = |m: &str| CliError::Parse {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    let n_theta: usize = tokens
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing n_theta"))?;
    let n_phi: usize = tokens
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing n_phi"))?;
    let values: Vec<f64> = tokens
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(&format!("bad grid value: {e}")))?;
    Ok(LatLonGrid::new(values, n_theta, n_phi)?)
}

/// Output directory, honoring the `WARPFLOW_OUT` override.
pub fn resolve_out_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os("WARPFLOW_OUT") {
        Some(dir) => PathBuf::from(dir),
        None => config.output.dir.clone(),
    }
}

pub struct RunReport {
    pub outcome: FlowOutcome,
    pub out_dir: PathBuf,
    pub report_path: PathBuf,
    pub exit_code: i32,
}

/// Execute one configuration: simulate, classify, and write the time series,
/// the curve snapshots and the JSON outcome report.
pub fn run_single(config: &RunConfig) -> Result<RunReport, CliError> {
    let space = config.build_space()?;
    let density = config.build_density()?;
    let rho = space.w(config.r0);
    let initial = config.build_initial(rho)?;
    let opts = config.sim_options();
    let mut run = simulate(&space, &density, config.r0, &initial, &opts)?;
    run.fingerprint = serde_json::to_string(config).expect("config serializes");
    let outcome = classify_outcome(&run, &space, &density, &opts);

    let out_dir = resolve_out_dir(config);
    std::fs::create_dir_all(&out_dir)?;

    // Time series: one record per composed sample, ambient-scale quantities.
    let series_path = out_dir.join("timeseries.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&series_path)?);
        writeln!(f, "t,ttilde,R,length,weighted_length,max_abs_k_psi,area_fraction")?;
        let mut diag_cache: Vec<Option<crate::sphere_flow::CurveDiagnostics>> =
            vec![None; run.sphere.snapshots.len()];
        for c in &run.composed {
            if diag_cache[c.snapshot].is_none() {
                let (_, snap) = &run.sphere.snapshots[c.snapshot];
                diag_cache[c.snapshot] = Some(diagnostics(snap, &density)?);
            }
            let d = diag_cache[c.snapshot].as_ref().unwrap();
            let scale = space.w(c.r) / rho;
            let phi_factor = density.phi(c.r).exp();
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                c.t,
                c.ttilde,
                c.r,
                d.length * scale,
                d.weighted_length * scale * phi_factor,
                d.max_abs_k_psi / scale,
                d.area_fraction
            )?;
        }
    }

    for (i, (_, snap)) in run.sphere.snapshots.iter().enumerate() {
        let path = out_dir.join(format!("snapshot_{i:04}.txt"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_snapshot(&mut f, snap)?;
    }

    let report_path = out_dir.join("report.json");
    let ev = &outcome.evidence;
    let report = serde_json::json!({
        "config": config,
        "terminal_events": {
            "radial": format!("{:?}", run.radial.terminal),
            "sphere": format!("{:?}", run.sphere.halt),
        },
        "outcome_tag": outcome.tag().to_string(),
        "evidence": {
            "t_end": ev.t_end,
            "ttilde_end": ev.ttilde_end,
            "R_end": ev.r_end,
            "length_end": ev.length_end,
            "area_fraction_end": ev.area_fraction_end,
            "notes": ev.notes,
            "area_fraction_series_path": "timeseries.csv",
            "snapshot_ttildes": run.sphere.snapshots.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
        },
    });
    let report_text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, report_text.as_bytes())?;

    let exit_code = if outcome.tag() == OutcomeTag::Undetermined {
        2
    } else {
        0
    };
    Ok(RunReport {
        outcome,
        out_dir,
        report_path,
        exit_code,
    })
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub r0: f64,
    pub theta0: f64,
    pub area_fraction0: f64,
    /// Outcome tag string, or `error: ...` when the run failed.
    pub outcome: String,
    pub oracle: Option<OutcomeTag>,
    pub agree: Option<bool>,
}

pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub matrix_path: PathBuf,
}

/// Run the cartesian (r0, theta0) grid with up to `parallelism` concurrent
/// cells and write the phase matrix. Cell order in the matrix follows the
/// grid index regardless of completion order.
pub fn run_phase_grid(
    base: &RunConfig,
    r0_values: &[f64],
    theta0_values: &[f64],
    parallelism: usize,
) -> Result<GridReport, CliError> {
    if r0_values.is_empty() || theta0_values.is_empty() {
        return Err(CliError::Validation("empty phase grid".into()));
    }
    let cells: Vec<(f64, f64)> = r0_values
        .iter()
        .flat_map(|r0| theta0_values.iter().map(move |t| (*r0, *t)))
        .collect();

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, GridCell)>();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.max(1) {
            let tx = tx.clone();
            let next = &next;
            let cells = &cells;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let (r0, theta0) = cells[i];
                let _ = tx.send((i, run_grid_cell(base, r0, theta0)));
            });
        }
    });
    drop(tx);
    let mut results: Vec<Option<GridCell>> = vec![None; cells.len()];
    for (i, cell) in rx {
        results[i] = Some(cell);
    }
    let cells: Vec<GridCell> = results.into_iter().map(|c| c.unwrap()).collect();

    let out_dir = resolve_out_dir(base);
    std::fs::create_dir_all(&out_dir)?;
    let matrix_path = out_dir.join("phase_matrix.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&matrix_path)?);
    writeln!(f, "r0,theta0,area_fraction0,outcome_tag,oracle_tag,agree")?;
    for c in &cells {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            c.r0,
            c.theta0,
            c.area_fraction0,
            c.outcome,
            c.oracle.map(|t| t.to_string()).unwrap_or_default(),
            c.agree.map(|a| a.to_string()).unwrap_or_default()
        )?;
    }
    drop(f);
    Ok(GridReport { cells, matrix_path })
}

fn run_grid_cell(base: &RunConfig, r0: f64, theta0: f64) -> GridCell {
    let mut config = base.clone();
    config.r0 = r0;
    config.initial.theta0 = theta0;
    let fraction = config.requested_fraction();
    let oracle = config.gaussian_config().map(|g| classify_gaussian_case(&g));
    let outcome = (|| -> Result<OutcomeTag, CliError> {
        let space = config.build_space()?;
        let density = config.build_density()?;
        let rho = space.w(config.r0);
        let initial = config.build_initial(rho)?;
        let opts = config.sim_options();
        let run = simulate(&space, &density, config.r0, &initial, &opts)?;
        Ok(classify_outcome(&run, &space, &density, &opts).tag())
    })();
    match outcome {
        Ok(tag) => GridCell {
            r0,
            theta0,
            area_fraction0: fraction,
            outcome: tag.to_string(),
            oracle,
            agree: oracle.map(|o| o == tag),
        },
        Err(e) => GridCell {
            r0,
            theta0,
            area_fraction0: fraction,
            outcome: format!("error: {e}"),
            oracle,
            agree: None,
        },
    }
}

/// Human-readable closed-form predictions for a Gaussian configuration.
pub fn oracle_report(config: &RunConfig) -> Result<String, CliError> {
    let g = config.gaussian_config().ok_or_else(|| {
        CliError::Validation(
            "the oracle needs density.phi = \"gaussian\" and density.psi = \"zero\"".into(),
        )
    })?;
    let mut s = String::new();
    use std::fmt::Write as _;
    writeln!(s, "gaussian oracle: mu = {}, r0 = {}", g.mu, g.r0).unwrap();
    writeln!(s, "initial area fraction: {}", g.area_fraction0).unwrap();
    writeln!(s, "threshold fraction:    {}", threshold_fraction(&g)).unwrap();
    if let Some(tp) = g.pole_time() {
        writeln!(s, "pole-hit time:         {tp}").unwrap();
    }
    if let Some(lim) = g.ttilde_limit() {
        writeln!(s, "ttilde limit:          {lim}").unwrap();
    }
    writeln!(
        s,
        "sphere-flow maximal time: {}",
        crate::gaussian::ttilde_max_exact(&g)
    )
    .unwrap();
    writeln!(s, "predicted outcome:     {}", classify_gaussian_case(&g)).unwrap();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, body).unwrap();
        path
    }

    const MINIMAL: &str = r#"
r0 = 2.0

[space]
preset = "euclidean"

[density]
phi = "gaussian"
mu = 1.0

[initial]
kind = "latitude"
theta0 = 1.0471975511965976
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.solver.n_nodes, 512);
        assert_eq!(cfg.solver.reparam_every, 25);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
        assert!(cfg.gaussian_config().is_some());
    }

    #[test]
    fn too_few_nodes_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}\n[solver]\nn_nodes = 8\n");
        let path = write_config(dir.path(), &body);
        match load_config(&path) {
            Err(CliError::Validation(msg)) => assert!(msg.contains("16"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}\ncolour = \"red\"\n");
        let path = write_config(dir.path(), &body);
        match load_config(&path) {
            Err(CliError::Parse { message, .. }) => {
                assert!(message.contains("colour"), "{message}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn requested_fraction_snaps_the_equator() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("1.0471975511965976", &std::f64::consts::FRAC_PI_2.to_string());
        let path = write_config(dir.path(), &body);
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.requested_fraction(), 0.5);
    }

    #[test]
    fn oracle_report_prints_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let cfg = load_config(&path).unwrap();
        let report = oracle_report(&cfg).unwrap();
        assert!(report.contains("threshold fraction"));
        assert!(report.contains("EscapeHyperbolicCurveAtInfinity"));
    }
}
