//! `freqlab` subcommands. Every run writes its outputs atomically plus a manifest;
//! data files carry no time-dependent values unless `--timing` is given.
//!
//! Exit codes: 0 success, 1 a scenario failed or was inconsistent, 2 usage or config
//! error, 3 solver failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::FieldConfig;
use crate::error::{Error, Result};
use crate::experiments::{self, ScenarioConfig, ScenarioKind, SweepEntry};
use crate::frequency::{almgren_frequency, geometric_radii};
use crate::io::{csv_table, json_string, write_atomic};
use crate::modulus::{
    check_phi_integrable, check_phi_submultiplicative, check_submultiplicative_psi, classify_osgood, Modulus,
    ModulusKind, DEFAULT_DEPTH,
};
use crate::solver::{BoundaryData, PolarGrid, Potential, Problem, Scheme, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "freqlab", version, about = "Frequency functions of rough-coefficient elliptic equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a modulus of continuity and check its growth hypotheses.
    Modulus(CommonArgs),
    /// Solve a Dirichlet problem and write the solution and its frequency profile.
    Solve(CommonArgs),
    /// Run one scenario, a sweep file, or the default sweep.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "freqlab-out")]
    pub out: PathBuf,
    /// Overrides the grid resolution as N_r,N_θ.
    #[arg(long, value_parser = parse_resolution)]
    pub resolution: Option<[usize; 2]>,
    /// Doubles the resolution; `solve` also writes the coarse-to-fine deltas.
    #[arg(long)]
    pub refine: bool,
    /// Reseeds every stochastic generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Records wall-clock time in the manifest (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Worker threads for the scenario queue.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Restricts the default sweep to these scenario kinds (repeatable).
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
}

fn parse_resolution(s: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([a.parse().map_err(|e| format!("N_r: {e}"))?, b.parse().map_err(|e| format!("N_θ: {e}"))?]),
        _ => Err(format!("expected N_r,N_θ, got '{s}'")),
    }
}

/// Index of one invocation's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON of the effective config.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub resolutions: Vec<[usize; 2]>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Only with `--timing`.
    pub wall_clock_seconds: Option<f64>,
}

fn config_hash<T: Serialize>(cfg: &T) -> String {
    let text = serde_json::to_string(cfg).expect("serialisable config");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracks written files relative to the output directory.
struct Outputs {
    root: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(root: &Path) -> Self {
        Outputs { root: root.to_path_buf(), written: Vec::new() }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.written.push(rel.to_string());
        Ok(())
    }

    fn finish<T: Serialize>(mut self, command: &str, cfg: &T, seed: Option<u64>, resolutions: Vec<[usize; 2]>, started: Option<Instant>) -> Result<()> {
        self.written.sort();
        let manifest = RunManifest {
            command: command.into(),
            config_hash: config_hash(cfg),
            seed,
            resolutions,
            outputs: self.written.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: started.map(|t| t.elapsed().as_secs_f64()),
        };
        write_atomic(&self.root.join("manifest.json"), json_string(&manifest).as_bytes())
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<String> {
    let path = path.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(Error::Config(format!("{}: empty config", path.display())));
    }
    Ok(text)
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{what} config, line {} column {}: {e}", e.line(), e.column())))
}

fn check_schema(v: u32) -> Result<()> {
    if v != experiments::SCHEMA_VERSION {
        return Err(Error::Config(format!("schema_version {v} unsupported (expected {})", experiments::SCHEMA_VERSION)));
    }
    Ok(())
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::NotConverged { .. } => EXIT_SOLVER,
        _ => EXIT_FAILED,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Modulus(a) => cmd_modulus(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("freqlab: {e}");
            exit_code_for(&e)
        }
    }
}

// ---------------------------------------------------------------------------
// modulus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    pub schema_version: u32,
    pub modulus: ModulusKind,
    #[serde(default)]
    pub checks: ModulusChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulusChecks {
    /// C_M in ψ(xy) ≤ C_M ψ(x)ψ(y).
    pub c_m: f64,
    /// C in φ(st) ≤ C φ(s)φ(t).
    pub c_phi: f64,
    pub samples: usize,
    pub depth: usize,
}

impl Default for ModulusChecks {
    fn default() -> Self {
        ModulusChecks { c_m: 3.0, c_phi: 3.0, samples: 64, depth: DEFAULT_DEPTH }
    }
}

pub fn cmd_modulus(args: &CommonArgs) -> Result<i32> {
    let started = args.timing.then(Instant::now);
    let cfg: ModulusConfig = parse_json(&read_config(&args.config)?, "modulus")?;
    check_schema(cfg.schema_version)?;
    let m = Modulus::new(cfg.modulus.clone()).map_err(|e| Error::Config(format!("modulus: {e}")))?;
    let c = &cfg.checks;
    let report = serde_json::json!({
        "modulus": m.label(),
        "classification": classify_osgood(&m, c.depth)?,
        "phi_integrable": check_phi_integrable(&m),
        "psi_submultiplicative": check_submultiplicative_psi(&m, c.c_m, c.samples)?,
        "phi_submultiplicative": check_phi_submultiplicative(&m, c.c_phi)?,
    });
    let mut out = Outputs::new(&args.out);
    out.write("modulus_report.json", json_string(&report).as_bytes())?;
    out.finish("modulus", &cfg, args.seed, Vec::new(), started)?;
    println!("{}: {}", m.label(), report["classification"]["verdict"]);
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// solve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { r_min: 0.1, r_max: 0.9, count: 33 }
    }
}

/// PCG controls; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcgConfig {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    pub field: FieldConfig,
    pub boundary: BoundaryData,
    pub grid: GridConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub scheme: Scheme,
    /// Constant potential V ≥ 0.
    #[serde(default)]
    pub potential: Option<f64>,
    #[serde(default)]
    pub solver: PcgConfig,
}

pub fn cmd_solve(args: &CommonArgs) -> Result<i32> {
    let started = args.timing.then(Instant::now);
    let mut cfg: SolveConfig = parse_json(&read_config(&args.config)?, "solve")?;
    check_schema(cfg.schema_version)?;
    if let Some([nr, nt]) = args.resolution {
        cfg.grid = GridConfig { n_r: nr, n_theta: nt };
    }
    if let Some(s) = args.seed {
        cfg.field.seed = s;
        if let BoundaryData::Random { seed, .. } = &mut cfg.boundary {
            *seed = s.wrapping_add(2);
        }
    }
    let mut grid = PolarGrid::new(cfg.grid.n_r, cfg.grid.n_theta, 1.0).map_err(|e| Error::Config(format!("grid: {e}")))?;
    if args.refine {
        grid = grid.refined();
    }
    let p = &cfg.profile;
    if !(p.r_min > 0.0 && p.r_min < p.r_max && p.r_max <= 1.0 && p.count >= 2) {
        return Err(Error::Config("profile needs 0 < r_min < r_max <= 1 and count >= 2".into()));
    }
    let field = cfg.field.build()?;
    let defaults = SolveOptions::default();
    if !cfg.solver.tolerance.is_none_or(|t| t > 0.0 && t < 1.0) {
        return Err(Error::Config("solver.tolerance must lie in (0,1)".into()));
    }
    let options = SolveOptions {
        scheme: cfg.scheme,
        potential: cfg.potential.filter(|v| *v > 0.0).map(Potential::constant),
        tolerance: cfg.solver.tolerance.unwrap_or(defaults.tolerance),
        max_iterations: cfg.solver.max_iterations.or(defaults.max_iterations),
        ..defaults
    };
    let radii = geometric_radii(p.r_min, p.r_max, p.count);
    let solve_on = |g: &PolarGrid| -> Result<_> {
        let u = Problem::new(&field, g, options.clone())?.solve_data(&cfg.boundary)?;
        let profile = almgren_frequency(&u, &field, &radii)?;
        Ok((u, profile))
    };
    let (u, profile) = solve_on(&grid)?;
    let mut out = Outputs::new(&args.out);
    let mut resolutions = vec![[grid.n_r, grid.n_theta]];
    out.write("solution.fqlgrid", &u.to_grid_file().to_bytes())?;
    out.write("profile.csv", profile.to_csv().as_bytes())?;
    out.write("profile.svg", profile.plot(&format!("N(r) for {}", field.label)).as_bytes())?;
    let stats = serde_json::json!({
        "field": field.label,
        "grid": grid,
        "iterations": u.stats.iterations,
        "relative_residual": u.stats.relative_residual,
        "sup_N": profile.sup(),
    });
    out.write("solve.json", json_string(&stats).as_bytes())?;
    if args.refine {
        // The coarse run is the configured grid; deltas are fine − coarse.
        let coarse = PolarGrid::new(cfg.grid.n_r, cfg.grid.n_theta, 1.0)?;
        let (_, cp) = solve_on(&coarse)?;
        let rows: Vec<Vec<f64>> =
            cp.radii.iter().zip(cp.n.iter().zip(&profile.n)).map(|(r, (c, f))| vec![*r, *c, *f, f - c]).collect();
        out.write("profile_delta.csv", csv_table(&["r", "N_coarse", "N_fine", "delta"], &rows).as_bytes())?;
        resolutions.insert(0, [coarse.n_r, coarse.n_theta]);
    }
    out.finish("solve", &cfg, args.seed, resolutions, started)?;
    println!("solved {} on {}x{}: sup N = {:.6}", field.label, grid.n_r, grid.n_theta, profile.sup());
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// experiment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub scenarios: Vec<ScenarioConfig>,
}

fn load_scenarios(args: &ExperimentArgs) -> Result<Vec<ScenarioConfig>> {
    let mut kinds = Vec::new();
    for name in &args.scenarios {
        let k = ScenarioKind::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown scenario '{name}' (known: {})", known.join(", ")))
        })?;
        kinds.push(k);
    }
    let mut configs = match &args.common.config {
        None => experiments::default_sweep(),
        Some(_) => {
            let text = read_config(&args.common.config)?;
            let value: serde_json::Value = parse_json(&text, "experiment")?;
            if value.get("scenarios").is_some() {
                let sweep: SweepConfig = parse_json(&text, "sweep")?;
                check_schema(sweep.schema_version)?;
                sweep.scenarios
            } else {
                vec![parse_json::<ScenarioConfig>(&text, "scenario")?]
            }
        }
    };
    if !kinds.is_empty() {
        configs.retain(|c| kinds.contains(&c.scenario));
    }
    for c in configs.iter_mut() {
        if let Some(s) = args.common.seed {
            c.seed = Some(s);
        }
        if let Some(r) = args.common.resolution {
            c.resolution = r;
        }
        if args.common.refine {
            c.resolution = [2 * c.resolution[0] - 1, 2 * c.resolution[1]];
        }
        c.validate()?;
    }
    let mut ids: Vec<&str> = configs.iter().map(|c| c.id.as_str()).collect();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("scenario ids must be unique".into()));
    }
    if configs.is_empty() {
        return Err(Error::Config("no scenarios selected".into()));
    }
    Ok(configs)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let started = args.common.timing.then(Instant::now);
    let configs = load_scenarios(args)?;
    let entries = experiments::run_sweep(&configs, args.jobs)?;
    let mut out = Outputs::new(&args.common.out);
    let mut code = EXIT_OK;
    let mut resolutions = Vec::new();
    for e in &entries {
        match e {
            SweepEntry::Report(r) => {
                out.write(&format!("{}/report.json", r.id), json_string(r.as_ref()).as_bytes())?;
                out.write(&format!("{}/margins.csv", r.id), r.margins_csv().as_bytes())?;
                out.write(&format!("{}/margins.svg", r.id), r.margins_svg().as_bytes())?;
                if let Some(t) = &r.trace {
                    out.write(&format!("{}/trace.csv", r.id), t.to_csv().as_bytes())?;
                }
                resolutions.extend(r.resolutions);
                if !r.verdict.is_success() && code == EXIT_OK {
                    code = EXIT_FAILED;
                }
                println!("{:<28} {}", r.id, r.verdict.name());
            }
            SweepEntry::Failed { id, error, .. } => {
                let err = serde_json::json!({ "id": id, "error": error.to_string() });
                out.write(&format!("{id}/error.json"), json_string(&err).as_bytes())?;
                let c = if matches!(error, Error::NotConverged { .. }) { EXIT_SOLVER } else { EXIT_FAILED };
                code = code.max(c);
                println!("{id:<28} error: {error}");
            }
        }
    }
    out.write("summary.json", json_string(&experiments::sweep_summary(&entries)).as_bytes())?;
    resolutions.sort();
    resolutions.dedup();
    let sweep = SweepConfig { schema_version: experiments::SCHEMA_VERSION, scenarios: configs };
    out.finish("experiment", &sweep, args.common.seed, resolutions, started)?;
    Ok(code)
}
