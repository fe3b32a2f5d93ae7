//! Command-line front end: configuration, orchestration and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::landscape::{
    check_landscape, comparison_levels, energy_curve, frozen_monotonicity_check, ground_state,
    ComparisonLevels, LandscapeCurve, LandscapeReport, MonotonicityReport,
};
use crate::localization::{
    barycenter, choose_geometry, recenter, ExperimentOptions, MultiplicityReport,
};
use crate::model::{
    check_a1_a2, check_growth_conditions, CoefficientProfile, GrowthReport, Nonlinearity,
    PotentialReport, PotentialSpec,
};
use crate::optimizer::{minimize_on_sphere, SolveResult, SolveSummary, SolverOptions, TraceRow};
use crate::report::{all_passed, Check};
use crate::spectral::{translate, Field, Grid};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "fracns",
    version,
    about = "Normalized solutions of fractional Schrödinger equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the nonlinearity and potential assumptions.
    Validate(RunArgs),
    /// One ground-state solve.
    Solve(RunArgs),
    /// Energy curve, landscape checks and comparison levels.
    Landscape(RunArgs),
    /// Localized solutions near each center.
    Multiplicity(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Landscape(_) => "landscape",
            Command::Multiplicity(_) => "multiplicity",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a)
            | Command::Solve(a)
            | Command::Landscape(a)
            | Command::Multiplicity(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for batch solves (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write solution fields as raw little-endian f64 with a JSON sidecar.
    #[arg(long)]
    pub dump_fields: bool,
    /// Write the solver trace of `solve` as CSV.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub s: f64,
    pub box_length: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutonomousConfig {
    pub eta: f64,
    pub mu: f64,
}

impl Default for AutonomousConfig {
    fn default() -> Self {
        AutonomousConfig { eta: -1.0, mu: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub mass: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig { mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveVariant {
    #[default]
    Autonomous,
    Frozen,
    Nonautonomous,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub variant: SolveVariant,
    /// Scale for the nonautonomous variant.
    pub eps: Option<f64>,
    /// Weight and potential of the frozen variant.
    pub alpha_h: Option<f64>,
    pub beta_v: Option<f64>,
    /// Nonautonomous seed position, as an index into the potential centers.
    pub center: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenPair {
    pub h1: f64,
    pub v1: f64,
    pub h2: f64,
    pub v2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub masses: Vec<f64>,
    #[serde(default)]
    pub pairs: Vec<(f64, f64)>,
    #[serde(default)]
    pub thetas: Vec<f64>,
    /// Scales for the comparison levels (needs `potential`).
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub frozen_pairs: Vec<FrozenPair>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityConfig {
    pub eps: f64,
    #[serde(default)]
    pub options: ExperimentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub autonomous: AutonomousConfig,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub constraint: ConstraintConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub landscape: Option<LandscapeConfig>,
    #[serde(default)]
    pub multiplicity: Option<MultiplicityConfig>,
}

impl RunConfig {
    /// Parses JSON, reporting the failing field path and position.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("at `{path}`: {inner}"))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        let p = &self.problem;
        if p.dim == 0 {
            return Err(Error::Config("problem.dim must be at least 1".into()));
        }
        Grid::cube(p.dim, p.box_length, p.points)
    }

    pub fn autonomous_context(&self) -> Result<EnergyContext> {
        EnergyContext::autonomous(
            &self.grid()?,
            self.problem.s,
            self.nonlinearity,
            self.autonomous.eta,
            self.autonomous.mu,
        )
    }

    fn potential(&self) -> Result<&PotentialSpec> {
        let spec = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a `potential` block".into()))?;
        if spec.dim() != self.problem.dim {
            return Err(Error::Config(format!(
                "potential centers have dimension {}, problem.dim is {}",
                spec.dim(),
                self.problem.dim
            )));
        }
        Ok(spec)
    }

    /// Range and presence checks done before any computation.
    pub fn validate_for(&self, command: &str) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.grid().map_err(wrap)?;
        crate::spectral::check_order(self.problem.s).map_err(wrap)?;
        self.solver.validate().map_err(wrap)?;
        if !(self.constraint.mass > 0.0 && self.constraint.mass.is_finite()) {
            return Err(Error::Config(format!(
                "constraint.mass must be > 0, got {}",
                self.constraint.mass
            )));
        }
        self.autonomous_context().map_err(wrap)?;
        match command {
            "validate" => {
                if self.potential.is_some() {
                    self.potential()?;
                }
            }
            "solve" => {
                let solve = self.solve.clone().unwrap_or_default();
                match solve.variant {
                    SolveVariant::Autonomous => {}
                    SolveVariant::Frozen => {
                        let (al, be) = (solve.alpha_h, solve.beta_v);
                        if al.is_none() || be.is_none() {
                            return Err(Error::Config(
                                "solve.variant = frozen needs alpha_h and beta_v".into(),
                            ));
                        }
                        EnergyContext::frozen(
                            &self.grid()?,
                            self.problem.s,
                            self.nonlinearity,
                            al.unwrap(),
                            be.unwrap(),
                        )
                        .map_err(wrap)?;
                    }
                    SolveVariant::Nonautonomous => {
                        let eps = solve.eps.ok_or_else(|| {
                            Error::Config("solve.variant = nonautonomous needs eps".into())
                        })?;
                        let spec = self.potential()?;
                        if solve.center >= spec.centers().len() {
                            return Err(Error::Config(format!(
                                "solve.center = {} is out of range",
                                solve.center
                            )));
                        }
                        self.check_centers_fit(spec, eps)?;
                    }
                }
            }
            "landscape" => {
                let l = self
                    .landscape
                    .as_ref()
                    .ok_or_else(|| Error::Config("landscape needs a `landscape` block".into()))?;
                if l.masses.is_empty()
                    || l.masses.windows(2).any(|w| w[1] <= w[0])
                    || l.masses.iter().any(|&m| !(m > 0.0))
                {
                    return Err(Error::Config(
                        "landscape.masses must be positive and strictly increasing".into(),
                    ));
                }
                if l.thetas.iter().any(|&t| !(t >= 1.0)) {
                    return Err(Error::Config("landscape.thetas must be >= 1".into()));
                }
                if !(l.tol >= 0.0) {
                    return Err(Error::Config("landscape.tol must be >= 0".into()));
                }
                if !l.eps.is_empty() {
                    let spec = self.potential()?;
                    for &e in &l.eps {
                        self.check_centers_fit(spec, e)?;
                    }
                }
            }
            "multiplicity" => {
                let m = self.multiplicity.as_ref().ok_or_else(|| {
                    Error::Config("multiplicity needs a `multiplicity` block".into())
                })?;
                let spec = self.potential()?;
                self.check_centers_fit(spec, m.eps)?;
            }
            other => return Err(Error::Config(format!("unknown command `{other}`"))),
        }
        Ok(())
    }

    fn check_centers_fit(&self, spec: &PotentialSpec, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps must be > 0, got {eps}")));
        }
        let grid = self.grid()?;
        for (i, c) in spec.centers().iter().enumerate() {
            let y: Vec<f64> = c.iter().map(|x| x / eps).collect();
            if !grid.contains(&y) {
                return Err(Error::Config(format!(
                    "center {i} maps to {y:?} at eps = {eps}, outside the box"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a RunConfig,
    started: String,
    elapsed_s: f64,
    artifact_version: &'a str,
    threads: usize,
    status: String,
}

/// Process exit status: 0 on success (including failed checks), 1 on a
/// computation or I/O error, 2 on a configuration error.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Config(_)) | Err(Error::Json(_)) => 2,
        Err(_) => 1,
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = run(&cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

pub fn run(command: &Command) -> Result<()> {
    let args = command.args();
    let config = RunConfig::load(&args.config)?;
    config.validate_for(command.name())?;
    fs::create_dir_all(&args.out)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;

    let started = chrono::Local::now().to_rfc3339();
    let clock = Instant::now();
    let outcome = pool.install(|| match command {
        Command::Validate(_) => run_validate(&config, args),
        Command::Solve(_) => run_solve(&config, args),
        Command::Landscape(_) => run_landscape(&config, args),
        Command::Multiplicity(_) => run_multiplicity(&config, args),
    });
    let manifest = Manifest {
        command: command.name(),
        config: &config,
        started,
        elapsed_s: clock.elapsed().as_secs_f64(),
        artifact_version: ARTIFACT_VERSION,
        threads: pool.current_num_threads(),
        status: match &outcome {
            Ok(()) => "ok".into(),
            Err(e) => format!("error: {e}"),
        },
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    outcome
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    growth: GrowthReport,
    potential: Option<PotentialReport>,
    problem: Vec<Check>,
    passed: bool,
}

fn run_validate(config: &RunConfig, args: &RunArgs) -> Result<()> {
    let growth =
        check_growth_conditions(&config.nonlinearity, config.problem.s, config.problem.dim);
    let potential = config.potential.as_ref().map(|spec| {
        let reach = spec
            .centers()
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        check_a1_a2(
            spec,
            reach + 10.0 * spec.h_bump_width().max(spec.v_well_width()),
        )
    });
    let (eta, mu) = (config.autonomous.eta, config.autonomous.mu);
    let problem = vec![
        Check::new("eta_nonpositive", eta <= 0.0, "eta <= 0").with_margin(-eta),
        Check::new("mu_positive", mu > 0.0, "mu > 0").with_margin(mu),
    ];
    let passed =
        growth.passed() && potential.as_ref().is_none_or(|p| p.passed()) && all_passed(&problem);
    write_json(
        &args.out.join("validation.json"),
        &ValidationReport {
            growth,
            potential,
            problem,
            passed,
        },
    )
}

fn run_solve(config: &RunConfig, args: &RunArgs) -> Result<()> {
    let solve = config.solve.clone().unwrap_or_default();
    let grid = config.grid()?;
    let (s, nl, a) = (
        config.problem.s,
        config.nonlinearity,
        config.constraint.mass,
    );
    let mut opts = config.solver.clone();
    opts.record_trace = args.trace;
    let result = match solve.variant {
        SolveVariant::Autonomous => ground_state(&config.autonomous_context()?, a, &opts)?,
        SolveVariant::Frozen => {
            let ctx = EnergyContext::frozen(
                &grid,
                s,
                nl,
                solve.alpha_h.unwrap_or(1.0),
                solve.beta_v.unwrap_or(0.0),
            )?;
            ground_state(&ctx, a, &opts)?
        }
        SolveVariant::Nonautonomous => {
            let spec = config.potential()?;
            let eps = solve.eps.unwrap_or(1.0);
            let center = &spec.centers()[solve.center];
            let frozen = EnergyContext::frozen(&grid, s, nl, spec.h(center), spec.v(center))?;
            let base = recenter(&ground_state(&frozen, a, &opts)?.u);
            let seed = translate(&base, &center.iter().map(|x| x / eps).collect::<Vec<_>>());
            let ctx = EnergyContext::nonautonomous(&grid, s, nl, spec.clone(), eps)?;
            let mut r = minimize_on_sphere(&ctx, a, &seed, &opts)?;
            let geom = choose_geometry(spec.centers())?;
            r.barycenter = Some(barycenter(&r.u, eps, &geom.truncation())?);
            r
        }
    };
    emit_solve(&result, args)
}

fn emit_solve(result: &SolveResult, args: &RunArgs) -> Result<()> {
    write_json(&args.out.join("result.json"), &result.summary())?;
    if args.trace {
        fs::write(args.out.join("trace.csv"), trace_csv(&result.trace))?;
    }
    if args.dump_fields {
        write_field(&args.out.join("u"), &result.u)?;
    }
    Ok(())
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,energy,grad_norm,step\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            r.iteration, r.energy, r.grad_norm, r.step
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct LandscapeOutput<'a> {
    curve: &'a LandscapeCurve,
    report: Option<LandscapeReport>,
    report_error: Option<String>,
    levels: Vec<ComparisonLevels>,
    /// `E_{eps,a} - min_i E_{a_i,a}` in the order of `levels`.
    excess: Vec<Option<f64>>,
    monotonicity: Vec<MonotonicityReport>,
}

fn run_landscape(config: &RunConfig, args: &RunArgs) -> Result<()> {
    let l = config.landscape.as_ref().expect("validated");
    let ctx = config.autonomous_context()?;
    let curve = energy_curve(&ctx, &l.masses, &config.solver)?;
    fs::write(args.out.join("curve.csv"), curve.to_csv())?;
    let (report, report_error) = match check_landscape(&curve, &l.pairs, &l.thetas, l.tol) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let grid = config.grid()?;
    let (s, nl, a) = (
        config.problem.s,
        config.nonlinearity,
        config.constraint.mass,
    );
    let mut levels = Vec::new();
    if !l.eps.is_empty() {
        let spec = config.potential()?;
        for &eps in &l.eps {
            levels.push(comparison_levels(
                spec,
                nl,
                s,
                &grid,
                a,
                eps,
                &config.solver,
            )?);
        }
    }
    let monotonicity = l
        .frozen_pairs
        .iter()
        .map(|p| {
            frozen_monotonicity_check(
                (p.h1, p.v1),
                (p.h2, p.v2),
                nl,
                s,
                &grid,
                a,
                &config.solver,
                l.tol,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let out = LandscapeOutput {
        curve: &curve,
        report,
        report_error,
        excess: levels.iter().map(|v| v.excess()).collect(),
        levels,
        monotonicity,
    };
    write_json(&args.out.join("landscape.json"), &out)
}

fn run_multiplicity(config: &RunConfig, args: &RunArgs) -> Result<()> {
    let m = config.multiplicity.as_ref().expect("validated");
    let spec = config.potential()?;
    let report: MultiplicityReport = crate::localization::multiplicity_experiment(
        spec,
        config.nonlinearity,
        config.problem.s,
        &config.grid()?,
        config.constraint.mass,
        m.eps,
        &config.solver,
        &m.options,
    )?;
    write_json(&args.out.join("multiplicity.json"), &report)?;
    let found: Vec<&SolveResult> = report.solutions.iter().flatten().collect();
    emit_summaries(
        &args.out,
        &found.iter().map(|r| r.summary()).collect::<Vec<_>>(),
    )?;
    if args.dump_fields {
        for r in &found {
            write_field(&args.out.join(format!("u_{}", r.seed_index)), &r.u)?;
        }
    }
    Ok(())
}

/// Writes `results.json` (always, possibly `[]`) and `results.csv` (only when nonempty).
pub fn emit_summaries(dir: &Path, results: &[SolveSummary]) -> Result<()> {
    write_json(&dir.join("results.json"), results)?;
    if !results.is_empty() {
        let mut csv =
            String::from("energy,lambda,mass,pohozaev_rel,iterations,converged,grad_norm\n");
        for r in results {
            let poh = r.pohozaev_rel.map(|v| format!("{v:e}")).unwrap_or_default();
            csv.push_str(&format!(
                "{:e},{:e},{:e},{},{},{},{:e}\n",
                r.energy, r.lambda, r.mass, poh, r.iterations, r.converged, r.grad_norm
            ));
        }
        fs::write(dir.join("results.csv"), csv)?;
    }
    Ok(())
}

/// Grid metadata stored next to a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub lengths: Vec<f64>,
    pub points: Vec<usize>,
    pub dtype: String,
    pub layout: String,
}

/// Writes `<stem>.f64` (little-endian samples) and `<stem>.json`.
pub fn write_field(stem: &Path, u: &Field) -> Result<()> {
    let header = FieldHeader {
        lengths: u.grid().axes().iter().map(|a| a.length).collect(),
        points: u.grid().axes().iter().map(|a| a.points).collect(),
        dtype: "f64-le".into(),
        layout: "row-major, last axis contiguous, node j at -L/2 + j L/n".into(),
    };
    let bytes: Vec<u8> = u.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(stem.with_extension("f64"), bytes)?;
    write_json(&stem.with_extension("json"), &header)
}

pub fn read_field(stem: &Path) -> Result<Field> {
    let header: FieldHeader =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let grid = Grid::new(&header.lengths, &header.points)?;
    let bytes = fs::read(stem.with_extension("f64"))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Usage(format!(
            "expected {} bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(grid, values)
}
