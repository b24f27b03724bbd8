//! Problem documents and the `surfdist` command line.
//!
//! A problem document is one JSON object holding both surfaces plus optional
//! `potential`, `solver` and `output` sections. Command-line flags override
//! document fields, which override built-in defaults.
//!
//! Exit status: 0 when the run converged, 2 when it did not (or hit a
//! numerical failure during integration), 1 for any input error including an
//! oversized oracle grid.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::manifold::spec::json_error;
use crate::manifold::{SurfaceDefinition, SurfaceSpec};
use crate::oracle::{grid_min_distance, GridResult, GridSpec, DEFAULT_CAP};
use crate::solver::{multi_start, solve, SolveResult, SolverConfig};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Default trajectory sampling interval in steps.
pub const DEFAULT_SAMPLE_EVERY: u64 = 10;
/// Upper limit on the default per-axis oracle sample count.
pub const MAX_DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub surface_a: SurfaceSpec,
    pub surface_b: SurfaceSpec,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindName {
    #[default]
    Harmonic,
    Power,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub kind: PotentialKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gradient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Stacked (ξ, η) start point; forces a single trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<u64>,
}

/// A validated document, ready to run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub surfaces: [SurfaceDefinition; 2],
    pub potential: Potential,
    pub config: SolverConfig,
    pub initial: Option<Vec<f64>>,
    pub trajectory: bool,
}

pub fn parse_problem(text: &str) -> Result<ProblemDocument> {
    serde_json::from_str(text).map_err(json_error)
}

impl ProblemDocument {
    pub fn resolve(&self) -> Result<Problem> {
        let a = self.surface_a.to_definition("surface_a")?;
        let b = self.surface_b.to_definition("surface_b")?;
        if a.ambient_dim() != b.ambient_dim() {
            return Err(Error::validation(
                "surface_b.ambient_dim",
                format!("{} differs from surface_a ambient dimension {}", b.ambient_dim(), a.ambient_dim()),
            ));
        }

        let stiffness = self.potential.stiffness.unwrap_or(1.0);
        let potential = match self.potential.kind {
            PotentialKindName::Harmonic => {
                if self.potential.exponent.is_some() {
                    return Err(Error::validation("potential.exponent", "only valid for kind \"power\""));
                }
                Potential::harmonic(stiffness)
            }
            PotentialKindName::Power => {
                let p = self
                    .potential
                    .exponent
                    .ok_or_else(|| Error::validation("potential.exponent", "required for kind \"power\""))?;
                Potential::power(stiffness, p)
            }
        }?;

        let masses = self.masses()?;
        let s = &self.solver;
        let d = SolverConfig::default();
        let trajectory = self.output.trajectory.unwrap_or(false);
        let config = SolverConfig {
            dt: s.dt.unwrap_or(d.dt),
            damping: s.damping.unwrap_or(d.damping),
            masses,
            tol_velocity: s.tol_velocity.unwrap_or(d.tol_velocity),
            tol_gradient: s.tol_gradient.unwrap_or(d.tol_gradient),
            max_steps: s.max_steps.unwrap_or(d.max_steps),
            starts: s.starts.unwrap_or(d.starts),
            seed: s.seed.unwrap_or(d.seed),
            sample_every: trajectory.then(|| self.output.sample_every.unwrap_or(DEFAULT_SAMPLE_EVERY)),
        };
        if self.output.sample_every == Some(0) {
            return Err(Error::validation("output.sample_every", "must be at least 1"));
        }
        config.validate()?;

        let initial = match &s.initial {
            None => None,
            Some(q) => Some(normalize_initial(&a, &b, q)?),
        };
        Ok(Problem {
            surfaces: [a, b],
            potential,
            config,
            initial,
            trajectory,
        })
    }

    /// Masses from `solver.masses` if present, else from each surface's `mass`.
    /// Giving both with different values is an error.
    fn masses(&self) -> Result<[f64; 2]> {
        let from_surfaces = [self.surface_a.mass(), self.surface_b.mass()];
        match self.solver.masses {
            None => Ok(from_surfaces),
            Some(m) => {
                for (k, (spec, name)) in [(&self.surface_a, "surface_a"), (&self.surface_b, "surface_b")]
                    .into_iter()
                    .enumerate()
                {
                    if let Some(declared) = spec.mass {
                        if declared != m[k] {
                            return Err(Error::validation(
                                format!("solver.masses[{k}]"),
                                format!("{} conflicts with {name}.mass = {declared}", m[k]),
                            ));
                        }
                    }
                }
                Ok(m)
            }
        }
    }
}

fn normalize_initial(a: &SurfaceDefinition, b: &SurfaceDefinition, q: &[f64]) -> Result<Vec<f64>> {
    let n = a.param_dim();
    if q.len() != n + b.param_dim() {
        return Err(Error::validation(
            "solver.initial",
            format!("expected {} stacked parameters, got {}", n + b.param_dim(), q.len()),
        ));
    }
    let wrap = |e: Error| Error::validation("solver.initial", e.to_string());
    let mut out = a.normalize(&q[..n]).map_err(wrap)?;
    out.extend(b.normalize(&q[n..]).map_err(wrap)?);
    Ok(out)
}

/// The machine-readable outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub converged: bool,
    pub distance: f64,
    pub closest_point_a: Vec<f64>,
    pub closest_point_b: Vec<f64>,
    pub minimizer: Vec<f64>,
    pub steps: u64,
    pub final_energy: f64,
    pub final_gradient_norm: f64,
    pub seed: u64,
}

impl From<&SolveResult> for ResultRecord {
    fn from(r: &SolveResult) -> Self {
        ResultRecord {
            converged: r.converged,
            distance: r.distance,
            closest_point_a: r.closest_points[0].clone(),
            closest_point_b: r.closest_points[1].clone(),
            minimizer: r.minimizer.clone(),
            steps: r.steps_taken,
            final_energy: r.final_energy,
            final_gradient_norm: r.final_gradient_norm,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub distance: f64,
    pub params_a: Vec<f64>,
    pub params_b: Vec<f64>,
    pub closest_point_a: Vec<f64>,
    pub closest_point_b: Vec<f64>,
    pub resolution_bound: f64,
    pub samples_a: Vec<usize>,
    pub samples_b: Vec<usize>,
    pub pairs: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub solver: ResultRecord,
    pub oracle: OracleRecord,
    /// |solver distance − oracle distance|.
    pub gap: f64,
    pub within_bound: bool,
}

#[derive(Debug, Parser)]
#[command(name = "surfdist", version, about = "Minimum distance between parametric surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the damped dynamics to equilibrium and report the closest pair.
    Solve(RunArgs),
    /// Exhaustive grid search over both parameter domains.
    Oracle(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Problem document (JSON).
    pub document: PathBuf,
    /// Write the record here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the trajectory CSV here (enables trajectory output).
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Run both the solver and the grid oracle and report the gap.
    #[arg(long)]
    pub compare: bool,
    /// Oracle samples per parameter axis on both surfaces.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Oracle samples per axis for surface_a, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub samples_a: Option<Vec<usize>>,
    /// Oracle samples per axis for surface_b, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub samples_b: Option<Vec<usize>>,
    /// Maximum number of oracle pair evaluations.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

/// Parse arguments and run; returns the process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_CONVERGED };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            EXIT_NOT_CONVERGED
        }
    }
}

enum Failure {
    Input(Error),
    Numeric(Error),
}

fn input(e: Error) -> Failure {
    Failure::Input(e)
}

fn execute(cli: &Cli) -> std::result::Result<i32, Failure> {
    let (is_solve, args) = match &cli.command {
        Command::Solve(a) => (true, a),
        Command::Oracle(a) => (false, a),
    };
    let text = fs::read_to_string(&args.document).map_err(|e| {
        input(Error::Config(format!("cannot read {}: {e}", args.document.display())))
    })?;
    let doc = parse_problem(&text).map_err(input)?;
    let mut problem = doc.resolve().map_err(input)?;
    apply_flags(&mut problem, args).map_err(input)?;

    let run_solver = is_solve || args.compare;
    let run_oracle = !is_solve || args.compare;

    let oracle = if run_oracle {
        let grid = grid_for(&problem, args).map_err(input)?;
        let [a, b] = &problem.surfaces;
        let r = grid_min_distance(a, b, &grid).map_err(|e| match e {
            Error::CapExceeded { .. } | Error::Validation { .. } => Failure::Input(e),
            other => Failure::Numeric(other),
        })?;
        Some(oracle_record(a, b, &grid, &r).map_err(Failure::Numeric)?)
    } else {
        None
    };

    let solved = if run_solver {
        let result = run_problem(&problem).map_err(Failure::Numeric)?;
        if problem.trajectory {
            let path = args
                .trajectory
                .clone()
                .unwrap_or_else(|| default_trajectory_path(&args.document));
            fs::write(&path, trajectory_csv(&result)).map_err(|e| {
                input(Error::Config(format!("cannot write {}: {e}", path.display())))
            })?;
        }
        Some(result)
    } else {
        None
    };

    let (json, code) = match (solved, oracle) {
        (Some(s), None) => (to_json(&ResultRecord::from(&s)), exit_for(&s)),
        (None, Some(o)) => (to_json(&o), EXIT_CONVERGED),
        (Some(s), Some(o)) => {
            let gap = (s.distance - o.distance).abs();
            let record = CompareRecord {
                solver: ResultRecord::from(&s),
                within_bound: gap <= o.resolution_bound,
                oracle: o,
                gap,
            };
            (to_json(&record), exit_for(&s))
        }
        (None, None) => unreachable!("at least one of solver and oracle runs"),
    };
    emit(&json, args.out.as_deref()).map_err(input)?;
    Ok(code)
}

fn exit_for(r: &SolveResult) -> i32 {
    if r.converged {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn apply_flags(problem: &mut Problem, args: &RunArgs) -> Result<()> {
    if let Some(seed) = args.seed {
        problem.config.seed = seed;
    }
    if let Some(starts) = args.starts {
        problem.config.starts = starts;
    }
    if let Some(max_steps) = args.max_steps {
        problem.config.max_steps = max_steps;
    }
    if args.trajectory.is_some() {
        problem.trajectory = true;
        problem.config.sample_every.get_or_insert(DEFAULT_SAMPLE_EVERY);
    }
    problem.config.validate()
}

/// Single trajectory when an initial point is given or only one start is
/// requested; multi-start otherwise. A multi-start run in which no trajectory
/// converged reports its best non-converged trajectory.
pub fn run_problem(problem: &Problem) -> Result<SolveResult> {
    let [a, b] = &problem.surfaces;
    if problem.initial.is_some() || problem.config.starts == 1 {
        return solve(a, b, problem.potential, &problem.config, problem.initial.as_deref());
    }
    match multi_start(a, b, problem.potential, &problem.config) {
        Err(Error::AllStartsFailed { best: Some(best), .. }) => Ok(*best),
        other => other,
    }
}

/// Explicit per-surface counts, then `--samples`, then the largest uniform
/// count (at most 2000) that keeps the grid within the cap.
fn grid_for(problem: &Problem, args: &RunArgs) -> Result<GridSpec> {
    let dims = [problem.surfaces[0].param_dim(), problem.surfaces[1].param_dim()];
    let uniform = args.samples.unwrap_or_else(|| default_samples(args.cap, dims[0] + dims[1]));
    Ok(GridSpec {
        counts_a: args.samples_a.clone().unwrap_or_else(|| vec![uniform; dims[0]]),
        counts_b: args.samples_b.clone().unwrap_or_else(|| vec![uniform; dims[1]]),
        cap: args.cap,
    })
}

pub fn default_samples(cap: u64, total_dims: usize) -> usize {
    let fits = |n: usize| (n as u128).checked_pow(total_dims as u32).is_some_and(|p| p <= cap as u128);
    let mut n = (cap as f64).powf(1.0 / total_dims as f64).floor() as usize;
    n = n.clamp(1, MAX_DEFAULT_SAMPLES);
    while n > 1 && !fits(n) {
        n -= 1;
    }
    while n < MAX_DEFAULT_SAMPLES && fits(n + 1) {
        n += 1;
    }
    n
}

fn oracle_record(a: &SurfaceDefinition, b: &SurfaceDefinition, grid: &GridSpec, r: &GridResult) -> Result<OracleRecord> {
    Ok(OracleRecord {
        distance: r.distance,
        closest_point_a: a.evaluate(&r.params_a)?,
        closest_point_b: b.evaluate(&r.params_b)?,
        params_a: r.params_a.clone(),
        params_b: r.params_b.clone(),
        resolution_bound: r.resolution_bound,
        samples_a: grid.counts_a.clone(),
        samples_b: grid.counts_b.clone(),
        pairs: r.pairs,
    })
}

pub fn default_trajectory_path(document: &Path) -> PathBuf {
    let mut name = document.file_stem().unwrap_or_default().to_os_string();
    name.push(".trajectory.csv");
    document.with_file_name(name)
}

/// CSV with header `time,q1..q{n+m},r,E`.
pub fn trajectory_csv(result: &SolveResult) -> String {
    let mut out = String::from("time");
    for k in 1..=result.minimizer.len() {
        let _ = write!(out, ",q{k}");
    }
    out.push_str(",r,E\n");
    for s in result.trajectory.iter().flatten() {
        let _ = write!(out, "{}", s.time);
        for x in &s.q {
            let _ = write!(out, ",{x}");
        }
        let _ = writeln!(out, ",{},{}", s.distance, s.energy);
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("records always serialize");
    s.push('\n');
    s
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
