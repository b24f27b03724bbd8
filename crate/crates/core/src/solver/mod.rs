//! Integration to equilibrium, and multi-start seeding.
//!
//! A trajectory starts at rest, so its initial energy equals the potential
//! and the energy can only decrease from there. It is declared converged when
//! both the metric norm of the velocity and the metric norm of ∇U are within
//! tolerance (inclusive). Convergence is local: each trajectory settles at
//! some equilibrium, and [`multi_start`] is the global strategy.

pub mod seeding;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{advance_from, Configuration, DissipationModel, MechanicalSystem, Potential, ProductState};
use crate::error::{Error, Result};
use crate::manifold::SurfaceDefinition;
use seeding::{map_to_domain, random_unit, StartSequence};

/// Attempts per requested start before giving up on finding regular seeds.
const SEED_ATTEMPTS_PER_START: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub damping: f64,
    pub masses: [f64; 2],
    pub tol_velocity: f64,
    pub tol_gradient: f64,
    pub max_steps: u64,
    pub starts: usize,
    pub seed: u64,
    /// Record a trajectory sample every this many steps.
    pub sample_every: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            damping: 1.0,
            masses: [1.0, 1.0],
            tol_velocity: 1e-8,
            tol_gradient: 1e-8,
            max_steps: 2_000_000,
            starts: 8,
            seed: 0,
            sample_every: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("damping", self.damping),
            ("masses[0]", self.masses[0]),
            ("masses[1]", self.masses[1]),
            ("tol_velocity", self.tol_velocity),
            ("tol_gradient", self.tol_gradient),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::validation(format!("solver.{name}"), format!("must be positive, got {value}")));
            }
        }
        if self.starts == 0 {
            return Err(Error::validation("solver.starts", "must be at least 1"));
        }
        if self.sample_every == Some(0) {
            return Err(Error::validation("output.sample_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub q: Vec<f64>,
    pub distance: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub converged: bool,
    pub distance: f64,
    /// (x(ξ*), y(η*)).
    pub closest_points: [Vec<f64>; 2],
    pub minimizer: Vec<f64>,
    pub steps_taken: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_gradient_norm: f64,
    pub final_velocity_norm: f64,
    pub seed: u64,
    /// Position of this trajectory in the multi-start batch.
    pub start_index: usize,
    /// The trajectory hit a chart failure and was restarted from a random point.
    pub reseeded: bool,
    pub trajectory: Option<Vec<TrajectorySample>>,
}

/// Equilibrium test: ‖v‖_g ≤ tol_velocity and ‖∇U‖_g ≤ tol_gradient.
pub fn check_convergence(system: &MechanicalSystem, state: &ProductState, config: &SolverConfig) -> Result<bool> {
    let c = system.configure(&state.q)?;
    converged_at(system, &c, &state.v, config)
}

fn converged_at(system: &MechanicalSystem, c: &Configuration, v: &[f64], config: &SolverConfig) -> Result<bool> {
    if system.velocity_norm_at(c, v) > config.tol_velocity {
        return Ok(false);
    }
    Ok(system.gradient_norm_at(c)? <= config.tol_gradient)
}

pub fn build_system<'a>(
    first: &'a SurfaceDefinition,
    second: &'a SurfaceDefinition,
    potential: Potential,
    config: &SolverConfig,
) -> Result<MechanicalSystem<'a>> {
    config.validate()?;
    MechanicalSystem::new(first, second, config.masses, potential, DissipationModel::new(config.damping)?)
}

/// Integrate from rest at `initial` (or the first quasi-random start for the
/// configured seed) until convergence or `max_steps`.
pub fn solve(
    first: &SurfaceDefinition,
    second: &SurfaceDefinition,
    potential: Potential,
    config: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<SolveResult> {
    let system = build_system(first, second, potential, config)?;
    let q0 = match initial {
        Some(q) => normalize(&system, q)?,
        None => start_points(&system, 1, config.seed)?.remove(0),
    };
    run_trajectory(&system, config, q0, 0)
}

/// Run `config.starts` trajectories from quasi-random seeds and keep the
/// converged one with the smallest distance.
pub fn multi_start(
    first: &SurfaceDefinition,
    second: &SurfaceDefinition,
    potential: Potential,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let system = build_system(first, second, potential, config)?;
    let starts = start_points(&system, config.starts, config.seed)?;
    let outcomes: Vec<Result<SolveResult>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, q0)| run_trajectory(&system, config, q0, i))
        .collect();

    let mut best: Option<SolveResult> = None;
    let mut best_failed: Option<SolveResult> = None;
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) if r.converged => {
                if best.as_ref().is_none_or(|b| preferred(&r, b)) {
                    best = Some(r);
                }
            }
            Ok(r) => {
                if best_failed.as_ref().is_none_or(|b| preferred(&r, b)) {
                    best_failed = Some(r);
                }
            }
            Err(e) => {
                warn!("multi-start trajectory failed: {e}");
                last_error = Some(e);
            }
        }
    }
    match (best, best_failed, last_error) {
        (Some(r), _, _) => Ok(r),
        (None, None, Some(e)) => Err(e),
        (None, failed, _) => Err(Error::AllStartsFailed {
            starts: config.starts,
            best: failed.map(Box::new),
        }),
    }
}

/// Smaller distance wins; near-ties go to lower energy, then to the earlier start.
fn preferred(candidate: &SolveResult, incumbent: &SolveResult) -> bool {
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !tie(candidate.distance, incumbent.distance) {
        return candidate.distance < incumbent.distance;
    }
    if !tie(candidate.final_energy, incumbent.final_energy) {
        return candidate.final_energy < incumbent.final_energy;
    }
    candidate.start_index < incumbent.start_index
}

fn normalize(system: &MechanicalSystem, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != system.dim() {
        return Err(Error::validation(
            "initial",
            format!("expected {} stacked parameters, got {}", system.dim(), q.len()),
        ));
    }
    let (xi, eta) = system.split(q);
    let mut out = system.first.normalize(xi)?;
    out.extend(system.second.normalize(eta)?);
    Ok(out)
}

fn stacked_domain(system: &MechanicalSystem) -> Vec<crate::manifold::ParamRange> {
    system
        .first
        .domain()
        .iter()
        .chain(system.second.domain())
        .copied()
        .collect()
}

/// True when both jets at q have full-rank jacobians.
fn regular(system: &MechanicalSystem, q: &[f64]) -> bool {
    let (xi, eta) = system.split(q);
    matches!(
        (system.first.jet(xi), system.second.jet(eta)),
        (Ok(a), Ok(b)) if !a.singular && !b.singular
    )
}

/// Quasi-random start points; points with a singular jet are skipped.
pub fn start_points(system: &MechanicalSystem, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let domain = stacked_domain(system);
    let mut sequence = StartSequence::new(domain.len(), seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * SEED_ATTEMPTS_PER_START {
        let q = map_to_domain(&sequence.next_unit(), &domain);
        if regular(system, &q) {
            out.push(q);
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(Error::Config(format!(
        "found only {} regular start points out of {count} requested",
        out.len()
    )))
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    // splitmix-style decorrelation of (seed, index)
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// One trajectory with at most one automatic random restart after a chart
/// failure (singular metric or a clamped parameter leaving its interval).
fn run_trajectory(system: &MechanicalSystem, config: &SolverConfig, q0: Vec<f64>, index: usize) -> Result<SolveResult> {
    match integrate(system, config, q0.clone(), index) {
        Err(e) if e.is_chart_failure() => {
            warn!("start {index} from {q0:?} hit a chart failure ({e}); re-seeding once");
            let mut rng = trajectory_rng(config.seed, index);
            let domain = stacked_domain(system);
            let q1 = (0..SEED_ATTEMPTS_PER_START)
                .map(|_| map_to_domain(&random_unit(&mut rng, domain.len()), &domain))
                .find(|q| regular(system, q))
                .ok_or(e)?;
            let mut result = integrate(system, config, q1, index)?;
            result.reseeded = true;
            Ok(result)
        }
        other => other,
    }
}

fn integrate(system: &MechanicalSystem, config: &SolverConfig, q0: Vec<f64>, index: usize) -> Result<SolveResult> {
    let mut state = ProductState::at_rest(q0);
    let mut c = system.configure(&state.q)?;
    let initial_energy = system.energy_at(&c, &state.v);
    let sample = |s: &ProductState, c: &Configuration| TrajectorySample {
        time: s.time,
        q: s.q.clone(),
        distance: c.distance,
        energy: system.energy_at(c, &s.v),
    };
    let mut trajectory = config.sample_every.map(|_| vec![sample(&state, &c)]);

    let mut steps = 0u64;
    let converged = loop {
        if converged_at(system, &c, &state.v, config)? {
            break true;
        }
        if steps >= config.max_steps {
            break false;
        }
        let k1 = (state.v.clone(), system.field_at(&c, &state.v)?);
        state = advance_from(&state, system, config.dt, Some(k1))?;
        c = system.configure(&state.q)?;
        steps += 1;
        if let (Some(every), Some(t)) = (config.sample_every, trajectory.as_mut()) {
            if steps.is_multiple_of(every) {
                t.push(sample(&state, &c));
            }
        }
    };
    if let (Some(t), Some(every)) = (trajectory.as_mut(), config.sample_every) {
        if !steps.is_multiple_of(every) {
            t.push(sample(&state, &c));
        }
    }

    Ok(SolveResult {
        converged,
        distance: c.distance,
        closest_points: [c.jets[0].position.clone(), c.jets[1].position.clone()],
        minimizer: state.q.clone(),
        steps_taken: steps,
        initial_energy,
        final_energy: system.energy_at(&c, &state.v),
        final_gradient_norm: system.gradient_norm_at(&c)?,
        final_velocity_norm: system.velocity_norm_at(&c, &state.v),
        seed: config.seed,
        start_index: index,
        reseeded: false,
        trajectory,
    })
}
