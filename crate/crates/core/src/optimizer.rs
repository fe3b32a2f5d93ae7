//! Minimization on the mass sphere `S_a = { u : |u|_2^2 = a }`.
//!
//! Each iteration takes the gradient, removes its normal component, applies a
//! Sobolev preconditioner `((-Delta)^s + sigma)^{-1}`, projects the result
//! back onto the tangent space and retracts by renormalization. Step lengths
//! come from Armijo backtracking on energy differences evaluated without
//! cancellation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::localization;
use crate::spectral::{self, dilate_with_limit, fft, Field, Grid, DEFAULT_TAU_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preconditioner {
    /// Plain `L^2` gradient.
    Identity,
    /// `((-Delta)^s + shift)^{-1}`.
    Sobolev { shift: f64 },
}

impl Default for Preconditioner {
    fn default() -> Self {
        Preconditioner::Sobolev { shift: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Threshold on `|grad E(u) - lambda u|_2`.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub rng_seed: u64,
    pub tau_seed_step: f64,
    pub tau_max: f64,
    pub preconditioner: Preconditioner,
    /// Keep the per-iteration trace in the result.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            grad_tol: 1e-9,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            rng_seed: 0,
            tau_seed_step: 0.25,
            tau_max: DEFAULT_TAU_MAX,
            preconditioner: Preconditioner::default(),
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::parameter("max_iters", "must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::parameter(
                "grad_tol",
                format!("must be > 0, got {}", self.grad_tol),
            ));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::parameter(
                "initial_step",
                format!("must be > 0, got {}", self.initial_step),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::parameter(
                "backtrack_factor",
                format!("must lie in (0, 1), got {}", self.backtrack_factor),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::parameter(
                "armijo_c",
                format!("must lie in (0, 1), got {}", self.armijo_c),
            ));
        }
        if !(self.tau_seed_step > 0.0 && self.tau_seed_step.is_finite()) {
            return Err(Error::parameter(
                "tau_seed_step",
                format!("must be > 0, got {}", self.tau_seed_step),
            ));
        }
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(Error::parameter(
                "tau_max",
                format!("must be > 0, got {}", self.tau_max),
            ));
        }
        if let Preconditioner::Sobolev { shift } = self.preconditioner {
            if !(shift > 0.0 && shift.is_finite()) {
                return Err(Error::parameter(
                    "preconditioner.shift",
                    format!("must be > 0, got {shift}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking shrank the step below resolution without sufficient decrease.
    LineSearchStalled,
    /// A non-finite energy or gradient appeared; the result holds the last finite iterate.
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Initial energy plus the accepted differences of `E - (lambda / 2) |u|^2`,
    /// which agree with energy differences on the sphere.
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub energy: f64,
    pub lambda: f64,
    pub mass: f64,
    /// `R / K` for autonomous and frozen contexts.
    pub pohozaev_rel: Option<f64>,
    pub barycenter: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub stop: StopReason,
    /// Share of the mass in the outer tenth of the box.
    pub boundary_mass_fraction: f64,
    pub trace: Vec<TraceRow>,
    pub seed_index: usize,
}

/// The JSON record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub lambda: f64,
    pub mass: f64,
    pub pohozaev_rel: Option<f64>,
    pub barycenter: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            lambda: self.lambda,
            mass: self.mass,
            pohozaev_rel: self.pohozaev_rel,
            barycenter: self.barycenter.clone(),
            iterations: self.iterations,
            converged: self.converged,
            grad_norm: self.grad_norm,
        }
    }
}

/// `u * sqrt(a / mass(u))`.
pub fn project_to_sphere(u: &Field, a: f64) -> Result<Field> {
    check_mass(a)?;
    let m = spectral::mass(u);
    if m == 0.0 {
        return Err(Error::Degenerate(
            "cannot project the zero field onto the sphere",
        ));
    }
    Ok(u.scaled((a / m).sqrt()))
}

fn check_mass(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::parameter("a", format!("mass must be > 0, got {a}")))
    }
}

struct Precond {
    inverse: Option<Vec<f64>>,
}

impl Precond {
    fn new(ctx: &EnergyContext, kind: Preconditioner) -> Self {
        let inverse = match kind {
            Preconditioner::Identity => None,
            Preconditioner::Sobolev { shift } => {
                Some(ctx.symbol().iter().map(|m| 1.0 / (m + shift)).collect())
            }
        };
        Precond { inverse }
    }

    fn apply(&self, grid: &Grid, v: &Field) -> Field {
        match &self.inverse {
            None => v.clone(),
            Some(inv) => Field::from_parts(grid.clone(), fft::apply_symbol(grid, v.values(), inv)),
        }
    }
}

/// Preconditioned projected gradient descent on `S_a` from `seed`.
pub fn minimize_on_sphere(
    ctx: &EnergyContext,
    a: f64,
    seed: &Field,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if seed.grid() != ctx.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = ctx.grid().clone();
    let precond = Precond::new(ctx, opts.preconditioner);
    let mut u = project_to_sphere(seed, a)?;
    let (parts, mut g) = ctx.evaluate(&u)?;
    let mut energy = parts.total();
    if !energy.is_finite() || !g.is_finite() {
        return Err(Error::NumericalFailure {
            iterations: 0,
            last_valid: Box::new(u),
        });
    }
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut grad_norm;
    let mut step = 0.0;
    let min_step = opts.initial_step * 1e-18;

    loop {
        let uu = u.inner(&u);
        let lambda = g.inner(&u) / uu;
        let tangent = g.add_scaled(-lambda, &u);
        grad_norm = tangent.norm();
        if opts.record_trace {
            trace.push(TraceRow {
                iteration: iterations,
                energy,
                grad_norm,
                step,
            });
        }
        if grad_norm <= opts.grad_tol {
            stop = StopReason::Converged;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }

        let p = precond.apply(&grid, &tangent);
        let mut dir = p.add_scaled(-p.inner(&u) / uu, &u).scaled(-1.0);
        let mut slope = g.inner(&dir);
        if !(slope < 0.0) {
            dir = tangent.scaled(-1.0);
            slope = -grad_norm * grad_norm;
        }

        let mut t = opts.initial_step;
        let accepted = loop {
            let v = project_to_sphere(&u.add_scaled(t, &dir), a)?;
            let de = ctx.lagrangian_difference(&u, &v, lambda)?;
            if !de.is_finite() {
                return numerical_failure(u, iterations);
            }
            if de <= opts.armijo_c * t * slope {
                break Some((v, de));
            }
            t *= opts.backtrack_factor;
            if t < min_step {
                break None;
            }
        };
        let Some((v, de)) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };
        let (_, gv) = ctx.evaluate(&v)?;
        if !gv.is_finite() {
            return numerical_failure(u, iterations);
        }
        u = v;
        g = gv;
        energy += de;
        step = t;
        iterations += 1;
    }

    finish(ctx, u, iterations, grad_norm, stop, trace)
}

fn numerical_failure(u: Field, iterations: usize) -> Result<SolveResult> {
    Err(Error::NumericalFailure {
        iterations,
        last_valid: Box::new(u),
    })
}

fn finish(
    ctx: &EnergyContext,
    u: Field,
    iterations: usize,
    grad_norm: f64,
    stop: StopReason,
    trace: Vec<TraceRow>,
) -> Result<SolveResult> {
    let (parts, g) = ctx.evaluate(&u)?;
    let mass = spectral::mass(&u);
    let lambda = g.inner(&u) / mass;
    let pohozaev_rel = if ctx.is_translation_invariant() {
        Some(ctx.pohozaev_residual(&u)?.relative)
    } else {
        None
    };
    Ok(SolveResult {
        energy: parts.total(),
        lambda,
        mass,
        pohozaev_rel,
        barycenter: None,
        iterations,
        converged: stop == StopReason::Converged,
        grad_norm,
        stop,
        boundary_mass_fraction: spectral::boundary_mass_fraction(&u, 0.1),
        trace,
        seed_index: 0,
        u,
    })
}

/// A point on `S_a` below the level `eta a / 2`, found along a dilation fiber.
#[derive(Debug, Clone)]
pub struct NegativeSeed {
    pub field: Field,
    pub tau: f64,
    /// Number of dilation steps taken (zero if the base already qualified).
    pub steps: usize,
    pub energy: f64,
}

/// Dilates a normalized unit Gaussian with `tau <= 0` until the energy drops
/// below `eta a / 2`.
pub fn seed_negative_energy(
    ctx: &EnergyContext,
    a: f64,
    opts: &SolverOptions,
) -> Result<NegativeSeed> {
    let dim = ctx.grid().dim();
    let base = Field::gaussian(ctx.grid(), &vec![0.0; dim], 1.0);
    seed_negative_energy_from(ctx, a, &base, opts)
}

/// [`seed_negative_energy`] starting from a caller-supplied bump.
pub fn seed_negative_energy_from(
    ctx: &EnergyContext,
    a: f64,
    base: &Field,
    opts: &SolverOptions,
) -> Result<NegativeSeed> {
    opts.validate()?;
    let (eta, _) = ctx.autonomous_params().ok_or_else(|| {
        Error::Usage("negative-energy seeding needs an autonomous context".into())
    })?;
    if ctx.nonlinearity().c_q() == 0.0 {
        return Err(Error::Infeasible(
            "with c_q = 0 the energy is at least eta a / 2 on the whole sphere".into(),
        ));
    }
    let base = project_to_sphere(base, a)?;
    let level = 0.5 * eta * a;
    let max_steps = (opts.tau_max / opts.tau_seed_step).ceil() as usize;
    for steps in 0..=max_steps {
        let tau = -(steps as f64 * opts.tau_seed_step).min(opts.tau_max);
        let field = project_to_sphere(&dilate_with_limit(&base, tau, opts.tau_max)?.field, a)?;
        let energy = ctx.energy(&field)?;
        if energy < level {
            return Ok(NegativeSeed {
                field,
                tau,
                steps,
                energy,
            });
        }
    }
    Err(Error::Resolution(format!(
        "no fiber point below eta a / 2 for tau >= -{}",
        opts.tau_max
    )))
}

/// Normalized Gaussians with random centers in the middle quarter of the box
/// and random widths in `[0.5, 3]`.
pub fn random_gaussian_seeds(
    grid: &Grid,
    count: usize,
    a: f64,
    rng_seed: u64,
) -> Result<Vec<Field>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|_| {
            let center: Vec<f64> = grid
                .axes()
                .iter()
                .map(|ax| rng.gen_range(-0.125..0.125) * ax.length)
                .collect();
            let width = rng.gen_range(0.5..3.0);
            project_to_sphere(&Field::gaussian(grid, &center, width), a)
        })
        .collect()
}

/// How multistart decides that two results are the same solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dedup {
    /// `L^2` distance after the best periodic shift, over `sqrt(a)`.
    Aligned {
        tol: f64,
    },
    /// Plain `L^2` distance over `sqrt(a)`.
    Raw {
        tol: f64,
    },
    Keep,
}

impl Dedup {
    pub fn for_context(ctx: &EnergyContext) -> Self {
        if ctx.is_translation_invariant() {
            Dedup::Aligned { tol: 1e-3 }
        } else {
            Dedup::Raw { tol: 1e-3 }
        }
    }

    fn distinct(&self, r1: &SolveResult, r2: &SolveResult, a: f64) -> bool {
        match *self {
            Dedup::Aligned { tol } => localization::aligned_distance(&r1.u, &r2.u) > tol * a.sqrt(),
            Dedup::Raw { tol } => r1.u.sub(&r2.u).norm() > tol * a.sqrt(),
            Dedup::Keep => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultistartReport {
    /// Distinct results sorted by energy, then seed index.
    pub results: Vec<SolveResult>,
    /// `(dropped seed, kept seed)` pairs.
    pub duplicates: Vec<(usize, usize)>,
    /// Seeds whose solve returned an error.
    pub failures: Vec<(usize, String)>,
}

/// Independent solves from each seed, deduplicated per [`Dedup::for_context`].
pub fn multistart(
    ctx: &EnergyContext,
    a: f64,
    seeds: &[Field],
    opts: &SolverOptions,
) -> Result<MultistartReport> {
    multistart_with(ctx, a, seeds, opts, Dedup::for_context(ctx))
}

pub fn multistart_with(
    ctx: &EnergyContext,
    a: f64,
    seeds: &[Field],
    opts: &SolverOptions,
    dedup: Dedup,
) -> Result<MultistartReport> {
    if seeds.is_empty() {
        return Err(Error::Usage("multistart needs at least one seed".into()));
    }
    opts.validate()?;
    check_mass(a)?;
    let outcomes: Vec<(usize, Result<SolveResult>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| (i, minimize_on_sphere(ctx, a, seed, opts)))
        .collect();

    let mut solved = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(mut r) => {
                r.seed_index = i;
                solved.push(r);
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    solved.sort_by(|x, y| {
        x.energy
            .total_cmp(&y.energy)
            .then(x.seed_index.cmp(&y.seed_index))
    });

    let mut results: Vec<SolveResult> = Vec::new();
    let mut duplicates = Vec::new();
    for r in solved {
        match results.iter().find(|kept| !dedup.distinct(kept, &r, a)) {
            Some(kept) => duplicates.push((r.seed_index, kept.seed_index)),
            None => results.push(r),
        }
    }
    Ok(MultistartReport {
        results,
        duplicates,
        failures,
    })
}
