//! Barycenters, region geometry and the multiplicity experiment.
//!
//! The barycenter of `u` at scale `eps` is
//!
//! ```text
//! G_eps(u) = int chi(eps x) |u|^2 / int |u|^2,
//! ```
//!
//! where `chi` is the identity inside the ball of radius `r_bar` and the
//! radial projection onto that ball outside it. Region `i` is the set of
//! fields whose barycenter lies within `rho_bar` of the center `a_i`.
//!
//! Center indices are zero-based: the origin is center `0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::landscape::frozen_ground_state;
use crate::model::{CoefficientProfile, Nonlinearity, PotentialSpec};
use crate::optimizer::{multistart_with, Dedup, SolveResult, SolverOptions};
use crate::report::Check;
use crate::spectral::{fft, translate, Field, Grid};

/// `chi(x) = x` for `|x| <= radius`, `radius x / |x|` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationMap {
    radius: f64,
}

impl TruncationMap {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::parameter(
                "radius",
                format!("must be > 0, got {radius}"),
            ));
        }
        Ok(TruncationMap { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r <= self.radius {
            x.to_vec()
        } else {
            x.iter().map(|v| v * self.radius / r).collect()
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `G_eps(u)`.
pub fn barycenter(u: &Field, eps: f64, chi: &TruncationMap) -> Result<Vec<f64>> {
    let grid = u.grid();
    let mut x = vec![0.0; grid.dim()];
    let mut acc = vec![0.0; grid.dim()];
    let mut total = 0.0;
    for (i, &v) in u.values().iter().enumerate() {
        let w = v * v;
        if w == 0.0 {
            continue;
        }
        grid.node_into(i, &mut x);
        x.iter_mut().for_each(|xi| *xi *= eps);
        for (a, c) in acc.iter_mut().zip(chi.apply(&x)) {
            *a += w * c;
        }
        total += w;
    }
    if total == 0.0 {
        return Err(Error::Degenerate("barycenter of the zero field"));
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

pub const DEFAULT_RHO_BAR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGeometry {
    pub centers: Vec<Vec<f64>>,
    pub rho_bar: f64,
    pub r_bar: f64,
}

impl RegionGeometry {
    pub fn truncation(&self) -> TruncationMap {
        TruncationMap { radius: self.r_bar }
    }

    /// Disjointness of the closed balls and containment in `B_{r_bar}(0)`.
    pub fn checks(&self) -> Vec<Check> {
        let mut min_gap = f64::INFINITY;
        for i in 0..self.centers.len() {
            for j in 0..i {
                min_gap =
                    min_gap.min(dist(&self.centers[i], &self.centers[j]) - 2.0 * self.rho_bar);
            }
        }
        let slack = self
            .centers
            .iter()
            .map(|c| self.r_bar - norm(c) - self.rho_bar)
            .fold(f64::INFINITY, f64::min);
        vec![
            Check::new("balls_disjoint", min_gap > 0.0, "|a_i - a_j| > 2 rho_bar")
                .with_margin(min_gap),
            Check::new("balls_contained", slack >= 0.0, "|a_i| + rho_bar <= r_bar")
                .with_margin(slack),
        ]
    }
}

/// `rho_bar = min_{i != j} |a_i - a_j| / 3` (or [`DEFAULT_RHO_BAR`] for one
/// center) and `r_bar = max |a_i| + 2 rho_bar`.
pub fn choose_geometry(centers: &[Vec<f64>]) -> Result<RegionGeometry> {
    choose_geometry_with_default(centers, DEFAULT_RHO_BAR)
}

pub fn choose_geometry_with_default(
    centers: &[Vec<f64>],
    single_rho: f64,
) -> Result<RegionGeometry> {
    if centers.is_empty() {
        return Err(Error::parameter("centers", "need at least one center"));
    }
    if !(single_rho > 0.0) {
        return Err(Error::parameter("rho_bar", "default radius must be > 0"));
    }
    let mut min_d = f64::INFINITY;
    for i in 0..centers.len() {
        for j in 0..i {
            let d = dist(&centers[i], &centers[j]);
            if d == 0.0 {
                return Err(Error::parameter(
                    "centers",
                    format!("centers {j} and {i} coincide"),
                ));
            }
            min_d = min_d.min(d);
        }
    }
    let rho_bar = if centers.len() == 1 {
        single_rho
    } else {
        min_d / 3.0
    };
    let r_bar = centers.iter().map(|c| norm(c)).fold(0.0, f64::max) + 2.0 * rho_bar;
    Ok(RegionGeometry {
        centers: centers.to_vec(),
        rho_bar,
        r_bar,
    })
}

/// Index of the center whose `rho_bar`-ball contains `G_eps(u)`, if any.
pub fn region_membership(u: &Field, eps: f64, geom: &RegionGeometry) -> Option<usize> {
    let g = barycenter(u, eps, &geom.truncation()).ok()?;
    region_of_point(&g, geom)
}

fn region_of_point(g: &[f64], geom: &RegionGeometry) -> Option<usize> {
    geom.centers.iter().position(|c| dist(g, c) <= geom.rho_bar)
}

/// Different regions, or (same or no region and) `L^2` distance above `tol sqrt(a)`.
pub fn distinctness(
    r1: &SolveResult,
    r2: &SolveResult,
    geom: &RegionGeometry,
    eps: f64,
    tol: f64,
) -> bool {
    let m1 = region_membership(&r1.u, eps, geom);
    let m2 = region_membership(&r2.u, eps, geom);
    if let (Some(i), Some(j)) = (m1, m2) {
        if i != j {
            return true;
        }
    }
    r1.u.sub(&r2.u).norm() > tol * r1.mass.sqrt()
}

/// Shift `y` maximizing `<u, v(. - y)>` over the periodic box.
pub fn best_shift(u: &Field, v: &Field) -> Vec<f64> {
    let grid = u.grid();
    let dim = grid.dim();
    let uh = fft::forward(grid, u.values());
    let vh = fft::forward(grid, v.values());
    let prod: Vec<Complex64> = uh.iter().zip(&vh).map(|(a, b)| a.conj() * b).collect();

    // coarse: correlation at every grid shift
    let mut corr = prod.clone();
    fft::forward_complex(grid, &mut corr);
    let best = (0..corr.len())
        .max_by(|&i, &j| corr[i].re.total_cmp(&corr[j].re))
        .unwrap_or(0);
    let mut idx = vec![0usize; dim];
    grid.unravel(best, &mut idx);
    let mut y: Vec<f64> = idx
        .iter()
        .zip(grid.axes())
        .map(|(&j, ax)| {
            let j = if j >= ax.points / 2 {
                j as f64 - ax.points as f64
            } else {
                j as f64
            };
            j * ax.spacing()
        })
        .collect();

    // fine: Newton on the trigonometric interpolant of the correlation
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(prod.len());
    for flat in 0..prod.len() {
        grid.unravel(flat, &mut idx);
        ks.push(
            idx.iter()
                .zip(grid.axes())
                .map(|(&j, ax)| {
                    if ax.is_nyquist(j) {
                        0.0
                    } else {
                        ax.wavenumber(j)
                    }
                })
                .collect(),
        );
    }
    for _ in 0..30 {
        let mut grad = vec![0.0; dim];
        let mut hess = vec![vec![0.0; dim]; dim];
        for (p, k) in prod.iter().zip(&ks) {
            let phase: f64 = k.iter().zip(&y).map(|(a, b)| a * b).sum();
            let z = p * Complex64::from_polar(1.0, -phase);
            for a in 0..dim {
                grad[a] += z.im * k[a];
                for b in 0..dim {
                    hess[a][b] -= z.re * k[a] * k[b];
                }
            }
        }
        let Some(step) = solve_small(hess, grad.iter().map(|g| -g).collect()) else {
            break;
        };
        let h_min = grid
            .axes()
            .iter()
            .map(|a| a.spacing())
            .fold(f64::INFINITY, f64::min);
        if step.iter().any(|s| !s.is_finite() || s.abs() > h_min) {
            break;
        }
        y.iter_mut().zip(&step).for_each(|(yi, s)| *yi += s);
        if norm(&step) < 1e-14 * h_min {
            break;
        }
    }
    y
}

fn solve_small(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// `min_y |u - v(. - y)|_2`, the shift found by [`best_shift`].
pub fn aligned_distance(u: &Field, v: &Field) -> f64 {
    let y = best_shift(u, v);
    u.sub(&translate(v, &y)).norm()
}

/// Moves the mass of `u` so its circular mean sits at the origin.
pub fn recenter(u: &Field) -> Field {
    let grid = u.grid();
    let mut x = vec![0.0; grid.dim()];
    let mut sums = vec![Complex64::new(0.0, 0.0); grid.dim()];
    for (i, &v) in u.values().iter().enumerate() {
        grid.node_into(i, &mut x);
        for (s, (xi, ax)) in sums.iter_mut().zip(x.iter().zip(grid.axes())) {
            *s += v * v * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * xi / ax.length);
        }
    }
    let center: Vec<f64> = sums
        .iter()
        .zip(grid.axes())
        .map(|(s, ax)| s.arg() * ax.length / (2.0 * std::f64::consts::PI))
        .collect();
    translate(u, &center.iter().map(|c| -c).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    /// `rho_0 = fraction * (E_inf - max_i E_{a_i})`.
    pub rho0_fraction: f64,
    /// Slack on `lambda <= 2 E_inf / a`.
    pub lambda_tol: f64,
    /// Distinctness threshold, relative to `sqrt(a)`.
    pub distinct_tol: f64,
    /// Allowed `|mass - a| / a`.
    pub mass_tol: f64,
    pub single_center_rho_bar: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            rho0_fraction: 0.5,
            lambda_tol: 1e-8,
            distinct_tol: 1e-3,
            mass_tol: 1e-10,
            single_center_rho_bar: DEFAULT_RHO_BAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `E_{a_i,a} + rho_0`.
    pub beta_threshold: f64,
    /// `2 E_{inf,a} / a`.
    pub lambda_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub center: Vec<f64>,
    /// `a_i / eps`, where the seed was placed.
    pub seed_offset: Vec<f64>,
    pub converged: bool,
    pub energy: f64,
    pub lambda: f64,
    pub mass: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub barycenter: Vec<f64>,
    pub region: Option<usize>,
    /// Distinct from every other solution of the run.
    pub distinct: bool,
    pub thresholds: Thresholds,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub k_requested: usize,
    pub k_found: usize,
    pub success: bool,
    /// Names of failed checks, prefixed with the region index.
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenLevels {
    pub e_inf: f64,
    pub e_centers: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub eps: f64,
    pub mass: f64,
    pub geometry: RegionGeometry,
    pub levels: FrozenLevels,
    pub rho0: f64,
    pub regions: Vec<RegionEntry>,
    pub summary: ExperimentSummary,
    #[serde(skip)]
    pub solutions: Vec<Option<SolveResult>>,
}

/// Frozen coefficients `(h(a_i), V(a_i))` at each center and `(h_inf, 0)` at infinity.
pub fn frozen_parameters(spec: &PotentialSpec) -> (Vec<(f64, f64)>, (f64, f64)) {
    let centers = spec
        .centers()
        .iter()
        .map(|c| (spec.h(c), spec.v(c)))
        .collect();
    (centers, (spec.h_infinity(), 0.0))
}

/// Seeds translated copies of the frozen ground state at the origin to each
/// `a_i / eps`, minimizes `I_eps` from each, and classifies the results.
pub fn multiplicity_experiment(
    spec: &PotentialSpec,
    nl: Nonlinearity,
    s: f64,
    grid: &Grid,
    a: f64,
    eps: f64,
    opts: &SolverOptions,
    xopts: &ExperimentOptions,
) -> Result<MultiplicityReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::parameter("eps", format!("must be > 0, got {eps}")));
    }
    let ctx = EnergyContext::nonautonomous(grid, s, nl, spec.clone(), eps)?;
    if let Some(&i) = ctx.centers_outside().first() {
        return Err(Error::Config(format!(
            "center {i} maps to {:?}, outside the box",
            spec.centers()[i]
                .iter()
                .map(|c| c / eps)
                .collect::<Vec<_>>()
        )));
    }
    let geom = choose_geometry_with_default(spec.centers(), xopts.single_center_rho_bar)?;

    let (center_params, inf_params) = frozen_parameters(spec);
    let mut frozen: Vec<(f64, f64, SolveResult)> = Vec::new();
    let mut level_of = |alpha: f64, beta: f64| -> Result<SolveResult> {
        if let Some((_, _, r)) = frozen.iter().find(|(x, y, _)| *x == alpha && *y == beta) {
            return Ok(r.clone());
        }
        let r = frozen_ground_state(grid, s, nl, alpha, beta, a, opts)?;
        frozen.push((alpha, beta, r.clone()));
        Ok(r)
    };
    let inf = level_of(inf_params.0, inf_params.1)?;
    let centers: Vec<SolveResult> = center_params
        .iter()
        .map(|&(al, be)| level_of(al, be))
        .collect::<Result<_>>()?;
    let levels = FrozenLevels {
        e_inf: inf.energy,
        e_centers: centers.iter().map(|r| r.energy).collect(),
        converged: inf.converged && centers.iter().all(|r| r.converged),
    };
    let gap = levels.e_inf
        - levels
            .e_centers
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
    let rho0 = xopts.rho0_fraction * gap;
    let lambda_bound = 2.0 * levels.e_inf / a;

    let u0 = recenter(&centers[0].u);
    let offsets: Vec<Vec<f64>> = spec
        .centers()
        .iter()
        .map(|c| c.iter().map(|x| x / eps).collect())
        .collect();
    let seeds: Vec<Field> = offsets.iter().map(|o| translate(&u0, o)).collect();
    let run = multistart_with(&ctx, a, &seeds, opts, Dedup::Keep)?;

    let k = spec.centers().len();
    let mut solutions: Vec<Option<SolveResult>> = vec![None; k];
    for r in run.results {
        let i = r.seed_index;
        solutions[i] = Some(r);
    }
    let chi = geom.truncation();
    for r in solutions.iter_mut().flatten() {
        r.barycenter = Some(barycenter(&r.u, eps, &chi)?);
    }

    let mut regions = Vec::with_capacity(k);
    let mut failed = Vec::new();
    for i in 0..k {
        let thresholds = Thresholds {
            beta_threshold: levels.e_centers[i] + rho0,
            lambda_bound,
        };
        let entry = match &solutions[i] {
            Some(r) => {
                let bary = r.barycenter.clone().unwrap_or_default();
                let region = region_of_point(&bary, &geom);
                let distinct = (0..k).filter(|&j| j != i).all(|j| match &solutions[j] {
                    Some(o) => distinctness(r, o, &geom, eps, xopts.distinct_tol),
                    None => true,
                });
                let mass_err = (r.mass - a).abs() / a;
                let checks = vec![
                    Check::new(
                        "converged",
                        r.converged,
                        format!("grad_norm = {:.3e}", r.grad_norm),
                    ),
                    Check::new(
                        "mass",
                        mass_err <= xopts.mass_tol,
                        "|mass - a| / a within tolerance",
                    )
                    .with_margin(xopts.mass_tol - mass_err),
                    Check::new("energy_negative", r.energy < 0.0, "I_eps(u) < 0")
                        .with_margin(-r.energy),
                    Check::new("lambda_negative", r.lambda < 0.0, "lambda < 0")
                        .with_margin(-r.lambda),
                    Check::new(
                        "lambda_bound",
                        r.lambda <= lambda_bound + xopts.lambda_tol,
                        "lambda <= 2 E_inf / a",
                    )
                    .with_margin(lambda_bound - r.lambda),
                    Check::new(
                        "beta_threshold",
                        r.energy < thresholds.beta_threshold,
                        "energy < E_{a_i,a} + rho_0",
                    )
                    .with_margin(thresholds.beta_threshold - r.energy),
                    Check::new(
                        "own_region",
                        region == Some(i),
                        format!("region = {region:?}"),
                    ),
                    Check::new("distinct", distinct, "distinct from the other solutions"),
                ];
                RegionEntry {
                    center: spec.centers()[i].clone(),
                    seed_offset: offsets[i].clone(),
                    converged: r.converged,
                    energy: r.energy,
                    lambda: r.lambda,
                    mass: r.mass,
                    grad_norm: r.grad_norm,
                    iterations: r.iterations,
                    barycenter: bary,
                    region,
                    distinct,
                    thresholds,
                    checks,
                    error: None,
                }
            }
            None => {
                let error = run
                    .failures
                    .iter()
                    .find(|(j, _)| *j == i)
                    .map(|(_, e)| e.clone())
                    .unwrap_or_else(|| "no result".into());
                RegionEntry {
                    center: spec.centers()[i].clone(),
                    seed_offset: offsets[i].clone(),
                    converged: false,
                    energy: f64::NAN,
                    lambda: f64::NAN,
                    mass: f64::NAN,
                    grad_norm: f64::NAN,
                    iterations: 0,
                    barycenter: vec![],
                    region: None,
                    distinct: false,
                    thresholds,
                    checks: vec![Check::new("solved", false, error.clone())],
                    error: Some(error),
                }
            }
        };
        failed.extend(
            entry
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{i}:{}", c.name)),
        );
        regions.push(entry);
    }

    let mut occupied: Vec<usize> = regions
        .iter()
        .filter(|e| e.converged)
        .filter_map(|e| e.region)
        .collect();
    occupied.sort_unstable();
    occupied.dedup();
    let k_found = occupied.len();
    let success = k_found == k
        && regions
            .iter()
            .all(|e| e.converged && e.distinct && e.region.is_some());
    Ok(MultiplicityReport {
        eps,
        mass: a,
        geometry: geom,
        levels,
        rho0,
        regions,
        summary: ExperimentSummary {
            k_requested: k,
            k_found,
            success,
            failed,
        },
        solutions,
    })
}
