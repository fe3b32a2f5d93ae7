//! Ground-state energy maps and the orderings between them.
//!
//! `E_a` is the minimum of the autonomous energy on `S_a`. The frozen levels
//! `E_{alpha beta, a}` use constant weight `alpha` and potential `beta`;
//! `E_{inf,a}` and `E_{a_i,a}` freeze the coefficients at infinity and at the
//! centers, and `E_{eps,a}` is the nonautonomous level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::localization::{frozen_parameters, recenter};
use crate::model::{CoefficientProfile, Nonlinearity, PotentialSpec};
use crate::optimizer::{
    multistart, random_gaussian_seeds, seed_negative_energy, SolveResult, SolverOptions,
};
use crate::report::{all_passed, Check};
use crate::spectral::{translate, Field, Grid};

/// Random restarts added to the dilation seed in every ground-state solve.
pub const RANDOM_RESTARTS: usize = 2;

/// Lowest-energy result over the dilation seed and [`RANDOM_RESTARTS`] random Gaussians.
pub fn ground_state(ctx: &EnergyContext, a: f64, opts: &SolverOptions) -> Result<SolveResult> {
    let mut seeds = vec![seed_negative_energy(ctx, a, opts)?.field];
    seeds.extend(random_gaussian_seeds(
        ctx.grid(),
        RANDOM_RESTARTS,
        a,
        opts.rng_seed,
    )?);
    lowest(ctx, a, &seeds, opts)
}

fn lowest(
    ctx: &EnergyContext,
    a: f64,
    seeds: &[Field],
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let rep = multistart(ctx, a, seeds, opts)?;
    rep.results.into_iter().next().ok_or_else(|| {
        Error::Usage(format!(
            "every seed failed: {}",
            rep.failures
                .iter()
                .map(|(_, e)| e.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        ))
    })
}

/// Ground state of the frozen problem with weight `alpha` and potential `beta`.
pub fn frozen_ground_state(
    grid: &Grid,
    s: f64,
    nl: Nonlinearity,
    alpha: f64,
    beta: f64,
    a: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let ctx = EnergyContext::frozen(grid, s, nl, alpha, beta)?;
    ground_state(&ctx, a, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mass: f64,
    pub energy: f64,
    pub lambda: f64,
    pub pohozaev_rel: Option<f64>,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCurve {
    pub masses: Vec<f64>,
    pub energies: Vec<f64>,
    pub points: Vec<CurvePoint>,
}

impl LandscapeCurve {
    /// Energy at a mass present in the curve (relative match `1e-12`).
    pub fn energy_at(&self, a: f64) -> Option<f64> {
        self.masses
            .iter()
            .position(|&m| (m - a).abs() <= 1e-12 * a.abs().max(m.abs()))
            .map(|i| self.energies[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mass,energy,lambda,pohozaev_rel,converged\n");
        for p in &self.points {
            let poh = p.pohozaev_rel.map(|v| format!("{v:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:e},{:e},{:e},{},{}\n",
                p.mass, p.energy, p.lambda, poh, p.converged
            ));
        }
        out
    }
}

/// `E_a` for each mass, solved independently.
pub fn energy_curve(
    ctx: &EnergyContext,
    masses: &[f64],
    opts: &SolverOptions,
) -> Result<LandscapeCurve> {
    if masses.is_empty() {
        return Err(Error::parameter("masses", "need at least one mass"));
    }
    if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::parameter("masses", "masses must be positive"));
    }
    if masses.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter(
            "masses",
            "masses must be strictly increasing",
        ));
    }
    let points: Vec<CurvePoint> = masses
        .par_iter()
        .map(|&a| match ground_state(ctx, a, opts) {
            Ok(r) => CurvePoint {
                mass: a,
                energy: r.energy,
                lambda: r.lambda,
                pohozaev_rel: r.pohozaev_rel,
                converged: r.converged,
                grad_norm: r.grad_norm,
                iterations: r.iterations,
                error: None,
            },
            Err(e) => CurvePoint {
                mass: a,
                energy: f64::NAN,
                lambda: f64::NAN,
                pohozaev_rel: None,
                converged: false,
                grad_norm: f64::NAN,
                iterations: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(LandscapeCurve {
        masses: masses.to_vec(),
        energies: points.iter().map(|p| p.energy).collect(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictnessMargin {
    pub a: f64,
    pub b: f64,
    /// `E_a + E_b - E_{a+b}`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub checks: Vec<Check>,
    pub strictness: Vec<StrictnessMargin>,
    /// `max |E_{a_{j+1}} - E_{a_j}| / (a_{j+1} - a_j)` over adjacent points.
    pub c_emp: f64,
}

impl LandscapeReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

/// Smallest strictness margin counted as a pass.
pub const STRICTNESS_FLOOR: f64 = 1e-6;

/// Monotonicity, subadditivity and scaling checks on exact curve points.
pub fn check_landscape(
    curve: &LandscapeCurve,
    pairs: &[(f64, f64)],
    thetas: &[f64],
    tol: f64,
) -> Result<LandscapeReport> {
    let at = |m: f64| {
        curve
            .energy_at(m)
            .ok_or_else(|| Error::Usage(format!("mass {m} is not a point of the curve")))
    };
    let mut checks = Vec::new();
    let mut c_emp: f64 = 0.0;
    for (w, e) in curve.masses.windows(2).zip(curve.energies.windows(2)) {
        let margin = e[0] - e[1] + tol;
        checks.push(
            Check::new(
                format!("nonincreasing({},{})", w[0], w[1]),
                margin >= 0.0,
                "E_a1 >= E_a2 - tol",
            )
            .with_margin(margin),
        );
        c_emp = c_emp.max((e[1] - e[0]).abs() / (w[1] - w[0]));
    }

    let mut strictness = Vec::new();
    for &(a, b) in pairs {
        let (ea, eb, eab) = (at(a)?, at(b)?, at(a + b)?);
        let margin = ea + eb - eab;
        checks.push(
            Check::new(
                format!("subadditive({a},{b})"),
                margin + tol >= 0.0,
                "E_{a+b} <= E_a + E_b + tol",
            )
            .with_margin(margin + tol),
        );
        checks.push(
            Check::new(
                format!("strict({a},{b})"),
                margin > STRICTNESS_FLOOR,
                format!("E_a + E_b - E_{{a+b}} > {STRICTNESS_FLOOR:e}"),
            )
            .with_margin(margin),
        );
        strictness.push(StrictnessMargin { a, b, margin });
    }

    for &theta in thetas {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::parameter(
                "theta",
                format!("must be >= 1, got {theta}"),
            ));
        }
        let mut matched = false;
        for (&a, &ea) in curve.masses.iter().zip(&curve.energies) {
            let Some(eta) = curve.energy_at(theta * a) else {
                continue;
            };
            matched = true;
            let margin = theta * ea + tol - eta;
            checks.push(
                Check::new(
                    format!("scaling({theta},{a})"),
                    margin >= 0.0,
                    "E_{theta a} <= theta E_a + tol",
                )
                .with_margin(margin),
            );
        }
        if !matched {
            return Err(Error::Usage(format!(
                "no curve mass a with theta a also in the curve for theta = {theta}"
            )));
        }
    }
    Ok(LandscapeReport {
        checks,
        strictness,
        c_emp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonLevels {
    pub e_eps_a: Option<f64>,
    pub e_ai_a: Vec<Option<f64>>,
    pub e_inf_a: Option<f64>,
    pub a: f64,
    pub eps: f64,
    pub converged: bool,
    pub errors: Vec<String>,
    pub checks: Vec<Check>,
}

/// Solves the frozen problems at infinity and at every center, and the
/// nonautonomous problem seeded at each `a_i / eps`.
pub fn comparison_levels(
    spec: &PotentialSpec,
    nl: Nonlinearity,
    s: f64,
    grid: &Grid,
    a: f64,
    eps: f64,
    opts: &SolverOptions,
) -> Result<ComparisonLevels> {
    let ctx = EnergyContext::nonautonomous(grid, s, nl, spec.clone(), eps)?;
    let (center_params, (h_inf, v_inf)) = frozen_parameters(spec);
    let mut errors = Vec::new();
    let mut converged = true;
    let mut record = |r: Result<SolveResult>, errors: &mut Vec<String>| match r {
        Ok(r) => {
            converged &= r.converged;
            Some(r)
        }
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };

    let inf = record(
        frozen_ground_state(grid, s, nl, h_inf, v_inf, a, opts),
        &mut errors,
    );
    let mut centers: Vec<Option<SolveResult>> = Vec::new();
    for (i, &(al, be)) in center_params.iter().enumerate() {
        let reuse = center_params[..i]
            .iter()
            .position(|&p| p == (al, be))
            .and_then(|j| centers[j].clone());
        let r = match reuse {
            Some(r) => Some(r),
            None => record(
                frozen_ground_state(grid, s, nl, al, be, a, opts),
                &mut errors,
            ),
        };
        centers.push(r);
    }

    let e_eps = match centers.iter().flatten().next() {
        Some(base) => {
            let u0 = recenter(&base.u);
            let seeds: Vec<Field> = spec
                .centers()
                .iter()
                .map(|c| translate(&u0, &c.iter().map(|x| x / eps).collect::<Vec<_>>()))
                .collect();
            record(lowest(&ctx, a, &seeds, opts), &mut errors)
        }
        None => None,
    };

    let e_inf_a = inf.map(|r| r.energy);
    let e_ai_a: Vec<Option<f64>> = centers
        .iter()
        .map(|r| r.as_ref().map(|r| r.energy))
        .collect();
    let mut checks = Vec::new();
    if let Some(ei) = e_inf_a {
        checks.push(Check::new("E_inf_negative", ei < 0.0, "E_{inf,a} < 0").with_margin(-ei));
        for (i, e) in e_ai_a.iter().enumerate() {
            if let Some(e) = e {
                checks.push(
                    Check::new(
                        format!("E_center_{i}_below_inf"),
                        *e < ei,
                        "E_{a_i,a} < E_{inf,a}",
                    )
                    .with_margin(ei - e),
                );
            }
        }
    }
    Ok(ComparisonLevels {
        e_eps_a: e_eps.map(|r| r.energy),
        e_ai_a,
        e_inf_a,
        a,
        eps,
        converged,
        errors,
        checks,
    })
}

impl ComparisonLevels {
    /// `E_{eps,a} - min_i E_{a_i,a}`.
    pub fn excess(&self) -> Option<f64> {
        let min = self.e_ai_a.iter().flatten().cloned().reduce(f64::min)?;
        Some(self.e_eps_a? - min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub e1: f64,
    pub e2: f64,
    /// `e1 - e2`.
    pub margin: f64,
    pub checks: Vec<Check>,
}

/// Compares the frozen levels for `(h1, V1)` and `(h2, V2)` with
/// `0 < h1 <= h2` and `V2 <= V1 <= 0`.
#[allow(clippy::too_many_arguments)]
pub fn frozen_monotonicity_check(
    (h1, v1): (f64, f64),
    (h2, v2): (f64, f64),
    nl: Nonlinearity,
    s: f64,
    grid: &Grid,
    a: f64,
    opts: &SolverOptions,
    tol: f64,
) -> Result<MonotonicityReport> {
    if !(h1 > 0.0 && h1 <= h2) {
        return Err(Error::parameter(
            "h",
            format!("need 0 < h1 <= h2, got {h1}, {h2}"),
        ));
    }
    if !(v2 <= v1 && v1 <= 0.0) {
        return Err(Error::parameter(
            "V",
            format!("need V2 <= V1 <= 0, got {v1}, {v2}"),
        ));
    }
    let e1 = frozen_ground_state(grid, s, nl, h1, v1, a, opts)?.energy;
    let e2 = frozen_ground_state(grid, s, nl, h2, v2, a, opts)?.energy;
    let margin = e1 - e2;
    let checks = if (h1, v1) == (h2, v2) {
        vec![Check::new(
            "equal",
            margin.abs() <= tol,
            "identical parameters give equal levels",
        )
        .with_margin(tol - margin.abs())]
    } else {
        vec![
            Check::new("strict_order", margin > tol, "E_{h2 V2,a} < E_{h1 V1,a}")
                .with_margin(margin),
            Check::new("negative", e1 < 0.0, "E_{h1 V1,a} < 0").with_margin(-e1),
        ]
    };
    Ok(MonotonicityReport {
        e1,
        e2,
        margin,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(masses: &[f64], energies: &[f64]) -> LandscapeCurve {
        LandscapeCurve {
            masses: masses.to_vec(),
            energies: energies.to_vec(),
            points: masses
                .iter()
                .zip(energies)
                .map(|(&m, &e)| CurvePoint {
                    mass: m,
                    energy: e,
                    lambda: -1.0,
                    pohozaev_rel: None,
                    converged: true,
                    grad_norm: 0.0,
                    iterations: 0,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn checks_on_synthetic_concave_curve() {
        // E_a = -a^2 is decreasing, strictly subadditive and E_{theta a} < theta E_a.
        let m = [0.5, 1.0, 1.5, 2.0];
        let e: Vec<f64> = m.iter().map(|a| -a * a).collect();
        let r = check_landscape(
            &curve(&m, &e),
            &[(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)],
            &[1.5],
            1e-8,
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!((r.strictness[0].margin - 0.5).abs() < 1e-15);
        assert!((r.c_emp - 3.5).abs() < 1e-12);
    }

    #[test]
    fn theta_one_is_equality() {
        let c = curve(&[1.0, 2.0], &[-1.0, -3.0]);
        let r = check_landscape(&c, &[], &[1.0], 0.0).unwrap();
        assert!(r
            .checks
            .iter()
            .filter(|c| c.name.starts_with("scaling"))
            .all(|c| c.margin == Some(0.0)));
    }

    #[test]
    fn missing_points_are_usage_errors() {
        let c = curve(&[0.5, 1.0], &[-0.3, -0.7]);
        assert!(matches!(
            check_landscape(&c, &[(0.5, 1.0)], &[], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            check_landscape(&c, &[], &[1.5], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(check_landscape(&c, &[], &[0.5], 0.0).is_err());
    }

    #[test]
    fn increasing_curve_fails_monotonicity() {
        let c = curve(&[0.5, 1.0], &[-0.7, -0.3]);
        let r = check_landscape(&c, &[], &[], 1e-8).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn csv_schema() {
        let c = curve(&[1.0], &[-0.5]);
        let csv = c.to_csv();
        assert!(csv.starts_with("mass,energy,lambda,pohozaev_rel,converged\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn energy_curve_rejects_bad_masses() {
        let g = Grid::cube(1, 32.0, 64).unwrap();
        let ctx = EnergyContext::autonomous(
            &g,
            0.5,
            Nonlinearity::pure_power(2.5, 1.0).unwrap(),
            -1.0,
            1.0,
        )
        .unwrap();
        let o = SolverOptions::default();
        assert!(energy_curve(&ctx, &[], &o).is_err());
        assert!(energy_curve(&ctx, &[1.0, 0.5], &o).is_err());
        assert!(energy_curve(&ctx, &[-1.0], &o).is_err());
    }

    #[test]
    fn monotonicity_preconditions() {
        let g = Grid::cube(1, 32.0, 64).unwrap();
        let nl = Nonlinearity::pure_power(2.5, 1.0).unwrap();
        let o = SolverOptions::default();
        assert!(
            frozen_monotonicity_check((2.0, 0.0), (1.0, 0.0), nl, 0.5, &g, 1.0, &o, 1e-8).is_err()
        );
        assert!(
            frozen_monotonicity_check((1.0, -1.0), (1.0, 0.0), nl, 0.5, &g, 1.0, &o, 1e-8).is_err()
        );
    }
}
