#![allow(clippy::needless_range_loop)]

//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use fracns::energy::EnergyContext;
use fracns::landscape::{
    check_landscape, comparison_levels, energy_curve, frozen_ground_state,
    frozen_monotonicity_check, ground_state,
};
use fracns::localization::{multiplicity_experiment, ExperimentOptions};
use fracns::model::{Nonlinearity, PotentialSpec};
use fracns::optimizer::SolverOptions;
use fracns::report::Check;
use fracns::spectral::{frac_laplacian, Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

struct Suite {
    rows: Vec<Outcome>,
}

impl Suite {
    fn record(
        &mut self,
        id: &'static str,
        passed: bool,
        detail: String,
        started: Instant,
        budget_s: u64,
    ) {
        let elapsed = started.elapsed();
        let budget = Duration::from_secs(budget_s);
        let ok = passed && elapsed <= budget;
        println!(
            "[{}] {id}: {detail} ({:.2}s, budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget_s
        );
        self.rows.push(Outcome {
            id,
            passed: ok,
            detail,
            elapsed,
            budget,
        });
    }
}

fn nl() -> Nonlinearity {
    Nonlinearity::pure_power(2.5, 1.0).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(grid, |_| rng.gen_range(-1.0..1.0))
}

fn c1_spectral_oracle(suite: &mut Suite) {
    let t = Instant::now();
    let (n, l, s) = (8, 5.0, 0.35);
    let grid = Grid::cube(1, l, n).unwrap();
    let dense = common::dense_frac_laplacian(n, l, s);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut max_diff, mut max_asym, mut min_quad) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let u = random_field(&grid, &mut rng);
        let v = random_field(&grid, &mut rng);
        let lu = frac_laplacian(&u, s).unwrap();
        let lv = frac_laplacian(&v, s).unwrap();
        for r in 0..n {
            let want: f64 = (0..n).map(|c| dense[r][c] * u.values()[c]).sum();
            max_diff = max_diff.max((lu.values()[r] - want).abs());
        }
        max_asym = max_asym.max((lu.inner(&v) - u.inner(&lv)).abs());
        min_quad = min_quad.min(lu.inner(&u));
    }
    let passed = max_diff < 1e-10 && max_asym < 1e-12 && min_quad >= 0.0;
    suite.record(
        "C1 spectral oracle",
        passed,
        format!("max |L u - dense| = {max_diff:.2e} (< 1e-10), max |<Lu,v> - <u,Lv>| = {max_asym:.2e}, min <Lu,u> = {min_quad:.3e} (>= 0)"),
        t,
        1,
    );
}

fn c2_gradients(suite: &mut Suite) {
    let t = Instant::now();
    let grid = Grid::cube(1, 32.0, 256).unwrap();
    let two = Nonlinearity::two_power(2.4, 3.5, 1.0, 0.5).unwrap();
    let ctxs = [
        (
            "autonomous",
            EnergyContext::autonomous(&grid, 0.5, nl(), -1.0, 1.0).unwrap(),
        ),
        (
            "autonomous two-power",
            EnergyContext::autonomous(&grid, 0.3, two, -0.5, 1.5).unwrap(),
        ),
        (
            "frozen",
            EnergyContext::frozen(&grid, 0.5, nl(), 2.0, -1.0).unwrap(),
        ),
        (
            "nonautonomous",
            EnergyContext::nonautonomous(&grid, 0.5, nl(), PotentialSpec::two_bump_default(), 0.5)
                .unwrap(),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (_, ctx) in &ctxs {
        let u = Field::gaussian(&grid, &[1.0], 2.0).add_scaled(0.2, &random_field(&grid, &mut rng));
        let g = ctx.gradient(&u).unwrap();
        for _ in 0..10 {
            let phi = random_field(&grid, &mut rng);
            let d = 1e-5;
            let fd = (ctx.energy(&u.add_scaled(d, &phi)).unwrap()
                - ctx.energy(&u.add_scaled(-d, &phi)).unwrap())
                / (2.0 * d);
            let an = g.inner(&phi);
            worst = worst.max((fd - an).abs() / an.abs());
        }
    }
    suite.record(
        "C2 gradient vs central differences",
        worst < 1e-6,
        format!("worst relative error {worst:.2e} over 4 variants x 10 directions (< 1e-6)"),
        t,
        10,
    );
}

fn c3_ground_state(suite: &mut Suite) {
    let t = Instant::now();
    let grid = Grid::cube(1, 64.0, 512).unwrap();
    let ctx = EnergyContext::autonomous(&grid, 0.5, nl(), -1.0, 1.0).unwrap();
    let r = ground_state(&ctx, 1.0, &opts()).unwrap();
    let fine = common::Model1d {
        l: 64.0,
        n: 512,
        s: 0.5,
        q: 2.5,
        eta: -1.0,
        mu: 1.0,
        mass: 1.0,
    };
    let oracle = common::coarse_oracle_energy(&fine, 64, 4, 99);
    let rel = ((r.energy - oracle) / oracle).abs();
    let poh = r.pohozaev_rel.unwrap();
    suite.record(
        "C3a ground state converged",
        r.converged && r.grad_norm < 1e-8,
        format!(
            "grad_norm = {:.2e} (< 1e-8), iterations = {}",
            r.grad_norm, r.iterations
        ),
        t,
        60,
    );
    suite.record(
        "C3b energy below eta a / 2",
        r.energy < -0.5,
        format!("E = {:.12} (< -0.5)", r.energy),
        t,
        60,
    );
    suite.record(
        "C3c lambda below -1",
        r.lambda < -1.0,
        format!("lambda = {:.12} (< -1)", r.lambda),
        t,
        60,
    );
    suite.record(
        "C3d Pohozaev residual at L = 64",
        poh.abs() < 1e-3,
        format!(
            "|R|/K = {:.3e} (< 1e-3); boundary-shell mass fraction {:.2e}",
            poh.abs(),
            r.boundary_mass_fraction
        ),
        t,
        60,
    );
    suite.record(
        "C3e coarse-oracle agreement",
        rel < 1e-3,
        format!(
            "E = {:.12}, oracle = {oracle:.12}, relative difference {rel:.2e} (< 1e-3)",
            r.energy
        ),
        t,
        60,
    );
}

fn c4_landscape(suite: &mut Suite) {
    let t = Instant::now();
    let grid = Grid::cube(1, 64.0, 512).unwrap();
    let ctx = EnergyContext::autonomous(&grid, 0.5, nl(), -1.0, 1.0).unwrap();
    let masses = [0.5, 0.8, 1.0, 1.5, 1.6, 2.0];
    let curve = energy_curve(&ctx, &masses, &opts()).unwrap();
    let report = check_landscape(
        &curve,
        &[(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)],
        &[1.25, 1.5],
        1e-8,
    )
    .unwrap();
    let group = |prefix: &str| -> Vec<&Check> {
        report
            .checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .collect()
    };
    let min_margin = |cs: &[&Check]| {
        cs.iter()
            .filter_map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    };
    let converged = curve.points.iter().all(|p| p.converged);
    let below = curve.points.iter().all(|p| p.energy < -0.5 * p.mass);
    let mono = group("nonincreasing");
    let sub = group("subadditive");
    let strict = group("strict");
    let scaling = group("scaling");
    let pass = |cs: &[&Check]| cs.iter().all(|c| c.passed);
    suite.record(
        "C4a E_a nonincreasing",
        converged && pass(&mono),
        format!(
            "energies {:?}; min margin {:.3e} (slack 1e-8); all converged: {converged}; all below eta a/2: {below}",
            curve.energies.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>(),
            min_margin(&mono)
        ),
        t,
        600,
    );
    suite.record(
        "C4b subadditivity",
        pass(&sub),
        format!(
            "{} pairs, min margin {:.3e} (slack 1e-8)",
            sub.len(),
            min_margin(&sub)
        ),
        t,
        600,
    );
    suite.record(
        "C4c strictness margins",
        pass(&strict),
        format!(
            "margins {:?} (> 1e-6)",
            report
                .strictness
                .iter()
                .map(|m| format!("({},{}): {:.4e}", m.a, m.b, m.margin))
                .collect::<Vec<_>>()
        ),
        t,
        600,
    );
    suite.record(
        "C4d scaling E_{theta a} <= theta E_a",
        pass(&scaling) && scaling.len() >= 2,
        format!(
            "{} checks for theta in {{1.25, 1.5}}, min margin {:.3e}; C_emp = {:.4}",
            scaling.len(),
            min_margin(&scaling),
            report.c_emp
        ),
        t,
        600,
    );
}

fn big_grid() -> Grid {
    Grid::cube(1, 512.0, 4096).unwrap()
}

fn c5_frozen(suite: &mut Suite) {
    let t = Instant::now();
    let grid = big_grid();
    let spec = PotentialSpec::two_bump_default();
    let lv = comparison_levels(&spec, nl(), 0.5, &grid, 1.0, 0.05, &opts()).unwrap();
    let e_inf = lv.e_inf_a.unwrap();
    let e_ai: Vec<f64> = lv.e_ai_a.iter().map(|e| e.unwrap()).collect();
    let order = e_inf < 0.0 && e_ai.iter().all(|&e| e < e_inf) && lv.converged;
    suite.record(
        "C5a E_{a_i,a} < E_{inf,a} < 0",
        order,
        format!(
            "E_inf = {e_inf:.10}, E_ai = {:?}, margins {:?}",
            e_ai.iter().map(|e| format!("{e:.10}")).collect::<Vec<_>>(),
            e_ai.iter()
                .map(|e| format!("{:.4e}", e_inf - e))
                .collect::<Vec<_>>()
        ),
        t,
        300,
    );

    let t = Instant::now();
    let with = frozen_ground_state(&grid, 0.5, nl(), 2.0, -1.0, 1.0, &opts())
        .unwrap()
        .energy;
    let without = frozen_ground_state(&grid, 0.5, nl(), 2.0, 0.0, 1.0, &opts())
        .unwrap()
        .energy;
    let rel = ((with - (without - 0.5)) / with).abs();
    suite.record(
        "C5b constant-shift identity",
        rel < 1e-6,
        format!(
            "E_(2,-1) = {with:.12}, E_(2,0) - 1/2 = {:.12}, relative difference {rel:.2e} (< 1e-6)",
            without - 0.5
        ),
        t,
        300,
    );

    let t = Instant::now();
    let h = frozen_monotonicity_check((1.0, 0.0), (2.0, 0.0), nl(), 0.5, &grid, 1.0, &opts(), 1e-8)
        .unwrap();
    let v = frozen_monotonicity_check(
        (1.0, 0.0),
        (1.0, -1.0),
        nl(),
        0.5,
        &grid,
        1.0,
        &opts(),
        1e-8,
    )
    .unwrap();
    let ok = h.checks.iter().chain(&v.checks).all(|c| c.passed);
    suite.record(
        "C5c frozen monotonicity",
        ok,
        format!(
            "h 1->2: {:.10} -> {:.10} (margin {:.4e}); V 0->-1: {:.10} -> {:.10} (margin {:.4e}, exact shift 0.5)",
            h.e1, h.e2, h.margin, v.e1, v.e2, v.margin
        ),
        t,
        300,
    );
}

fn c6_eps_trend(suite: &mut Suite) {
    let t = Instant::now();
    let grid = big_grid();
    let spec = PotentialSpec::two_bump_default();
    let mut excess = Vec::new();
    let mut converged = true;
    for eps in [0.4, 0.2, 0.1, 0.05] {
        let lv = comparison_levels(&spec, nl(), 0.5, &grid, 1.0, eps, &opts()).unwrap();
        converged &= lv.converged;
        excess.push(lv.excess().unwrap());
    }
    let decreasing = excess.windows(2).all(|w| w[1] < w[0]);
    suite.record(
        "C6 eps-trend of E_eps - min E_ai",
        decreasing && converged,
        format!(
            "eps 0.4, 0.2, 0.1, 0.05 -> {:?} (strictly decreasing), L = 512, n = 4096",
            excess
                .iter()
                .map(|e| format!("{e:.6e}"))
                .collect::<Vec<_>>()
        ),
        t,
        900,
    );
}

fn c7_multiplicity(suite: &mut Suite) -> String {
    let t = Instant::now();
    let rep = multiplicity_experiment(
        &PotentialSpec::two_bump_default(),
        nl(),
        0.5,
        &big_grid(),
        1.0,
        0.05,
        &opts(),
        &ExperimentOptions::default(),
    )
    .unwrap();
    let all_checks = rep
        .regions
        .iter()
        .all(|r| r.checks.iter().all(|c| c.passed));
    let regions: Vec<Option<usize>> = rep.regions.iter().map(|r| r.region).collect();
    suite.record(
        "C7 multiplicity k = 2",
        rep.summary.success && all_checks && rep.summary.k_found == 2,
        format!(
            "k_found = {}, regions {:?}, energies {:?}, lambdas {:?}, lambda bound {:.6}, beta thresholds {:?}, failed {:?}",
            rep.summary.k_found,
            regions,
            rep.regions.iter().map(|r| format!("{:.8}", r.energy)).collect::<Vec<_>>(),
            rep.regions.iter().map(|r| format!("{:.8}", r.lambda)).collect::<Vec<_>>(),
            rep.regions[0].thresholds.lambda_bound,
            rep.regions.iter().map(|r| format!("{:.6}", r.thresholds.beta_threshold)).collect::<Vec<_>>(),
            rep.summary.failed
        ),
        t,
        1200,
    );
    serde_json::to_string(&rep).unwrap()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(command: &str, config: &str, out: &std::path::Path, threads: usize) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_fracns"))
        .args([command, "--config"])
        .arg(configs().join(config))
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .status()
        .expect("spawn fracns");
    assert!(status.success(), "fracns {command} failed");
    let file = if command == "solve" {
        "result.json"
    } else {
        "multiplicity.json"
    };
    std::fs::read_to_string(out.join(file)).unwrap()
}

fn c8_determinism(suite: &mut Suite, multiplicity_json: &str) {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let solve_a = run_cli("solve", "autonomous.json", &dir.path().join("s1"), 1);
    let solve_b = run_cli("solve", "autonomous.json", &dir.path().join("s2"), 4);
    let mult_a = run_cli("multiplicity", "two_bump.json", &dir.path().join("m1"), 1);
    let mult_b = run_cli("multiplicity", "two_bump.json", &dir.path().join("m2"), 4);
    let rerun = multiplicity_experiment(
        &PotentialSpec::two_bump_default(),
        nl(),
        0.5,
        &big_grid(),
        1.0,
        0.05,
        &opts(),
        &ExperimentOptions::default(),
    )
    .unwrap();
    let lib_same = serde_json::to_string(&rerun).unwrap() == multiplicity_json;
    suite.record(
        "C8 determinism",
        solve_a == solve_b && mult_a == mult_b && lib_same,
        format!(
            "solve result.json identical: {}, multiplicity.json identical: {}, library rerun identical: {lib_same} (1 vs 4 threads)",
            solve_a == solve_b,
            mult_a == mult_b
        ),
        t,
        1200,
    );
}

fn main() {
    let mut suite = Suite { rows: Vec::new() };
    c1_spectral_oracle(&mut suite);
    c2_gradients(&mut suite);
    c3_ground_state(&mut suite);
    c4_landscape(&mut suite);
    c5_frozen(&mut suite);
    c6_eps_trend(&mut suite);
    let mult = c7_multiplicity(&mut suite);
    c8_determinism(&mut suite, &mult);

    let failed: Vec<&Outcome> = suite.rows.iter().filter(|r| !r.passed).collect();
    println!(
        "acceptance: {} passed, {} failed",
        suite.rows.len() - failed.len(),
        failed.len()
    );
    for f in &failed {
        println!(
            "  failed: {} ({}; {:.2}s of {}s)",
            f.id,
            f.detail,
            f.elapsed.as_secs_f64(),
            f.budget.as_secs()
        );
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
