//! Nonlinearity `f`, potential `V` and weight `h`: analytic forms, assumption
//! checks, and sampling at scale `eps`.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::report::{all_passed, Check};
use crate::spectral::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityForm {
    /// `f(t) = c_q |t|^{q-2} t`
    PurePower,
    /// `f(t) = c_q |t|^{q-2} t + c_p |t|^{p-2} t`
    TwoPower,
}

/// Power-type nonlinearity and its primitive `F(t) = int_0^t f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonlinearity")]
pub struct Nonlinearity {
    form: NonlinearityForm,
    q: f64,
    p: f64,
    c_q: f64,
    c_p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNonlinearity {
    form: NonlinearityForm,
    q: f64,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default = "one")]
    c_q: f64,
    #[serde(default)]
    c_p: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawNonlinearity> for Nonlinearity {
    type Error = Error;

    fn try_from(raw: RawNonlinearity) -> Result<Self> {
        match raw.form {
            NonlinearityForm::PurePower => Nonlinearity::pure_power(raw.q, raw.c_q),
            NonlinearityForm::TwoPower => Nonlinearity::two_power(
                raw.q,
                raw.p
                    .ok_or_else(|| Error::parameter("p", "two_power needs `p`"))?,
                raw.c_q,
                raw.c_p.unwrap_or(1.0),
            ),
        }
    }
}

impl Nonlinearity {
    pub fn pure_power(q: f64, c_q: f64) -> Result<Self> {
        check_exponent("q", q)?;
        check_coefficient("c_q", c_q)?;
        Ok(Nonlinearity {
            form: NonlinearityForm::PurePower,
            q,
            p: q,
            c_q,
            c_p: 0.0,
        })
    }

    pub fn two_power(q: f64, p: f64, c_q: f64, c_p: f64) -> Result<Self> {
        check_exponent("q", q)?;
        check_exponent("p", p)?;
        if p < q {
            return Err(Error::parameter(
                "p",
                format!("need q <= p, got q = {q}, p = {p}"),
            ));
        }
        check_coefficient("c_q", c_q)?;
        check_coefficient("c_p", c_p)?;
        Ok(Nonlinearity {
            form: NonlinearityForm::TwoPower,
            q,
            p,
            c_q,
            c_p,
        })
    }

    pub fn form(&self) -> NonlinearityForm {
        self.form
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Largest growth exponent (`q` for the pure power).
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    /// Lower Ambrosetti–Rabinowitz exponent: `alpha F(t) <= t f(t)`.
    pub fn alpha(&self) -> f64 {
        self.q
    }

    /// Upper Ambrosetti–Rabinowitz exponent: `t f(t) <= beta F(t)`.
    pub fn beta(&self) -> f64 {
        self.p
    }

    /// Whether `f` vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.c_q == 0.0 && (self.form == NonlinearityForm::PurePower || self.c_p == 0.0)
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        let a = t.abs();
        let mut v = self.c_q * a.powf(self.q - 1.0);
        if self.form == NonlinearityForm::TwoPower {
            v += self.c_p * a.powf(self.p - 1.0);
        }
        v.copysign(t)
    }

    #[inline]
    pub fn primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        let mut v = self.c_q * a.powf(self.q) / self.q;
        if self.form == NonlinearityForm::TwoPower {
            v += self.c_p * a.powf(self.p) / self.p;
        }
        v
    }

    /// `(f(t), F(t))`.
    #[inline]
    pub fn f_and_f_primitive(&self, t: f64) -> (f64, f64) {
        let a = t.abs();
        let gq = self.c_q * a.powf(self.q - 1.0);
        let (mut f, mut big_f) = (gq, gq * a / self.q);
        if self.form == NonlinearityForm::TwoPower {
            let gp = self.c_p * a.powf(self.p - 1.0);
            f += gp;
            big_f += gp * a / self.p;
        }
        (f.copysign(t), big_f)
    }
}

fn check_exponent(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(
            name,
            format!("exponent must be finite and > 1, got {v}"),
        ))
    }
}

fn check_coefficient(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::parameter(
            name,
            format!("coefficient must be >= 0, got {v}"),
        ))
    }
}

/// `2 + 4s/N`, the mass-critical exponent.
pub fn critical_exponent(s: f64, dim: usize) -> f64 {
    2.0 + 4.0 * s / dim as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub critical_exponent: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Range of `t f(t) / F(t)` over the sampled `t`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub checks: Vec<Check>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

/// Sampling-based check of the growth assumptions on `f` (the small-`t`
/// limit, subcritical growth at infinity, and the Ambrosetti–Rabinowitz chain).
pub fn check_growth_conditions(nl: &Nonlinearity, s: f64, dim: usize) -> GrowthReport {
    let pbar = critical_exponent(s, dim);
    let (q, p) = (nl.q(), nl.p());
    let mut checks = Vec::new();

    let t0 = 1e-8;
    let limit0 = nl.f(t0).abs() / t0.powf(q - 1.0);
    let f1 = nl.c_q() > 0.0 && q > 2.0 && q < pbar && (limit0 - nl.c_q()).abs() <= 1e-3 * nl.c_q();
    checks.push(Check::new(
        "f1",
        f1,
        format!("need 2 < q = {q} < {pbar}, |f(t)|/|t|^(q-1) -> c = {} (sampled {limit0:.6e} at t = {t0:e})", nl.c_q()),
    ));

    // Any exponent strictly between p and the critical one must dominate f at infinity.
    let probe = 0.5 * (p + pbar);
    let decay = |t: f64| nl.f(t).abs() / t.powf(probe - 1.0);
    let (r3, r6, r12) = (decay(1e3), decay(1e6), decay(1e12));
    let f2 = p > 2.0 && p < pbar && r12 < r6 && r6 < r3;
    checks.push(Check::new(
        "f2",
        f2,
        format!("need 2 < p = {p} < {pbar}; |f(t)|/|t|^({probe:.4}-1) = {r3:.3e} at 1e3, {r6:.3e} at 1e6, {r12:.3e} at 1e12"),
    ));

    let subcritical = q <= p && p < pbar;
    checks.push(Check::new(
        "subcritical",
        subcritical,
        format!("q = {q} <= p = {p} < {pbar}"),
    ));

    let (alpha, beta) = (nl.alpha(), nl.beta());
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    let mut ar_witness = None;
    let mut odd_witness = None;
    let samples = 601;
    for i in 0..samples {
        let t = 10f64.powf(-3.0 + 6.0 * i as f64 / (samples - 1) as f64);
        let (f, big_f) = nl.f_and_f_primitive(t);
        let ratio = t * f / big_f;
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
        let tol = 1e-12 * t * f.abs();
        let ok = big_f > 0.0 && alpha * big_f <= t * f + tol && t * f <= beta * big_f + tol;
        if !ok && ar_witness.is_none() {
            ar_witness = Some(t);
        }
        if (nl.f(-t) + f).abs() > 1e-14 * f.abs() && odd_witness.is_none() {
            odd_witness = Some(t);
        }
    }
    let f3 = alpha > 2.0 && alpha <= beta && beta < pbar && ar_witness.is_none();
    checks.push(
        Check::new(
            "f3",
            f3,
            format!(
                "need 2 < alpha = {alpha} <= beta = {beta} < {pbar} and alpha F <= t f <= beta F; t f / F in [{ratio_min:.6}, {ratio_max:.6}]"
            ),
        )
        .with_witness(ar_witness),
    );
    checks.push(
        Check::new("odd", odd_witness.is_none(), "f(-t) = -f(t) on sampled t")
            .with_witness(odd_witness),
    );

    GrowthReport {
        critical_exponent: pbar,
        alpha,
        beta,
        ratio_min,
        ratio_max,
        checks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(-r^2)`
    #[default]
    Gaussian,
    /// `sech(r)^2`
    Sech2,
}

impl BumpProfile {
    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            BumpProfile::Gaussian => (-r * r).exp(),
            BumpProfile::Sech2 => {
                let c = r.cosh();
                if c.is_finite() {
                    1.0 / (c * c)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Coefficients `V` and `h` as functions on `R^N`, together with the points
/// `a_i` at which they are meant to be extremal.
pub trait CoefficientProfile {
    fn dim(&self) -> usize;
    fn centers(&self) -> &[Vec<f64>];
    fn h_infinity(&self) -> f64;
    fn h(&self, x: &[f64]) -> f64;
    fn v(&self, x: &[f64]) -> f64;
}

/// Weight `h = h_inf + (h_peak - h_inf) sum_i bump(|x - a_i| / w)` and
/// potential `V = V_depth sum_i well(|x - a_i| / w_V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PotentialSpec {
    centers: Vec<Vec<f64>>,
    h_infinity: f64,
    h_peak: f64,
    h_bump_width: f64,
    v_depth: f64,
    v_well_width: f64,
    profile: BumpProfile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    #[serde(deserialize_with = "points")]
    centers: Vec<Vec<f64>>,
    h_infinity: f64,
    h_peak: f64,
    h_bump_width: f64,
    v_depth: f64,
    v_well_width: f64,
    #[serde(default)]
    profile: BumpProfile,
}

/// Accepts `[0.0, 8.0]` (one-dimensional) or `[[0.0, 0.0], [8.0, 0.0]]`.
fn points<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Point {
        Scalar(f64),
        Vector(Vec<f64>),
    }
    let raw: Vec<Point> = Vec::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|p| match p {
            Point::Scalar(x) => vec![x],
            Point::Vector(v) => v,
        })
        .collect())
}

impl TryFrom<RawPotential> for PotentialSpec {
    type Error = Error;
    fn try_from(r: RawPotential) -> Result<Self> {
        PotentialSpec::new(
            r.centers,
            r.h_infinity,
            r.h_peak,
            r.h_bump_width,
            r.v_depth,
            r.v_well_width,
        )
        .map(|p| p.with_profile(r.profile))
    }
}

impl From<PotentialSpec> for RawPotential {
    fn from(p: PotentialSpec) -> Self {
        RawPotential {
            centers: p.centers,
            h_infinity: p.h_infinity,
            h_peak: p.h_peak,
            h_bump_width: p.h_bump_width,
            v_depth: p.v_depth,
            v_well_width: p.v_well_width,
            profile: p.profile,
        }
    }
}

impl PotentialSpec {
    pub fn new(
        centers: Vec<Vec<f64>>,
        h_infinity: f64,
        h_peak: f64,
        h_bump_width: f64,
        v_depth: f64,
        v_well_width: f64,
    ) -> Result<Self> {
        let dim = centers.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::parameter(
                "centers",
                "need at least one center, all of the same dimension",
            ));
        }
        if centers.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::parameter("centers", "coordinates must be finite"));
        }
        if !(h_infinity.is_finite() && h_infinity > 0.0) {
            return Err(Error::parameter(
                "h_infinity",
                format!("must be > 0, got {h_infinity}"),
            ));
        }
        if !(h_peak.is_finite() && h_peak > 0.0) {
            return Err(Error::parameter(
                "h_peak",
                format!("must be > 0, got {h_peak}"),
            ));
        }
        if !(v_depth.is_finite() && v_depth <= 0.0) {
            return Err(Error::parameter(
                "v_depth",
                format!("must be <= 0, got {v_depth}"),
            ));
        }
        for (name, w) in [
            ("h_bump_width", h_bump_width),
            ("v_well_width", v_well_width),
        ] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::parameter(name, format!("must be > 0, got {w}")));
            }
        }
        Ok(PotentialSpec {
            centers,
            h_infinity,
            h_peak,
            h_bump_width,
            v_depth,
            v_well_width,
            profile: BumpProfile::Gaussian,
        })
    }

    /// Two-bump one-dimensional default: centers `{0, 8}`, `h_inf = 1`,
    /// `h_peak = 2`, `V_depth = -1`, unit widths.
    pub fn two_bump_default() -> Self {
        PotentialSpec::new(vec![vec![0.0], vec![8.0]], 1.0, 2.0, 1.0, -1.0, 1.0)
            .expect("default potential is valid")
    }

    pub fn with_profile(mut self, profile: BumpProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn h_peak(&self) -> f64 {
        self.h_peak
    }

    pub fn v_depth(&self) -> f64 {
        self.v_depth
    }

    pub fn h_bump_width(&self) -> f64 {
        self.h_bump_width
    }

    pub fn v_well_width(&self) -> f64 {
        self.v_well_width
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    fn bump_sum(&self, x: &[f64], width: f64) -> f64 {
        self.centers
            .iter()
            .map(|c| {
                let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                self.profile.eval(r2.sqrt() / width)
            })
            .sum()
    }
}

impl CoefficientProfile for PotentialSpec {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    fn h_infinity(&self) -> f64 {
        self.h_infinity
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.h_infinity + (self.h_peak - self.h_infinity) * self.bump_sum(x, self.h_bump_width)
    }

    fn v(&self, x: &[f64]) -> f64 {
        self.v_depth * self.bump_sum(x, self.v_well_width)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialReport {
    pub h_at_centers: Vec<f64>,
    pub v_at_centers: Vec<f64>,
    pub sampled_h_max: f64,
    pub sampled_v_min: f64,
    pub checks: Vec<Check>,
}

impl PotentialReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

const PROFILE_TOL: f64 = 1e-9;

/// Dense-sampling check of the assumptions on `h` and `V`: equal global maxima
/// of `h` at every `a_i` above its limit `h_inf > 0`, and `V` minimal at every
/// `a_i` with `V(a_i) < 0 = lim V`.
pub fn check_a1_a2(profile: &dyn CoefficientProfile, probe_radius: f64) -> PotentialReport {
    let dim = profile.dim();
    let centers = profile.centers();
    let h_at: Vec<f64> = centers.iter().map(|c| profile.h(c)).collect();
    let v_at: Vec<f64> = centers.iter().map(|c| profile.v(c)).collect();
    let mut checks = Vec::new();

    let origin_first = centers.first().is_some_and(|c| c.iter().all(|&x| x == 0.0));
    checks.push(Check::new(
        "a1_is_origin",
        origin_first,
        "first center must be the origin",
    ));

    let mut distinct = true;
    for i in 0..centers.len() {
        for j in 0..i {
            if centers[i] == centers[j] {
                distinct = false;
            }
        }
    }
    checks.push(Check::new(
        "centers_distinct",
        distinct,
        "a_i != a_j for i != j",
    ));

    // Dense sample of the probe cube plus the centers themselves.
    let per_axis: usize = if dim == 1 { 20_001 } else { 401 };
    let mut h_max = f64::NEG_INFINITY;
    let mut v_min = f64::INFINITY;
    let mut h_argmax = 0.0;
    let mut v_argmin = 0.0;
    let total = per_axis.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        for xk in x.iter_mut().rev() {
            let j = rem % per_axis;
            rem /= per_axis;
            *xk = -probe_radius + 2.0 * probe_radius * j as f64 / (per_axis - 1) as f64;
        }
        let (h, v) = (profile.h(&x), profile.v(&x));
        if h > h_max {
            h_max = h;
            h_argmax = x[0];
        }
        if v < v_min {
            v_min = v;
            v_argmin = x[0];
        }
    }
    let h_ref = h_at.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_ref = v_at.iter().cloned().fold(f64::INFINITY, f64::min);
    h_max = h_max.max(h_ref);
    v_min = v_min.min(v_ref);

    let h_spread = h_at.iter().map(|h| (h - h_at[0]).abs()).fold(0.0, f64::max);
    checks.push(
        Check::new(
            "A1_equal_peaks",
            h_spread <= PROFILE_TOL * h_at[0].abs(),
            format!("h(a_i) = {h_at:?}"),
        )
        .with_margin(-h_spread),
    );
    let peak_ok = h_max <= h_at.iter().cloned().fold(f64::INFINITY, f64::min) * (1.0 + PROFILE_TOL);
    checks.push(
        Check::new(
            "A1_max_at_centers",
            peak_ok,
            format!("sampled max h = {h_max}, h(a_i) = {h_at:?}"),
        )
        .with_witness((!peak_ok).then_some(h_argmax)),
    );

    let tails = tail_probes(dim, probe_radius);
    let h_inf = profile.h_infinity();
    let h_tail_err = tails
        .iter()
        .map(|t| (profile.h(t) - h_inf).abs())
        .fold(0.0, f64::max);
    let h_lim_ok = h_inf > 0.0 && h_tail_err <= 1e-8 * h_inf && h_at.iter().all(|&h| h_inf < h);
    checks.push(
        Check::new(
            "A1_limit_below_peak",
            h_lim_ok,
            format!("h_inf = {h_inf}, max tail deviation {h_tail_err:.3e}"),
        )
        .with_margin(h_at.iter().cloned().fold(f64::INFINITY, f64::min) - h_inf),
    );

    let v_spread = v_at.iter().map(|v| (v - v_at[0]).abs()).fold(0.0, f64::max);
    checks.push(
        Check::new(
            "A2_equal_wells",
            v_spread <= PROFILE_TOL * v_at[0].abs().max(PROFILE_TOL),
            format!("V(a_i) = {v_at:?}"),
        )
        .with_margin(-v_spread),
    );
    let well_ok = v_at
        .iter()
        .all(|&v| v <= v_min + PROFILE_TOL * v_min.abs().max(1.0));
    checks.push(
        Check::new(
            "A2_min_at_centers",
            well_ok,
            format!("sampled inf V = {v_min}, V(a_i) = {v_at:?}"),
        )
        .with_witness((!well_ok).then_some(v_argmin)),
    );
    let v_tail = tails.iter().map(|t| profile.v(t).abs()).fold(0.0, f64::max);
    let v_lim_ok = v_tail <= 1e-8 && v_at.iter().all(|&v| v < 0.0);
    checks.push(
        Check::new(
            "A2_limit_above_well",
            v_lim_ok,
            format!("V(a_i) = {v_at:?}, max |V| on tail probes {v_tail:.3e}"),
        )
        .with_margin(-v_ref),
    );

    PotentialReport {
        h_at_centers: h_at,
        v_at_centers: v_at,
        sampled_h_max: h_max,
        sampled_v_min: v_min,
        checks,
    }
}

fn tail_probes(dim: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut d = vec![0.0; dim];
            d[k] = sign;
            dirs.push(d);
        }
    }
    if dim > 1 {
        let c = 1.0 / (dim as f64).sqrt();
        dirs.push(vec![c; dim]);
        dirs.push(vec![-c; dim]);
    }
    let base = radius.max(1.0);
    [10.0, 100.0, 1000.0]
        .iter()
        .flat_map(|m| {
            dirs.iter()
                .map(move |d| d.iter().map(|x| x * m * base).collect())
        })
        .collect()
}

/// `V(eps x)` and `h(eps x)` at the grid nodes.
#[derive(Debug, Clone)]
pub struct SampledCoefficients {
    pub v: Field,
    pub h: Field,
    /// Indices of centers whose rescaled position `a_i / eps` lies outside the box.
    pub centers_outside: Vec<usize>,
}

impl SampledCoefficients {
    pub fn has_warning(&self) -> bool {
        !self.centers_outside.is_empty()
    }
}

pub fn sample_on_grid(
    profile: &dyn CoefficientProfile,
    grid: &Grid,
    eps: f64,
) -> Result<SampledCoefficients> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::parameter("eps", format!("must be > 0, got {eps}")));
    }
    if profile.dim() != grid.dim() {
        return Err(Error::parameter(
            "centers",
            "dimension differs from the grid",
        ));
    }
    let mut y = vec![0.0; grid.dim()];
    let v = Field::from_fn(grid, |x| {
        for (yk, xk) in y.iter_mut().zip(x) {
            *yk = eps * xk;
        }
        profile.v(&y)
    });
    let h = Field::from_fn(grid, |x| {
        for (yk, xk) in y.iter_mut().zip(x) {
            *yk = eps * xk;
        }
        profile.h(&y)
    });
    let centers_outside = profile
        .centers()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let scaled: Vec<f64> = c.iter().map(|a| a / eps).collect();
            !grid.contains(&scaled)
        })
        .map(|(i, _)| i)
        .collect();
    Ok(SampledCoefficients {
        v,
        h,
        centers_outside,
    })
}
