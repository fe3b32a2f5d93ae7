//! Energy functionals on the periodic box, their `L^2` gradients, the
//! Lagrange multiplier, the Pohozaev residual and dilation profiles.
//!
//! Every functional has the shape
//!
//! ```text
//! E(u) = 1/2 int |(-Delta)^{s/2} u|^2 + 1/2 int c(x) u^2 - int w(x) F(u)
//! ```
//!
//! with `(c, w) = (V(eps x), h(eps x))` for the nonautonomous problem,
//! `(eta, mu)` for the autonomous one, and `(beta_V, alpha_h)` for the frozen
//! comparison problems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_on_grid, Nonlinearity, NonlinearityForm, PotentialSpec};
use crate::spectral::{self, check_order, dilate_with_limit, fft, Field, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `I_eps` with `V(eps x)` and `h(eps x)`.
    Nonautonomous { spec: PotentialSpec, eps: f64 },
    /// `J` with constant `eta <= 0` and `mu > 0`.
    Autonomous { eta: f64, mu: f64 },
    /// `J_{alpha beta}`: constant weight `alpha_h > 0` and potential `beta_v <= 0`.
    Frozen { alpha_h: f64, beta_v: f64 },
    /// Caller-supplied sampled coefficients.
    Fields,
}

#[derive(Debug, Clone)]
enum Coefficient {
    Constant(f64),
    Sampled(Vec<f64>),
}

impl Coefficient {
    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Sampled(v) => v[i],
        }
    }
}

/// Which functional is being evaluated, on which grid.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    grid: Grid,
    s: f64,
    nl: Nonlinearity,
    variant: Variant,
    symbol: Vec<f64>,
    potential: Coefficient,
    weight: Coefficient,
    centers_outside: Vec<usize>,
}

/// The three terms of an energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    /// `int |(-Delta)^{s/2} u|^2`
    pub kinetic: f64,
    /// `int c u^2`
    pub potential: f64,
    /// `int w F(u)`
    pub nonlinear: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        0.5 * self.kinetic + 0.5 * self.potential - self.nonlinear
    }
}

impl EnergyContext {
    pub fn autonomous(grid: &Grid, s: f64, nl: Nonlinearity, eta: f64, mu: f64) -> Result<Self> {
        if !(eta.is_finite() && eta <= 0.0) {
            return Err(Error::parameter("eta", format!("must be <= 0, got {eta}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::parameter("mu", format!("must be > 0, got {mu}")));
        }
        Self::build(
            grid,
            s,
            nl,
            Variant::Autonomous { eta, mu },
            Coefficient::Constant(eta),
            Coefficient::Constant(mu),
            vec![],
        )
    }

    pub fn frozen(
        grid: &Grid,
        s: f64,
        nl: Nonlinearity,
        alpha_h: f64,
        beta_v: f64,
    ) -> Result<Self> {
        if !(alpha_h.is_finite() && alpha_h > 0.0) {
            return Err(Error::parameter(
                "alpha_h",
                format!("must be > 0, got {alpha_h}"),
            ));
        }
        if !(beta_v.is_finite() && beta_v <= 0.0) {
            return Err(Error::parameter(
                "beta_v",
                format!("must be <= 0, got {beta_v}"),
            ));
        }
        Self::build(
            grid,
            s,
            nl,
            Variant::Frozen { alpha_h, beta_v },
            Coefficient::Constant(beta_v),
            Coefficient::Constant(alpha_h),
            vec![],
        )
    }

    pub fn nonautonomous(
        grid: &Grid,
        s: f64,
        nl: Nonlinearity,
        spec: PotentialSpec,
        eps: f64,
    ) -> Result<Self> {
        let sampled = sample_on_grid(&spec, grid, eps)?;
        let centers_outside = sampled.centers_outside.clone();
        Self::build(
            grid,
            s,
            nl,
            Variant::Nonautonomous { spec, eps },
            Coefficient::Sampled(sampled.v.into_values()),
            Coefficient::Sampled(sampled.h.into_values()),
            centers_outside,
        )
    }

    /// Functional with explicit sampled potential `v` and weight `h`.
    pub fn from_fields(s: f64, nl: Nonlinearity, v: &Field, h: &Field) -> Result<Self> {
        v.same_grid(h)?;
        Self::build(
            v.grid(),
            s,
            nl,
            Variant::Fields,
            Coefficient::Sampled(v.values().to_vec()),
            Coefficient::Sampled(h.values().to_vec()),
            vec![],
        )
    }

    fn build(
        grid: &Grid,
        s: f64,
        nl: Nonlinearity,
        variant: Variant,
        potential: Coefficient,
        weight: Coefficient,
        centers_outside: Vec<usize>,
    ) -> Result<Self> {
        check_order(s)?;
        Ok(EnergyContext {
            grid: grid.clone(),
            s,
            nl,
            variant,
            symbol: grid.frac_symbol(s),
            potential,
            weight,
            centers_outside,
        })
    }

    /// Same functional on another grid.
    pub fn on_grid(&self, grid: &Grid) -> Result<Self> {
        match &self.variant {
            Variant::Autonomous { eta, mu } => Self::autonomous(grid, self.s, self.nl, *eta, *mu),
            Variant::Frozen { alpha_h, beta_v } => {
                Self::frozen(grid, self.s, self.nl, *alpha_h, *beta_v)
            }
            Variant::Nonautonomous { spec, eps } => {
                Self::nonautonomous(grid, self.s, self.nl, spec.clone(), *eps)
            }
            Variant::Fields => Err(Error::Usage(
                "sampled coefficients cannot be moved to another grid".into(),
            )),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    /// Indices of centers whose rescaled positions fall outside the box.
    pub fn centers_outside(&self) -> &[usize] {
        &self.centers_outside
    }

    /// Constant `(eta, mu)` of the equivalent autonomous problem, if any.
    pub fn autonomous_params(&self) -> Option<(f64, f64)> {
        match self.variant {
            Variant::Autonomous { eta, mu } => Some((eta, mu)),
            Variant::Frozen { alpha_h, beta_v } => Some((beta_v, alpha_h)),
            _ => None,
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.autonomous_params().is_some()
    }

    pub(crate) fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid() == &self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn parts(&self, u: &Field) -> Result<EnergyParts> {
        self.check(u)?;
        Ok(self.parts_unchecked(u))
    }

    fn parts_unchecked(&self, u: &Field) -> EnergyParts {
        let dv = self.grid.cell_volume();
        let kinetic = spectral::seminorm_with_symbol(u, &self.symbol);
        let (mut pot, mut nonlin) = (0.0, 0.0);
        for (i, &x) in u.values().iter().enumerate() {
            pot += self.potential.at(i) * x * x;
            nonlin += self.weight.at(i) * self.nl.primitive(x);
        }
        EnergyParts {
            kinetic,
            potential: pot * dv,
            nonlinear: nonlin * dv,
        }
    }

    pub fn energy(&self, u: &Field) -> Result<f64> {
        Ok(self.parts(u)?.total())
    }

    /// `L^2` gradient `(-Delta)^s u + c u - w f(u)`.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(self.gradient_unchecked(u))
    }

    fn gradient_unchecked(&self, u: &Field) -> Field {
        let mut g = fft::apply_symbol(&self.grid, u.values(), &self.symbol);
        for (i, (gi, &x)) in g.iter_mut().zip(u.values()).enumerate() {
            *gi += self.potential.at(i) * x - self.weight.at(i) * self.nl.f(x);
        }
        Field::from_parts(self.grid.clone(), g)
    }

    /// Energy parts and gradient from a single forward transform.
    pub fn evaluate(&self, u: &Field) -> Result<(EnergyParts, Field)> {
        self.check(u)?;
        let dv = self.grid.cell_volume();
        let mut coeffs = fft::forward(&self.grid, u.values());
        let mut kin = 0.0;
        for (c, &m) in coeffs.iter_mut().zip(&self.symbol) {
            kin += m * c.norm_sqr();
            *c *= m;
        }
        let mut g = fft::inverse_real(&self.grid, coeffs);
        let (mut pot, mut nonlin) = (0.0, 0.0);
        for (i, (gi, &x)) in g.iter_mut().zip(u.values()).enumerate() {
            let (c, w) = (self.potential.at(i), self.weight.at(i));
            let (f, big_f) = self.nl.f_and_f_primitive(x);
            pot += c * x * x;
            nonlin += w * big_f;
            *gi += c * x - w * f;
        }
        let parts = EnergyParts {
            kinetic: kin * dv / self.grid.len() as f64,
            potential: pot * dv,
            nonlinear: nonlin * dv,
        };
        Ok((parts, Field::from_parts(self.grid.clone(), g)))
    }

    /// `E(v) - E(u)` evaluated without cancellation between the two energies.
    ///
    /// Quadratic terms use `|v|^2 - |u|^2 = <v - u, v + u>`; the nonlinear term
    /// integrates `f` along the segment when the two samples are close.
    pub fn energy_difference(&self, u: &Field, v: &Field) -> Result<f64> {
        self.lagrangian_difference(u, v, 0.0)
    }

    /// `L(v) - L(u)` for `L = E - (lambda / 2) |.|_2^2`, evaluated like
    /// [`energy_difference`](Self::energy_difference). On the sphere it equals
    /// the energy difference, but is insensitive to first order to rounding
    /// in the mass.
    pub fn lagrangian_difference(&self, u: &Field, v: &Field, lambda: f64) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let dv = self.grid.cell_volume();
        let delta: Vec<f64> = v
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a - b)
            .collect();
        let sum: Vec<f64> = v
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a + b)
            .collect();
        let dh = fft::forward(&self.grid, &delta);
        let sh = fft::forward(&self.grid, &sum);
        let dkin: f64 = dh
            .iter()
            .zip(&sh)
            .zip(&self.symbol)
            .map(|((d, s), &m)| m * (d.re * s.re + d.im * s.im))
            .sum::<f64>()
            * dv
            / self.grid.len() as f64;
        let (mut dpot, mut dnl) = (0.0, 0.0);
        for i in 0..delta.len() {
            let (a, b) = (u.values()[i], v.values()[i]);
            dpot += (self.potential.at(i) - lambda) * delta[i] * sum[i];
            dnl += self.weight.at(i) * self.primitive_difference(a, b);
        }
        Ok(0.5 * dkin + 0.5 * dpot * dv - dnl * dv)
    }

    fn primitive_difference(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        if d == 0.0 {
            return 0.0;
        }
        let close = a * b > 0.0 && d.abs() <= 0.1 * a.abs().min(b.abs());
        if !close {
            return self.nl.primitive(b) - self.nl.primitive(a);
        }
        // 4-point Gauss-Legendre on [0, 1]
        const NODES: [f64; 4] = [
            0.069_431_844_202_973_71,
            0.330_009_478_207_571_87,
            0.669_990_521_792_428_1,
            0.930_568_155_797_026_3,
        ];
        const WEIGHTS: [f64; 4] = [
            0.173_927_422_568_726_93,
            0.326_072_577_431_273_07,
            0.326_072_577_431_273_07,
            0.173_927_422_568_726_93,
        ];
        let mut acc = 0.0;
        for (t, w) in NODES.iter().zip(WEIGHTS) {
            acc += w * self.nl.f(a + t * d);
        }
        acc * d
    }

    /// `lambda = <grad E(u), u> / |u|_2^2`.
    pub fn lagrange_multiplier(&self, u: &Field) -> Result<f64> {
        let g = self.gradient(u)?;
        let m = spectral::mass(u);
        if m == 0.0 {
            return Err(Error::Degenerate("Lagrange multiplier of the zero field"));
        }
        Ok(g.inner(u) / m)
    }

    /// Pohozaev residual `K + (N mu / s) int F - (N mu / 2s) int f(u) u` of
    /// the (autonomous or frozen) problem.
    pub fn pohozaev_residual(&self, u: &Field) -> Result<PohozaevResidual> {
        let (_, mu) = self.autonomous_params().ok_or_else(|| {
            Error::Usage("the Pohozaev identity applies to the autonomous problem".into())
        })?;
        self.check(u)?;
        let dv = self.grid.cell_volume();
        let kinetic = spectral::seminorm_with_symbol(u, &self.symbol);
        let (mut int_f, mut int_fu) = (0.0, 0.0);
        for &x in u.values() {
            let (f, big_f) = self.nl.f_and_f_primitive(x);
            int_f += big_f;
            int_fu += f * x;
        }
        let n = self.grid.dim() as f64;
        let residual =
            kinetic + n * mu / self.s * int_f * dv - n * mu / (2.0 * self.s) * int_fu * dv;
        Ok(PohozaevResidual {
            residual,
            kinetic,
            relative: if kinetic > 0.0 {
                residual / kinetic
            } else {
                f64::NAN
            },
        })
    }

    /// Energy along the dilation fiber `tau * u`.
    pub fn dilation_energy_profile(
        &self,
        u: &Field,
        taus: &[f64],
        tau_max: f64,
    ) -> Result<Vec<ProfilePoint>> {
        let (eta, mu) = self.autonomous_params().ok_or_else(|| {
            Error::Usage("dilation profiles are defined for the autonomous problem".into())
        })?;
        let parts = self.parts(u)?;
        let a = spectral::mass(u);
        let n = self.grid.dim() as f64;
        let int_f = parts.nonlinear / mu;
        let pure = self.nl.form() == NonlinearityForm::PurePower;
        taus.iter()
            .map(|&tau| {
                let d = dilate_with_limit(u, tau, tau_max)?;
                let energy = self.parts_unchecked(&d.field).total();
                let closed_form = pure.then(|| {
                    0.5 * (2.0 * self.s * tau).exp() * parts.kinetic + 0.5 * eta * a
                        - mu * ((self.nl.q() - 2.0) * n * tau / 2.0).exp() * int_f
                });
                Ok(ProfilePoint {
                    tau,
                    energy,
                    closed_form,
                    mass_rel_error: d.mass_rel_error,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResidual {
    pub residual: f64,
    pub kinetic: f64,
    /// `residual / kinetic`
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tau: f64,
    /// Energy of the resampled field.
    pub energy: f64,
    /// Continuum scaling law, available for pure powers.
    pub closed_form: Option<f64>,
    pub mass_rel_error: f64,
}

/// Gagliardo–Nirenberg interpolation exponent `N (alpha - 2) / (4 s)`.
pub fn gns_exponent(alpha: f64, s: f64, dim: usize) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::parameter(
            "alpha",
            format!("must exceed 2, got {alpha}"),
        ));
    }
    check_order(s)?;
    Ok(dim as f64 * (alpha - 2.0) / (4.0 * s))
}

/// Pohozaev residual of a pure power, `K - N mu (q - 2) / (2 s q) int c_q |u|^q`.
pub fn pohozaev_pure_power(
    kinetic: f64,
    int_abs_pow_q: f64,
    c_q: f64,
    q: f64,
    mu: f64,
    s: f64,
    dim: usize,
) -> f64 {
    kinetic - dim as f64 * mu * (q - 2.0) / (2.0 * s * q) * c_q * int_abs_pow_q
}
