use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft;
use super::field::{dot, Field};
use super::grid::{Axis, Grid};
use crate::error::{Error, Result};

/// Default bound on `|tau|` for [`dilate`].
pub const DEFAULT_TAU_MAX: f64 = 3.0;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::parameter(
            "s",
            format!("fractional order must lie in (0, 1], got {s}"),
        ))
    }
}

/// `(-Delta)^s u` through the Fourier multiplier `|k|^{2s}`.
pub fn frac_laplacian(u: &Field, s: f64) -> Result<Field> {
    check_order(s)?;
    let symbol = u.grid().frac_symbol(s);
    Ok(Field::from_parts(
        u.grid().clone(),
        fft::apply_symbol(u.grid(), u.values(), &symbol),
    ))
}

/// `int |(-Delta)^{s/2} u|^2`, evaluated on the spectral side.
pub fn hs_seminorm_sq(u: &Field, s: f64) -> Result<f64> {
    check_order(s)?;
    let symbol = u.grid().frac_symbol(s);
    Ok(seminorm_with_symbol(u, &symbol))
}

pub(crate) fn seminorm_with_symbol(u: &Field, symbol: &[f64]) -> f64 {
    let coeffs = fft::forward(u.grid(), u.values());
    let sum: f64 = coeffs
        .iter()
        .zip(symbol)
        .map(|(c, &m)| m * c.norm_sqr())
        .sum();
    sum * u.grid().cell_volume() / u.grid().len() as f64
}

/// `int |u|^2` by the nodal rule on the periodic grid.
pub fn mass(u: &Field) -> f64 {
    dot(u.values(), u.values()) * u.grid().cell_volume()
}

/// Share of the mass carried by nodes in the outer `shell` fraction of the box.
pub fn boundary_mass_fraction(u: &Field, shell: f64) -> f64 {
    let total = dot(u.values(), u.values());
    if total == 0.0 {
        return 0.0;
    }
    let edge: f64 = u
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| u.grid().in_outer_shell(*i, shell))
        .map(|(_, v)| v * v)
        .sum();
    edge / total
}

/// Periodic translate `u(x - shift)` by a spectral phase shift.
///
/// The Nyquist mode of an even-length axis has no real phase rotation, so it
/// is multiplied by `(-1)^m` with `m` the nearest whole number of cells in the
/// shift. The map is unitary and agrees with an index roll for grid shifts.
pub fn translate(u: &Field, shift: &[f64]) -> Field {
    let grid = u.grid();
    assert_eq!(
        shift.len(),
        grid.dim(),
        "shift dimension must match the grid"
    );
    let mut coeffs = fft::forward(grid, u.values());
    let factors: Vec<Vec<Complex64>> = grid
        .axes()
        .iter()
        .zip(shift)
        .map(|(axis, &y)| axis_phase(axis, y))
        .collect();
    let mut idx = vec![0usize; grid.dim()];
    for (flat, c) in coeffs.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        for (k, &j) in idx.iter().enumerate() {
            *c *= factors[k][j];
        }
    }
    Field::from_parts(grid.clone(), fft::inverse_real(grid, coeffs))
}

fn axis_phase(axis: &Axis, y: f64) -> Vec<Complex64> {
    (0..axis.points)
        .map(|j| {
            if axis.is_nyquist(j) {
                let cells = (y / axis.spacing()).round() as i64;
                Complex64::new(if cells.rem_euclid(2) == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::from_polar(1.0, -axis.wavenumber(j) * y)
            }
        })
        .collect()
}

/// Result of [`dilate`]: the rescaled field and its discrete mass drift.
#[derive(Debug, Clone)]
pub struct Dilated {
    pub field: Field,
    /// `|mass(out) - mass(in)| / mass(in)`; zero in the continuum.
    pub mass_rel_error: f64,
}

/// Mass-preserving dilation `(tau * u)(x) = e^{N tau/2} u(e^tau x)`.
///
/// The trigonometric interpolant of `u` is evaluated at `e^tau x`; sample
/// points that leave the box read zero.
pub fn dilate(u: &Field, tau: f64) -> Result<Dilated> {
    dilate_with_limit(u, tau, DEFAULT_TAU_MAX)
}

pub fn dilate_with_limit(u: &Field, tau: f64, tau_max: f64) -> Result<Dilated> {
    if !tau.is_finite() || tau.abs() > tau_max {
        return Err(Error::Range { tau, tau_max });
    }
    let grid = u.grid();
    let stretch = tau.exp();
    let mut values = u.values().to_vec();
    for k in 0..grid.dim() {
        values = resample_axis(grid, &values, k, |x| stretch * x);
    }
    let amp = (0.5 * grid.dim() as f64 * tau).exp();
    for v in values.iter_mut() {
        *v *= amp;
    }
    let field = Field::from_parts(grid.clone(), values);
    let m0 = mass(u);
    let mass_rel_error = if m0 > 0.0 {
        (mass(&field) - m0).abs() / m0
    } else {
        0.0
    };
    Ok(Dilated {
        field,
        mass_rel_error,
    })
}

/// Replaces every line along `axis` by its interpolant sampled at `map(x)`.
fn resample_axis(grid: &Grid, values: &[f64], axis: usize, map: impl Fn(f64) -> f64) -> Vec<f64> {
    let ax = grid.axis(axis);
    let n = ax.points;
    let stride: usize = grid.axes()[axis + 1..].iter().map(|a| a.points).product();
    let kernel = InterpKernel::new(ax);
    let targets: Vec<f64> = (0..n).map(|i| map(ax.coordinate(i))).collect();
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; n];
    for outer in (0..values.len()).step_by(n * stride) {
        for inner in 0..stride {
            let base = outer + inner;
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = values[base + j * stride];
            }
            for (i, &y) in targets.iter().enumerate() {
                out[base + i * stride] = kernel.eval(&line, y);
            }
        }
    }
    out
}

/// Periodic band-limited interpolation on one axis, with the Nyquist mode
/// split symmetrically: `S(d) = sin(pi d / h) / (n tan(pi d / L))`.
struct InterpKernel {
    axis: Axis,
    sin_b: Vec<f64>,
    cos_b: Vec<f64>,
}

impl InterpKernel {
    fn new(axis: &Axis) -> Self {
        let n = axis.points;
        let (sin_b, cos_b) = (0..n)
            .map(|j| {
                let b = PI * j as f64 / n as f64;
                (b.sin(), b.cos())
            })
            .unzip();
        InterpKernel {
            axis: *axis,
            sin_b,
            cos_b,
        }
    }

    fn eval(&self, line: &[f64], y: f64) -> f64 {
        let half = 0.5 * self.axis.length;
        if y.abs() > half * (1.0 + 1e-14) {
            return 0.0;
        }
        let n = self.axis.points;
        let h = self.axis.spacing();
        let offset = y + half;
        let nearest = (offset / h).round();
        if (offset - nearest * h).abs() <= 1e-10 * h {
            return line[(nearest as i64).rem_euclid(n as i64) as usize];
        }
        let sin_a = (PI * offset / h).sin();
        let phi = PI * offset / self.axis.length;
        let (sin_phi, cos_phi) = phi.sin_cos();
        let mut acc = 0.0;
        for (j, &u) in line.iter().enumerate() {
            let sin_t = sin_phi * self.cos_b[j] - cos_phi * self.sin_b[j];
            let cos_t = cos_phi * self.cos_b[j] + sin_phi * self.sin_b[j];
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * u * cos_t / sin_t;
        }
        acc * sin_a / n as f64
    }
}
