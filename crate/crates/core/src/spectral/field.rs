use num_complex::Complex64;

use super::fft;
use super::grid::Grid;
use crate::error::{Error, Result};

/// A real function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::parameter(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::parameter(
                "values",
                format!("non-finite sample at {i}"),
            ));
        }
        Ok(Field { grid, values })
    }

    /// Internal constructor for values already known to be well formed.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Field { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_into(i, &mut x);
                f(&x)
            })
            .collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    /// Isotropic Gaussian `exp(-|x - c|^2 / (2 w^2))`.
    pub fn gaussian(grid: &Grid, center: &[f64], width: f64) -> Self {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            (-0.5 * r2 / (width * width)).exp()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `L^2` inner product with nodal quadrature.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        dot(&self.values, &other.values) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(-1.0, other)
    }

    pub fn spectrum(&self) -> SpectralCoeffs {
        SpectralCoeffs {
            grid: self.grid.clone(),
            coeffs: fft::forward(&self.grid, &self.values),
        }
    }
}

/// DFT coefficients of a real field.
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Largest violation of `c_{-k} = conj(c_k)` relative to the largest coefficient.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let dims: Vec<usize> = self.grid.axes().iter().map(|a| a.points).collect();
        let mut idx = vec![0usize; dims.len()];
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (flat, c) in self.coeffs.iter().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let mirror = idx
                .iter()
                .zip(&dims)
                .fold(0usize, |acc, (&j, &n)| acc * n + (n - j) % n);
            worst = worst.max((c - self.coeffs[mirror].conj()).norm());
        }
        worst / scale
    }

    pub fn to_field(&self) -> Field {
        Field::from_parts(
            self.grid.clone(),
            fft::inverse_real(&self.grid, self.coeffs.clone()),
        )
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::cube(1, 1.0, 8).unwrap();
        assert!(Field::new(g.clone(), vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn real_field_spectrum_is_conjugate_symmetric() {
        let g = Grid::new(&[3.0, 5.0], &[8, 16]).unwrap();
        let u = Field::from_fn(&g, |x| (x[0] * 1.3).sin() + x[1] * x[0] + 0.2);
        let spec = u.spectrum();
        assert!(spec.conjugate_asymmetry() < 1e-12);
        let back = spec.to_field();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
