use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of the periodic box `[-L/2, L/2)` sampled at `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub length: f64,
    pub points: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Node coordinate `-L/2 + j h`. The origin is node `n/2`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Signed mode index in `[-n/2, n/2)` for FFT slot `j`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.length
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.points / 2
    }
}

/// Uniform periodic discretization of a box in `R^N`, stored row-major with
/// the last axis contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(lengths: &[f64], points: &[usize]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() != points.len() {
            return Err(Error::parameter(
                "grid",
                format!(
                    "need one length and one point count per axis, got {} and {}",
                    lengths.len(),
                    points.len()
                ),
            ));
        }
        let mut axes = Vec::with_capacity(lengths.len());
        for (&length, &n) in lengths.iter().zip(points) {
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::parameter(
                    "box_length",
                    format!("must be > 0, got {length}"),
                ));
            }
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::parameter(
                    "points",
                    format!("must be a power of two >= 8, got {n}"),
                ));
            }
            axes.push(Axis { length, points: n });
        }
        Ok(Grid { axes })
    }

    /// Same length and resolution on every axis.
    pub fn cube(dim: usize, length: f64, points: usize) -> Result<Self> {
        Grid::new(&vec![length; dim], &vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    /// Total number of cells, `prod n_j`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    /// Multi-index of a flat offset.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = flat % axis.points;
            flat /= axis.points;
        }
    }

    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let mut flat = flat;
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis.coordinate(flat % axis.points);
            flat /= axis.points;
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(flat, &mut x);
        x
    }

    /// `|k|^2` at every FFT slot, in flat order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; self.dim()];
        for (flat, slot) in out.iter_mut().enumerate() {
            self.unravel(flat, &mut idx);
            *slot = self
                .axes
                .iter()
                .zip(&idx)
                .map(|(a, &j)| a.wavenumber(j).powi(2))
                .sum();
        }
        out
    }

    /// Fourier symbol `|k|^{2s}` in flat order.
    pub fn frac_symbol(&self, s: f64) -> Vec<f64> {
        self.wavenumber_sq()
            .into_iter()
            .map(|k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
            .collect()
    }

    /// Whether `x` lies in the closed box `[-L/2, L/2]^N`.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(a, &xi)| xi.abs() <= 0.5 * a.length)
    }

    /// Fraction of the box (per axis, relative to the half-length) beyond which
    /// a node counts as part of the outer shell.
    pub fn in_outer_shell(&self, flat: usize, shell: f64) -> bool {
        let mut flat = flat;
        for axis in self.axes.iter().rev() {
            let x = axis.coordinate(flat % axis.points);
            flat /= axis.points;
            if x.abs() >= (1.0 - shell) * 0.5 * axis.length {
                return true;
            }
        }
        false
    }
}
