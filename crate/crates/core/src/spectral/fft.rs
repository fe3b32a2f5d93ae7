//! Multi-dimensional FFTs on a [`Grid`], built from cached 1-D plans.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::grid::Grid;

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, direction: FftDirection) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (len, matches!(direction, FftDirection::Forward));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(len, direction))
        .clone()
}

/// Unnormalized in-place transform along every axis.
fn transform(grid: &Grid, data: &mut [Complex64], direction: FftDirection) {
    debug_assert_eq!(data.len(), grid.len());
    let dims: Vec<usize> = grid.axes().iter().map(|a| a.points).collect();
    let total = data.len();
    for (k, &n) in dims.iter().enumerate() {
        let fft = plan(n, direction);
        let stride: usize = dims[k + 1..].iter().product();
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Forward DFT of a real array: `c_k = sum_j u_j exp(-i k.x_j)` with nodes
/// indexed from zero.
pub fn forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, FftDirection::Forward);
    data
}

pub fn forward_complex(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, FftDirection::Forward);
}

/// Normalized inverse DFT, returning the real part.
pub fn inverse_real(grid: &Grid, mut coeffs: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut coeffs, FftDirection::Inverse);
    let scale = 1.0 / grid.len() as f64;
    coeffs.into_iter().map(|c| c.re * scale).collect()
}

/// Normalized inverse DFT keeping the complex result.
pub fn inverse_complex(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, FftDirection::Inverse);
    let scale = 1.0 / grid.len() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
}

/// Multiply the spectrum of `values` by a real even symbol and transform back.
pub fn apply_symbol(grid: &Grid, values: &[f64], symbol: &[f64]) -> Vec<f64> {
    let mut coeffs = forward(grid, values);
    for (c, &m) in coeffs.iter_mut().zip(symbol) {
        *c *= m;
    }
    inverse_real(grid, coeffs)
}
