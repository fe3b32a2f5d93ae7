//! Independent reference implementations used as test oracles.
//!
//! Nothing here goes through the library's spectral or optimizer code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Wavenumber of DFT index `j` on `n` points over length `l`.
pub fn wavenumber(j: usize, n: usize, l: f64) -> f64 {
    let m = if j < n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    };
    2.0 * PI * m / l
}

/// Dense matrix of the multiplier `|k|^{2s}` built from explicit DFT sums.
pub fn dense_frac_laplacian(n: usize, l: f64, s: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                let k = wavenumber(j, n, l);
                let sym = if k == 0.0 { 0.0 } else { k.abs().powf(2.0 * s) };
                acc += sym * (2.0 * PI * (j * (r + n - c)) as f64 / n as f64).cos();
            }
            *entry = acc / n as f64;
        }
    }
    m
}

/// One-dimensional autonomous model `1/2 K + eta/2 |u|^2 - mu/q int |u|^q`.
#[derive(Debug, Clone, Copy)]
pub struct Model1d {
    pub l: f64,
    pub n: usize,
    pub s: f64,
    pub q: f64,
    pub eta: f64,
    pub mu: f64,
    pub mass: f64,
}

impl Model1d {
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    fn symbol(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| wavenumber(j, self.n, self.l).abs().powf(2.0 * self.s))
            .collect()
    }

    fn fft(&self, u: &[f64], inverse: bool) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft_c(&mut buf, inverse);
        buf
    }

    fn fft_c(&self, buf: &mut [Complex64], inverse: bool) {
        let mut planner = FftPlanner::new();
        let plan = if inverse {
            planner.plan_fft_inverse(self.n)
        } else {
            planner.plan_fft_forward(self.n)
        };
        plan.process(buf);
    }

    pub fn normalize(&self, u: &mut [f64]) {
        let m: f64 = u.iter().map(|x| x * x).sum::<f64>() * self.h();
        let c = (self.mass / m).sqrt();
        u.iter_mut().for_each(|x| *x *= c);
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let sym = self.symbol();
        let uh = self.fft(u, false);
        let kin: f64 = uh
            .iter()
            .zip(&sym)
            .map(|(c, m)| m * c.norm_sqr())
            .sum::<f64>()
            * self.h()
            / self.n as f64;
        let pot: f64 = u.iter().map(|x| x * x).sum::<f64>() * self.h();
        let nl: f64 = u.iter().map(|x| x.abs().powf(self.q)).sum::<f64>() * self.h() / self.q;
        0.5 * kin + 0.5 * self.eta * pot - self.mu * nl
    }

    /// `L^2` gradient `(-Delta)^s u + eta u - mu |u|^{q-2} u`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let sym = self.symbol();
        let mut c = self.fft(u, false);
        for (ci, m) in c.iter_mut().zip(&sym) {
            *ci *= m;
        }
        self.fft_c(&mut c, true);
        c.iter()
            .zip(u)
            .map(|(z, &x)| {
                z.re / self.n as f64 + self.eta * x - self.mu * x.abs().powf(self.q - 2.0) * x
            })
            .collect()
    }

    /// Explicit projected gradient flow `u <- normalize(u - dt (g - lambda u))`
    /// with a fixed step, until `|g - lambda u|_2 < tol`.
    pub fn gradient_flow(&self, mut u: Vec<f64>, dt: f64, tol: f64, max_iters: usize) -> Vec<f64> {
        self.normalize(&mut u);
        for _ in 0..max_iters {
            let g = self.gradient(&u);
            let lambda = g.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()
                / u.iter().map(|x| x * x).sum::<f64>();
            let r: Vec<f64> = g.iter().zip(&u).map(|(a, b)| a - lambda * b).collect();
            if (r.iter().map(|x| x * x).sum::<f64>() * self.h()).sqrt() < tol {
                break;
            }
            u.iter_mut().zip(&r).for_each(|(x, ri)| *x -= dt * ri);
            self.normalize(&mut u);
        }
        u
    }

    /// Largest stable explicit step for the kinetic term.
    pub fn stable_step(&self) -> f64 {
        let kmax = PI * self.n as f64 / self.l;
        1.0 / (kmax.powf(2.0 * self.s) + 1.0)
    }

    /// Trigonometric interpolation onto `n_fine` points by zero padding.
    pub fn refine(&self, u: &[f64], n_fine: usize) -> Vec<f64> {
        let c = self.fft(u, false);
        let mut big = vec![Complex64::new(0.0, 0.0); n_fine];
        let half = self.n / 2;
        for j in 0..self.n {
            if j == half {
                big[half] += 0.5 * c[j];
                big[n_fine - half] += 0.5 * c[j];
            } else if j < half {
                big[j] = c[j];
            } else {
                big[n_fine - self.n + j] = c[j];
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n_fine).process(&mut big);
        big.iter().map(|z| z.re / self.n as f64).collect()
    }
}

/// Coarse random-restart minimization refined on the fine grid; returns the
/// fine-grid energy.
pub fn coarse_oracle_energy(fine: &Model1d, n_coarse: usize, restarts: usize, seed: u64) -> f64 {
    let coarse = Model1d {
        n: n_coarse,
        ..*fine
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = coarse.h();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..restarts {
        let c = rng.gen_range(-4.0..4.0);
        let w = rng.gen_range(1.0..5.0);
        let u0: Vec<f64> = (0..n_coarse)
            .map(|j| {
                let x = -0.5 * coarse.l + j as f64 * h;
                (-(x - c) * (x - c) / (2.0 * w * w)).exp()
            })
            .collect();
        let u = coarse.gradient_flow(u0, coarse.stable_step(), 1e-9, 200_000);
        let e = coarse.energy(&u);
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, u));
        }
    }
    let (_, u) = best.expect("at least one restart");
    let mut start = coarse.refine(&u, fine.n);
    fine.normalize(&mut start);
    let u = fine.gradient_flow(start, fine.stable_step(), 1e-9, 1_000_000);
    fine.energy(&u)
}
