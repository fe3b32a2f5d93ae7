//! Periodic-box discretization, Fourier transforms, and the operators built
//! on them: the fractional Laplacian, translations and dilations.

pub mod fft;
mod field;
mod grid;
mod ops;

pub use field::{Field, SpectralCoeffs};
pub use grid::{Axis, Grid};
pub use ops::{
    boundary_mass_fraction, dilate, dilate_with_limit, frac_laplacian, hs_seminorm_sq, mass,
    translate, Dilated, DEFAULT_TAU_MAX,
};
pub(crate) use ops::{check_order, seminorm_with_symbol};
