//! Pseudospectral laboratory for the generalized derivative nonlinear
//! Schrödinger equation
//!
//! ```text
//! i∂_t u + ∂_x² u + i|u|^{2σ} ∂_x u = 0
//! ```
//!
//! on a large periodic box: gauge transform, integrating-factor time stepping,
//! the normal-form transform with high-frequency cutoff, space-time norms and
//! the numerical construction of the wave operator.

pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod normal_form;
mod quadrature;
pub mod spacetime_norms;
pub mod spectral_grid;
pub mod wave_operator;

pub use error::{Error, Result};
pub use spectral_grid::{make_grid, Field, Grid, Spectrum, C64};
