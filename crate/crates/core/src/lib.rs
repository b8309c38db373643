//! Numerical laboratory for the regularized bilinear cone multiplier on the
//! plane: periodic-grid spectral tools, the dyadic pieces of the multiplier
//! and their factorized application, square functions, maximal operators,
//! frequency-region geometry and an experiment harness.

pub mod bumps;
pub mod error;
mod fft;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod maximal;
pub mod operators;
pub mod quadrature;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use spectral::{Field, GridSpec, Repr};
pub use symbols::ExponentParams;
