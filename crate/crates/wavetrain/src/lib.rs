//! Two-scale asymptotics for the 1-D wave equation with rapidly oscillating
//! periodic coefficients.
//!
//! The library follows one pipeline: resolve the spectrum of the unit-cell
//! Bloch eigenproblem (numerically, or in closed form in the high-contrast
//! limit), propagate slowly varying phases and amplitudes along the rays of
//! the resulting dispersion relation, reconstruct the oscillatory field by
//! stationary phase, and cross-check everything against a fine-scale
//! finite-difference reference solve.

pub mod branch;
pub mod cell_spectrum;
pub mod coefficient;
pub mod diagnostics;
pub mod eikonal;
pub mod error;
pub mod high_contrast;
pub mod quadrature;
pub mod reference;
pub mod wavepacket;

pub use branch::{Dispersion, LimitBranch, NumericBranch};
pub use coefficient::CellCoefficient;
pub use error::{Error, Result};
