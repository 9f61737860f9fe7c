//! Numerical toolkit for Triebel-Lizorkin type spaces with variable
//! smoothness, integrability and Morrey-type exponents.

pub mod error;
pub mod grid;

pub use error::{Error, Result};
pub use grid::{DyadicCube, Grid, SampledField};
pub mod exponent;
pub mod lebesgue;
pub mod lp;
pub mod phi;
pub mod atoms;
pub mod lab;
pub mod config;

pub use exponent::{ExponentField, ExponentSpec};
pub use lebesgue::{InnerExponent, LayeredField, NormResult};
