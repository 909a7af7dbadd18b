//! Shared numerical kernels: quadrature, root finding, piecewise functions.

pub mod brent;
pub mod pwc;
pub mod quad;
