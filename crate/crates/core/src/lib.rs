//! Numerical laboratory for the scale-invariant log-Sobolev functional on
//! rotationally symmetric manifolds: curvature, functionals, minimizers,
//! Ricci flow with conjugate-heat entropy audits, and noncollapsing scans.

pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod interp;
pub mod minimizer;
pub mod noncollapse;
pub mod profiles;
pub mod stencil;

pub use error::{Error, Result};
pub use geometry::{CurvatureData, RadialFunction, WarpedMetric};
pub use profiles::{uniform_grid, Profile};
