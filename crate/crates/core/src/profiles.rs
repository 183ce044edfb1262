//! Named analytic metric families used as fixtures and in configs.

use crate::error::{invalid, Result};
use crate::geometry::WarpedMetric;

/// Uniform grid `0, h, …, x_max` with `intervals` cells.
pub fn uniform_grid(x_max: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| x_max * i as f64 / intervals as f64).collect()
}

/// Analytic profile families.
///
/// The mass-function families use `ψ = x` and `φ = (1 - 2m(x)/x)^{-1/2}`;
/// in dimension 3 their scalar curvature is `4 m'(x)/x²`, so a nondecreasing
/// mass function gives `R ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Flat,
    /// Round sphere of the given radius, valid for `x < π·radius`.
    SphereCap { radius: f64 },
    /// `ψ = ρ tanh(x/ρ)`: a cap opening into a cylinder of radius `ρ`.
    Cylinder { radius: f64 },
    /// `m = M x³ / (x² + σ²)^{3/2}`: Schwarzschild-like tail of mass `M`.
    Schwarzschild { mass: f64, core: f64 },
    /// `m = M (1 - e^{-x²/σ²})^{3/2}`: a Gaussian bump of scalar curvature.
    GaussianBump { mass: f64, width: f64 },
    /// `m = (1-δ)/2 · x³/(x² + a²) · (1 + x²/X²)^{-1/2}`: a long thin neck
    /// between radii `a` and `X` opening into an AF end.
    DeepWell { delta: f64, core: f64, neck: f64 },
}

impl Profile {
    /// Mass function of the mass-profile families.
    pub fn mass(&self, x: f64) -> Option<f64> {
        match *self {
            Profile::Schwarzschild { mass, core } => {
                Some(mass * x * x * x / (x * x + core * core).powf(1.5))
            }
            Profile::GaussianBump { mass, width } => {
                let q = x / width;
                Some(mass * (1.0 - (-q * q).exp()).powf(1.5))
            }
            Profile::DeepWell { delta, core, neck } => Some(
                0.5 * (1.0 - delta) * x * x * x / (x * x + core * core)
                    / (1.0 + (x / neck).powi(2)).sqrt(),
            ),
            _ => None,
        }
    }

    /// `2m(x)/x`, continuous at the origin.
    fn compactness(&self, x: f64) -> f64 {
        match *self {
            Profile::Schwarzschild { mass, core } => {
                2.0 * mass * x * x / (x * x + core * core).powf(1.5)
            }
            Profile::GaussianBump { .. } => {
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * self.mass(x).unwrap() / x
                }
            }
            Profile::DeepWell { delta, core, neck } => {
                (1.0 - delta) * x * x / (x * x + core * core) / (1.0 + (x / neck).powi(2)).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Samples `(φ, ψ)` at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        Ok(match *self {
            Profile::Flat => (1.0, x),
            Profile::SphereCap { radius } => {
                if x >= std::f64::consts::PI * radius {
                    return invalid("sphere cap grid reaches the antipode");
                }
                (1.0, radius * (x / radius).sin())
            }
            Profile::Cylinder { radius } => (1.0, radius * (x / radius).tanh()),
            _ => {
                let c = self.compactness(x);
                if !(c < 1.0) {
                    return invalid(format!("2m/x = {c} >= 1 at x = {x}: horizon inside grid"));
                }
                ((1.0 - c).powf(-0.5), x)
            }
        })
    }

    pub fn build(&self, n: usize, grid: &[f64]) -> Result<WarpedMetric> {
        match *self {
            Profile::SphereCap { radius } | Profile::Cylinder { radius } if !(radius > 0.0) => {
                return invalid("radius must be positive")
            }
            Profile::Schwarzschild { mass, core } if !(mass >= 0.0 && core > 0.0) => {
                return invalid("need mass >= 0, core > 0")
            }
            Profile::GaussianBump { mass, width } if !(mass >= 0.0 && width > 0.0) => {
                return invalid("need mass >= 0, width > 0")
            }
            Profile::DeepWell { delta, core, neck }
                if !(delta > 0.0 && delta < 1.0 && core > 0.0 && neck > core) =>
            {
                return invalid("need 0 < delta < 1 and 0 < core < neck")
            }
            _ => {}
        }
        let mut phi = Vec::with_capacity(grid.len());
        let mut psi = Vec::with_capacity(grid.len());
        for &x in grid {
            let (p, s) = self.eval(x)?;
            phi.push(p);
            psi.push(s);
        }
        psi[0] = 0.0;
        WarpedMetric::new(n, grid.to_vec(), phi, psi)
    }

    /// AF order of the family's tail, where it has one.
    pub fn af_order(&self) -> Option<f64> {
        match self {
            Profile::Flat => None,
            Profile::Schwarzschild { .. } | Profile::GaussianBump { .. } | Profile::DeepWell { .. } => {
                Some(1.0)
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Flat => "flat",
            Profile::SphereCap { .. } => "sphere-cap",
            Profile::Cylinder { .. } => "cylinder",
            Profile::Schwarzschild { .. } => "schwarzschild",
            Profile::GaussianBump { .. } => "gaussian-bump",
            Profile::DeepWell { .. } => "deep-well",
        }
    }
}
