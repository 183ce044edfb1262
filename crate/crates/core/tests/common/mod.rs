//! Independent closed-form oracles shared by the integration tests.
#![allow(dead_code)]

use entroflow_core::Profile;

/// Symbolic sectional curvatures `(K1, K2)` of the analytic profiles at `x`.
pub fn symbolic_curvature(p: &Profile, x: f64) -> (f64, f64) {
    match *p {
        Profile::Flat => (0.0, 0.0),
        Profile::SphereCap { radius } => (1.0 / (radius * radius), 1.0 / (radius * radius)),
        Profile::Cylinder { radius } => {
            let sech2 = 1.0 / (x / radius).cosh().powi(2);
            (2.0 * sech2 / (radius * radius), (1.0 + sech2) / (radius * radius))
        }
        Profile::Schwarzschild { mass, core } => {
            let q = x * x + core * core;
            let k2 = 2.0 * mass * q.powf(-1.5);
            let k1 = 3.0 * mass * core * core * q.powf(-2.5) - mass * q.powf(-1.5);
            (k1, k2)
        }
        Profile::GaussianBump { mass, width } => {
            if x == 0.0 {
                let c = 2.0 * mass / width.powi(3);
                return (c, c);
            }
            let q2 = (x / width).powi(2);
            let e = -(-q2).exp_m1();
            let m = mass * e.powf(1.5);
            let dm = 3.0 * mass * e.sqrt() * (-q2).exp() * x / (width * width);
            (dm / (x * x) - m / x.powi(3), 2.0 * m / x.powi(3))
        }
        Profile::DeepWell { .. } => panic!("no symbolic oracle for the deep well"),
    }
}

/// Scalar curvature in dimension `n` from sectional curvatures.
pub fn scalar(n: usize, k1: f64, k2: f64) -> f64 {
    let n = n as f64;
    (n - 1.0) * (2.0 * k1 + (n - 2.0) * k2)
}
