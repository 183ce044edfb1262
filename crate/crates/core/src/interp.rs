//! Local cubic interpolation of radial samples with parity at the origin.

use crate::error::{Error, Result};
use crate::stencil::Parity;

/// Index `i` with `grid[i] <= x < grid[i + 1]` (clamped to the last cell).
pub fn locate(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

/// Four-point Lagrange interpolation; ghost nodes `-x_k` carry `±f_k`.
pub fn cubic(grid: &[f64], f: &[f64], parity: Parity, x: f64) -> Result<f64> {
    let n = grid.len();
    let span = grid[n - 1];
    let tol = 1e-12 * span.max(1.0);
    if !(x >= -tol && x <= span + tol) {
        return Err(Error::OutOfDomain(format!(
            "interpolation point {x} outside [0, {span}]"
        )));
    }
    let x = x.clamp(0.0, span);
    let i = locate(grid, x) as isize;
    let last = (n - 1) as isize;
    let start = (i - 1).min(last - 3);
    let mut acc = 0.0;
    let nodes: [isize; 4] = std::array::from_fn(|k| start + k as isize);
    let at = |j: isize| -> (f64, f64) {
        if j >= 0 {
            (grid[j as usize], f[j as usize])
        } else {
            let v = f[(-j) as usize];
            let v = match parity {
                Parity::Even => v,
                Parity::Odd => -v,
            };
            (-grid[(-j) as usize], v)
        }
    };
    for &j in &nodes {
        let (xj, fj) = at(j);
        let mut basis = 1.0;
        for &k in &nodes {
            if k != j {
                let (xk, _) = at(k);
                basis *= (x - xk) / (xj - xk);
            }
        }
        acc += basis * fj;
    }
    Ok(acc)
}

/// Piecewise-linear interpolation of `f` against a monotone abscissa `t`.
pub fn linear(t: &[f64], f: &[f64], x: f64) -> f64 {
    let i = locate(t, x);
    let w = (x - t[i]) / (t[i + 1] - t[i]);
    f[i] + w * (f[i + 1] - f[i])
}
