//! Rotationally symmetric metrics `g = φ(x)² dx² + ψ(x)² g_{S^{n-1}}` sampled
//! on a radial grid, together with their curvature, volume measure and the
//! discrete quadrature every other module builds on.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::interp;
use crate::stencil::{Parity, Stencils};

/// Area of the unit `k`-sphere in `R^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    // ω_k = 2π ω_{k-2} / (k-1), ω_0 = 2, ω_1 = 2π
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI * unit_sphere_area(k - 2) / (k as f64 - 1.0),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n - 1) / n as f64
}

/// A grid-sampled radial scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.iter().map(|&x| f(x)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_aligned(&self, g: &WarpedMetric) -> Result<()> {
        if self.values.len() != g.len() {
            return invalid(format!(
                "radial function has {} samples, metric grid has {}",
                self.values.len(),
                g.len()
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return invalid("radial function has non-finite samples");
        }
        Ok(())
    }
}

/// Rotationally symmetric metric on a radial grid starting at the origin.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    n: usize,
    grid: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    af_order: Option<f64>,
    arclength: Vec<f64>,
}

impl WarpedMetric {
    pub fn new(n: usize, grid: Vec<f64>, phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return invalid(format!("dimension {n} < 3"));
        }
        if grid.len() < 5 {
            return invalid("grid needs at least 5 nodes");
        }
        if phi.len() != grid.len() || psi.len() != grid.len() {
            return invalid("phi/psi/grid length mismatch");
        }
        if grid[0] != 0.0 {
            return invalid("grid must start at the origin");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
            return invalid("grid must be strictly increasing");
        }
        if phi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return invalid("phi must be positive and finite");
        }
        if psi[0] != 0.0 {
            return invalid("psi must vanish at the origin");
        }
        if let Some(index) = psi.iter().skip(1).position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::DegenerateMetric { index: index + 1 });
        }
        let mut arclength = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            arclength[i] = arclength[i - 1] + 0.5 * (phi[i] + phi[i - 1]) * (grid[i] - grid[i - 1]);
        }
        Ok(Self { n, grid, phi, psi, af_order: None, arclength })
    }

    /// Attach an asymptotic-flatness order, checked against the fitted decay.
    pub fn with_af_order(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return invalid("AF order must be positive");
        }
        let fit = af_decay(&self)?;
        if !(fit.l_inf > 0.0 && fit.l_inf.is_finite()) {
            return invalid(format!("psi/s tends to {}, not a positive limit", fit.l_inf));
        }
        if let Some(order) = fit.order {
            if order < tau - AF_ORDER_TOL {
                return invalid(format!("fitted decay order {order:.3} below declared {tau}"));
            }
        }
        self.af_order = Some(tau);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
    pub fn af_order(&self) -> Option<f64> {
        self.af_order
    }
    /// Radial arclength `s(x_i)` from the origin.
    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }
    pub fn total_arclength(&self) -> f64 {
        *self.arclength.last().unwrap()
    }
    pub fn omega(&self) -> f64 {
        unit_sphere_area(self.n - 1)
    }
    pub fn min_ds(&self) -> f64 {
        self.arclength.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Deviation of `dψ/ds` from 1 at the origin (smoothness defect).
    pub fn origin_defect(&self) -> f64 {
        let st = Stencils::new(&self.grid);
        let d = st.d1(&self.psi, Parity::Odd);
        (d[0] / self.phi[0] - 1.0).abs()
    }

    /// Trapezoid quadrature weights `W_i` with `∫ h dg ≈ Σ W_i h(x_i)`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let w = volume_measure(self).values;
        let last = self.len() - 1;
        (0..=last)
            .map(|i| {
                let left = if i > 0 { self.grid[i] - self.grid[i - 1] } else { 0.0 };
                let right = if i < last { self.grid[i + 1] - self.grid[i] } else { 0.0 };
                0.5 * w[i] * (left + right)
            })
            .collect()
    }

    /// Edge conductances `c_{i+1/2}` with `∫ |∇v|² dg ≈ Σ c (v_{i+1} - v_i)²`.
    ///
    /// The geometric mean of `ψ^{n-1}` at the edge ends makes the induced
    /// Laplacian exact on quadratics at every node of flat `R^3`, including
    /// the first one off the origin.
    pub fn conductances(&self) -> Vec<f64> {
        let p = (self.n - 1) as f64 / 2.0;
        let omega = self.omega();
        (0..self.len() - 1)
            .map(|i| {
                let dx = self.grid[i + 1] - self.grid[i];
                let phi_mid = 0.5 * (self.phi[i] + self.phi[i + 1]);
                omega * (self.psi[i] * self.psi[i + 1]).powf(p) / (phi_mid * dx)
            })
            .collect()
    }

    /// Index of the node closest in arclength to `s`.
    pub fn node_at_arclength(&self, s: f64) -> Result<usize> {
        let total = self.total_arclength();
        if !(s >= 0.0) || s > total * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!("arclength {s} outside [0, {total}]")));
        }
        let i = interp::locate(&self.arclength, s);
        Ok(if s - self.arclength[i] <= self.arclength[i + 1] - s { i } else { i + 1 })
    }

    /// Samples `ψ` and `φ` of this metric at arbitrary coordinates.
    pub fn sample(&self, x: f64) -> Result<(f64, f64)> {
        let phi = interp::cubic(&self.grid, &self.phi, Parity::Even, x)?;
        let psi = interp::cubic(&self.grid, &self.psi, Parity::Odd, x)?;
        Ok((phi, psi))
    }
}

/// Sectional, Ricci and scalar curvature samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    /// Radial sectional curvature `-ψ_ss/ψ`.
    pub k1: Vec<f64>,
    /// Spherical sectional curvature `(1 - ψ_s²)/ψ²`.
    pub k2: Vec<f64>,
    pub ric_rad: Vec<f64>,
    pub ric_sph: Vec<f64>,
    pub r: Vec<f64>,
}

impl CurvatureData {
    pub fn max_abs(&self) -> f64 {
        self.k1
            .iter()
            .chain(&self.k2)
            .fold(0.0f64, |m, k| m.max(k.abs()))
    }
    pub fn min_r(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max_r(&self) -> f64 {
        self.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Arclength derivatives of `ψ` and the sectional curvatures at every node.
#[derive(Debug, Clone)]
pub(crate) struct ProfileDerivatives {
    pub psi_s: Vec<f64>,
    pub psi_ss: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

/// Even extrapolation `f(0)` from nodes 1..=3 using a quadratic in `s²`.
pub(crate) fn even_extrapolate(s: &[f64], f: &[f64]) -> f64 {
    let z = [s[1] * s[1], s[2] * s[2], s[3] * s[3]];
    let mut acc = 0.0;
    for j in 0..3 {
        let mut basis = 1.0;
        for k in 0..3 {
            if k != j {
                basis *= z[k] / (z[k] - z[j]);
            }
        }
        acc += basis * f[j + 1];
    }
    acc
}

pub(crate) fn profile_derivatives(
    st: &Stencils,
    arclength: &[f64],
    phi: &[f64],
    psi: &[f64],
) -> ProfileDerivatives {
    let psi_x = st.d1(psi, Parity::Odd);
    let psi_xx = st.d2(psi, Parity::Odd);
    let phi_x = st.d1(phi, Parity::Even);
    let n = phi.len();
    let mut psi_s = vec![0.0; n];
    let mut psi_ss = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    for i in 0..n {
        let p = phi[i];
        psi_s[i] = psi_x[i] / p;
        psi_ss[i] = (psi_xx[i] - psi_x[i] * phi_x[i] / p) / (p * p);
        if i > 0 {
            k1[i] = -psi_ss[i] / psi[i];
            k2[i] = (1.0 - psi_s[i] * psi_s[i]) / (psi[i] * psi[i]);
        }
    }
    k1[0] = even_extrapolate(arclength, &k1);
    k2[0] = even_extrapolate(arclength, &k2);
    ProfileDerivatives { psi_s, psi_ss, k1, k2 }
}

pub(crate) fn assemble_curvature(n: usize, k1: Vec<f64>, k2: Vec<f64>) -> CurvatureData {
    let nf = n as f64;
    let ric_rad = k1.iter().map(|a| (nf - 1.0) * a).collect();
    let ric_sph = k1.iter().zip(&k2).map(|(a, b)| a + (nf - 2.0) * b).collect();
    let r = k1
        .iter()
        .zip(&k2)
        .map(|(a, b)| (nf - 1.0) * (2.0 * a + (nf - 2.0) * b))
        .collect();
    CurvatureData { k1, k2, ric_rad, ric_sph, r }
}

/// Finite-difference curvature in the arclength variable.
pub fn curvature(g: &WarpedMetric) -> Result<CurvatureData> {
    if g.len() < 17 {
        return invalid("curvature needs at least 16 grid intervals");
    }
    let st = Stencils::new(&g.grid);
    let d = profile_derivatives(&st, &g.arclength, &g.phi, &g.psi);
    Ok(assemble_curvature(g.n, d.k1, d.k2))
}

/// Volume density `w(x) = ω_{n-1} ψ^{n-1} φ` with respect to `dx`.
pub fn volume_measure(g: &WarpedMetric) -> RadialFunction {
    let omega = g.omega();
    let p = (g.n - 1) as i32;
    RadialFunction {
        values: g.phi.iter().zip(&g.psi).map(|(f, s)| omega * s.powi(p) * f).collect(),
    }
}

/// Cumulative volume `|B(0, s_i)|` at every node.
pub fn cumulative_volume(g: &WarpedMetric) -> Vec<f64> {
    let w = volume_measure(g).values;
    let mut v = vec![0.0; g.len()];
    for i in 1..g.len() {
        v[i] = v[i - 1] + 0.5 * (w[i] + w[i - 1]) * (g.grid[i] - g.grid[i - 1]);
    }
    v
}

/// Volume of the metric ball of arclength radius `r` about the origin,
/// `ω ∫_0^r ψ(s)^{n-1} ds` with three-point Gauss–Legendre on every cell.
pub fn ball_volume(g: &WarpedMetric, r: f64) -> Result<f64> {
    let total = g.total_arclength();
    if !(r >= 0.0) || r > total * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain(format!("radius {r} exceeds grid arclength {total}")));
    }
    let r = r.min(total);
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let p = (g.n - 1) as i32;
    let mut acc = 0.0;
    for w in g.arclength.windows(2) {
        let (a, b) = (w[0], w[1].min(r));
        if b <= a {
            break;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (z, wt) in nodes.iter().zip(&weights) {
            let psi = interp::cubic(&g.arclength, &g.psi, Parity::Odd, mid + half * z)?;
            acc += wt * half * psi.powi(p);
        }
    }
    Ok(g.omega() * acc)
}

/// The metric `a·g`.
pub fn scale_metric(g: &WarpedMetric, a: f64) -> Result<WarpedMetric> {
    if !(a > 0.0 && a.is_finite()) {
        return invalid(format!("scale factor {a} must be positive"));
    }
    let root = a.sqrt();
    let mut out = WarpedMetric::new(
        g.n,
        g.grid.clone(),
        g.phi.iter().map(|p| p * root).collect(),
        g.psi.iter().map(|p| p * root).collect(),
    )?;
    out.af_order = g.af_order;
    Ok(out)
}

/// A smooth, strictly increasing radial map `y ↦ x = m(y)` with `m(0) = 0`.
pub trait RadialMap {
    /// Returns `(m(y), m'(y))`.
    fn eval(&self, y: f64) -> (f64, f64);
}

impl<F: Fn(f64) -> (f64, f64)> RadialMap for F {
    fn eval(&self, y: f64) -> (f64, f64) {
        self(y)
    }
}

/// `y ↦ y`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMap;

impl RadialMap for IdentityMap {
    fn eval(&self, y: f64) -> (f64, f64) {
        (y, 1.0)
    }
}

/// `y ↦ y (1 + a e^{-(y/b)²}) + d·y`, the alignment family used for breathers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpMap {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl BumpMap {
    pub const IDENTITY: BumpMap = BumpMap { a: 0.0, b: 1.0, d: 0.0 };
}

impl RadialMap for BumpMap {
    fn eval(&self, y: f64) -> (f64, f64) {
        let q = y / self.b;
        let e = (-q * q).exp();
        let x = y * (1.0 + self.a * e) + self.d * y;
        let dx = 1.0 + self.a * e * (1.0 - 2.0 * q * q) + self.d;
        (x, dx)
    }
}

/// Pull `c·g` back along `m` onto `target_grid` (which must map inside `g`).
pub fn pullback_on_grid(
    g: &WarpedMetric,
    map: &dyn RadialMap,
    c: f64,
    target_grid: &[f64],
) -> Result<WarpedMetric> {
    if !(c > 0.0) {
        return invalid("scale factor must be positive");
    }
    let root = c.sqrt();
    let mut phi = Vec::with_capacity(target_grid.len());
    let mut psi = Vec::with_capacity(target_grid.len());
    let mut prev = f64::NEG_INFINITY;
    for (j, &y) in target_grid.iter().enumerate() {
        let (x, dx) = map.eval(y);
        if !(dx > 0.0) || !(x > prev) || (j == 0 && x.abs() > 1e-14) {
            return invalid(format!("map is not strictly increasing from 0 at y = {y}"));
        }
        prev = x;
        let (p, s) = g.sample(x)?;
        phi.push(root * p * dx);
        psi.push(if j == 0 { 0.0 } else { root * s });
    }
    WarpedMetric::new(g.n, target_grid.to_vec(), phi, psi)
}

/// Pullback metric `m*g` on a uniform grid in the new coordinate with the
/// same node count, covering the same region as `g`.
pub fn radial_reparametrize(g: &WarpedMetric, map: &dyn RadialMap) -> Result<WarpedMetric> {
    let x_max = *g.grid.last().unwrap();
    // bracket m^{-1}(x_max)
    let mut hi = x_max.max(1.0);
    let mut guard = 0;
    while map.eval(hi).0 < x_max {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return invalid("map does not reach the end of the grid");
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if map.eval(mid).0 < x_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y_max = lo;
    let n = g.len() - 1;
    let target: Vec<f64> = (0..=n).map(|j| y_max * j as f64 / n as f64).collect();
    let mut out = pullback_on_grid(g, map, 1.0, &target)?;
    out.af_order = g.af_order;
    Ok(out)
}

/// Result of the log-log tail fit used for the asymptotic-flatness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfFit {
    /// Fitted decay order of `|dψ/ds - L_∞|`; `None` when the tail is exactly conical.
    pub order: Option<f64>,
    /// Estimate of `lim ψ/s`.
    pub l_inf: f64,
}

pub const AF_ORDER_TOL: f64 = 0.2;

/// Fits `|ψ_ss| ~ s^{-(τ+1)}` on the outer quarter of the grid, which is the
/// derivative form of `|ψ_s - L_∞| = O(s^{-τ})` and needs no estimate of `L_∞`.
pub fn af_decay(g: &WarpedMetric) -> Result<AfFit> {
    let st = Stencils::new(&g.grid);
    let d = profile_derivatives(&st, &g.arclength, &g.phi, &g.psi);
    let n = g.len();
    let start = 3 * n / 4;
    let stop = n - 2;
    let l_inf = d.psi_s[n - 1];
    let scale = d.psi_s[start..stop].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let pts: Vec<(f64, f64)> = (start..stop)
        .filter(|&i| d.psi_ss[i].abs() > 1e-11 * scale && g.arclength[i] > 0.0)
        .map(|i| (g.arclength[i].ln(), d.psi_ss[i].abs().ln()))
        .collect();
    if pts.len() < (stop - start) / 2 || pts.len() < 3 {
        return Ok(AfFit { order: None, l_inf });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok(AfFit { order: Some(-slope - 1.0), l_inf })
}
