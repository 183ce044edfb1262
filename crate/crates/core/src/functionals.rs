//! The scalar functionals: energy `F`, Boltzmann entropy `N`, the
//! log-Sobolev functional `L`, Perelman's `W`, the defect `Q` and a
//! trial-set estimate of the Sobolev constant.
//!
//! All integrals use the trapezoid weights of [`WarpedMetric::quadrature_weights`]
//! and the edge conductances of [`WarpedMetric::conductances`], so the
//! discrete `F` has the same scaling as the continuous one.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{curvature, unit_ball_volume, unit_sphere_area, RadialFunction, WarpedMetric};
use crate::stencil::{Parity, Stencils};

/// Unit-norm tolerance for test functions.
pub const NORM_TOL: f64 = 1e-8;
/// Unit-mass tolerance for densities.
pub const MASS_TOL: f64 = 1e-6;
/// Densities below this fraction of their maximum count as exact zeros.
pub const DENSITY_CUTOFF: f64 = 1e-30;

/// `s_n = -(n/2) ln(2πn) - n/2`.
pub fn s_n(n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * (2.0 * PI * n).ln() - 0.5 * n
}

/// Integration region of a functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// The whole grid, Dirichlet at the outer truncation.
    Whole,
    /// `B(0, r)`, `r` in arclength.
    Ball(f64),
    /// `M - B(0, r)` truncated at the outer end of the grid.
    Exterior(f64),
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Whole => write!(f, "whole"),
            Domain::Ball(r) => write!(f, "ball:{r}"),
            Domain::Exterior(r) => write!(f, "exterior:{r}"),
        }
    }
}

/// Node range of a domain on a particular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRange {
    pub lo: usize,
    pub hi: usize,
    /// Whether `lo` is a Dirichlet node (exterior domains).
    pub inner_boundary: bool,
}

impl Domain {
    pub fn resolve(&self, g: &WarpedMetric) -> Result<NodeRange> {
        let last = g.len() - 1;
        let range = match *self {
            Domain::Whole => NodeRange { lo: 0, hi: last, inner_boundary: false },
            Domain::Ball(r) => NodeRange { lo: 0, hi: g.node_at_arclength(r)?, inner_boundary: false },
            Domain::Exterior(r) => {
                NodeRange { lo: g.node_at_arclength(r)?, hi: last, inner_boundary: true }
            }
        };
        if range.hi < range.lo + 8 {
            return invalid(format!("domain {self} covers fewer than 8 grid cells"));
        }
        Ok(range)
    }
}

/// Discrete operators of a metric restricted to a domain.
///
/// Indices are global grid indices; everything outside `[lo, hi]` is ignored.
#[derive(Debug, Clone)]
pub struct DiscreteOps {
    pub n: usize,
    pub range: NodeRange,
    /// Trapezoid weights of the sub-range (global indexing, zero outside).
    pub weights: Vec<f64>,
    /// Conductance of edge `(i, i+1)` (zero outside the range).
    pub cond: Vec<f64>,
    /// Scalar curvature at every node.
    pub r: Vec<f64>,
}

impl DiscreteOps {
    pub fn new(g: &WarpedMetric, domain: Domain) -> Result<Self> {
        let r = curvature(g)?.r;
        Self::with_curvature(g, domain, r)
    }

    pub fn with_curvature(g: &WarpedMetric, domain: Domain, r: Vec<f64>) -> Result<Self> {
        let range = domain.resolve(g)?;
        let w = crate::geometry::volume_measure(g).values;
        let x = g.grid();
        let mut weights = vec![0.0; g.len()];
        for i in range.lo..=range.hi {
            let left = if i > range.lo { x[i] - x[i - 1] } else { 0.0 };
            let right = if i < range.hi { x[i + 1] - x[i] } else { 0.0 };
            weights[i] = 0.5 * w[i] * (left + right);
        }
        let all = g.conductances();
        let cond = (0..g.len() - 1)
            .map(|i| if i >= range.lo && i < range.hi { all[i] } else { 0.0 })
            .collect();
        Ok(Self { n: g.dim(), range, weights, cond, r })
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.range.lo..=self.range.hi
    }

    /// Interior (non-Dirichlet) nodes for test functions.
    pub fn free_nodes(&self) -> std::ops::Range<usize> {
        let lo = if self.range.inner_boundary { self.range.lo + 1 } else { self.range.lo };
        lo..self.range.hi
    }

    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.nodes().map(|i| self.weights[i] * f(i)).sum()
    }

    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        self.integrate(|i| v[i] * v[i])
    }

    pub fn dirichlet(&self, v: &[f64]) -> f64 {
        (self.range.lo..self.range.hi)
            .map(|i| {
                let d = v[i + 1] - v[i];
                self.cond[i] * d * d
            })
            .sum()
    }

    /// `F(v) = ∫ 4|∇v|² + R v²`.
    pub fn energy(&self, v: &[f64]) -> f64 {
        4.0 * self.dirichlet(v) + self.integrate(|i| self.r[i] * v[i] * v[i])
    }

    /// `N(v) = ∫ v² ln v²` with `0 ln 0 = 0`.
    pub fn entropy(&self, v: &[f64]) -> f64 {
        self.integrate(|i| xlogx(v[i] * v[i]))
    }

    /// Weighted Laplacian `Δ_h v` at node `i` (zero where the weight vanishes).
    pub fn laplacian_at(&self, v: &[f64], i: usize) -> f64 {
        if self.weights[i] <= 0.0 {
            return 0.0;
        }
        let mut flux = 0.0;
        if i > self.range.lo {
            flux += self.cond[i - 1] * (v[i - 1] - v[i]);
        }
        if i < self.range.hi {
            flux += self.cond[i] * (v[i + 1] - v[i]);
        }
        flux / self.weights[i]
    }

    pub fn min_r(&self) -> f64 {
        self.nodes().map(|i| self.r[i]).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_boundary(&self, v: &[f64]) -> Result<()> {
        let scale = self.nodes().map(|i| v[i].abs()).fold(0.0, f64::max).max(1e-300);
        let mut ends = vec![self.range.hi];
        if self.range.inner_boundary {
            ends.push(self.range.lo);
        }
        for e in ends {
            if v[e].abs() > 1e-10 * scale {
                return Err(Error::PreconditionViolation(format!(
                    "test function does not vanish on the domain boundary (node {e})"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Values of the functional family at one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalReport {
    pub f: f64,
    pub n_entropy: f64,
    pub l: f64,
    pub alpha: f64,
    pub s_n: f64,
    pub e0_minus: f64,
    pub n: usize,
    pub domain: Domain,
}

impl FunctionalReport {
    /// `-N + α(n/2) ln(F + E₀⁻) + s_n` from the stored fields.
    pub fn recompute_l(&self) -> f64 {
        combine_l(self.n, self.alpha, self.f, self.e0_minus, self.n_entropy)
    }
}

pub(crate) fn combine_l(n: usize, alpha: f64, f: f64, e0: f64, n_entropy: f64) -> f64 {
    let total = f + e0;
    if total == 0.0 {
        return f64::NEG_INFINITY;
    }
    -n_entropy + alpha * 0.5 * n as f64 * total.ln() + s_n(n)
}

pub fn energy_f(v: &RadialFunction, g: &WarpedMetric, domain: Domain) -> Result<f64> {
    v.check_aligned(g)?;
    let ops = DiscreteOps::new(g, domain)?;
    ops.check_boundary(&v.values)?;
    Ok(ops.energy(&v.values))
}

pub fn entropy_n(v: &RadialFunction, g: &WarpedMetric, domain: Domain) -> Result<f64> {
    v.check_aligned(g)?;
    let ops = DiscreteOps::new(g, domain)?;
    check_unit_norm(&ops, &v.values)?;
    Ok(ops.entropy(&v.values))
}

fn check_unit_norm(ops: &DiscreteOps, v: &[f64]) -> Result<()> {
    let norm = ops.norm_sq(v).sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::PreconditionViolation(format!("L2 norm {norm} is not 1")));
    }
    Ok(())
}

/// `E₀⁻`: zero when `R ≥ 0` on the domain, otherwise `max(0, -min F)` over
/// the normalized standard probe set.
pub fn e0_minus(g: &WarpedMetric, ops: &DiscreteOps) -> f64 {
    if ops.min_r() >= 0.0 {
        return 0.0;
    }
    let mut worst = f64::INFINITY;
    for probe in probe_functions(g, ops) {
        let norm = ops.norm_sq(&probe).sqrt();
        if norm > 0.0 {
            let p: Vec<f64> = probe.iter().map(|x| x / norm).collect();
            worst = worst.min(ops.energy(&p));
        }
    }
    (-worst).max(0.0)
}

fn probe_functions(g: &WarpedMetric, ops: &DiscreteOps) -> Vec<Vec<f64>> {
    let s = g.arclength();
    let (a, b) = (s[ops.range.lo], s[ops.range.hi]);
    let span = b - a;
    let mut out = Vec::new();
    for k in 1..=8 {
        let c = a + span * k as f64 / 9.0;
        for &w in &[span / 40.0, span / 15.0, span / 6.0] {
            out.push(
                (0..g.len())
                    .map(|i| {
                        if i <= ops.range.lo && ops.range.inner_boundary || i >= ops.range.hi {
                            0.0
                        } else {
                            (-((s[i] - c) / w).powi(2)).exp() * taper(s[i] - a, b - a)
                        }
                    })
                    .collect(),
            );
        }
    }
    out
}

/// Smooth window equal to 1 on the first half of `[0, len]`, 0 at `len`.
fn taper(t: f64, len: f64) -> f64 {
    let u = t / len;
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let q = (u - 0.5) * 2.0;
        (0.5 * PI * q).cos().powi(2)
    }
}

/// The log-Sobolev functional `L(v, g, α, D)`.
pub fn log_sobolev_l(
    v: &RadialFunction,
    g: &WarpedMetric,
    alpha: f64,
    domain: Domain,
) -> Result<FunctionalReport> {
    if !(alpha >= 1.0) {
        return invalid(format!("alpha = {alpha} < 1"));
    }
    v.check_aligned(g)?;
    let ops = DiscreteOps::new(g, domain)?;
    ops.check_boundary(&v.values)?;
    check_unit_norm(&ops, &v.values)?;
    evaluate(&ops, g, &v.values, alpha, domain)
}

pub(crate) fn evaluate(
    ops: &DiscreteOps,
    g: &WarpedMetric,
    v: &[f64],
    alpha: f64,
    domain: Domain,
) -> Result<FunctionalReport> {
    let f = ops.energy(v);
    let n_entropy = ops.entropy(v);
    let e0 = e0_minus(g, ops);
    if f + e0 < 0.0 {
        return Err(Error::NumericalInconsistency(format!("F + E0- = {} < 0", f + e0)));
    }
    let n = ops.n;
    Ok(FunctionalReport {
        f,
        n_entropy,
        l: combine_l(n, alpha, f, e0, n_entropy),
        alpha,
        s_n: s_n(n),
        e0_minus: e0,
        n,
        domain,
    })
}

/// Clean a density: reject negatives, zero out sub-cutoff samples.
fn clean_density(u: &RadialFunction, g: &WarpedMetric) -> Result<Vec<f64>> {
    u.check_aligned(g)?;
    if let Some(i) = u.values.iter().position(|&x| x < -1e-12) {
        return Err(Error::InvalidDensity(format!("u = {} < 0 at node {i}", u.values[i])));
    }
    let max = u.max();
    Ok(u.values
        .iter()
        .map(|&x| if x < DENSITY_CUTOFF * max { 0.0 } else { x })
        .collect())
}

fn check_mass(ops: &DiscreteOps, u: &[f64]) -> Result<f64> {
    let mass = ops.integrate(|i| u[i]);
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::PreconditionViolation(format!("density mass {mass} is not 1")));
    }
    Ok(mass)
}

/// Perelman's `W(g, u, s)`; the `|∇u|²/u` term is evaluated as `4|∇√u|²`.
pub fn w_entropy(u: &RadialFunction, g: &WarpedMetric, s: f64) -> Result<f64> {
    let ops = DiscreteOps::new(g, Domain::Whole)?;
    w_entropy_with(&ops, g, u, s)
}

pub(crate) fn w_entropy_with(
    ops: &DiscreteOps,
    g: &WarpedMetric,
    u: &RadialFunction,
    s: f64,
) -> Result<f64> {
    if !(s > 0.0) {
        return invalid("W needs a positive scale");
    }
    let u = clean_density(u, g)?;
    let mass = check_mass(ops, &u)?;
    let root: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();
    let f = ops.energy(&root);
    let nn = ops.n as f64;
    let ulogu = ops.integrate(|i| xlogx(u[i]));
    Ok(s * f - ulogu - 0.5 * nn * (4.0 * PI * s).ln() * mass - nn * mass)
}

/// Outcome of minimizing `W` over its scale parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoMinimum {
    pub rho: f64,
    pub w: f64,
    /// `L(√u, g, 1)` on the whole grid.
    pub l: f64,
    /// `|W(ρ*) - L|`.
    pub mismatch: f64,
}

/// `inf_ρ W(g, u, ρ)`, attained at `ρ* = (n/2)/F(√u)`.
pub fn inf_rho_w(u: &RadialFunction, g: &WarpedMetric) -> Result<RhoMinimum> {
    let ops = DiscreteOps::new(g, Domain::Whole)?;
    inf_rho_w_with(&ops, g, u)
}

pub(crate) fn inf_rho_w_with(
    ops: &DiscreteOps,
    g: &WarpedMetric,
    u: &RadialFunction,
) -> Result<RhoMinimum> {
    let clean = clean_density(u, g)?;
    check_mass(ops, &clean)?;
    let root: Vec<f64> = clean.iter().map(|x| x.sqrt()).collect();
    let f = ops.energy(&root);
    if !(f > 0.0) {
        return Ok(RhoMinimum {
            rho: f64::INFINITY,
            w: f64::NEG_INFINITY,
            l: f64::NEG_INFINITY,
            mismatch: 0.0,
        });
    }
    let rho = 0.5 * ops.n as f64 / f;
    let w = w_entropy_with(ops, g, u, rho)?;
    let l = combine_l(ops.n, 1.0, f, 0.0, ops.entropy(&root));
    Ok(RhoMinimum { rho, w, l, mismatch: (w - l).abs() })
}

/// Pointwise decomposition of `Ric - Hess ln u` on the retained region.
#[derive(Debug, Clone)]
pub struct SolitonTensor {
    /// Whether node `i` is retained (density above cutoff, full stencil).
    pub retained: Vec<bool>,
    /// Radial eigenvalue of `Ric - Hess ln u`.
    pub radial: Vec<f64>,
    /// Spherical eigenvalue of `Ric - Hess ln u`.
    pub spherical: Vec<f64>,
    /// Trace `R - Δ ln u`.
    pub trace: Vec<f64>,
}

/// Builds `Ric - Hess(ln u)` for a radial density via the warped-product Hessian.
pub fn soliton_tensor(u: &[f64], g: &WarpedMetric) -> Result<SolitonTensor> {
    let max = u.iter().cloned().fold(0.0, f64::max);
    let len = g.len();
    let alive: Vec<bool> = u.iter().map(|&x| x > DENSITY_CUTOFF * max && x > 0.0).collect();
    let logu: Vec<f64> = u.iter().map(|&x| if x > 0.0 { x.ln() } else { 0.0 }).collect();
    let st = Stencils::new(g.grid());
    let fx = st.d1(&logu, Parity::Even);
    let fxx = st.d2(&logu, Parity::Even);
    let phi = g.phi();
    let phi_x = st.d1(phi, Parity::Even);
    let deriv = crate::geometry::profile_derivatives(&st, g.arclength(), phi, g.psi());
    let curv = crate::geometry::assemble_curvature(g.dim(), deriv.k1.clone(), deriv.k2.clone());
    let nn = g.dim() as f64;
    let mut retained = vec![false; len];
    let mut radial = vec![0.0; len];
    let mut spherical = vec![0.0; len];
    let mut trace = vec![0.0; len];
    for i in 0..len {
        let start = (i as isize - 2).min(len as isize - 5);
        if !(start..start + 5).all(|j| alive[j.unsigned_abs()]) {
            continue;
        }
        retained[i] = true;
        let p = phi[i];
        let f_s = fx[i] / p;
        let f_ss = (fxx[i] - fx[i] * phi_x[i] / p) / (p * p);
        let sph_hess = if i == 0 { f_ss } else { deriv.psi_s[i] / g.psi()[i] * f_s };
        radial[i] = curv.ric_rad[i] - f_ss;
        spherical[i] = curv.ric_sph[i] - sph_hess;
        trace[i] = radial[i] + (nn - 1.0) * spherical[i];
    }
    Ok(SolitonTensor { retained, radial, spherical, trace })
}

/// Value of `Q(u)` with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct QValue {
    pub q: f64,
    /// Fraction of mass dropped by the density cutoff.
    pub dropped_mass: f64,
    /// Set when more than 1% of the mass was dropped.
    pub warn: bool,
}

/// `Q(u) = n∫|Ric - Hess ln u - (R - Δ ln u) g/n|² u + ∫(R - Δ ln u)² u - (∫(R - Δ ln u) u)²`.
pub fn q_functional(u: &RadialFunction, g: &WarpedMetric) -> Result<QValue> {
    let ops = DiscreteOps::new(g, Domain::Whole)?;
    q_functional_with(&ops, g, u)
}

pub(crate) fn q_functional_with(
    ops: &DiscreteOps,
    g: &WarpedMetric,
    u: &RadialFunction,
) -> Result<QValue> {
    let clean = clean_density(u, g)?;
    let mass = check_mass(ops, &clean)?;
    let t = soliton_tensor(&clean, g)?;
    let nn = g.dim() as f64;
    let mut traceless = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    let mut kept = 0.0;
    for i in ops.nodes() {
        if !t.retained[i] {
            continue;
        }
        let wu = ops.weights[i] * clean[i];
        let mean = t.trace[i] / nn;
        let a = t.radial[i] - mean;
        let b = t.spherical[i] - mean;
        traceless += wu * (a * a + (nn - 1.0) * b * b);
        first += wu * t.trace[i];
        second += wu * t.trace[i] * t.trace[i];
        kept += wu;
    }
    let dropped = ((mass - kept) / mass).max(0.0);
    Ok(QValue {
        q: nn * traceless + second - first * first,
        dropped_mass: dropped,
        warn: dropped > 0.01,
    })
}

/// Shape of a Sobolev trial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialKind {
    /// `(1 + s²/w²)^{-(n-2)/2}`, the Euclidean extremal shape.
    AubinTalenti,
    Gaussian,
    /// `exp(-((s - c)/w)²)`.
    Shell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSample {
    pub kind: TrialKind,
    pub center: f64,
    pub width: f64,
    pub ratio: f64,
}

/// Trial-set lower bound for the Sobolev constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEstimate {
    pub a: f64,
    pub samples: Vec<TrialSample>,
    /// Implied noncollapsing constant `c_n A^{-n/2}`.
    pub kappa: f64,
}

/// Sharp Euclidean constant in `‖v‖²_{2n/(n-2)} ≤ A ∫ 4|∇v|²`.
pub fn euclidean_sobolev_constant(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (nf * (nf - 2.0) * unit_sphere_area(n).powf(2.0 / nf))
}

/// Calibration `c_n` with `κ(R^n) = ω_n` for the sharp Euclidean constant.
pub fn kappa_calibration(n: usize) -> f64 {
    unit_ball_volume(n) * euclidean_sobolev_constant(n).powf(n as f64 / 2.0)
}

/// A set of trial shapes `(kind, center, width)` in arclength units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub shapes: Vec<(TrialKind, f64, f64)>,
}

impl TrialSet {
    /// Log-spaced origin-centred Aubin–Talenti and Gaussian bumps plus
    /// shells at seeded random centres.
    pub fn standard(g: &WarpedMetric, seed: u64) -> Self {
        let total = g.total_arclength();
        let support = 0.95 * total;
        let h = g.min_ds().max(total / g.len() as f64);
        let w_min = 8.0 * h;
        let w_max = support / 25.0;
        let mut shapes = Vec::new();
        let steps = 10;
        for k in 0..=steps {
            let w = w_min * (w_max / w_min).powf(k as f64 / steps as f64);
            shapes.push((TrialKind::AubinTalenti, 0.0, w));
            shapes.push((TrialKind::Gaussian, 0.0, w));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..12 {
            let c = rng.gen_range(0.05..0.4) * support;
            let w = w_min * (w_max / w_min).powf(rng.gen_range(0.0..1.0));
            shapes.push((TrialKind::Shell, c, w));
        }
        Self { shapes }
    }

    pub fn sample(&self, g: &WarpedMetric, shape: (TrialKind, f64, f64)) -> Vec<f64> {
        let (kind, c, w) = shape;
        let support = 0.95 * g.total_arclength();
        let p = (g.dim() as f64 - 2.0) / 2.0;
        g.arclength()
            .iter()
            .map(|&s| {
                let core = match kind {
                    TrialKind::AubinTalenti => (1.0 + (s / w).powi(2)).powf(-p),
                    TrialKind::Gaussian => (-(s / w).powi(2)).exp(),
                    TrialKind::Shell => (-((s - c) / w).powi(2)).exp(),
                };
                core * taper(s, support)
            })
            .collect()
    }
}

/// Sobolev ratio `‖v‖²_{2n/(n-2)} / F(v)`.
pub fn sobolev_ratio(ops: &DiscreteOps, v: &[f64]) -> f64 {
    let nf = ops.n as f64;
    let q = 2.0 * nf / (nf - 2.0);
    let lq = ops.integrate(|i| v[i].abs().powf(q)).powf(2.0 / q);
    lq / ops.energy(v)
}

pub fn sobolev_constant(g: &WarpedMetric, trial: &TrialSet) -> Result<SobolevEstimate> {
    if trial.shapes.is_empty() {
        return invalid("empty trial set");
    }
    let ops = DiscreteOps::new(g, Domain::Whole)?;
    let mut samples = Vec::with_capacity(trial.shapes.len());
    let mut a = 0.0f64;
    for &shape in &trial.shapes {
        let v = trial.sample(g, shape);
        let ratio = sobolev_ratio(&ops, &v);
        if ratio.is_finite() {
            a = a.max(ratio);
        }
        samples.push(TrialSample { kind: shape.0, center: shape.1, width: shape.2, ratio });
    }
    if !(a > 0.0) {
        return Err(Error::NumericalInconsistency("no finite Sobolev ratio".into()));
    }
    let kappa = kappa_calibration(g.dim()) * a.powf(-(g.dim() as f64) / 2.0);
    Ok(SobolevEstimate { a, samples, kappa })
}
