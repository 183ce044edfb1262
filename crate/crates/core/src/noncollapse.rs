//! Volume-ratio scans `|B(p, r)| / rⁿ` over balls with `R ≤ 1/r²` and the
//! all-time audit of Sobolev constants and noncollapsing along a flow.
//!
//! Centres lie on one radial ray at arclength `s₀`. A ball about the
//! origin is `{s < r}`. A ball about `s₀ > 0` is found by shooting
//! geodesics in the totally geodesic plane `ds² + ψ(s)² dγ²`; its boundary
//! `γ_max(s)` then gives `|B| = ω_{n-2} ∫ ψ^{n-1} ∫_0^{γ_max} sin^{n-2}γ dγ ds`.
//! Off-axis balls must exclude the origin (`r < s₀`).

use crate::error::{invalid, Error, Result};
use crate::flow::FlowTrajectory;
use crate::functionals::{sobolev_constant, Domain, TrialSet};
use crate::geometry::{
    ball_volume, curvature, profile_derivatives, unit_sphere_area, WarpedMetric,
};
use crate::interp;
use crate::minimizer::{continuation_alpha, ContinuationSchedule};
use crate::stencil::{Parity, Stencils};

/// Growth allowed for the Sobolev estimate along a flow.
pub const SOBOLEV_GROWTH: f64 = 1.1;
/// Fraction of the initial `κ` that must survive along a flow.
pub const KAPPA_RETENTION: f64 = 0.5;
/// Slack on `λ(g(t)) ≥ λ(g(0))`.
pub const LAMBDA_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSample {
    pub t: f64,
    /// Arclength of the centre from the origin.
    pub center: f64,
    pub r: f64,
    /// `max R` over the ball.
    pub max_r: f64,
    /// `|B(p, r)| / rⁿ`.
    pub ratio: f64,
    /// `max R ≤ 1/r²`.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointAudit {
    pub t: f64,
    pub sobolev_a: f64,
    pub kappa: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoncollapseReport {
    pub samples: Vec<BallSample>,
    /// Minimum ratio over admissible samples.
    pub kappa: Option<f64>,
    /// No sample was admissible.
    pub empty: bool,
    /// `(t, A(t))` per audited checkpoint (empty for a single scan).
    pub sobolev_a: Vec<(f64, f64)>,
    pub checkpoints: Vec<CheckpointAudit>,
    /// Violated audit bounds, one line each.
    pub failures: Vec<String>,
}

impl NoncollapseReport {
    fn from_samples(samples: Vec<BallSample>) -> Self {
        let kappa = samples
            .iter()
            .filter(|s| s.admissible)
            .map(|s| s.ratio)
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
        Self {
            empty: kappa.is_none(),
            kappa,
            samples,
            sobolev_a: Vec::new(),
            checkpoints: Vec::new(),
            failures: Vec::new(),
        }
    }
}

/// `∫_0^γ sin^k`.
fn sine_power_integral(k: usize, gamma: f64) -> f64 {
    match k {
        0 => gamma,
        1 => 1.0 - gamma.cos(),
        _ => {
            let kf = k as f64;
            -gamma.cos() * gamma.sin().powi(k as i32 - 1) / kf
                + (kf - 1.0) / kf * sine_power_integral(k - 2, gamma)
        }
    }
}

/// `ψ` and `dψ/ds` as smooth functions of arclength.
struct Profile1d<'a> {
    s: &'a [f64],
    psi: &'a [f64],
    psi_s: Vec<f64>,
}

impl Profile1d<'_> {
    fn eval(&self, s: f64) -> Result<(f64, f64)> {
        Ok((
            interp::cubic(self.s, self.psi, Parity::Odd, s)?,
            interp::cubic(self.s, &self.psi_s, Parity::Even, s)?,
        ))
    }

    /// End point `(s, γ)` of the unit-speed geodesic of length `r` leaving
    /// `(s₀, 0)` at angle `θ` to `∂_s`.
    fn shoot(&self, s0: f64, theta: f64, r: f64, steps: usize) -> Result<(f64, f64)> {
        let rhs = |y: [f64; 3]| -> Result<[f64; 3]> {
            let (p, dp) = self.eval(y[0])?;
            let (sn, cs) = y[2].sin_cos();
            Ok([cs, sn / p, -sn * dp / p])
        };
        let h = r / steps as f64;
        let mut y = [s0, 0.0, theta];
        for _ in 0..steps {
            let k1 = rhs(y)?;
            let k2 = rhs(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]))?;
            let k3 = rhs(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]))?;
            let k4 = rhs(std::array::from_fn(|i| y[i] + h * k3[i]))?;
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        Ok((y[0], y[1]))
    }
}

fn off_axis_volume(g: &WarpedMetric, prof: &Profile1d, s0: f64, r: f64, rays: usize) -> Result<f64> {
    let n = g.dim();
    let (psi_min, _) = prof.eval(s0 - r)?;
    let steps = ((r / (0.02 * psi_min)).ceil() as usize).clamp(200, 20_000);
    let mut curve = Vec::with_capacity(rays + 1);
    for k in 0..=rays {
        let theta = std::f64::consts::PI * k as f64 / rays as f64;
        curve.push(prof.shoot(s0, theta, r, steps)?);
    }
    curve[0] = (s0 + r, 0.0);
    curve[rays] = (s0 - r, 0.0);
    if curve.windows(2).any(|w| w[1].0 >= w[0].0)
        || curve.iter().any(|&(_, gm)| !(0.0..=std::f64::consts::PI).contains(&gm))
    {
        return Err(Error::OutOfDomain(format!(
            "ball of radius {r} about s = {s0} reaches past the injectivity radius"
        )));
    }
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &(s, gm) in &curve {
        let (p, _) = prof.eval(s)?;
        let f = p.powi(n as i32 - 1) * sine_power_integral(n - 2, gm);
        if let Some((sp, fp)) = prev {
            acc += 0.5 * (f + fp) * (sp - s);
        }
        prev = Some((s, f));
    }
    Ok(unit_sphere_area(n - 2) * acc)
}

/// `|B(p, r)|` for the point `p` at arclength `s₀` on a radial ray.
pub fn axial_ball_volume(g: &WarpedMetric, s0: f64, r: f64) -> Result<f64> {
    let st = Stencils::new(g.grid());
    let d = profile_derivatives(&st, g.arclength(), g.phi(), g.psi());
    let prof = Profile1d { s: g.arclength(), psi: g.psi(), psi_s: d.psi_s };
    ball_volume_with(g, &prof, s0, r)
}

fn ball_volume_with(g: &WarpedMetric, prof: &Profile1d, s0: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || !(s0 >= 0.0) {
        return invalid("ball needs r > 0 and a centre at s0 >= 0");
    }
    let total = g.total_arclength();
    if s0 + r > total * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain(format!("ball s0 + r = {} exceeds the grid ({total})", s0 + r)));
    }
    if s0 == 0.0 {
        return ball_volume(g, r);
    }
    if r >= s0 {
        return invalid(format!("off-axis ball about s = {s0} must exclude the origin (r = {r})"));
    }
    // trapezoid along the boundary is second order in the ray spacing;
    // one Richardson step removes the leading term
    let coarse = off_axis_volume(g, prof, s0, r, 200)?;
    let fine = off_axis_volume(g, prof, s0, r, 400)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `max R` over `s ∈ [s₀ - r, s₀ + r]`, the radial extent of the ball.
fn max_r_on(s: &[f64], r_field: &[f64], lo: f64, hi: f64) -> f64 {
    let mut m = interp::linear(s, r_field, lo).max(interp::linear(s, r_field, hi));
    for (x, v) in s.iter().zip(r_field) {
        if *x >= lo && *x <= hi {
            m = m.max(*v);
        }
    }
    m
}

fn scan_at(g: &WarpedMetric, t: f64, centers: &[f64], radii: &[f64]) -> Result<Vec<BallSample>> {
    if centers.is_empty() || radii.is_empty() {
        return invalid("kappa scan needs centres and radii");
    }
    let n = g.dim() as i32;
    let curv = curvature(g)?;
    let st = Stencils::new(g.grid());
    let d = profile_derivatives(&st, g.arclength(), g.phi(), g.psi());
    let prof = Profile1d { s: g.arclength(), psi: g.psi(), psi_s: d.psi_s };
    let mut samples = Vec::with_capacity(centers.len() * radii.len());
    for &c in centers {
        for &r in radii {
            let vol = ball_volume_with(g, &prof, c, r)?;
            let ratio = vol / r.powi(n);
            if !(ratio > 0.0) {
                return Err(Error::NumericalInconsistency(format!("ball ratio {ratio} at s = {c}, r = {r}")));
            }
            let max_r = max_r_on(g.arclength(), &curv.r, (c - r).max(0.0), c + r);
            samples.push(BallSample { t, center: c, r, max_r, ratio, admissible: max_r <= 1.0 / (r * r) });
        }
    }
    Ok(samples)
}

/// Volume ratios and admissibility for every `(centre, radius)` pair.
pub fn kappa_scan(g: &WarpedMetric, centers: &[f64], radii: &[f64]) -> Result<NoncollapseReport> {
    Ok(NoncollapseReport::from_samples(scan_at(g, 0.0, centers, radii)?))
}

/// Sobolev estimate, `κ` scan and optionally `λ` at every checkpoint, with
/// the uniformity bounds recorded as failures rather than errors.
pub fn alltime_audit(
    traj: &FlowTrajectory,
    centers: &[f64],
    radii: &[f64],
    seed: u64,
    lambda_schedule: Option<&ContinuationSchedule>,
) -> Result<NoncollapseReport> {
    if !traj.nonnegative_r {
        return Err(Error::PreconditionViolation("trajectory does not start with R >= 0".into()));
    }
    let mut samples = Vec::new();
    let mut checkpoints = Vec::new();
    for &c in &traj.checkpoints {
        let g = &traj.snapshots[c];
        let t = traj.times[c];
        let a = sobolev_constant(g, &TrialSet::standard(g, seed))?.a;
        let scan = scan_at(g, t, centers, radii)?;
        let kappa = NoncollapseReport::from_samples(scan.clone()).kappa;
        let lambda = match lambda_schedule {
            Some(s) => Some(continuation_alpha(g, Domain::Whole, s, None)?.result.lambda),
            None => None,
        };
        samples.extend(scan);
        checkpoints.push(CheckpointAudit { t, sobolev_a: a, kappa, lambda });
    }
    let mut report = NoncollapseReport::from_samples(samples);
    let first = checkpoints[0].clone();
    for cp in &checkpoints[1..] {
        if cp.sobolev_a > SOBOLEV_GROWTH * first.sobolev_a {
            report.failures.push(format!(
                "t = {}: A = {} exceeds {SOBOLEV_GROWTH} x A(0) = {}",
                cp.t, cp.sobolev_a, first.sobolev_a
            ));
        }
        match (cp.kappa, first.kappa) {
            (Some(k), Some(k0)) if k < KAPPA_RETENTION * k0 => report
                .failures
                .push(format!("t = {}: kappa = {k} below {KAPPA_RETENTION} x kappa(0) = {k0}", cp.t)),
            (None, Some(_)) => report.failures.push(format!("t = {}: no admissible ball", cp.t)),
            _ => {}
        }
        if let (Some(l), Some(l0)) = (cp.lambda, first.lambda) {
            if l < l0 - LAMBDA_SLACK {
                report.failures.push(format!("t = {}: lambda = {l} below lambda(0) = {l0}", cp.t));
            }
        }
    }
    report.sobolev_a = checkpoints.iter().map(|c| (c.t, c.sobolev_a)).collect();
    report.checkpoints = checkpoints;
    Ok(report)
}
