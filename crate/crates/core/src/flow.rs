//! Rotationally symmetric Ricci flow, the backward conjugate heat equation,
//! entropy audits and the breather test.
//!
//! Under Ricci flow the metric `φ²dx² + ψ²g_S` obeys
//!
//! ```text
//! ∂_t ψ = -ψ (K₁ + (n-2) K₂),    ∂_t φ = -(n-1) K₁ φ.
//! ```
//!
//! In the fixed coordinate `x` the `φ` equation is a pure transport along
//! the gauge direction and explicit centred schemes blow up. The solver
//! therefore evolves the diffeomorphic flow `∂_t g = -2Ric + L_X g` with
//! `X = ξ ∂_x`, `ξ = ψ(K₁ + (n-2)K₂)/ψ_x`, which freezes `ψ` and leaves
//!
//! ```text
//! ∂_t φ = -(n-1) K₁ φ + (ξ φ)_x,
//! ```
//!
//! a strictly parabolic equation for `φ`. Every geometric quantity is
//! unchanged; the conjugate heat equation picks up the matching transport
//! term. Explicit Euler steps use the fourth-order stencils of the
//! curvature module, `φ(0)` stays at `ψ_x(0)` and the outer nodes are held
//! at their initial values.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

use crate::error::{invalid, Error, Result};
use crate::functionals::{
    combine_l, inf_rho_w_with, q_functional_with, soliton_tensor, w_entropy_with, DiscreteOps,
    Domain,
};
use crate::geometry::{
    assemble_curvature, even_extrapolate, profile_derivatives, BumpMap, RadialFunction, RadialMap,
    WarpedMetric,
};
use crate::minimizer::{continuation_alpha, ContinuationSchedule, MinimizerResult};
use crate::stencil::{Parity, Stencils};

/// Default CFL factor: `dt ≤ 0.3 (min Δs)²`.
pub const CFL: f64 = 0.3;
/// Admissible conjugate-heat mass drift before the solve is rejected.
pub const MASS_DRIFT_LIMIT: f64 = 1e-4;

/// Roundoff allowance on `min R` for the nonnegativity flag.
pub const NONNEGATIVE_SLACK: f64 = 1e-8;

/// Largest stable Ricci-flow step for `g`.
pub fn cfl_bound(g: &WarpedMetric) -> f64 {
    CFL * g.min_ds().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Steps between entropy checkpoints; `None` spreads five intervals.
    pub checkpoint_every: Option<usize>,
    /// Number of outer nodes held fixed.
    pub clamp: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { checkpoint_every: None, clamp: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    /// One metric per time step, all on the initial grid.
    pub snapshots: Vec<WarpedMetric>,
    pub step_size: f64,
    /// Snapshot indices used by entropy audits (first and last included).
    pub checkpoints: Vec<usize>,
    /// Whether the initial scalar curvature is nonnegative up to
    /// [`NONNEGATIVE_SLACK`].
    pub nonnegative_r: bool,
    /// `max(|K₁|, |K₂|)` per snapshot.
    pub max_curvature: Vec<f64>,
    /// Extremes of `R` over the evolved (unclamped) nodes.
    pub min_r: Vec<f64>,
    pub max_r: Vec<f64>,
    /// Gauge field `ξ` per snapshot (zero for plain snapshot sequences).
    pub gauge: Vec<Vec<f64>>,
}

impl FlowTrajectory {
    /// Index of the snapshot at time `t` (to within rounding).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.times.last().unwrap().abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::InvalidInput(format!("no snapshot at t = {t}")))
    }

    /// Trajectory of two metrics, used for synthetic breather fixtures.
    pub fn from_snapshots(times: Vec<f64>, snapshots: Vec<WarpedMetric>) -> Result<Self> {
        if times.len() != snapshots.len() || times.len() < 2 {
            return invalid("need matching times and at least two snapshots");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("times must increase");
        }
        let n = snapshots[0].dim();
        let len = snapshots[0].len();
        if snapshots.iter().any(|g| g.dim() != n || g.len() != len) {
            return invalid("snapshots must share dimension and node count");
        }
        let mut max_curvature = Vec::new();
        let mut min_r = Vec::new();
        let mut max_r = Vec::new();
        for g in &snapshots {
            let c = crate::geometry::curvature(g)?;
            max_curvature.push(c.max_abs());
            min_r.push(c.min_r());
            max_r.push(c.max_r());
        }
        let last = times.len() - 1;
        Ok(Self {
            gauge: vec![vec![0.0; len]; times.len()],
            step_size: times[1] - times[0],
            checkpoints: (0..=last).collect(),
            nonnegative_r: min_r[0] >= -NONNEGATIVE_SLACK,
            times,
            snapshots,
            max_curvature,
            min_r,
            max_r,
        })
    }
}

/// Evolves `g0` by Ricci flow for time `t_end` with step at most `dt`.
pub fn ricci_evolve(g0: &WarpedMetric, t_end: f64, dt: f64) -> Result<FlowTrajectory> {
    ricci_evolve_with(g0, t_end, dt, FlowOptions::default())
}

pub fn ricci_evolve_with(
    g0: &WarpedMetric,
    t_end: f64,
    dt: f64,
    opts: FlowOptions,
) -> Result<FlowTrajectory> {
    if !(t_end > 0.0) || !(dt > 0.0) {
        return invalid("flow needs positive duration and step");
    }
    let bound = cfl_bound(g0);
    if dt > bound {
        return invalid(format!("dt = {dt} exceeds the stability bound {bound}"));
    }
    if g0.len() < 17 || opts.clamp >= g0.len() / 2 {
        return invalid("grid too small for the flow stencils");
    }
    let psi = g0.psi().to_vec();
    if psi.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("the flow gauge needs a strictly increasing warping function");
    }
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() } as usize;
    let h = t_end / steps as f64;
    let n = g0.dim();
    let nf = n as f64;
    let len = g0.len();
    let fixed_from = len - opts.clamp;
    let st = Stencils::new(g0.grid());
    let psi_x = st.d1(&psi, Parity::Odd);
    let psi_xx = st.d2(&psi, Parity::Odd);
    let mut times = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(steps + 1);
    let mut gauge = Vec::with_capacity(steps + 1);
    let mut max_curvature = Vec::with_capacity(steps + 1);
    let mut min_r = Vec::with_capacity(steps + 1);
    let mut max_r = Vec::with_capacity(steps + 1);
    let mut g = g0.clone();
    for k in 0..=steps {
        let t = k as f64 * h;
        let d = profile_derivatives(&st, g.arclength(), g.phi(), &psi);
        let curv = assemble_curvature(n, d.k1.clone(), d.k2.clone());
        let mc = curv.max_abs();
        if !mc.is_finite() {
            let index = curv.k1.iter().zip(&curv.k2).position(|(a, b)| !(a.is_finite() && b.is_finite()));
            return Err(Error::SingularityDetected { time: t, index: index.unwrap_or(0) });
        }
        let xi: Vec<f64> = (0..len)
            .map(|i| if i == 0 { 0.0 } else { psi[i] * (d.k1[i] + (nf - 2.0) * d.k2[i]) / psi_x[i] })
            .collect();
        times.push(t);
        max_curvature.push(mc);
        // the clamped nodes are boundary data, not Ricci flow
        let evolved = &curv.r[..fixed_from];
        min_r.push(evolved.iter().cloned().fold(f64::INFINITY, f64::min));
        max_r.push(evolved.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if k == steps {
            snapshots.push(g);
            gauge.push(xi);
            break;
        }
        // the same equation with the principal part as one second
        // difference of w = 1/φ; composing two first differences would
        // leave the grid-scale mode undamped
        let phi_now = g.phi();
        let w: Vec<f64> = phi_now.iter().map(|p| 1.0 / p).collect();
        let w_x = st.d1(&w, Parity::Even);
        let w_xx = st.d2(&w, Parity::Even);
        let b: Vec<f64> = (0..len)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                let (p, q, qx) = (phi_now[i], psi[i], psi_x[i]);
                -psi_xx[i] * w[i] / qx + (nf - 2.0) * (p - qx * qx * w[i]) / (q * qx)
            })
            .collect();
        let b_x = st.d1(&b, Parity::Odd);
        let mut phi = phi_now.to_vec();
        for i in 1..fixed_from {
            let q = psi[i];
            phi[i] += h
                * (-w_xx[i]
                    + (nf - 1.0) * (psi_x[i] * w_x[i] + psi_xx[i] * w[i]) / q
                    + b_x[i]);
        }
        let t_next = t + h;
        if let Some(index) = (0..len).find(|&i| !(phi[i] > 0.0 && phi[i].is_finite())) {
            return Err(Error::SingularityDetected { time: t_next, index });
        }
        let next = WarpedMetric::new(n, g0.grid().to_vec(), phi, psi.clone())?;
        // cells may shrink during the flow; 1.2·CFL is still inside the
        // stability region of the fourth-order Laplacian stencil
        if h > 1.2 * cfl_bound(&next) {
            return invalid(format!("step {h} violates the stability bound at t = {t_next}"));
        }
        snapshots.push(std::mem::replace(&mut g, next));
        gauge.push(xi);
    }
    let mut checkpoints: Vec<usize> = match opts.checkpoint_every {
        Some(every) => (0..=steps).step_by(every.max(1)).collect(),
        None => (0..=5).map(|k| (k * steps + 2) / 5).collect(),
    };
    checkpoints.dedup();
    if *checkpoints.last().unwrap() != steps {
        checkpoints.push(steps);
    }
    Ok(FlowTrajectory {
        times,
        snapshots,
        step_size: h,
        checkpoints,
        nonnegative_r: min_r[0] >= -NONNEGATIVE_SLACK,
        max_curvature,
        min_r,
        max_r,
        gauge,
    })
}

/// Backward solution of `∂_t u + Δu - Ru = 0` from prescribed data at `t₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateHeatSolution {
    /// Decreasing times from `t₂` to `t₁`.
    pub times: Vec<f64>,
    /// Snapshot index of every stored time.
    pub indices: Vec<usize>,
    pub densities: Vec<RadialFunction>,
    /// `∫u dg(t)` per stored time.
    pub mass: Vec<f64>,
}

impl ConjugateHeatSolution {
    pub fn density_at_index(&self, index: usize) -> Option<&RadialFunction> {
        self.indices.iter().position(|&i| i == index).map(|k| &self.densities[k])
    }
}

/// `d/dτ (W u) = -A u` with `A = K + transport`, discretized on edges.
struct HeatOperator {
    weights: Vec<f64>,
    cond: Vec<f64>,
    /// Transport coefficient `ω ψ^{n-1} ξ φ` per edge.
    drift: Vec<f64>,
}

impl HeatOperator {
    fn new(g: &WarpedMetric, xi: &[f64]) -> Self {
        let p = (g.dim() - 1) as f64 / 2.0;
        let omega = g.omega();
        let (psi, phi) = (g.psi(), g.phi());
        let drift = (0..g.len() - 1)
            .map(|i| {
                omega * (psi[i] * psi[i + 1]).powf(p) * 0.5 * (xi[i] * phi[i] + xi[i + 1] * phi[i + 1])
            })
            .collect();
        Self { weights: g.quadrature_weights(), cond: g.conductances(), drift }
    }

    fn blend(a: &Self, b: &Self, theta: f64) -> Self {
        let mix = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).map(|(p, q)| (1.0 - theta) * p + theta * q).collect()
        };
        Self {
            weights: mix(&a.weights, &b.weights),
            cond: mix(&a.cond, &b.cond),
            drift: mix(&a.drift, &b.drift),
        }
    }

    /// Row `i` of `A` as `(sub, diag, sup)`; column sums vanish, so the
    /// total `Σ W u` is conserved.
    fn row(&self, i: usize) -> (f64, f64, f64) {
        let last = self.weights.len() - 1;
        let (mut sub, mut diag, mut sup) = (0.0, 0.0, 0.0);
        if i > 0 {
            let (c, a) = (self.cond[i - 1], self.drift[i - 1]);
            sub = -c - 0.5 * a;
            diag += c - 0.5 * a;
        }
        if i < last {
            let (c, a) = (self.cond[i], self.drift[i]);
            sup = -c + 0.5 * a;
            diag += c + 0.5 * a;
        }
        (sub, diag, sup)
    }

    /// Largest step keeping the explicit half of Crank–Nicolson positive.
    fn positive_step(&self) -> f64 {
        (1..self.weights.len())
            .map(|i| {
                let d = self.row(i).1;
                if d > 0.0 { 2.0 * self.weights[i] / d } else { f64::INFINITY }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// One Crank–Nicolson step of `d/dτ (W u) = -A u` over nodes `1..`
/// (node 0 carries no weight and no edge).
fn cn_step(from: &HeatOperator, to: &HeatOperator, u: &[f64], h: f64) -> Vec<f64> {
    let len = u.len();
    let last = len - 1;
    let m = len - 1;
    let mut rhs = vec![0.0; m];
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for i in 1..=last {
        let j = i - 1;
        let (a, b, c) = from.row(i);
        let right = if i < last { c * u[i + 1] } else { 0.0 };
        rhs[j] = from.weights[i] * u[i] - 0.5 * h * (a * u[i - 1] + b * u[i] + right);
        let (a, b, c) = to.row(i);
        sub[j] = 0.5 * h * a;
        diag[j] = to.weights[i] + 0.5 * h * b;
        sup[j] = 0.5 * h * c;
    }
    let x = tridiagonal(&sub, &diag, &sup, &rhs);
    let mut out = vec![0.0; len];
    out[1..].copy_from_slice(&x);
    out
}

/// Thomas algorithm; `sub[0]` and `sup[m-1]` are ignored.
fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    c[0] = sup[0] / denom;
    d[0] = rhs[0] / denom;
    for j in 1..m {
        denom = diag[j] - sub[j] * c[j - 1];
        c[j] = sup[j] / denom;
        d[j] = (rhs[j] - sub[j] * d[j - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for j in (0..m - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}

/// Solves the conjugate heat equation backward from `t₂` to `t₁` in mass
/// form, so `∫u dg(t)` is conserved by construction and only checked.
pub fn conjugate_heat_backward(
    traj: &FlowTrajectory,
    final_density: &RadialFunction,
    t2: f64,
    t1: f64,
) -> Result<ConjugateHeatSolution> {
    if !(t1 < t2) {
        return invalid("conjugate heat solve needs t1 < t2");
    }
    let i2 = traj.index_of(t2)?;
    let i1 = traj.index_of(t1)?;
    let g2 = &traj.snapshots[i2];
    final_density.check_aligned(g2)?;
    if let Some(i) = final_density.values.iter().position(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidDensity(format!("final density negative at node {i}")));
    }
    let mut op = HeatOperator::new(g2, &traj.gauge[i2]);
    let mass0: f64 = op.weights.iter().zip(&final_density.values).map(|(w, u)| w * u).sum();
    if (mass0 - 1.0).abs() > 1e-6 {
        return Err(Error::PreconditionViolation(format!("final density mass {mass0} is not 1")));
    }
    let mut u = final_density.values.clone();
    let mut times = vec![t2];
    let mut indices = vec![i2];
    let mut densities = vec![final_density.clone()];
    let mut mass = vec![mass0];
    for j in (i1..i2).rev() {
        let next = HeatOperator::new(&traj.snapshots[j], &traj.gauge[j]);
        let span = traj.times[j + 1] - traj.times[j];
        let limit = op.positive_step().min(next.positive_step());
        let sub = (span / (0.9 * limit)).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        for k in 0..sub {
            let a = HeatOperator::blend(&op, &next, k as f64 / sub as f64);
            let b = HeatOperator::blend(&op, &next, (k + 1) as f64 / sub as f64);
            u = cn_step(&a, &b, &u, h);
        }
        let g = &traj.snapshots[j];
        u[0] = even_extrapolate(g.arclength(), &u).max(0.0);
        let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::InvalidDensity(format!("u = {min} < 0 at t = {}", traj.times[j])));
        }
        u.iter_mut().for_each(|x| *x = x.max(0.0));
        let m: f64 = next.weights.iter().zip(&u).map(|(w, x)| w * x).sum();
        if (m - 1.0).abs() > MASS_DRIFT_LIMIT {
            return Err(Error::MassDrift { time: traj.times[j], drift: m - 1.0 });
        }
        times.push(traj.times[j]);
        indices.push(j);
        densities.push(RadialFunction::new(u.clone()));
        mass.push(m);
        op = next;
    }
    Ok(ConjugateHeatSolution { times, indices, densities, mass })
}

/// Entropy quantities at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub t: f64,
    pub w: f64,
    /// `L(√u, g(t), 1)`.
    pub l: f64,
    pub n_entropy: f64,
    pub f: f64,
    pub q: f64,
    pub q_over_f: f64,
    /// Forward difference `(L_{i+1} - L_i)/Δt` (absent on the last row).
    pub dldt_fd: Option<f64>,
    /// Declared finite-difference slack for the `dL/dt ≥ Q/F` check.
    pub tol_fd: Option<f64>,
    /// Set when the density cutoff removed more than 1% of the mass.
    pub q_warn: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// Rows in increasing time.
    pub rows: Vec<EntropyRow>,
    /// Scale offset `ρ₀` with `s(t) = t₂ - t + ρ₀`.
    pub rho0: f64,
    pub w_monotone: bool,
    pub dldt_bound: bool,
    pub q_nonnegative: bool,
}

/// `W`, `L`, `F`, `N`, `Q` at every trajectory checkpoint covered by `chs`,
/// with `W` evaluated at `s(t) = t₂ - t + ρ*(t₂)`.
pub fn entropy_audit(traj: &FlowTrajectory, chs: &ConjugateHeatSolution) -> Result<EntropyReport> {
    let i2 = chs.indices[0];
    let i1 = *chs.indices.last().unwrap();
    let t2 = traj.times[i2];
    let mut cps: Vec<usize> = traj.checkpoints.iter().cloned().filter(|&c| c >= i1 && c <= i2).collect();
    if cps.len() < 2 {
        return invalid("fewer than two checkpoints inside the conjugate heat window");
    }
    cps.sort_unstable();
    if let Some(c) = cps.iter().find(|&&c| chs.density_at_index(c).is_none()) {
        return invalid(format!("checkpoint {c} has no stored density"));
    }
    let g_final = &traj.snapshots[i2];
    let ops_final = DiscreteOps::new(g_final, Domain::Whole)?;
    let rho0 = inf_rho_w_with(&ops_final, g_final, chs.density_at_index(i2).unwrap())?.rho;
    if !rho0.is_finite() {
        return Err(Error::NumericalInconsistency("final density has F = 0".into()));
    }
    let mut rows: Vec<EntropyRow> = Vec::with_capacity(cps.len());
    for &c in &cps {
        let g = &traj.snapshots[c];
        let u = chs.density_at_index(c).unwrap();
        let ops = DiscreteOps::new(g, Domain::Whole)?;
        let t = traj.times[c];
        let w = w_entropy_with(&ops, g, u, t2 - t + rho0)?;
        let root: Vec<f64> = u.values.iter().map(|x| x.max(0.0).sqrt()).collect();
        let f = ops.energy(&root);
        let n_entropy = ops.entropy(&root);
        let q = q_functional_with(&ops, g, u)?;
        rows.push(EntropyRow {
            t,
            w,
            l: combine_l(g.dim(), 1.0, f, 0.0, n_entropy),
            n_entropy,
            f,
            q: q.q,
            q_over_f: q.q / f,
            dldt_fd: None,
            tol_fd: None,
            q_warn: q.warn,
        });
    }
    let max_qf = rows.iter().map(|r| r.q_over_f.abs()).fold(0.0, f64::max);
    for k in 0..rows.len() - 1 {
        let dt = rows[k + 1].t - rows[k].t;
        rows[k].dldt_fd = Some((rows[k + 1].l - rows[k].l) / dt);
        rows[k].tol_fd = Some(tol_fd(rows[k].q_over_f, rows[k + 1].q_over_f, max_qf));
    }
    let w_monotone = rows.windows(2).all(|p| p[1].w >= p[0].w - 1e-6 * (1.0 + p[0].w.abs()));
    let dldt_bound = rows
        .iter()
        .filter_map(|r| Some((r.dldt_fd?, r.tol_fd?, r.q_over_f)))
        .all(|(d, tol, qf)| d >= qf - tol);
    let q_nonnegative = rows.iter().all(|r| r.q >= -1e-8);
    Ok(EntropyReport { rows, rho0, w_monotone, dldt_bound, q_nonnegative })
}

/// Slack for comparing a forward difference of `L` with `Q/F` at the left
/// end of the interval: the variation of `Q/F` across it plus a relative
/// and an absolute floor for the spatial discretization.
pub fn tol_fd(qf_left: f64, qf_right: f64, max_qf: f64) -> f64 {
    (qf_right - qf_left).abs() + 1e-3 * max_qf + 1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolitonVerdict {
    Soliton,
    NotSoliton,
    Inconclusive,
}

/// Residual thresholds for the soliton verdict.
pub const SOLITON_TOL: f64 = 1e-6;
pub const NOT_SOLITON_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonReport {
    pub t: f64,
    /// Soliton constant `ε = -2l/n` (negative for shrinkers).
    pub epsilon: f64,
    /// Potential `f = -ln u` on the retained nodes (zero elsewhere).
    pub f: RadialFunction,
    /// `(t, l(t))` at every checkpoint covered by the conjugate solution.
    pub l_of_t: Vec<(f64, f64)>,
    /// `max |Ric + Hess f + (ε/2)g|` over both eigenvalues.
    pub residual_traceless: f64,
    /// `max |R - Δ ln u - l|`.
    pub residual_l: f64,
    /// Nodes in the region carrying 99% of the mass.
    pub region_nodes: usize,
    pub verdict: SolitonVerdict,
}

struct SolitonData {
    l: f64,
    traceless: f64,
    residual_l: f64,
    region: usize,
    f: Vec<f64>,
}

fn soliton_data(g: &WarpedMetric, u: &RadialFunction) -> Result<SolitonData> {
    let t = soliton_tensor(&u.values, g)?;
    let w = g.quadrature_weights();
    let total: f64 = w.iter().zip(&u.values).map(|(a, b)| a * b).sum();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| u.values[b].partial_cmp(&u.values[a]).unwrap());
    let mut region = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        if acc >= 0.99 * total {
            break;
        }
        acc += w[i] * u.values[i];
        region.push(i);
    }
    let region: Vec<usize> = region.into_iter().filter(|&i| t.retained[i]).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..g.len() {
        if t.retained[i] {
            num += w[i] * u.values[i] * t.trace[i];
            den += w[i] * u.values[i];
        }
    }
    let l = num / den;
    let n = g.dim() as f64;
    let mut traceless = 0.0f64;
    let mut residual_l = 0.0f64;
    for &i in &region {
        traceless = traceless.max((t.radial[i] - l / n).abs()).max((t.spherical[i] - l / n).abs());
        residual_l = residual_l.max((t.trace[i] - l).abs());
    }
    let f = (0..g.len())
        .map(|i| if t.retained[i] { -u.values[i].ln() } else { 0.0 })
        .collect();
    Ok(SolitonData { l, traceless, residual_l, region: region.len(), f })
}

/// Tests the gradient-soliton equation for `f = -ln u` at time `t`.
pub fn soliton_residual(
    traj: &FlowTrajectory,
    chs: &ConjugateHeatSolution,
    t: f64,
) -> Result<SolitonReport> {
    let idx = traj.index_of(t)?;
    let u = chs
        .density_at_index(idx)
        .ok_or_else(|| Error::InvalidInput(format!("no conjugate density at t = {t}")))?;
    let g = &traj.snapshots[idx];
    let d = soliton_data(g, u)?;
    let mut l_of_t = Vec::new();
    for &c in traj.checkpoints.iter() {
        if let Some(uc) = chs.density_at_index(c) {
            l_of_t.push((traj.times[c], soliton_data(&traj.snapshots[c], uc)?.l));
        }
    }
    l_of_t.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let verdict = if d.region < 10 {
        SolitonVerdict::Inconclusive
    } else if d.traceless <= SOLITON_TOL && d.residual_l <= SOLITON_TOL {
        SolitonVerdict::Soliton
    } else if d.traceless > NOT_SOLITON_TOL || d.residual_l > NOT_SOLITON_TOL {
        SolitonVerdict::NotSoliton
    } else {
        SolitonVerdict::Inconclusive
    };
    Ok(SolitonReport {
        t,
        epsilon: -2.0 * d.l / g.dim() as f64,
        f: RadialFunction::new(d.f),
        l_of_t,
        residual_traceless: d.traceless,
        residual_l: d.residual_l,
        region_nodes: d.region,
        verdict,
    })
}

/// Best `c·m*g₁ ≈ g₂` found in the bump-map family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub c: f64,
    pub map: BumpMap,
    /// Relative sup-norm mismatch of `φ` and `ψ` on the inner half of `g₂`.
    pub mismatch: f64,
}

struct AlignCost<'a> {
    g1: &'a WarpedMetric,
    g2: &'a WarpedMetric,
    nodes: Vec<usize>,
    phi_scale: f64,
    psi_scale: f64,
}

impl AlignCost<'_> {
    fn params(p: &[f64]) -> (f64, BumpMap) {
        (p[0].exp(), BumpMap { a: p[1], b: p[2].exp(), d: p[3] })
    }

    /// Relative deviations per compared node, or `None` if the map leaves
    /// the domain of `g₁` or folds.
    fn deviations(&self, c: f64, map: &BumpMap) -> Option<Vec<(f64, f64)>> {
        let root = c.sqrt();
        let x_max = *self.g1.grid().last().unwrap();
        let mut out = Vec::with_capacity(self.nodes.len());
        for &j in &self.nodes {
            let y = self.g2.grid()[j];
            let (x, dx) = map.eval(y);
            if !(dx > 0.0) || !(x >= 0.0) || x > x_max {
                return None;
            }
            let (p, s) = self.g1.sample(x).ok()?;
            out.push((
                (root * p * dx - self.g2.phi()[j]) / self.phi_scale,
                (root * s - self.g2.psi()[j]) / self.psi_scale,
            ));
        }
        Some(out)
    }
}

impl CostFunction for AlignCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (c, map) = Self::params(p);
        let Some(dev) = self.deviations(c, &map) else {
            return Ok(1e6);
        };
        let sq: f64 = dev.iter().map(|(a, b)| a * a + b * b).sum::<f64>() / dev.len() as f64;
        // tie-break along exact symmetries toward c = 1 and the identity map
        Ok(sq + 1e-14 * (p[0] * p[0] + p[1] * p[1] + p[3] * p[3]))
    }
}

/// Fits `c` and a bump map so that `c·m*g₁` matches `g₂`.
pub fn align(g1: &WarpedMetric, g2: &WarpedMetric) -> Result<Alignment> {
    if g1.dim() != g2.dim() {
        return invalid("dimension mismatch");
    }
    let half = 0.5 * g2.grid().last().unwrap();
    let nodes: Vec<usize> = (1..g2.len()).filter(|&j| g2.grid()[j] <= half).collect();
    if nodes.len() < 8 {
        return invalid("too few nodes to align");
    }
    let cost = AlignCost {
        g1,
        g2,
        phi_scale: g2.phi().iter().cloned().fold(0.0, f64::max),
        psi_scale: nodes.iter().map(|&j| g2.psi()[j]).fold(0.0, f64::max),
        nodes,
    };
    let b0 = (0.2 * half).ln();
    let mut best = (f64::INFINITY, vec![0.0, 0.0, b0, 0.0]);
    for i in 0..=40 {
        let lc = (1e-2f64).ln() + (1e4f64).ln() * i as f64 / 40.0;
        for k in 0..=10 {
            let d = -0.5 + 0.1 * k as f64;
            let p = vec![lc, 0.0, b0, d];
            let v = cost.cost(&p).unwrap();
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    let mut p = best.1;
    for _ in 0..4 {
        let mut simplex = vec![p.clone()];
        for (k, step) in [0.05, 0.05, 0.2, 0.02].iter().enumerate() {
            let mut q = p.clone();
            q[k] += step;
            simplex.push(q);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-18)
            .map_err(|e| Error::NumericalInconsistency(e.to_string()))?;
        let res = Executor::new(
            AlignCost { g1, g2, nodes: cost.nodes.clone(), phi_scale: cost.phi_scale, psi_scale: cost.psi_scale },
            solver,
        )
        .configure(|s| s.max_iters(3000))
        .run()
        .map_err(|e| Error::NumericalInconsistency(e.to_string()))?;
        p = res.state().get_best_param().cloned().unwrap_or(p);
    }
    let (c, map) = AlignCost::params(&p);
    let mismatch = cost
        .deviations(c, &map)
        .map(|dev| dev.iter().map(|(a, b)| a.abs().max(b.abs())).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    Ok(Alignment { c, map, mismatch })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreatherOptions {
    pub schedule: ContinuationSchedule,
    /// Tolerance on `|λ(t₁) - λ(t₂)|`.
    pub lambda_tol: f64,
    /// Tolerance on the alignment mismatch.
    pub mismatch_tol: f64,
}

impl BreatherOptions {
    pub fn standard() -> Self {
        Self {
            schedule: ContinuationSchedule::standard(vec![]).expect("standard schedule"),
            lambda_tol: 1e-3,
            mismatch_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BreatherVerdict {
    /// `λ` equal, alignment found, `Q ≈ 0` and soliton residuals small.
    SolitonConfirmed,
    NotBreather,
    /// Breather-like data whose conjugate density is not a soliton potential.
    BreatherNotSoliton,
    Inconclusive(String),
}

#[derive(Debug, Clone)]
pub struct BreatherReport {
    pub alignment: Alignment,
    pub lambda_t1: MinimizerResult,
    pub lambda_t2: MinimizerResult,
    pub entropy: Option<EntropyReport>,
    pub solitons: Vec<SolitonReport>,
    pub verdict: BreatherVerdict,
}

impl BreatherReport {
    pub fn lambda_gap(&self) -> f64 {
        self.lambda_t2.lambda - self.lambda_t1.lambda
    }
}

/// The breather test between `t₁ < t₂`: alignment, `λ` comparison, then
/// the conjugate-heat entropy audit and soliton residuals.
pub fn breather_check(
    traj: &FlowTrajectory,
    t1: f64,
    t2: f64,
    opts: &BreatherOptions,
) -> Result<BreatherReport> {
    if !(t1 < t2) {
        return invalid("breather check needs t1 < t2");
    }
    let i1 = traj.index_of(t1)?;
    let i2 = traj.index_of(t2)?;
    let g1 = &traj.snapshots[i1];
    let g2 = &traj.snapshots[i2];
    let alignment = align(g1, g2)?;
    let lam1 = continuation_alpha(g1, Domain::Whole, &opts.schedule, None)?.result;
    let lam2 = continuation_alpha(g2, Domain::Whole, &opts.schedule, None)?.result;
    let gap = (lam2.lambda - lam1.lambda).abs();
    let mut report = BreatherReport {
        alignment,
        lambda_t1: lam1,
        lambda_t2: lam2,
        entropy: None,
        solitons: Vec::new(),
        verdict: BreatherVerdict::NotBreather,
    };
    if gap > opts.lambda_tol {
        return Ok(report);
    }
    if alignment.mismatch > opts.mismatch_tol {
        report.verdict = BreatherVerdict::Inconclusive(format!(
            "lambda gap {gap:.2e} within tolerance but no alignment (mismatch {:.2e})",
            alignment.mismatch
        ));
        return Ok(report);
    }
    let v2 = &report.lambda_t2.v;
    let u2 = RadialFunction::new(v2.values.iter().map(|x| x * x).collect());
    let chs = conjugate_heat_backward(traj, &u2, t2, t1)?;
    let entropy = entropy_audit(traj, &chs)?;
    let mut solitons = Vec::new();
    for &c in traj.checkpoints.iter().filter(|&&c| c >= i1 && c <= i2) {
        solitons.push(soliton_residual(traj, &chs, traj.times[c])?);
    }
    let q_small = entropy.rows.iter().all(|r| r.q_over_f.abs() <= SOLITON_TOL);
    let verdict = if !(report.lambda_t1.converged && report.lambda_t2.converged) {
        BreatherVerdict::Inconclusive(format!(
            "minimizer not converged (residuals {:.2e}, {:.2e}; resolved {}, {})",
            report.lambda_t1.residual,
            report.lambda_t2.residual,
            report.lambda_t1.resolved,
            report.lambda_t2.resolved
        ))
    } else if q_small && solitons.iter().all(|s| s.verdict == SolitonVerdict::Soliton) {
        BreatherVerdict::SolitonConfirmed
    } else if solitons.iter().any(|s| s.verdict == SolitonVerdict::NotSoliton) {
        BreatherVerdict::BreatherNotSoliton
    } else {
        BreatherVerdict::Inconclusive("soliton residuals between thresholds".into())
    };
    report.entropy = Some(entropy);
    report.solitons = solitons;
    report.verdict = verdict;
    Ok(report)
}
