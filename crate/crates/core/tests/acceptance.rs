//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria run concurrently and report in order. The process fails when a
//! criterion fails that is not listed in `KNOWN_FAILURES`, or when a listed
//! one starts passing (so the list cannot go stale).

mod common;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use common::{scalar, symbolic_curvature};
use entroflow_core::flow::{
    breather_check, cfl_bound, conjugate_heat_backward, entropy_audit, ricci_evolve, ricci_evolve_with,
    BreatherOptions, BreatherVerdict, FlowOptions, FlowTrajectory,
};
use entroflow_core::functionals::{
    log_sobolev_l, s_n, sobolev_constant, DiscreteOps, Domain, TrialSet,
};
use entroflow_core::geometry::{
    ball_volume, curvature, pullback_on_grid, radial_reparametrize, scale_metric, BumpMap,
};
use entroflow_core::minimizer::{
    continuation_alpha, gaussian_distance, lambda_infinity, lambda_whole, ContinuationSchedule, MinimizerResult,
};
use entroflow_core::noncollapse::{alltime_audit, kappa_scan};
use entroflow_core::{uniform_grid, Profile, RadialFunction, WarpedMetric};

/// Criteria that fail for documented numerical reasons.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    11,
    "flat sub-case: lattice drift of the discrete alpha = 1 minimizer keeps soliton residuals near 2e-6",
)];

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    log: String,
}

struct Check {
    pass: bool,
    log: String,
}

impl Check {
    fn new() -> Self {
        Self { pass: true, log: String::new() }
    }

    fn expect(&mut self, ok: bool, what: impl AsRef<str>) {
        let _ = writeln!(self.log, "    [{}] {}", if ok { "ok" } else { "FAILED" }, what.as_ref());
        self.pass &= ok;
    }

    fn note(&mut self, what: impl AsRef<str>) {
        let _ = writeln!(self.log, "    {}", what.as_ref());
    }
}

fn deep_well(cells: usize) -> WarpedMetric {
    Profile::DeepWell { delta: 0.05, core: 1.0, neck: 10.0 }.build(3, &uniform_grid(60.0, cells)).unwrap()
}

fn bump(x_max: f64, cells: usize) -> WarpedMetric {
    Profile::GaussianBump { mass: 0.3, width: 1.5 }.build(3, &uniform_grid(x_max, cells)).unwrap()
}

fn flat(x_max: f64, cells: usize) -> WarpedMetric {
    Profile::Flat.build(3, &uniform_grid(x_max, cells)).unwrap()
}

fn schedule() -> ContinuationSchedule {
    ContinuationSchedule::standard(vec![]).unwrap()
}

/// `(4πs)^{-3/2} e^{-r²/(4s)}` in arclength.
fn heat_kernel(g: &WarpedMetric, s: f64) -> RadialFunction {
    RadialFunction::from_fn(g.arclength(), |r| (4.0 * PI * s).powf(-1.5) * (-r * r / (4.0 * s)).exp())
}

/// Heat-kernel shape renormalized to unit discrete mass on `g`.
fn unit_gaussian(g: &WarpedMetric, s: f64) -> RadialFunction {
    let mut u = heat_kernel(g, s);
    let w = g.quadrature_weights();
    let m: f64 = w.iter().zip(&u.values).map(|(a, b)| a * b).sum();
    u.values.iter_mut().for_each(|x| *x /= m);
    u
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn c1_curvature() -> Check {
    let mut c = Check::new();
    let cases = [
        (Profile::Flat, 10.0),
        (Profile::SphereCap { radius: 1.0 }, 1.5),
        (Profile::Cylinder { radius: 1.0 }, 6.0),
        (Profile::Schwarzschild { mass: 0.5, core: 1.0 }, 10.0),
        (Profile::GaussianBump { mass: 0.4, width: 1.5 }, 10.0),
    ];
    let error = |p: &Profile, x_max: f64, cells: usize| {
        let grid = uniform_grid(x_max, cells);
        let g = p.build(3, &grid).unwrap();
        let k = curvature(&g).unwrap();
        grid.iter().enumerate().fold(0.0f64, |e, (i, &x)| {
            let (k1, k2) = symbolic_curvature(p, x);
            e.max((k.k1[i] - k1).abs()).max((k.k2[i] - k2).abs()).max((k.r[i] - scalar(3, k1, k2)).abs())
        })
    };
    for (p, x_max) in cases {
        let (e1, e2, e3) = (error(&p, x_max, 200), error(&p, x_max, 400), error(&p, x_max, 800));
        // flat space is reproduced exactly; only rounding (~eps/h²) remains
        if e1 < 1e-9 {
            c.expect(e2 < 1e-9 && e3 < 1e-9, format!("{p:?}: exact to rounding ({e1:.1e}, {e2:.1e}, {e3:.1e})"));
            continue;
        }
        let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
        let h = x_max / 800.0;
        c.expect(
            o1 >= 1.9 && o2 >= 1.9,
            format!("{p:?}: errors {e1:.2e} {e2:.2e} {e3:.2e}, orders {o1:.2} {o2:.2}, C = {:.2e}", e3 / (h * h)),
        );
    }
    c
}

fn c2_flat_lambda() -> Check {
    let mut c = Check::new();
    let g = flat(20.0, 1000);
    let s = ContinuationSchedule::standard(vec![5.0, 10.0, 19.0]).unwrap();
    let sweep = lambda_whole(&g, &s).unwrap();
    let (dist, sigma) = gaussian_distance(&g, &sweep.result.v).unwrap();
    c.expect(sweep.lambda().abs() <= 1e-2, format!("lambda_whole = {:.3e}", sweep.lambda()));
    c.expect(dist <= 0.05, format!("L2 distance to best Gaussian {dist:.2e} (sigma {sigma:.3e})"));
    c.note(format!(
        "radius sweep {:?}; final stage converged {}, resolved {}",
        sweep.lambdas.iter().map(|(r, l)| format!("{r}: {l:.3e}")).collect::<Vec<_>>(),
        sweep.result.converged,
        sweep.result.resolved
    ));
    let whole = continuation_alpha(&g, Domain::Whole, &schedule(), None).unwrap().result;
    let (d2, s2) = gaussian_distance(&g, &whole.v).unwrap();
    c.note(format!(
        "whole-grid continuation: lambda {:.3e}, residual {:.1e}, converged {}, Gaussian distance {d2:.1e} (sigma {s2:.3})",
        whole.lambda, whole.residual, whole.converged
    ));
    c
}

/// Independent `β = λ + α(n/2) - α(n/2) ln F - s_n` (no negative part).
fn beta_oracle(alpha: f64, lambda: f64, f: f64) -> f64 {
    let n = 3.0;
    let s3 = -(n / 2.0) * (2.0 * PI * n).ln() - n / 2.0;
    lambda + alpha * n / 2.0 - alpha * n / 2.0 * f.ln() - s3
}

/// `β` from the discrete Euler–Lagrange equation tested against `v`.
fn beta_projected(g: &WarpedMetric, res: &MinimizerResult) -> f64 {
    let ops = DiscreteOps::new(g, res.domain).unwrap();
    let v = &res.v.values;
    let a = res.alpha * 1.5 / res.f;
    -ops.integrate(|i| {
        let lap = ops.laplacian_at(v, i);
        let log = if v[i] > 0.0 { 2.0 * v[i] * v[i].ln() } else { 0.0 };
        v[i] * (a * (4.0 * lap - ops.r[i] * v[i]) + log)
    })
}

fn c3_euler_lagrange() -> Check {
    let mut c = Check::new();
    let b = bump(20.0, 1000);
    let w = deep_well(2400);
    let fixtures: Vec<(&str, &WarpedMetric, Domain)> = vec![
        ("bump ball r=10", &b, Domain::Ball(10.0)),
        ("bump ball r=3", &b, Domain::Ball(3.0)),
        ("bump whole", &b, Domain::Whole),
        ("deep well whole", &w, Domain::Whole),
    ];
    let mut converged = 0;
    for (name, g, domain) in fixtures {
        let run = continuation_alpha(g, domain, &schedule(), None).unwrap();
        for st in &run.stages {
            if !st.converged {
                c.note(format!("{name} alpha {}: not converged (residual {:.1e}), skipped", st.alpha, st.residual));
                continue;
            }
            converged += 1;
            let beta = beta_oracle(st.alpha, st.lambda, st.f);
            let mut ok = st.residual <= 1e-5 && (st.beta - beta).abs() <= 1e-12 * beta.abs().max(1.0);
            if st.lambda < 0.0 {
                let q = st.alpha * 3.0 / 4.0;
                let bound = (-q).exp() * st.f.powf(q) * (0.5 * s_n(3)).exp();
                ok &= st.m >= bound;
            }
            c.expect(ok, format!("{name} alpha {}: residual {:.1e}, beta {:.6}, lambda {:.4}", st.alpha, st.residual, st.beta, st.lambda));
        }
        let res = &run.result;
        if res.converged {
            let bp = beta_projected(g, res);
            let lagrange = -res.alpha * 1.5 + res.n_entropy + res.beta;
            c.expect(
                lagrange.abs() <= 1e-4 && (bp - res.beta).abs() <= 1e-4 * res.beta.abs().max(1.0),
                format!("{name}: Lagrange identity {lagrange:.1e}, projected beta {bp:.6} vs {:.6}", res.beta),
            );
            if res.lambda < 0.0 {
                c.expect(
                    res.m >= res.max_lower_bound(),
                    format!("{name}: max v {:.4} >= {:.4}", res.m, res.max_lower_bound()),
                );
            }
        }
    }
    c.expect(converged >= 15, format!("{converged} converged stages checked"));
    c
}

fn c4_continuation() -> Check {
    let mut c = Check::new();
    let g = bump(20.0, 1000);
    let r = 10.0;
    let run = continuation_alpha(&g, Domain::Ball(r), &schedule(), None).unwrap();
    let a = sobolev_constant(&g, &TrialSet::standard(&g, 1)).unwrap().a;
    let vol = ball_volume(&g, r).unwrap();
    let lam_g = continuation_alpha(&g, Domain::Whole, &schedule(), None).unwrap().result.lambda;
    let lam: Vec<f64> = run.stages.iter().map(|s| s.lambda).collect();
    let gaps: Vec<f64> = lam.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    c.note(format!("lambda(alpha) = {:?}", lam.iter().map(|l| format!("{l:.5}")).collect::<Vec<_>>()));
    c.expect(gaps.windows(2).all(|w| w[1] < w[0]), format!("successive gaps shrink: {}", sci(&gaps)));
    let last = *gaps.last().unwrap();
    c.expect(
        last <= 1e-2 && run.result.converged,
        format!("|lambda(1.01) - lambda(1)| = {last:.2e} (alpha = 1 converged {})", run.result.converged),
    );
    for st in &run.stages {
        let spread = (st.alpha - 1.0) * 1.5 * (a * vol.powf(2.0 / 3.0)).ln();
        // the weaker form uses -n/2 in place of λ(g); both are checked
        let printed = -1.5 - spread;
        let sharp = lam_g - spread;
        c.expect(
            st.lambda >= printed && st.lambda >= sharp,
            format!("alpha {}: lambda {:.4} >= {:.4} (with lambda(g) = {lam_g:.4}: {:.4})", st.alpha, st.lambda, printed, sharp),
        );
    }
    c.note(format!("A = {a:.4e}, |B| = {vol:.2}"));
    c
}

fn c5_invariance() -> Check {
    let mut c = Check::new();
    let g = bump(20.0, 1000);
    let base = continuation_alpha(&g, Domain::Whole, &schedule(), None).unwrap().result;
    for a in [0.25, 4.0, 9.0] {
        let gs = scale_metric(&g, a).unwrap();
        let v = RadialFunction::new(base.v.values.iter().map(|x| x * a.powf(-0.75)).collect());
        let moved = log_sobolev_l(&v, &gs, 1.0, Domain::Whole).unwrap().l;
        let fresh = continuation_alpha(&gs, Domain::Whole, &schedule(), None).unwrap().result.lambda;
        c.expect(
            (moved - base.lambda).abs() <= 1e-8 && (fresh - base.lambda).abs() <= 1e-8,
            format!("scale {a}: transported {:.1e}, re-minimized {:.1e}", moved - base.lambda, fresh - base.lambda),
        );
    }
    for map in [BumpMap { a: 0.1, b: 3.0, d: 0.0 }, BumpMap { a: -0.2, b: 2.0, d: 0.1 }] {
        let gr = radial_reparametrize(&g, &map).unwrap();
        let l = continuation_alpha(&gr, Domain::Whole, &schedule(), None).unwrap().result.lambda;
        c.expect((l - base.lambda).abs() <= 1e-3, format!("{map:?}: change {:.2e}", l - base.lambda));
    }
    c
}

fn c6_condition_a() -> Check {
    let mut c = Check::new();
    let g = deep_well(2400);
    let min_r = curvature(&g).unwrap().min_r();
    c.expect(min_r > 0.0, format!("min R = {min_r:.3e}"));
    let lam = continuation_alpha(&g, Domain::Whole, &schedule(), None).unwrap().result;
    c.expect(lam.lambda < -0.1 && lam.converged, format!("lambda(g) = {:.5} (converged {})", lam.lambda, lam.converged));
    let s = ContinuationSchedule::standard(vec![10.0, 15.0]).unwrap();
    let inf = lambda_infinity(&g, &s).unwrap();
    let est = inf.lambdas[0].1;
    c.expect(est >= -1e-2, format!("lambda_inf estimate {est:.4} (exteriors {:?})", inf.lambdas));
    c
}

fn c7_fixed_point() -> Check {
    let mut c = Check::new();
    let g = flat(10.0, 200);
    let traj = ricci_evolve(&g, 1.0, cfl_bound(&g)).unwrap();
    let last = traj.snapshots.last().unwrap();
    let drift = (0..g.len())
        .map(|i| (last.phi()[i] - g.phi()[i]).abs().max((last.psi()[i] - g.psi()[i]).abs()))
        .fold(0.0, f64::max);
    c.expect(drift <= 1e-8, format!("flat drift over T = 1: {drift:.1e}"));
    let b = bump(12.0, 240);
    let dt = cfl_bound(&b);
    let t_end = 0.1;
    for a in [0.5, 2.0] {
        let lhs = ricci_evolve(&scale_metric(&b, a).unwrap(), a * t_end, a * dt).unwrap();
        let rhs = scale_metric(ricci_evolve(&b, t_end, dt).unwrap().snapshots.last().unwrap(), a).unwrap();
        let l = lhs.snapshots.last().unwrap();
        let err = (0..b.len())
            .map(|i| (l.phi()[i] - rhs.phi()[i]).abs().max((l.psi()[i] - rhs.psi()[i]).abs()))
            .fold(0.0, f64::max);
        c.expect(err <= 1e-6, format!("rescaling by {a} over t = {t_end}: {err:.1e}"));
    }
    c
}

fn c8_conjugate_heat() -> Check {
    let mut c = Check::new();
    let g = flat(16.0, 640);
    let traj = ricci_evolve(&g, 0.5, cfl_bound(&g)).unwrap();
    let t2 = *traj.times.last().unwrap();
    let chs = conjugate_heat_backward(&traj, &heat_kernel(&g, 1.0), t2, 0.0).unwrap();
    let exact = heat_kernel(&g, 1.0 + t2);
    let w = g.quadrature_weights();
    let got = chs.densities.last().unwrap();
    let err: f64 = (0..g.len()).map(|i| w[i] * (got.values[i] - exact.values[i]).abs()).sum();
    c.expect(err <= 1e-4, format!("flat Gaussian s0 = 1 over {t2}: relative L1 error {err:.2e}"));
    let fixtures: Vec<(&str, WarpedMetric, f64)> =
        vec![("flat", g.clone(), 0.5), ("bump", bump(12.0, 240), 0.5), ("deep well", deep_well(2400), 0.5)];
    for (name, g0, t_end) in fixtures {
        let traj = ricci_evolve(&g0, t_end, cfl_bound(&g0)).unwrap();
        let t2 = *traj.times.last().unwrap();
        let chs = conjugate_heat_backward(&traj, &unit_gaussian(traj.snapshots.last().unwrap(), 1.0), t2, 0.0).unwrap();
        let drift = chs.mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max) / t2;
        c.expect(drift <= 1e-6, format!("{name}: mass drift per unit time {drift:.1e}"));
    }
    c
}

struct EntropyRun {
    traj: FlowTrajectory,
    report: entroflow_core::flow::EntropyReport,
}

fn entropy_run(g: &WarpedMetric, t_end: f64, dt: f64, s0: f64) -> EntropyRun {
    let traj = ricci_evolve(g, t_end, dt).unwrap();
    let t2 = *traj.times.last().unwrap();
    let u2 = unit_gaussian(traj.snapshots.last().unwrap(), s0);
    let chs = conjugate_heat_backward(&traj, &u2, t2, 0.0).unwrap();
    let report = entropy_audit(&traj, &chs).unwrap();
    EntropyRun { traj, report }
}

fn c9_entropy() -> Check {
    let mut c = Check::new();
    // bump on two grids with a common step, so L can be extrapolated in h
    let coarse_g = bump(12.0, 240);
    let fine_g = bump(12.0, 480);
    let dt = cfl_bound(&fine_g);
    let coarse = entropy_run(&coarse_g, 0.5, dt, 1.0);
    let fine = entropy_run(&fine_g, 0.5, dt, 1.0);
    let well = entropy_run(&deep_well(2400), 0.5, cfl_bound(&deep_well(2400)), 4.0);
    for (name, run) in [("bump 240", &coarse), ("bump 480", &fine), ("deep well", &well)] {
        let rows = &run.report.rows;
        let min_r = run.traj.min_r.iter().cloned().fold(f64::INFINITY, f64::min);
        c.expect(run.traj.nonnegative_r && min_r >= -1e-6, format!("{name}: R >= 0 initially, min R along flow {min_r:.1e}"));
        c.expect(rows.len() >= 6, format!("{name}: {} checkpoints", rows.len()));
        c.expect(run.report.w_monotone, format!("{name}: W = {:?}", rows.iter().map(|r| format!("{:.6}", r.w)).collect::<Vec<_>>()));
        let min_q = rows.iter().map(|r| r.q).fold(f64::INFINITY, f64::min);
        c.expect(min_q >= -1e-8, format!("{name}: min Q = {min_q:.3e}"));
        let margins: Vec<f64> = rows
            .iter()
            .filter_map(|r| Some(r.dldt_fd? - (r.q_over_f - r.tol_fd?)))
            .collect();
        c.note(format!("{name}: raw dL/dt - (Q/F - tol_fd) = {}", sci(&margins)));
    }
    c.expect(well.report.dldt_bound, "deep well: raw dL/dt >= Q/F - tol_fd");
    // the difference quotient of L carries an O(h²) spatial bias; remove it
    let (rc, rf) = (&coarse.report.rows, &fine.report.rows);
    let max_qf = rf.iter().map(|r| r.q_over_f.abs()).fold(0.0, f64::max);
    assert_eq!(rc.len(), rf.len());
    for k in 0..rf.len() - 1 {
        assert!((rc[k].t - rf[k].t).abs() < 1e-12);
        let dt = rf[k + 1].t - rf[k].t;
        let d = |rows: &[entroflow_core::flow::EntropyRow]| (rows[k + 1].l - rows[k].l) / dt;
        let extrapolated = (4.0 * d(rf) - d(rc)) / 3.0;
        let tol = entroflow_core::flow::tol_fd(rf[k].q_over_f, rf[k + 1].q_over_f, max_qf);
        c.expect(
            extrapolated >= rf[k].q_over_f - tol,
            format!(
                "bump t = {:.3}: extrapolated dL/dt {extrapolated:.6} >= Q/F {:.6} - tol {tol:.1e}",
                rf[k].t, rf[k].q_over_f
            ),
        );
    }
    c
}

fn c10_lambda_monotone() -> Check {
    let mut c = Check::new();
    let g = deep_well(2400);
    let traj = ricci_evolve(&g, 0.5, cfl_bound(&g)).unwrap();
    let mut rows = Vec::new();
    for t in [0.0, 0.25, 0.5] {
        let k = traj.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs())).unwrap().0;
        let gk = &traj.snapshots[k];
        let lam = continuation_alpha(gk, Domain::Whole, &schedule(), None).unwrap().result;
        let a = sobolev_constant(gk, &TrialSet::standard(gk, 11)).unwrap().a;
        c.note(format!("t = {:.4}: lambda {:.5} (converged {}), A {:.5}", traj.times[k], lam.lambda, lam.converged, a));
        rows.push((lam.lambda, lam.converged, a));
    }
    c.expect(rows.iter().all(|r| r.1), "all minimizers converged");
    c.expect(rows.windows(2).all(|w| w[1].0 >= w[0].0 - 1e-4), "lambda nondecreasing within 1e-4");
    let a0 = rows[0].2;
    c.expect(rows.iter().all(|r| r.2 <= 1.1 * a0), "A(t) <= 1.1 A(0)");
    c
}

fn c11_breather() -> Check {
    let mut c = Check::new();
    let opts = BreatherOptions::standard();
    let g1 = deep_well(2400);
    let map = BumpMap { a: 0.1, b: 3.0, d: 0.0 };
    for scale in [1.7, 0.6] {
        let g2 = pullback_on_grid(&g1, &map, scale, &uniform_grid(55.0, 2400)).unwrap();
        let traj = FlowTrajectory::from_snapshots(vec![0.0, 1.0], vec![g1.clone(), g2]).unwrap();
        let rep = breather_check(&traj, 0.0, 1.0, &opts).unwrap();
        c.expect(
            (rep.alignment.c - scale).abs() <= 1e-4 && rep.lambda_gap().abs() <= 1e-3,
            format!(
                "synthetic c = {scale}: recovered {:.8}, map ({:.5}, {:.5}, {:.1e}), lambda gap {:.1e}, verdict {:?}",
                rep.alignment.c, rep.alignment.map.a, rep.alignment.map.b, rep.alignment.map.d, rep.lambda_gap(), rep.verdict
            ),
        );
    }
    // flat: the flow is static, so every pair of times is a trivial breather
    let g = flat(20.0, 1000);
    let traj = ricci_evolve(&g, 1.0, cfl_bound(&g).min(0.01)).unwrap();
    let rep = breather_check(&traj, 0.0, 1.0, &opts).unwrap();
    c.note(format!(
        "flat: c = {:.6}, lambda {:.3e} / {:.3e}, verdict {:?}",
        rep.alignment.c, rep.lambda_t1.lambda, rep.lambda_t2.lambda, rep.verdict
    ));
    c.expect((rep.alignment.c - 1.0).abs() <= 1e-4 && rep.lambda_gap().abs() <= 1e-3, "flat: c = 1 and equal lambda");
    let residual = rep
        .solitons
        .iter()
        .map(|s| s.residual_traceless.max(s.residual_l))
        .fold(0.0, f64::max);
    let qf = rep.entropy.as_ref().map_or(f64::NAN, |e| e.rows.iter().map(|r| r.q_over_f.abs()).fold(0.0, f64::max));
    c.expect(
        rep.verdict == BreatherVerdict::SolitonConfirmed && residual <= 1e-6,
        format!("flat: soliton residuals {residual:.2e} <= 1e-6, max |Q/F| {qf:.1e}"),
    );
    let w = deep_well(2400);
    let traj = ricci_evolve_with(&w, 1.0, cfl_bound(&w), FlowOptions::default()).unwrap();
    let rep = breather_check(&traj, 0.0, 1.0, &opts).unwrap();
    c.expect(
        rep.lambda_gap() > opts.lambda_tol && rep.verdict == BreatherVerdict::NotBreather,
        format!("deep-well flow: lambda {:.5} -> {:.5}, verdict {:?}", rep.lambda_t1.lambda, rep.lambda_t2.lambda, rep.verdict),
    );
    c
}

fn c12_noncollapse() -> Check {
    let mut c = Check::new();
    let exact = 4.0 * PI / 3.0;
    let g = flat(10.0, 400);
    let rep = kappa_scan(&g, &[0.0, 3.0, 5.0], &[0.5, 1.0, 2.5]).unwrap();
    let kappa = rep.kappa.unwrap();
    c.expect(
        (kappa - exact).abs() <= 1e-3 && rep.samples.iter().all(|s| s.admissible),
        format!("flat kappa {kappa:.6} vs {exact:.6}"),
    );
    let w = deep_well(2400);
    let traj = ricci_evolve(&w, 0.5, cfl_bound(&w)).unwrap();
    let audit = alltime_audit(&traj, &[0.0, 3.0, 8.0], &[0.5, 1.0, 2.0, 2.5], 11, None).unwrap();
    let k0 = audit.checkpoints[0].kappa.unwrap();
    for cp in &audit.checkpoints {
        let k = cp.kappa.unwrap_or(0.0);
        c.expect(k >= 0.5 * k0, format!("deep well t = {:.4}: kappa {k:.4} (kappa(0) = {k0:.4})", cp.t));
    }
    let b = bump(20.0, 800);
    let radii = [0.5, 1.0, 2.0, 5.0];
    let base = kappa_scan(&b, &[0.0, 8.0], &radii).unwrap();
    for a in [0.25f64, 4.0] {
        let scaled: Vec<f64> = radii.iter().map(|r| a.sqrt() * r).collect();
        let centres = [0.0, 8.0 * a.sqrt()];
        let rep = kappa_scan(&scale_metric(&b, a).unwrap(), &centres, &scaled).unwrap();
        let same = base.samples.iter().zip(&rep.samples).all(|(x, y)| {
            x.admissible == y.admissible && (x.ratio - y.ratio).abs() <= 1e-9 * x.ratio && (y.max_r * a - x.max_r).abs() <= 1e-9 * x.max_r.abs().max(1e-12)
        });
        let flags: Vec<bool> = rep.samples.iter().map(|s| s.admissible).collect();
        c.expect(same && flags.contains(&true) && flags.contains(&false), format!("scale {a}: admissibility {flags:?}"));
    }
    c
}

fn main() {
    let start = Instant::now();
    let criteria: Vec<(usize, &'static str, fn() -> Check)> = vec![
        (1, "curvature oracle, second order", c1_curvature),
        (2, "flat log-Sobolev constant", c2_flat_lambda),
        (3, "Euler-Lagrange consistency", c3_euler_lagrange),
        (4, "continuation limit and lower bound", c4_continuation),
        (5, "scale and diffeomorphism invariance", c5_invariance),
        (6, "deep-well gap lambda < lambda_inf", c6_condition_a),
        (7, "flow fixed point and rescaling", c7_fixed_point),
        (8, "conjugate heat kernel and mass", c8_conjugate_heat),
        (9, "entropy monotonicity", c9_entropy),
        (10, "lambda monotone along flow", c10_lambda_monotone),
        (11, "breather pipeline", c11_breather),
        (12, "noncollapsing", c12_noncollapse),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(id, title, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let mut check = f();
                    check.note(format!("({:.1} s)", t.elapsed().as_secs_f64()));
                    Outcome { id, title, pass: check.pass, log: check.log }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut unexpected = Vec::new();
    for o in &outcomes {
        println!("criterion {:>2}: {} - {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.title);
        print!("{}", o.log);
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == o.id);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("    known failure: {why}"),
            (false, None) => unexpected.push(format!("criterion {} failed", o.id)),
            (true, Some(_)) => unexpected.push(format!("criterion {} passes but is listed as a known failure", o.id)),
            (true, None) => {}
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} PASS in {:.1} s", outcomes.len(), start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("{}", unexpected.join("\n"));
        std::process::exit(1);
    }
}
