//! One experiment per config kind, producing an [`Artifacts`] set.

use std::fmt::Write as _;

use entroflow_core::flow::{
    breather_check, cfl_bound, conjugate_heat_backward, entropy_audit, ricci_evolve_with, BreatherOptions,
    BreatherVerdict, FlowOptions, FlowTrajectory,
};
use entroflow_core::functionals::Domain;
use entroflow_core::geometry::{curvature, pullback_on_grid, BumpMap};
use entroflow_core::minimizer::{
    continuation_alpha, lambda_infinity, lambda_whole, ContinuationSchedule, MinimizerResult, StageRecord,
};
use entroflow_core::noncollapse::{alltime_audit, kappa_scan, NoncollapseReport};
use entroflow_core::{uniform_grid, Error, RadialFunction, WarpedMetric};

use crate::artifacts::{num, Artifacts, Cell, Table};
use crate::config::{ExperimentConfig, FinalDensity, FlowSpec, Kind, LoadedConfig};

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug)]
pub enum RunError {
    /// Config is unusable (exit 2).
    Usage(String),
    /// A numerical module failed (exit 1).
    Module(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Module(e)
    }
}

type Out<T> = Result<T, RunError>;

pub fn execute(loaded: &LoadedConfig, ov: Overrides) -> Out<Artifacts> {
    let report = crate::config::validate(loaded);
    if !report.ok() {
        return Err(RunError::Usage(report.errors.join("; ")));
    }
    let cfg = &loaded.config;
    let g = loaded.metric().map_err(RunError::Usage)?;
    let schedule = cfg.schedule.build().map_err(|e| RunError::Usage(e.to_string()))?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let mut art = Artifacts::default();
    match cfg.kind {
        Kind::Lambda => lambda(&g, &schedule, false, &mut art)?,
        Kind::LambdaInfinity => lambda(&g, &schedule, true, &mut art)?,
        Kind::Flow => {
            let traj = flow(&g, cfg, ov)?;
            trajectory_files(&traj, &mut art)?;
        }
        Kind::EntropyAudit => entropy(&g, cfg, ov, &schedule, &mut art)?,
        Kind::BreatherCheck => breather(&g, cfg, ov, &schedule, &mut art)?,
        Kind::Noncollapse => noncollapse(&g, cfg, ov, &schedule, seed, &mut art)?,
    }
    Ok(art)
}

fn stage_table(stages: &[StageRecord]) -> Table {
    let mut t = Table::new(&["alpha", "r", "lambda", "F", "beta", "m", "residual", "iterations"]);
    for s in stages {
        t.row(&[
            Cell::F(s.alpha),
            Cell::F(s.r),
            Cell::F(s.lambda),
            Cell::F(s.f),
            Cell::F(s.beta),
            Cell::F(s.m),
            Cell::F(s.residual),
            Cell::I(s.iterations),
        ]);
    }
    t
}

fn profile_table(g: &WarpedMetric, v: &RadialFunction) -> Table {
    let mut t = Table::new(&["x", "v"]);
    for (x, y) in g.grid().iter().zip(&v.values) {
        t.row(&[Cell::F(*x), Cell::F(*y)]);
    }
    t
}

fn describe(res: &MinimizerResult) -> String {
    format!(
        "lambda = {}\nF = {}\nN = {}\nbeta = {}\nmax_v = {}\nresidual = {}\niterations = {}\nconverged = {}\nresolved = {}\n",
        num(res.lambda),
        num(res.f),
        num(res.n_entropy),
        num(res.beta),
        num(res.m),
        num(res.residual),
        res.iterations,
        res.converged,
        res.resolved
    )
}

fn lambda(g: &WarpedMetric, schedule: &ContinuationSchedule, exterior: bool, art: &mut Artifacts) -> Out<()> {
    if schedule.radii.is_empty() {
        let run = continuation_alpha(g, Domain::Whole, schedule, None)?;
        art.table("stages.csv", stage_table(&run.stages));
        art.table("minimizer.csv", profile_table(g, &run.result.v));
        let mut s = describe(&run.result);
        let _ = writeln!(s, "alpha_monotonicity_flag = {}", run.alpha_monotonicity_flag);
        let _ = writeln!(s, "f_bounded = {}", run.f_bounded);
        art.add("summary.txt", s);
        return Ok(());
    }
    let sweep = if exterior { lambda_infinity(g, schedule)? } else { lambda_whole(g, schedule)? };
    art.table("stages.csv", stage_table(&sweep.stages));
    art.table("minimizer.csv", profile_table(g, &sweep.result.v));
    let mut radii = Table::new(&["r", "lambda"]);
    for (r, l) in &sweep.lambdas {
        radii.row(&[Cell::F(*r), Cell::F(*l)]);
    }
    art.table("radii.csv", radii);
    let mut s = describe(&sweep.result);
    let _ = writeln!(s, "tail = {}", num(sweep.tail));
    art.add("summary.txt", s);
    Ok(())
}

fn flow_spec(cfg: &ExperimentConfig) -> Out<&FlowSpec> {
    cfg.flow.as_ref().ok_or_else(|| RunError::Usage(format!("kind {} needs a [flow] section", cfg.kind)))
}

fn flow(g: &WarpedMetric, cfg: &ExperimentConfig, ov: Overrides) -> Out<FlowTrajectory> {
    let spec = flow_spec(cfg)?;
    let dt = spec.dt.unwrap_or_else(|| cfl_bound(g));
    let defaults = FlowOptions::default();
    let opts = FlowOptions {
        checkpoint_every: ov.checkpoint_every.or(spec.checkpoint_every),
        clamp: spec.clamp.unwrap_or(defaults.clamp),
    };
    Ok(ricci_evolve_with(g, spec.t_end, dt, opts)?)
}

/// Snapshot time closest to `t`.
fn snap(traj: &FlowTrajectory, t: f64) -> f64 {
    let i = traj
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map_or(0, |(i, _)| i);
    traj.times[i]
}

fn trajectory_files(traj: &FlowTrajectory, art: &mut Artifacts) -> Out<()> {
    let mut t = Table::new(&["t", "max_curvature", "min_R", "max_R"]);
    for k in 0..traj.times.len() {
        t.row(&[
            Cell::F(traj.times[k]),
            Cell::F(traj.max_curvature[k]),
            Cell::F(traj.min_r[k]),
            Cell::F(traj.max_r[k]),
        ]);
    }
    art.table("flow.csv", t);
    let g0 = &traj.snapshots[0];
    let mut manifest = format!(
        "n = {}\ndt = {}\nnodes = {}\nx_max = {}\nnonnegative_r = {}\nsnapshots = [\n",
        g0.dim(),
        num(traj.step_size),
        g0.len(),
        num(*g0.grid().last().unwrap()),
        traj.nonnegative_r
    );
    for &c in &traj.checkpoints {
        let name = format!("snapshots/step_{c:07}.csv");
        let g = &traj.snapshots[c];
        let r = curvature(g)?.r;
        let mut s = Table::new(&["x", "phi", "psi", "R"]);
        for i in 0..g.len() {
            s.row(&[Cell::F(g.grid()[i]), Cell::F(g.phi()[i]), Cell::F(g.psi()[i]), Cell::F(r[i])]);
        }
        art.table(&name, s);
        let _ = writeln!(manifest, "  {{ t = {}, step = {c}, file = {name:?} }},", num(traj.times[c]));
    }
    manifest.push_str("]\n");
    art.add("trajectory.toml", manifest);
    Ok(())
}

/// Normalized `e^{-s²/(4σ)}` in arclength.
fn gaussian_density(g: &WarpedMetric, sigma: f64) -> RadialFunction {
    let w = g.quadrature_weights();
    let mut u: Vec<f64> = g.arclength().iter().map(|s| (-s * s / (4.0 * sigma)).exp()).collect();
    let mass: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
    u.iter_mut().for_each(|x| *x /= mass);
    RadialFunction::new(u)
}

fn entropy(
    g: &WarpedMetric,
    cfg: &ExperimentConfig,
    ov: Overrides,
    schedule: &ContinuationSchedule,
    art: &mut Artifacts,
) -> Out<()> {
    let traj = flow(g, cfg, ov)?;
    let t_end = *traj.times.last().unwrap();
    let spec = cfg.entropy.clone();
    let (t1, t2, density, scale) = match &spec {
        Some(e) => (e.t1.unwrap_or(0.0), e.t2.unwrap_or(t_end), e.final_density, e.scale),
        None => (0.0, t_end, FinalDensity::Gaussian, 1.0),
    };
    let (t1, t2) = (snap(&traj, t1), snap(&traj, t2));
    let g2 = &traj.snapshots[traj.index_of(t2)?];
    let u2 = match density {
        FinalDensity::Gaussian => gaussian_density(g2, scale),
        FinalDensity::Minimizer => {
            let v = continuation_alpha(g2, Domain::Whole, schedule, None)?.result.v;
            RadialFunction::new(v.values.iter().map(|x| x * x).collect())
        }
    };
    let chs = conjugate_heat_backward(&traj, &u2, t2, t1)?;
    let rep = entropy_audit(&traj, &chs)?;
    let mut t = Table::new(&["t", "W", "L", "N", "F", "Q", "dLdt_fd", "QoverF"]);
    for r in &rep.rows {
        t.row(&[
            Cell::F(r.t),
            Cell::F(r.w),
            Cell::F(r.l),
            Cell::F(r.n_entropy),
            Cell::F(r.f),
            Cell::F(r.q),
            r.dldt_fd.map_or(Cell::S(String::new()), Cell::F),
            Cell::F(r.q_over_f),
        ]);
    }
    art.table("entropy.csv", t);
    let mut m = Table::new(&["t", "mass"]);
    for k in (0..chs.times.len()).rev().filter(|&k| traj.checkpoints.contains(&chs.indices[k])) {
        m.row(&[Cell::F(chs.times[k]), Cell::F(chs.mass[k])]);
    }
    art.table("mass.csv", m);
    trajectory_files(&traj, art)?;
    art.add(
        "summary.txt",
        format!(
            "t1 = {}\nt2 = {}\nrho0 = {}\nw_monotone = {}\ndldt_bound = {}\nq_nonnegative = {}\n",
            num(t1),
            num(t2),
            num(rep.rho0),
            rep.w_monotone,
            rep.dldt_bound,
            rep.q_nonnegative
        ),
    );
    Ok(())
}

fn breather(
    g: &WarpedMetric,
    cfg: &ExperimentConfig,
    ov: Overrides,
    schedule: &ContinuationSchedule,
    art: &mut Artifacts,
) -> Out<()> {
    let spec = cfg.breather.clone();
    let synthetic = spec.as_ref().and_then(|b| b.synthetic);
    let (traj, t1, t2) = match synthetic {
        Some(s) => {
            let map = BumpMap { a: s.a, b: s.b, d: s.d };
            let g2 = pullback_on_grid(g, &map, s.c, &uniform_grid(s.y_max, g.len() - 1))?;
            (FlowTrajectory::from_snapshots(vec![0.0, 1.0], vec![g.clone(), g2])?, 0.0, 1.0)
        }
        None => {
            let traj = flow(g, cfg, ov)?;
            let t_end = *traj.times.last().unwrap();
            let t1 = snap(&traj, spec.as_ref().and_then(|b| b.t1).unwrap_or(0.0));
            let t2 = snap(&traj, spec.as_ref().and_then(|b| b.t2).unwrap_or(t_end));
            (traj, t1, t2)
        }
    };
    let mut opts = BreatherOptions::standard();
    opts.schedule = ContinuationSchedule { radii: Vec::new(), ..schedule.clone() };
    if let Some(b) = &spec {
        opts.lambda_tol = b.lambda_tol.unwrap_or(opts.lambda_tol);
        opts.mismatch_tol = b.mismatch_tol.unwrap_or(opts.mismatch_tol);
    }
    let rep = breather_check(&traj, t1, t2, &opts)?;
    let verdict = match &rep.verdict {
        BreatherVerdict::SolitonConfirmed => "soliton-confirmed".to_string(),
        BreatherVerdict::NotBreather => "not-breather".to_string(),
        BreatherVerdict::BreatherNotSoliton => "breather-not-soliton".to_string(),
        BreatherVerdict::Inconclusive(why) => format!("inconclusive ({why})"),
    };
    let a = &rep.alignment;
    art.add(
        "breather.txt",
        format!(
            "t1 = {}\nt2 = {}\nc = {}\nmap.a = {}\nmap.b = {}\nmap.d = {}\nmismatch = {}\nlambda_t1 = {}\nlambda_t2 = {}\nlambda_gap = {}\nverdict = {verdict}\n",
            num(t1),
            num(t2),
            num(a.c),
            num(a.map.a),
            num(a.map.b),
            num(a.map.d),
            num(a.mismatch),
            num(rep.lambda_t1.lambda),
            num(rep.lambda_t2.lambda),
            num(rep.lambda_gap()),
        ),
    );
    let mut t = Table::new(&["t", "epsilon", "residual_traceless", "residual_l", "region_nodes", "verdict"]);
    for s in &rep.solitons {
        t.row(&[
            Cell::F(s.t),
            Cell::F(s.epsilon),
            Cell::F(s.residual_traceless),
            Cell::F(s.residual_l),
            Cell::I(s.region_nodes),
            Cell::S(format!("{:?}", s.verdict).to_lowercase()),
        ]);
    }
    art.table("solitons.csv", t);
    Ok(())
}

fn noncollapse(
    g: &WarpedMetric,
    cfg: &ExperimentConfig,
    ov: Overrides,
    schedule: &ContinuationSchedule,
    seed: u64,
    art: &mut Artifacts,
) -> Out<()> {
    let spec = cfg
        .noncollapse
        .as_ref()
        .ok_or_else(|| RunError::Usage("kind noncollapse needs a [noncollapse] section".into()))?;
    let rep: NoncollapseReport = if cfg.flow.is_some() {
        let traj = flow(g, cfg, ov)?;
        let lambda_schedule = ContinuationSchedule { radii: Vec::new(), ..schedule.clone() };
        alltime_audit(&traj, &spec.centers, &spec.radii, seed, spec.lambda.then_some(&lambda_schedule))?
    } else {
        kappa_scan(g, &spec.centers, &spec.radii)?
    };
    let mut t = Table::new(&["t", "center_s", "r", "maxR", "ratio", "admissible"]);
    for s in &rep.samples {
        t.row(&[Cell::F(s.t), Cell::F(s.center), Cell::F(s.r), Cell::F(s.max_r), Cell::F(s.ratio), Cell::B(s.admissible)]);
    }
    art.table("noncollapse.csv", t);
    if !rep.checkpoints.is_empty() {
        let mut c = Table::new(&["t", "sobolev_A", "kappa", "lambda"]);
        let opt = |x: Option<f64>| x.map_or(Cell::S(String::new()), Cell::F);
        for cp in &rep.checkpoints {
            c.row(&[Cell::F(cp.t), Cell::F(cp.sobolev_a), opt(cp.kappa), opt(cp.lambda)]);
        }
        art.table("checkpoints.csv", c);
    }
    let mut s = format!(
        "kappa = {}\nempty = {}\n",
        rep.kappa.map_or("none".to_string(), num),
        rep.empty
    );
    for f in &rep.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    art.add("summary.txt", s);
    Ok(())
}
