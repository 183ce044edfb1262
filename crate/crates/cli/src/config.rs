//! Experiment configuration (TOML) and its dry-run validation.

use std::fmt;
use std::path::{Path, PathBuf};

use entroflow_core::flow::cfl_bound;
use entroflow_core::minimizer::ContinuationSchedule;
use entroflow_core::{uniform_grid, Profile, WarpedMetric};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Lambda,
    LambdaInfinity,
    Flow,
    EntropyAudit,
    BreatherCheck,
    Noncollapse,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Lambda => "lambda",
            Kind::LambdaInfinity => "lambda-infinity",
            Kind::Flow => "flow",
            Kind::EntropyAudit => "entropy-audit",
            Kind::BreatherCheck => "breather-check",
            Kind::Noncollapse => "noncollapse",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Seeds the Sobolev trial set; nothing else is random.
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub metric: MetricSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub flow: Option<FlowSpec>,
    pub entropy: Option<EntropySpec>,
    pub breather: Option<BreatherSpec>,
    pub noncollapse: Option<NoncollapseSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default = "default_dim")]
    pub n: usize,
    pub profile: Option<ProfileSpec>,
    pub grid: Option<GridSpec>,
    /// Explicit samples with columns `x, phi, psi`, relative to the config.
    pub csv: Option<PathBuf>,
}

fn default_dim() -> usize {
    3
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Flat,
    SphereCap { radius: f64 },
    Cylinder { radius: f64 },
    Schwarzschild { mass: f64, core: f64 },
    GaussianBump { mass: f64, width: f64 },
    DeepWell { delta: f64, core: f64, neck: f64 },
}

impl ProfileSpec {
    pub fn profile(self) -> Profile {
        match self {
            ProfileSpec::Flat => Profile::Flat,
            ProfileSpec::SphereCap { radius } => Profile::SphereCap { radius },
            ProfileSpec::Cylinder { radius } => Profile::Cylinder { radius },
            ProfileSpec::Schwarzschild { mass, core } => Profile::Schwarzschild { mass, core },
            ProfileSpec::GaussianBump { mass, width } => Profile::GaussianBump { mass, width },
            ProfileSpec::DeepWell { delta, core, neck } => Profile::DeepWell { delta, core, neck },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub alphas: Option<Vec<f64>>,
    pub tolerances: Option<Vec<f64>>,
    #[serde(default)]
    pub radii: Vec<f64>,
    pub max_iterations: Option<usize>,
}

impl ScheduleSpec {
    pub fn build(&self) -> entroflow_core::Result<ContinuationSchedule> {
        let mut s = ContinuationSchedule::standard(self.radii.clone())?;
        if let Some(a) = &self.alphas {
            let tol = self.tolerances.clone().unwrap_or_else(|| vec![1e-5; a.len()]);
            s = ContinuationSchedule::new(a.clone(), self.radii.clone(), tol)?;
        } else if let Some(t) = &self.tolerances {
            s = ContinuationSchedule::new(s.alphas.clone(), self.radii.clone(), t.clone())?;
        }
        if let Some(m) = self.max_iterations {
            s.max_iterations = m;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub t_end: f64,
    /// Defaults to the stability bound of the initial metric.
    pub dt: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub clamp: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalDensity {
    /// Normalized `e^{-s²/(4 scale)}` in arclength.
    #[default]
    Gaussian,
    /// Square of the `λ` minimizer at `t₂`.
    Minimizer,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    #[serde(default)]
    pub final_density: FinalDensity,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreatherSpec {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub lambda_tol: Option<f64>,
    pub mismatch_tol: Option<f64>,
    /// Builds `g(t₂) = c·m*g(t₁)` from the configured metric instead of
    /// running a flow.
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub c: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default)]
    pub d: f64,
    /// Coordinate extent of the pulled-back grid.
    pub y_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoncollapseSpec {
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    /// Also compute `λ(g(t))` at every checkpoint of a flow audit.
    #[serde(default)]
    pub lambda: bool,
}

/// A config file with its raw bytes and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub bytes: Vec<u8>,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| format!("{} is not UTF-8", path.display()))?;
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| format!("malformed config {}: {e}", path.display()))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, bytes, dir })
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x: f64,
    phi: f64,
    psi: f64,
}

impl LoadedConfig {
    pub fn metric(&self) -> Result<WarpedMetric, String> {
        let m = &self.config.metric;
        match (&m.profile, &m.csv) {
            (Some(p), None) => {
                let grid = m.grid.ok_or("metric.profile needs a [metric.grid] section")?;
                if !(grid.x_max > 0.0) || grid.cells < 16 {
                    return Err("metric.grid needs x_max > 0 and at least 16 cells".into());
                }
                p.profile().build(m.n, &uniform_grid(grid.x_max, grid.cells)).map_err(|e| e.to_string())
            }
            (None, Some(path)) => {
                let path = self.dir.join(path);
                let mut rdr = csv::Reader::from_path(&path)
                    .map_err(|e| format!("cannot read metric samples {}: {e}", path.display()))?;
                let (mut x, mut phi, mut psi) = (Vec::new(), Vec::new(), Vec::new());
                for row in rdr.deserialize::<SampleRow>() {
                    let row = row.map_err(|e| format!("bad metric sample row: {e}"))?;
                    x.push(row.x);
                    phi.push(row.phi);
                    psi.push(row.psi);
                }
                WarpedMetric::new(m.n, x, phi, psi).map_err(|e| e.to_string())
            }
            (None, None) => Err("missing metric profile: set metric.profile or metric.csv".into()),
            (Some(_), Some(_)) => Err("metric.profile and metric.csv are mutually exclusive".into()),
        }
    }
}

/// Outcome of a dry run.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            writeln!(f, "ok")?;
        }
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        for n in &self.notes {
            writeln!(f, "{n}")?;
        }
        Ok(())
    }
}

fn positive(report: &mut ValidationReport, name: &str, v: Option<f64>) {
    if let Some(v) = v {
        if !(v > 0.0) {
            report.errors.push(format!("{name} must be positive (got {v})"));
        }
    }
}

/// Schema and resource checks without running anything.
pub fn validate(loaded: &LoadedConfig) -> ValidationReport {
    let cfg = &loaded.config;
    let mut report = ValidationReport::default();
    let metric = match loaded.metric() {
        Ok(g) => {
            report.notes.push(format!("grid nodes: {}", g.len()));
            Some(g)
        }
        Err(e) => {
            report.errors.push(e);
            None
        }
    };
    if cfg.metric.n < 3 {
        report.errors.push("metric.n must be at least 3".into());
    }
    match cfg.schedule.build() {
        Ok(s) => {
            if cfg.kind == Kind::LambdaInfinity && s.radii.is_empty() {
                report.errors.push("lambda-infinity needs schedule.radii".into());
            }
        }
        Err(e) => report.errors.push(format!("schedule: {e}")),
    }
    let synthetic = cfg.breather.as_ref().and_then(|b| b.synthetic);
    let needs_flow = match cfg.kind {
        Kind::Flow | Kind::EntropyAudit => true,
        Kind::BreatherCheck => synthetic.is_none(),
        _ => false,
    };
    if needs_flow && cfg.flow.is_none() {
        report.errors.push(format!("kind {} needs a [flow] section", cfg.kind));
    }
    if cfg.kind == Kind::Noncollapse {
        match &cfg.noncollapse {
            None => report.errors.push("kind noncollapse needs a [noncollapse] section".into()),
            Some(nc) => {
                if nc.centers.is_empty() || nc.radii.is_empty() {
                    report.errors.push("noncollapse.centers and noncollapse.radii must be non-empty".into());
                }
                if nc.radii.iter().any(|r| !(*r > 0.0)) || nc.centers.iter().any(|c| !(*c >= 0.0)) {
                    report.errors.push("noncollapse radii must be positive and centres nonnegative".into());
                }
            }
        }
    }
    if let Some(fl) = &cfg.flow {
        positive(&mut report, "flow.t_end", Some(fl.t_end));
        positive(&mut report, "flow.dt", fl.dt);
        if let Some(g) = &metric {
            let bound = cfl_bound(g);
            let dt = fl.dt.unwrap_or(bound);
            if dt > bound {
                report.warnings.push(format!("flow.dt = {dt} exceeds the stability bound {bound}"));
            }
            if fl.t_end > 0.0 && dt > 0.0 {
                let steps = (fl.t_end / dt).ceil();
                report.notes.push(format!("estimated steps: {steps}"));
                report.notes.push(format!("estimated node updates: {:e}", steps * g.len() as f64));
            }
        }
        let t_end = fl.t_end;
        let mut window = |name: &str, t1: Option<f64>, t2: Option<f64>| {
            let (a, b) = (t1.unwrap_or(0.0), t2.unwrap_or(t_end));
            if !(0.0 <= a && a < b && b <= t_end) {
                report.errors.push(format!("{name}: need 0 <= t1 < t2 <= t_end (got {a}, {b})"));
            }
        };
        if let Some(e) = &cfg.entropy {
            window("entropy", e.t1, e.t2);
        }
        if let Some(b) = &cfg.breather {
            if b.synthetic.is_none() {
                window("breather", b.t1, b.t2);
            }
        }
    }
    if let Some(e) = &cfg.entropy {
        positive(&mut report, "entropy.scale", Some(e.scale));
    }
    if let Some(b) = &cfg.breather {
        positive(&mut report, "breather.lambda_tol", b.lambda_tol);
        positive(&mut report, "breather.mismatch_tol", b.mismatch_tol);
        if let Some(s) = b.synthetic {
            positive(&mut report, "breather.synthetic.c", Some(s.c));
            positive(&mut report, "breather.synthetic.b", Some(s.b));
            positive(&mut report, "breather.synthetic.y_max", Some(s.y_max));
        }
    }
    report
}
