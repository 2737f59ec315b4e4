//! Test scenarios, error metrics and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustic_solver::{AcousticConfig, AcousticSolver, AcousticState, BoundaryProfile, ClosureKind};
use crate::coupling::{CoupledConfig, CoupledState, CoupledSystem, EndCondition, EndConditionFn, KineticRegion, Orientation};
use crate::error::{Error, Result};
use crate::euler_solver::{EulerField, DEFAULT_CFL};
use crate::halfspace_solver::{Inflow, LayerConfig, LayerSolver};
use crate::kinetic_solver::{run_kinetic, EpsProfile, InflowFn, KineticConfig, KineticMode, Snapshot};
use crate::linearization::{infinitesimal_maxwellian_at, ReferenceState, TildeMoments};
use crate::phase_grid::{maxwellian_at, profile_csv, DistributionField, MacroState, SpatialMesh, VelocityGrid};

pub const DEFAULT_WINDOW: [f64; 2] = [0.1, 0.9];
pub const DEFAULT_T_FINAL: f64 = 0.1;
pub const FULL_EPS: [f64; 4] = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];

/// Test id `1..=6` or a custom linear scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr", into = "ScenarioRepr")]
pub enum Scenario {
    Test(u8),
    Custom,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScenarioRepr {
    Id(u8),
    Name(String),
}

impl TryFrom<ScenarioRepr> for Scenario {
    type Error = String;
    fn try_from(r: ScenarioRepr) -> std::result::Result<Self, String> {
        match r {
            ScenarioRepr::Id(n @ 1..=6) => Ok(Scenario::Test(n)),
            ScenarioRepr::Name(s) if s == "custom" => Ok(Scenario::Custom),
            ScenarioRepr::Name(s) => s
                .parse::<u8>()
                .ok()
                .filter(|n| (1..=6).contains(n))
                .map(Scenario::Test)
                .ok_or_else(|| format!("unknown test {s:?}")),
            ScenarioRepr::Id(n) => Err(format!("test id {n} not in 1..=6")),
        }
    }
}

impl From<Scenario> for ScenarioRepr {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Test(n) => ScenarioRepr::Id(n),
            Scenario::Custom => ScenarioRepr::Name("custom".into()),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Test(n) => write!(f, "test{n}"),
            Scenario::Custom => f.write_str("custom"),
        }
    }
}

/// Left-wall ramp rate for test 5: `F_l = (1 + rate t) M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    Small,
    Large,
}

impl Perturbation {
    pub fn rate(self) -> f64 {
        match self {
            Perturbation::Small => 5.0,
            Perturbation::Large => 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub test: Scenario,
    pub eps: Vec<f64>,
    /// Kinetic reference mesh width and time step.
    pub kinetic_h: f64,
    pub kinetic_dt: f64,
    /// Velocity refinement: `32 M` cells on `[-16, 16]`.
    pub velocity_refinement: usize,
    /// Limit solver (acoustic or Euler) mesh width and time step.
    pub limit_h: f64,
    pub limit_dt: f64,
    pub spectral_order: usize,
    pub alpha: f64,
    /// `(rho, u, T)` linearization state; linear scenarios only.
    #[serde(default)]
    pub reference: Option<[f64; 3]>,
    /// Sine amplitude of the initial tilde fields; linear scenarios only.
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub perturbation: Perturbation,
    pub t_final: f64,
    pub window: [f64; 2],
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Write per-step coupling diagnostics.
    #[serde(default)]
    pub diagnostics: bool,
}

impl RunConfig {
    /// Defaults for a scenario. Desk scale halves the kinetic resolution
    /// and uses a coarser velocity grid.
    pub fn preset(test: Scenario, paper_scale: bool) -> Self {
        let (kinetic_h, velocity_refinement) = if paper_scale { (1e-3, 100) } else { (2e-3, 8) };
        let (reference, amplitude) = match test {
            Scenario::Test(1) => (Some([1.0, 1.0, 1.0]), Some(1.5)),
            Scenario::Test(2) | Scenario::Test(3) => (Some([1.0, 2.0, 0.5]), Some(1.25)),
            Scenario::Custom => (Some([1.0, 1.0, 1.0]), Some(1.0)),
            _ => (None, None),
        };
        Self {
            test,
            eps: if paper_scale { FULL_EPS.to_vec() } else { FULL_EPS[..3].to_vec() },
            kinetic_h,
            kinetic_dt: kinetic_h / 20.0,
            velocity_refinement,
            limit_h: 5e-3,
            limit_dt: 1e-3,
            spectral_order: 30,
            alpha: 1.0,
            reference,
            amplitude,
            perturbation: Perturbation::Small,
            t_final: DEFAULT_T_FINAL,
            window: DEFAULT_WINDOW,
            output_dir: None,
            seed: 0,
            diagnostics: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("eps values must be positive");
        }
        for (name, v) in [
            ("kinetic_h", self.kinetic_h),
            ("kinetic_dt", self.kinetic_dt),
            ("limit_h", self.limit_h),
            ("limit_dt", self.limit_dt),
            ("alpha", self.alpha),
            ("t_final", self.t_final),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.velocity_refinement == 0 || self.spectral_order == 0 {
            return bad("grid parameters must be positive");
        }
        if !(self.window[0] < self.window[1]) {
            return bad("empty error window");
        }
        if let Scenario::Test(n) = self.test {
            if !(1..=6).contains(&n) {
                return bad("test id must be in 1..=6");
            }
        }
        if self.is_linear() {
            let Some(r) = self.reference else {
                return bad("linear scenarios need a reference state");
            };
            ReferenceState::new(r[0], r[1], r[2])?;
            if self.amplitude.is_none() {
                return bad("linear scenarios need an amplitude");
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.test, Scenario::Test(1..=3) | Scenario::Custom)
    }

    pub fn layer(&self) -> LayerConfig {
        LayerConfig {
            order: self.spectral_order,
            alpha: self.alpha,
        }
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::standard(self.velocity_refinement)
    }
}

/// Macroscopic profile sampled at increasing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub states: Vec<MacroState>,
    pub t: f64,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        profile_csv(&self.x, &self.states, self.t)
    }
}

/// Quadrature weights of the dual cells `[x_{i-1/2}, x_{i+1/2}]` clipped to
/// the window; the end samples extend by half a neighbour spacing.
fn dual_weights(x: &[f64], window: [f64; 2]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::GridMismatch("need at least two samples".into()));
    }
    if x.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::GridMismatch("sample positions not increasing".into()));
    }
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            let l = if i == 0 { x[0] - 0.5 * (x[1] - x[0]) } else { 0.5 * (x[i - 1] + x[i]) };
            let r = if i == n - 1 { x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]) } else { 0.5 * (x[i] + x[i + 1]) };
            (r.min(window[1]) - l.max(window[0])).max(0.0)
        })
        .collect())
}

fn nearest(x: &[f64], p: f64) -> Result<usize> {
    let k = x.partition_point(|&a| a < p);
    let i = match k {
        0 => 0,
        k if k == x.len() => k - 1,
        k if p - x[k - 1] <= x[k] - p => k - 1,
        k => k,
    };
    let spacing = if i + 1 < x.len() { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
    if (x[i] - p).abs() > 0.5 * spacing * (1.0 + 1e-9) {
        return Err(Error::GridMismatch(format!("no reference cell within reach of x = {p}")));
    }
    Ok(i)
}

/// `D_X = ||X_ref - X_limit||_{L2(window)}` for `X = rho, u, T`, with the
/// reference sampled at the nearest cell of each limit sample.
pub fn error_metrics(limit: &Profile, reference: &Profile, window: [f64; 2]) -> Result<[f64; 3]> {
    if limit.x.len() != limit.states.len() || reference.x.len() != reference.states.len() {
        return Err(Error::GridMismatch("profile lengths".into()));
    }
    let w = dual_weights(&limit.x, window)?;
    if reference.x.len() < 2 || reference.x.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::GridMismatch("reference positions".into()));
    }
    let mut sums = [0.0; 3];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let j = nearest(&reference.x, limit.x[i])?;
        let (a, b) = (limit.states[i].as_array(), reference.states[j].as_array());
        for k in 0..3 {
            sums[k] += wi * (b[k] - a[k]).powi(2);
        }
    }
    Ok(sums.map(f64::sqrt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of `log D` against `log eps`.
pub fn convergence_slope(eps: &[f64], errors: &[f64]) -> Result<Fit> {
    if eps.len() != errors.len() || eps.len() < 2 {
        return Err(Error::DegenerateFit("need at least two (eps, error) pairs".into()));
    }
    if errors.iter().chain(eps).any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit("errors and eps must be positive".into()));
    }
    let n = eps.len() as f64;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all eps equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(Fit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub eps: f64,
    pub d_rho: f64,
    pub d_u: f64,
    #[serde(rename = "d_T")]
    pub d_temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub test: Scenario,
    pub window: [f64; 2],
    pub entries: Vec<ErrorEntry>,
    /// Fits for `rho`, `u`, `T`; absent with fewer than two usable runs.
    pub slopes: Option<[Fit; 3]>,
    pub failures: Vec<RunFailure>,
    pub partial: bool,
}

impl ErrorReport {
    pub fn new(test: Scenario, window: [f64; 2], mut entries: Vec<ErrorEntry>, failures: Vec<RunFailure>) -> Self {
        entries.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        let slopes = fit_entries(&entries);
        let partial = !failures.is_empty();
        Self {
            test,
            window,
            entries,
            slopes,
            failures,
            partial,
        }
    }

    /// Refit the slopes from the stored entries.
    pub fn refit(&mut self) {
        self.slopes = fit_entries(&self.entries);
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from("eps,D_rho,D_u,D_T\n");
        for e in &self.entries {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", e.eps, e.d_rho, e.d_u, e.d_temp);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fit_entries(entries: &[ErrorEntry]) -> Option<[Fit; 3]> {
    let eps: Vec<f64> = entries.iter().map(|e| e.eps).collect();
    let fit = |f: fn(&ErrorEntry) -> f64| {
        let d: Vec<f64> = entries.iter().map(f).collect();
        convergence_slope(&eps, &d)
    };
    match (fit(|e| e.d_rho), fit(|e| e.d_u), fit(|e| e.d_temp)) {
        (Ok(a), Ok(b), Ok(c)) => Some([a, b, c]),
        (a, b, c) => {
            if entries.len() >= 2 {
                for e in [a.err(), b.err(), c.err()].into_iter().flatten() {
                    warn!("slope fit skipped: {e}");
                }
            }
            None
        }
    }
}

/// Mode coefficients `(c_0, c_+, c_-)` of wall data as a function of time.
type ModeData = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

struct LinearSetup {
    reference: ReferenceState,
    amplitude: f64,
    left: ModeData,
    right: ModeData,
}

impl LinearSetup {
    fn of(cfg: &RunConfig) -> Result<Self> {
        let r = cfg.reference.ok_or_else(|| Error::InvalidConfig("missing reference".into()))?;
        let reference = ReferenceState::new(r[0], r[1], r[2])?;
        let amplitude = cfg.amplitude.ok_or_else(|| Error::InvalidConfig("missing amplitude".into()))?;
        let zero: ModeData = Arc::new(|_| [0.0; 3]);
        let left: ModeData = match cfg.test {
            Scenario::Test(2) => Arc::new(|t| [t; 3]),
            Scenario::Test(3) => Arc::new(|t| [1.0 + t; 3]),
            _ => zero.clone(),
        };
        Ok(Self {
            reference,
            amplitude,
            left,
            right: zero,
        })
    }

    fn tilde(&self, x: f64) -> TildeMoments {
        let s = self.amplitude * (2.0 * std::f64::consts::PI * x).sin();
        TildeMoments::new(s, s, s)
    }

    fn kinetic_inflow(&self, c: &ModeData) -> InflowFn {
        let (c, r) = (c.clone(), self.reference);
        Arc::new(move |t, v| {
            let a = c(t);
            let chi = r.chi_all(v);
            a[0] * chi[0] + a[1] * chi[1] + a[2] * chi[2]
        })
    }
}

struct NonlinearSetup {
    left: InflowFn,
    right: InflowFn,
    initial: Arc<dyn Fn(f64) -> MacroState + Send + Sync>,
    /// `(split, eps on the kinetic side)`; the kinetic side is `x < split`.
    coupled: Option<(f64, f64)>,
}

fn maxwellian_inflow(s: MacroState, ramp: f64) -> InflowFn {
    Arc::new(move |t, v| (1.0 + ramp * t) * maxwellian_at(&s, v))
}

impl NonlinearSetup {
    fn of(cfg: &RunConfig) -> Result<Self> {
        let a = MacroState::new(1.0, 0.1, 1.0);
        let b = MacroState::new(2.0, 0.2, 2.0);
        Ok(match cfg.test {
            Scenario::Test(4) => Self {
                left: Arc::new(|_, _| 0.0),
                right: maxwellian_inflow(a, 0.0),
                initial: Arc::new(move |_| a),
                coupled: None,
            },
            Scenario::Test(5) => Self {
                left: maxwellian_inflow(a, cfg.perturbation.rate()),
                right: maxwellian_inflow(a, 0.0),
                initial: Arc::new(move |_| a),
                coupled: None,
            },
            Scenario::Test(6) => Self {
                left: maxwellian_inflow(a, 0.0),
                right: maxwellian_inflow(b, 0.0),
                initial: Arc::new(move |x| if x <= 0.5 { a } else { b }),
                coupled: Some((0.5, 1.0)),
            },
            other => return Err(Error::InvalidConfig(format!("{other} is not a nonlinear scenario"))),
        })
    }
}

/// Fine-grid BGK solution at `t_final` for one Knudsen number.
pub fn reference_solution(cfg: &RunConfig, eps: f64) -> Result<Profile> {
    let grid = cfg.velocity_grid()?;
    let mesh = SpatialMesh::with_spacing(0.0, 1.0, cfg.kinetic_h)?;
    let (config, field) = if cfg.is_linear() {
        let setup = LinearSetup::of(cfg)?;
        let r = setup.reference;
        let field = DistributionField::from_fn(mesh.clone(), grid, |x, v| infinitesimal_maxwellian_at(&setup.tilde(x), &r, v));
        let config = KineticConfig {
            eps: EpsProfile::uniform(&mesh, eps)?,
            dt: cfg.kinetic_dt,
            mode: KineticMode::linearized(r, &field),
            left: setup.kinetic_inflow(&setup.left),
            right: setup.kinetic_inflow(&setup.right),
        };
        (config, field)
    } else {
        let setup = NonlinearSetup::of(cfg)?;
        let init = setup.initial.clone();
        let field = DistributionField::from_fn(mesh.clone(), grid, |x, v| maxwellian_at(&init(x), v));
        let eps_profile = match setup.coupled {
            Some((split, kin)) => EpsProfile::piecewise(&mesh, split, kin, eps)?,
            None => EpsProfile::uniform(&mesh, eps)?,
        };
        let config = KineticConfig {
            eps: eps_profile,
            dt: cfg.kinetic_dt,
            mode: KineticMode::Nonlinear,
            left: setup.left,
            right: setup.right,
        };
        (config, field)
    };
    let traj = run_kinetic(&config, field, cfg.t_final, &[])?;
    let snap = Snapshot::of(&traj.final_field, &config.mode)?;
    Ok(Profile {
        x: snap.x,
        states: snap.states,
        t: snap.t,
    })
}

/// Limit-solver output plus bookkeeping.
#[derive(Debug, Clone)]
pub struct LimitRun {
    pub profile: Profile,
    pub clamp_events: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub diagnostics: Option<String>,
}

/// Acoustic limit (linear scenarios) or Euler with layer coupling.
pub fn limit_solution(cfg: &RunConfig) -> Result<LimitRun> {
    if cfg.is_linear() {
        let setup = LinearSetup::of(cfg)?;
        let (l, r) = (setup.left.clone(), setup.right.clone());
        let solver = AcousticSolver::new(AcousticConfig {
            reference: setup.reference,
            dt: cfg.limit_dt,
            left: BoundaryProfile::modes(move |t| l(t)),
            right: BoundaryProfile::modes(move |t| r(t)),
            layer: cfg.layer(),
            closure: ClosureKind::Layer,
        })?;
        let cells = (1.0 / cfg.limit_h).round().max(1.0) as usize;
        let init = AcousticState::from_tilde(&solver.system, 0.0, 1.0, cells, |x| setup.tilde(x))?;
        let state = solver.run(init, cfg.t_final)?;
        let states = state.tilde_profile(&solver.system);
        return Ok(LimitRun {
            profile: Profile {
                x: state.x.clone(),
                states,
                t: state.t,
            },
            clamp_events: 0,
            cache_hits: 0,
            cache_misses: 0,
            diagnostics: None,
        });
    }
    let setup = NonlinearSetup::of(cfg)?;
    let grid = cfg.velocity_grid()?;
    let init = setup.initial.clone();
    let (config, state) = match setup.coupled {
        None => {
            let mesh = SpatialMesh::with_spacing(0.0, 1.0, cfg.limit_h)?;
            let euler = EulerField::from_primitive(mesh.clone(), |x| init(x))?;
            let config = CoupledConfig {
                fluid_mesh: mesh,
                orientation: Orientation::FluidLeft,
                kinetic: None,
                grid,
                dt: cfg.limit_dt,
                layer: cfg.layer(),
                cfl_limit: DEFAULT_CFL,
                fluid_left: EndCondition::Wall(setup.left),
                fluid_right: EndCondition::Wall(setup.right),
                record_diagnostics: cfg.diagnostics,
            };
            (config, CoupledState {
                euler,
                kinetic: None,
                previous: [None, None],
                t: 0.0,
                steps: 0,
            })
        }
        Some((split, kin_eps)) => {
            let fluid = SpatialMesh::with_spacing(split, 1.0, cfg.limit_h)?;
            let kin = SpatialMesh::with_spacing(0.0, split, cfg.kinetic_h)?;
            let euler = EulerField::from_primitive(fluid.clone(), |x| init(x))?;
            let field = DistributionField::from_fn(kin.clone(), grid.clone(), |x, v| maxwellian_at(&init(x), v));
            let config = CoupledConfig {
                fluid_mesh: fluid,
                orientation: Orientation::FluidRight,
                kinetic: Some(KineticRegion {
                    eps: EpsProfile::uniform(&kin, kin_eps)?,
                    mesh: kin,
                    wall: EndConditionFn(setup.left),
                }),
                grid,
                // one step size for both parts
                dt: cfg.kinetic_dt.min(cfg.limit_dt),
                layer: cfg.layer(),
                cfl_limit: DEFAULT_CFL,
                fluid_left: EndCondition::Interface,
                fluid_right: EndCondition::Wall(setup.right),
                record_diagnostics: cfg.diagnostics,
            };
            (config, CoupledState {
                euler,
                kinetic: Some(field),
                previous: [None, None],
                t: 0.0,
                steps: 0,
            })
        }
    };
    let mut sys = CoupledSystem::new(config)?;
    let out = sys.run(state, cfg.t_final)?;
    let (x, states) = sys.profile(&out)?;
    Ok(LimitRun {
        profile: Profile { x, states, t: out.t },
        clamp_events: sys.clamp_events,
        cache_hits: sys.cache.hits(),
        cache_misses: sys.cache.misses(),
        diagnostics: cfg.diagnostics.then(|| sys.diagnostics_csv()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: RunConfig,
    pub version: String,
    pub clamp_events: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Wall-clock seconds per run, keyed by `limit` or the eps value.
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub report: ErrorReport,
    pub limit: LimitRun,
    pub references: Vec<(f64, Profile)>,
    pub meta: Meta,
}

/// Run the limit solver once and the kinetic reference for every eps, in
/// parallel, and compare them.
pub fn run_test(cfg: &RunConfig) -> Result<TestOutcome> {
    cfg.validate()?;
    let timed = |f: &dyn Fn() -> Result<Profile>| {
        let t0 = Instant::now();
        (f(), t0.elapsed().as_secs_f64())
    };
    let (limit, refs) = rayon::join(
        || {
            let t0 = Instant::now();
            (limit_solution(cfg), t0.elapsed().as_secs_f64())
        },
        || {
            cfg.eps
                .par_iter()
                .map(|&e| (e, timed(&|| reference_solution(cfg, e))))
                .collect::<Vec<_>>()
        },
    );
    let (limit, limit_time) = (limit.0?, limit.1);
    let mut timings = vec![("limit".to_string(), limit_time)];
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut references = Vec::new();
    for (eps, (res, secs)) in refs {
        timings.push((format!("{eps:e}"), secs));
        match res.and_then(|p| error_metrics(&limit.profile, &p, cfg.window).map(|d| (p, d))) {
            Ok((p, d)) => {
                info!("{} eps={eps:e}: D = {d:?} ({secs:.1}s)", cfg.test);
                entries.push(ErrorEntry {
                    eps,
                    d_rho: d[0],
                    d_u: d[1],
                    d_temp: d[2],
                });
                references.push((eps, p));
            }
            Err(e) => {
                warn!("{} eps={eps:e} failed: {e}", cfg.test);
                failures.push(RunFailure {
                    eps,
                    message: e.to_string(),
                });
            }
        }
    }
    let report = ErrorReport::new(cfg.test, cfg.window, entries, failures);
    let meta = Meta {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        clamp_events: limit.clamp_events,
        cache_hits: limit.cache_hits,
        cache_misses: limit.cache_misses,
        timings,
    };
    Ok(TestOutcome {
        report,
        limit,
        references,
        meta,
    })
}

fn eps_tag(eps: f64) -> String {
    let inv = 1.0 / eps;
    if (inv - inv.round()).abs() < 1e-9 {
        format!("eps_1_{}", inv.round() as u64)
    } else {
        format!("eps_{eps:e}")
    }
}

/// Write profiles, `errors.csv`, `report.json` and `meta.json` to `dir`.
pub fn write_outputs(outcome: &TestOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("limit.csv"), outcome.limit.profile.to_csv())?;
    for (eps, p) in &outcome.references {
        std::fs::write(dir.join(format!("reference_{}.csv", eps_tag(*eps))), p.to_csv())?;
    }
    if let Some(d) = &outcome.limit.diagnostics {
        std::fs::write(dir.join("diagnostics.csv"), d)?;
    }
    std::fs::write(dir.join("errors.csv"), outcome.report.errors_csv())?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json()?)?;
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&outcome.meta)?)?;
    Ok(())
}

/// End-state coefficients and wall trace of a single layer problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub xi: [f64; 3],
    /// `(w, f(0, w))` on both half-lines.
    pub trace: Vec<[f64; 2]>,
}

impl LayerReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("w,f\n");
        for [w, f] in &self.trace {
            let _ = writeln!(s, "{w:.16e},{f:.16e}");
        }
        s
    }
}

/// Solve one layer problem with sampled incoming data `phi(w)`, `w > 0`.
pub fn layer_solve(r: &ReferenceState, layer: LayerConfig, nodes: Vec<f64>, values: Vec<f64>) -> Result<LayerReport> {
    let dv = uniform_spacing(&nodes)?;
    let solver = LayerSolver::new(r, layer)?;
    let mut ws: Vec<f64> = nodes.iter().rev().map(|w| -w).collect();
    ws.extend(&nodes);
    let sol = solver.solve(&Inflow::Samples { nodes, values, dv })?;
    let tr = solver.trace(&sol, &ws);
    Ok(LayerReport {
        xi: sol.xi,
        trace: ws.into_iter().zip(tr).map(|(w, f)| [w, f]).collect(),
    })
}

fn uniform_spacing(nodes: &[f64]) -> Result<f64> {
    if nodes.len() < 2 || nodes[0] <= 0.0 {
        return Err(Error::InvalidConfig("inflow needs at least two positive nodes".into()));
    }
    let dv = nodes[1] - nodes[0];
    if nodes.windows(2).any(|p| ((p[1] - p[0]) - dv).abs() > 1e-9 * dv.max(1.0)) || !(dv > 0.0) {
        return Err(Error::InvalidConfig("inflow nodes must be evenly spaced".into()));
    }
    Ok(dv)
}

/// Parse `w,phi` rows; a non-numeric first line is taken as a header.
pub fn parse_inflow_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2)
            .then(|| Some((cols[0].parse::<f64>().ok()?, cols[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some((w, f)) => {
                nodes.push(w);
                values.push(f);
            }
            None if nodes.is_empty() && i == 0 => continue,
            None => return Err(Error::InvalidConfig(format!("bad inflow row {}: {line:?}", i + 1))),
        }
    }
    uniform_spacing(&nodes)?;
    Ok((nodes, values))
}
