//! Kinetic/fluid coupling through linearized layer problems.
//!
//! At each Euler end the distribution is linearized about an extrapolated
//! boundary state `U*`; a half-space problem turns the incoming data into
//! the end-state coefficients, which give the Euler flux and, at a
//! kinetic interface, the values the layer sends back into the kinetic
//! region.

use std::fmt::Write as _;
use std::sync::Arc;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::euler_solver::{euler_step, EulerField, Flux};
use crate::halfspace_solver::{GreensCache, Inflow, LayerConfig, LayerSolution, LayerSolver, WallSide};
use crate::kinetic_solver::{split_step, EpsProfile, InflowFn, KineticMode};
use crate::linearization::{
    acoustic_system, infinitesimal_maxwellian_at, NullBasis, ReferenceState, TildeMoments, ZERO_SPEED_TOL,
};
use crate::phase_grid::{DistributionField, MacroState, SpatialMesh, VelocityGrid};

/// Which side of the interface is solved with the Euler equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    FluidLeft,
    FluidRight,
}

/// `U* = U^n + (U^n - U^{n-1}) / 2` in primitives. Returns the state and
/// whether a component had to be clamped to half of `U^n`.
pub fn reference_extrapolation(current: &MacroState, previous: Option<&MacroState>) -> (MacroState, bool) {
    let Some(prev) = previous else {
        return (*current, false);
    };
    let ext = |a: f64, b: f64| a + 0.5 * (a - b);
    let mut s = MacroState::new(
        ext(current.rho, prev.rho),
        ext(current.u, prev.u),
        ext(current.temp, prev.temp),
    );
    let mut clamped = false;
    if !(s.rho > 0.0) {
        s.rho = 0.5 * current.rho;
        clamped = true;
    }
    if !(s.temp > 0.0) {
        s.temp = 0.5 * current.temp;
        clamped = true;
    }
    if clamped {
        warn!("extrapolated reference clamped: {current:?} from {prev:?}");
    }
    (s, clamped)
}

/// `U - U*` as tilde moments.
pub fn fluctuation(current: &MacroState, reference: &ReferenceState) -> TildeMoments {
    TildeMoments::new(
        current.rho - reference.rho(),
        current.u - reference.u(),
        current.temp - reference.temp(),
    )
}

/// Infinitesimal Maxwellian of the fluctuation, sampled on the grid.
pub fn fluctuation_infinitesimal(fluc: &TildeMoments, r: &ReferenceState, grid: &VelocityGrid) -> Vec<f64> {
    grid.sample(|v| infinitesimal_maxwellian_at(fluc, r, v))
}

/// Null-space coefficients of the fluctuation's infinitesimal Maxwellian,
/// in closed form.
pub fn fluctuation_coefficients(fluc: &TildeMoments, r: &ReferenceState) -> [f64; 3] {
    r.eta_to_xi(acoustic_system(r).eta_from_tilde(fluc))
}

/// Velocity-weighted Rayleigh quotients of `m` on the negative modes;
/// zero on the others.
pub fn negative_mode_projection(m: &[f64], nb: &NullBasis) -> Result<[f64; 3]> {
    let grid = nb.grid();
    let mut xi = [0.0; 3];
    for k in nb.partition().negative {
        let chi = nb.chi(k);
        let num = crate::linearization::velocity_inner(m, chi, grid);
        let den = crate::linearization::velocity_inner(chi, chi, grid);
        if den.abs() <= ZERO_SPEED_TOL {
            return Err(Error::ZeroDenominator);
        }
        xi[k] = num / den;
    }
    Ok(xi)
}

/// Layer solution at one Euler end.
#[derive(Debug, Clone)]
pub struct WallSolution {
    pub side: WallSide,
    /// Physical linearization state.
    pub reference: ReferenceState,
    /// Physical end-state coefficients, pinned outgoing modes included.
    pub xi: [f64; 3],
    /// Frame coefficients pinned from the fluctuation.
    pub pinned: [f64; 3],
    pub layer: LayerSolution,
    solver: Arc<LayerSolver>,
}

impl WallSolution {
    /// `int [M* + sqrt(M*) f_inf] v (1, v, v^2/2) dv`.
    pub fn flux(&self) -> Flux {
        let r = &self.reference;
        let mut f = r.maxwellian_flux();
        for k in 0..3 {
            let m = r.mode_flux(k);
            for c in 0..3 {
                f[c] += self.xi[k] * m[c];
            }
        }
        f
    }

    /// Perturbation `f(0, v)` at a physical velocity.
    pub fn trace(&self, v: f64) -> f64 {
        let w = self.side.frame_velocity(v);
        let fr = self.solver.reference();
        let c = fr.chi_all(w);
        let pinned: f64 = (0..3).map(|k| self.pinned[k] * c[k]).sum();
        self.solver.evaluate(&self.layer, 0.0, w) + pinned
    }

    /// `F = M* + sqrt(M*) f(0, v)` on the velocities the layer sends back
    /// across the end it sits at; zero elsewhere.
    pub fn emitted_values(&self, grid: &VelocityGrid) -> Vec<f64> {
        let r = self.reference;
        grid.sample(|v| {
            if self.side.frame_velocity(v) < 0.0 {
                r.maxwellian(v) + r.sqrt_maxwellian(v) * self.trace(v)
            } else {
                0.0
            }
        })
    }

    /// Reconstructed `F` at `z = 0` on all velocities.
    pub fn full_trace(&self, grid: &VelocityGrid) -> Vec<f64> {
        let r = self.reference;
        grid.sample(|v| r.maxwellian(v) + r.sqrt_maxwellian(v) * self.trace(v))
    }
}

/// Solve the layer at an Euler end.
///
/// `data` holds the kinetic distribution `F` on the grid; only the half
/// entering the layer (`v > 0` on the left, `v < 0` on the right) is read.
pub fn solve_wall(
    side: WallSide,
    reference: &ReferenceState,
    fluc: &TildeMoments,
    data: &[f64],
    grid: &VelocityGrid,
    cache: &GreensCache,
    layer: LayerConfig,
) -> Result<WallSolution> {
    if data.len() != grid.len() {
        return Err(Error::GridMismatch("wall data length".into()));
    }
    let solver = cache.get(&side.frame_reference(reference), layer)?;
    let frame = *solver.reference();
    // Physical state of the (rounded) solver.
    let physical = side.frame_reference(&frame);

    let all = fluctuation_coefficients(fluc, &physical);
    let mut known = [0.0; 3];
    let p = physical.partition();
    let outgoing = match side {
        WallSide::Left => p.negative,
        WallSide::Right => p.positive,
    };
    for k in outgoing {
        known[k] = all[k];
    }
    let pinned = side.to_frame(known);

    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (&v, &f) in grid.nodes().iter().zip(data) {
        let w = side.frame_velocity(v);
        if w > 0.0 {
            nodes.push(w);
            values.push(f - physical.maxwellian(v));
        }
    }
    let inflow = Inflow::Perturbation {
        nodes,
        values,
        dv: grid.dv(),
    }
    .minus_modes(&frame, pinned);
    let sol = solver.solve(&inflow)?;
    let frame_xi = [0, 1, 2].map(|k| sol.xi[k] + pinned[k]);
    Ok(WallSolution {
        side,
        reference: physical,
        xi: side.to_physical(frame_xi),
        pinned,
        layer: sol,
        solver,
    })
}

/// Euler flux from a physical wall with prescribed incoming `F`.
pub fn wall_flux(
    side: WallSide,
    data: &[f64],
    current: &MacroState,
    previous: Option<&MacroState>,
    grid: &VelocityGrid,
    cache: &GreensCache,
    layer: LayerConfig,
) -> Result<(Flux, WallSolution, bool)> {
    let (u_star, clamped) = reference_extrapolation(current, previous);
    let r = ReferenceState::from_state(u_star)?;
    let fluc = fluctuation(current, &r);
    let sol = solve_wall(side, &r, &fluc, data, grid, cache, layer)?;
    Ok((sol.flux(), sol, clamped))
}

/// Where the data for one Euler end comes from.
#[derive(Clone)]
pub enum EndCondition {
    /// Physical wall with prescribed incoming distribution `F(t, v)`.
    Wall(InflowFn),
    /// Kinetic subdomain on the other side.
    Interface,
}

impl std::fmt::Debug for EndCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EndCondition::Wall(_) => f.write_str("Wall"),
            EndCondition::Interface => f.write_str("Interface"),
        }
    }
}

/// Kinetic part of a coupled run.
#[derive(Debug, Clone)]
pub struct KineticRegion {
    pub mesh: SpatialMesh,
    pub eps: EpsProfile,
    /// Incoming `F` at the kinetic region's physical wall.
    pub wall: EndConditionFn,
}

/// Wrapper so the region can derive `Debug`.
#[derive(Clone)]
pub struct EndConditionFn(pub InflowFn);

impl std::fmt::Debug for EndConditionFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("InflowFn")
    }
}

#[derive(Debug, Clone)]
pub struct CoupledConfig {
    pub fluid_mesh: SpatialMesh,
    pub orientation: Orientation,
    pub kinetic: Option<KineticRegion>,
    pub grid: VelocityGrid,
    pub dt: f64,
    pub layer: LayerConfig,
    pub cfl_limit: f64,
    /// Euler-end data; an `Interface` end must face the kinetic region.
    pub fluid_left: EndCondition,
    pub fluid_right: EndCondition,
    pub record_diagnostics: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub side: WallSide,
    pub reference: MacroState,
    pub xi: [f64; 3],
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledState {
    pub euler: EulerField,
    pub kinetic: Option<DistributionField>,
    /// Euler boundary-cell states at the previous step, per end.
    pub previous: [Option<MacroState>; 2],
    pub t: f64,
    pub steps: usize,
}

#[derive(Debug)]
pub struct CoupledSystem {
    pub config: CoupledConfig,
    pub cache: GreensCache,
    pub diagnostics: Vec<StepRecord>,
    pub clamp_events: usize,
}

impl CoupledSystem {
    pub fn new(config: CoupledConfig) -> Result<Self> {
        let kinetic_side = match config.orientation {
            Orientation::FluidLeft => &config.fluid_right,
            Orientation::FluidRight => &config.fluid_left,
        };
        let has_interface = matches!(kinetic_side, EndCondition::Interface);
        if has_interface != config.kinetic.is_some() {
            return Err(Error::InvalidConfig(
                "an interface end needs exactly one kinetic region on that side".into(),
            ));
        }
        let other = match config.orientation {
            Orientation::FluidLeft => &config.fluid_left,
            Orientation::FluidRight => &config.fluid_right,
        };
        if matches!(other, EndCondition::Interface) {
            return Err(Error::InvalidConfig("interface on the side without a kinetic region".into()));
        }
        if config.kinetic.is_some() {
            crate::linearization::require_symmetric(&config.grid)?;
        }
        Ok(Self {
            config,
            cache: GreensCache::new(),
            diagnostics: Vec::new(),
            clamp_events: 0,
        })
    }

    /// One step of the coupled scheme: end fluxes and kinetic incoming
    /// values from data at `t_n`, then the Euler and kinetic updates.
    pub fn step(&mut self, state: &CoupledState, dt: f64) -> Result<CoupledState> {
        let cfg = &self.config;
        let t = state.t;
        let n = state.euler.cells.len();
        let cells = [state.euler.cells[0].to_primitive()?, state.euler.cells[n - 1].to_primitive()?];
        let ends = [(WallSide::Left, &cfg.fluid_left), (WallSide::Right, &cfg.fluid_right)];
        let grid = &cfg.grid;

        let data: Vec<Vec<f64>> = ends
            .iter()
            .map(|(side, end)| match end {
                EndCondition::Wall(f) => grid.sample(|v| f(t, v)),
                EndCondition::Interface => {
                    let k = state.kinetic.as_ref().expect("interface has a kinetic field");
                    match side {
                        WallSide::Left => k.cell(k.mesh().cells() - 1).to_vec(),
                        WallSide::Right => k.cell(0).to_vec(),
                    }
                }
            })
            .collect();
        let solve = |i: usize| {
            wall_flux(
                ends[i].0,
                &data[i],
                &cells[i],
                state.previous[i].as_ref(),
                grid,
                &self.cache,
                cfg.layer,
            )
        };
        let (left, right) = rayon::join(|| solve(0), || solve(1));
        let (left, right) = (left?, right?);

        let euler = euler_step(&state.euler, left.0, right.0, dt, cfg.cfl_limit)?;

        let kinetic = match (&state.kinetic, &cfg.kinetic) {
            (Some(field), Some(region)) => {
                let wall = grid.sample(|v| (region.wall.0)(t, v));
                let (lg, rg) = match cfg.orientation {
                    Orientation::FluidLeft => (right.1.emitted_values(grid), wall),
                    Orientation::FluidRight => (wall, left.1.emitted_values(grid)),
                };
                let mut next = split_step(field, &lg, &rg, &region.eps, dt, &KineticMode::Nonlinear)?;
                next.t = t + dt;
                Some(next)
            }
            _ => None,
        };

        for (sol, clamped) in [(&left.1, left.2), (&right.1, right.2)] {
            if clamped {
                self.clamp_events += 1;
            }
            if self.config.record_diagnostics {
                self.diagnostics.push(StepRecord {
                    t,
                    side: sol.side,
                    reference: sol.reference.state(),
                    xi: sol.xi,
                    clamped,
                });
            }
        }
        Ok(CoupledState {
            euler,
            kinetic,
            previous: [Some(cells[0]), Some(cells[1])],
            t: t + dt,
            steps: state.steps + 1,
        })
    }

    pub fn run(&mut self, initial: CoupledState, t_final: f64) -> Result<CoupledState> {
        let (steps, dt) = crate::kinetic_solver::step_plan(initial.t, t_final, self.config.dt);
        let t0 = initial.t;
        let mut s = initial;
        for k in 0..steps {
            s = self.step(&s, dt)?;
            s.t = t0 + (k + 1) as f64 * dt;
            s.euler.t = s.t;
            if let Some(f) = s.kinetic.as_mut() {
                f.t = s.t;
            }
        }
        debug!(
            "coupled run: {steps} steps, cache {} hits / {} misses, {} clamps",
            self.cache.hits(),
            self.cache.misses(),
            self.clamp_events
        );
        Ok(s)
    }

    /// Macroscopic profile over the whole domain, sorted by position.
    pub fn profile(&self, state: &CoupledState) -> Result<(Vec<f64>, Vec<MacroState>)> {
        let mut rows: Vec<(f64, MacroState)> = state
            .euler
            .mesh()
            .centers()
            .into_iter()
            .zip(state.euler.primitives()?)
            .collect();
        if let Some(k) = &state.kinetic {
            rows.extend(k.mesh().centers().into_iter().zip(k.macro_profile()?));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(rows.into_iter().unzip())
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("t,side,rho,u,T,xi0,xi_plus,xi_minus,clamped\n");
        for r in &self.diagnostics {
            let _ = writeln!(
                s,
                "{:.16e},{:?},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t, r.side, r.reference.rho, r.reference.u, r.reference.temp, r.xi[0], r.xi[1], r.xi[2], r.clamped
            );
        }
        s
    }
}
