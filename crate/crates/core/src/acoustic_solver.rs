//! Upwind solver for the acoustic limit in characteristic variables, closed
//! at both walls by half-space layer problems.
//!
//! Unknowns live on the nodes `x_j = x_min + j h`, `j = 0..=N`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::halfspace_solver::{Inflow, LayerConfig, LayerSolver, WallSide};
use crate::linearization::{acoustic_system, AcousticSystem, ReferenceState, TildeMoments};
use crate::phase_grid::{profile_csv, MacroState};

/// Incoming data at a wall as a function of time.
#[derive(Clone)]
pub enum BoundaryProfile {
    /// Physical mode coefficients of `phi = sum_k c_k(t) chi_k`.
    Modes(Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>),
    /// Physical `phi(t, v)`; sampled on a half-line grid of spacing `dv`.
    Function { f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, v_cut: f64, dv: f64 },
}

impl BoundaryProfile {
    pub fn zero() -> Self {
        BoundaryProfile::Modes(Arc::new(|_| [0.0; 3]))
    }

    pub fn modes(f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        BoundaryProfile::Modes(Arc::new(f))
    }

    /// Frame inflow for a wall at time `t`.
    fn frame_inflow(&self, side: WallSide, t: f64) -> Inflow {
        match self {
            BoundaryProfile::Modes(c) => Inflow::Modes(side.to_frame(c(t))),
            BoundaryProfile::Function { f, v_cut, dv } => {
                let n = (v_cut / dv).round() as usize;
                let nodes: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * dv).collect();
                let values = nodes.iter().map(|&w| f(t, side.frame_velocity(w))).collect();
                Inflow::Samples { nodes, values, dv: *dv }
            }
        }
    }
}

impl std::fmt::Debug for BoundaryProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryProfile::Modes(_) => f.write_str("BoundaryProfile::Modes"),
            BoundaryProfile::Function { v_cut, dv, .. } => write!(f, "BoundaryProfile::Function(v_cut={v_cut}, dv={dv})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ClosureKind {
    /// Half-space layer problems at both walls.
    Layer,
    /// Copy the neighbouring interior value (no layer physics).
    Extrapolation,
}

#[derive(Debug, Clone)]
pub struct AcousticState {
    pub x: Vec<f64>,
    /// `eta[i][j]`: mode `i` at node `j`.
    pub eta: [Vec<f64>; 3],
    pub t: f64,
}

impl AcousticState {
    pub fn from_tilde(sys: &AcousticSystem, x_min: f64, x_max: f64, cells: usize, f: impl Fn(f64) -> TildeMoments) -> Result<Self> {
        if cells == 0 || !(x_max > x_min) {
            return Err(Error::InvalidConfig("acoustic mesh needs at least one cell".into()));
        }
        let h = (x_max - x_min) / cells as f64;
        let x: Vec<f64> = (0..=cells).map(|j| x_min + j as f64 * h).collect();
        let mut eta = [vec![0.0; cells + 1], vec![0.0; cells + 1], vec![0.0; cells + 1]];
        for (j, &xj) in x.iter().enumerate() {
            let e = sys.eta_from_tilde(&f(xj));
            for i in 0..3 {
                eta[i][j] = e[i];
            }
        }
        Ok(Self { x, eta, t: 0.0 })
    }

    pub fn h(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    pub fn eta_at(&self, j: usize) -> [f64; 3] {
        [self.eta[0][j], self.eta[1][j], self.eta[2][j]]
    }

    /// `(rho~, u~, T~)` per node.
    pub fn tilde_profile(&self, sys: &AcousticSystem) -> Vec<MacroState> {
        (0..self.nodes())
            .map(|j| {
                let tm = sys.tilde_from_eta(self.eta_at(j));
                MacroState::new(tm.rho, tm.u, tm.temp)
            })
            .collect()
    }

    pub fn to_csv(&self, sys: &AcousticSystem) -> String {
        profile_csv(&self.x, &self.tilde_profile(sys), self.t)
    }
}

/// Upwind every mode away from its inflow wall. Inflow-side end values are
/// left untouched for the closures; zero-speed modes do not move.
pub fn advect_eta(state: &AcousticState, speeds: [f64; 3], dt: f64) -> Result<AcousticState> {
    let h = state.h();
    let smax = speeds.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let cfl = smax * dt / h;
    if cfl > 1.0 + 1e-12 {
        return Err(Error::CflViolation { cfl, limit: 1.0 });
    }
    let mut out = state.clone();
    out.t = state.t + dt;
    let n = state.nodes();
    for i in 0..3 {
        let lam = speeds[i] * dt / h;
        let e = &state.eta[i];
        let o = &mut out.eta[i];
        if speeds[i] > 0.0 {
            for j in 1..n {
                o[j] = e[j] - lam * (e[j] - e[j - 1]);
            }
        } else if speeds[i] < 0.0 {
            for j in 0..n - 1 {
                o[j] = e[j] - lam * (e[j + 1] - e[j]);
            }
        }
    }
    Ok(out)
}

/// One wall's closure: layer solver in that wall's frame.
#[derive(Debug)]
pub struct WallClosure {
    side: WallSide,
    physical: ReferenceState,
    solver: Arc<LayerSolver>,
}

impl WallClosure {
    pub fn new(r: &ReferenceState, side: WallSide, config: LayerConfig) -> Result<Self> {
        let frame = side.frame_reference(r);
        Ok(Self {
            side,
            physical: *r,
            solver: Arc::new(LayerSolver::new(&frame, config)?),
        })
    }

    pub fn with_solver(r: &ReferenceState, side: WallSide, solver: Arc<LayerSolver>) -> Self {
        Self {
            side,
            physical: *r,
            solver,
        }
    }

    pub fn side(&self) -> WallSide {
        self.side
    }

    pub fn solver(&self) -> &LayerSolver {
        &self.solver
    }

    /// Physical modes that carry information into the domain at this wall.
    pub fn incoming_modes(&self) -> Vec<usize> {
        let p = self.physical.partition();
        match self.side {
            WallSide::Left => p.positive,
            WallSide::Right => p.negative,
        }
    }

    /// Physical modes leaving the domain through this wall.
    pub fn outgoing_modes(&self) -> Vec<usize> {
        let p = self.physical.partition();
        match self.side {
            WallSide::Left => p.negative,
            WallSide::Right => p.positive,
        }
    }

    /// End-state coefficients of the layer for wall data `inflow` (frame)
    /// and the known outgoing `eta` values. Returns physical `xi` of the
    /// whole layer solution, outgoing modes included.
    pub fn solve(&self, inflow: &Inflow, eta: [f64; 3]) -> Result<[f64; 3]> {
        let xi_phys = self.physical.eta_to_xi(eta);
        let mut known = [0.0; 3];
        for k in self.outgoing_modes() {
            known[k] = xi_phys[k];
        }
        let frame_known = self.side.to_frame(known);
        let modified = inflow.minus_modes(self.solver.reference(), frame_known);
        let sol = self.solver.solve(&modified)?;
        let mut xi = self.side.to_physical(sol.xi);
        for k in self.outgoing_modes() {
            xi[k] = known[k];
        }
        Ok(xi)
    }

    /// `eta` values for the incoming modes, as `(mode, value)` pairs.
    pub fn closure(&self, inflow: &Inflow, eta: [f64; 3]) -> Result<Vec<(usize, f64)>> {
        let xi = self.solve(inflow, eta)?;
        let e = self.physical.xi_to_eta(xi);
        Ok(self.incoming_modes().into_iter().map(|k| (k, e[k])).collect())
    }
}

/// Left-wall closure values `(mode, eta)` for the right-going modes.
pub fn left_closure(state: &AcousticState, phi: &BoundaryProfile, t: f64, wall: &WallClosure) -> Result<Vec<(usize, f64)>> {
    wall.closure(&phi.frame_inflow(WallSide::Left, t), state.eta_at(0))
}

/// Right-wall closure values `(mode, eta)` for the left-going modes.
pub fn right_closure(state: &AcousticState, phi: &BoundaryProfile, t: f64, wall: &WallClosure) -> Result<Vec<(usize, f64)>> {
    wall.closure(&phi.frame_inflow(WallSide::Right, t), state.eta_at(state.nodes() - 1))
}

#[derive(Debug, Clone)]
pub struct AcousticConfig {
    pub reference: ReferenceState,
    pub dt: f64,
    pub left: BoundaryProfile,
    pub right: BoundaryProfile,
    pub layer: LayerConfig,
    pub closure: ClosureKind,
}

/// Algorithm state: the system, both wall closures and the configuration.
#[derive(Debug)]
pub struct AcousticSolver {
    pub config: AcousticConfig,
    pub system: AcousticSystem,
    left: WallClosure,
    right: WallClosure,
}

impl AcousticSolver {
    pub fn new(config: AcousticConfig) -> Result<Self> {
        let r = config.reference;
        let (left, right) = rayon::join(
            || WallClosure::new(&r, WallSide::Left, config.layer),
            || WallClosure::new(&r, WallSide::Right, config.layer),
        );
        Ok(Self {
            system: acoustic_system(&r),
            left: left?,
            right: right?,
            config,
        })
    }

    pub fn left_wall(&self) -> &WallClosure {
        &self.left
    }

    pub fn right_wall(&self) -> &WallClosure {
        &self.right
    }

    /// Advect, solve both wall layers with data at `t + dt`, assign the
    /// inflow-side boundary values.
    pub fn step(&self, state: &AcousticState, dt: f64) -> Result<AcousticState> {
        let mut next = advect_eta(state, self.system.d, dt)?;
        let t1 = next.t;
        let last = next.nodes() - 1;
        let (lv, rv) = match self.config.closure {
            ClosureKind::Layer => {
                let (l, r) = rayon::join(
                    || left_closure(&next, &self.config.left, t1, &self.left),
                    || right_closure(&next, &self.config.right, t1, &self.right),
                );
                (l?, r?)
            }
            ClosureKind::Extrapolation => (
                self.left.incoming_modes().into_iter().map(|k| (k, next.eta[k][1])).collect(),
                self.right.incoming_modes().into_iter().map(|k| (k, next.eta[k][last - 1])).collect(),
            ),
        };
        for (k, v) in lv {
            next.eta[k][0] = v;
        }
        for (k, v) in rv {
            next.eta[k][last] = v;
        }
        Ok(next)
    }

    pub fn run(&self, initial: AcousticState, t_final: f64) -> Result<AcousticState> {
        let (steps, dt) = crate::kinetic_solver::step_plan(initial.t, t_final, self.config.dt);
        let t0 = initial.t;
        let mut s = initial;
        for n in 0..steps {
            s = self.step(&s, dt)?;
            s.t = t0 + (n + 1) as f64 * dt;
        }
        Ok(s)
    }
}
