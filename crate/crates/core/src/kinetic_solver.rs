//! Explicit phase-space solvers for the BGK equation: upwind transport
//! followed by exact exponential relaxation, in nonlinear form on `F` or
//! linearized about a reference state on `f = (F - M*) / sqrt(M*)`.

use std::sync::Arc;

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linearization::{NullBasis, ReferenceState};
use crate::phase_grid::{maxwellian, moments_of, profile_csv, DistributionField, MacroState, SpatialMesh};

/// Time-dependent inflow profile `(t, v) -> value`.
pub type InflowFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub fn constant_inflow(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> InflowFn {
    Arc::new(move |_, v| f(v))
}

pub fn zero_inflow() -> InflowFn {
    Arc::new(|_, _| 0.0)
}

#[derive(Debug, Clone)]
pub enum KineticMode {
    Nonlinear,
    /// Linearized about a global reference; boxed basis reused every step.
    Linearized(Box<NullBasis>),
}

impl KineticMode {
    pub fn linearized(r: ReferenceState, field: &DistributionField) -> Self {
        KineticMode::Linearized(Box::new(NullBasis::new(r, field.grid())))
    }
}

/// Knudsen number per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsProfile(pub Vec<f64>);

impl EpsProfile {
    pub fn uniform(mesh: &SpatialMesh, eps: f64) -> Result<Self> {
        Self::from_fn(mesh, |_| eps)
    }

    /// `left` for cell centers below `split`, `right` above.
    pub fn piecewise(mesh: &SpatialMesh, split: f64, left: f64, right: f64) -> Result<Self> {
        Self::from_fn(mesh, |x| if x < split { left } else { right })
    }

    pub fn from_fn(mesh: &SpatialMesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        let e: Vec<f64> = mesh.centers().into_iter().map(f).collect();
        if let Some(bad) = e.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::InvalidConfig(format!("Knudsen number {bad} must be positive")));
        }
        Ok(Self(e))
    }
}

#[derive(Clone)]
pub struct KineticConfig {
    pub eps: EpsProfile,
    pub dt: f64,
    pub mode: KineticMode,
    /// Incoming data at `x_min` (used for `v > 0`).
    pub left: InflowFn,
    /// Incoming data at `x_max` (used for `v < 0`).
    pub right: InflowFn,
}

impl std::fmt::Debug for KineticConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticConfig")
            .field("eps", &self.eps)
            .field("dt", &self.dt)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

pub fn cfl_number(field: &DistributionField, dt: f64) -> f64 {
    field.grid().max_speed() * dt / field.mesh().h()
}

/// One upwind transport step. Ghost slices hold the incoming values at the
/// two ends; only their `v > 0` (left) and `v < 0` (right) entries are read.
pub fn transport_step(field: &DistributionField, left: &[f64], right: &[f64], dt: f64) -> Result<DistributionField> {
    let cfl = cfl_number(field, dt);
    if cfl > 1.0 + 1e-12 {
        return Err(Error::CflViolation { cfl, limit: 1.0 });
    }
    let nv = field.grid().len();
    if left.len() != nv || right.len() != nv {
        return Err(Error::GridMismatch("ghost slice length".into()));
    }
    let n = field.mesh().cells();
    let lam = dt / field.mesh().h();
    let nodes = field.grid().nodes();
    let mut out = field.clone();
    out.t = field.t + dt;
    out.values_mut()
        .par_chunks_mut(nv)
        .enumerate()
        .for_each(|(i, cell)| {
            let here = field.cell(i);
            let west = if i == 0 { left } else { field.cell(i - 1) };
            let east = if i + 1 == n { right } else { field.cell(i + 1) };
            for j in 0..nv {
                let v = nodes[j];
                cell[j] = if v > 0.0 {
                    here[j] - v * lam * (here[j] - west[j])
                } else {
                    here[j] - v * lam * (east[j] - here[j])
                };
            }
        });
    Ok(out)
}

/// Exponential relaxation toward the local (or infinitesimal) Maxwellian.
pub fn relaxation_step(field: &mut DistributionField, eps: &EpsProfile, dt: f64, mode: &KineticMode) -> Result<()> {
    let nv = field.grid().len();
    if eps.0.len() != field.mesh().cells() {
        return Err(Error::GridMismatch("eps profile length".into()));
    }
    let grid = field.grid().clone();
    field
        .values_mut()
        .par_chunks_mut(nv)
        .zip(eps.0.par_iter())
        .try_for_each(|(cell, &e)| -> Result<()> {
            let decay = (-dt / e).exp();
            let eq = match mode {
                KineticMode::Nonlinear => maxwellian(&moments_of(cell, &grid)?, &grid),
                KineticMode::Linearized(nb) => nb.local_equilibrium(cell),
            };
            for (f, m) in cell.iter_mut().zip(&eq) {
                *f = m + decay * (*f - m);
            }
            Ok(())
        })
}

/// Ghost slices from the inflow profiles at time `t`.
pub fn ghost_slices(config: &KineticConfig, field: &DistributionField, t: f64) -> (Vec<f64>, Vec<f64>) {
    let g = field.grid();
    let left = g.sample(|v| if v > 0.0 { (config.left)(t, v) } else { 0.0 });
    let right = g.sample(|v| if v < 0.0 { (config.right)(t, v) } else { 0.0 });
    (left, right)
}

/// One split step with explicit ghost slices.
pub fn split_step(
    field: &DistributionField,
    left: &[f64],
    right: &[f64],
    eps: &EpsProfile,
    dt: f64,
    mode: &KineticMode,
) -> Result<DistributionField> {
    let mut next = transport_step(field, left, right, dt)?;
    relaxation_step(&mut next, eps, dt, mode)?;
    Ok(next)
}

/// Macroscopic columns of one output time: physical `(rho, u, T)` in
/// nonlinear mode, `(rho~, u~, T~)` in linearized mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub states: Vec<MacroState>,
}

impl Snapshot {
    pub fn of(field: &DistributionField, mode: &KineticMode) -> Result<Self> {
        let states = match mode {
            KineticMode::Nonlinear => field.macro_profile()?,
            KineticMode::Linearized(nb) => (0..field.mesh().cells())
                .map(|i| {
                    let tm = nb.tilde_moments(field.cell(i));
                    MacroState::new(tm.rho, tm.u, tm.temp)
                })
                .collect(),
        };
        Ok(Self {
            t: field.t,
            x: field.mesh().centers(),
            states,
        })
    }

    pub fn to_csv(&self) -> String {
        profile_csv(&self.x, &self.states, self.t)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_field: DistributionField,
    pub steps: usize,
}

/// Step count and uniform step landing exactly on `t_final`.
pub fn step_plan(t0: f64, t_final: f64, dt: f64) -> (usize, f64) {
    let span = t_final - t0;
    if span <= 0.0 {
        return (0, dt);
    }
    let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

/// Advance to `t_final`, recording snapshots at the requested times (plus
/// the final time).
pub fn run_kinetic(config: &KineticConfig, initial: DistributionField, t_final: f64, outputs: &[f64]) -> Result<Trajectory> {
    if !(config.dt > 0.0) {
        return Err(Error::InvalidConfig("time step must be positive".into()));
    }
    let (steps, dt) = step_plan(initial.t, t_final, config.dt);
    let cfl = cfl_number(&initial, dt);
    if cfl > 1.0 + 1e-12 {
        return Err(Error::CflViolation { cfl, limit: 1.0 });
    }
    debug!("kinetic run: {steps} steps of {dt:.3e}, CFL {cfl:.3}");
    let t0 = initial.t;
    let mut pending: Vec<f64> = outputs.iter().copied().filter(|&t| t < t_final).collect();
    pending.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut field = initial;
    for n in 0..steps {
        while let Some(&t) = pending.first() {
            if t <= field.t + 0.5 * dt {
                snapshots.push(Snapshot::of(&field, &config.mode)?);
                pending.remove(0);
            } else {
                break;
            }
        }
        let (left, right) = ghost_slices(config, &field, field.t);
        field = split_step(&field, &left, &right, &config.eps, dt, &config.mode)?;
        field.t = t0 + (n + 1) as f64 * dt;
    }
    if !field.is_finite() {
        return Err(Error::InvalidConfig("kinetic solution became non-finite".into()));
    }
    snapshots.push(Snapshot::of(&field, &config.mode)?);
    Ok(Trajectory {
        snapshots,
        final_field: field,
        steps,
    })
}
