//! First-order Roe finite-volume scheme for the 1-D Euler system closed by
//! the monatomic 1-D kinetic model (`p = rho T`, `E = rho u^2/2 + rho T/2`).
//!
//! Boundary fluxes are supplied by the caller.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::phase_grid::{profile_csv, ConservativeState, MacroState, SpatialMesh};

/// `(d + 2) / d` with one velocity dimension.
pub const GAMMA: f64 = 3.0;
pub const DEFAULT_CFL: f64 = 0.9;

pub type Flux = [f64; 3];

/// `(rho u, rho u^2 + rho T, (E + rho T) u)`.
pub fn physical_flux(c: &ConservativeState) -> Result<Flux> {
    let s = c.to_primitive()?;
    let p = s.rho * s.temp;
    Ok([c.momentum, c.momentum * s.u + p, (c.energy + p) * s.u])
}

pub fn flux_of_state(s: &MacroState) -> Flux {
    let c = s.to_conservative();
    let p = s.rho * s.temp;
    [c.momentum, c.momentum * s.u + p, (c.energy + p) * s.u]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoeAverage {
    pub u: f64,
    /// Total specific enthalpy.
    pub h: f64,
    pub c: f64,
}

pub fn roe_average(l: &ConservativeState, r: &ConservativeState) -> Result<RoeAverage> {
    let sl = l.to_primitive()?;
    let sr = r.to_primitive()?;
    let (ql, qr) = (sl.rho.sqrt(), sr.rho.sqrt());
    let u = (ql * sl.u + qr * sr.u) / (ql + qr);
    let hl = (l.energy + sl.rho * sl.temp) / ql;
    let hr = (r.energy + sr.rho * sr.temp) / qr;
    let h = (hl + hr) / (ql + qr);
    let c2 = (GAMMA - 1.0) * (h - 0.5 * u * u);
    if !(c2 > 0.0) {
        return Err(Error::RoeBreakdown { c2 });
    }
    Ok(RoeAverage { u, h, c: c2.sqrt() })
}

/// Flux Jacobian at `(u, H)` for ratio of specific heats `gamma`.
pub fn euler_jacobian(u: f64, h: f64, gamma: f64) -> Matrix3<f64> {
    Matrix3::new(
        0.0,
        1.0,
        0.0,
        0.5 * (gamma - 3.0) * u * u,
        (3.0 - gamma) * u,
        gamma - 1.0,
        0.5 * (gamma - 1.0) * u * u * u - u * h,
        h - (gamma - 1.0) * u * u,
        gamma * u,
    )
}

pub fn roe_jacobian(l: &ConservativeState, r: &ConservativeState) -> Result<Matrix3<f64>> {
    let avg = roe_average(l, r)?;
    Ok(euler_jacobian(avg.u, avg.h, GAMMA))
}

/// `|A| dU` at the Roe average, through the wave decomposition.
fn roe_dissipation(avg: &RoeAverage, du: [f64; 3]) -> Flux {
    let RoeAverage { u, h, c } = *avg;
    let a2 = (GAMMA - 1.0) / (c * c) * (du[0] * (h - u * u) + u * du[1] - du[2]);
    let a1 = (du[0] * (u + c) - du[1] - c * a2) / (2.0 * c);
    let a3 = du[0] - a1 - a2;
    let waves = [
        ((u - c).abs() * a1, [1.0, u - c, h - u * c]),
        (u.abs() * a2, [1.0, u, 0.5 * u * u]),
        ((u + c).abs() * a3, [1.0, u + c, h + u * c]),
    ];
    let mut out = [0.0; 3];
    for (s, r) in waves {
        for k in 0..3 {
            out[k] += s * r[k];
        }
    }
    out
}

pub fn roe_flux(l: &ConservativeState, r: &ConservativeState) -> Result<Flux> {
    let fl = physical_flux(l)?;
    let fr = physical_flux(r)?;
    let avg = roe_average(l, r)?;
    let du = [r.rho - l.rho, r.momentum - l.momentum, r.energy - l.energy];
    let d = roe_dissipation(&avg, du);
    Ok([0, 1, 2].map(|k| 0.5 * (fl[k] + fr[k]) - 0.5 * d[k]))
}

/// Largest characteristic speed `|u| + c` of a state.
pub fn max_wave_speed(c: &ConservativeState) -> Result<f64> {
    let s = c.to_primitive()?;
    Ok(s.u.abs() + (GAMMA * s.temp).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerField {
    mesh: SpatialMesh,
    pub cells: Vec<ConservativeState>,
    pub t: f64,
}

impl EulerField {
    pub fn new(mesh: SpatialMesh, cells: Vec<ConservativeState>) -> Result<Self> {
        if cells.len() != mesh.cells() {
            return Err(Error::GridMismatch(format!(
                "{} states for {} cells",
                cells.len(),
                mesh.cells()
            )));
        }
        for c in &cells {
            c.to_primitive()?;
        }
        Ok(Self { mesh, cells, t: 0.0 })
    }

    pub fn from_primitive(mesh: SpatialMesh, f: impl Fn(f64) -> MacroState) -> Result<Self> {
        let cells = mesh.centers().into_iter().map(|x| f(x).to_conservative()).collect();
        Self::new(mesh, cells)
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn primitives(&self) -> Result<Vec<MacroState>> {
        self.cells.iter().map(|c| c.to_primitive()).collect()
    }

    /// `sum_i U_i h`.
    pub fn totals(&self) -> [f64; 3] {
        let h = self.mesh.h();
        let mut acc = [0.0; 3];
        for c in &self.cells {
            acc[0] += c.rho * h;
            acc[1] += c.momentum * h;
            acc[2] += c.energy * h;
        }
        acc
    }

    /// Largest stable step for the given CFL number.
    pub fn stable_dt(&self, cfl: f64) -> Result<f64> {
        let mut smax: f64 = 0.0;
        for c in &self.cells {
            smax = smax.max(max_wave_speed(c)?);
        }
        Ok(cfl * self.mesh.h() / smax)
    }

    pub fn to_csv(&self) -> Result<String> {
        Ok(profile_csv(&self.mesh.centers(), &self.primitives()?, self.t))
    }
}

/// Roe fluxes at the interior faces `1..N-1`.
pub fn interior_fluxes(field: &EulerField) -> Result<Vec<Flux>> {
    field.cells.windows(2).map(|w| roe_flux(&w[0], &w[1])).collect()
}

/// Conservative update with externally supplied end fluxes.
pub fn euler_step(field: &EulerField, left: Flux, right: Flux, dt: f64, cfl_limit: f64) -> Result<EulerField> {
    let h = field.mesh.h();
    let mut smax: f64 = 0.0;
    for w in field.cells.windows(2) {
        let avg = roe_average(&w[0], &w[1])?;
        smax = smax.max(avg.u.abs() + avg.c);
    }
    for c in &field.cells {
        smax = smax.max(max_wave_speed(c)?);
    }
    let cfl = smax * dt / h;
    if cfl > cfl_limit {
        return Err(Error::CflViolation { cfl, limit: cfl_limit });
    }
    let interior = interior_fluxes(field)?;
    let n = field.cells.len();
    let face = |i: usize| -> Flux {
        if i == 0 {
            left
        } else if i == n {
            right
        } else {
            interior[i - 1]
        }
    };
    let r = dt / h;
    let cells = (0..n)
        .map(|i| {
            let (fl, fr) = (face(i), face(i + 1));
            let u = field.cells[i].as_array();
            ConservativeState::from_array([0, 1, 2].map(|k| u[k] - r * (fr[k] - fl[k])))
        })
        .collect();
    Ok(EulerField {
        mesh: field.mesh.clone(),
        cells,
        t: field.t + dt,
    })
}
