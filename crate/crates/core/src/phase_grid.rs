//! Phase-space substrate: velocity grids, spatial meshes, distribution
//! containers, moments and Maxwellians.
//!
//! Velocity integrals use the midpoint rule on uniform cells, so a grid on
//! `[v_min, v_max]` with `cells` cells has its nodes at the cell centers.
//! With a symmetric range and an even cell count, `v = 0` is a cell face and
//! no node sits on it; the inflow half `v > 0` is then exactly the upper half
//! of the node array.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities at or below this value are treated as vacuum.
pub const RHO_FLOOR: f64 = 1e-12;

/// Uniform cell-centered velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    v_min: f64,
    v_max: f64,
    nodes: Vec<f64>,
    dv: f64,
}

impl VelocityGrid {
    pub fn new(v_min: f64, v_max: f64, cells: usize) -> Result<Self> {
        if !(v_max > v_min) || cells == 0 {
            return Err(Error::InvalidConfig(format!(
                "velocity grid [{v_min}, {v_max}] with {cells} cells"
            )));
        }
        let dv = (v_max - v_min) / cells as f64;
        let nodes = (0..cells)
            .map(|j| v_min + (j as f64 + 0.5) * dv)
            .collect();
        Ok(Self {
            v_min,
            v_max,
            nodes,
            dv,
        })
    }

    /// `[-v_cut, v_cut]` with `32 * refinement` cells.
    pub fn symmetric(v_cut: f64, refinement: usize) -> Result<Self> {
        Self::new(-v_cut, v_cut, 32 * refinement)
    }

    /// The default `[-16, 16]` truncation with `32 * refinement` cells.
    pub fn standard(refinement: usize) -> Result<Self> {
        Self::symmetric(16.0, refinement)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }

    pub fn max_speed(&self) -> f64 {
        self.nodes
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.nodes.len();
        (0..n).all(|j| (self.nodes[j] + self.nodes[n - 1 - j]).abs() <= 1e-12 * self.v_max.abs().max(1.0))
    }

    /// Index of the node mirrored through `v = 0`. Only meaningful on a
    /// symmetric grid.
    pub fn mirror(&self, j: usize) -> usize {
        self.nodes.len() - 1 - j
    }

    /// Midpoint-rule integral of `values` against `weight(v)`.
    pub fn integrate(&self, values: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values
            .iter()
            .zip(&self.nodes)
            .map(|(f, &v)| f * weight(v))
            .sum::<f64>()
            * self.dv
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&v| f(v)).collect()
    }
}

/// Uniform cell-centered mesh on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    x_min: f64,
    x_max: f64,
    cells: usize,
    h: f64,
}

impl SpatialMesh {
    pub fn new(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        if !(x_max > x_min) || cells == 0 {
            return Err(Error::InvalidConfig(format!(
                "spatial mesh [{x_min}, {x_max}] with {cells} cells"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            cells,
            h: (x_max - x_min) / cells as f64,
        })
    }

    /// Mesh with the cell width closest to `h` that tiles `[x_min, x_max]`.
    pub fn with_spacing(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        let cells = ((x_max - x_min) / h).round().max(1.0) as usize;
        Self::new(x_min, x_max, cells)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h
    }

    /// Face `x_{i-1/2}` for `i = 0..=cells`.
    pub fn face(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }
}

/// Density `rho`, bulk velocity `u` and temperature `temp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub rho: f64,
    pub u: f64,
    pub temp: f64,
}

impl MacroState {
    pub fn new(rho: f64, u: f64, temp: f64) -> Self {
        Self { rho, u, temp }
    }

    pub fn validate(&self) -> Result<Self> {
        if !(self.rho > RHO_FLOOR) || !self.rho.is_finite() {
            return Err(Error::DegenerateDensity { rho: self.rho });
        }
        if !(self.temp > 0.0) || !self.temp.is_finite() {
            return Err(Error::NegativeTemperature { temp: self.temp });
        }
        Ok(*self)
    }

    pub fn to_conservative(&self) -> ConservativeState {
        conservative_from_primitive(self)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho, self.u, self.temp]
    }
}

/// Euler unknowns `(rho, rho u, E)` with `E = rho u^2 / 2 + rho T / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservativeState {
    pub rho: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl ConservativeState {
    pub fn new(rho: f64, momentum: f64, energy: f64) -> Self {
        Self {
            rho,
            momentum,
            energy,
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho, self.momentum, self.energy]
    }

    pub fn to_primitive(&self) -> Result<MacroState> {
        primitive_from_conservative(self)
    }
}

pub fn conservative_from_primitive(s: &MacroState) -> ConservativeState {
    ConservativeState {
        rho: s.rho,
        momentum: s.rho * s.u,
        energy: 0.5 * s.rho * s.u * s.u + 0.5 * s.rho * s.temp,
    }
}

pub fn primitive_from_conservative(c: &ConservativeState) -> Result<MacroState> {
    if !(c.rho > RHO_FLOOR) || !c.rho.is_finite() {
        return Err(Error::DegenerateDensity { rho: c.rho });
    }
    let u = c.momentum / c.rho;
    let internal = c.energy - 0.5 * c.momentum * u;
    if !(internal > 0.0) {
        return Err(Error::NegativeTemperature {
            temp: 2.0 * internal / c.rho,
        });
    }
    Ok(MacroState {
        rho: c.rho,
        u,
        temp: 2.0 * internal / c.rho,
    })
}

/// Maxwellian density at a single velocity.
#[inline]
pub fn maxwellian_at(s: &MacroState, v: f64) -> f64 {
    let d = v - s.u;
    s.rho / (2.0 * PI * s.temp).sqrt() * (-d * d / (2.0 * s.temp)).exp()
}

pub fn maxwellian(s: &MacroState, grid: &VelocityGrid) -> Vec<f64> {
    grid.sample(|v| maxwellian_at(s, v))
}

/// Profile rows `x,rho,u,T,t` with 17 significant digits.
pub fn profile_csv(xs: &[f64], states: &[MacroState], t: f64) -> String {
    let mut out = String::from("x,rho,u,T,t\n");
    for (x, s) in xs.iter().zip(states) {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            x, s.rho, s.u, s.temp, t
        ));
    }
    out
}

/// Raw velocity sums `(sum F, sum F v, sum F v^2 / 2) dv`.
pub fn conserved_sums(slice: &[f64], grid: &VelocityGrid) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for (f, &v) in slice.iter().zip(grid.nodes()) {
        acc[0] += f;
        acc[1] += f * v;
        acc[2] += 0.5 * f * v * v;
    }
    acc.map(|a| a * grid.dv())
}

/// `(rho, u, T)` of a velocity slice under the grid quadrature.
pub fn moments_of(slice: &[f64], grid: &VelocityGrid) -> Result<MacroState> {
    let dv = grid.dv();
    let rho: f64 = slice.iter().sum::<f64>() * dv;
    if !(rho > RHO_FLOOR) || !rho.is_finite() {
        return Err(Error::DegenerateDensity { rho });
    }
    let u = slice
        .iter()
        .zip(grid.nodes())
        .map(|(f, v)| f * v)
        .sum::<f64>()
        * dv
        / rho;
    let temp = slice
        .iter()
        .zip(grid.nodes())
        .map(|(f, v)| f * (v - u) * (v - u))
        .sum::<f64>()
        * dv
        / rho;
    if !(temp > 0.0) || !temp.is_finite() {
        return Err(Error::NegativeTemperature { temp });
    }
    Ok(MacroState { rho, u, temp })
}

/// Phase-space samples `F(x_i, v_j)` stored cell-major.
#[derive(Debug, Clone)]
pub struct DistributionField {
    mesh: SpatialMesh,
    grid: VelocityGrid,
    values: Vec<f64>,
    pub t: f64,
}

impl DistributionField {
    pub fn zeros(mesh: SpatialMesh, grid: VelocityGrid) -> Self {
        let values = vec![0.0; mesh.cells() * grid.len()];
        Self {
            mesh,
            grid,
            values,
            t: 0.0,
        }
    }

    pub fn from_fn(mesh: SpatialMesh, grid: VelocityGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.cells() * grid.len());
        for i in 0..mesh.cells() {
            let x = mesh.center(i);
            values.extend(grid.nodes().iter().map(|&v| f(x, v)));
        }
        Self {
            mesh,
            grid,
            values,
            t: 0.0,
        }
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let nv = self.grid.len();
        &self.values[i * nv..(i + 1) * nv]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let nv = self.grid.len();
        &mut self.values[i * nv..(i + 1) * nv]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Total `(mass, momentum, energy)` over the mesh.
    pub fn totals(&self) -> [f64; 3] {
        let h = self.mesh.h();
        let mut acc = [0.0; 3];
        for i in 0..self.mesh.cells() {
            let s = conserved_sums(self.cell(i), &self.grid);
            for k in 0..3 {
                acc[k] += s[k] * h;
            }
        }
        acc
    }

    pub fn macro_profile(&self) -> Result<Vec<MacroState>> {
        (0..self.mesh.cells())
            .map(|i| moments_of(self.cell(i), &self.grid))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_are_symmetric_cell_centers() {
        let g = VelocityGrid::standard(2).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.dv() - 0.5).abs() < 1e-15);
        assert!(g.is_symmetric());
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.nodes().iter().all(|v| v.abs() > 0.1));
        assert_eq!(g.mirror(0), 63);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(VelocityGrid::new(1.0, -1.0, 10).is_err());
        assert!(SpatialMesh::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn mesh_faces_interleave_centers() {
        let m = SpatialMesh::new(0.0, 1.0, 10).unwrap();
        for i in 0..10 {
            assert!(m.face(i) < m.center(i) && m.center(i) < m.face(i + 1));
        }
        assert!((m.h() - 0.1).abs() < 1e-15);
        assert_eq!(SpatialMesh::with_spacing(0.0, 1.0, 2e-3).unwrap().cells(), 500);
    }

    #[test]
    fn maxwellian_moments_reproduce_parameters() {
        let g = VelocityGrid::standard(100).unwrap();
        let s = MacroState::new(1.0, 0.1, 1.0);
        let m = moments_of(&maxwellian(&s, &g), &g).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-8);
        assert!((m.u - 0.1).abs() < 1e-8);
        assert!((m.temp - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let g = VelocityGrid::standard(4).unwrap();
        let z = vec![0.0; g.len()];
        assert!(matches!(moments_of(&z, &g), Err(Error::DegenerateDensity { .. })));
    }

    #[test]
    fn maxwellian_peak_and_mass() {
        let g = VelocityGrid::standard(100).unwrap();
        let s = MacroState::new(1.0, 0.0, 1.0);
        assert!((maxwellian_at(&s, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let mass = g.integrate(&maxwellian(&s, &g), |_| 1.0);
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn maxwellian_matches_right_boundary_profile() {
        // 2 / sqrt(4 pi) exp(-(v - 0.2)^2 / 4)
        let s = MacroState::new(2.0, 0.2, 2.0);
        for v in [-3.0, -0.5, 0.0, 0.2, 1.7, 5.0] {
            let expected = 2.0 / (4.0 * PI).sqrt() * (-(v - 0.2f64).powi(2) / 4.0).exp();
            assert!((maxwellian_at(&s, v) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn conservative_conversions() {
        let c = conservative_from_primitive(&MacroState::new(1.0, 2.0, 0.5));
        assert_eq!(c.as_array(), [1.0, 2.0, 2.25]);
        let c = conservative_from_primitive(&MacroState::new(1.0, 0.0, 1.0));
        assert_eq!(c.as_array(), [1.0, 0.0, 0.5]);
        let p = primitive_from_conservative(&ConservativeState::new(1.0, 2.0, 2.25)).unwrap();
        assert_eq!(p.as_array(), [1.0, 2.0, 0.5]);
        assert!(matches!(
            primitive_from_conservative(&ConservativeState::new(1.0, 2.0, 1.0)),
            Err(Error::NegativeTemperature { .. })
        ));
    }

    #[test]
    fn field_totals_and_profiles() {
        let mesh = SpatialMesh::new(0.0, 1.0, 4).unwrap();
        let g = VelocityGrid::standard(20).unwrap();
        let s = MacroState::new(2.0, 0.2, 2.0);
        let f = DistributionField::from_fn(mesh, g, |_, v| maxwellian_at(&s, v));
        let tot = f.totals();
        let c = s.to_conservative();
        assert!((tot[0] - c.rho).abs() < 1e-10);
        assert!((tot[1] - c.momentum).abs() < 1e-10);
        assert!((tot[2] - c.energy).abs() < 1e-10);
        assert_eq!(f.macro_profile().unwrap().len(), 4);
    }

    #[test]
    fn refined_quadrature_oracle_for_shifted_maxwellian() {
        let s = MacroState::new(2.0, 0.2, 2.0);
        let fine = VelocityGrid::standard(800).unwrap();
        let oracle = moments_of(&maxwellian(&s, &fine), &fine).unwrap();
        let g = VelocityGrid::standard(100).unwrap();
        let m = moments_of(&maxwellian(&s, &g), &g).unwrap();
        assert!((m.rho - oracle.rho).abs() < 1e-10);
        assert!((m.u - oracle.u).abs() < 1e-10);
        assert!((m.temp - oracle.temp).abs() < 1e-10);
        assert!((oracle.rho - 2.0).abs() < 1e-10 && (oracle.temp - 2.0).abs() < 1e-10);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn moments_of_maxwellian_round_trip(rho in 0.1f64..10.0, u in -4.0f64..4.0, t in 0.1f64..4.0) {
            let g = VelocityGrid::standard(50).unwrap();
            let s = MacroState::new(rho, u, t);
            let f = maxwellian(&s, &g);
            let m = moments_of(&f, &g).unwrap();
            proptest::prop_assert!((m.rho - rho).abs() < 1e-8 * rho);
            proptest::prop_assert!((m.u - u).abs() < 1e-8);
            proptest::prop_assert!((m.temp - t).abs() < 1e-8 * t);
            let sums = conserved_sums(&f, &g);
            let c = s.to_conservative();
            proptest::prop_assert!((sums[0] - c.rho).abs() < 1e-8 * rho);
            proptest::prop_assert!((sums[1] - c.momentum).abs() < 1e-8 * rho);
            proptest::prop_assert!((sums[2] - c.energy).abs() < 1e-8 * c.energy);
        }

        #[test]
        fn conservative_round_trip(rho in 0.1f64..10.0, u in -4.0f64..4.0, t in 0.1f64..4.0) {
            let s = MacroState::new(rho, u, t);
            let back = s.to_conservative().to_primitive().unwrap();
            proptest::prop_assert!((back.rho - rho).abs() <= 1e-13 * rho);
            proptest::prop_assert!((back.u - u).abs() <= 1e-13 * u.abs().max(1.0));
            proptest::prop_assert!((back.temp - t).abs() <= 1e-13 * t.max(u * u));
        }
    }
}
