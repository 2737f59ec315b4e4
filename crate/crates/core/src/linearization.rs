//! Linearization about a reference Maxwellian `M*`.
//!
//! Perturbations are written `F = M* + sqrt(M*) f`. The null space of the
//! linearized collision operator is spanned by the three functions `chi_k`,
//! orthonormal in the plain L2 product and diagonalizing multiplication by
//! `v` with eigenvalues `u*`, `u* + sqrt(3 T*)` and `u* - sqrt(3 T*)`.
//!
//! Mode index `k` follows the characteristic variable ordering: `0` is the
//! contact mode `chi_0`, `1` is `chi_+` and `2` is `chi_-`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_grid::{MacroState, VelocityGrid};

/// Speeds with `|u_k|` below this are assigned to the zero-speed space.
pub const ZERO_SPEED_TOL: f64 = 1e-12;

pub const MODE_ZERO: usize = 0;
pub const MODE_PLUS: usize = 1;
pub const MODE_MINUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subsonic,
    Supersonic,
    Sonic,
}

/// Mode indices grouped by the sign of their speed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModePartition {
    pub positive: Vec<usize>,
    pub zero: Vec<usize>,
    pub negative: Vec<usize>,
}

impl ModePartition {
    /// Modes an end-state may contain: positive first, then zero-speed.
    pub fn outgoing(&self) -> Vec<usize> {
        self.positive.iter().chain(&self.zero).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    state: MacroState,
}

impl ReferenceState {
    pub fn new(rho: f64, u: f64, temp: f64) -> Result<Self> {
        Self::from_state(MacroState::new(rho, u, temp))
    }

    pub fn from_state(state: MacroState) -> Result<Self> {
        Ok(Self {
            state: state.validate()?,
        })
    }

    pub fn state(&self) -> MacroState {
        self.state
    }

    pub fn rho(&self) -> f64 {
        self.state.rho
    }

    pub fn u(&self) -> f64 {
        self.state.u
    }

    pub fn temp(&self) -> f64 {
        self.state.temp
    }

    pub fn sound_speed(&self) -> f64 {
        (3.0 * self.state.temp).sqrt()
    }

    /// `(u_0, u_+, u_-)`.
    pub fn speeds(&self) -> [f64; 3] {
        let c = self.sound_speed();
        let u = self.state.u;
        [u, u + c, u - c]
    }

    pub fn partition(&self) -> ModePartition {
        let mut p = ModePartition::default();
        for (k, s) in self.speeds().into_iter().enumerate() {
            if s.abs() < ZERO_SPEED_TOL {
                p.zero.push(k);
            } else if s > 0.0 {
                p.positive.push(k);
            } else {
                p.negative.push(k);
            }
        }
        p
    }

    pub fn regime(&self) -> Regime {
        let p = self.partition();
        if !p.zero.is_empty() {
            Regime::Sonic
        } else if p.positive.is_empty() || p.negative.is_empty() {
            Regime::Supersonic
        } else {
            Regime::Subsonic
        }
    }

    /// The same Maxwellian seen with velocity reversed.
    pub fn flipped(&self) -> Self {
        Self {
            state: MacroState::new(self.state.rho, -self.state.u, self.state.temp),
        }
    }

    pub fn maxwellian(&self, v: f64) -> f64 {
        crate::phase_grid::maxwellian_at(&self.state, v)
    }

    pub fn sqrt_maxwellian(&self, v: f64) -> f64 {
        let MacroState { rho, u, temp } = self.state;
        let d = v - u;
        (rho / (2.0 * PI * temp).sqrt()).sqrt() * (-d * d / (4.0 * temp)).exp()
    }

    /// Polynomial factor of `chi_k` without the `sqrt(M*)` weight.
    pub fn chi_polynomial(&self, k: usize, v: f64) -> f64 {
        let MacroState { rho, u, temp } = self.state;
        let x = v - u;
        let q = x * x / temp;
        let l = (3.0 / temp).sqrt() * x;
        let p = match k {
            MODE_ZERO => q - 3.0,
            MODE_PLUS => l + q,
            MODE_MINUS => l - q,
            _ => panic!("mode index {k} out of range"),
        };
        p / (6.0 * rho).sqrt()
    }

    pub fn chi(&self, k: usize, v: f64) -> f64 {
        self.chi_polynomial(k, v) * self.sqrt_maxwellian(v)
    }

    pub fn chi_all(&self, v: f64) -> [f64; 3] {
        let w = self.sqrt_maxwellian(v);
        [0, 1, 2].map(|k| self.chi_polynomial(k, v) * w)
    }

    /// `p_i` of the characteristic projection `eta_i = <f, p_i>_{M*}`.
    pub fn p(&self, i: usize, v: f64) -> f64 {
        let MacroState { rho, u, temp } = self.state;
        let x = v - u;
        match i {
            0 => -x * x / (2.0 * rho) + 1.5 * temp / rho,
            1 => x * x / (rho * temp) + (3.0 / temp).sqrt() * x / rho,
            2 => x * x / (rho * temp) - (3.0 / temp).sqrt() * x / rho,
            _ => panic!("characteristic index {i} out of range"),
        }
    }

    /// `(eta_k / xi_k)` for each mode.
    pub fn eta_per_xi(&self) -> [f64; 3] {
        let s6 = 6f64.sqrt();
        let sr = self.rho().sqrt();
        [-s6 * self.temp() / (2.0 * sr), s6 / sr, -s6 / sr]
    }

    pub fn xi_to_eta(&self, xi: [f64; 3]) -> [f64; 3] {
        let s = self.eta_per_xi();
        [xi[0] * s[0], xi[1] * s[1], xi[2] * s[2]]
    }

    pub fn eta_to_xi(&self, eta: [f64; 3]) -> [f64; 3] {
        let s = self.eta_per_xi();
        [eta[0] / s[0], eta[1] / s[1], eta[2] / s[2]]
    }

    /// `int M* v (1, v, v^2/2) dv`, which equals the Euler flux of `M*`.
    pub fn maxwellian_flux(&self) -> [f64; 3] {
        let poly = [1.0];
        self.gaussian_flux(&poly)
    }

    /// `int sqrt(M*) chi_k v (1, v, v^2/2) dv`, evaluated in closed form.
    pub fn mode_flux(&self, k: usize) -> [f64; 3] {
        let t = self.temp();
        let c = 1.0 / (6.0 * self.rho()).sqrt();
        let l = (3.0 / t).sqrt();
        let poly = match k {
            MODE_ZERO => [-3.0 * c, 0.0, c / t],
            MODE_PLUS => [0.0, l * c, c / t],
            MODE_MINUS => [0.0, l * c, -c / t],
            _ => panic!("mode index {k} out of range"),
        };
        self.gaussian_flux(&poly)
    }

    /// `int q(v - u) M* v (1, v, v^2/2) dv` for a polynomial `q` in `v - u`.
    fn gaussian_flux(&self, q: &[f64]) -> [f64; 3] {
        let u = self.u();
        let t = self.temp();
        let rho = self.rho();
        // Central moments rho * T^{n/2} (n-1)!! of M*.
        let moment = |n: usize| -> f64 {
            if n % 2 == 1 {
                return 0.0;
            }
            let dfact: f64 = (1..n).step_by(2).map(|j| j as f64).product();
            rho * t.powi((n / 2) as i32) * dfact
        };
        let integrate = |p: &[f64]| -> f64 { p.iter().enumerate().map(|(n, c)| c * moment(n)).sum() };
        // v = x + u, so v^m expands binomially in x.
        let shifted = |m: usize| -> Vec<f64> {
            let mut out = vec![0.0; q.len() + m];
            let binom = |m: usize, j: usize| -> f64 {
                (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
            };
            for (a, &qa) in q.iter().enumerate() {
                for j in 0..=m {
                    out[a + j] += qa * binom(m, j) * u.powi((m - j) as i32);
                }
            }
            out
        };
        [
            integrate(&shifted(1)),
            integrate(&shifted(2)),
            0.5 * integrate(&shifted(3)),
        ]
    }
}

/// Linearized fluctuations of `(rho, u, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TildeMoments {
    pub rho: f64,
    pub u: f64,
    pub temp: f64,
}

impl TildeMoments {
    pub fn new(rho: f64, u: f64, temp: f64) -> Self {
        Self { rho, u, temp }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho, self.u, self.temp]
    }
}

/// Null-space basis and the moment machinery of one reference state on a grid.
#[derive(Debug, Clone)]
pub struct NullBasis {
    reference: ReferenceState,
    grid: VelocityGrid,
    chi: [Vec<f64>; 3],
    sqrt_m: Vec<f64>,
    /// `v^k sqrt(M*)` for `k = 0, 1, 2`.
    moment_fns: [Vec<f64>; 3],
    moment_gram_inv: Matrix3<f64>,
}

impl NullBasis {
    pub fn new(reference: ReferenceState, grid: &VelocityGrid) -> Self {
        let chi = [0, 1, 2].map(|k| grid.sample(|v| reference.chi(k, v)));
        let sqrt_m = grid.sample(|v| reference.sqrt_maxwellian(v));
        let moment_fns = [0, 1, 2].map(|k| {
            sqrt_m
                .iter()
                .zip(grid.nodes())
                .map(|(s, v)| s * v.powi(k))
                .collect::<Vec<_>>()
        });
        let mut gram = Matrix3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] = inner(&moment_fns[a], &moment_fns[b], grid);
            }
        }
        let moment_gram_inv = gram
            .try_inverse()
            .expect("moment Gram matrix of a Gaussian is positive definite");
        Self {
            reference,
            grid: grid.clone(),
            chi,
            sqrt_m,
            moment_fns,
            moment_gram_inv,
        }
    }

    pub fn reference(&self) -> &ReferenceState {
        &self.reference
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn chi(&self, k: usize) -> &[f64] {
        &self.chi[k]
    }

    pub fn sqrt_maxwellian(&self) -> &[f64] {
        &self.sqrt_m
    }

    pub fn partition(&self) -> ModePartition {
        self.reference.partition()
    }

    pub fn gram(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| inner(&self.chi[i], &self.chi[j], &self.grid))
    }

    /// `<v chi_i, chi_j>` on the grid.
    pub fn velocity_gram(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| velocity_inner(&self.chi[i], &self.chi[j], &self.grid))
    }

    /// `<f, chi_k>` for each mode.
    pub fn project(&self, f: &[f64]) -> [f64; 3] {
        [0, 1, 2].map(|k| inner(f, &self.chi[k], &self.grid))
    }

    pub fn combine(&self, coeffs: [f64; 3]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| coeffs[0] * self.chi[0][j] + coeffs[1] * self.chi[1][j] + coeffs[2] * self.chi[2][j])
            .collect()
    }

    /// `<f, g>_{M*} = int f g sqrt(M*) dv`.
    pub fn weighted_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.sqrt_m)
            .map(|((a, b), s)| a * b * s)
            .sum::<f64>()
            * self.grid.dv()
    }

    fn raw_moments(&self, f: &[f64]) -> Vector3<f64> {
        Vector3::from_fn(|k, _| inner(f, &self.moment_fns[k], &self.grid))
    }

    /// Tilde moments from `(<f,1>, <f,v>, <f,v^2>)_{M*}`.
    pub fn tilde_moments(&self, f: &[f64]) -> TildeMoments {
        tilde_from_raw(&self.reference, self.raw_moments(f))
    }

    pub fn infinitesimal_maxwellian(&self, tm: &TildeMoments) -> Vec<f64> {
        self.grid
            .sample(|v| infinitesimal_maxwellian_at(tm, &self.reference, v))
    }

    /// `m*[f]`: the grid projection of `f` onto `span{v^k sqrt(M*)}`.
    ///
    /// Using the discrete Gram matrix makes the three moment identities hold
    /// exactly under the grid quadrature.
    pub fn local_equilibrium(&self, f: &[f64]) -> Vec<f64> {
        let c = self.moment_gram_inv * self.raw_moments(f);
        let [b0, b1, b2] = &self.moment_fns;
        (0..f.len())
            .map(|j| c[0] * b0[j] + c[1] * b1[j] + c[2] * b2[j])
            .collect()
    }

    /// `L* f = m*[f] - f`.
    pub fn linearized_collision(&self, f: &[f64]) -> Vec<f64> {
        self.local_equilibrium(f)
            .into_iter()
            .zip(f)
            .map(|(m, x)| m - x)
            .collect()
    }

    /// `eta_i = <f, p_i>_{M*}`.
    pub fn eta_from_f(&self, f: &[f64]) -> [f64; 3] {
        let nodes = self.grid.nodes();
        [0, 1, 2].map(|i| {
            f.iter()
                .zip(nodes)
                .zip(&self.sqrt_m)
                .map(|((a, &v), s)| a * self.reference.p(i, v) * s)
                .sum::<f64>()
                * self.grid.dv()
        })
    }
}

fn tilde_from_raw(r: &ReferenceState, m: Vector3<f64>) -> TildeMoments {
    let (rho, u, t) = (r.rho(), r.u(), r.temp());
    let rt = m[0];
    let ut = (m[1] - rt * u) / rho;
    let tt = (m[2] - rt * (u * u + t) - 2.0 * rho * u * ut) / rho;
    TildeMoments::new(rt, ut, tt)
}

/// Plain L2 product on the grid.
pub fn inner(f: &[f64], g: &[f64], grid: &VelocityGrid) -> f64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * grid.dv()
}

/// `<v f, g>` on the grid.
pub fn velocity_inner(f: &[f64], g: &[f64], grid: &VelocityGrid) -> f64 {
    f.iter()
        .zip(g)
        .zip(grid.nodes())
        .map(|((a, b), v)| a * b * v)
        .sum::<f64>()
        * grid.dv()
}

pub fn infinitesimal_maxwellian_at(tm: &TildeMoments, r: &ReferenceState, v: f64) -> f64 {
    let (rho, u, t) = (r.rho(), r.u(), r.temp());
    let x = v - u;
    (tm.rho / rho + tm.u * x / t + tm.temp / (2.0 * t) * (x * x / t - 1.0)) * r.sqrt_maxwellian(v)
}

/// The linear acoustic system `U_t + A U_x = 0` and its diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticSystem {
    pub a: Matrix3<f64>,
    pub v: Matrix3<f64>,
    pub v_inv: Matrix3<f64>,
    pub d: [f64; 3],
}

impl AcousticSystem {
    pub fn new(r: &ReferenceState) -> Self {
        let (rho, u, t) = (r.rho(), r.u(), r.temp());
        let a = Matrix3::new(u, rho, 0.0, t / rho, u, 1.0, 0.0, 2.0 * t, u);
        let s = (3.0 / t).sqrt();
        let v_inv = Matrix3::new(
            t / rho, 0.0, -0.5,
            1.0 / rho, s, 1.0 / t,
            1.0 / rho, -s, 1.0 / t,
        );
        let v = v_inv
            .try_inverse()
            .expect("characteristic transform is invertible for T > 0");
        Self {
            a,
            v,
            v_inv,
            d: r.speeds(),
        }
    }

    pub fn eta_from_tilde(&self, tm: &TildeMoments) -> [f64; 3] {
        let e = self.v_inv * Vector3::new(tm.rho, tm.u, tm.temp);
        [e[0], e[1], e[2]]
    }

    pub fn tilde_from_eta(&self, eta: [f64; 3]) -> TildeMoments {
        let u = self.v * Vector3::from(eta);
        TildeMoments::new(u[0], u[1], u[2])
    }
}

pub fn acoustic_system(r: &ReferenceState) -> AcousticSystem {
    AcousticSystem::new(r)
}

/// Ensure a velocity grid is symmetric; several wall constructions reflect `v`.
pub fn require_symmetric(grid: &VelocityGrid) -> Result<()> {
    if grid.is_symmetric() {
        Ok(())
    } else {
        Err(Error::GridMismatch(
            "velocity grid must be symmetric about v = 0".into(),
        ))
    }
}
