//! Spectral solver for the half-space layer problem
//! `w d_z f = L* f` on `z > 0`, `f(0, w) = phi(w)` for `w > 0`.
//!
//! The unknown is expanded in the even/odd extended basis. A damped problem,
//! whose solutions all decay, is solved through the symmetric pencil
//! `(A, B)`; the undamped solution and its end-state are then recovered from
//! damped solutions with equilibrium inflow.
//!
//! All quantities live in the layer frame: `z` points into the domain and
//! `w > 0` is the incoming half. [`WallSide`] converts between this frame
//! and physical coordinates at either end of an interval.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::halfspace_basis::{ExtendedBasis, ProjectionRule};
use crate::linearization::{ModePartition, ReferenceState, MODE_MINUS, MODE_PLUS, MODE_ZERO};

pub const DEFAULT_ORDER: usize = 30;
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Eigenvalues below this fraction of the largest magnitude count as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-9;
pub const MAX_RECOVERY_CONDITION: f64 = 1e12;
/// Extra Gauss points beyond the spectral order for the projection rules.
const EXTRA_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub order: usize,
    pub alpha: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Galerkin matrices of the damped problem `A a' = -B a`.
#[derive(Debug, Clone)]
pub struct DampedOperator {
    reference: ReferenceState,
    basis: ExtendedBasis,
    rule: ProjectionRule,
    alpha: f64,
    /// `<w P_i, P_j>`.
    pub a: DMatrix<f64>,
    /// `-<L_d P_i, P_j>`; symmetric positive definite.
    pub b: DMatrix<f64>,
    /// `<chi_k, P_i>` per mode.
    pub chi_proj: [DVector<f64>; 3],
    /// `<w chi_k, P_i>` per mode.
    pub flux_proj: [DVector<f64>; 3],
    /// `<w L^{-1}(w zeta_0), P_i>` for each zero-speed mode.
    pub auxiliary: Vec<DVector<f64>>,
}

pub fn assemble_damped(r: &ReferenceState, basis: &ExtendedBasis, alpha: f64) -> Result<DampedOperator> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("damping strength {alpha} must be positive")));
    }
    let order = basis.order();
    let rule = ProjectionRule::new(r, basis, order + EXTRA_POINTS)?;
    let a = basis.velocity_matrix();
    let chi_proj = [0, 1, 2].map(|k| rule.project(|w| r.chi_polynomial(k, w)));
    let flux_proj = [0, 1, 2].map(|k| rule.project(|w| w * r.chi_polynomial(k, w)));
    let speeds = r.speeds();
    // L^{-1} g = -g off the null space, and the null-space part of w zeta_0 is
    // u_0 zeta_0, so L^{-1}(w zeta_0) = -(w - u_0) zeta_0. The sign cancels in
    // the rank-one damping term.
    let auxiliary: Vec<DVector<f64>> = r
        .partition()
        .zero
        .iter()
        .map(|&k| rule.project(|w| w * (w - speeds[k]) * r.chi_polynomial(k, w)))
        .collect();

    let m = basis.len();
    let mut b = collision_block(&chi_proj, m);
    for d in flux_proj.iter().chain(&auxiliary) {
        b += alpha * d * d.transpose();
    }
    Ok(DampedOperator {
        reference: *r,
        basis: basis.clone(),
        rule,
        alpha,
        a,
        b,
        chi_proj,
        flux_proj,
        auxiliary,
    })
}

/// `-<L* P_i, P_j> = I - sum_k <chi_k, P_i><chi_k, P_j>`.
fn collision_block(chi_proj: &[DVector<f64>; 3], m: usize) -> DMatrix<f64> {
    let mut b = DMatrix::identity(m, m);
    for c in chi_proj {
        b -= c * c.transpose();
    }
    b
}

impl DampedOperator {
    pub fn reference(&self) -> &ReferenceState {
        &self.reference
    }

    pub fn basis(&self) -> &ExtendedBasis {
        &self.basis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    /// Galerkin matrix of the undamped collision operator.
    pub fn collision_matrix(&self) -> DMatrix<f64> {
        collision_block(&self.chi_proj, self.basis.len())
    }

    /// `<w P_i, P_j>` by direct Gauss quadrature, independent of the
    /// recurrence-based [`DampedOperator::a`].
    pub fn velocity_matrix_by_quadrature(&self) -> Result<DMatrix<f64>> {
        let basis = &self.basis;
        let m = basis.len();
        let rule = basis.table().gauss_rule(basis.order() + 2)?;
        let mut q = DMatrix::zeros(m, m);
        for (&s, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let vp = basis.eval_all(s);
            let vm = basis.eval_all(-s);
            let g = wt * (s * s / (2.0 * basis.temp())).exp() * s;
            for i in 0..m {
                for j in 0..m {
                    q[(i, j)] += g * (vp[i] * vp[j] - vm[i] * vm[j]);
                }
            }
        }
        Ok(q)
    }

    /// Half-line coefficients `int_0^inf phi B_n exp(-w^2/4T) dw`, `n < N`.
    pub fn inflow_coefficients(&self, inflow: &Inflow) -> DVector<f64> {
        let n = self.order();
        let r = &self.reference;
        match inflow {
            Inflow::Modes(c) => self.rule.inflow_coefficients(
                |w| c[0] * r.chi_polynomial(0, w) + c[1] * r.chi_polynomial(1, w) + c[2] * r.chi_polynomial(2, w),
                n,
            ),
            Inflow::Samples { nodes, values, dv } => {
                let t = self.basis.temp();
                self.sampled_coefficients(nodes, values, *dv, |w| (-w * w / (4.0 * t)).exp())
            }
            Inflow::Perturbation { nodes, values, dv } => {
                // phi = psi / sqrt(M*); fold the Gaussians together so tails
                // never divide by an underflowed sqrt(M*).
                let (u, t) = (r.u(), r.temp());
                let pref = (r.rho() / (2.0 * std::f64::consts::PI * t).sqrt()).sqrt();
                self.sampled_coefficients(nodes, values, *dv, |w| ((u * u - 2.0 * w * u) / (4.0 * t)).exp() / pref)
            }
        }
    }

    fn sampled_coefficients(
        &self,
        nodes: &[f64],
        values: &[f64],
        dv: f64,
        factor: impl Fn(f64) -> f64,
    ) -> DVector<f64> {
        let n = self.order();
        let mut out = DVector::zeros(n);
        let mut b = vec![0.0; n];
        for (&w, &val) in nodes.iter().zip(values) {
            if w <= 0.0 || val == 0.0 {
                continue;
            }
            self.basis.table().eval_into(w, &mut b);
            let c = val * factor(w) * dv;
            for k in 0..n {
                out[k] += c * b[k];
            }
        }
        out
    }

    /// Write `A`, `B` and the pencil eigenvalues as CSV files into `dir`.
    pub fn dump_csv(&self, dir: &Path, eig: &EigenStructure) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("A.csv"), matrix_csv(&self.a))?;
        std::fs::write(dir.join("B.csv"), matrix_csv(&self.b))?;
        let mut s = String::new();
        for v in eig.sigma.iter() {
            let _ = writeln!(s, "{v:.17e}");
        }
        std::fs::write(dir.join("eigenvalues.csv"), s)?;
        Ok(())
    }
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Eigen-decomposition of the pencil `A y = sigma B y`.
///
/// A mode with `sigma > 0` decays as `exp(-z / sigma)`; `sigma < 0` grows.
/// The single zero eigenvalue comes from the odd basis count making `A`
/// singular.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    pub sigma: DVector<f64>,
    /// Coefficient vectors of the decaying modes, one per column.
    pub decaying: DMatrix<f64>,
    /// `sigma` of each decaying mode.
    pub decay_lengths: Vec<f64>,
    pub n_pos: usize,
    pub n_zero: usize,
    pub n_neg: usize,
}

pub fn eigen_structure(op: &DampedOperator) -> Result<EigenStructure> {
    let n = op.order();
    let chol = Cholesky::new(op.b.clone()).ok_or(Error::IndefiniteDamping)?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(&op.a)
        .ok_or(Error::IndefiniteDamping)?;
    let s = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(Error::IndefiniteDamping)?;
    let s = 0.5 * (&s + s.transpose());
    let eig = SymmetricEigen::new(s);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = ZERO_EIGEN_TOL * scale;
    let (mut n_pos, mut n_zero, mut n_neg) = (0, 0, 0);
    let mut cols = Vec::new();
    let mut lengths = Vec::new();
    let lt = l.transpose();
    for (k, &sg) in eig.eigenvalues.iter().enumerate() {
        if sg > tol {
            n_pos += 1;
            let y = eig.eigenvectors.column(k).into_owned();
            let x = lt.solve_upper_triangular(&y).ok_or(Error::IndefiniteDamping)?;
            cols.push(x);
            lengths.push(sg);
        } else if sg < -tol {
            n_neg += 1;
        } else {
            n_zero += 1;
        }
    }
    if n_pos != n || n_neg != n || n_zero != 1 {
        return Err(Error::EigenCountMismatch {
            pos: n_pos,
            zero: n_zero,
            neg: n_neg,
            expected: n,
        });
    }
    Ok(EigenStructure {
        sigma: eig.eigenvalues,
        decaying: DMatrix::from_columns(&cols),
        decay_lengths: lengths,
        n_pos,
        n_zero,
        n_neg,
    })
}

/// Inflow data for `w > 0` in the layer frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Inflow {
    /// `phi = sum_k c_k chi_k`.
    Modes([f64; 3]),
    /// Point values of `phi` on uniform cells of width `dv`.
    Samples { nodes: Vec<f64>, values: Vec<f64>, dv: f64 },
    /// Point values of `psi = sqrt(M*) phi`, i.e. a kinetic perturbation `F - M*`.
    Perturbation { nodes: Vec<f64>, values: Vec<f64>, dv: f64 },
}

impl Inflow {
    pub fn zero() -> Self {
        Inflow::Modes([0.0; 3])
    }

    pub fn mode(k: usize) -> Self {
        let mut c = [0.0; 3];
        c[k] = 1.0;
        Inflow::Modes(c)
    }

    /// `self - sum_k coeffs_k chi_k` for the frame reference `r`.
    pub fn minus_modes(&self, r: &ReferenceState, coeffs: [f64; 3]) -> Inflow {
        let mix = |w: f64| {
            let c = r.chi_all(w);
            coeffs[0] * c[0] + coeffs[1] * c[1] + coeffs[2] * c[2]
        };
        match self {
            Inflow::Modes(c) => Inflow::Modes([0, 1, 2].map(|k| c[k] - coeffs[k])),
            Inflow::Samples { nodes, values, dv } => Inflow::Samples {
                nodes: nodes.clone(),
                values: nodes.iter().zip(values).map(|(&w, v)| v - mix(w)).collect(),
                dv: *dv,
            },
            Inflow::Perturbation { nodes, values, dv } => Inflow::Perturbation {
                nodes: nodes.clone(),
                values: nodes
                    .iter()
                    .zip(values)
                    .map(|(&w, v)| v - mix(w) * r.sqrt_maxwellian(w))
                    .collect(),
                dv: *dv,
            },
        }
    }
}

/// Modal representation of a damped solution.
#[derive(Debug, Clone)]
pub struct DampedSolution {
    /// Amplitude of each decaying mode.
    pub amplitudes: DVector<f64>,
    /// Basis coefficients at `z = 0`.
    pub at_wall: DVector<f64>,
}

/// Everything needed to solve layer problems for one reference state.
#[derive(Debug)]
pub struct LayerSolver {
    op: DampedOperator,
    eig: EigenStructure,
    boundary: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    outgoing: Vec<usize>,
    greens: Vec<DampedSolution>,
    recovery: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    recovery_matrix: DMatrix<f64>,
    condition: f64,
}

impl LayerSolver {
    pub fn new(r: &ReferenceState, config: LayerConfig) -> Result<Self> {
        let basis = ExtendedBasis::for_reference(r, config.order)?;
        let op = assemble_damped(r, &basis, config.alpha)?;
        Self::from_operator(op)
    }

    pub fn from_operator(op: DampedOperator) -> Result<Self> {
        let eig = eigen_structure(&op)?;
        let n = op.order();
        // Inflow half of the expansion: (a^E_n + a^O_n) / sqrt 2 for n < N.
        let mut trace = DMatrix::zeros(n, 2 * n + 1);
        for k in 0..n {
            trace[(k, k)] = std::f64::consts::FRAC_1_SQRT_2;
            trace[(k, n + k)] = std::f64::consts::FRAC_1_SQRT_2;
        }
        let m = &trace * &eig.decaying;
        let (_, smax, smin) = singular_extremes(&m);
        if !(smin > 1e-14 * smax) {
            return Err(Error::SingularBoundarySystem);
        }
        let boundary = m.lu();
        let partition = op.reference().partition();
        let outgoing = partition.outgoing();
        let mut solver = Self {
            op,
            eig,
            boundary,
            outgoing,
            greens: Vec::new(),
            recovery: None,
            recovery_matrix: DMatrix::zeros(0, 0),
            condition: 1.0,
        };
        let greens: Vec<DampedSolution> = solver
            .outgoing
            .iter()
            .map(|&k| solver.solve_damped(&Inflow::mode(k)))
            .collect::<Result<_>>()?;
        let p = solver.outgoing.len();
        let c = DMatrix::from_fn(p, p, |i, j| {
            solver.op.flux_proj[solver.outgoing[i]].dot(&greens[j].at_wall)
        });
        if p > 0 {
            let (cond, _, _) = singular_extremes(&c);
            debug!("layer recovery matrix {p}x{p}, condition {cond:.3e}");
            if !(cond < MAX_RECOVERY_CONDITION) {
                return Err(Error::SingularRecovery { condition: cond });
            }
            solver.condition = cond;
            solver.recovery = Some(c.clone().lu());
        }
        solver.recovery_matrix = c;
        solver.greens = greens;
        Ok(solver)
    }

    pub fn operator(&self) -> &DampedOperator {
        &self.op
    }

    pub fn eigen(&self) -> &EigenStructure {
        &self.eig
    }

    pub fn reference(&self) -> &ReferenceState {
        self.op.reference()
    }

    pub fn partition(&self) -> ModePartition {
        self.reference().partition()
    }

    pub fn recovery_matrix(&self) -> &DMatrix<f64> {
        &self.recovery_matrix
    }

    pub fn recovery_condition(&self) -> f64 {
        self.condition
    }

    pub fn solve_damped(&self, inflow: &Inflow) -> Result<DampedSolution> {
        let c = self.op.inflow_coefficients(inflow);
        let amplitudes = self
            .boundary
            .solve(&c)
            .ok_or(Error::SingularBoundarySystem)?;
        let at_wall = &self.eig.decaying * &amplitudes;
        Ok(DampedSolution { amplitudes, at_wall })
    }

    /// Coefficients of the damped solution at depth `z`.
    pub fn damped_profile(&self, sol: &DampedSolution, z: f64) -> DVector<f64> {
        let decay = DVector::from_iterator(
            sol.amplitudes.len(),
            sol.amplitudes
                .iter()
                .zip(&self.eig.decay_lengths)
                .map(|(a, s)| a * (-z / s).exp()),
        );
        &self.eig.decaying * decay
    }

    /// Solve the undamped layer problem.
    pub fn solve(&self, inflow: &Inflow) -> Result<LayerSolution> {
        let fd = self.solve_damped(inflow)?;
        let p = self.outgoing.len();
        let mut xi_out = DVector::zeros(p);
        if let Some(lu) = &self.recovery {
            let q = DVector::from_fn(p, |i, _| self.op.flux_proj[self.outgoing[i]].dot(&fd.at_wall));
            xi_out = lu.solve(&q).ok_or(Error::SingularRecovery {
                condition: self.condition,
            })?;
        }
        let mut amplitudes = fd.amplitudes.clone();
        let mut at_wall = fd.at_wall.clone();
        let mut xi = [0.0; 3];
        for (j, &k) in self.outgoing.iter().enumerate() {
            xi[k] = xi_out[j];
            amplitudes -= xi_out[j] * &self.greens[j].amplitudes;
            at_wall -= xi_out[j] * &self.greens[j].at_wall;
        }
        Ok(LayerSolution {
            reference: *self.reference(),
            xi,
            amplitudes,
            at_wall,
            damped_at_wall: fd.at_wall,
        })
    }

    /// `<w f(0), chi_i>` of a solution, from its coefficients.
    pub fn wall_flux(&self, sol: &LayerSolution) -> [f64; 3] {
        let speeds = self.reference().speeds();
        [0, 1, 2].map(|i| self.op.flux_proj[i].dot(&sol.at_wall) + sol.xi[i] * speeds[i])
    }

    /// `f(z, w)` of a solution.
    pub fn evaluate(&self, sol: &LayerSolution, z: f64, w: f64) -> f64 {
        let coeffs = if z == 0.0 {
            sol.at_wall.clone()
        } else {
            let d = DampedSolution {
                amplitudes: sol.amplitudes.clone(),
                at_wall: sol.at_wall.clone(),
            };
            self.damped_profile(&d, z)
        };
        let p = self.op.basis().eval_all(w);
        let spectral: f64 = coeffs.iter().zip(&p).map(|(a, b)| a * b).sum();
        spectral + sol.end_state(w)
    }

    /// `f(0, w)` at each of `nodes`.
    pub fn trace(&self, sol: &LayerSolution, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&w| self.evaluate(sol, 0.0, w)).collect()
    }
}

/// Condition number, largest and smallest singular value.
fn singular_extremes(m: &DMatrix<f64>) -> (f64, f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    (smax / smin, smax, smin)
}

/// Solution of one layer problem.
#[derive(Debug, Clone)]
pub struct LayerSolution {
    pub reference: ReferenceState,
    /// End-state coefficients on `chi_0, chi_+, chi_-`; zero on incoming modes.
    pub xi: [f64; 3],
    /// Decaying-mode amplitudes of `f - f_inf`.
    pub amplitudes: DVector<f64>,
    /// Basis coefficients of `f(0) - f_inf`.
    pub at_wall: DVector<f64>,
    /// Basis coefficients of the damped solution at the wall.
    pub damped_at_wall: DVector<f64>,
}

impl LayerSolution {
    /// `f_inf(w) = sum_k xi_k chi_k(w)`.
    pub fn end_state(&self, w: f64) -> f64 {
        let c = self.reference.chi_all(w);
        self.xi[0] * c[0] + self.xi[1] * c[1] + self.xi[2] * c[2]
    }
}

/// Which end of an interval a layer sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WallSide {
    /// Layer at the lower end; frame velocity equals physical velocity.
    Left,
    /// Layer at the upper end; frame velocity is `w = -v`.
    Right,
}

impl WallSide {
    /// Reference state as seen in the layer frame.
    pub fn frame_reference(self, r: &ReferenceState) -> ReferenceState {
        match self {
            WallSide::Left => *r,
            WallSide::Right => r.flipped(),
        }
    }

    /// Frame velocity of a physical velocity.
    pub fn frame_velocity(self, v: f64) -> f64 {
        match self {
            WallSide::Left => v,
            WallSide::Right => -v,
        }
    }

    /// Physical mode coefficients of a frame expansion. Under `w = -v`,
    /// `chi_0` maps to itself and `chi_+`, `chi_-` map to `-chi_-`, `-chi_+`.
    pub fn to_physical(self, frame: [f64; 3]) -> [f64; 3] {
        match self {
            WallSide::Left => frame,
            WallSide::Right => [frame[MODE_ZERO], -frame[MODE_MINUS], -frame[MODE_PLUS]],
        }
    }

    /// Inverse of [`WallSide::to_physical`] (the map is an involution).
    pub fn to_frame(self, physical: [f64; 3]) -> [f64; 3] {
        self.to_physical(physical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    rho: String,
    u: String,
    temp: String,
    order: usize,
    alpha: String,
}

fn round12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Layer solvers keyed by reference state rounded to 12 significant digits.
///
/// Solvers are built from the rounded state, so a lookup never depends on
/// which nearby state populated the entry first.
#[derive(Debug, Default)]
pub struct GreensCache {
    map: Mutex<HashMap<CacheKey, Arc<LayerSolver>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl GreensCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, r: &ReferenceState, config: LayerConfig) -> Result<Arc<LayerSolver>> {
        let key = CacheKey {
            rho: round12(r.rho()),
            u: round12(r.u()),
            temp: round12(r.temp()),
            order: config.order,
            alpha: round12(config.alpha),
        };
        if let Some(s) = self.map.lock().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(s));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let parse = |s: &str| s.parse::<f64>().expect("rounded float parses");
        let rounded = ReferenceState::new(parse(&key.rho), parse(&key.u), parse(&key.temp))?;
        let cfg = LayerConfig {
            order: config.order,
            alpha: parse(&key.alpha),
        };
        // Built outside the lock; concurrent builders produce identical
        // solvers and the first insertion wins.
        let solver = Arc::new(LayerSolver::new(&rounded, cfg)?);
        let mut map = self.map.lock().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(solver)))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One-shot layer solve: assemble, solve the damped problems, recover.
pub fn solve_layer(r: &ReferenceState, config: LayerConfig, inflow: &Inflow) -> Result<LayerSolution> {
    LayerSolver::new(r, config)?.solve(inflow)
}
