//! Orthogonal polynomials on the half line for shifted Gaussian weights,
//! Gauss rules built from them, and the even/odd extended basis used by the
//! half-space solver.
//!
//! The weight is `exp(-(v - u)^2 / 2T)` on `(0, inf)`. Recurrence
//! coefficients come from a discretized Stieltjes procedure on a composite
//! Gauss-Legendre rule. The closed-form nonlinear recurrence is also provided
//! but loses roughly one digit per order and is only usable for low orders.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linearization::ReferenceState;

const STIELTJES_PANELS: usize = 60;
const STIELTJES_POINTS: usize = 20;
/// Extent of the discretized measure in units of `sqrt(T)` beyond the peak.
const STIELTJES_REACH: f64 = 40.0;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let alpha = vec![0.0; n];
    let sqrt_beta: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&alpha, &sqrt_beta, 2.0)
}

/// Nodes and weights from a Jacobi matrix with diagonal `alpha` and
/// off-diagonal `sqrt_beta`, for a measure of total mass `m0`.
fn golub_welsch(alpha: &[f64], sqrt_beta: &[f64], m0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = alpha[i];
        if i + 1 < n {
            j[(i, i + 1)] = sqrt_beta[i];
            j[(i + 1, i)] = sqrt_beta[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], m0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Composite Gauss-Legendre rule on `[a, b]`.
fn composite_legendre(a: f64, b: f64, panels: usize, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * width * xi);
            weights.push(0.5 * width * wi);
        }
    }
    (nodes, weights)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GK_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_KRONROD[7] * fc;
    let mut g = GK_GAUSS[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        k += GK_KRONROD[i] * s;
        if i % 2 == 1 {
            g += GK_GAUSS[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn adaptive_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (val, err) = kronrod_panel(f, a, b);
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
    }
    // Start from a uniform split so a narrow peak cannot slip past the
    // error estimate of a single panel.
    const START: usize = 32;
    let width = (b - a) / START as f64;
    let panels: Vec<(f64, f64)> = (0..START)
        .map(|p| (a + p as f64 * width, a + (p + 1) as f64 * width))
        .collect();
    let coarse: f64 = panels.iter().map(|&(l, r)| kronrod_panel(&f, l, r).0).sum();
    let tol = (rel_tol * coarse.abs()).max(1e-300) / START as f64;
    panels.iter().map(|&(l, r)| recurse(&f, l, r, tol, 40)).sum()
}

/// `int_0^inf v^k exp(-(v - u)^2 / 2T) dv` by adaptive quadrature.
pub fn half_gaussian_moment(u: f64, temp: f64, k: i32) -> f64 {
    let upper = u.max(0.0) + STIELTJES_REACH * temp.sqrt();
    let f = |v: f64| v.powi(k) * (-(v - u) * (v - u) / (2.0 * temp)).exp();
    // Split at the peak so the adaptive scheme sees a smooth bump on each side.
    let peak = u.clamp(0.0, upper);
    let mut total = adaptive_integrate(f, peak, upper, 1e-14);
    if peak > 0.0 {
        total += adaptive_integrate(f, 0.0, peak, 1e-14);
    }
    total
}

/// Three-term recurrence coefficients of the orthonormal polynomials `B_n`.
///
/// `alpha[n]` for `n = 0..=order`, `beta[n]` for `n = 0..=order + 1` with
/// `beta[0] = 0`, so `B_0..B_{order+1}` can be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceTable {
    pub u: f64,
    pub temp: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub m0: f64,
    pub m1: f64,
}

impl RecurrenceTable {
    pub fn order(&self) -> usize {
        self.alpha.len() - 1
    }

    /// `B_0(x) .. B_n(x)`.
    pub fn eval(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        self.eval_into(x, &mut out);
        out
    }

    /// Fill `out[k] = B_k(x)` for `k < out.len()`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        assert!(n <= self.alpha.len() + 1, "order exceeds recurrence table");
        out[0] = 1.0 / self.m0.sqrt();
        if n > 1 {
            out[1] = (x - self.alpha[0]) * out[0] / self.beta[1].sqrt();
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] =
                ((x - self.alpha[k]) * out[k] - self.beta[k].sqrt() * out[k - 1]) / self.beta[k + 1].sqrt();
        }
    }

    /// Values and first derivatives of `B_0 .. B_n` at `x`.
    pub fn eval_with_derivative(&self, x: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; n + 1];
        let mut d = vec![0.0; n + 1];
        p[0] = 1.0 / self.m0.sqrt();
        if n >= 1 {
            let s = self.beta[1].sqrt();
            p[1] = (x - self.alpha[0]) * p[0] / s;
            d[1] = p[0] / s;
        }
        for k in 1..n {
            let s = self.beta[k + 1].sqrt();
            let sb = self.beta[k].sqrt();
            p[k + 1] = ((x - self.alpha[k]) * p[k] - sb * p[k - 1]) / s;
            d[k + 1] = (p[k] + (x - self.alpha[k]) * d[k] - sb * d[k - 1]) / s;
        }
        (p, d)
    }

    /// `n`-point Gauss rule for the weight of this table.
    pub fn gauss_rule(&self, n: usize) -> Result<QuadratureRule> {
        if n == 0 || n > self.alpha.len() {
            return Err(Error::InvalidConfig(format!(
                "{n}-point rule from a table of order {}",
                self.order()
            )));
        }
        let sqrt_beta: Vec<f64> = self.beta[1..n].iter().map(|b| b.sqrt()).collect();
        let (nodes, _) = golub_welsch(&self.alpha[..n], &sqrt_beta, self.m0);
        // Christoffel numbers keep full relative accuracy in the tails, where
        // squared eigenvector components do not.
        let mut b = vec![0.0; n];
        let weights = nodes
            .iter()
            .map(|&x| {
                self.eval_into(x, &mut b);
                1.0 / b.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        Ok(QuadratureRule {
            u: self.u,
            temp: self.temp,
            nodes,
            weights,
        })
    }
}

/// Recurrence table via the discretized Stieltjes procedure.
pub fn recurrence_coefficients(u: f64, temp: f64, order: usize) -> Result<RecurrenceTable> {
    if !(temp > 0.0) {
        return Err(Error::NegativeTemperature { temp });
    }
    let upper = u.max(0.0) + STIELTJES_REACH * temp.sqrt();
    let (x, mut w) = composite_legendre(0.0, upper, STIELTJES_PANELS, STIELTJES_POINTS);
    for (wi, xi) in w.iter_mut().zip(&x) {
        *wi *= (-(xi - u) * (xi - u) / (2.0 * temp)).exp();
    }
    let m0 = half_gaussian_moment(u, temp, 0);
    let m1 = half_gaussian_moment(u, temp, 1);
    let discrete_mass: f64 = w.iter().sum();

    let mut alpha = Vec::with_capacity(order + 1);
    let mut beta: Vec<f64> = vec![0.0];
    let mut prev = vec![0.0; x.len()];
    let mut cur = vec![1.0 / discrete_mass.sqrt(); x.len()];
    for n in 0..=order {
        let a: f64 = (0..x.len()).map(|j| w[j] * x[j] * cur[j] * cur[j]).sum();
        alpha.push(a);
        let sb = beta[n].sqrt();
        let next: Vec<f64> = (0..x.len())
            .map(|j| (x[j] - a) * cur[j] - sb * prev[j])
            .collect();
        let b: f64 = (0..x.len()).map(|j| w[j] * next[j] * next[j]).sum();
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::RecurrenceBreakdown { order: n + 1, beta: b });
        }
        beta.push(b);
        let s = b.sqrt();
        prev = cur;
        cur = next.into_iter().map(|v| v / s).collect();
    }
    // alpha_0 of the table is exactly m1/m0 of the continuous weight.
    alpha[0] = m1 / m0;
    Ok(RecurrenceTable {
        u,
        temp,
        alpha,
        beta,
        m0,
        m1,
    })
}

/// The closed-form nonlinear recurrence
/// `beta_{n+1} = 2Tn + T - beta_n + u alpha_n - alpha_n^2`,
/// `alpha_{n+1} = T / beta_{n+1} * sum_{k<=n} alpha_k - alpha_n + u`.
///
/// Rounding errors are amplified at every order; use only for small `order`.
pub fn nonlinear_recurrence(u: f64, temp: f64, order: usize) -> Result<RecurrenceTable> {
    if !(temp > 0.0) {
        return Err(Error::NegativeTemperature { temp });
    }
    let m0 = half_gaussian_moment(u, temp, 0);
    let m1 = half_gaussian_moment(u, temp, 1);
    let mut alpha = vec![m1 / m0];
    let mut beta = vec![0.0];
    let mut sum = alpha[0];
    for n in 0..=order {
        let a = alpha[n];
        let b = 2.0 * temp * n as f64 + temp - beta[n] + u * a - a * a;
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::RecurrenceBreakdown { order: n + 1, beta: b });
        }
        beta.push(b);
        if n < order {
            let next = temp / b * sum - a + u;
            alpha.push(next);
            sum += next;
        }
    }
    Ok(RecurrenceTable {
        u,
        temp,
        alpha,
        beta,
        m0,
        m1,
    })
}

/// Gauss rule for `int_0^inf g(v) exp(-(v - u)^2 / 2T) dv`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub u: f64,
    pub temp: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| w * g(x))
            .sum()
    }
}

/// Rules for the weights `exp(-(v - u/2)^2 / 2T)` and `exp(-(v + u/2)^2 / 2T)`.
pub fn gauss_rule(u: f64, temp: f64, n_points: usize) -> Result<(QuadratureRule, QuadratureRule)> {
    let plus = recurrence_coefficients(0.5 * u, temp, n_points)?.gauss_rule(n_points)?;
    let minus = recurrence_coefficients(-0.5 * u, temp, n_points)?.gauss_rule(n_points)?;
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Even/odd extensions of the half-line polynomials, times a Gaussian.
///
/// Functions are evaluated in the lab velocity `w`, in which the reflection
/// point is `w = 0`:
/// `P^E_n(w) = B_n(|w|) exp(-w^2 / 4T) / sqrt 2`,
/// `P^O_n(w) = sign(w) B_n(|w|) exp(-w^2 / 4T) / sqrt 2`,
/// with `B_n` orthonormal for `exp(-w^2 / 2T)` on `(0, inf)`.
///
/// Internal ordering is block form: `E_0..E_{N-1}` then `O_0..O_N`, giving
/// `2N + 1` functions. [`ExtendedBasis::interleaved_order`] maps to the
/// alternating `O_0, E_0, O_1, E_1, ..., O_N` listing.
#[derive(Debug, Clone)]
pub struct ExtendedBasis {
    order: usize,
    temp: f64,
    table: RecurrenceTable,
}

impl ExtendedBasis {
    pub fn new(temp: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("spectral order must be at least 1".into()));
        }
        let table = recurrence_coefficients(0.0, temp, order + 1)?;
        Ok(Self { order, temp, table })
    }

    pub fn for_reference(r: &ReferenceState, order: usize) -> Result<Self> {
        Self::new(r.temp(), order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn temp(&self) -> f64 {
        self.temp
    }

    pub fn len(&self) -> usize {
        2 * self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn table(&self) -> &RecurrenceTable {
        &self.table
    }

    pub fn parity(&self, i: usize) -> Parity {
        if i < self.order {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Polynomial degree of the half-line factor of function `i`.
    pub fn degree(&self, i: usize) -> usize {
        if i < self.order {
            i
        } else {
            i - self.order
        }
    }

    /// Internal indices listed as `O_0, E_0, O_1, E_1, ..., O_N`.
    pub fn interleaved_order(&self) -> Vec<usize> {
        let n = self.order;
        let mut out = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            out.push(n + k);
            out.push(k);
        }
        out.push(2 * n);
        out
    }

    /// `B_0..B_N` at `x >= 0`.
    pub fn half_line(&self, x: f64) -> Vec<f64> {
        self.table.eval(x, self.order)
    }

    /// All `2N + 1` functions at `w`.
    pub fn eval_all(&self, w: f64) -> Vec<f64> {
        let n = self.order;
        let b = self.half_line(w.abs());
        let g = (-w * w / (4.0 * self.temp)).exp() / std::f64::consts::SQRT_2;
        let s = if w >= 0.0 { 1.0 } else { -1.0 };
        let mut out = Vec::with_capacity(2 * n + 1);
        out.extend(b[..n].iter().map(|x| x * g));
        out.extend(b.iter().map(|x| s * x * g));
        out
    }

    pub fn eval(&self, i: usize, w: f64) -> f64 {
        self.eval_all(w)[i]
    }

    /// `A_ij = <w P_i, P_j>` from the recurrence: `[[0, J], [J^T, 0]]` with
    /// `J` the `N x (N + 1)` truncated Jacobi matrix.
    pub fn velocity_matrix(&self) -> DMatrix<f64> {
        let n = self.order;
        let m = 2 * n + 1;
        let mut a = DMatrix::zeros(m, m);
        for i in 0..n {
            let mut put = |j: usize, val: f64| {
                a[(i, n + j)] = val;
                a[(n + j, i)] = val;
            };
            put(i, self.table.alpha[i]);
            put(i + 1, self.table.beta[i + 1].sqrt());
            if i > 0 {
                put(i - 1, self.table.beta[i].sqrt());
            }
        }
        a
    }
}

/// Quadrature that computes `<q sqrt(M*), P_i>` for all basis functions,
/// exactly when `q` is a polynomial of moderate degree.
#[derive(Debug, Clone)]
pub struct ProjectionRule {
    /// Lab velocities of the nodes: positive side then negative side.
    nodes: Vec<f64>,
    /// Quadrature weight times the Gaussian prefactors.
    weights: Vec<f64>,
    /// `basis_values[k]` holds `P_i(w_k) / g(w_k)` for every `i`, where
    /// `g(w) = sqrt(M*(w)) exp(-w^2 / 4T)` has been folded into the weights.
    basis_values: Vec<Vec<f64>>,
    prefactor: f64,
}

impl ProjectionRule {
    pub fn new(r: &ReferenceState, basis: &ExtendedBasis, n_points: usize) -> Result<Self> {
        let (u, t) = (r.u(), r.temp());
        let (plus, minus) = gauss_rule(u, t, n_points)?;
        let n = basis.order();
        let shift = (-u * u / (8.0 * t)).exp();
        // sqrt(M*) = (rho / sqrt(2 pi T))^{1/2} exp(-(w - u)^2 / 4T).
        let prefactor = (r.rho() / (2.0 * std::f64::consts::PI * t).sqrt()).sqrt();
        let mut nodes = Vec::with_capacity(2 * n_points);
        let mut weights = Vec::with_capacity(2 * n_points);
        let mut basis_values = Vec::with_capacity(2 * n_points);
        for (sign, rule) in [(1.0, &plus), (-1.0, &minus)] {
            for (&s, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let b = basis.half_line(s);
                let mut vals = Vec::with_capacity(2 * n + 1);
                vals.extend(b[..n].iter().map(|x| x / std::f64::consts::SQRT_2));
                vals.extend(b.iter().map(|x| sign * x / std::f64::consts::SQRT_2));
                nodes.push(sign * s);
                weights.push(wt * shift);
                basis_values.push(vals);
            }
        }
        Ok(Self {
            nodes,
            weights,
            basis_values,
            prefactor,
        })
    }

    /// `<q sqrt(M*), P_i>` for every `i`.
    pub fn project(&self, q: impl Fn(f64) -> f64) -> DVector<f64> {
        let m = self.basis_values[0].len();
        let mut out = DVector::zeros(m);
        for k in 0..self.nodes.len() {
            let c = self.weights[k] * q(self.nodes[k]) * self.prefactor;
            for i in 0..m {
                out[i] += c * self.basis_values[k][i];
            }
        }
        out
    }

    /// Half-line coefficients `int_0^inf q sqrt(M*) B_n exp(-w^2/4T) dw`, `n < N`.
    pub fn inflow_coefficients(&self, q: impl Fn(f64) -> f64, order: usize) -> DVector<f64> {
        let mut out = DVector::zeros(order);
        for k in 0..self.nodes.len() {
            if self.nodes[k] <= 0.0 {
                continue;
            }
            let c = self.weights[k] * q(self.nodes[k]) * self.prefactor;
            for n in 0..order {
                // E_n = B_n g / sqrt 2 in the stored values.
                out[n] += c * self.basis_values[k][n] * std::f64::consts::SQRT_2;
            }
        }
        out
    }
}
