//! Pointwise evaluation of `Δ^{α/2}` by principal-value quadrature, a spectral
//! reference on periodic boxes, and the dense Dirichlet discretization used by
//! the solvers.
//!
//! Sign convention: `Δ^{α/2} = -(-Δ)^{α/2}`, Fourier symbol `-|ξ|^α`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::domain::{Domain, Grid};
use crate::error::{invalid, Error, Result};
use crate::quad::Integrator;
use crate::stable_kernel::Alpha;

/// Largest dense operator we assemble.
pub const MAX_DENSE_NODES: usize = 4096;

/// Values on the nodes of a [`Grid`]; identically zero outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("values", format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.grid.domain
    }

    pub fn rho(&self) -> Vec<f64> {
        self.grid.rho()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .grid
                .nodes
                .iter()
                .zip(&self.values)
                .map(|(&x, &v)| f(x, v))
                .collect(),
        }
    }
}

/// `c_d = 2^α Γ((d+α)/2) / (π^{d/2} |Γ(-α/2)|)`.
pub fn c_d_constant(alpha: Alpha, dimension: usize) -> f64 {
    let a = alpha.value();
    let d = dimension as f64;
    2f64.powf(a) * libm::tgamma((d + a) / 2.0) / (PI.powf(d / 2.0) * libm::tgamma(-a / 2.0).abs())
}

/// `Δ^{α/2} (1-|x|²)_+^{α/2} = -getoor_constant` inside the unit ball.
pub fn getoor_constant(alpha: Alpha, dimension: usize) -> f64 {
    let a = alpha.value();
    let d = dimension as f64;
    2f64.powf(a) * libm::tgamma(1.0 + a / 2.0) * libm::tgamma((d + a) / 2.0) / libm::tgamma(d / 2.0)
}

/// Mean exit time from the unit ball, `E_x τ = (1-|x|²)^{α/2} / getoor_constant`.
pub fn expected_exit_time(alpha: Alpha, dimension: usize, x_norm: f64) -> f64 {
    (1.0 - x_norm * x_norm).max(0.0).powf(alpha.value() / 2.0) / getoor_constant(alpha, dimension)
}

// Below this radius the second difference is replaced by u''·y^{1-α}.
const PV_INNER_CUTOFF: f64 = 1e-4;

/// `∫₀^∞ (g(s) + g(-s) - 2 g(0)) s^{-1-α} ds`, split at `s = 1`; the outer part is
/// mapped to `(0, 1]` by `s = 1/σ`.
fn pv_line_integral(g: &dyn Fn(f64) -> f64, alpha: f64, breaks: &[f64], q: &Integrator) -> Result<f64> {
    let g0 = g(0.0);
    let y0 = PV_INNER_CUTOFF;
    let second = (g(y0) + g(-y0) - 2.0 * g0) / (y0 * y0);
    let near = second * y0.powf(2.0 - alpha) / (2.0 - alpha);
    let inner_breaks: Vec<f64> = breaks.iter().map(|b| b.abs()).filter(|&b| b > y0 && b < 1.0).collect();
    let inner = q.integrate(
        |y| (g(y) + g(-y) - 2.0 * g0) * y.powf(-1.0 - alpha),
        y0,
        1.0,
        &inner_breaks,
    )?;
    let outer_breaks: Vec<f64> = breaks.iter().map(|b| b.abs()).filter(|&b| b > 1.0).map(|b| 1.0 / b).collect();
    let outer = q.integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let y = 1.0 / s;
            (g(y) + g(-y)) * s.powf(alpha - 1.0)
        },
        0.0,
        1.0,
        &outer_breaks,
    )?;
    let total = near + inner + outer - 2.0 * g0 / alpha;
    if !total.is_finite() {
        return Err(Error::NonFinite("principal-value integral".into()));
    }
    Ok(total)
}

/// `Δ^{α/2} u(x)` in one dimension. `singular_points` are locations where `u`
/// is not smooth (support edges, kinks); they become quadrature breakpoints.
pub fn apply_pv_1d(u: impl Fn(f64) -> f64, alpha: Alpha, x: f64, singular_points: &[f64]) -> Result<f64> {
    let q = Integrator {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_panels: 20_000,
    };
    let breaks: Vec<f64> = singular_points.iter().map(|b| b - x).collect();
    let g = |s: f64| u(x + s);
    Ok(c_d_constant(alpha, 1) * pv_line_integral(&g, alpha.value(), &breaks, &q)?)
}

/// `Δ^{α/2} u(x)` for `x` in one or two dimensions.
pub fn apply_pv(u: impl Fn(&[f64]) -> f64 + Sync, alpha: Alpha, x: &[f64]) -> Result<f64> {
    match x.len() {
        1 => apply_pv_1d(|s| u(&[s]), alpha, x[0], &[]),
        2 => {
            let line_q = Integrator {
                abs_tol: 1e-11,
                rel_tol: 1e-9,
                max_panels: 5000,
            };
            let outer = Integrator::new(1e-10, 1e-9);
            let failure = std::cell::RefCell::new(None);
            let v = outer.integrate(
                |phi| {
                    let (sn, cs) = phi.sin_cos();
                    let g = |s: f64| u(&[x[0] + s * cs, x[1] + s * sn]);
                    match pv_line_integral(&g, alpha.value(), &[], &line_q) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                },
                0.0,
                PI,
                &[],
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(c_d_constant(alpha, 2) * v?)
        }
        d => Err(Error::Unsupported(format!("pointwise Δ^(α/2) in dimension {d}"))),
    }
}

/// Dense discretization of `Δ^{α/2}` acting on zero-extended grid functions.
///
/// `stiffness` is the symmetric matrix `S = W A_h` (`W` = diag of cell weights),
/// so `A_h = W^{-1} S`. Off-diagonals are nonnegative and each row of `A_h`
/// sums to `-κ_i`, the rate at which mass jumps from `x_i` into the exterior.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    pub grid: Grid,
    pub stiffness: DMatrix<f64>,
    pub killing: Vec<f64>,
    pub alpha: Alpha,
}

/// `c ∫_{d0}^{d1} r^{k-1-α} dr` for `k = 0, 1, 2`.
fn radial_moments(c: f64, a: f64, d0: f64, d1: f64) -> [f64; 3] {
    let m0 = c / a * (d0.powf(-a) - d1.powf(-a));
    let m1 = if (a - 1.0).abs() < 1e-12 {
        c * (d1 / d0).ln()
    } else {
        c * (d1.powf(1.0 - a) - d0.powf(1.0 - a)) / (1.0 - a)
    };
    let m2 = c * (d1.powf(2.0 - a) - d0.powf(2.0 - a)) / (2.0 - a);
    [m0, m1, m2]
}

/// Row `i` of `W A_h` before symmetrization (diagonal left at zero).
pub(crate) fn weighted_row(grid: &Grid, alpha: Alpha, i: usize) -> Vec<f64> {
    let a = alpha.value();
    let c = c_d_constant(alpha, 1);
    let x = &grid.nodes;
    let xi = &grid.breakpoints;
    let n = x.len();
    let mut row = vec![0.0; n];
    // first and second moments of the kernel about x_i missed by the
    // midpoint rule on the other cells, plus the whole own-cell term
    let own = 2.0 * c * (0.5 * grid.weights[i]).powf(2.0 - a) / (2.0 - a);
    let mut lin = 0.0;
    let mut quad = own;
    for j in 0..n {
        if j == i {
            continue;
        }
        let (d0, d1, sign) = if j > i {
            (xi[j] - x[i], xi[j + 1] - x[i], 1.0)
        } else {
            (x[i] - xi[j + 1], x[i] - xi[j], -1.0)
        };
        let [m0, m1, m2] = radial_moments(c, a, d0, d1);
        let r = x[j] - x[i];
        row[j] = m0;
        lin += sign * m1 - r * m0;
        quad += m2 - r * r * m0;
    }
    if i > 0 && i + 1 < n {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let big_h = hm + hp;
        // a·u'(x_i) + (b/2)·u''(x_i) with three-point stencils
        let mut left = (quad - lin * hp) / (hm * big_h);
        let mut right = (quad + lin * hm) / (hp * big_h);
        if left < 0.0 || right < 0.0 {
            // keep the M-matrix sign pattern: own cell only (b = own > 0, a = 0)
            left = own / (hm * big_h);
            right = own / (hp * big_h);
        }
        row[i - 1] += left;
        row[i + 1] += right;
    }
    let wi = grid.weights[i];
    row.iter_mut().for_each(|v| *v *= wi);
    row
}

/// Assembles the operator on a one-dimensional grid.
///
/// Row `i` approximates `c ∫_D (u(y) - u(x_i)) |x_i - y|^{-1-α} dy - κ_i u(x_i)`:
/// each foreign cell contributes its exact kernel mass times `u_j - u_i`; the
/// node's own cell (a symmetric neighbourhood, since nodes are midpoints)
/// contributes `u''(x_i)/2 · c ∫ s² |s|^{-1-α}` with `u''` from the three-point
/// nonuniform stencil. The weighted rows are then symmetrized.
pub fn build_dirichlet_operator(domain: &Domain, grid: &Grid, alpha: Alpha) -> Result<DirichletOperator> {
    if domain.dimension() != 1 {
        return Err(Error::Unsupported(
            "dense Dirichlet operators are one-dimensional".into(),
        ));
    }
    if &grid.domain != domain {
        return Err(invalid("grid", "grid was built for a different domain"));
    }
    let n = grid.len();
    if n > MAX_DENSE_NODES {
        return Err(invalid("grid", format!("{n} nodes exceed the dense limit {MAX_DENSE_NODES}")));
    }
    let a = alpha.value();
    let c = c_d_constant(alpha, 1);
    let lo = grid.lo();
    let hi = grid.hi();
    let x = &grid.nodes;
    let w = &grid.weights;

    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| weighted_row(grid, alpha, i)).collect();

    let killing: Vec<f64> = x
        .iter()
        .map(|&xi| c / a * ((xi - lo).powf(-a) + (hi - xi).powf(-a)))
        .collect();

    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (rows[i][j] + rows[j][i]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| s[(i, j)]).sum();
        s[(i, i)] = -off - w[i] * killing[i];
    }
    Ok(DirichletOperator {
        grid: grid.clone(),
        stiffness: s,
        killing,
        alpha,
    })
}

impl DirichletOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `A_h u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.stiffness * DVector::from_column_slice(u);
        v.iter().zip(&self.grid.weights).map(|(s, w)| s / w).collect()
    }

    /// Dense `A_h = W^{-1} S`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = self.stiffness.clone();
        for (i, w) in self.grid.weights.iter().enumerate() {
            m.row_mut(i).scale_mut(1.0 / w);
        }
        m
    }

    /// Eigen-decomposition of the symmetric similarity transform
    /// `W^{-1/2} S W^{-1/2}` of `A_h`.
    pub fn symmetric_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let n = self.len();
        let sq: Vec<f64> = self.grid.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let b = DMatrix::from_fn(n, n, |i, j| self.stiffness[(i, j)] * sq[i] * sq[j]);
        SymmetricEigen::new(b)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.symmetric_eigen().eigenvalues.max()
    }

    /// CSV triplets `i,j,entry` of `A_h`.
    pub fn to_csv(&self) -> String {
        let m = self.matrix();
        let mut s = String::from("i,j,entry\n");
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let _ = writeln!(s, "{i},{j},{:.15e}", m[(i, j)]);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub values: Vec<f64>,
    /// Set when the nonzero support spans more than a quarter of the box.
    pub aliasing_warning: bool,
}

/// Applies the Fourier multiplier `-|ξ|^α` to samples on the periodic box of
/// length `box_len` (uniform spacing `box_len / n`).
pub fn spectral_reference(samples: &[f64], box_len: f64, alpha: Alpha) -> Result<SpectralResult> {
    let n = samples.len();
    if n < 2 || !(box_len > 0.0) {
        return Err(invalid("samples", "need at least two samples on a positive box"));
    }
    let first = samples.iter().position(|v| *v != 0.0);
    let last = samples.iter().rposition(|v| *v != 0.0);
    let aliasing_warning = match (first, last) {
        (Some(f), Some(l)) => (l - f + 1) as f64 / n as f64 > 0.25,
        _ => false,
    };
    if aliasing_warning {
        log::warn!("spectral reference: support exceeds a quarter of the periodic box");
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let a = alpha.value();
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = 2.0 * PI * kk / box_len;
        *z *= -xi.abs().powf(a);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(SpectralResult {
        values: buf.iter().map(|z| z.re / n as f64).collect(),
        aliasing_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::graded_grid;

    fn alpha(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        let s = (x - c) / w;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }

    #[test]
    fn c_d_cauchy() {
        assert!((c_d_constant(alpha(1.0), 1) - 1.0 / PI).abs() < 1e-14);
        for k in 1..40 {
            let v = c_d_constant(alpha(0.05 * k as f64), 2);
            assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn constant_maps_to_zero() {
        let v = apply_pv_1d(|_| 3.0, alpha(1.2), 0.4, &[]).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    fn gaussian_oracle(a: f64, x: f64) -> f64 {
        // Δ^{α/2} e^{-x²/2} = -(2/√(2π)) ∫₀^∞ ξ^α e^{-ξ²/2} cos(ξx) dξ
        let q = Integrator::new(1e-14, 1e-12);
        let v = q
            .integrate_to_infinity(|xi| xi.powf(a) * (-0.5 * xi * xi).exp() * (xi * x).cos(), 0.0, &[1.0, 4.0])
            .unwrap();
        -2.0 / (2.0 * PI).sqrt() * v
    }

    #[test]
    fn gaussian_symbol() {
        for &al in &[0.5, 1.0, 1.5] {
            let at_zero = -2.0 / (2.0 * PI).sqrt() * 2f64.powf((al - 1.0) / 2.0) * libm::tgamma((al + 1.0) / 2.0);
            assert!((gaussian_oracle(al, 0.0) - at_zero).abs() < 1e-10);
            for &x in &[0.0, 0.7, 2.5] {
                let v = apply_pv_1d(|y| (-0.5 * y * y).exp(), alpha(al), x, &[]).unwrap();
                let o = gaussian_oracle(al, x);
                assert!((v - o).abs() < 1e-7, "α={al} x={x}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn getoor_profile_1d() {
        let a = alpha(1.0);
        let u = |x: f64| (1.0 - x * x).max(0.0).sqrt();
        for &x in &[0.0, 0.3, -0.77] {
            let v = apply_pv_1d(u, a, x, &[-1.0, 1.0]).unwrap();
            assert!((v + 1.0).abs() < 1e-6, "{x}: {v}");
        }
    }

    #[test]
    fn getoor_profile_2d() {
        let a = alpha(1.0);
        let u = |x: &[f64]| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0).powf(0.5);
        let v = apply_pv(u, a, &[0.2, 0.1]).unwrap();
        let expect = -getoor_constant(a, 2);
        assert!((v - expect).abs() < 2e-3 * expect.abs(), "{v} vs {expect}");
    }

    #[test]
    fn linearity() {
        let a = alpha(1.5);
        let f = |x: f64| bump(x, 0.1, 0.5);
        let g = |x: f64| bump(x, -0.2, 0.3) * x;
        let lhs = apply_pv_1d(|x| 2.0 * f(x) - 3.0 * g(x), a, 0.05, &[]).unwrap();
        let rhs = 2.0 * apply_pv_1d(f, a, 0.05, &[]).unwrap() - 3.0 * apply_pv_1d(g, a, 0.05, &[]).unwrap();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} {rhs}");
    }

    #[test]
    fn maximum_principle_sign() {
        for &al in &[0.5, 1.0, 1.5] {
            let v = apply_pv_1d(|x| bump(x, 0.0, 0.5), alpha(al), 0.0, &[]).unwrap();
            assert!(v < 0.0);
        }
    }

    #[test]
    fn operator_structure() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let g = graded_grid(&d, 64, 2.0, None).unwrap();
        let op = build_dirichlet_operator(&d, &g, alpha(1.0)).unwrap();
        let s = &op.stiffness;
        assert!((s - s.transpose()).abs().max() <= 1e-12);
        for i in 0..op.len() {
            assert!(s[(i, i)] < 0.0);
            for j in 0..op.len() {
                if i != j {
                    assert!(s[(i, j)] >= 0.0);
                }
            }
        }
        let ones = op.apply(&vec![1.0; op.len()]);
        for (v, k) in ones.iter().zip(&op.killing) {
            assert!((v + k).abs() <= 1e-9 * k.abs().max(1.0));
            assert!(*v < 0.0);
        }
        assert!(op.max_eigenvalue() < 0.0);
    }

    #[test]
    fn rejects_two_dimensional() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = graded_grid(&Domain::interval(-1.0, 1.0).unwrap(), 32, 2.0, None).unwrap();
        assert!(build_dirichlet_operator(&d, &g, alpha(1.0)).is_err());
    }

    #[test]
    fn spectral_zero_and_warning() {
        let r = spectral_reference(&vec![0.0; 64], 10.0, alpha(1.0)).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        assert!(!r.aliasing_warning);
        let r = spectral_reference(&vec![1.0; 64], 10.0, alpha(1.0)).unwrap();
        assert!(r.aliasing_warning);
    }
}
