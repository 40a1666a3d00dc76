//! Solution operators for the Dirichlet problems
//!
//! ```text
//!   Δ^{α/2} u - λ u = f  in D,        u = 0 on D^c
//!   ∂_t u = Δ^{α/2} u + f  in (0,T]×D, u(0) = u0, u = 0 on D^c
//! ```
//!
//! on top of a [`DirichletOperator`]. With `S = W A_h` symmetric, every system
//! below is symmetric positive definite and solved by Cholesky.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::{Domain, Grid};
use crate::error::{invalid, Error, Result};
use crate::fraclap_op::{apply_pv_1d, build_dirichlet_operator, DirichletOperator, GridFunction};
use crate::stable_kernel::Alpha;

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub domain: Domain,
    pub alpha: Alpha,
    pub lambda: f64,
    pub f: GridFunction,
}

impl EllipticProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda", format!("{} must be finite and >= 0", self.lambda)));
        }
        if self.lambda == 0.0 && !self.domain.is_bounded() {
            return Err(Error::Unsupported(
                "lambda = 0 needs a bounded domain; use a small positive lambda on the half-line".into(),
            ));
        }
        if self.f.domain() != &self.domain {
            return Err(invalid("f", "grid function lives on a different domain"));
        }
        Ok(())
    }
}

fn spd_factor(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Factorization of `λW - S`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    op: Arc<DirichletOperator>,
    lambda: f64,
    chol: Cholesky<f64, Dyn>,
}

impl EllipticSolver {
    pub fn new(op: Arc<DirichletOperator>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        let mut m = -op.stiffness.clone();
        for (i, w) in op.grid.weights.iter().enumerate() {
            m[(i, i)] += lambda * w;
        }
        let chol = spd_factor(m, "λW - S")?;
        Ok(Self { op, lambda, chol })
    }

    pub fn operator(&self) -> &DirichletOperator {
        &self.op
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Solves `(A_h - λ) u = f`.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        let w = &self.op.grid.weights;
        if f.len() != w.len() {
            return Err(invalid("f", "length does not match the grid"));
        }
        let rhs = DVector::from_iterator(f.len(), f.iter().zip(w).map(|(f, w)| -f * w));
        let u = self.chol.solve(&rhs);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("elliptic solution".into()));
        }
        Ok(u.as_slice().to_vec())
    }
}

pub fn solve_elliptic(p: &EllipticProblem) -> Result<GridFunction> {
    p.validate()?;
    let op = Arc::new(build_dirichlet_operator(&p.domain, &p.f.grid, p.alpha)?);
    let u = EllipticSolver::new(op, p.lambda)?.solve(&p.f.values)?;
    GridFunction::new(p.f.grid.clone(), u)
}

/// Samples `G^λ_D(x_i, x_j)`. The discrete solution of `(A_h - λ)u = f` is
/// `u_i = -Σ_j G(x_i, x_j) w_j f_j`, i.e. `G = (λW - S)^{-1}`.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    pub grid: Grid,
    pub lambda: f64,
    pub values: DMatrix<f64>,
}

pub fn green_function(domain: &Domain, alpha: Alpha, lambda: f64, grid: &Grid) -> Result<GreenFunction> {
    let op = Arc::new(build_dirichlet_operator(domain, grid, alpha)?);
    green_from_operator(op, lambda)
}

pub fn green_from_operator(op: Arc<DirichletOperator>, lambda: f64) -> Result<GreenFunction> {
    let solver = EllipticSolver::new(op.clone(), lambda)?;
    let mut g = solver.chol.inverse();
    // the Cholesky inverse is symmetric only up to rounding
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GreenFunction {
        grid: op.grid.clone(),
        lambda,
        values: g,
    })
}

impl GreenFunction {
    /// `𝒢f = ∫ G(·, y) f(y) dy`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.grid.weights).map(|(f, w)| f * w));
        (&self.values * wf).as_slice().to_vec()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,green\n");
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                let _ = writeln!(
                    s,
                    "{:.15e},{:.15e},{:.15e}",
                    self.grid.nodes[i], self.grid.nodes[j], self.values[(i, j)]
                );
            }
        }
        s
    }
}

/// Separable forcing term `a(t) g(x)`.
#[derive(Clone)]
pub struct ForcingTerm {
    pub time: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub space: Vec<f64>,
}

impl std::fmt::Debug for ForcingTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForcingTerm").field("space", &self.space.len()).finish()
    }
}

/// Time-dependent forcing as a finite sum of separable terms.
#[derive(Debug, Clone, Default)]
pub struct Forcing {
    pub terms: Vec<ForcingTerm>,
}

impl Forcing {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn steady(space: Vec<f64>) -> Self {
        Self::separable(|_| 1.0, space)
    }

    pub fn separable(time: impl Fn(f64) -> f64 + Send + Sync + 'static, space: Vec<f64>) -> Self {
        Self {
            terms: vec![ForcingTerm {
                time: Arc::new(time),
                space,
            }],
        }
    }

    pub fn plus(mut self, other: Forcing) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn at(&self, t: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for term in &self.terms {
            let a = (term.time)(t);
            if a != 0.0 {
                for (o, g) in out.iter_mut().zip(&term.space) {
                    *o += a * g;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    pub domain: Domain,
    pub alpha: Alpha,
    pub t_final: f64,
    pub u0: GridFunction,
    pub f: Forcing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

/// Grid values at a sequence of times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("series always holds the initial state")
    }

    pub fn snapshot(&self, k: usize) -> Result<GridFunction> {
        GridFunction::new(self.grid.clone(), self.values[k].clone())
    }

    /// `t,x,u` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,u\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            for (x, u) in self.grid.nodes.iter().zip(v) {
                let _ = writeln!(s, "{t:.10e},{x:.15e},{u:.15e}");
            }
        }
        s
    }
}

impl ParabolicProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(invalid("T", "must be positive and finite"));
        }
        if self.u0.domain() != &self.domain {
            return Err(invalid("u0", "grid function lives on a different domain"));
        }
        let n = self.u0.grid.len();
        if self.f.terms.iter().any(|t| t.space.len() != n) {
            return Err(invalid("f", "forcing length does not match the grid"));
        }
        Ok(())
    }
}

pub fn solve_parabolic(p: &ParabolicProblem, steps: usize) -> Result<TimeSeries> {
    solve_parabolic_with(p, steps, TimeScheme::ImplicitEuler)
}

pub fn solve_parabolic_with(p: &ParabolicProblem, steps: usize, scheme: TimeScheme) -> Result<TimeSeries> {
    p.validate()?;
    let op = build_dirichlet_operator(&p.domain, &p.u0.grid, p.alpha)?;
    ParabolicStepper::new(&op, p.t_final / steps as f64, scheme)?.run(p, steps)
}

/// One factorization of `W - θ dt S` shared by all steps.
#[derive(Debug, Clone)]
pub struct ParabolicStepper {
    stiffness: DMatrix<f64>,
    weights: DVector<f64>,
    dt: f64,
    scheme: TimeScheme,
    chol: Cholesky<f64, Dyn>,
}

impl ParabolicStepper {
    pub fn new(op: &DirichletOperator, dt: f64, scheme: TimeScheme) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let theta = match scheme {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        };
        let mut m = op.stiffness.scale(-theta * dt);
        for (i, w) in op.grid.weights.iter().enumerate() {
            m[(i, i)] += w;
        }
        Ok(Self {
            stiffness: op.stiffness.clone(),
            weights: DVector::from_column_slice(&op.grid.weights),
            dt,
            scheme,
            chol: spd_factor(m, "W - dt S")?,
        })
    }

    pub fn run(&self, p: &ParabolicProblem, steps: usize) -> Result<TimeSeries> {
        if steps == 0 {
            return Err(invalid("steps", "need at least one time step"));
        }
        let n = self.weights.len();
        let mut u = DVector::from_column_slice(&p.u0.values);
        let mut times = vec![0.0];
        let mut values = vec![p.u0.values.clone()];
        let mut f_prev = DVector::from_vec(p.f.at(0.0, n));
        for k in 1..=steps {
            let t = k as f64 * self.dt;
            let f_next = DVector::from_vec(p.f.at(t, n));
            let rhs = match self.scheme {
                TimeScheme::ImplicitEuler => (&u + &f_next * self.dt).component_mul(&self.weights),
                TimeScheme::CrankNicolson => {
                    let mut r = (&u + (&f_prev + &f_next) * (0.5 * self.dt)).component_mul(&self.weights);
                    r += &self.stiffness * &u * (0.5 * self.dt);
                    r
                }
            };
            u = self.chol.solve(&rhs);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parabolic state at step {k}")));
            }
            times.push(t);
            values.push(u.as_slice().to_vec());
            f_prev = f_next;
        }
        Ok(TimeSeries {
            grid: p.u0.grid.clone(),
            times,
            values,
        })
    }
}

/// `exp(t A_h)` through the eigen-decomposition of `W^{-1/2} S W^{-1/2}`.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    pub grid: Grid,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    sqrt_w: DVector<f64>,
}

impl HeatKernel {
    pub fn new(op: &DirichletOperator) -> Self {
        let eig = op.symmetric_eigen();
        Self {
            grid: op.grid.clone(),
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            sqrt_w: DVector::from_iterator(op.len(), op.grid.weights.iter().map(|w| w.sqrt())),
        }
    }

    /// `p^D_h(t, x_i, x_j)`, symmetric in `(i, j)`.
    pub fn density(&self, t: f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let e = self.eigenvalues.map(|l| (t * l).exp());
        let mut scaled = v.clone();
        for (mut col, ek) in scaled.column_iter_mut().zip(e.iter()) {
            col *= *ek;
        }
        let mut k = scaled * v.transpose();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                k[(i, j)] /= self.sqrt_w[i] * self.sqrt_w[j];
            }
        }
        k
    }

    /// `u(t) = exp(t A_h) u0`.
    pub fn propagate(&self, t: f64, u0: &[f64]) -> Vec<f64> {
        let y = DVector::from_iterator(u0.len(), u0.iter().zip(self.sqrt_w.iter()).map(|(u, s)| u * s));
        let c = self.eigenvectors.transpose() * y;
        let c = c.zip_map(&self.eigenvalues, |c, l| c * (t * l).exp());
        let z = &self.eigenvectors * c;
        z.iter().zip(self.sqrt_w.iter()).map(|(z, s)| z / s).collect()
    }

    /// `y ↦ p^D_h(t, x0, y)` at the nodes, interpolating linearly in `x0`.
    pub fn density_from(&self, t: f64, x0: f64) -> Vec<f64> {
        let nodes = &self.grid.nodes;
        let k = nodes.partition_point(|&x| x < x0).clamp(1, nodes.len() - 1);
        let s = ((x0 - nodes[k - 1]) / (nodes[k] - nodes[k - 1])).clamp(0.0, 1.0);
        let mut delta = vec![0.0; nodes.len()];
        delta[k - 1] = (1.0 - s) / self.grid.weights[k - 1];
        delta[k] = s / self.grid.weights[k];
        self.propagate(t, &delta)
    }
}

/// Compactly supported test function for [`weak_residual`].
pub struct TestFunction<'a> {
    pub phi: &'a (dyn Fn(f64) -> f64 + Sync),
    pub support: (f64, f64),
}

/// `max_k |⟨u(t_k),φ⟩ - ⟨u0,φ⟩ - ∫₀^{t_k} ⟨u,Δ^{α/2}φ⟩ + ⟨f,φ⟩ ds|` with
/// trapezoidal time integrals over the recorded times.
pub fn weak_residual(
    u: &TimeSeries,
    u0: &GridFunction,
    f: &Forcing,
    alpha: Alpha,
    test: &TestFunction<'_>,
) -> Result<f64> {
    use rayon::prelude::*;
    let grid = &u.grid;
    let (s0, s1) = test.support;
    if !(s0 < s1) || s0 <= grid.lo() || s1 >= grid.hi() {
        return Err(invalid("test", "support must lie strictly inside the domain"));
    }
    let layer = 0.05 * (grid.hi() - grid.lo());
    if s0 - grid.lo() < layer || grid.hi() - s1 < layer {
        log::warn!("test-function support reaches the boundary layer; quadrature degrades");
    }
    let lap_phi: Vec<f64> = grid
        .nodes
        .par_iter()
        .map(|&x| apply_pv_1d(test.phi, alpha, x, &[s0, s1]))
        .collect::<Result<_>>()?;
    let phi: Vec<f64> = grid.nodes.iter().map(|&x| (test.phi)(x)).collect();
    let pair = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&grid.weights).map(|((a, b), w)| a * b * w).sum()
    };
    let base = pair(&u0.values, &phi);
    let n = grid.len();
    let integrand = |k: usize| pair(&u.values[k], &lap_phi) + pair(&f.at(u.times[k], n), &phi);
    let mut worst: f64 = 0.0;
    let mut acc = 0.0;
    let mut prev = integrand(0);
    for k in 1..u.times.len() {
        let cur = integrand(k);
        acc += 0.5 * (u.times[k] - u.times[k - 1]) * (prev + cur);
        prev = cur;
        let r = (pair(&u.values[k], &phi) - base - acc).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::graded_grid;

    fn setup(n: usize, alpha: f64) -> (Domain, Grid, Alpha) {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let g = graded_grid(&d, n, 2.0, None).unwrap();
        (d, g, Alpha::new(alpha).unwrap())
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let (d, g, a) = setup(64, 1.0);
        let p = EllipticProblem {
            domain: d,
            alpha: a,
            lambda: 0.0,
            f: GridFunction::zeros(&g),
        };
        assert!(solve_elliptic(&p).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn getoor_solve() {
        let (d, g, a) = setup(256, 1.0);
        let p = EllipticProblem {
            domain: d,
            alpha: a,
            lambda: 0.0,
            f: GridFunction::from_fn(&g, |_| -1.0).unwrap(),
        };
        let u = solve_elliptic(&p).unwrap();
        let err = g
            .nodes
            .iter()
            .zip(&u.values)
            .map(|(x, u)| (u - (1.0 - x * x).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-2, "{err}");
    }

    #[test]
    fn green_symmetric_nonnegative_monotone() {
        let (d, g, a) = setup(64, 1.3);
        let g0 = green_function(&d, a, 0.0, &g).unwrap();
        let g1 = green_function(&d, a, 1.0, &g).unwrap();
        let asym = (&g0.values - g0.values.transpose()).abs().max();
        assert!(asym <= 1e-10);
        assert!(g0.values.iter().all(|v| *v >= 0.0));
        assert!(g0.values.iter().zip(g1.values.iter()).all(|(a, b)| b <= a));
    }

    #[test]
    fn lambda_zero_rejected_on_half_line() {
        let d = Domain::HalfLine;
        let g = graded_grid(&d, 32, 2.0, Some(8.0)).unwrap();
        let p = EllipticProblem {
            domain: d,
            alpha: Alpha::new(1.0).unwrap(),
            lambda: 0.0,
            f: GridFunction::zeros(&g),
        };
        assert!(solve_elliptic(&p).is_err());
    }

    #[test]
    fn parabolic_zero_stays_zero_and_schemes_agree() {
        let (d, g, a) = setup(64, 1.0);
        let p = ParabolicProblem {
            domain: d.clone(),
            alpha: a,
            t_final: 0.5,
            u0: GridFunction::zeros(&g),
            f: Forcing::zero(),
        };
        let s = solve_parabolic(&p, 10).unwrap();
        assert!(s.values.iter().flatten().all(|v| *v == 0.0));

        let u0 = GridFunction::from_fn(&g, |x| (1.0 - x * x).max(0.0)).unwrap();
        let p = ParabolicProblem { u0: u0.clone(), ..p };
        let ie = solve_parabolic_with(&p, 400, TimeScheme::ImplicitEuler).unwrap();
        let cn = solve_parabolic_with(&p, 400, TimeScheme::CrankNicolson).unwrap();
        let op = build_dirichlet_operator(&d, &g, a).unwrap();
        let exact = HeatKernel::new(&op).propagate(0.5, &u0.values);
        let e_ie = ie.last().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e_cn = cn.last().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(e_cn < e_ie && e_ie < 1e-2, "{e_ie} {e_cn}");
    }

    #[test]
    fn heat_kernel_symmetric_and_subprobability() {
        let (d, g, a) = setup(48, 0.8);
        let op = build_dirichlet_operator(&d, &g, a).unwrap();
        let hk = HeatKernel::new(&op);
        let k = hk.density(0.3);
        assert!((&k - k.transpose()).abs().max() < 1e-10 * k.abs().max());
        for i in 0..k.nrows() {
            let mass: f64 = (0..k.ncols()).map(|j| k[(i, j)] * g.weights[j]).sum();
            assert!(mass > 0.0 && mass < 1.0);
        }
    }

    #[test]
    fn weak_residual_of_zero() {
        let (_, g, a) = setup(32, 1.0);
        let s = TimeSeries {
            grid: g.clone(),
            times: vec![0.0, 0.5, 1.0],
            values: vec![vec![0.0; g.len()]; 3],
        };
        let phi = |x: f64| if x.abs() < 0.5 { (-1.0 / (1.0 - 4.0 * x * x)).exp() } else { 0.0 };
        let r = weak_residual(
            &s,
            &GridFunction::zeros(&g),
            &Forcing::zero(),
            a,
            &TestFunction { phi: &phi, support: (-0.5, 0.5) },
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }
}
