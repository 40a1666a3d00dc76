//! Weighted norms on boundary-graded grids.
//!
//! All norms act on `v = ψ^δ u` (δ = `WeightSpec::psi_power`) and integrate
//! against `ρ^{θ-d}` by product integration: node values times the exact
//! integral of the weight over each cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{default_partition, Domain, Grid, DEFAULT_TRUNCATION};
use crate::error::{invalid, Error, Result};
use crate::fraclap_op::GridFunction;

/// Growth between successive refinement levels above which a norm is
/// reported as divergent.
pub const DIVERGENCE_GROWTH: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub p: f64,
    pub theta: f64,
    pub psi_power: f64,
}

impl WeightSpec {
    pub fn new(p: f64, theta: f64, psi_power: f64) -> Result<Self> {
        let s = Self { p, theta, psi_power };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p", format!("{} must exceed 1", self.p)));
        }
        if !self.theta.is_finite() || !self.psi_power.is_finite() {
            return Err(invalid("theta", "weights must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub delta: f64,
    pub weight_power: f64,
}

impl HolderSpec {
    pub fn new(delta: f64, weight_power: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid("delta", format!("{delta} not in (0, 1]")));
        }
        if !weight_power.is_finite() {
            return Err(invalid("weight_power", "must be finite"));
        }
        Ok(Self { delta, weight_power })
    }
}

/// `ψ` at the nodes of `grid`.
pub fn psi_on_grid(grid: &Grid) -> Result<Vec<f64>> {
    let part = default_partition(grid)?;
    Ok(grid.rho().iter().map(|&r| part.psi(r)).collect())
}

/// Which distance multiplies `u` in `dist^δ u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DistanceWeight {
    /// The regularized distance `ψ`.
    #[default]
    Psi,
    /// The raw distance `ρ`.
    Rho,
}

fn weighted_values(u: &GridFunction, power: f64, kind: DistanceWeight) -> Result<Vec<f64>> {
    if power == 0.0 {
        return Ok(u.values.clone());
    }
    let dist = match kind {
        DistanceWeight::Psi => psi_on_grid(&u.grid)?,
        DistanceWeight::Rho => u.grid.rho(),
    };
    Ok(u.values.iter().zip(&dist).map(|(v, s)| v * s.powf(power)).collect())
}

fn lp_of_values(grid: &Grid, v: &[f64], spec: &WeightSpec) -> f64 {
    let beta = spec.theta - 1.0;
    let sum: f64 = v
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if *v == 0.0 {
                0.0
            } else {
                v.abs().powf(spec.p) * grid.cell_power_integral(i, beta)
            }
        })
        .sum();
    sum.powf(1.0 / spec.p)
}

/// `‖ψ^δ u‖_{L_{p,θ}} = (∫ |ψ^δ u|^p ρ^{θ-d})^{1/p}`.
pub fn weighted_lp_norm(u: &GridFunction, spec: &WeightSpec) -> Result<f64> {
    weighted_lp_norm_with(u, spec, DistanceWeight::Psi)
}

/// [`weighted_lp_norm`] with `ψ^δ` or `ρ^δ` in front of `u`.
pub fn weighted_lp_norm_with(u: &GridFunction, spec: &WeightSpec, kind: DistanceWeight) -> Result<f64> {
    spec.validate()?;
    let v = weighted_values(u, spec.psi_power, kind)?;
    Ok(lp_of_values(&u.grid, &v, spec))
}

/// Three-point Lagrange first and second derivatives at `t`.
fn lagrange3(xs: [f64; 3], ys: [f64; 3], t: f64) -> (f64, f64) {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let first = y0 * ((t - x1) + (t - x2)) / d0 + y1 * ((t - x0) + (t - x2)) / d1 + y2 * ((t - x0) + (t - x1)) / d2;
    let second = 2.0 * (y0 / d0 + y1 / d1 + y2 / d2);
    (first, second)
}

/// `(D v, D² v)` at the nodes: centered three-point stencils inside, one-sided
/// at the two end nodes.
pub fn grid_derivatives(grid: &Grid, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = &grid.nodes;
    let n = x.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let c = i.clamp(1, n - 2);
        let (a, b) = lagrange3([x[c - 1], x[c], x[c + 1]], [v[c - 1], v[c], v[c + 1]], x[i]);
        d1[i] = a;
        d2[i] = b;
    }
    (d1, d2)
}

/// `Σ_{k ≤ n} ‖ρ^k D^k (ψ^δ u)‖_{L_{p,θ}}`.
pub fn weighted_sobolev_norm(u: &GridFunction, n: usize, spec: &WeightSpec) -> Result<f64> {
    spec.validate()?;
    if n > 2 {
        return Err(invalid("n", format!("derivative order {n} > 2")));
    }
    let v = weighted_values(u, spec.psi_power, DistanceWeight::Psi)?;
    let rho = u.grid.rho();
    let mut total = lp_of_values(&u.grid, &v, spec);
    if n >= 1 {
        let (d1, d2) = grid_derivatives(&u.grid, &v);
        let t1: Vec<f64> = d1.iter().zip(&rho).map(|(d, r)| r * d).collect();
        total += lp_of_values(&u.grid, &t1, spec);
        if n == 2 {
            let t2: Vec<f64> = d2.iter().zip(&rho).map(|(d, r)| r * r * d).collect();
            total += lp_of_values(&u.grid, &t2, spec);
        }
    }
    Ok(total)
}

/// `(∫∫ ρ_{x,y}^{θ-d+γp} |v(x)-v(y)|^p / |x-y|^{d+γp})^{1/p}` with
/// `ρ_{x,y} = ρ(x) ∧ ρ(y)`, over distinct node pairs.
pub fn besov_seminorm(u: &GridFunction, gamma: f64, spec: &WeightSpec) -> Result<f64> {
    spec.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} not in (0, 1)")));
    }
    let wexp = spec.theta - 1.0 + gamma * spec.p;
    if !(wexp > -1.0) {
        return Err(invalid(
            "theta",
            format!("θ - d + γp = {wexp} must exceed -1"),
        ));
    }
    let v = weighted_values(u, spec.psi_power, DistanceWeight::Psi)?;
    let x = &u.grid.nodes;
    let w = &u.grid.weights;
    let rho = u.grid.rho();
    let qexp = 1.0 + gamma * spec.p;
    let rows: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..x.len() {
                if j == i {
                    continue;
                }
                let dv = (v[i] - v[j]).abs();
                if dv == 0.0 {
                    continue;
                }
                s += w[j] * rho[i].min(rho[j]).powf(wexp) * dv.powf(spec.p) / (x[i] - x[j]).abs().powf(qexp);
            }
            w[i] * s
        })
        .collect();
    Ok(rows.iter().sum::<f64>().powf(1.0 / spec.p))
}

fn diameter(grid: &Grid) -> f64 {
    match grid.domain {
        Domain::Interval { .. } | Domain::Ball { .. } => grid.hi() - grid.lo(),
        _ => grid.truncation.unwrap_or(DEFAULT_TRUNCATION),
    }
}

/// Sup term and seminorm of the weighted Hölder norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParts {
    /// `sup |ψ^a u|`.
    pub sup: f64,
    /// `sup ψ_{x,y}^{a+δ} |u(x)-u(y)| / |x-y|^δ`, `ψ_{x,y} = ψ(x) ∧ ψ(y)`.
    pub seminorm: f64,
}

impl HolderParts {
    pub fn total(&self) -> f64 {
        self.sup + self.seminorm
    }
}

/// Both parts of the weighted Hölder norm; pairs restricted to `|x-y| ≤ diam/2`.
pub fn weighted_holder_parts(u: &GridFunction, spec: &HolderSpec) -> Result<HolderParts> {
    HolderSpec::new(spec.delta, spec.weight_power)?;
    let psi = psi_on_grid(&u.grid)?;
    let x = &u.grid.nodes;
    let a = spec.weight_power;
    let sup = u
        .values
        .iter()
        .zip(&psi)
        .map(|(v, s)| (v * s.powf(a)).abs())
        .fold(0.0, f64::max);
    let reach = 0.5 * diameter(&u.grid);
    let e = a + spec.delta;
    let seminorm = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut m: f64 = 0.0;
            for j in (i + 1)..x.len() {
                let h = x[j] - x[i];
                if h > reach {
                    break;
                }
                let dv = (u.values[i] - u.values[j]).abs();
                if dv > 0.0 {
                    m = m.max(psi[i].min(psi[j]).powf(e) * dv / h.powf(spec.delta));
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    Ok(HolderParts { sup, seminorm })
}

/// `sup|ψ^a u| + sup ψ_{x,y}^{a+δ} |u(x)-u(y)| / |x-y|^δ`.
pub fn weighted_holder_norm(u: &GridFunction, spec: &HolderSpec) -> Result<f64> {
    Ok(weighted_holder_parts(u, spec)?.total())
}

/// Least-squares slope of `log|u|` against `log ρ` over nodes with
/// `ρ ∈ window`, fitted per boundary component; the smallest slope wins.
pub fn fit_boundary_decay(u: &GridFunction, window: (f64, f64)) -> Result<f64> {
    let (r0, r1) = window;
    let grid = &u.grid;
    let inradius = grid.domain.inradius(grid.truncation.unwrap_or(DEFAULT_TRUNCATION));
    if !(r0 > 0.0 && r0 < r1 && r1 <= 0.5 * inradius) {
        return Err(invalid(
            "window",
            format!("({r0}, {r1}) must lie inside (0, {})", 0.5 * inradius),
        ));
    }
    let rho = grid.rho();
    let mid = 0.5 * (grid.lo() + grid.hi());
    let two_sided = grid.domain.is_bounded();
    let mut best = f64::INFINITY;
    for side in 0..(if two_sided { 2 } else { 1 }) {
        let pts: Vec<(f64, f64)> = grid
            .nodes
            .iter()
            .zip(&rho)
            .zip(&u.values)
            .filter(|((x, _), _)| !two_sided || ((**x < mid) == (side == 0)))
            .filter(|((_, r), v)| **r >= r0 && **r <= r1 && v.abs() > 0.0)
            .map(|((_, r), v)| (r.ln(), v.abs().ln()))
            .collect();
        if pts.len() < 8 {
            return Err(invalid(
                "window",
                format!("only {} nodes with nonzero values in the window", pts.len()),
            ));
        }
        best = best.min(ls_slope(&pts));
    }
    Ok(best)
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Local power of the L_{p,θ} integrand `|ρ^δ u|^p ρ^{θ-d}` at the boundary,
/// fitted on the nodes with `ρ` below a hundredth of the inradius. An exponent
/// `≤ -1` means the integral cannot converge however fine the grid. `ρ` stands
/// in for `ψ` here: the two are comparable, so integrability is the same, and
/// `ρ` has no log-periodic wobble to bias the fit.
pub fn integrand_boundary_exponent(u: &GridFunction, spec: &WeightSpec) -> Result<Option<f64>> {
    spec.validate()?;
    let grid = &u.grid;
    let inradius = grid.domain.inradius(grid.truncation.unwrap_or(DEFAULT_TRUNCATION));
    let cut = 0.01 * inradius;
    let rho = grid.rho();
    let beta = spec.theta - 1.0 + spec.p * spec.psi_power;
    let mid = 0.5 * (grid.lo() + grid.hi());
    let two_sided = grid.domain.is_bounded();
    let mut worst: Option<f64> = None;
    for side in 0..(if two_sided { 2 } else { 1 }) {
        let pts: Vec<(f64, f64)> = grid
            .nodes
            .iter()
            .zip(&rho)
            .zip(&u.values)
            .filter(|((x, _), _)| !two_sided || ((**x < mid) == (side == 0)))
            .filter(|((_, r), v)| **r > 0.0 && **r <= cut && v.abs() > 0.0)
            .map(|((_, r), v)| (r.ln(), spec.p * v.abs().ln() + beta * r.ln()))
            .collect();
        if pts.len() >= 8 {
            let s = ls_slope(&pts);
            worst = Some(worst.map_or(s, |w: f64| w.min(s)));
        }
    }
    Ok(worst)
}

/// Values of one norm along a refinement ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub values: Vec<f64>,
    /// `values[k+1] / values[k]`.
    pub ratios: Vec<f64>,
    pub boundary_exponent: Option<f64>,
    pub diverging: bool,
}

impl Refinement {
    /// `diverging` is set by growth above [`DIVERGENCE_GROWTH`] between two
    /// successive levels, or by a non-integrable boundary exponent.
    pub fn from_values(values: Vec<f64>, boundary_exponent: Option<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("norm value along the refinement ladder".into()));
        }
        let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
        let grows = ratios.iter().any(|r| *r > 1.0 + DIVERGENCE_GROWTH);
        let nonintegrable = boundary_exponent.is_some_and(|e| e <= -1.0);
        Ok(Self {
            values,
            ratios,
            boundary_exponent,
            diverging: grows || nonintegrable,
        })
    }

    /// Largest relative change between successive levels.
    pub fn max_drift(&self) -> f64 {
        self.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Finest over coarsest value.
    pub fn total_growth(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => 1.0,
        }
    }
}

/// Evaluates `‖ψ^δ u_n‖_{L_{p,θ}}` along the ladder, `u_n` produced by `make`.
pub fn lp_refinement(
    ladder: &[usize],
    spec: &WeightSpec,
    kind: DistanceWeight,
    make: impl Fn(usize) -> Result<GridFunction>,
) -> Result<Refinement> {
    let mut values = Vec::with_capacity(ladder.len());
    let mut exponent = None;
    for &n in ladder {
        let u = make(n)?;
        values.push(weighted_lp_norm_with(&u, spec, kind)?);
        exponent = integrand_boundary_exponent(&u, spec)?;
    }
    Refinement::from_values(values, exponent)
}

/// Norm table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub norm_kind: String,
    pub p: f64,
    pub theta: f64,
    pub psi_power: f64,
    pub value: f64,
    pub refinement_ratio: f64,
    pub divergence_flag: bool,
}

pub const NORM_CSV_HEADER: &str = "norm_kind,p,theta,psi_power,value,refinement_ratio,divergence_flag";

impl NormRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.12e},{:.12e},{}",
            self.norm_kind, self.p, self.theta, self.psi_power, self.value, self.refinement_ratio, self.divergence_flag
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::graded_grid;

    fn unit_grid(n: usize) -> Grid {
        graded_grid(&Domain::interval(-1.0, 1.0).unwrap(), n, 2.0, None).unwrap()
    }

    fn sqrt_rho(g: &Grid) -> GridFunction {
        GridFunction::from_fn(g, |x| (1.0 - x.abs()).sqrt()).unwrap()
    }

    #[test]
    fn lp_closed_forms() {
        let g = unit_grid(256);
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        let s = WeightSpec::new(2.0, 1.0, 0.0).unwrap();
        assert!((weighted_lp_norm(&one, &s).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((weighted_lp_norm(&sqrt_rho(&g), &s).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn sharp_theta_boundary() {
        let make = |n: usize| Ok(sqrt_rho(&unit_grid(n)));
        let ladder = [64, 128, 256, 512];
        // ∫ρ^{-0.98} is finite but spreads its mass over ~50 e-folds of ρ, so
        // only the boundary exponent can tell it apart from the divergent case
        let fin = lp_refinement(&ladder, &WeightSpec::new(2.0, 0.02, -0.5).unwrap(), DistanceWeight::Psi, make).unwrap();
        assert!((fin.boundary_exponent.unwrap() + 0.98).abs() < 1e-6, "{fin:?}");
        assert!(fin.values[3] > 5.0);
        let div = lp_refinement(&ladder, &WeightSpec::new(2.0, -0.02, -0.5).unwrap(), DistanceWeight::Psi, make).unwrap();
        assert!(div.diverging, "{div:?}");
        assert!(div.boundary_exponent.unwrap() <= -1.0);
        let rho = lp_refinement(&ladder, &WeightSpec::new(2.0, 1.5, -0.5).unwrap(), DistanceWeight::Rho, make).unwrap();
        assert!(!rho.diverging && rho.max_drift() < 1e-3, "{rho:?}");
    }

    #[test]
    fn sobolev_of_constant_is_lp() {
        let g = unit_grid(128);
        let one = GridFunction::from_fn(&g, |_| 3.0).unwrap();
        let s = WeightSpec::new(2.5, 1.3, 0.0).unwrap();
        let lp = weighted_lp_norm(&one, &s).unwrap();
        for n in 0..=2 {
            assert!((weighted_sobolev_norm(&one, n, &s).unwrap() - lp).abs() < 1e-9 * lp);
        }
    }

    #[test]
    fn derivative_stencils_exact_on_quadratics() {
        let g = unit_grid(64);
        let v: Vec<f64> = g.nodes.iter().map(|x| 2.0 * x * x - x + 0.5).collect();
        let (d1, d2) = grid_derivatives(&g, &v);
        for (i, x) in g.nodes.iter().enumerate() {
            assert!((d1[i] - (4.0 * x - 1.0)).abs() < 1e-8);
            assert!((d2[i] - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn besov_constant_and_scaling() {
        let g = unit_grid(128);
        let s = WeightSpec::new(2.0, 1.0, 0.0).unwrap();
        let c = GridFunction::from_fn(&g, |_| 2.0).unwrap();
        assert_eq!(besov_seminorm(&c, 0.4, &s).unwrap(), 0.0);
        let u = sqrt_rho(&g);
        let a = besov_seminorm(&u, 0.4, &s).unwrap();
        let b = besov_seminorm(&u.scaled(-3.0), 0.4, &s).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
        assert!(besov_seminorm(&u, 0.4, &WeightSpec::new(2.0, -0.9, 0.0).unwrap()).is_err());
    }

    #[test]
    fn holder_examples() {
        let g = unit_grid(128);
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        let v = weighted_holder_norm(&one, &HolderSpec::new(0.5, 0.0).unwrap()).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let psi = psi_on_grid(&g).unwrap();
        let rho = g.rho();
        let (lo, hi) = psi
            .iter()
            .zip(&rho)
            .map(|(p, r)| (r / p).sqrt())
            .fold((f64::INFINITY, 0.0f64), |(a, b), q| (a.min(q), b.max(q)));
        let parts = weighted_holder_parts(&sqrt_rho(&g), &HolderSpec::new(0.5, -0.5).unwrap()).unwrap();
        assert!(parts.sup >= lo - 1e-12 && parts.sup <= hi + 1e-12, "{parts:?} [{lo}, {hi}]");
        assert!(parts.seminorm.is_finite());
    }

    #[test]
    fn decay_fits() {
        let g = unit_grid(512);
        let u = sqrt_rho(&g);
        assert!((fit_boundary_decay(&u, (1e-4, 1e-1)).unwrap() - 0.5).abs() < 1e-3);
        let v = GridFunction::from_fn(&g, |x| (1.0 - x * x).sqrt()).unwrap();
        assert!((fit_boundary_decay(&v, (1e-3, 1e-1)).unwrap() - 0.5).abs() < 0.02);
        assert!(fit_boundary_decay(&v, (0.4, 0.9)).is_err());
        assert!(fit_boundary_decay(&v, (1e-3, 1.1e-3)).is_err());
    }
}
