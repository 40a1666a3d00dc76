//! Canonical domains, the boundary distance, the dyadic-in-distance partition
//! `{ζ_n}` with its regularized distance `ψ = Σ e^{-n} ζ_n`, and boundary-graded
//! one-dimensional grids.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fraclap_op::GridFunction;
use crate::quad::{gauss_legendre, Integrator};

/// Default truncation radius for unbounded domains.
pub const DEFAULT_TRUNCATION: f64 = 64.0;

/// Smallest boundary distance the partition index range has to reach.
pub const RHO_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    /// `(0, ∞)`
    HalfLine,
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : x¹ > 0}` in `dim` dimensions
    HalfSpace { dim: usize },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(invalid("domain", format!("interval needs a < b, got ({a}, {b})")));
                }
            }
            Domain::HalfLine => {}
            Domain::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(invalid("domain", "ball radius must be positive"));
                }
                if !(1..=3).contains(&center.len()) {
                    return Err(invalid("domain", "ball dimension must be 1, 2 or 3"));
                }
            }
            Domain::HalfSpace { dim } => {
                if !(1..=3).contains(dim) {
                    return Err(invalid("domain", "half-space dimension must be 1, 2 or 3"));
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } | Domain::HalfLine => 1,
            Domain::Ball { center, .. } => center.len(),
            Domain::HalfSpace { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Domain::Interval { .. } | Domain::Ball { .. })
    }

    /// Largest boundary distance (the truncation radius for unbounded domains).
    pub fn inradius(&self, truncation: f64) -> f64 {
        match self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::Ball { radius, .. } => *radius,
            _ => truncation,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) > 0.0
    }

    /// `ρ(x)` inside the domain, `0` outside.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let r = match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::HalfLine | Domain::HalfSpace { .. } => x[0],
            Domain::Ball { center, radius } => {
                let s: f64 = x.iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum();
                radius - s.sqrt()
            }
        };
        r.max(0.0)
    }

    /// Distance for one-dimensional domains.
    #[inline]
    pub fn distance_1d(&self, x: f64) -> f64 {
        self.distance(&[x])
    }

    /// One-dimensional extent `(lo, hi)` and the points where `ρ` has a kink.
    fn segment(&self, truncation: Option<f64>) -> Result<(f64, f64)> {
        match self {
            Domain::Interval { a, b } => Ok((*a, *b)),
            Domain::Ball { center, radius } if center.len() == 1 => {
                Ok((center[0] - radius, center[0] + radius))
            }
            Domain::HalfLine | Domain::HalfSpace { dim: 1 } => match truncation {
                Some(r) if r > 0.0 => Ok((0.0, r)),
                _ => Err(invalid(
                    "truncation",
                    "unbounded domains need an explicit truncation radius",
                )),
            },
            _ => Err(Error::Unsupported(
                "graded grids exist only for one-dimensional domains".into(),
            )),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            Domain::Interval { a, b } => vec![0.5 * (a + b)],
            Domain::Ball { center, .. } if center.len() == 1 => vec![center[0]],
            _ => vec![],
        }
    }
}

/// `ρ(x)`; `0` for exterior points.
pub fn distance(domain: &Domain, x: &[f64]) -> f64 {
    domain.distance(x)
}

// Standard bump η(s) = exp(-1/(1-s²)) on (-1, 1), normalized to unit mass.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_deriv(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        -2.0 * s / (q * q) * bump(s)
    }
}

struct Mollifier {
    mass: f64,
    gl: (Vec<f64>, Vec<f64>),
}

fn mollifier() -> &'static Mollifier {
    static M: OnceLock<Mollifier> = OnceLock::new();
    M.get_or_init(|| {
        let gl = gauss_legendre(64);
        let mass = gl.0.iter().zip(&gl.1).map(|(x, w)| w * bump(*x)).sum();
        Mollifier { mass, gl }
    })
}

/// `∫_{-1}^{z} η / ∫η`: the smooth unit step.
fn smooth_step(z: f64) -> f64 {
    if z <= -1.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    let m = mollifier();
    let h = 0.5 * (z + 1.0);
    let s: f64 = m.gl.0.iter().zip(&m.gl.1).map(|(x, w)| w * bump(-1.0 + h * (x + 1.0))).sum();
    s * h / m.mass
}

/// Smooth partition `{ζ_n}` with `ζ_n` supported in `k1 e^{-n} < ρ < k2 e^{-n}`.
///
/// `ζ_n` is the indicator of `[k1 e^{-n} + w_n, k2 e^{-n} - w_n]` in the distance
/// variable, mollified at width `w_n = k1 e^{-n} / 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaPartition {
    pub domain: Domain,
    pub k1: f64,
    pub k2: f64,
    pub width_factor: f64,
    pub n_min: i64,
    pub n_max: i64,
}

/// Shell constants used when no partition is specified: `k1 = 1`, `k2 = e²`.
pub const DEFAULT_K1: f64 = 1.0;
pub const DEFAULT_K2: f64 = E * E;

/// Partition with the default shell constants, covering every distance that
/// occurs on `grid`.
pub fn default_partition(grid: &Grid) -> Result<ZetaPartition> {
    build_partition_truncated(
        &grid.domain,
        DEFAULT_K1,
        DEFAULT_K2,
        grid.truncation.unwrap_or(DEFAULT_TRUNCATION),
    )
}

pub fn build_partition(domain: &Domain, k1: f64, k2: f64) -> Result<ZetaPartition> {
    build_partition_truncated(domain, k1, k2, DEFAULT_TRUNCATION)
}

pub fn build_partition_truncated(domain: &Domain, k1: f64, k2: f64, truncation: f64) -> Result<ZetaPartition> {
    domain.validate()?;
    if !(k1 > 0.0 && k2.is_finite()) {
        return Err(invalid("k1", "must be positive"));
    }
    if !(k2 / k1 > E) {
        return Err(invalid("k2", format!("k2/k1 = {} must exceed e", k2 / k1)));
    }
    let rho_max = domain.inradius(truncation);
    Ok(ZetaPartition {
        domain: domain.clone(),
        k1,
        k2,
        width_factor: 0.25,
        n_min: (k1 / rho_max).ln().floor() as i64 - 1,
        n_max: (k2 / RHO_FLOOR).ln().ceil() as i64 + 1,
    })
}

impl ZetaPartition {
    fn shell(&self, n: i64) -> (f64, f64, f64) {
        let s = (-(n as f64)).exp();
        let lo = self.k1 * s;
        let hi = self.k2 * s;
        (lo, hi, self.width_factor * lo)
    }

    /// Indices whose support may contain distance `rho`.
    pub fn candidates(&self, rho: f64) -> std::ops::RangeInclusive<i64> {
        if rho <= 0.0 {
            return 1..=0;
        }
        let lo = ((self.k1 / rho).ln().floor() as i64).max(self.n_min);
        let hi = ((self.k2 / rho).ln().ceil() as i64).min(self.n_max);
        lo..=hi
    }

    /// `ζ_n` as a function of the distance.
    pub fn zeta(&self, n: i64, rho: f64) -> f64 {
        let (lo, hi, w) = self.shell(n);
        if rho <= lo || rho >= hi {
            return 0.0;
        }
        smooth_step((rho - lo - w) / w) - smooth_step((rho - hi + w) / w)
    }

    /// `[ζ_n, dζ_n/dρ, d²ζ_n/dρ²]`.
    pub fn zeta_derivatives(&self, n: i64, rho: f64) -> [f64; 3] {
        let (lo, hi, w) = self.shell(n);
        if rho <= lo || rho >= hi {
            return [0.0; 3];
        }
        let m = mollifier().mass;
        let za = (rho - lo - w) / w;
        let zb = (rho - hi + w) / w;
        [
            smooth_step(za) - smooth_step(zb),
            (bump(za) - bump(zb)) / (m * w),
            (bump_deriv(za) - bump_deriv(zb)) / (m * w * w),
        ]
    }

    pub fn covering_sum(&self, rho: f64) -> f64 {
        self.candidates(rho).map(|n| self.zeta(n, rho)).sum()
    }

    /// `ψ = Σ e^{-n} ζ_n` as a function of the distance.
    pub fn psi(&self, rho: f64) -> f64 {
        self.candidates(rho)
            .map(|n| (-(n as f64)).exp() * self.zeta(n, rho))
            .sum()
    }

    /// `[ψ, ψ', ψ'']` in the distance variable.
    pub fn psi_derivatives(&self, rho: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for n in self.candidates(rho) {
            let s = (-(n as f64)).exp();
            let z = self.zeta_derivatives(n, rho);
            for m in 0..3 {
                out[m] += s * z[m];
            }
        }
        out
    }

    pub fn covers(&self, rho: f64) -> bool {
        rho >= RHO_FLOOR && (self.k1 / rho).ln().floor() as i64 >= self.n_min
    }
}

/// Boundary-graded grid on a one-dimensional domain: cells with breakpoints
/// `ξ_0 < … < ξ_n`, nodes at cell midpoints, weights equal to cell lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub breakpoints: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub grading: f64,
    pub truncation: Option<f64>,
}

pub fn graded_grid(domain: &Domain, n_nodes: usize, grading: f64, truncation: Option<f64>) -> Result<Grid> {
    domain.validate()?;
    if n_nodes < 16 {
        return Err(invalid("n_nodes", format!("{n_nodes} < 16")));
    }
    if !(grading >= 1.0) {
        return Err(invalid("grading", format!("{grading} < 1")));
    }
    let (lo, hi) = domain.segment(truncation)?;
    let len = hi - lo;
    let two_sided = domain.is_bounded();
    let n = n_nodes;
    let breakpoints: Vec<f64> = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            if k == n {
                return hi;
            }
            if two_sided {
                if s <= 0.5 {
                    lo + 0.5 * len * (2.0 * s).powf(grading)
                } else {
                    hi - 0.5 * len * (2.0 - 2.0 * s).powf(grading)
                }
            } else {
                lo + len * s.powf(grading)
            }
        })
        .collect();
    let nodes = breakpoints.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let weights = breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(Grid {
        domain: domain.clone(),
        breakpoints,
        nodes,
        weights,
        grading,
        truncation: if two_sided { None } else { truncation },
    })
}

fn power_antiderivative(r: f64, beta: f64) -> f64 {
    if (beta + 1.0).abs() < 1e-14 {
        r.ln()
    } else {
        r.powf(beta + 1.0) / (beta + 1.0)
    }
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().expect("grid has breakpoints")
    }

    pub fn rho(&self) -> Vec<f64> {
        self.nodes.iter().map(|&x| self.domain.distance_1d(x)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫_{cell i} ρ^β dx`, exact for every cell not touching the boundary.
    ///
    /// A boundary cell with `β ≤ -1` has no finite integral; its midpoint value
    /// `w_i ρ(x_i)^β` is returned instead, so divergence shows up as growth
    /// under refinement.
    pub fn cell_power_integral(&self, i: usize, beta: f64) -> f64 {
        let x0 = self.breakpoints[i];
        let x1 = self.breakpoints[i + 1];
        let mut pts = vec![x0];
        pts.extend(self.domain.kinks().into_iter().filter(|&k| k > x0 && k < x1));
        pts.push(x1);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let r0 = self.domain.distance_1d(w[0]);
            let r1 = self.domain.distance_1d(w[1]);
            if r0.min(r1) <= 0.0 && beta <= -1.0 {
                let mid = 0.5 * (w[0] + w[1]);
                total += (w[1] - w[0]) * self.domain.distance_1d(mid).powf(beta);
            } else if beta == 0.0 {
                total += w[1] - w[0];
            } else {
                let (rl, rh) = if r0 < r1 { (r0, r1) } else { (r1, r0) };
                let lower = if rl <= 0.0 { 0.0 } else { power_antiderivative(rl, beta) };
                total += power_antiderivative(rh, beta) - lower;
            }
        }
        total
    }

    /// Product-integration weights `∫_{cell i} ρ^β`.
    pub fn power_weights(&self, beta: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.cell_power_integral(i, beta)).collect()
    }

    /// `Σ_i v_i ∫_{cell i} ρ^β`.
    pub fn integrate_weighted(&self, values: &[f64], beta: f64) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.cell_power_integral(i, beta))
            .sum()
    }

    /// Plain composite midpoint rule `Σ w_i f(x_i)`.
    pub fn integrate_nodes(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// CSV with columns `node,weight,rho,psi,zeta_sum`.
    pub fn to_csv(&self, partition: &ZetaPartition) -> String {
        let mut s = String::from("node,weight,rho,psi,zeta_sum\n");
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let r = self.domain.distance_1d(*x);
            let _ = writeln!(
                s,
                "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
                x,
                w,
                r,
                partition.psi(r),
                partition.covering_sum(r)
            );
        }
        s
    }
}

/// `ψ` sampled on `grid`.
pub fn regularized_distance(domain: &Domain, partition: &ZetaPartition, grid: &Grid) -> Result<GridFunction> {
    if &partition.domain != domain || &grid.domain != domain {
        return Err(invalid("partition", "partition, grid and domain disagree"));
    }
    let rho = grid.rho();
    if let Some(bad) = rho.iter().find(|&&r| !partition.covers(r)) {
        return Err(invalid(
            "partition",
            format!("index range [{}, {}] does not cover ρ = {bad:e}", partition.n_min, partition.n_max),
        ));
    }
    GridFunction::new(grid.clone(), rho.iter().map(|&r| partition.psi(r)).collect())
}

/// Average of `d_x^λ` over `B_r(x0)`, exterior points contributing `0^λ`
/// (`1` when `λ = 0`, nothing when `λ > 0`).
pub fn interior_boundary_integral(domain: &Domain, lambda: f64, x0: &[f64], r: f64) -> Result<f64> {
    domain.validate()?;
    if !(lambda > -1.0) {
        return Err(invalid("lambda", format!("{lambda} <= -1 makes the average diverge")));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    if x0.len() != domain.dimension() {
        return Err(invalid("x0", "dimension mismatch"));
    }
    let weight = |d: f64| {
        if d > 0.0 {
            d.powf(lambda)
        } else if lambda == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    let q = Integrator::new(1e-13, 1e-10);
    match domain.dimension() {
        1 => {
            let mut brk = domain.kinks();
            brk.extend(match domain {
                Domain::Interval { a, b } => vec![*a, *b],
                Domain::Ball { center, radius } => vec![center[0] - radius, center[0] + radius],
                _ => vec![0.0],
            });
            let v = q.integrate(|x| weight(domain.distance_1d(x)), x0[0] - r, x0[0] + r, &brk)?;
            Ok(v / (2.0 * r))
        }
        2 => {
            match domain {
                Domain::HalfSpace { .. } => {
                    let v = q.integrate(
                        |s| 2.0 * (r * r - s * s).max(0.0).sqrt() * weight((x0[0] + s).max(0.0)),
                        -r,
                        r,
                        &[-x0[0]],
                    )?;
                    Ok(v / (PI * r * r))
                }
                Domain::Ball { center, radius } => {
                    if lambda == 0.0 {
                        return Ok(1.0);
                    }
                    // integrate over circles |y - c| = s; the part of each
                    // circle inside B_r(x0) has length s·2·acos(..)
                    let dist0 = ((x0[0] - center[0]).powi(2) + (x0[1] - center[1]).powi(2)).sqrt();
                    let arc = |s: f64| {
                        if dist0 == 0.0 {
                            return if s < r { 2.0 * PI * s } else { 0.0 };
                        }
                        let cosine = (s * s + dist0 * dist0 - r * r) / (2.0 * s * dist0);
                        2.0 * s * cosine.clamp(-1.0, 1.0).acos()
                    };
                    let lo = (dist0 - r).max(0.0);
                    let hi = (dist0 + r).min(*radius);
                    if hi <= lo {
                        return Ok(0.0);
                    }
                    // d = radius - s = v^m with m(1 + λ) = 1 turns d^λ dd into m dv
                    let m = 1.0 / (1.0 + lambda);
                    let to_v = |s: f64| (radius - s).powf(1.0 + lambda);
                    let brk: Vec<f64> = [r - dist0]
                        .into_iter()
                        .filter(|&v| v > lo && v < hi)
                        .map(to_v)
                        .collect();
                    let v = q.integrate(|v| m * arc(radius - v.powf(m)), to_v(hi), to_v(lo), &brk)?;
                    Ok(v / (PI * r * r))
                }
                _ => Err(Error::Unsupported("two-dimensional domain kind".into())),
            }
        }
        _ => Err(Error::Unsupported(
            "boundary averages are implemented for d <= 2".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(unit().distance(&[0.0]), 1.0);
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!((b.distance(&[0.6, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(Domain::HalfLine.distance(&[-3.0]), 0.0);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(vec![0.0], 0.0).is_err());
        assert!(graded_grid(&Domain::HalfLine, 64, 2.0, None).is_err());
        assert!(graded_grid(&unit(), 8, 2.0, None).is_err());
        assert!(graded_grid(&unit(), 64, 0.5, None).is_err());
    }

    #[test]
    fn partition_examples() {
        let p = build_partition(&unit(), 1.0, E * E).unwrap();
        assert_eq!(p.n_min, -1);
        assert!(build_partition(&unit(), 1.0, E).is_err());
        // support: ζ_n vanishes once ρ ≥ k2 e^{-n}
        for n in 0..6 {
            let edge = p.k2 * (-(n as f64)).exp();
            assert_eq!(p.zeta(n, edge), 0.0);
            assert_eq!(p.zeta(n, edge * 1.01), 0.0);
            assert_eq!(p.zeta(n, p.k1 * (-(n as f64)).exp()), 0.0);
        }
        let psi0 = p.psi(1.0);
        assert!((1.0 / 3.0..=3.0).contains(&psi0), "{psi0}");
    }

    #[test]
    fn covering_sum_bounded_below() {
        let p = build_partition(&unit(), 1.0, E * E).unwrap();
        let min = (1..2000)
            .map(|k| 10f64.powf(-12.0 * k as f64 / 2000.0))
            .map(|r| p.covering_sum(r))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.5, "{min}");
    }

    #[test]
    fn grid_weights_sum() {
        let g = graded_grid(&unit(), 100, 2.0, None).unwrap();
        assert!((g.total_weight() - 2.0).abs() < 1e-12);
        let h = graded_grid(&Domain::HalfLine, 100, 2.0, Some(DEFAULT_TRUNCATION)).unwrap();
        assert!((h.total_weight() - DEFAULT_TRUNCATION).abs() < 1e-10);
    }

    #[test]
    fn power_weights_exact() {
        let g = graded_grid(&unit(), 4096, 2.0, None).unwrap();
        let ones = vec![1.0; g.len()];
        assert!((g.integrate_weighted(&ones, 0.0) - 2.0).abs() < 1e-12);
        assert!((g.integrate_weighted(&ones, 1.0) - 1.0).abs() < 1e-12);
        assert!((g.integrate_weighted(&ones, -0.5) - 4.0).abs() < 1e-12);
        for &beta in &[-0.89, -0.3, 0.7, 2.0] {
            let exact = 2.0 / (beta + 1.0);
            let v = g.integrate_weighted(&ones, beta);
            assert!(((v - exact) / exact).abs() < 1e-4, "{beta}");
        }
    }

    #[test]
    fn boundary_average_examples() {
        let v = interior_boundary_integral(&unit(), 0.0, &[1.0], 0.3).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let r = 0.7;
        let v = interior_boundary_integral(&Domain::HalfLine, 1.0, &[0.0], r).unwrap();
        assert!((v / r - 0.25).abs() < 1e-10);
        assert!(interior_boundary_integral(&unit(), -1.0, &[1.0], 0.1).is_err());
    }

    #[test]
    fn boundary_average_ball_scales() {
        let b = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let lam = -0.5;
        let v1 = interior_boundary_integral(&b, lam, &[1.0, 0.0], 0.1).unwrap() / 0.1f64.powf(lam);
        let v2 = interior_boundary_integral(&b, lam, &[1.0, 0.0], 0.01).unwrap() / 0.01f64.powf(lam);
        assert!((v1 / v2 - 1.0).abs() < 0.2, "{v1} {v2}");
    }
}
