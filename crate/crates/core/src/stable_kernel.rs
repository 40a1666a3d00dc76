//! Transition density of the rotationally symmetric α-stable process in
//! dimensions 1–3.
//!
//! The normalized profile `P(r) = p_d(1, r)` is obtained by Fourier inversion of
//! `exp(-|ξ|^α)`:
//!
//! * d = 1: `(1/π) ∫₀^∞ cos(r s) e^{-s^α} ds`
//! * d = 2: `(1/2π) ∫₀^∞ s J₀(r s) e^{-s^α} ds`
//! * d = 3: `(1/2π²) ∫₀^∞ s² sinc(r s) e^{-s^α} ds`
//!
//! integrated panel by panel with panels no wider than half an oscillation.
//! Beyond [`TAIL_CROSSOVER`] the multi-term tail expansion
//! `π^{-(d/2+1)} Σ_k (-1)^{k+1}/k! Γ(αk/2+1) Γ((αk+d)/2) sin(παk/2) 2^{αk} r^{-αk-d}`
//! is summed instead. Every other time follows from
//! `p_d(t, x) = t^{-d/α} P(t^{-1/α}|x|)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use crate::error::{invalid, Error, Result};
use crate::quad::{gk15, Integrator};

/// Normalized radius beyond which the tail expansion replaces quadrature.
pub const TAIL_CROSSOVER: f64 = 10.0;

/// Stability index, strictly inside (0, 2).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 2.0) {
            return Err(invalid("alpha", format!("{value} is not in (0, 2)")));
        }
        Ok(Alpha(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Alpha::new(v)
    }
}

pub(crate) fn check_dimension(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(invalid("dimension", format!("{dim} is not in {{1, 2, 3}}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelQuery {
    pub alpha: Alpha,
    pub dimension: usize,
    pub t: f64,
    pub x: Vec<f64>,
}

impl KernelQuery {
    pub fn new(alpha: Alpha, t: f64, x: Vec<f64>) -> Result<Self> {
        let q = Self {
            alpha,
            dimension: x.len(),
            t,
            x,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension(self.dimension)?;
        if self.x.len() != self.dimension {
            return Err(invalid("x", "length does not match dimension"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(invalid("t", format!("{} must be positive", self.t)));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        norm(&self.x)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn radial_factor(dim: usize, r: f64, s: f64) -> f64 {
    match dim {
        1 => (r * s).cos() / PI,
        2 => s * libm::j0(r * s) / (2.0 * PI),
        _ => {
            let z = r * s;
            let sinc = if z.abs() < 1e-6 { 1.0 - z * z / 6.0 } else { z.sin() / z };
            s * s * sinc / (2.0 * PI * PI)
        }
    }
}

/// Fourier-inversion quadrature of `p_d(t, r)` with the time left inside the
/// integrand (`e^{-t s^α}`), independent of the scaling relation.
pub fn fourier_density(alpha: Alpha, dim: usize, t: f64, r: f64) -> Result<f64> {
    check_dimension(dim)?;
    if !(t > 0.0) {
        return Err(invalid("t", format!("{t} must be positive")));
    }
    let a = alpha.value();
    let scale = t.powf(-1.0 / a);
    // truncation: s^{d+1} e^{-t s^a} below 1e-19 relative to the profile scale
    let mut s_max = scale;
    while (dim as f64 + 1.0) * (s_max / scale).ln() - t * s_max.powf(a) > -44.0 {
        s_max *= 1.25;
    }
    let osc = if r > 0.0 { PI / r } else { f64::INFINITY };
    let amp = scale.powi(dim as i32);
    let q = Integrator {
        abs_tol: 1e-14 * amp,
        rel_tol: 1e-13,
        max_panels: 200,
    };
    let f = |s: f64| radial_factor(dim, r, s) * (-t * s.powf(a)).exp();
    let mut total = 0.0;
    let mut s = 0.0;
    let mut first = true;
    while s < s_max {
        let decay = 0.5 * s.max(scale * 0.05).powf(1.0 - a) / (t * a);
        let w = osc.min(decay.max(0.25 * scale));
        let b = (s + w).min(s_max);
        if first {
            // s^α endpoint behaviour needs adaptive refinement
            total += q.integrate(f, s, b, &[])?;
            first = false;
        } else {
            let (v, e) = gk15(&f, s, b);
            if e > q.abs_tol {
                total += q.integrate(f, s, b, &[])?;
            } else {
                total += v;
            }
        }
        s = b;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("density quadrature at t={t}, r={r}")));
    }
    Ok(total)
}

/// Smallest radius at which [`contour_profile`] is used.
const CONTOUR_MIN_RADIUS: f64 = 0.5;

/// `p_d(1, r)` for `α ≤ 0.9` and `d ∈ {1, 3}` after rotating the Fourier contour
/// onto the imaginary axis, which removes the oscillation in `r`:
///
/// `p_1(r) = π⁻¹ ∫₀^∞ e^{-ru} e^{-u^α cos(απ/2)} sin(u^α sin(απ/2)) du`,
/// and `p_3(r) = -p_1'(r) / (2πr)`. The integral is taken in `w = u^α`.
/// Returns `None` where the representation does not apply.
pub fn contour_profile(alpha: Alpha, dim: usize, r: f64) -> Option<f64> {
    let a = alpha.value();
    if a > 0.9 || !(dim == 1 || dim == 3) || r < CONTOUR_MIN_RADIUS {
        return None;
    }
    let (c, s) = ((PI * a / 2.0).cos(), (PI * a / 2.0).sin());
    let power = if dim == 1 { 1.0 / a - 1.0 } else { 2.0 / a - 1.0 };
    let f = |w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        let u = w.powf(1.0 / a);
        (-r * u - c * w).exp() * (s * w).sin() * w.powf(power) / a
    };
    // e^{-cw} w^power below 1e-20 of its peak
    let mut w_max = power / c + 1.0;
    while power * w_max.ln() - c * w_max > -46.0 + power * (power / c).max(1.0).ln() {
        w_max *= 1.2;
    }
    let step = PI / s;
    let breaks: Vec<f64> = (1..).map(|k| k as f64 * step).take_while(|b| *b < w_max).collect();
    let v = Integrator::new(1e-17, 1e-13).integrate(f, 0.0, w_max, &breaks).ok()?;
    let v = if dim == 1 { v / PI } else { v / (2.0 * PI * PI * r) };
    (v.is_finite() && v > 0.0).then_some(v)
}

/// Tail expansion of the normalized profile `P(r)`; `None` when the series does
/// not settle to a 1e-12 relative tolerance at this radius.
pub fn tail_series(alpha: Alpha, dim: usize, r: f64) -> Option<f64> {
    let a = alpha.value();
    let d = dim as f64;
    let ln2 = std::f64::consts::LN_2;
    let lnr = r.ln();
    let mut sum: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..400usize {
        let kf = k as f64;
        let s = (PI * a * kf / 2.0).sin();
        let logc = libm::lgamma(a * kf / 2.0 + 1.0) + libm::lgamma((a * kf + d) / 2.0)
            - libm::lgamma(kf + 1.0)
            + a * kf * ln2
            - (a * kf + d) * lnr;
        let mag = logc.exp();
        let term = if k % 2 == 1 { mag * s } else { -mag * s };
        if mag > prev && k > 3 {
            // asymptotic regime: terms started growing before convergence
            if prev < 1e-12 * sum.abs() {
                break;
            }
            return None;
        }
        sum += term;
        if mag < 1e-17 * sum.abs() && k > 2 {
            break;
        }
        prev = mag;
    }
    let v = sum * PI.powf(-(d / 2.0 + 1.0));
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Density evaluator for one `(α, d)`, memoizing the normalized profile.
#[derive(Debug)]
pub struct StableKernel {
    alpha: Alpha,
    dim: usize,
    memo: RwLock<HashMap<u64, f64>>,
}

impl StableKernel {
    pub fn new(alpha: Alpha, dim: usize) -> Result<Self> {
        check_dimension(dim)?;
        Ok(Self {
            alpha,
            dim,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// `p_d(1, r)`.
    pub fn profile(&self, r: f64) -> Result<f64> {
        let r = r.abs();
        let key = r.to_bits();
        if let Some(v) = self.memo.read().expect("memo poisoned").get(&key) {
            return Ok(*v);
        }
        let v = match r > TAIL_CROSSOVER {
            true => tail_series(self.alpha, self.dim, r),
            false => None,
        };
        let v = match v.or_else(|| contour_profile(self.alpha, self.dim, r)) {
            Some(v) => v,
            None => fourier_density(self.alpha, self.dim, 1.0, r)?,
        };
        self.memo.write().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    pub fn density_radial(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("{t} must be positive")));
        }
        let a = self.alpha.value();
        let p = self.profile(r * t.powf(-1.0 / a))?;
        Ok(t.powf(-(self.dim as f64) / a) * p)
    }

    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(invalid("x", "length does not match dimension"));
        }
        self.density_radial(t, norm(x))
    }
}

fn shared_kernel(alpha: Alpha, dim: usize) -> Result<Arc<StableKernel>> {
    static KERNELS: OnceLock<Mutex<HashMap<(u64, usize), Arc<StableKernel>>>> = OnceLock::new();
    check_dimension(dim)?;
    let map = KERNELS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("kernel registry poisoned");
    Ok(guard
        .entry((alpha.value().to_bits(), dim))
        .or_insert_with(|| Arc::new(StableKernel::new(alpha, dim).expect("dimension checked")))
        .clone())
}

/// `p_d(t, x)` for a validated query.
pub fn density(q: &KernelQuery) -> Result<f64> {
    q.validate()?;
    shared_kernel(q.alpha, q.dimension)?.density(q.t, &q.x)
}

/// `p(t,x) / (t^{-d/α} p(1, t^{-1/α} x))`, numerator by direct quadrature with
/// `t` inside the Fourier integrand.
pub fn scaling_check(alpha: Alpha, dimension: usize, t: f64, x: &[f64]) -> Result<f64> {
    let q = KernelQuery::new(alpha, t, x.to_vec())?;
    if q.dimension != dimension {
        return Err(invalid("x", "length does not match dimension"));
    }
    let r = q.radius();
    let a = alpha.value();
    let kernel = shared_kernel(alpha, dimension)?;
    let scaled = t.powf(-(dimension as f64) / a) * kernel.profile(r * t.powf(-1.0 / a))?;
    let direct = if r * t.powf(-1.0 / a) > TAIL_CROSSOVER {
        // quadrature is inaccurate in the far tail; compare the tail expansion in
        // physical variables instead
        t.powf(-(dimension as f64) / a)
            * tail_series(alpha, dimension, r * t.powf(-1.0 / a))
                .ok_or_else(|| Error::NoConvergence("tail series".into()))?
    } else {
        fourier_density(alpha, dimension, t, r)?
    };
    Ok(direct / scaled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    /// `t / (t^{1/α} + |x|)^{d+α}`
    pub envelope: f64,
    pub density: f64,
    /// `density / envelope`
    pub ratio: f64,
}

pub fn envelope_value(alpha: Alpha, dim: usize, t: f64, r: f64) -> f64 {
    let a = alpha.value();
    t / (t.powf(1.0 / a) + r).powf(dim as f64 + a)
}

pub fn comparability_envelope(q: &KernelQuery) -> Result<Envelope> {
    let density = density(q)?;
    let envelope = envelope_value(q.alpha, q.dimension, q.t, q.radius());
    Ok(Envelope {
        envelope,
        density,
        ratio: density / envelope,
    })
}

/// `∫_{R^{d-1}} p_d(t, x¹, x') dx' / p_1(t, x¹)` for d ∈ {2, 3}.
pub fn marginalize_check(alpha: Alpha, dimension: usize, t: f64, x1: f64) -> Result<f64> {
    if !(dimension == 2 || dimension == 3) {
        return Err(invalid("dimension", "marginalization needs d in {2, 3}"));
    }
    if x1 == 0.0 || !x1.is_finite() {
        return Err(invalid("x1", "must be a nonzero finite real"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let table = kernel_table(alpha, dimension)?;
    let q = Integrator::new(1e-13, 1e-10);
    let x1 = x1.abs();
    let brk = [TAIL_CROSSOVER * t.powf(1.0 / alpha.value()), x1];
    let marg = if dimension == 2 {
        2.0 * q.integrate_to_infinity(|s| table.density(t, (x1 * x1 + s * s).sqrt()), 0.0, &brk)?
    } else {
        2.0 * PI * q.integrate_to_infinity(|s| s * table.density(t, (x1 * x1 + s * s).sqrt()), 0.0, &brk)?
    };
    let one = kernel_table(alpha, 1)?.density(t, x1);
    Ok(marg / one)
}

const PANEL_WIDTH: f64 = 0.5;
const PANEL_NODES: usize = 20;
const MIN_PANEL_WIDTH: f64 = 1e-7;
const TABLE_REL_TOL: f64 = 1e-11;

#[derive(Debug)]
struct Panel {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

/// Piecewise Chebyshev interpolant of the normalized profile on
/// `[0, TAIL_CROSSOVER]`, tail expansion beyond. Built once per `(α, d)` and
/// shared; this is what the sweeps use for dense kernel evaluation.
///
/// Panels start at width 0.5 and are bisected until the interpolant matches
/// direct evaluation at interior check points. For `α < 1` the profile is not
/// analytic at the origin, so the first panels end up much narrower.
#[derive(Debug)]
pub struct KernelTable {
    alpha: Alpha,
    dim: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    panels: Vec<Panel>,
}

fn barycentric(nodes: &[f64], bary: &[f64], vals: &[f64], z: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let dz = z - nodes[j];
        if dz == 0.0 {
            return vals[j];
        }
        let c = bary[j] / dz;
        num += c * vals[j];
        den += c;
    }
    num / den
}

impl KernelTable {
    pub fn build(alpha: Alpha, dim: usize) -> Result<Self> {
        let kernel = shared_kernel(alpha, dim)?;
        let n = PANEL_NODES;
        let nodes: Vec<f64> = (0..n).map(|j| -(PI * j as f64 / (n - 1) as f64).cos()).collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        // check points sit halfway between Chebyshev nodes, where the
        // interpolation error peaks
        let checks: Vec<f64> = [1usize, n / 2, n - 3]
            .iter()
            .map(|&j| 0.5 * (nodes[j] + nodes[j + 1]))
            .collect();
        let mut panels = Vec::new();
        let mut stack: Vec<(f64, f64)> = (0..(TAIL_CROSSOVER / PANEL_WIDTH).round() as usize)
            .rev()
            .map(|k| (k as f64 * PANEL_WIDTH, (k + 1) as f64 * PANEL_WIDTH))
            .collect();
        while let Some((lo, hi)) = stack.pop() {
            let map = |z: f64| lo + 0.5 * (hi - lo) * (z + 1.0);
            let values = nodes
                .iter()
                .map(|&z| kernel.profile(map(z)))
                .collect::<Result<Vec<f64>>>()?;
            let mut ok = true;
            if hi - lo > MIN_PANEL_WIDTH {
                for &z in &checks {
                    let exact = kernel.profile(map(z))?;
                    let approx = barycentric(&nodes, &bary, &values, z);
                    if (approx - exact).abs() > TABLE_REL_TOL * exact.abs() {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                panels.push(Panel { lo, hi, values });
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((mid, hi));
                stack.push((lo, mid));
            }
        }
        Ok(Self {
            alpha,
            dim,
            nodes,
            bary,
            panels,
        })
    }

    /// Number of interpolation panels.
    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Interpolated `p_d(1, r)`.
    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > TAIL_CROSSOVER {
            return tail_series(self.alpha, self.dim, r).unwrap_or(0.0);
        }
        let k = self.panels.partition_point(|p| p.hi < r).min(self.panels.len() - 1);
        let p = &self.panels[k];
        let z = 2.0 * (r - p.lo) / (p.hi - p.lo) - 1.0;
        barycentric(&self.nodes, &self.bary, &p.values, z)
    }

    /// `p_d(t, r)` by scaling.
    pub fn density(&self, t: f64, r: f64) -> f64 {
        let a = self.alpha.value();
        t.powf(-(self.dim as f64) / a) * self.profile(r * t.powf(-1.0 / a))
    }
}

/// Shared, lazily built [`KernelTable`] for `(α, d)`.
pub fn kernel_table(alpha: Alpha, dim: usize) -> Result<Arc<KernelTable>> {
    static TABLES: OnceLock<Mutex<HashMap<(u64, usize), Arc<KernelTable>>>> = OnceLock::new();
    check_dimension(dim)?;
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (alpha.value().to_bits(), dim);
    if let Some(t) = map.lock().expect("table registry poisoned").get(&key) {
        return Ok(t.clone());
    }
    // build outside the lock: construction can take a second or two
    let table = Arc::new(KernelTable::build(alpha, dim)?);
    Ok(map
        .lock()
        .expect("table registry poisoned")
        .entry(key)
        .or_insert(table)
        .clone())
}

fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// `∫_{R^d} p_d(1, x) dx`: panel quadrature up to the crossover plus the tail
/// expansion integrated term by term.
pub fn total_mass(alpha: Alpha, dim: usize) -> Result<f64> {
    let table = kernel_table(alpha, dim)?;
    let q = Integrator::new(1e-14, 1e-12);
    let breaks: Vec<f64> = table.panels.iter().skip(1).map(|p| p.lo).collect();
    let d = dim as f64;
    let inner = q.integrate(|r| r.powf(d - 1.0) * table.profile(r), 0.0, TAIL_CROSSOVER, &breaks)?;
    // ∫_R^∞ r^{d-1} r^{-αk-d} dr = R^{-αk}/(αk)
    let a = alpha.value();
    let ln2 = std::f64::consts::LN_2;
    let big_r = TAIL_CROSSOVER;
    let mut tail = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..400usize {
        let kf = k as f64;
        let s = (PI * a * kf / 2.0).sin();
        let logc = libm::lgamma(a * kf / 2.0 + 1.0) + libm::lgamma((a * kf + d) / 2.0)
            - libm::lgamma(kf + 1.0)
            + a * kf * ln2
            - a * kf * big_r.ln()
            - (a * kf).ln();
        let mag = logc.exp();
        if mag > prev && k > 3 {
            // asymptotic series (α > 1): stop at the smallest term
            break;
        }
        tail += if k % 2 == 1 { mag * s } else { -mag * s };
        if mag < 1e-18 {
            break;
        }
        prev = mag;
    }
    tail *= PI.powf(-(d / 2.0 + 1.0));
    Ok(unit_sphere_area(dim) * (inner + tail))
}

/// One tabulation row: `(t, |x|, density, density/envelope)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub t: f64,
    pub r: f64,
    pub density: f64,
    pub envelope_ratio: f64,
}

pub fn tabulate(alpha: Alpha, dim: usize, times: &[f64], radii: &[f64]) -> Result<Vec<KernelRow>> {
    let kernel = shared_kernel(alpha, dim)?;
    let mut rows = Vec::with_capacity(times.len() * radii.len());
    for &t in times {
        for &r in radii {
            let density = kernel.density_radial(t, r)?;
            rows.push(KernelRow {
                t,
                r,
                density,
                envelope_ratio: density / envelope_value(alpha, dim, t, r),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy(t: f64, x: f64) -> f64 {
        t / (PI * (t * t + x * x))
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Alpha::new(2.0).is_err());
        assert!(Alpha::new(0.0).is_err());
        let a = Alpha::new(1.0).unwrap();
        assert!(KernelQuery::new(a, 0.0, vec![1.0]).is_err());
        assert!(KernelQuery::new(a, 1.0, vec![1.0; 4]).is_err());
    }

    #[test]
    fn cauchy_closed_form() {
        let a = Alpha::new(1.0).unwrap();
        for &(t, x) in &[(1.0, 0.0), (1.0, 1.0), (0.3, 2.5), (4.0, 7.0), (1.0, 30.0)] {
            let v = density(&KernelQuery::new(a, t, vec![x]).unwrap()).unwrap();
            assert!((v - cauchy(t, x)).abs() < 1e-10 * cauchy(t, 0.0).max(1.0), "{t} {x} {v}");
        }
    }

    #[test]
    fn three_dimensional_cauchy() {
        // p_3(t,x) = t / (π² (t² + |x|²)²) for α = 1
        let a = Alpha::new(1.0).unwrap();
        for &r in &[0.0, 0.5, 3.0, 20.0] {
            let v = density(&KernelQuery::new(a, 1.0, vec![r, 0.0, 0.0]).unwrap()).unwrap();
            let exact = 1.0 / (PI * PI * (1.0 + r * r).powi(2));
            assert!((v - exact).abs() < 1e-10, "{r}: {v} vs {exact}");
        }
    }

    #[test]
    fn two_dimensional_cauchy() {
        // p_2(t,x) = t / (2π (t² + |x|²)^{3/2}) for α = 1
        let a = Alpha::new(1.0).unwrap();
        for &r in &[0.0, 1.0, 4.0, 15.0] {
            let v = density(&KernelQuery::new(a, 1.0, vec![r, 0.0]).unwrap()).unwrap();
            let exact = 1.0 / (2.0 * PI * (1.0 + r * r).powf(1.5));
            assert!((v - exact).abs() < 1e-10, "{r}: {v} vs {exact}");
        }
    }

    #[test]
    fn symmetric_and_radial() {
        let a = Alpha::new(1.5).unwrap();
        let k = StableKernel::new(a, 2).unwrap();
        let v1 = k.density(0.7, &[0.3, -0.4]).unwrap();
        let v2 = k.density(0.7, &[-0.3, 0.4]).unwrap();
        let v3 = k.density(0.7, &[0.5, 0.0]).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1, v3);
    }

    #[test]
    fn tail_series_matches_quadrature_near_crossover() {
        for &al in &[0.5, 1.5] {
            let a = Alpha::new(al).unwrap();
            for d in 1..=3 {
                let s = tail_series(a, d, 8.0).unwrap();
                let q = fourier_density(a, d, 1.0, 8.0).unwrap();
                assert!((s - q).abs() < 1e-11, "α={al} d={d}: {s} vs {q}");
            }
        }
    }

    #[test]
    fn table_matches_direct() {
        let a = Alpha::new(0.5).unwrap();
        let table = kernel_table(a, 1).unwrap();
        for &r in &[0.0, 0.13, 1.7, 4.44, 9.9] {
            let direct = fourier_density(a, 1, 1.0, r).unwrap();
            assert!((table.profile(r) - direct).abs() < 1e-10, "{r}");
        }
    }

    #[test]
    fn unimodal_at_origin() {
        let a = Alpha::new(0.8).unwrap();
        let k = StableKernel::new(a, 1).unwrap();
        let p0 = k.density(2.0, &[0.0]).unwrap();
        for &x in &[0.01, 0.1, 1.0, 5.0] {
            assert!(k.density(2.0, &[x]).unwrap() < p0);
        }
    }

    #[test]
    fn rotated_contour_matches_fourier_inversion() {
        for a in [0.3, 0.5, 0.8] {
            let al = Alpha::new(a).unwrap();
            for d in [1, 3] {
                for r in [0.5, 1.0, 3.0] {
                    let c = contour_profile(al, d, r).unwrap();
                    let f = fourier_density(al, d, 1.0, r).unwrap();
                    assert!((c / f - 1.0).abs() < 1e-8, "{a} {d} {r}: {c} vs {f}");
                }
            }
        }
        assert!(contour_profile(Alpha::new(1.0).unwrap(), 1, 1.0).is_none());
        assert!(contour_profile(Alpha::new(0.5).unwrap(), 2, 1.0).is_none());
    }

    #[test]
    fn mass_near_gaussian_limit() {
        let m = total_mass(Alpha::new(1.9).unwrap(), 1).unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }

    #[test]
    fn scaling_identity_at_unit_time() {
        let a = Alpha::new(1.3).unwrap();
        assert!((scaling_check(a, 1, 1.0, &[0.77]).unwrap() - 1.0).abs() < 1e-12);
    }
}
