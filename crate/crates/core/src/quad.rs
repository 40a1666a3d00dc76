//! Adaptive Gauss–Kronrod quadrature on finite intervals.
//!
//! Global adaptive bisection with a 7/15-point Gauss–Kronrod pair, driven by a
//! max-heap on the local error estimate. Breakpoints split the interval up
//! front so that known endpoint singularities fall on panel edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 15-point panel: (kronrod estimate, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panels: 4000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`, splitting first at every breakpoint that
    /// lies strictly inside the interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut pts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi && x.is_finite())
            .collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();

        let mut heap = BinaryHeap::new();
        let mut total = 0.0;
        let mut total_err = 0.0;
        for w in pts.windows(2) {
            let (v, e) = gk15(&f, w[0], w[1]);
            total += v;
            total_err += e;
            heap.push(Panel { a: w[0], b: w[1], value: v, err: e });
        }
        let mut n = heap.len();
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if n >= self.max_panels {
                if total_err <= 1e3 * self.abs_tol.max(self.rel_tol * total.abs()) {
                    break;
                }
                return Err(Error::NoConvergence(format!(
                    "adaptive quadrature on [{lo}, {hi}]: error estimate {total_err:.3e} after {n} panels"
                )));
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // panel below floating-point resolution
                heap.push(Panel { err: 0.0, ..worst });
                total_err -= worst.err;
                continue;
            }
            let (v1, e1) = gk15(&f, worst.a, mid);
            let (v2, e2) = gk15(&f, mid, worst.b);
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.err;
            heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
            n += 1;
        }
        // re-sum to shed accumulated rounding in the running total
        let value: f64 = heap.iter().map(|p| p.value).sum();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("integral over [{lo}, {hi}]")));
        }
        Ok(sign * value)
    }

    /// Integrates over `[a, ∞)` via `x = a + s/(1-s)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64, breaks: &[f64]) -> Result<f64> {
        let g = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_m = 1.0 - s;
            let x = a + s / one_m;
            let v = f(x) / (one_m * one_m);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let sb: Vec<f64> = breaks
            .iter()
            .filter(|&&x| x > a)
            .map(|&x| (x - a) / (1.0 + x - a))
            .collect();
        self.integrate(g, 0.0, 1.0, &sb)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
