//! Monte Carlo for the symmetric α-stable process killed on leaving `D`.
//!
//! Paths follow an Euler skeleton with step `dt`; killing is checked at
//! skeleton points only, so a path can leave and re-enter between two checks.
//! The skeleton therefore over-estimates survival and exit times, and the bias
//! shrinks as `dt → 0`. Each path draws from its own ChaCha stream
//! `(seed, path index)`, which makes results independent of thread count.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;
use crate::stable_kernel::{kernel_table, Alpha};

/// Bins with fewer hits than this are flagged in density estimates.
pub const MIN_BIN_HITS: u64 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub domain: Domain,
    pub alpha: Alpha,
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "need at least one path"));
        }
        if !(self.dt > 0.0) || !(self.t_max.is_finite()) || self.dt > self.t_max {
            return Err(invalid("dt", format!("need 0 < dt = {} <= t_max = {}", self.dt, self.t_max)));
        }
        let d = self.domain.dimension();
        if d > 2 {
            return Err(Error::Unsupported(format!("Monte Carlo in dimension {d}")));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }
}

/// RNG for path `index`: independent of how paths are split across threads.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unit-scale symmetric stable variate (Chambers–Mallows–Stuck),
/// `E e^{iξX} = e^{-|ξ|^α}`.
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * ((v - alpha * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variate with `E e^{-sA} = e^{-s^a}`, `0 < a < 1` (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let v = PI * rng.random::<f64>();
    let w: f64 = rng.sample(Exp1);
    (a * v).sin() / v.sin().powf(1.0 / a) * (((1.0 - a) * v).sin() / w).powf((1.0 - a) / a)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Increment `X_dt` of the isotropic α-stable process in `dim` dimensions.
/// In one dimension it is CMS; in higher dimensions a Gaussian `N(0, 2I)`
/// subordinated by a positive `(α/2)`-stable time.
pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: Alpha, dt: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let scale = dt.powf(1.0 / alpha.value());
    if dim == 1 {
        return vec![scale * standard_stable(alpha.value(), rng)];
    }
    let a = alpha.value() / 2.0;
    let sub = positive_stable(a, rng).sqrt() * std::f64::consts::SQRT_2 * scale;
    (0..dim).map(|_| sub * standard_normal(rng)).collect()
}

/// Result of a killed-path simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub config: MCConfig,
    pub x0: Vec<f64>,
    /// Skeleton exit time per path; `t_max` for censored paths.
    pub exit_times: Vec<f64>,
    pub censored: Vec<bool>,
    /// First skeleton point outside `D` (flattened, `dim` per path); censored
    /// paths contribute their final position.
    pub exit_positions: Vec<f64>,
    pub record_times: Vec<f64>,
    /// Positions of surviving paths at each record time (flattened, `dim` per point).
    pub snapshots: Vec<Vec<f64>>,
}

struct PathOutcome {
    exit: f64,
    censored: bool,
    last: [f64; 2],
    records: Vec<Option<[f64; 2]>>,
}

fn simulate_one(cfg: &MCConfig, x0: &[f64], record_steps: &[usize], index: u64) -> PathOutcome {
    let mut rng = path_rng(cfg.seed, index);
    let dim = x0.len();
    let a = cfg.alpha.value();
    let scale = cfg.dt.powf(1.0 / a);
    let steps = cfg.steps();
    let mut pos = [x0[0], if dim > 1 { x0[1] } else { 0.0 }];
    let mut records = vec![None; record_steps.len()];
    let mut next = 0;
    // record steps are sorted; step 0 is the start
    while next < record_steps.len() && record_steps[next] == 0 {
        records[next] = Some(pos);
        next += 1;
    }
    for k in 1..=steps {
        if dim == 1 {
            pos[0] += scale * standard_stable(a, &mut rng);
        } else {
            let sub = positive_stable(0.5 * a, &mut rng).sqrt() * std::f64::consts::SQRT_2 * scale;
            pos[0] += sub * standard_normal(&mut rng);
            pos[1] += sub * standard_normal(&mut rng);
        }
        if !cfg.domain.contains(&pos[..dim]) {
            return PathOutcome {
                exit: k as f64 * cfg.dt,
                censored: false,
                last: pos,
                records,
            };
        }
        while next < record_steps.len() && record_steps[next] == k {
            records[next] = Some(pos);
            next += 1;
        }
    }
    PathOutcome {
        exit: steps as f64 * cfg.dt,
        censored: true,
        last: pos,
        records,
    }
}

/// Runs `cfg.n_paths` killed paths from `x0`, recording survivors at
/// `record_times` (rounded to the skeleton).
pub fn simulate_killed_paths(cfg: &MCConfig, x0: &[f64], record_times: &[f64]) -> Result<PathEnsemble> {
    cfg.validate()?;
    if x0.len() != cfg.domain.dimension() {
        return Err(invalid("x0", "dimension mismatch"));
    }
    if !cfg.domain.contains(x0) {
        return Err(invalid("x0", "start point must lie inside the domain"));
    }
    let mut order: Vec<usize> = (0..record_times.len()).collect();
    order.sort_by(|&i, &j| record_times[i].total_cmp(&record_times[j]));
    let mut record_steps = Vec::with_capacity(record_times.len());
    for &i in &order {
        let t = record_times[i];
        if !(t >= 0.0 && t <= cfg.t_max * (1.0 + 1e-12)) {
            return Err(invalid("record_times", format!("{t} outside [0, t_max]")));
        }
        record_steps.push((t / cfg.dt).round() as usize);
    }
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_one(cfg, x0, &record_steps, i))
        .collect();
    let dim = x0.len();
    let mut snapshots = vec![Vec::new(); record_times.len()];
    for o in &outcomes {
        for (slot, rec) in order.iter().zip(&o.records) {
            if let Some(p) = rec {
                snapshots[*slot].extend_from_slice(&p[..dim]);
            }
        }
    }
    Ok(PathEnsemble {
        config: cfg.clone(),
        x0: x0.to_vec(),
        exit_times: outcomes.iter().map(|o| o.exit).collect(),
        censored: outcomes.iter().map(|o| o.censored).collect(),
        exit_positions: outcomes.iter().flat_map(|o| o.last[..dim].to_vec()).collect(),
        record_times: record_times.to_vec(),
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeStats {
    pub mean: f64,
    pub std_err: f64,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub survival: f64,
    pub std_err: f64,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.exit_times.len()
    }

    /// Mean skeleton exit time. Censored paths enter with `t_max`, which biases
    /// the mean low; the count is reported alongside.
    pub fn exit_time_stats(&self) -> ExitTimeStats {
        let n = self.exit_times.len() as f64;
        let mean = self.exit_times.iter().sum::<f64>() / n;
        let var = self.exit_times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        ExitTimeStats {
            mean,
            std_err: (var / n).sqrt(),
            censored: self.censored.iter().filter(|c| **c).count(),
        }
    }

    /// `P(τ > t)` on `times` with binomial standard errors.
    pub fn survival_curve(&self, times: &[f64]) -> Vec<SurvivalPoint> {
        let n = self.exit_times.len() as f64;
        times
            .iter()
            .map(|&t| {
                let alive = self
                    .exit_times
                    .iter()
                    .zip(&self.censored)
                    .filter(|(e, c)| **e > t || **c)
                    .count() as f64;
                let s = alive / n;
                SurvivalPoint {
                    t,
                    survival: s,
                    std_err: (s * (1.0 - s) / n).sqrt(),
                }
            })
            .collect()
    }
}

pub const SURVIVAL_CSV_HEADER: &str = "t,survival,stderr";

pub fn survival_csv(points: &[SurvivalPoint]) -> String {
    let mut s = format!("{SURVIVAL_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{:.10e},{:.12e},{:.12e}", p.t, p.survival, p.std_err);
    }
    s
}

/// Spatial bins for density histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bins {
    /// Consecutive intervals `[e_k, e_{k+1})` on the line.
    Intervals(Vec<f64>),
    /// Annuli `e_k ≤ |y - center| < e_{k+1}` in the plane.
    Annuli { center: Vec<f64>, edges: Vec<f64> },
}

impl Bins {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        Bins::Intervals((0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect())
    }

    fn edges(&self) -> &[f64] {
        match self {
            Bins::Intervals(e) => e,
            Bins::Annuli { edges, .. } => edges,
        }
    }

    pub fn len(&self) -> usize {
        self.edges().len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn volume(&self, k: usize) -> f64 {
        let e = self.edges();
        match self {
            Bins::Intervals(_) => e[k + 1] - e[k],
            Bins::Annuli { .. } => PI * (e[k + 1] * e[k + 1] - e[k] * e[k]),
        }
    }

    fn locate(&self, p: &[f64]) -> Option<usize> {
        let (v, e) = match self {
            Bins::Intervals(e) => (p[0], e),
            Bins::Annuli { center, edges } => (((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt(), edges),
        };
        if v < e[0] || v >= e[e.len() - 1] {
            return None;
        }
        Some(e.partition_point(|&x| x <= v) - 1)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let e = self.edges();
        if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("bins", "edges must be strictly increasing, at least two"));
        }
        let want = match self {
            Bins::Intervals(_) => 1,
            Bins::Annuli { .. } => 2,
        };
        if want != dim {
            return Err(invalid("bins", format!("{want}-d bins for a {dim}-d domain")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub bins: Bins,
    pub t: f64,
    pub x0: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_err: Vec<f64>,
    pub hits: Vec<u64>,
    pub n_paths: usize,
    /// Indices of bins with fewer than [`MIN_BIN_HITS`] hits.
    pub sparse_bins: Vec<usize>,
}

impl DensityEstimate {
    /// `Σ estimate × volume`: the surviving mass inside the bins.
    pub fn total_mass(&self) -> f64 {
        self.estimates
            .iter()
            .enumerate()
            .map(|(k, e)| e * self.bins.volume(k))
            .sum()
    }
}

/// Histogram of the surviving positions recorded at time `t`.
pub fn density_from_ensemble(ens: &PathEnsemble, t: f64, bins: &Bins) -> Result<DensityEstimate> {
    let dim = ens.x0.len();
    bins.validate(dim)?;
    let slot = ens
        .record_times
        .iter()
        .position(|&r| (r - t).abs() <= 1e-12 * t.max(1.0))
        .ok_or_else(|| invalid("t", format!("{t} is not a recorded time")))?;
    let mut hits = vec![0u64; bins.len()];
    for p in ens.snapshots[slot].chunks(dim) {
        if let Some(k) = bins.locate(p) {
            hits[k] += 1;
        }
    }
    let n = ens.n_paths() as f64;
    let estimates: Vec<f64> = hits.iter().enumerate().map(|(k, h)| *h as f64 / (n * bins.volume(k))).collect();
    let std_err = hits
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let q = *h as f64 / n;
            (q * (1.0 - q) / n).sqrt() / bins.volume(k)
        })
        .collect();
    let sparse_bins: Vec<usize> = (0..hits.len()).filter(|&k| hits[k] < MIN_BIN_HITS).collect();
    if !sparse_bins.is_empty() {
        log::warn!("{} density bins have fewer than {MIN_BIN_HITS} hits", sparse_bins.len());
    }
    Ok(DensityEstimate {
        bins: bins.clone(),
        t,
        x0: ens.x0.clone(),
        estimates,
        std_err,
        hits,
        n_paths: ens.n_paths(),
        sparse_bins,
    })
}

pub fn estimate_transition_density(cfg: &MCConfig, x0: &[f64], t: f64, bins: &Bins) -> Result<DensityEstimate> {
    if t > cfg.t_max {
        return Err(invalid("t", format!("{t} > t_max = {}", cfg.t_max)));
    }
    let ens = simulate_killed_paths(cfg, x0, &[t])?;
    density_from_ensemble(&ens, t, bins)
}

/// `(1 ∧ d_x^{α/2}/√t)(1 ∧ d_y^{α/2}/√t) p(t, x-y)` for one-dimensional `x, y`.
pub fn killed_envelope(domain: &Domain, alpha: Alpha, t: f64, x: f64, y: f64) -> Result<f64> {
    let table = kernel_table(alpha, 1)?;
    let h = alpha.value() / 2.0;
    let fx = (domain.distance_1d(x).powf(h) / t.sqrt()).min(1.0);
    let fy = (domain.distance_1d(y).powf(h) / t.sqrt()).min(1.0);
    Ok(fx * fy * table.density(t, (x - y).abs()))
}

/// Bin averages of [`killed_envelope`] (8-point Gauss–Legendre per bin).
pub fn envelope_bins(domain: &Domain, alpha: Alpha, t: f64, x0: f64, bins: &Bins) -> Result<Vec<f64>> {
    let Bins::Intervals(edges) = bins else {
        return Err(Error::Unsupported("envelope bins are one-dimensional".into()));
    };
    let (gx, gw) = gauss_legendre(8);
    edges
        .windows(2)
        .map(|e| {
            let mut acc = 0.0;
            for (z, w) in gx.iter().zip(&gw) {
                let y = 0.5 * (e[0] + e[1]) + 0.5 * (e[1] - e[0]) * z;
                acc += 0.5 * w * killed_envelope(domain, alpha, t, x0, y)?;
            }
            Ok(acc)
        })
        .collect()
}

pub const DENSITY_CSV_HEADER: &str = "bin_center,estimate,stderr,killed_envelope";

pub fn density_csv(est: &DensityEstimate, envelope: &[f64]) -> String {
    let mut s = format!("{DENSITY_CSV_HEADER}\n");
    for (k, c) in est.bins.centers().iter().enumerate() {
        let env = envelope.get(k).copied().unwrap_or(f64::NAN);
        let _ = writeln!(s, "{c:.10e},{:.12e},{:.12e},{env:.12e}", est.estimates[k], est.std_err[k]);
    }
    s
}

/// Largest estimate-to-envelope ratio over bins with at least
/// [`MIN_BIN_HITS`] hits.
pub fn envelope_constant(est: &DensityEstimate, envelope: &[f64]) -> Option<f64> {
    est.estimates
        .iter()
        .zip(envelope)
        .zip(&est.hits)
        .filter(|((_, env), h)| **h >= MIN_BIN_HITS && **env > 0.0)
        .map(|((e, env), _)| e / env)
        .reduce(f64::max)
}

/// Fitted envelope constants across times, and the exponential rate `c` from a
/// least-squares fit of `log Ĉ(t) = log C - c t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub times: Vec<f64>,
    pub constants: Vec<f64>,
    /// `max Ĉ / min Ĉ`.
    pub spread: f64,
    pub rate: f64,
    /// Spread of `Ĉ(t) e^{c t}` with the fitted rate.
    pub corrected_spread: f64,
}

pub fn fit_envelope(times: &[f64], constants: &[f64]) -> Result<EnvelopeFit> {
    if times.len() != constants.len() || times.len() < 2 {
        return Err(invalid("times", "need at least two (t, Ĉ) pairs"));
    }
    if constants.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::NonFinite("envelope constant".into()));
    }
    let spread_of = |v: &[f64]| {
        let mx = v.iter().cloned().fold(f64::MIN, f64::max);
        let mn = v.iter().cloned().fold(f64::MAX, f64::min);
        mx / mn
    };
    let pts: Vec<(f64, f64)> = times.iter().zip(constants).map(|(t, c)| (*t, c.ln())).collect();
    let rate = -crate::norms::ls_slope(&pts);
    let corrected: Vec<f64> = times.iter().zip(constants).map(|(t, c)| c * (rate * t).exp()).collect();
    Ok(EnvelopeFit {
        times: times.to_vec(),
        constants: constants.to_vec(),
        spread: spread_of(constants),
        rate,
        corrected_spread: spread_of(&corrected),
    })
}

fn sample_exit_centered<R: Rng + ?Sized>(alpha: f64, dim: usize, r: f64, rng: &mut R) -> Vec<f64> {
    // u = r²/|y|² ~ Beta(α/2, 1 - α/2)
    let beta = rand_distr::Beta::new(alpha / 2.0, 1.0 - alpha / 2.0).expect("valid beta parameters");
    let u: f64 = rng.sample(beta);
    let s = r / u.max(f64::MIN_POSITIVE).sqrt();
    match dim {
        1 => vec![if rng.random::<bool>() { s } else { -s }],
        _ => {
            let g: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.iter().map(|v| s * v / norm).collect()
        }
    }
}

/// Exact exit position from `B_r(c)` started at `x`. Sampling from the
/// centre is exact; off-centre starts iterate over the largest ball centred
/// at the current point (strong Markov property) until the point leaves.
pub fn ball_exit_sample<R: Rng + ?Sized>(
    alpha: Alpha,
    center: &[f64],
    radius: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if center.len() != x.len() || x.is_empty() {
        return Err(invalid("x", "dimension mismatch"));
    }
    let dist = |p: &[f64]| p.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if !(dist(x) < radius) {
        return Err(invalid("x", "start point must lie strictly inside the ball"));
    }
    let mut p = x.to_vec();
    for _ in 0..10_000 {
        let r = radius - dist(&p);
        let jump = sample_exit_centered(alpha.value(), p.len(), r, rng);
        for (pi, j) in p.iter_mut().zip(&jump) {
            *pi += j;
        }
        if dist(&p) >= radius {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence("walk on spheres did not leave the ball".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, paths: usize, dt: f64, t_max: f64) -> MCConfig {
        MCConfig {
            seed: 7,
            n_paths: paths,
            dt,
            t_max,
            domain: Domain::interval(-1.0, 1.0).unwrap(),
            alpha: Alpha::new(alpha).unwrap(),
        }
    }

    #[test]
    fn cauchy_increments_match_cdf() {
        let mut rng = path_rng(1, 0);
        let a = Alpha::new(1.0).unwrap();
        let dt = 0.3;
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_stable_increment(a, dt, 1, &mut rng)[0]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = 0.5 + (x / dt).atan() / PI;
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt(), "{ks}");
    }

    #[test]
    fn median_scales_with_dt() {
        for (k, &a) in [0.7, 1.3].iter().enumerate() {
            let alpha = Alpha::new(a).unwrap();
            let median = |dt: f64, stream: u64| {
                let mut rng = path_rng(11, stream);
                let mut v: Vec<f64> = (0..100_000)
                    .map(|_| sample_stable_increment(alpha, dt, 1, &mut rng)[0].abs())
                    .collect();
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            };
            let ratio = median(0.16, 2 * k as u64) / median(0.01, 2 * k as u64 + 1);
            let want = 16f64.powf(1.0 / a);
            assert!((ratio / want - 1.0).abs() < 0.05, "alpha {a}: {ratio} vs {want}");
        }
    }

    #[test]
    fn increments_symmetric() {
        let mut rng = path_rng(5, 0);
        let a = Alpha::new(1.4).unwrap();
        let n = 40_000;
        let s: f64 = (0..n)
            .map(|_| sample_stable_increment(a, 0.1, 2, &mut rng)[0].signum())
            .sum();
        assert!((s / n as f64).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn density_mirror_symmetric() {
        let c = cfg(1.0, 20_000, 1e-2, 0.25);
        let est = estimate_transition_density(&c, &[0.0], 0.25, &Bins::uniform(-1.0, 1.0, 8)).unwrap();
        let n = est.estimates.len();
        for k in 0..n / 2 {
            let (a, b) = (est.estimates[k], est.estimates[n - 1 - k]);
            let se = est.std_err[k].hypot(est.std_err[n - 1 - k]);
            assert!((a - b).abs() <= 3.0 * se + 1e-12, "bin {k}: {a} vs {b}");
        }
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let mut rng = path_rng(2, 0);
        let a = 0.6;
        let n = 40_000;
        let s = 1.3;
        let m: f64 = (0..n).map(|_| (-s * positive_stable(a, &mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((m - (-s.powf(a)).exp()).abs() < 0.01, "{m}");
    }

    #[test]
    fn deterministic_and_monotone_survival() {
        let c = cfg(1.0, 400, 1e-2, 2.0);
        let a = simulate_killed_paths(&c, &[0.2], &[0.5]).unwrap();
        let b = simulate_killed_paths(&c, &[0.2], &[0.5]).unwrap();
        assert_eq!(a, b);
        let s = a.survival_curve(&[0.0, 0.1, 0.5, 1.0, 1.5]);
        assert!(s.windows(2).all(|w| w[1].survival <= w[0].survival));
    }

    #[test]
    fn density_mass_below_one() {
        let c = cfg(1.0, 2000, 1e-2, 0.5);
        let est = estimate_transition_density(&c, &[0.0], 0.5, &Bins::uniform(-1.0, 1.0, 10)).unwrap();
        let m = est.total_mass();
        assert!(m > 0.0 && m <= 1.0);
    }

    #[test]
    fn ball_exit_outside_and_radial_law() {
        let a = Alpha::new(1.0).unwrap();
        let mut rng = path_rng(3, 0);
        let n = 20_000;
        let mut far = 0;
        for _ in 0..n {
            let y = ball_exit_sample(a, &[0.0], 1.0, &[0.0], &mut rng).unwrap();
            assert!(y[0].abs() >= 1.0);
            if y[0].abs() > 2.0 {
                far += 1;
            }
        }
        let p = far as f64 / n as f64;
        assert!((p - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt(), "{p}");
        let y = ball_exit_sample(a, &[0.0, 0.0], 1.0, &[0.5, 0.1], &mut rng).unwrap();
        assert!(y[0].hypot(y[1]) >= 1.0);
        assert!(ball_exit_sample(a, &[0.0], 1.0, &[1.0], &mut rng).is_err());
    }

    #[test]
    fn ball_exit_radius_ks() {
        // exit density ∝ (s²-1)^{-1/2} s^{-1} on s > 1 integrates to (2/π) arccos(1/s)
        let a = Alpha::new(1.0).unwrap();
        let mut rng = path_rng(9, 0);
        let n = 100_000;
        let mut s: Vec<f64> = (0..n)
            .map(|_| ball_exit_sample(a, &[0.0], 1.0, &[0.0], &mut rng).unwrap()[0].abs())
            .collect();
        s.sort_by(f64::total_cmp);
        let nf = n as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let f = 2.0 / PI * (1.0 / v).acos();
                (f - i as f64 / nf).abs().max((f - (i + 1) as f64 / nf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / nf.sqrt(), "{ks}");
    }

    #[test]
    fn harmonic_measure_two_estimators_agree() {
        // P(|X_τ| > 2) from x = 0.3 in (-1, 1): exact walk-on-spheres vs skeleton
        let a = Alpha::new(1.0).unwrap();
        let n = 20_000;
        let mut rng = path_rng(21, 0);
        let exact = (0..n)
            .filter(|_| ball_exit_sample(a, &[0.0], 1.0, &[0.3], &mut rng).unwrap()[0].abs() > 2.0)
            .count() as f64
            / n as f64;
        let c = cfg(1.0, n, 1e-3, 20.0);
        let ens = simulate_killed_paths(&c, &[0.3], &[]).unwrap();
        let skel = ens.exit_positions.iter().filter(|y| y.abs() > 2.0).count() as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt() * std::f64::consts::SQRT_2;
        assert!((exact - skel).abs() < 3.0 * se, "{exact} vs {skel}");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(cfg(1.0, 0, 0.1, 1.0).validate().is_err());
        assert!(cfg(1.0, 10, 2.0, 1.0).validate().is_err());
        let mut c = cfg(1.0, 10, 0.1, 1.0);
        c.domain = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        assert!(c.validate().is_err());
    }
}
