use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::kernel_bound::check_gamma_hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    KernelExactness,
    Getoor,
    Roundtrip,
    Sharpness,
    OperatorBound,
    KernelBound,
    Mc,
    DecayHolder,
    Determinism,
}

impl CheckId {
    pub const ALL: [CheckId; 9] = [
        CheckId::KernelExactness,
        CheckId::Getoor,
        CheckId::Roundtrip,
        CheckId::Sharpness,
        CheckId::OperatorBound,
        CheckId::KernelBound,
        CheckId::Mc,
        CheckId::DecayHolder,
        CheckId::Determinism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::KernelExactness => "kernel-exactness",
            CheckId::Getoor => "getoor",
            CheckId::Roundtrip => "roundtrip",
            CheckId::Sharpness => "sharpness",
            CheckId::OperatorBound => "operator-bound",
            CheckId::KernelBound => "kernel-bound",
            CheckId::Mc => "mc",
            CheckId::DecayHolder => "decay-holder",
            CheckId::Determinism => "determinism",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = CheckId::ALL.iter().map(|c| c.as_str()).collect();
                Error::Config(format!("unknown check `{s}`; expected one of {}", known.join(", ")))
            })
    }
}

/// Parameter overrides. An absent list means "use the check's default".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    pub alpha: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    /// Paired element-wise with `gamma1`.
    pub gamma0: Option<Vec<f64>>,
    pub gamma1: Option<Vec<f64>>,
    /// Kernel-bound cases outside the admissible range, reported but never
    /// counted towards pass or fail.
    pub probe_gamma0: Option<Vec<f64>>,
    pub probe_gamma1: Option<Vec<f64>>,
    /// Evaluation points for the kernel-bound sweep.
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    /// Node counts, coarse to fine.
    pub ladder: Option<Vec<usize>>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
}

/// Contract thresholds. Every report records the values it used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed max/min spread of kernel-integral ratios across `t`.
    pub kernel_spread: Option<f64>,
    /// Allowed max/min spread of operator ratios across `λ` or `T`.
    pub operator_spread: Option<f64>,
    /// Allowed relative drift of a norm between refinement levels.
    pub norm_drift: Option<f64>,
    /// Tolerance of fitted decay exponents around `α/2`.
    pub decay_tolerance: Option<f64>,
    /// Monte Carlo acceptance band in standard errors.
    pub mc_sigmas: Option<f64>,
    /// Relative discretization bias tolerated on top of the MC band.
    pub mc_bias: Option<f64>,
}

impl Thresholds {
    pub fn kernel_spread(&self) -> f64 {
        self.kernel_spread.unwrap_or(2.0)
    }
    pub fn operator_spread(&self) -> f64 {
        self.operator_spread.unwrap_or(1.2)
    }
    pub fn norm_drift(&self) -> f64 {
        self.norm_drift.unwrap_or(0.02)
    }
    pub fn decay_tolerance(&self) -> f64 {
        self.decay_tolerance.unwrap_or(0.05)
    }
    pub fn mc_sigmas(&self) -> f64 {
        self.mc_sigmas.unwrap_or(3.0)
    }
    pub fn mc_bias(&self) -> f64 {
        self.mc_bias.unwrap_or(0.02)
    }
}

pub const DEFAULT_SEED: u64 = 20_211_018;

/// A sweep configuration; parsed from `key = value` text with section headers
/// (`[params]`, `[resolution]`, `[thresholds]`). Unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub check: Option<CheckId>,
    pub seed: u64,
    pub out: Option<String>,
    pub params: ParamGrid,
    pub resolution: Resolution,
    pub thresholds: Thresholds,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            check: None,
            seed: DEFAULT_SEED,
            out: None,
            params: ParamGrid::default(),
            resolution: Resolution::default(),
            thresholds: Thresholds::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

impl SweepConfig {
    pub fn for_check(check: CheckId) -> Self {
        Self {
            check: Some(check),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Structural checks. The admissibility of `(γ₀, γ₁)` pairs is enforced
    /// here so that a violating sweep is rejected before any computation.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        for a in p.alpha.iter().flatten() {
            if !(*a > 0.0 && *a < 2.0) {
                return Err(Error::Config(format!("alpha = {a} is not in (0, 2)")));
            }
        }
        for v in p.p.iter().flatten() {
            if !(*v > 1.0 && v.is_finite()) {
                return Err(Error::Config(format!("p = {v} must exceed 1")));
            }
        }
        for v in p.theta.iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Config("theta must be finite".into()));
            }
        }
        for v in p.lambda.iter().flatten() {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lambda = {v} must be non-negative")));
            }
        }
        for v in p.t.iter().flatten() {
            positive("t", *v)?;
        }
        let pair_len = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>, name: &str| -> Result<()> {
            match (a, b) {
                (Some(a), Some(b)) if a.len() != b.len() => Err(Error::Config(format!(
                    "{name}: gamma0 and gamma1 lists differ in length ({} vs {})",
                    a.len(),
                    b.len()
                ))),
                (Some(_), None) | (None, Some(_)) => {
                    Err(Error::Config(format!("{name}: gamma0 and gamma1 must be given together")))
                }
                _ => Ok(()),
            }
        };
        pair_len(&p.gamma0, &p.gamma1, "params")?;
        pair_len(&p.probe_gamma0, &p.probe_gamma1, "probe")?;
        if let (Some(g0), Some(g1)) = (&p.gamma0, &p.gamma1) {
            let alphas = p.alpha.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
            for &a in &alphas {
                for (x, y) in g0.iter().zip(g1) {
                    if !check_gamma_hypothesis(a, *x, *y) {
                        return Err(Error::Config(format!(
                            "(gamma0, gamma1) = ({x}, {y}) violates -2/alpha < gamma0, -2 < gamma1 - gamma0 <= 2 + 2/alpha at alpha = {a}"
                        )));
                    }
                }
            }
        }
        let r = &self.resolution;
        if let Some(l) = &r.ladder {
            if l.is_empty() || l.iter().any(|n| *n < 16) || l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("ladder must be increasing node counts, each at least 16".into()));
            }
        }
        if r.steps == Some(0) || r.paths == Some(0) {
            return Err(Error::Config("steps and paths must be positive".into()));
        }
        if let Some(dt) = r.dt {
            positive("dt", dt)?;
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("kernel_spread", t.kernel_spread),
            ("operator_spread", t.operator_spread),
            ("norm_drift", t.norm_drift),
            ("decay_tolerance", t.decay_tolerance),
            ("mc_sigmas", t.mc_sigmas),
            ("mc_bias", t.mc_bias),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let cfg = SweepConfig::from_toml_str(
            "check = \"kernel-bound\"\nseed = 7\n[params]\nalpha = [1.0]\ngamma0 = [1.0]\ngamma1 = [2.0]\n[resolution]\nladder = [64, 128]\n",
        )
        .unwrap();
        assert_eq!(cfg.check, Some(CheckId::KernelBound));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.params.gamma1.as_deref(), Some(&[2.0][..]));
        for bad in ["colour = 1\n", "[params]\nalhpa = [1.0]\n", "[extras]\nx = 1\n", "check = \"nope\"\n"] {
            assert!(matches!(SweepConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn gamma_hypothesis_enforced() {
        let text = |g1: f64| format!("[params]\nalpha = [1.0]\ngamma0 = [0.0]\ngamma1 = [{g1:?}]\n");
        assert!(SweepConfig::from_toml_str(&text(4.0)).is_ok());
        assert!(SweepConfig::from_toml_str(&text(4.0 + 1e-9)).is_err());
        assert!(SweepConfig::from_toml_str(&text(-2.0)).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = SweepConfig::for_check(CheckId::Mc);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn check_ids_round_trip() {
        for c in CheckId::ALL {
            assert_eq!(c.as_str().parse::<CheckId>().unwrap(), c);
        }
        assert!("bogus".parse::<CheckId>().is_err());
    }
}
