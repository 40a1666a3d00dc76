use std::f64::consts::PI;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

/// A named profile on `(-1, 1)`, vanishing outside.
#[derive(Clone, Copy)]
pub struct BankProfile {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    /// Support endpoints, where the profile is flat but not analytic.
    pub breaks: &'static [f64],
}

impl BankProfile {
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (self.f)(x)
        }
    }
}

/// `exp(1 - 1/(1-s²))` with `s = (x-c)/w`: a unit-height `C_c^∞` bump.
pub fn bump(c: f64, w: f64, x: f64) -> f64 {
    let s = (x - c) / w;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

const PROFILES: [BankProfile; 10] = [
    BankProfile { name: "bump_left_narrow", f: |x| bump(-0.5, 0.2, x), breaks: &[-0.7, -0.3] },
    BankProfile { name: "bump_center_narrow", f: |x| bump(0.0, 0.2, x), breaks: &[-0.2, 0.2] },
    BankProfile { name: "bump_right_narrow", f: |x| bump(0.5, 0.2, x), breaks: &[0.3, 0.7] },
    BankProfile { name: "bump_left_wide", f: |x| bump(-0.5, 0.4, x), breaks: &[-0.9, -0.1] },
    BankProfile { name: "bump_center_wide", f: |x| bump(0.0, 0.4, x), breaks: &[-0.4, 0.4] },
    BankProfile { name: "bump_right_wide", f: |x| bump(0.5, 0.4, x), breaks: &[0.1, 0.9] },
    BankProfile { name: "even_pair", f: |x| bump(-0.5, 0.3, x) + bump(0.5, 0.3, x), breaks: &[-0.8, -0.2, 0.2, 0.8] },
    BankProfile { name: "odd_pair", f: |x| bump(-0.5, 0.3, x) - bump(0.5, 0.3, x), breaks: &[-0.8, -0.2, 0.2, 0.8] },
    BankProfile { name: "boundary_weighted", f: |x| (1.0 - x.abs()).powf(0.3) * bump(0.75, 0.24, x), breaks: &[0.51, 0.99] },
    BankProfile { name: "oscillatory", f: |x| (6.0 * PI * x).sin() * bump(0.0, 0.8, x), breaks: &[-0.8, 0.8] },
];

/// The ten profiles used by the operator sweeps.
pub fn function_bank() -> &'static [BankProfile] {
    &PROFILES
}

/// SHA-256 over the bank sampled at 129 equispaced points of `[-1, 1]`.
pub fn bank_checksum() -> String {
    let mut text = String::new();
    for p in function_bank() {
        text.push_str(p.name);
        for k in 0..=128 {
            let x = -1.0 + 2.0 * k as f64 / 128.0;
            let _ = write!(text, ",{:.15e}", p.eval(x));
        }
        text.push('\n');
    }
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub const BANK_CHECKSUM: &str = "9f5b4a43b7d25afb31bd6dcd76811ba6e8431f333d3768ae3b0c7ed79ad6eacd";
