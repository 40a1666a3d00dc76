//! End-to-end acceptance run: one line per criterion, each backed by the
//! verification check that owns it.
//!
//! Lines are written straight to stdout so they show up without
//! `--nocapture`. The test fails if any criterion fails or overruns its time
//! budget.

use std::io::Write;
use std::time::{Duration, Instant};

use fraclap::harness::{run_check, CheckId, Report, SweepConfig};

struct Criterion {
    number: u8,
    title: &'static str,
    check: CheckId,
    /// Report criteria that make up this acceptance criterion; empty means all.
    parts: &'static [&'static str],
    budget: Duration,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        number: 1,
        title: "kernel exactness",
        check: CheckId::KernelExactness,
        parts: &[],
        budget: Duration::from_secs(30),
    },
    Criterion {
        number: 2,
        title: "Getoor oracle chain",
        check: CheckId::Getoor,
        parts: &[],
        budget: Duration::from_secs(60),
    },
    Criterion {
        number: 3,
        title: "representation round trip",
        check: CheckId::Roundtrip,
        parts: &["roundtrip_accuracy"],
        budget: Duration::from_secs(120),
    },
    Criterion {
        number: 4,
        title: "boundary-decay sharpness",
        check: CheckId::Sharpness,
        parts: &["decay_fit", "stable_norms", "sharp_growth"],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 5,
        title: "lambda- and T-uniformity",
        check: CheckId::OperatorBound,
        parts: &[],
        budget: Duration::from_secs(600),
    },
    Criterion {
        number: 6,
        title: "kernel-integral estimates",
        check: CheckId::KernelBound,
        parts: &[],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 7,
        title: "Monte Carlo consistency",
        check: CheckId::Mc,
        parts: &["exit_time", "density_consistency", "envelope_spread"],
        budget: Duration::from_secs(600),
    },
    Criterion {
        number: 8,
        title: "parabolic weak solution",
        check: CheckId::Roundtrip,
        parts: &["manufactured_error", "weak_residual_rate"],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 9,
        title: "Hoelder and decay suite",
        check: CheckId::DecayHolder,
        parts: &[],
        budget: Duration::from_secs(300),
    },
    Criterion {
        number: 10,
        title: "determinism",
        check: CheckId::Determinism,
        parts: &[],
        budget: Duration::MAX,
    },
];

fn line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
    let _ = out.flush();
}

fn verdict(c: &Criterion, report: &Report, elapsed: Duration) -> (bool, String) {
    let selected: Vec<_> = report
        .criteria
        .iter()
        .filter(|k| c.parts.is_empty() || c.parts.contains(&k.name.as_str()))
        .collect();
    assert!(
        c.parts.is_empty() || selected.len() == c.parts.len(),
        "criterion {} names a part the {} report does not have",
        c.number,
        c.check
    );
    let in_budget = elapsed <= c.budget;
    let passed = in_budget && selected.iter().all(|k| k.passed);
    let budget = if c.budget == Duration::MAX {
        String::new()
    } else {
        format!(", limit {} s", c.budget.as_secs())
    };
    let mut msg = format!(
        "criterion {:>2} [{}] {} ({:.1} s{budget})",
        c.number,
        if passed { "PASS" } else { "FAIL" },
        c.title,
        elapsed.as_secs_f64()
    );
    if !in_budget {
        msg.push_str("\n      over the time limit");
    }
    for k in selected.iter().filter(|k| !k.passed) {
        msg.push_str(&format!("\n      {}: {}", k.name, k.detail));
        if let Some(label) = &k.offending {
            msg.push_str(&format!(" [first offending case: {}]", label));
        }
    }
    (passed, msg)
}

#[test]
fn acceptance() {
    let mut cache: Vec<(CheckId, Report, Duration)> = Vec::new();
    let mut failed = Vec::new();
    for c in &CRITERIA {
        if !cache.iter().any(|(id, ..)| *id == c.check) {
            let cfg = SweepConfig::for_check(c.check);
            let start = Instant::now();
            let report = run_check(c.check, &cfg).unwrap_or_else(|e| panic!("{} did not run: {e}", c.check));
            cache.push((c.check, report, start.elapsed()));
        }
        let (_, report, elapsed) = cache.iter().find(|(id, ..)| *id == c.check).expect("cached above");
        let (passed, msg) = verdict(c, report, *elapsed);
        line(&msg);
        if !passed {
            failed.push(c.number);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
