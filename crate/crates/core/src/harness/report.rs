use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::config::{CheckId, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseFlag {
    Ok,
    Fail,
    /// Reported for information; never affects the verdict.
    Info,
}

impl CaseFlag {
    fn as_str(self) -> &'static str {
        match self {
            CaseFlag::Ok => "ok",
            CaseFlag::Fail => "fail",
            CaseFlag::Info => "info",
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub label: String,
    pub params: Vec<(String, f64)>,
    pub ratio: f64,
    pub flag: CaseFlag,
}

impl Case {
    pub fn new(label: impl Into<String>, params: &[(&str, f64)], ratio: f64, ok: bool) -> Self {
        Self {
            label: label.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ratio,
            flag: if ok && ratio.is_finite() { CaseFlag::Ok } else { CaseFlag::Fail },
        }
    }

    pub fn info(label: impl Into<String>, params: &[(&str, f64)], ratio: f64) -> Self {
        Self {
            flag: CaseFlag::Info,
            ..Self::new(label, params, ratio, true)
        }
    }

    fn describe(&self) -> String {
        let mut s = self.label.clone();
        for (k, v) in &self.params {
            let _ = write!(s, " {k}={v}");
        }
        let _ = write!(s, " ratio={:.6e}", self.ratio);
        s
    }
}

/// A named contract with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// The worst case when the contract fails.
    pub offending: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check_id: CheckId,
    pub seed: u64,
    pub config_hash: String,
    pub thresholds: BTreeMap<String, f64>,
    pub cases: Vec<Case>,
    pub fitted: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(check_id: CheckId, cfg: &SweepConfig) -> Self {
        Self {
            check_id,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            thresholds: BTreeMap::new(),
            cases: Vec::new(),
            fitted: BTreeMap::new(),
            criteria: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn threshold(&mut self, name: &str, value: f64) -> f64 {
        self.thresholds.insert(name.to_string(), value);
        value
    }

    pub fn fit(&mut self, name: impl Into<String>, value: f64) {
        self.fitted.insert(name.into(), value);
    }

    pub fn push(&mut self, case: Case) -> usize {
        self.cases.push(case);
        self.cases.len() - 1
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Adds a criterion; a failure names `offending` (an index into `cases`).
    pub fn criterion(&mut self, name: &str, passed: bool, detail: impl Into<String>, offending: Option<usize>) {
        let offending = if passed {
            None
        } else {
            offending.and_then(|i| self.cases.get(i)).map(Case::describe)
        };
        self.criteria.push(Criterion {
            name: name.to_string(),
            passed,
            detail: detail.into(),
            offending,
        });
    }

    /// Criterion over a set of cases: passes when every case is `Ok`.
    pub fn criterion_over(&mut self, name: &str, indices: &[usize], detail: impl Into<String>) {
        let bad = indices.iter().copied().find(|&i| self.cases[i].flag == CaseFlag::Fail);
        self.criterion(name, bad.is_none(), detail, bad);
    }

    pub fn criterion_named(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// True when every criterion holds and no counted case failed.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed) && self.cases.iter().all(|c| c.flag != CaseFlag::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// One row per case: `check_id, <params…>, ratio, flag`. Parameter columns
    /// are the union of keys in first-seen order; missing values stay empty.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&str> = Vec::new();
        for c in &self.cases {
            for (k, _) in &c.params {
                if !keys.contains(&k.as_str()) {
                    keys.push(k);
                }
            }
        }
        let mut s = String::from("check_id,case");
        for k in &keys {
            s.push(',');
            s.push_str(k);
        }
        s.push_str(",ratio,flag\n");
        for c in &self.cases {
            let _ = write!(s, "{},{}", self.check_id, c.label);
            for k in &keys {
                s.push(',');
                if let Some((_, v)) = c.params.iter().find(|(name, _)| name == k) {
                    let _ = write!(s, "{}", format_value(*v));
                }
            }
            let _ = writeln!(s, ",{},{}", format_value(c.ratio), c.flag.as_str());
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cases: Vec<_> = self
            .cases
            .iter()
            .map(|c| {
                let params: serde_json::Map<String, serde_json::Value> =
                    c.params.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect();
                json!({
                    "case": c.label,
                    "params": params,
                    "ratio": json_number(c.ratio),
                    "flag": c.flag,
                })
            })
            .collect();
        let fitted: serde_json::Map<String, serde_json::Value> =
            self.fitted.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect();
        json!({
            self.check_id.as_str(): {
                "passed": self.passed(),
                "seed": self.seed,
                "config_hash": self.config_hash,
                "thresholds": self.thresholds,
                "fitted": fitted,
                "criteria": self.criteria,
                "notes": self.notes,
                "n_cases": self.cases.len(),
                "cases": cases,
            }
        })
    }
}

fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        format!("{v}")
    }
}

/// Non-finite numbers become strings so that they stay visible in JSON.
fn json_number(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `<check_id>.csv` and `<check_id>.json` into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let csv = dir.join(format!("{}.csv", report.check_id));
    let js = dir.join(format!("{}.json", report.check_id));
    write_file(&csv, &report.to_csv())?;
    let text = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    write_file(&js, &(text + "\n"))?;
    Ok(vec![csv, js])
}
