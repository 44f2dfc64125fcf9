use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

/// One verdict with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes iff `measured ≤ tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: measured <= tolerance,
            measured,
            tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub info: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checks: vec![],
            info: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("report: {}\n", self.name);
        for c in &self.checks {
            let _ = write!(
                out,
                "  {} {:<24} measured {:.3e} tolerance {:.3e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
            if let Some(d) = &c.detail {
                let _ = write!(out, " ({d})");
            }
            out.push('\n');
        }
        for (k, v) in &self.info {
            let _ = writeln!(out, "  {k}: {v}");
        }
        for (k, v) in &self.timings_ms {
            let _ = writeln!(out, "  time {k}: {v:.1} ms");
        }
        let _ = writeln!(out, "overall: {}", if self.all_pass() { "PASS" } else { "FAIL" });
        out
    }
}
