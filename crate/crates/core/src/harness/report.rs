//! Machine-readable run reports and per-path summary tables.

use std::io::Write;

use serde::Serialize;

use super::config::ScenarioConfig;
use crate::lawcheck::TestVerdict;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
}

impl EstimateRecord {
    pub fn plain(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            stderr: None,
            ess: None,
        }
    }

    pub fn with_stderr(name: &str, value: f64, stderr: f64) -> Self {
        Self {
            name: name.into(),
            value,
            stderr: Some(stderr),
            ess: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub pass: bool,
}

impl VerdictRecord {
    pub fn from_verdict(name: &str, v: &TestVerdict) -> Self {
        Self {
            name: name.into(),
            statistic: v.statistic,
            threshold: v.threshold,
            p_value: v.p_value,
            pass: v.pass,
        }
    }

    /// Verdict passing when `statistic <= threshold`.
    pub fn upper_bound(name: &str, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            p_value: None,
            pass: statistic <= threshold,
        }
    }

    /// Verdict passing when `statistic > threshold`.
    pub fn lower_bound(name: &str, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            p_value: None,
            pass: statistic > threshold,
        }
    }
}

/// Full record of one scenario run. Re-running with an identical config
/// reproduces identical estimates bit for bit; `duration_seconds` is the only
/// field excluded from that contract.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub estimates: Vec<EstimateRecord>,
    pub verdicts: Vec<VerdictRecord>,
    pub duration_seconds: f64,
    pub version: String,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per estimate and per verdict, for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {}\n", self.scenario));
        for e in &self.estimates {
            out.push_str(&format!("  est  {:<38} {:>15.8e}", e.name, e.value));
            if let Some(se) = e.stderr {
                out.push_str(&format!("  (se {se:.3e})"));
            }
            if let Some(ess) = e.ess {
                out.push_str(&format!("  (ess {ess:.1})"));
            }
            out.push('\n');
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "  {}  {:<38} statistic {:.6e} vs threshold {:.6e}",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.statistic,
                v.threshold,
            ));
            if let Some(p) = v.p_value {
                out.push_str(&format!("  (p {p:.4e})"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "  {} in {:.2}s\n",
            if self.all_pass() { "ALL PASS" } else { "FAILURES PRESENT" },
            self.duration_seconds
        ));
        out
    }
}

/// One per-path summary row of the optional CSV table.
#[derive(Debug, Clone, Copy)]
pub struct PathRecord {
    pub path_index: usize,
    pub terminal_value: f64,
    pub occupation_at_zero: Option<f64>,
    pub weight: Option<f64>,
}

/// Writes the per-path table; optional columns stay empty when not applicable.
pub fn write_csv<W: Write>(mut w: W, records: &[PathRecord]) -> std::io::Result<()> {
    writeln!(w, "path_index,terminal_value,occupation_at_zero,weight")?;
    for r in records {
        let occ = r
            .occupation_at_zero
            .map_or(String::new(), |v| format!("{v:.12e}"));
        let weight = r.weight.map_or(String::new(), |v| format!("{v:.12e}"));
        writeln!(w, "{},{:.12e},{},{}", r.path_index, r.terminal_value, occ, weight)?;
    }
    Ok(())
}
