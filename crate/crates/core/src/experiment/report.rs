use serde::{Deserialize, Serialize};

use crate::flow::BoundConstants;

use super::ExperimentConfig;

pub const REPORT_FILE: &str = "report.json";
/// Wall clock lives apart from the report so reports stay reproducible.
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Structurally correct but beyond a pilot-calibrated threshold.
    Drift,
}

/// One named check. `margin ≥ 1` passes; `None` when unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub margin: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub(crate) fn new(name: &str, status: Status, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status,
            margin: margin.is_finite().then_some(margin),
            detail: detail.into(),
        }
    }

    pub(crate) fn pass_if(name: &str, pass: bool, margin: f64, detail: impl Into<String>) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Self::new(name, status, margin, detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiyauRow {
    pub source: String,
    pub t: f64,
    pub sup_lhs: f64,
    pub classical_bound: f64,
    pub calibrated_c: f64,
    pub scaled_gap: f64,
    pub scaled_running_max: f64,
}

/// Max-norm identity residuals at one probe time; `relative` divides by the
/// largest term of each identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub source: String,
    pub points: usize,
    pub alpha: f64,
    pub t: f64,
    pub values: [f64; 4],
    pub relative: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackRow {
    pub query: usize,
    pub x1: usize,
    pub x2: usize,
    pub t1: f64,
    pub t2: f64,
    pub c12: f64,
    pub path_length: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub pass: bool,
}

/// A residual at one refinement level; `ratio` and `order` compare with the
/// next coarser level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub source: String,
    pub residual: String,
    pub alpha: f64,
    pub t: f64,
    pub level: usize,
    pub points: usize,
    pub dt: f64,
    pub value: f64,
    pub ratio: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub liyau: Vec<LiyauRow>,
    pub residuals: Vec<ResidualRow>,
    pub harnack: Vec<HarnackRow>,
    pub refinement: Vec<RefinementRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub name: String,
    /// sha256 of the canonical TOML echo below.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub grid: String,
    pub steps: usize,
    pub snapshots: usize,
    pub clamp_count: usize,
    pub min_u: f64,
    pub stability_bound: f64,
    /// Measured space-time suprema.
    pub bounds: BoundConstants<f64>,
    /// The suprema times the safety factor, as used by the monitors.
    pub bounds_used: BoundConstants<f64>,
    pub verdicts: Vec<Verdict>,
    /// CSV files written next to the report, relative to it.
    pub artifacts: Vec<String>,
    pub series: Series,
}

impl RunReport {
    pub fn count(&self, status: Status) -> usize {
        self.verdicts.iter().filter(|v| v.status == status).count()
    }

    /// No failed verdict; under `strict` no drift either.
    pub fn passed(&self, strict: bool) -> bool {
        self.count(Status::Fail) == 0 && (!strict || self.count(Status::Drift) == 0)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, super::ExperimentError> {
        serde_json::from_str(text).map_err(|e| super::ExperimentError::Parse(e.to_string()))
    }

    /// sha256 of [`RunReport::to_json`].
    pub fn digest(&self) -> String {
        super::runner::sha256_hex(self.to_json().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub checks: Vec<(String, f64)>,
}
