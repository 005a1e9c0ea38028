use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{geodesic_path, path_length};
use crate::scalar::Real;
use crate::solver::SolutionHistory;

use super::LiYauParams;

/// Relative slack in `LHS ≤ RHS·(1 + slack)`.
pub const HARNACK_SLACK: f64 = 1e-6;

/// Compare `u(x1, t1)` against `u(x2, t2)` along a grid path from `x2` to `x1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackQuery {
    pub x1: usize,
    pub x2: usize,
    pub t1: f64,
    pub t2: f64,
    /// Grid path `x2 → x1`; the shortest path at `t2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<usize>>,
}

impl HarnackQuery {
    pub fn new(x1: usize, x2: usize, t1: f64, t2: f64) -> Self {
        Self {
            x1,
            x2,
            t1,
            t2,
            path: None,
        }
    }

    pub fn validate(&self, grid_len: usize) -> Result<()> {
        if self.x1 >= grid_len || self.x2 >= grid_len {
            return Err(Error::InvalidParams(format!(
                "Harnack points ({}, {}) outside grid of {grid_len}",
                self.x1, self.x2
            )));
        }
        if !(self.t1 > 0.0 && self.t1 <= self.t2 && self.t2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Harnack times need 0 < t1 ≤ t2, got t1 = {}, t2 = {}",
                self.t1, self.t2
            )));
        }
        if let Some(path) = &self.path {
            if path.first() != Some(&self.x2) || path.last() != Some(&self.x1) {
                return Err(Error::InvalidParams("Harnack path must run from x2 to x1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackOutcome {
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// Largest length of the path over the snapshots in `[t1, t2]`.
    pub path_length: f64,
    pub path: Vec<usize>,
}

fn snapshot<T: Real>(hist: &SolutionHistory<T>, t: f64, label: &str) -> Result<usize> {
    hist.index_of_time(T::lit(t))
        .ok_or_else(|| Error::Domain(format!("{label} = {t} is not a snapshot time")))
}

/// Evaluates
/// `u(x1,t1) / u(x2,t2)^{e^{−a(t2−t1)}} ≤ (t2/t1)^{αn}·exp(αL²/(4(t2−t1)) + C12·(t2−t1))`.
pub fn harnack_check<T: Real>(
    hist: &SolutionHistory<T>,
    params: &LiYauParams,
    query: &HarnackQuery,
    c12: f64,
) -> Result<HarnackOutcome> {
    params.validate()?;
    let grid = *hist.u(0).grid();
    query.validate(grid.len())?;
    if !(c12 >= 0.0 && c12.is_finite()) {
        return Err(Error::InvalidParams(format!("C12 must be finite and ≥ 0, got {c12}")));
    }
    let i1 = snapshot(hist, query.t1, "t1")?;
    let i2 = snapshot(hist, query.t2, "t2")?;
    let path = match &query.path {
        Some(p) => p.clone(),
        None => geodesic_path(hist.metric(i2), query.x2, query.x1)?.1,
    };
    let mut length = 0.0f64;
    for j in i1..=i2 {
        length = length.max(path_length(hist.metric(j), &path)?.to_f64_lossy());
    }

    let (t1, t2) = (query.t1, query.t2);
    let a = hist.a().to_f64_lossy();
    let n = grid.dim() as f64;
    let u1 = hist.u(i1).get(query.x1).to_f64_lossy();
    let u2 = hist.u(i2).get(query.x2).to_f64_lossy();
    let log_lhs = u1.ln() - (-a * (t2 - t1)).exp() * u2.ln();
    let dt = t2 - t1;
    let transport = if dt > 0.0 {
        params.alpha * length * length / (4.0 * dt)
    } else if length == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let log_rhs = params.alpha * n * (t2 / t1).ln() + transport + c12 * dt;
    let pass = log_lhs <= log_rhs + HARNACK_SLACK.ln_1p();
    Ok(HarnackOutcome {
        pass,
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
        path_length: length,
        path,
    })
}
