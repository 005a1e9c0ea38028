use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::BoundConstants;
use crate::scalar::Real;
use crate::solver::SolutionHistory;

use super::{liyau_integrand, LiYauParams};

/// One sampled time of the gradient-estimate monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub t: f64,
    /// `sup_x (|∇f|² − α·fₜ − α·a·f − α·R)`.
    pub sup_lhs: f64,
    /// `αnp/(2t)·(1 − a·t)`.
    pub classical_bound: f64,
    /// `sup_lhs − classical_bound`.
    pub gap: f64,
    /// Running maximum of `gap`.
    pub calibrated_c: f64,
    /// `t·sup_lhs − αnp/2·(1 − a·t)`.
    pub scaled_gap: f64,
    /// Running maximum of `scaled_gap`.
    pub scaled_running_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorOptions {
    /// Rows start at `t_min_snapshots` snapshot spacings.
    pub t_min_snapshots: f64,
    /// Relative slack on the classical comparison.
    pub classical_tolerance: f64,
    /// Trailing fraction of the run over which the running max must settle.
    pub settle_fraction: f64,
    /// Allowed relative change of the running max over that fraction.
    pub settle_tolerance: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            t_min_snapshots: 5.0,
            classical_tolerance: 0.05,
            settle_fraction: 0.2,
            settle_tolerance: 0.01,
        }
    }
}

/// Pointwise comparison with the sharp bound; only issued when the run has
/// no curvature, flow, potential or nonlinearity and `α = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalVerdict {
    pub pass: bool,
    /// `min_t classical_bound·(1 + tol) / sup_lhs` over rows with positive LHS.
    pub margin: f64,
    pub worst_t: f64,
    pub tolerance: f64,
}

/// Boundedness and settling of `t·LHS − αnp/2·(1 − a·t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureVerdict {
    pub pass: bool,
    pub finite: bool,
    pub final_max: f64,
    pub settle_max: f64,
    /// `|final_max − settle_max| / |final_max|`.
    pub relative_change: f64,
    pub argmax_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub params: LiYauParams,
    pub rows: Vec<MonitorRow>,
    pub classical: Option<ClassicalVerdict>,
    pub structure: StructureVerdict,
}

fn classical_applies<T: Real>(bounds: &BoundConstants<T>, a: f64, params: &LiYauParams) -> bool {
    params.alpha == 1.0 && a == 0.0 && bounds.as_array().iter().all(|v| v.to_f64_lossy().abs() <= 1e-12)
}

/// Samples the estimate over every snapshot with `t ≥ t_min`.
pub fn liyau_monitor<T: Real>(
    hist: &SolutionHistory<T>,
    params: &LiYauParams,
    bounds: &BoundConstants<T>,
    options: &MonitorOptions,
) -> Result<MonitorReport> {
    params.validate()?;
    let a = hist.a().to_f64_lossy();
    let coef = params.leading_coefficient(hist.dim());
    let t_min = options.t_min_snapshots * hist.snapshot_dt().to_f64_lossy();
    let alpha = T::lit(params.alpha);
    let mut rows = Vec::new();
    let (mut running, mut scaled_running) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..hist.len() {
        let t = hist.time(i).to_f64_lossy();
        if t < t_min * (1.0 - 1e-12) || t <= 0.0 {
            continue;
        }
        let sup_lhs = liyau_integrand(hist, alpha, i).max().to_f64_lossy();
        let classical_bound = coef / t * (1.0 - a * t);
        let gap = sup_lhs - classical_bound;
        let scaled_gap = t * sup_lhs - coef * (1.0 - a * t);
        running = running.max(gap);
        scaled_running = scaled_running.max(scaled_gap);
        rows.push(MonitorRow {
            t,
            sup_lhs,
            classical_bound,
            gap,
            calibrated_c: running,
            scaled_gap,
            scaled_running_max: scaled_running,
        });
    }

    let classical = classical_applies(bounds, a, params).then(|| {
        let tol = options.classical_tolerance;
        let mut margin = f64::INFINITY;
        let mut worst_t = f64::NAN;
        for r in &rows {
            let limit = r.classical_bound * (1.0 + tol);
            let m = if r.sup_lhs > 0.0 {
                limit / r.sup_lhs
            } else {
                f64::INFINITY
            };
            if m < margin || !r.sup_lhs.is_finite() {
                margin = if r.sup_lhs.is_finite() { m } else { 0.0 };
                worst_t = r.t;
            }
        }
        ClassicalVerdict {
            pass: !rows.is_empty() && margin >= 1.0,
            margin,
            worst_t,
            tolerance: tol,
        }
    });

    Ok(MonitorReport {
        params: *params,
        structure: structure_verdict(&rows, options),
        classical,
        rows,
    })
}

fn structure_verdict(rows: &[MonitorRow], options: &MonitorOptions) -> StructureVerdict {
    let Some(last) = rows.last() else {
        return StructureVerdict {
            pass: false,
            finite: false,
            final_max: f64::NAN,
            settle_max: f64::NAN,
            relative_change: f64::NAN,
            argmax_t: f64::NAN,
        };
    };
    let finite = rows.iter().all(|r| r.scaled_gap.is_finite());
    let t_settle = last.t * (1.0 - options.settle_fraction);
    let settle_max = rows
        .iter()
        .take_while(|r| r.t <= t_settle * (1.0 + 1e-12))
        .last()
        .map_or(f64::NEG_INFINITY, |r| r.scaled_running_max);
    let final_max = last.scaled_running_max;
    let change = final_max - settle_max;
    let relative_change = if change == 0.0 {
        0.0
    } else {
        change.abs() / final_max.abs()
    };
    let argmax_t = rows
        .iter()
        .find(|r| r.scaled_gap == final_max)
        .map_or(f64::NAN, |r| r.t);
    StructureVerdict {
        pass: finite && relative_change < options.settle_tolerance,
        finite,
        final_max,
        settle_max,
        relative_change,
        argmax_t,
    }
}
