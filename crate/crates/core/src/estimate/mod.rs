//! Li–Yau quantity, identity residual checks, gradient-estimate monitor and
//! Harnack inequality check over a [`SolutionHistory`].

mod harnack;
mod identities;
mod monitor;

pub use harnack::{harnack_check, HarnackOutcome, HarnackQuery, HARNACK_SLACK};
pub use identities::{bochner_residual, identity_residuals, IdentityResiduals, Residual};
pub use monitor::{liyau_monitor, ClassicalVerdict, MonitorOptions, MonitorReport, MonitorRow, StructureVerdict};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scalar::Real;
use crate::solver::SolutionHistory;

/// Tolerance on `1/p + 1/q = 1/α`.
pub const PQ_TOLERANCE: f64 = 1e-12;

/// Exponents of the estimate. `q` (or `p`) may be `+∞`, which is how the
/// `α = 1` case is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiYauParams {
    pub alpha: f64,
    #[serde(with = "extended_real")]
    pub p: f64,
    #[serde(with = "extended_real")]
    pub q: f64,
}

impl LiYauParams {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        let params = Self { alpha, p, q };
        params.validate()?;
        Ok(params)
    }

    /// `α = 1, p = 1, q = ∞`: the sharp classical setting.
    pub fn classical() -> Self {
        Self {
            alpha: 1.0,
            p: 1.0,
            q: f64::INFINITY,
        }
    }

    /// `p = q = 2α`.
    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new(alpha, 2.0 * alpha, 2.0 * alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "α must be finite and ≥ 1, got {}",
                self.alpha
            )));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let lhs = 1.0 / self.p + 1.0 / self.q;
        let rhs = 1.0 / self.alpha;
        if (lhs - rhs).abs() > PQ_TOLERANCE {
            return Err(Error::InvalidParams(format!(
                "constraint 1/p + 1/q = 1/α violated: 1/{} + 1/{} = {lhs} but 1/α = {rhs}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    /// True at the `α = 1` boundary, outside the strict `α > 1` regime.
    pub fn is_boundary(&self) -> bool {
        self.alpha == 1.0
    }

    /// Coefficient `αnp/2` of the `1/t` term.
    pub fn leading_coefficient(&self, dim: usize) -> f64 {
        self.alpha * dim as f64 * self.p / 2.0
    }
}

/// Serialises `±∞` as the strings `"inf"` / `"-inf"` so JSON round-trips.
mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            f64::INFINITY => s.serialize_str("inf"),
            f64::NEG_INFINITY => s.serialize_str("-inf"),
            x => s.serialize_f64(x),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// `|∇f|² − α·fₜ − α·R − α·a·f` at snapshot `idx` (no time weight).
pub fn liyau_integrand<T: Real>(hist: &SolutionHistory<T>, alpha: T, idx: usize) -> ScalarField<T> {
    let a = hist.a();
    let (g, ft, r, f) = (
        hist.grad_sq(idx),
        hist.log_u_t(idx),
        hist.potential(idx),
        hist.log_u(idx),
    );
    let values = (0..f.len())
        .map(|k| g.get(k) - alpha * (ft.get(k) + r.get(k) + a * f.get(k)))
        .collect();
    ScalarField::new(*f.grid(), values).expect("integrand has grid length")
}

/// `F = t·(|∇f|² − α·fₜ − α·R − α·a·f)`.
pub fn compute_f<T: Real>(hist: &SolutionHistory<T>, params: &LiYauParams, idx: usize) -> Result<ScalarField<T>> {
    params.validate()?;
    if idx >= hist.len() {
        return Err(Error::Domain(format!("snapshot index {idx} out of range")));
    }
    let t = hist.time(idx);
    if t <= T::zero() {
        return Err(Error::Domain(format!("F needs t > 0, snapshot {idx} is at t = {t}")));
    }
    Ok(scaled_integrand(hist, T::lit(params.alpha), idx))
}

/// `F` without the `t > 0` check (zero at `t = 0`).
pub(crate) fn scaled_integrand<T: Real>(hist: &SolutionHistory<T>, alpha: T, idx: usize) -> ScalarField<T> {
    let t = hist.time(idx);
    liyau_integrand(hist, alpha, idx).map(|v| t * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pq_relation() {
        assert!(LiYauParams::new(2.0, 4.0, 4.0).is_ok());
        assert!(LiYauParams::new(1.0, 1.0, f64::INFINITY).is_ok());
        assert!(LiYauParams::new(2.0, 3.0, 6.0).is_ok());
        let err = LiYauParams::new(2.0, 4.0, 5.0).unwrap_err().to_string();
        assert!(err.contains("1/p + 1/q = 1/α"), "{err}");
        assert!(LiYauParams::new(0.5, 1.0, 1.0).is_err());
        assert!(LiYauParams::new(2.0, -4.0, 1.0).is_err());
        assert_eq!(LiYauParams::symmetric(2.0).unwrap().leading_coefficient(2), 8.0);
        assert!(LiYauParams::classical().is_boundary());
    }

    #[test]
    fn infinite_exponent_round_trips() {
        let p = LiYauParams::classical();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<LiYauParams>(&s).unwrap(), p);
        let t: LiYauParams = toml::from_str("alpha = 1.0\np = 1.0\nq = inf\n").unwrap();
        assert_eq!(t, p);
    }
}
