use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{self as geo};
use crate::scalar::Real;
use crate::solver::{time_derivative, SolutionHistory};

use super::scaled_integrand;

/// Max-norm of an identity residual next to the max-norm of its largest
/// individual term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual<T> {
    pub value: T,
    pub scale: T,
}

impl<T: Real> Residual<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.value / self.scale
        } else {
            self.value
        }
    }
}

/// Accumulates `Σ cᵢ·Xᵢ` pointwise, tracking the largest `|cᵢ·Xᵢ|`.
struct Combination<T> {
    sum: Vec<T>,
    scale: T,
}

impl<T: Real> Combination<T> {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![T::zero(); n],
            scale: T::zero(),
        }
    }

    fn add(&mut self, coef: T, x: &ScalarField<T>) -> &mut Self {
        let mut peak = T::zero();
        for (s, &v) in self.sum.iter_mut().zip(x.values()) {
            let term = coef * v;
            *s += term;
            peak = peak.max(term.abs());
        }
        self.scale = self.scale.max(peak);
        self
    }

    fn finish(&self) -> Residual<T> {
        Residual {
            value: self.sum.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            scale: self.scale,
        }
    }
}

/// Residuals of the evolution and Bochner identities at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals<T> {
    pub index: usize,
    pub t: T,
    /// `(|∇f|²)ₜ = −2h(∇f,∇f) + 2⟨∇f, ∇fₜ⟩`.
    pub gradient_evolution: Residual<T>,
    /// `(Δf)ₜ = Δfₜ − 2⟨h, ∇²f⟩ − 2⟨div h, ∇f⟩ + ⟨∇H, ∇f⟩`.
    pub laplacian_evolution: Residual<T>,
    /// `Δ|∇f|² = 2|∇²f|² + 2⟨∇f, ∇Δf⟩ + 2Ric(∇f,∇f)`.
    pub bochner: Residual<T>,
    /// `ΔF − Fₜ` from `F` snapshots against the assembled right-hand side.
    pub exact: Residual<T>,
}

impl<T: Real> IdentityResiduals<T> {
    pub fn values(&self) -> [T; 4] {
        [
            self.gradient_evolution.value,
            self.laplacian_evolution.value,
            self.bochner.value,
            self.exact.value,
        ]
    }

    pub fn all(&self) -> [Residual<T>; 4] {
        [
            self.gradient_evolution,
            self.laplacian_evolution,
            self.bochner,
            self.exact,
        ]
    }
}

/// Bochner residual for an arbitrary function on a fixed metric.
pub fn bochner_residual<T: Real>(m: &crate::field::MetricField<T>, f: &ScalarField<T>) -> Result<Residual<T>> {
    let df = geo::differential(f);
    let g = geo::grad_norm_sq(m, f)?;
    let lap = geo::laplace_beltrami(m, f)?;
    let hess = geo::hessian(m, f)?;
    let two = T::lit(2.0);
    let mut c = Combination::new(f.len());
    c.add(T::one(), &geo::laplace_beltrami(m, &g)?)
        .add(-two, &geo::tensor_norm_sq(m, &hess)?)
        .add(-two, &geo::dot(m, &df, &geo::differential(&lap))?)
        .add(-two, &geo::tensor_on_covector(m, &geo::ricci(m), &df)?);
    Ok(c.finish())
}

/// Evaluates all four identities at snapshot `idx`; `alpha` enters only the
/// exact identity.
///
/// Time derivatives come from central differences of the snapshot sequence,
/// so `idx` needs two snapshots on either side and `t > 0`.
pub fn identity_residuals<T: Real>(hist: &SolutionHistory<T>, idx: usize, alpha: T) -> Result<IdentityResiduals<T>> {
    let n = hist.len();
    if idx < 2 || idx + 2 >= n {
        return Err(Error::Domain(format!(
            "identity residuals need two snapshots on each side; index {idx} of {n}"
        )));
    }
    let t = hist.time(idx);
    if t <= T::zero() {
        return Err(Error::Domain(format!("identity residuals need t > 0, got {t}")));
    }
    let (one, two) = (T::one(), T::lit(2.0));
    let a = hist.a();
    let ds = hist.snapshot_dt();
    let len = hist.u(idx).len();
    let m = hist.metric(idx);
    let f = hist.log_u(idx);
    let ft = hist.log_u_t(idx);
    let g = hist.grad_sq(idx);
    let lap = hist.lap_log_u(idx);
    let h = hist.flow_tensor(idx);
    let r = hist.potential(idx);

    let df = geo::differential(f);
    let hess = geo::hessian(m, f)?;
    let h_df_df = geo::tensor_on_covector(m, h, &df)?;
    let h_hess = geo::tensor_inner(m, h, &hess)?;
    let div_h_df = geo::dot(m, &geo::div_tensor(m, h)?, &df)?;
    let dh_df = geo::dot(m, &geo::differential(&geo::trace(m, h)?), &df)?;
    let ric_df_df = geo::tensor_on_covector(m, &geo::ricci(m), &df)?;
    let hess_sq = geo::tensor_norm_sq(m, &hess)?;

    let gradient_evolution = Combination::new(len)
        .add(one, &time_derivative(hist.grad_sq_series(), ds, idx)?)
        .add(two, &h_df_df)
        .add(-two, &geo::dot(m, &df, &geo::differential(ft))?)
        .finish();

    let laplacian_evolution = Combination::new(len)
        .add(one, &time_derivative(hist.lap_log_u_series(), ds, idx)?)
        .add(-one, &geo::laplace_beltrami(m, ft)?)
        .add(two, &h_hess)
        .add(two, &div_h_df)
        .add(-one, &dh_df)
        .finish();

    let bochner = Combination::new(len)
        .add(one, &geo::laplace_beltrami(m, g)?)
        .add(-two, &hess_sq)
        .add(-two, &geo::dot(m, &df, &geo::differential(lap))?)
        .add(-two, &ric_df_df)
        .finish();

    // F on the five-point window around idx
    let window: Vec<ScalarField<T>> = (idx - 2..=idx + 2).map(|j| scaled_integrand(hist, alpha, j)).collect();
    let big_f = &window[2];
    let big_f_t = time_derivative(&window, ds, 2)?;
    let df_dbig_f = geo::dot(m, &df, &geo::differential(big_f))?;
    let df_dr = geo::dot(m, &df, &geo::differential(r))?;
    let lap_r = geo::laplace_beltrami(m, r)?;
    let am1 = alpha - one;
    let exact = Combination::new(len)
        .add(one, &geo::laplace_beltrami(m, big_f)?)
        .add(-one, &big_f_t)
        .add(two, &df_dbig_f)
        .add(one / t - a, big_f)
        .add(-two * t, &hess_sq)
        .add(two * alpha * t, &h_hess)
        .add(two * am1 * t, &h_df_df)
        .add(two * am1 * t, &df_dr)
        .add(am1 * a * t, g)
        .add(-two * t, &ric_df_df)
        .add(two * alpha * t, &div_h_df)
        .add(-alpha * t, &dh_df)
        .add(alpha * t, &lap_r)
        .finish();

    Ok(IdentityResiduals {
        index: idx,
        t,
        gradient_evolution,
        laplacian_evolution,
        bochner,
        exact,
    })
}
