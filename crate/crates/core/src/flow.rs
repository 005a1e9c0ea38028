//! Conformal geometric flows `∂ₜg = 2h` and the bound constants that the
//! gradient estimates consume.
//!
//! Within the conformal family `g = e^{2φ}δ` a flow tensor must itself be
//! conformal, `h = ψ·g`, and then the flow reduces to `∂ₜφ = ψ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Error, Result};
use crate::field::{MetricField, ScalarField, TensorField};
use crate::generator::SpaceTimeField;
use crate::geometry::{self, relative_eigenvalues};
use crate::scalar::{seq_max, seq_min, Real};

/// Flows stop before `sup|φ|` exceeds this.
pub const PHI_GUARD: f64 = 10.0;

/// Relative eigenvalue spread of `h·g^{-1}` above which `h` is rejected.
pub const ANISOTROPY_TOLERANCE: f64 = 1e-12;

/// Safety factor applied to measured bound constants before monitors use them.
pub const BOUND_SAFETY: f64 = 1.05;

/// Source of the flow tensor `h(g, t)`.
pub trait TensorFlow<T: Real>: Send + Sync {
    fn tensor(&self, m: &MetricField<T>, t: T) -> Result<TensorField<T>>;

    /// `ψ` with `h = ψ·g`; errors when `h` is not conformal.
    fn rate(&self, m: &MetricField<T>, t: T) -> Result<ScalarField<T>> {
        conformal_rate(m, &self.tensor(m, t)?)
    }
}

impl<T: Real, F> TensorFlow<T> for F
where
    F: Fn(&MetricField<T>, T) -> Result<TensorField<T>> + Send + Sync,
{
    fn tensor(&self, m: &MetricField<T>, t: T) -> Result<TensorField<T>> {
        self(m, t)
    }
}

/// `h = ψ(x, t)·g`.
pub struct ConformalFlow<G> {
    pub rate: G,
}

impl<T: Real, G: SpaceTimeField<T>> TensorFlow<T> for ConformalFlow<G> {
    fn tensor(&self, m: &MetricField<T>, t: T) -> Result<TensorField<T>> {
        let psi = self.rate.sample(m.grid(), t);
        m.metric_tensor().scale_by(&psi)
    }

    fn rate(&self, m: &MetricField<T>, t: T) -> Result<ScalarField<T>> {
        Ok(self.rate.sample(m.grid(), t))
    }
}

#[derive(Clone)]
pub enum FlowKind<T> {
    Static,
    /// Ricci flow on a surface, `h = −Ric = −K·g`.
    RicciSurface,
    Prescribed(Arc<dyn TensorFlow<T>>),
}

impl<T: Real> FlowKind<T> {
    pub fn prescribed_conformal<G: SpaceTimeField<T> + 'static>(rate: G) -> Self {
        FlowKind::Prescribed(Arc::new(ConformalFlow { rate }))
    }

    pub fn is_static(&self) -> bool {
        matches!(self, FlowKind::Static)
    }

    pub fn label(&self) -> &'static str {
        match self {
            FlowKind::Static => "static",
            FlowKind::RicciSurface => "ricci_surface",
            FlowKind::Prescribed(_) => "prescribed",
        }
    }

    /// Flow tensor at metric `m`, time `t`.
    pub fn tensor(&self, m: &MetricField<T>, t: T) -> Result<TensorField<T>> {
        match self {
            FlowKind::Static => Ok(TensorField::zeros(*m.grid())),
            FlowKind::RicciSurface => Ok(ricci_flow_tensor(m)),
            FlowKind::Prescribed(flow) => flow.tensor(m, t),
        }
    }

    /// `ψ = ∂ₜφ` at metric `m`, time `t`.
    pub fn rate(&self, m: &MetricField<T>, t: T) -> Result<ScalarField<T>> {
        match self {
            FlowKind::Static => Ok(ScalarField::zeros(*m.grid())),
            // isotropic by construction: ψ = −K
            FlowKind::RicciSurface => Ok(geometry::gaussian_curvature(m).map(|k| -k)),
            FlowKind::Prescribed(flow) => flow.rate(m, t),
        }
    }

    /// Largest stable step for the metric alone; unbounded for flows whose
    /// rate does not depend on the metric's derivatives.
    pub fn stability_bound(&self, m: &MetricField<T>) -> f64 {
        match self {
            FlowKind::RicciSurface => {
                let h = m.grid().min_spacing();
                0.2 * h * h * (2.0 * m.phi().min().to_f64_lossy()).exp()
            }
            _ => f64::INFINITY,
        }
    }
}

impl<T> std::fmt::Debug for FlowKind<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowKind::Static => "Static",
            FlowKind::RicciSurface => "RicciSurface",
            FlowKind::Prescribed(_) => "Prescribed(..)",
        })
    }
}

/// A flow together with its time horizon and fixed step.
#[derive(Clone, Debug)]
pub struct FlowSpec<T> {
    pub kind: FlowKind<T>,
    pub t_end: T,
    pub dt: T,
}

impl<T: Real> FlowSpec<T> {
    pub fn new(kind: FlowKind<T>, t_end: T, dt: T) -> Result<Self> {
        step_count(t_end, dt)?;
        Ok(Self { kind, t_end, dt })
    }

    pub fn steps(&self) -> usize {
        step_count(self.t_end, self.dt).expect("validated at construction")
    }
}

/// Number of steps `t_end / dt`, which must be a positive integer.
pub fn step_count<T: Real>(t_end: T, dt: T) -> Result<usize> {
    let (t_end, dt) = (t_end.to_f64_lossy(), dt.to_f64_lossy());
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "t_end and dt must be positive, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let ratio = t_end / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
        return Err(Error::InvalidParams(format!(
            "t_end = {t_end} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// `h = −Ric = −K·g`; zero on the circle.
pub fn ricci_flow_tensor<T: Real>(m: &MetricField<T>) -> TensorField<T> {
    geometry::ricci(m).scale(-T::one())
}

/// Extracts `ψ` from `h = ψ·g`, rejecting non-conformal tensors.
pub fn conformal_rate<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> Result<ScalarField<T>> {
    let eig = relative_eigenvalues(m, h)?;
    let tol = T::lit(ANISOTROPY_TOLERANCE);
    let half = T::lit(0.5);
    let mut psi = Vec::with_capacity(eig.len());
    for (index, &(lo, hi)) in eig.iter().enumerate() {
        let scale = lo.abs().max(hi.abs());
        if hi - lo > tol * scale {
            return Err(Error::UnsupportedTensor {
                index,
                anisotropy: ((hi - lo) / scale).to_f64_lossy(),
            });
        }
        psi.push((lo + hi) * half);
    }
    ScalarField::new(*m.grid(), psi)
}

fn axpy<T: Real>(base: &ScalarField<T>, s: T, dir: &ScalarField<T>) -> ScalarField<T> {
    base.zip_map(dir, |a, b| a + s * b).expect("same grid")
}

/// One classical RK4 step of `∂ₜφ = ψ(φ, t)`, re-evaluating the flow at
/// every stage.
pub fn step_metric<T: Real>(m: &MetricField<T>, flow: &FlowKind<T>, t: T, dt: T) -> Result<MetricField<T>> {
    if flow.is_static() {
        return Ok(m.clone());
    }
    let half = T::lit(0.5);
    let phi = m.phi();
    let k1 = flow.rate(m, t)?;
    let k2 = flow.rate(&MetricField::new(axpy(phi, dt * half, &k1))?, t + dt * half)?;
    let k3 = flow.rate(&MetricField::new(axpy(phi, dt * half, &k2))?, t + dt * half)?;
    let k4 = flow.rate(&MetricField::new(axpy(phi, dt, &k3))?, t + dt)?;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let next = (0..phi.len())
        .map(|k| phi.get(k) + sixth * (k1.get(k) + two * k2.get(k) + two * k3.get(k) + k4.get(k)))
        .collect();
    MetricField::new(ScalarField::new(*m.grid(), next)?)
}

/// Integrates a metric-only flow, returning every step's `(t, metric)`.
pub fn evolve_metric<T: Real>(m0: &MetricField<T>, spec: &FlowSpec<T>) -> Result<Vec<(T, MetricField<T>)>> {
    let bound = spec.kind.stability_bound(m0);
    if spec.dt.to_f64_lossy() > bound {
        return Err(Error::Stability {
            dt: spec.dt.to_f64_lossy(),
            bound,
        });
    }
    let mut out = Vec::with_capacity(spec.steps() + 1);
    let mut m = m0.clone();
    out.push((T::zero(), m.clone()));
    for n in 0..spec.steps() {
        let t = T::from_usize(n).unwrap() * spec.dt;
        m = step_metric(&m, &spec.kind, t, spec.dt)?;
        guard_phi(&m, t + spec.dt)?;
        out.push((T::from_usize(n + 1).unwrap() * spec.dt, m.clone()));
    }
    Ok(out)
}

pub(crate) fn guard_phi<T: Real>(m: &MetricField<T>, t: T) -> Result<()> {
    let phi = m.phi();
    let guard = T::lit(PHI_GUARD);
    match phi.values().iter().position(|v| v.abs() > guard) {
        Some(index) => Err(Error::Blowup {
            index,
            time: t.to_f64_lossy(),
            what: format!("|φ| exceeded {PHI_GUARD}"),
        }),
        None => Ok(()),
    }
}

/// One space-time slice of a flow run: metric, flow tensor and potential.
#[derive(Clone, Debug)]
pub struct FlowSample<T> {
    pub t: T,
    pub metric: MetricField<T>,
    pub h: TensorField<T>,
    pub potential: ScalarField<T>,
}

/// Measured space-time suprema of curvature, flow tensor and potential.
///
/// `Ric ≥ −k1·g`, `−k2·g ≤ h ≤ k3·g`, `|∇h| ≤ k4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
    pub sup_r: T,
    pub sup_grad_r: T,
    pub sup_lap_r: T,
}

impl<T: Real> BoundConstants<T> {
    pub fn zero() -> Self {
        Self {
            k1: T::zero(),
            k2: T::zero(),
            k3: T::zero(),
            k4: T::zero(),
            sup_r: T::zero(),
            sup_grad_r: T::zero(),
            sup_lap_r: T::zero(),
        }
    }

    fn fields_mut(&mut self) -> [&mut T; 7] {
        [
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.sup_r,
            &mut self.sup_grad_r,
            &mut self.sup_lap_r,
        ]
    }

    pub fn as_array(&self) -> [T; 7] {
        [
            self.k1,
            self.k2,
            self.k3,
            self.k4,
            self.sup_r,
            self.sup_grad_r,
            self.sup_lap_r,
        ]
    }

    /// Elementwise maximum.
    pub fn join(mut self, other: &Self) -> Self {
        for (a, b) in self.fields_mut().into_iter().zip(other.as_array()) {
            *a = a.max(b);
        }
        self
    }

    /// Every constant multiplied by `factor`.
    pub fn with_safety(mut self, factor: T) -> Self {
        for a in self.fields_mut() {
            *a *= factor;
        }
        self
    }

    /// Bounds of a single slice.
    pub fn of_sample(s: &FlowSample<T>) -> Result<Self> {
        let m = &s.metric;
        ensure_same_grid(m.grid(), s.h.grid())?;
        ensure_same_grid(m.grid(), s.potential.grid())?;
        let zero = T::zero();
        let eig = relative_eigenvalues(m, &s.h)?;
        let curvature = geometry::gaussian_curvature(m);
        Ok(Self {
            k1: (-curvature.min()).max(zero),
            k2: (-seq_min(eig.iter().map(|e| e.0))).max(zero),
            k3: seq_max(eig.iter().map(|e| e.1)).max(zero),
            k4: geometry::covariant_derivative_norm(m, &s.h)?.max().max(zero),
            sup_r: s.potential.max_abs(),
            sup_grad_r: geometry::grad_norm_sq(m, &s.potential)?.max().max(zero).sqrt(),
            sup_lap_r: geometry::laplace_beltrami(m, &s.potential)?.max_abs(),
        })
    }
}

/// Space-time suprema over a flow history.
pub fn extract_bounds<T: Real>(history: &[FlowSample<T>]) -> Result<BoundConstants<T>> {
    let first = history.first().ok_or(Error::EmptyHistory)?;
    let grid = *first.metric.grid();
    history.iter().try_fold(BoundConstants::zero(), |acc, s| {
        ensure_same_grid(&grid, s.metric.grid())?;
        Ok(acc.join(&BoundConstants::of_sample(s)?))
    })
}

/// Result of checking uniform equivalence of two metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub pass: bool,
    /// `min_x min(ratio / lower, upper / ratio)`; ≥ 1 means strictly inside.
    pub margin: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
}

/// Checks `e^{−2·shrink·T} ≤ g(t)/g(0) ≤ e^{2·growth·T}` pointwise, for a flow
/// with `−shrink·g ≤ h ≤ growth·g`. The tolerance factor is
/// `1 + 10·dt⁴ + 1e−9`.
pub fn metric_equivalence_check<T: Real>(
    g0: &MetricField<T>,
    gt: &MetricField<T>,
    shrink: f64,
    growth: f64,
    horizon: f64,
    dt: f64,
) -> Result<EquivalenceVerdict> {
    ensure_same_grid(g0.grid(), gt.grid())?;
    let tolerance = 1.0 + 10.0 * dt.powi(4) + 1e-9;
    let lower = (-2.0 * shrink * horizon).exp();
    let upper = (2.0 * growth * horizon).exp();
    let ratios: Vec<f64> = g0
        .phi()
        .values()
        .iter()
        .zip(gt.phi().values())
        .map(|(&a, &b)| (2.0 * (b - a).to_f64_lossy()).exp())
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = (min_ratio / lower).min(upper / max_ratio);
    Ok(EquivalenceVerdict {
        pass: margin * tolerance >= 1.0,
        margin,
        min_ratio,
        max_ratio,
        lower,
        upper,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use crate::grid::ManifoldGrid;
    use std::f64::consts::PI;

    fn bump(grid: ManifoldGrid) -> MetricField<f64> {
        MetricField::new(ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin())).unwrap()
    }

    #[test]
    fn ricci_rate_matches_tensor_route() {
        let grid = ManifoldGrid::torus(16, 16).unwrap();
        let m = MetricField::new(ScalarField::from_fn(grid, |x| {
            0.1 * (2.0 * PI * x[0]).sin() + 0.05 * (2.0 * PI * x[1]).cos()
        }))
        .unwrap();
        let fast = FlowKind::<f64>::RicciSurface.rate(&m, 0.0).unwrap();
        let slow = conformal_rate(&m, &ricci_flow_tensor(&m)).unwrap();
        for k in 0..grid.len() {
            assert!((fast.get(k) - slow.get(k)).abs() <= 1e-12 * slow.get(k).abs().max(1.0));
        }
    }

    #[test]
    fn zero_flow_leaves_metric_bitwise() {
        let m = bump(ManifoldGrid::torus(16, 16).unwrap());
        let flow = FlowKind::prescribed_conformal(Generator::constant(0.0));
        let next = step_metric(&m, &flow, 0.0, 1e-3).unwrap();
        assert_eq!(next.phi().values(), m.phi().values());
        assert_eq!(step_metric(&m, &FlowKind::Static, 0.0, 1e-3).unwrap(), m);
    }

    #[test]
    fn constant_rate_is_exact() {
        let m = bump(ManifoldGrid::torus(16, 16).unwrap());
        let c = 0.05;
        let spec = FlowSpec::new(FlowKind::prescribed_conformal(Generator::constant(c)), 1.0, 0.01).unwrap();
        let run = evolve_metric(&m, &spec).unwrap();
        let (t, last) = run.last().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        for k in 0..m.grid().len() {
            assert!((last.phi().get(k) - m.phi().get(k) - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn flat_torus_is_ricci_fixed_point() {
        let m = MetricField::<f64>::flat(ManifoldGrid::torus(16, 16).unwrap());
        let next = step_metric(&m, &FlowKind::RicciSurface, 0.0, 1e-4).unwrap();
        assert_eq!(next, m);
        assert!(ricci_flow_tensor(&m).data().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn ricci_tensor_shrinks_positive_curvature() {
        let m = bump(ManifoldGrid::torus(32, 32).unwrap());
        let h = ricci_flow_tensor(&m);
        let k = geometry::gaussian_curvature(&m);
        let eig = relative_eigenvalues(&m, &h).unwrap();
        let tr = geometry::trace(&m, &h).unwrap();
        for (p, e) in eig.iter().enumerate() {
            if k.get(p) > 1e-9 {
                assert!(e.1 < 0.0);
            }
            assert!((tr.get(p) + 2.0 * k.get(p)).abs() < 1e-10);
            assert!((e.0 + k.get(p)).abs() < 1e-10);
        }
    }

    // dA/dt = −∫K dA = 0 on the torus.
    #[test]
    fn ricci_flow_preserves_torus_area() {
        let m = bump(ManifoldGrid::torus(32, 32).unwrap());
        let spec = FlowSpec::new(FlowKind::RicciSurface, 0.05, 1e-4).unwrap();
        let run = evolve_metric(&m, &spec).unwrap();
        let (_, last) = run.last().unwrap();
        let moved = last
            .phi()
            .values()
            .iter()
            .zip(m.phi().values())
            .any(|(a, b)| (a - b).abs() > 1e-4);
        assert!(moved);
        assert!((last.volume() - m.volume()).abs() <= 1e-10 * m.volume());
    }

    #[test]
    fn ricci_tensor_vanishes_on_circle() {
        let m = bump(ManifoldGrid::circle(32).unwrap());
        assert!(ricci_flow_tensor(&m).data().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn anisotropic_tensor_rejected() {
        let grid = ManifoldGrid::torus(8, 8).unwrap();
        let m = MetricField::<f64>::flat(grid);
        let flow: FlowKind<f64> = FlowKind::Prescribed(Arc::new(|m: &MetricField<f64>, _t: f64| {
            TensorField::new(*m.grid(), vec![[1.0, 0.0, 2.0]; m.grid().len()])
        }));
        assert!(matches!(
            step_metric(&m, &flow, 0.0, 1e-3),
            Err(Error::UnsupportedTensor { .. })
        ));
    }

    #[test]
    fn steps_must_divide() {
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(1.0, 0.25).unwrap(), 4);
        assert!(step_count(-1.0, 0.25).is_err());
    }

    #[test]
    fn ricci_flow_respects_stability_bound() {
        let m = bump(ManifoldGrid::torus(16, 16).unwrap());
        let spec = FlowSpec::new(FlowKind::RicciSurface, 0.1, 0.1).unwrap();
        assert!(matches!(evolve_metric(&m, &spec), Err(Error::Stability { .. })));
    }

    #[test]
    fn bounds_for_static_and_scaled_metric() {
        let grid = ManifoldGrid::torus(16, 16).unwrap();
        let flat = MetricField::<f64>::flat(grid);
        let s = FlowSample {
            t: 0.0,
            metric: flat.clone(),
            h: TensorField::zeros(grid),
            potential: ScalarField::zeros(grid),
        };
        assert_eq!(extract_bounds(&[s]).unwrap(), BoundConstants::zero());

        let m = bump(grid);
        let c = 0.3;
        let s = FlowSample {
            t: 0.0,
            metric: m.clone(),
            h: m.metric_tensor().scale(c),
            potential: ScalarField::zeros(grid),
        };
        let b = extract_bounds(&[s]).unwrap();
        assert_eq!(b.k2, 0.0);
        assert!((b.k3 - c).abs() < 1e-14);
        assert!(b.k4 < 1e-10);
        assert!(extract_bounds::<f64>(&[]).is_err());
    }

    #[test]
    fn equivalence_static_and_boundary() {
        let grid = ManifoldGrid::torus(8, 8).unwrap();
        let m = bump(grid);
        let v = metric_equivalence_check(&m, &m, 0.0, 0.0, 1.0, 1e-3).unwrap();
        assert!(v.pass);
        assert_eq!(v.margin, 1.0);

        let c = 0.05;
        let t = 2.0;
        let grown = MetricField::new(m.phi().map(|p| p + c * t)).unwrap();
        let v = metric_equivalence_check(&m, &grown, 0.0, c, t, 1e-2).unwrap();
        assert!(v.pass, "{v:?}");
        let v = metric_equivalence_check(&m, &grown, 0.0, c * 0.99, t, 1e-2).unwrap();
        assert!(!v.pass);
    }

    #[test]
    fn bounds_join_is_monotone() {
        let a = BoundConstants {
            k1: 1.0,
            ..BoundConstants::zero()
        };
        let b = BoundConstants {
            k3: 2.0,
            ..BoundConstants::zero()
        };
        let j = a.join(&b);
        assert_eq!((j.k1, j.k3), (1.0, 2.0));
        assert_eq!(j.with_safety(2.0).k3, 4.0);
    }
}
