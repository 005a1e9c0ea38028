//! Positivity-preserving explicit solver for
//! `(∂ₜ − Δ_g(t) + R)u = −a·u·log u` coupled to a conformal metric flow.

use std::sync::Arc;

use crate::error::{ensure_same_grid, Error, Result};
use crate::field::{MetricField, ScalarField, TensorField};
use crate::flow::{guard_phi, step_count, FlowKind, FlowSample};
use crate::generator::SpaceTimeField;
use crate::geometry::{self, LaplaceBeltrami};
use crate::scalar::Real;

/// Solutions are clamped from below at this value so `log u` stays finite.
pub const U_FLOOR: f64 = 1e-12;

/// Diffusive step bound `0.2·h²·e^{2 min φ} / (2d)`.
pub fn diffusion_stability_bound<T: Real>(m: &MetricField<T>) -> f64 {
    let h = m.grid().min_spacing();
    let d = m.dim() as f64;
    0.2 * h * h * (2.0 * m.phi().min().to_f64_lossy()).exp() / (2.0 * d)
}

#[derive(Clone)]
pub struct PdeProblem<T> {
    /// Coefficient of the `u·log u` nonlinearity.
    pub a: T,
    pub potential: Arc<dyn SpaceTimeField<T>>,
    pub u0: ScalarField<T>,
    pub metric0: MetricField<T>,
    pub flow: FlowKind<T>,
    pub t_end: T,
    pub dt: T,
    /// A snapshot is recorded every this many steps (and at `t = 0`).
    pub snapshot_every: usize,
}

impl<T: Real> PdeProblem<T> {
    /// Combined step bound of the heat part and the metric flow.
    pub fn stability_bound(&self) -> f64 {
        diffusion_stability_bound(&self.metric0).min(self.flow.stability_bound(&self.metric0))
    }

    /// Checks the problem invariants and returns the number of steps.
    pub fn validate(&self) -> Result<usize> {
        ensure_same_grid(self.u0.grid(), self.metric0.grid())?;
        self.u0.ensure_finite("u0")?;
        let floor = T::lit(U_FLOOR);
        if let Some(k) = self.u0.values().iter().position(|&v| v < floor) {
            return Err(Error::InvalidParams(format!(
                "u0 must be ≥ {U_FLOOR} everywhere; grid point {k} has {}",
                self.u0.get(k)
            )));
        }
        if !self.a.is_finite() {
            return Err(Error::InvalidParams("a must be finite".into()));
        }
        let steps = step_count(self.t_end, self.dt)?;
        let bound = self.stability_bound();
        if self.dt.to_f64_lossy() > bound {
            return Err(Error::Stability {
                dt: self.dt.to_f64_lossy(),
                bound,
            });
        }
        if self.snapshot_every == 0 || steps % self.snapshot_every != 0 {
            return Err(Error::InvalidParams(format!(
                "snapshot_every = {} must divide the step count {steps}",
                self.snapshot_every
            )));
        }
        if steps / self.snapshot_every < 4 {
            return Err(Error::InvalidParams(
                "at least 5 snapshots are needed for time differences".into(),
            ));
        }
        Ok(steps)
    }
}

fn reaction<T: Real>(u: T, r: T, a: T, floor: T) -> T {
    let log_term = if a == T::zero() {
        T::zero()
    } else {
        a * u * u.max(floor).ln()
    };
    -r * u - log_term
}

fn first_non_finite<T: Real>(v: &[T]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

fn blowup(index: usize, time: f64, what: &str) -> Error {
    Error::Blowup {
        index,
        time,
        what: what.to_string(),
    }
}

/// Clamps at the floor in place, returning how many points were raised.
fn clamp_floor<T: Real>(u: &mut [T]) -> usize {
    let floor = T::lit(U_FLOOR);
    let mut count = 0;
    for v in u.iter_mut() {
        if *v < floor {
            *v = floor;
            count += 1;
        }
    }
    count
}

/// One RK4 step of `u' = Δ_g u − R·u − a·u·log u` with frozen metric and
/// potential. Returns the new field and the number of clamped points.
pub fn step_u<T: Real>(
    u: &ScalarField<T>,
    m: &MetricField<T>,
    r: &ScalarField<T>,
    a: T,
    dt: T,
) -> Result<(ScalarField<T>, usize)> {
    ensure_same_grid(u.grid(), m.grid())?;
    ensure_same_grid(u.grid(), r.grid())?;
    let lap = LaplaceBeltrami::new(m);
    let floor = T::lit(U_FLOOR);
    let n = u.len();
    let rhs = |v: &[T], out: &mut [T]| {
        lap.apply_into(v, out);
        for k in 0..n {
            out[k] += reaction(v[k], r.get(k), a, floor);
        }
    };
    let mut next = rk4_combine(u.values(), dt, |v, out| {
        rhs(v, out);
        first_non_finite(out).map_or(Ok(()), |k| Err(blowup(k, 0.0, "non-finite stage value")))
    })?;
    let clamped = clamp_floor(&mut next);
    Ok((ScalarField::new(*u.grid(), next)?, clamped))
}

/// Classical RK4 for an autonomous right-hand side on a flat vector.
fn rk4_combine<T: Real>(y: &[T], dt: T, mut f: impl FnMut(&[T], &mut [T]) -> Result<()>) -> Result<Vec<T>> {
    let n = y.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    );
    let mut stage = vec![T::zero(); n];
    f(y, &mut k1)?;
    for i in 0..n {
        stage[i] = y[i] + half * dt * k1[i];
    }
    f(&stage, &mut k2)?;
    for i in 0..n {
        stage[i] = y[i] + half * dt * k2[i];
    }
    f(&stage, &mut k3)?;
    for i in 0..n {
        stage[i] = y[i] + dt * k3[i];
    }
    f(&stage, &mut k4)?;
    let sixth = dt / T::lit(6.0);
    Ok((0..n)
        .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

/// Right-hand side of the coupled `(φ, u)` system.
struct Coupled<'a, T: Real> {
    problem: &'a PdeProblem<T>,
    frozen_lap: Option<LaplaceBeltrami<T>>,
    frozen_r: Option<ScalarField<T>>,
}

impl<'a, T: Real> Coupled<'a, T> {
    fn new(problem: &'a PdeProblem<T>) -> Self {
        let grid = *problem.u0.grid();
        Self {
            problem,
            frozen_lap: problem.flow.is_static().then(|| LaplaceBeltrami::new(&problem.metric0)),
            frozen_r: problem
                .potential
                .is_stationary()
                .then(|| problem.potential.sample(&grid, T::zero())),
        }
    }

    fn potential(&self, t: T) -> ScalarField<T> {
        match &self.frozen_r {
            Some(r) => r.clone(),
            None => self.problem.potential.sample(self.problem.u0.grid(), t),
        }
    }

    /// Writes `(dφ, du)` at stage state `(phi, u)`, time `t`.
    fn eval(&self, phi: &[T], u: &[T], t: T, dphi: &mut [T], du: &mut [T]) -> Result<()> {
        let grid = *self.problem.u0.grid();
        let floor = T::lit(U_FLOOR);
        let a = self.problem.a;
        let r = self.potential(t);
        let time = t.to_f64_lossy();
        match &self.frozen_lap {
            Some(lap) => {
                dphi.iter_mut().for_each(|v| *v = T::zero());
                lap.apply_into(u, du);
            }
            None => {
                let m = MetricField::new(ScalarField::new(grid, phi.to_vec())?)
                    .map_err(|_| blowup(first_non_finite(phi).unwrap_or(0), time, "non-finite φ"))?;
                let rate = self.problem.flow.rate(&m, t)?;
                dphi.copy_from_slice(rate.values());
                LaplaceBeltrami::new(&m).apply_into(u, du);
            }
        }
        for k in 0..u.len() {
            du[k] += reaction(u[k], r.get(k), a, floor);
        }
        if let Some(k) = first_non_finite(du) {
            return Err(blowup(k, time, "non-finite u stage value"));
        }
        if let Some(k) = first_non_finite(dphi) {
            return Err(blowup(k, time, "non-finite φ stage value"));
        }
        Ok(())
    }

    fn step(&self, phi: &[T], u: &[T], t: T, dt: T) -> Result<(Vec<T>, Vec<T>)> {
        let n = u.len();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let z = || vec![T::zero(); n];
        let (mut p1, mut p2, mut p3, mut p4) = (z(), z(), z(), z());
        let (mut u1, mut u2, mut u3, mut u4) = (z(), z(), z(), z());
        let (mut sp, mut su) = (z(), z());
        self.eval(phi, u, t, &mut p1, &mut u1)?;
        for k in 0..n {
            sp[k] = phi[k] + half * dt * p1[k];
            su[k] = u[k] + half * dt * u1[k];
        }
        self.eval(&sp, &su, t + half * dt, &mut p2, &mut u2)?;
        for k in 0..n {
            sp[k] = phi[k] + half * dt * p2[k];
            su[k] = u[k] + half * dt * u2[k];
        }
        self.eval(&sp, &su, t + half * dt, &mut p3, &mut u3)?;
        for k in 0..n {
            sp[k] = phi[k] + dt * p3[k];
            su[k] = u[k] + dt * u3[k];
        }
        self.eval(&sp, &su, t + dt, &mut p4, &mut u4)?;
        let sixth = dt / T::lit(6.0);
        let phi_next = (0..n)
            .map(|k| phi[k] + sixth * (p1[k] + two * p2[k] + two * p3[k] + p4[k]))
            .collect();
        let u_next = (0..n)
            .map(|k| u[k] + sixth * (u1[k] + two * u2[k] + two * u3[k] + u4[k]))
            .collect();
        Ok((phi_next, u_next))
    }
}

/// Short uniformly spaced snapshot windows recorded during a solve, centred
/// on `times`, `2·half_width + 1` snapshots each, `stride` steps apart.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbePlan {
    pub times: Vec<f64>,
    pub stride: usize,
    pub half_width: usize,
}

impl ProbePlan {
    /// Smallest half width that leaves central differences for `f`, `fₜ`
    /// and `F` at the window centre.
    pub const MIN_HALF_WIDTH: usize = 4;

    pub fn new(times: Vec<f64>, stride: usize) -> Self {
        Self {
            times,
            stride,
            half_width: Self::MIN_HALF_WIDTH,
        }
    }

    /// Centre step of every window; fails unless every time is a step
    /// multiple whose window fits inside `steps`.
    pub fn centres(&self, dt: f64, steps: usize) -> Result<Vec<usize>> {
        if self.times.is_empty() {
            return Ok(Vec::new());
        }
        if self.stride == 0 || self.half_width < Self::MIN_HALF_WIDTH {
            return Err(Error::InvalidParams(format!(
                "probe windows need stride ≥ 1 and half width ≥ {}",
                Self::MIN_HALF_WIDTH
            )));
        }
        let reach = self.stride * self.half_width;
        self.times
            .iter()
            .map(|&t| {
                let c = (t / dt).round();
                if (c * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
                    return Err(Error::InvalidParams(format!(
                        "probe time {t} is not a multiple of dt = {dt}"
                    )));
                }
                let c = c as usize;
                if c < reach || c + reach > steps {
                    return Err(Error::InvalidParams(format!(
                        "probe window around t = {t} does not fit inside the run"
                    )));
                }
                Ok(c)
            })
            .collect()
    }
}

/// Snapshot buffer of one history.
struct Recorder<T> {
    times: Vec<T>,
    u: Vec<Vec<T>>,
    phi: Vec<Vec<T>>,
}

impl<T: Real> Recorder<T> {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            u: Vec::new(),
            phi: Vec::new(),
        }
    }

    fn push(&mut self, t: T, phi: &[T], u: &[T]) {
        self.times.push(t);
        self.u.push(u.to_vec());
        self.phi.push(phi.to_vec());
    }

    fn finish(self, problem: &PdeProblem<T>, stepper: &Coupled<'_, T>) -> Result<SolutionHistory<T>> {
        let grid = *problem.u0.grid();
        let u = self
            .u
            .into_iter()
            .map(|v| ScalarField::new(grid, v))
            .collect::<Result<Vec<_>>>()?;
        let metrics = self
            .phi
            .into_iter()
            .map(|v| MetricField::new(ScalarField::new(grid, v)?))
            .collect::<Result<Vec<_>>>()?;
        let potential = self.times.iter().map(|&t| stepper.potential(t)).collect();
        let flow_tensors = metrics
            .iter()
            .zip(&self.times)
            .map(|(m, &t)| problem.flow.tensor(m, t))
            .collect::<Result<Vec<_>>>()?;
        SolutionHistory::from_snapshots(problem.a, problem.dt, self.times, u, metrics, potential, flow_tensors)
    }
}

/// Co-evolves metric and solution, recording snapshots every
/// `snapshot_every` steps.
pub fn solve<T: Real>(problem: &PdeProblem<T>) -> Result<SolutionHistory<T>> {
    Ok(solve_with_probes(problem, &ProbePlan::default())?.0)
}

/// As [`solve`], additionally returning one short history per probe window.
pub fn solve_with_probes<T: Real>(
    problem: &PdeProblem<T>,
    plan: &ProbePlan,
) -> Result<(SolutionHistory<T>, Vec<SolutionHistory<T>>)> {
    let steps = problem.validate()?;
    let centres = plan.centres(problem.dt.to_f64_lossy(), steps)?;
    let reach = (plan.stride * plan.half_width) as isize;
    let in_window = |n: usize, c: usize| {
        let off = n as isize - c as isize;
        off.abs() <= reach && off % plan.stride as isize == 0
    };
    let grid = *problem.u0.grid();
    let stepper = Coupled::new(problem);
    let dt = problem.dt;
    let time_of = |n: usize| T::from_usize(n).unwrap() * dt;
    let mut phi = problem.metric0.phi().values().to_vec();
    let mut u = problem.u0.values().to_vec();
    let mut clamped = 0;

    let mut main = Recorder::new();
    let mut probes: Vec<Recorder<T>> = centres.iter().map(|_| Recorder::new()).collect();
    let mut record = |n: usize, phi: &[T], u: &[T]| {
        if n.is_multiple_of(problem.snapshot_every) {
            main.push(time_of(n), phi, u);
        }
        for (rec, &c) in probes.iter_mut().zip(&centres) {
            if in_window(n, c) {
                rec.push(time_of(n), phi, u);
            }
        }
    };
    record(0, &phi, &u);
    for n in 0..steps {
        let t = time_of(n);
        let (phi_next, mut u_next) = stepper.step(&phi, &u, t, dt)?;
        clamped += clamp_floor(&mut u_next);
        phi = phi_next;
        u = u_next;
        if !problem.flow.is_static() {
            guard_phi(&MetricField::new(ScalarField::new(grid, phi.clone())?)?, t + dt)?;
        }
        record(n + 1, &phi, &u);
    }

    let mut history = main.finish(problem, &stepper)?;
    history.clamp_count = clamped;
    history.steps = steps;
    let windows = probes
        .into_iter()
        .map(|rec| rec.finish(problem, &stepper))
        .collect::<Result<Vec<_>>>()?;
    Ok((history, windows))
}

/// Fourth-order time derivative of a uniformly spaced field sequence at
/// `idx`: central in the interior, one-sided within two samples of an end.
pub fn time_derivative<T: Real>(series: &[ScalarField<T>], spacing: T, idx: usize) -> Result<ScalarField<T>> {
    let n = series.len();
    if n < 5 {
        return Err(Error::Domain(format!(
            "time differences need at least 5 snapshots, got {n}"
        )));
    }
    if idx >= n {
        return Err(Error::Domain(format!("snapshot index {idx} out of range")));
    }
    let c = |x: f64| T::lit(x);
    let (base, weights, sign): (usize, [T; 5], T) = match idx {
        0 => (0, [c(-25.0), c(48.0), c(-36.0), c(16.0), c(-3.0)], T::one()),
        1 => (0, [c(-3.0), c(-10.0), c(18.0), c(-6.0), c(1.0)], T::one()),
        i if i + 2 < n => (i - 2, [c(1.0), c(-8.0), c(0.0), c(8.0), c(-1.0)], T::one()),
        i if i + 2 == n => (n - 5, [c(1.0), c(-6.0), c(18.0), c(-10.0), c(-3.0)], -T::one()),
        _ => (n - 5, [c(-3.0), c(16.0), c(-36.0), c(48.0), c(-25.0)], -T::one()),
    };
    let scale = sign / (c(12.0) * spacing);
    let grid = *series[0].grid();
    let values = (0..grid.len())
        .map(|k| {
            weights
                .iter()
                .enumerate()
                .map(|(j, &w)| w * series[base + j].get(k))
                .sum::<T>()
                * scale
        })
        .collect();
    ScalarField::new(grid, values)
}

/// Immutable record of a solve: snapshots plus derived fields
/// `f = log u`, `fₜ`, `|∇f|²`, `Δf`.
#[derive(Clone, Debug)]
pub struct SolutionHistory<T> {
    a: T,
    step_dt: T,
    snapshot_dt: T,
    times: Vec<T>,
    u: Vec<ScalarField<T>>,
    metrics: Vec<MetricField<T>>,
    potential: Vec<ScalarField<T>>,
    flow_tensors: Vec<TensorField<T>>,
    log_u: Vec<ScalarField<T>>,
    log_u_t: Vec<ScalarField<T>>,
    grad_sq: Vec<ScalarField<T>>,
    lap_log_u: Vec<ScalarField<T>>,
    pub clamp_count: usize,
    pub steps: usize,
}

impl<T: Real> SolutionHistory<T> {
    /// Builds a history from uniformly spaced snapshots, e.g. samples of a
    /// closed-form solution. `step_dt` is the step of whatever produced them.
    pub fn from_snapshots(
        a: T,
        step_dt: T,
        times: Vec<T>,
        u: Vec<ScalarField<T>>,
        metrics: Vec<MetricField<T>>,
        potential: Vec<ScalarField<T>>,
        flow_tensors: Vec<TensorField<T>>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::EmptyHistory);
        }
        if [u.len(), metrics.len(), potential.len(), flow_tensors.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidParams("snapshot counts differ".into()));
        }
        if n < 5 {
            return Err(Error::InvalidParams("a history needs at least 5 snapshots".into()));
        }
        let grid = *u[0].grid();
        for k in 0..n {
            ensure_same_grid(&grid, u[k].grid())?;
            ensure_same_grid(&grid, metrics[k].grid())?;
            ensure_same_grid(&grid, potential[k].grid())?;
            ensure_same_grid(&grid, flow_tensors[k].grid())?;
            u[k].ensure_finite("u")?;
        }
        let floor = T::lit(U_FLOOR);
        if u.iter().any(|s| s.min() < floor) {
            return Err(Error::InvalidParams(format!("snapshots must satisfy u ≥ {U_FLOOR}")));
        }
        let snapshot_dt = times[1] - times[0];
        for (i, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidParams("snapshot times must increase".into()));
            }
            let expect = times[0] + T::from_usize(i + 1).unwrap() * snapshot_dt;
            if (w[1] - expect).abs() > T::lit(1e-9) * snapshot_dt.max(w[1].abs()) {
                return Err(Error::InvalidParams("snapshot times must be uniformly spaced".into()));
            }
        }
        let log_u: Vec<_> = u.iter().map(|s| s.map(|v| v.max(floor).ln())).collect();
        let log_u_t = (0..n)
            .map(|i| time_derivative(&log_u, snapshot_dt, i))
            .collect::<Result<Vec<_>>>()?;
        let grad_sq = metrics
            .iter()
            .zip(&log_u)
            .map(|(m, f)| geometry::grad_norm_sq(m, f))
            .collect::<Result<Vec<_>>>()?;
        let lap_log_u = metrics
            .iter()
            .zip(&log_u)
            .map(|(m, f)| geometry::laplace_beltrami(m, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            a,
            step_dt,
            snapshot_dt,
            times,
            u,
            metrics,
            potential,
            flow_tensors,
            log_u,
            log_u_t,
            grad_sq,
            lap_log_u,
            clamp_count: 0,
            steps: 0,
        })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn step_dt(&self) -> T {
        self.step_dt
    }

    pub fn snapshot_dt(&self) -> T {
        self.snapshot_dt
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.u[0].grid().dim()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn time(&self, i: usize) -> T {
        self.times[i]
    }

    pub fn u(&self, i: usize) -> &ScalarField<T> {
        &self.u[i]
    }

    pub fn metric(&self, i: usize) -> &MetricField<T> {
        &self.metrics[i]
    }

    pub fn potential(&self, i: usize) -> &ScalarField<T> {
        &self.potential[i]
    }

    pub fn flow_tensor(&self, i: usize) -> &TensorField<T> {
        &self.flow_tensors[i]
    }

    /// `f = log u` (computed from the floored solution).
    pub fn log_u(&self, i: usize) -> &ScalarField<T> {
        &self.log_u[i]
    }

    pub fn log_u_series(&self) -> &[ScalarField<T>] {
        &self.log_u
    }

    /// `fₜ` from snapshot time differences.
    pub fn log_u_t(&self, i: usize) -> &ScalarField<T> {
        &self.log_u_t[i]
    }

    pub fn grad_sq(&self, i: usize) -> &ScalarField<T> {
        &self.grad_sq[i]
    }

    pub fn grad_sq_series(&self) -> &[ScalarField<T>] {
        &self.grad_sq
    }

    pub fn lap_log_u(&self, i: usize) -> &ScalarField<T> {
        &self.lap_log_u[i]
    }

    pub fn lap_log_u_series(&self) -> &[ScalarField<T>] {
        &self.lap_log_u
    }

    pub fn min_u(&self) -> T {
        self.u.iter().map(|s| s.min()).fold(T::infinity(), T::min)
    }

    /// Snapshot index whose time equals `t` to within `1e-9` of the spacing.
    pub fn index_of_time(&self, t: T) -> Option<usize> {
        let tol = T::lit(1e-9) * self.snapshot_dt;
        let guess = ((t - self.times[0]) / self.snapshot_dt).round().to_usize()?;
        (guess < self.len() && (self.times[guess] - t).abs() <= tol).then_some(guess)
    }

    pub fn flow_samples(&self) -> Vec<FlowSample<T>> {
        (0..self.len())
            .map(|i| FlowSample {
                t: self.times[i],
                metric: self.metrics[i].clone(),
                h: self.flow_tensors[i].clone(),
                potential: self.potential[i].clone(),
            })
            .collect()
    }

    /// Max-norm of `uₜ − Δ_g u + R·u + a·u·log u` at snapshot `i`, with `uₜ`
    /// from snapshot differences.
    pub fn pde_residual(&self, i: usize) -> Result<T> {
        let u_t = time_derivative(&self.u, self.snapshot_dt, i)?;
        let lap = geometry::laplace_beltrami(&self.metrics[i], &self.u[i])?;
        let u = &self.u[i];
        let r = &self.potential[i];
        Ok((0..u.len())
            .map(|k| {
                let v = u.get(k);
                (u_t.get(k) - lap.get(k) + r.get(k) * v + self.a * v * v.ln()).abs()
            })
            .fold(T::zero(), T::max))
    }

    /// Max-norm of `(∂ₜ − Δ)f − |∇f|² + a·f + R` at snapshot `i`.
    pub fn log_equation_residual(&self, i: usize) -> T {
        let (f, ft, g, l, r) = (
            &self.log_u[i],
            &self.log_u_t[i],
            &self.grad_sq[i],
            &self.lap_log_u[i],
            &self.potential[i],
        );
        (0..f.len())
            .map(|k| (ft.get(k) - l.get(k) - g.get(k) + self.a * f.get(k) + r.get(k)).abs())
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use crate::grid::ManifoldGrid;

    fn series(ts: &[f64], f: impl Fn(f64) -> f64) -> Vec<ScalarField<f64>> {
        let g = ManifoldGrid::circle(8).unwrap();
        ts.iter().map(|&t| ScalarField::constant(g, f(t))).collect()
    }

    #[test]
    fn time_derivative_exact_on_quartics() {
        let ts: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let s = series(&ts, |t| 1.0 + t - 2.0 * t.powi(2) + 0.5 * t.powi(3) + 0.25 * t.powi(4));
        for (i, &t) in ts.iter().enumerate() {
            let d = time_derivative(&s, 0.1, i).unwrap().get(0);
            let exact = 1.0 - 4.0 * t + 1.5 * t * t + t.powi(3);
            assert!((d - exact).abs() < 1e-11, "i={i}: {d} vs {exact}");
        }
        assert!(time_derivative(&s[..4], 0.1, 0).is_err());
    }

    #[test]
    fn constant_is_fixed_point_of_heat_step() {
        let grid = ManifoldGrid::torus(16, 16).unwrap();
        let m = MetricField::new(ScalarField::from_fn(grid, |x| 0.2 * x[0].sin())).unwrap();
        let u = ScalarField::constant(grid, 3.0);
        let (next, clamped) = step_u(&u, &m, &ScalarField::zeros(grid), 0.0, 1e-4).unwrap();
        assert_eq!(clamped, 0);
        assert!(next.values().iter().all(|&v: &f64| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn clamp_is_counted() {
        let grid = ManifoldGrid::circle(8).unwrap();
        let m = MetricField::flat(grid);
        // an over-sized step amplifies the checkerboard mode past zero
        let u = ScalarField::from_fn(grid, |x| 1.0 + 0.9 * (8.0 * std::f64::consts::PI * x[0]).cos());
        let (next, clamped) = step_u(&u, &m, &ScalarField::zeros(grid), 0.0, 0.05).unwrap();
        assert_eq!(clamped, 4);
        assert!(next.min() >= U_FLOOR);
    }

    #[test]
    fn blowup_names_grid_point() {
        let grid = ManifoldGrid::circle(8).unwrap();
        let m = MetricField::flat(grid);
        let u = ScalarField::constant(grid, 1.0);
        let mut r = ScalarField::zeros(grid);
        r.values_mut()[5] = f64::INFINITY;
        match step_u(&u, &m, &r, 0.0, 1e-3) {
            Err(Error::Blowup { index, .. }) => assert_eq!(index, 5),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    fn problem(grid: ManifoldGrid, a: f64, u0: f64, t_end: f64, dt: f64) -> PdeProblem<f64> {
        PdeProblem {
            a,
            potential: Arc::new(Generator::constant(0.0)),
            u0: ScalarField::constant(grid, u0),
            metric0: MetricField::flat(grid),
            flow: FlowKind::Static,
            t_end,
            dt,
            snapshot_every: 10,
        }
    }

    #[test]
    fn unit_solution_stays_unit() {
        let p = problem(ManifoldGrid::circle(16).unwrap(), 2.5, 1.0, 0.1, 2.5e-4);
        let h = solve(&p).unwrap();
        for i in 0..h.len() {
            assert!(h.u(i).values().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn validation_rejections() {
        let grid = ManifoldGrid::circle(16).unwrap();
        let mut p = problem(grid, 0.0, 1.0, 0.1, 0.03);
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
        p.dt = 0.05;
        assert!(matches!(p.validate(), Err(Error::Stability { .. })));
        let mut p = problem(grid, 0.0, 1.0, 0.1, 2.5e-4);
        p.snapshot_every = 7;
        assert!(p.validate().is_err());
        let mut p = problem(grid, 0.0, 1.0, 0.1, 2.5e-4);
        p.u0 = ScalarField::constant(grid, 0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn index_of_time_lookup() {
        let p = problem(ManifoldGrid::circle(16).unwrap(), 0.0, 1.0, 0.1, 2.5e-4);
        let h = solve(&p).unwrap();
        assert_eq!(h.index_of_time(0.05), Some(20));
        assert_eq!(h.index_of_time(0.0551), None);
        assert_eq!(h.index_of_time(0.2), None);
    }
}
