//! Experiment configuration: a TOML document with a mandatory `version`.
//!
//! ```toml
//! version = 1
//! name = "example"
//! description = "one line"
//! seed = 7                                  # optional, default 0
//!
//! [manifold]
//! sizes = [32, 32]                          # 1 entry: circle, 2: torus
//! periods = [1.0, 1.0]                      # optional, default 1.0
//!
//! [metric]                                  # φ₀ generator
//! kind = "sine"
//! amplitude = 0.1
//! wavenumbers = [1, 0]
//!
//! [flow]
//! kind = "ricci_surface"                    # static | ricci_surface | conformal
//! # rate = { kind = "constant", value = 0.05 }   (conformal only: ψ)
//!
//! [pde]
//! a = 0.0
//! potential = { kind = "constant", value = 0.0 }
//! initial = { kind = "constant", value = 1.0 }
//!
//! [time]
//! t_end = 0.05
//! dt = 2e-5
//! snapshot_every = 10
//!
//! [liyau]
//! alpha = 2.0
//! p = 4.0
//! q = 4.0                                   # may be `inf`
//!
//! [[harnack]]
//! x1 = [16, 16]                             # grid index per axis
//! x2 = [24, 16]
//! t1 = 0.01
//! t2 = 0.02
//! c12 = 0.0                                 # optional
//!
//! [[checks]]
//! kind = "positivity"
//! ```
//!
//! Check kinds and their options are the variants of [`CheckSpec`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::estimate::{HarnackQuery, LiYauParams};
use crate::field::{MetricField, ScalarField};
use crate::flow::FlowKind;
use crate::generator::Generator;
use crate::grid::ManifoldGrid;
use crate::solver::{PdeProblem, ProbePlan};

use super::ExperimentError;

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub metric: Generator,
    pub flow: FlowConfig,
    pub pde: PdeSpec,
    pub time: TimeSpec,
    pub liyau: LiYauParams,
    #[serde(default)]
    pub harnack: Vec<HarnackSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Output root; the command line and environment take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
}

impl ManifoldSpec {
    pub fn grid(&self) -> Result<ManifoldGrid, ExperimentError> {
        let periods = self.periods.clone().unwrap_or_else(|| vec![1.0; self.sizes.len()]);
        Ok(ManifoldGrid::new(&self.sizes, &periods)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    Static,
    RicciSurface,
    /// `h = ψ·g` with `ψ` from a generator.
    Conformal {
        rate: Generator,
    },
}

impl FlowConfig {
    pub fn build(&self) -> FlowKind<f64> {
        match self {
            FlowConfig::Static => FlowKind::Static,
            FlowConfig::RicciSurface => FlowKind::RicciSurface,
            FlowConfig::Conformal { rate } => FlowKind::prescribed_conformal(rate.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    pub a: f64,
    pub potential: Generator,
    pub initial: Generator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackSpec {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub c12: f64,
}

/// Residual families of the identity checker, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    GradientEvolution,
    LaplacianEvolution,
    Bochner,
    Exact,
}

impl ResidualKind {
    pub const ALL: [ResidualKind; 4] = [
        ResidualKind::GradientEvolution,
        ResidualKind::LaplacianEvolution,
        ResidualKind::Bochner,
        ResidualKind::Exact,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ResidualKind::GradientEvolution => "gradient_evolution",
            ResidualKind::LaplacianEvolution => "laplacian_evolution",
            ResidualKind::Bochner => "bochner",
            ResidualKind::Exact => "exact",
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

/// Upper limits calibrated by a pilot run; exceeding one is reported as
/// drift rather than failure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualThresholds {
    pub gradient_evolution: Option<f64>,
    pub laplacian_evolution: Option<f64>,
    /// Relative to the largest Bochner term.
    pub bochner: Option<f64>,
    pub exact: Option<f64>,
}

impl ResidualThresholds {
    pub fn get(&self, kind: ResidualKind) -> Option<f64> {
        match kind {
            ResidualKind::GradientEvolution => self.gradient_evolution,
            ResidualKind::LaplacianEvolution => self.laplacian_evolution,
            ResidualKind::Bochner => self.bochner,
            ResidualKind::Exact => self.exact,
        }
    }
}

fn default_tolerance_classical() -> f64 {
    0.05
}

fn default_ode_tolerance() -> f64 {
    1e-8
}

fn default_min_order() -> f64 {
    1.8
}

fn default_levels() -> usize {
    3
}

fn default_cases() -> usize {
    16
}

fn default_alpha() -> f64 {
    2.0
}

fn default_alphas() -> Vec<f64> {
    vec![default_alpha()]
}

fn default_residuals() -> Vec<ResidualKind> {
    ResidualKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// `u ≥ u_floor` everywhere and no clamping.
    Positivity,
    /// Uniform equivalence of `g(t)` and `g(0)` from the measured bounds.
    MetricEquivalence,
    /// Sharp comparison in the classical setting, over `window`.
    LiyauClassical {
        #[serde(default = "default_tolerance_classical")]
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
    /// Boundedness and settling of the scaled gap.
    LiyauStructure {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<LiYauParams>,
    },
    /// Identity residuals on probe windows of the main run.
    IdentityResiduals {
        times: Vec<f64>,
        stride: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        thresholds: ResidualThresholds,
    },
    /// Joint refinement `h → h/2`, `dt → dt/4`, probe spacing `→ /2`.
    Refinement {
        times: Vec<f64>,
        stride: usize,
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default = "default_min_order")]
        min_order: f64,
        /// The exact identity is checked once per `α`.
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "default_residuals")]
        residuals: Vec<ResidualKind>,
        /// Applied to the finest level.
        #[serde(default)]
        thresholds: ResidualThresholds,
        /// Also require metric equivalence on every level.
        #[serde(default)]
        metric_equivalence: bool,
    },
    /// Every configured Harnack query.
    Harnack,
    /// Spatially constant data against `exp(e^{−at}·log c)`.
    ClosedFormConstant {
        #[serde(default = "default_ode_tolerance")]
        tolerance: f64,
    },
    /// Flat static heat flow of a periodized Gaussian against the exact
    /// kernel, as a relative max-norm error.
    HeatKernelOracle { tolerance: f64 },
    /// Seeded randomized property suite.
    RandomProperties {
        #[serde(default = "default_cases")]
        cases: usize,
    },
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Positivity => "positivity",
            CheckSpec::MetricEquivalence => "metric_equivalence",
            CheckSpec::LiyauClassical { .. } => "liyau_classical",
            CheckSpec::LiyauStructure { .. } => "liyau_structure",
            CheckSpec::IdentityResiduals { .. } => "identity_residuals",
            CheckSpec::Refinement { .. } => "refinement",
            CheckSpec::Harnack => "harnack",
            CheckSpec::ClosedFormConstant { .. } => "closed_form_constant",
            CheckSpec::HeatKernelOracle { .. } => "heat_kernel_oracle",
            CheckSpec::RandomProperties { .. } => "random_properties",
        }
    }
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise")
    }

    /// Unique name per check: the kind, suffixed `#k` when repeated.
    pub fn check_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.checks.len());
        for (i, c) in self.checks.iter().enumerate() {
            let kind = c.kind();
            let repeats = self.checks.iter().filter(|d| d.kind() == kind).count();
            if repeats == 1 {
                names.push(kind.to_string());
            } else {
                let k = self.checks[..=i].iter().filter(|d| d.kind() == kind).count();
                names.push(format!("{kind}#{k}"));
            }
        }
        names
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid(format!("name {:?} must be non-empty [A-Za-z0-9_-]", self.name)));
        }
        let grid = self.manifold.grid()?;
        let dim = grid.dim();
        self.metric.validate(dim)?;
        self.pde.potential.validate(dim)?;
        self.pde.initial.validate(dim)?;
        if let FlowConfig::Conformal { rate } = &self.flow {
            rate.validate(dim)?;
        }
        if matches!(self.flow, FlowConfig::RicciSurface) && dim != 2 {
            return Err(invalid("ricci_surface needs a 2-D manifold"));
        }
        self.liyau.validate()?;
        // builds the problem, which checks positivity, step count and stability
        let problem = self.problem_on(grid, self.time.dt, self.time.snapshot_every)?;
        let steps = problem.validate()?;
        let snapshot_dt = self.time.dt * self.time.snapshot_every as f64;
        let on_snapshot = |t: f64| {
            let k = t / snapshot_dt;
            (k - k.round()).abs() <= 1e-9 * k.max(1.0) && t <= self.time.t_end * (1.0 + 1e-12)
        };
        for (i, q) in self.harnack.iter().enumerate() {
            let query = self
                .harnack_query(&grid, q)
                .map_err(|e| invalid(format!("harnack[{i}]: {e}")))?;
            query
                .validate(grid.len())
                .map_err(|e| invalid(format!("harnack[{i}]: {e}")))?;
            if !on_snapshot(q.t1) || !on_snapshot(q.t2) {
                return Err(invalid(format!("harnack[{i}]: t1 and t2 must be snapshot times")));
            }
            if !(q.c12 >= 0.0 && q.c12.is_finite()) {
                return Err(invalid(format!("harnack[{i}]: c12 must be finite and ≥ 0")));
            }
        }
        for check in &self.checks {
            self.validate_check(check, steps)?;
        }
        Ok(())
    }

    fn validate_check(&self, check: &CheckSpec, steps: usize) -> Result<(), ExperimentError> {
        let name = check.kind();
        match check {
            CheckSpec::LiyauClassical { tolerance, window } => {
                if tolerance.is_nan() || *tolerance < 0.0 {
                    return Err(invalid(format!("{name}: tolerance must be ≥ 0")));
                }
                if let Some([lo, hi]) = window {
                    if !(0.0 < *lo && lo <= hi) {
                        return Err(invalid(format!("{name}: window needs 0 < lo ≤ hi")));
                    }
                }
            }
            CheckSpec::LiyauStructure { params: Some(p) } => p.validate()?,
            CheckSpec::IdentityResiduals {
                times, stride, alpha, ..
            } => {
                if alpha.is_nan() || *alpha < 1.0 {
                    return Err(invalid(format!("{name}: alpha must be ≥ 1")));
                }
                self.probe_plan(times, *stride).centres(self.time.dt, steps)?;
            }
            CheckSpec::Refinement {
                times,
                stride,
                levels,
                min_order,
                alphas,
                residuals,
                ..
            } => {
                if !(2..=5).contains(levels) {
                    return Err(invalid(format!("{name}: levels must be in 2..=5")));
                }
                if alphas.is_empty() || alphas.iter().any(|a| a.is_nan() || *a < 1.0) {
                    return Err(invalid(format!("{name}: needs at least one alpha, all ≥ 1")));
                }
                if !min_order.is_finite() || residuals.is_empty() {
                    return Err(invalid(format!("{name}: needs a finite min_order and residuals")));
                }
                self.probe_plan(times, *stride).centres(self.time.dt, steps)?;
            }
            CheckSpec::ClosedFormConstant { .. } => {
                let spatially_constant = matches!(self.pde.initial, Generator::Constant { .. });
                let zero_potential = self.pde.potential == Generator::constant(0.0);
                if !spatially_constant || !zero_potential {
                    return Err(invalid(format!(
                        "{name}: needs constant initial data and zero potential"
                    )));
                }
            }
            CheckSpec::HeatKernelOracle { tolerance } => {
                let exact = matches!(self.pde.initial, Generator::PeriodizedGaussian { offset, .. } if offset == 0.0);
                if !exact
                    || self.pde.a != 0.0
                    || self.pde.potential != Generator::constant(0.0)
                    || self.flow != FlowConfig::Static
                    || self.metric != Generator::constant(0.0)
                    || tolerance.is_nan()
                    || *tolerance <= 0.0
                {
                    return Err(invalid(format!(
                        "{name}: needs a flat static metric, a = 0, zero potential and an unshifted periodized Gaussian"
                    )));
                }
            }
            CheckSpec::Harnack => {
                if self.harnack.is_empty() {
                    return Err(invalid(format!("{name}: no [[harnack]] queries configured")));
                }
            }
            CheckSpec::RandomProperties { cases: 0 } => {
                return Err(invalid(format!("{name}: cases must be ≥ 1")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn probe_plan(&self, times: &[f64], stride: usize) -> ProbePlan {
        ProbePlan::new(times.to_vec(), stride)
    }

    /// The PDE problem on `grid` with step `dt`.
    pub fn problem_on(
        &self,
        grid: ManifoldGrid,
        dt: f64,
        snapshot_every: usize,
    ) -> Result<PdeProblem<f64>, ExperimentError> {
        let metric0 = MetricField::new(self.metric.sample(&grid, 0.0))?;
        let u0: ScalarField<f64> = self.pde.initial.sample(&grid, 0.0);
        Ok(PdeProblem {
            a: self.pde.a,
            potential: Arc::new(self.pde.potential.clone()),
            u0,
            metric0,
            flow: self.flow.build(),
            t_end: self.time.t_end,
            dt,
            snapshot_every,
        })
    }

    pub fn problem(&self) -> Result<PdeProblem<f64>, ExperimentError> {
        self.problem_on(self.manifold.grid()?, self.time.dt, self.time.snapshot_every)
    }

    pub fn harnack_query(&self, grid: &ManifoldGrid, q: &HarnackSpec) -> Result<HarnackQuery, ExperimentError> {
        let index = |p: &[usize], label: &str| -> Result<usize, ExperimentError> {
            if p.len() != grid.dim() {
                return Err(invalid(format!("{label} needs {} indices", grid.dim())));
            }
            if p.iter().zip(grid.sizes()).any(|(&i, &n)| i >= n) {
                return Err(invalid(format!("{label} = {p:?} is outside the grid")));
            }
            Ok(grid.index(p[0], p.get(1).copied().unwrap_or(0)))
        };
        Ok(HarnackQuery::new(index(&q.x1, "x1")?, index(&q.x2, "x2")?, q.t1, q.t2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "minimal"

[manifold]
sizes = [8]

[metric]
kind = "constant"
value = 0.0

[flow]
kind = "static"

[pde]
a = 0.0
potential = { kind = "constant", value = 0.0 }
initial = { kind = "constant", value = 1.0 }

[time]
t_end = 0.01
dt = 1e-3
snapshot_every = 2

[liyau]
alpha = 1.0
p = 1.0
q = inf
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert!(c.checks.is_empty() && c.harnack.is_empty());
        assert!(c.liyau.q.is_infinite());
        assert_eq!(c.manifold.grid().unwrap().len(), 8);
    }

    #[test]
    fn check_defaults_fill_in() {
        let text = format!("{MINIMAL}\n[[checks]]\nkind = \"refinement\"\ntimes = [0.004]\nstride = 1\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let CheckSpec::Refinement {
            levels,
            min_order,
            alphas,
            residuals,
            ..
        } = &c.checks[0]
        else {
            panic!("expected refinement")
        };
        assert_eq!((*levels, *min_order), (3, 1.8));
        assert_eq!(alphas, &vec![2.0]);
        assert_eq!(residuals.len(), 4);
    }

    #[test]
    fn ricci_flow_needs_a_surface() {
        let text = MINIMAL.replace("kind = \"static\"", "kind = \"ricci_surface\"");
        assert!(ExperimentConfig::from_toml(&text)
            .unwrap_err()
            .to_string()
            .contains("2-D"));
    }

    #[test]
    fn probe_windows_must_fit() {
        let text = format!("{MINIMAL}\n[[checks]]\nkind = \"identity_residuals\"\ntimes = [0.002]\nstride = 1\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
