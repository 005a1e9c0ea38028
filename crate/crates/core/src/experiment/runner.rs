use std::path::Path;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::estimate::{
    harnack_check, identity_residuals, liyau_monitor, HarnackQuery, IdentityResiduals, LiYauParams, MonitorOptions,
    MonitorReport,
};
use crate::flow::{extract_bounds, metric_equivalence_check, BoundConstants, EquivalenceVerdict, BOUND_SAFETY};
use crate::generator::{periodic_heat_kernel, Generator};
use crate::solver::{solve_with_probes, ProbePlan, SolutionHistory, U_FLOOR};

use super::config::{CheckSpec, ExperimentConfig, ResidualKind, ResidualThresholds};
use super::plotdata::{emit_plotdata, PLOT_FILES};
use super::report::{
    HarnackRow, LiyauRow, RefinementRow, ResidualRow, RunReport, Series, Status, Timing, Verdict, REPORT_FILE,
    TIMING_FILE,
};
use super::ExperimentError;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A finished run: the reproducible report and the wall-clock timing.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timing: Timing,
}

/// Runs `config` (with `seed` overriding the configured one) and every
/// configured check. Numerical failures of a check are verdicts; only
/// invalid input and solver breakdown are errors.
pub fn run_experiment(config: &ExperimentConfig, seed: Option<u64>) -> Result<RunOutcome, ExperimentError> {
    let start = Instant::now();
    let mut config = config.clone();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    let problem = config.problem()?;
    let main_plan = config
        .checks
        .iter()
        .find_map(|c| match c {
            CheckSpec::IdentityResiduals { times, stride, .. } => Some(ProbePlan::new(times.clone(), *stride)),
            _ => None,
        })
        .unwrap_or_default();
    let (hist, windows) = solve_with_probes(&problem, &main_plan)?;
    let bounds = extract_bounds(&hist.flow_samples())?;
    let bounds_used = bounds.with_safety(BOUND_SAFETY);
    let monitor = liyau_monitor(&hist, &config.liyau, &bounds_used, &MonitorOptions::default())?;

    let mut series = Series::default();
    series.liyau.extend(liyau_rows("liyau", &monitor));
    let grid = config.manifold.grid()?;
    for (id, spec) in config.harnack.iter().enumerate() {
        let query = config.harnack_query(&grid, spec)?;
        series
            .harnack
            .push(harnack_row(&hist, &config.liyau, id, &query, spec.c12)?);
    }

    let ctx = Context {
        config: &config,
        hist: &hist,
        bounds: &bounds,
        bounds_used: &bounds_used,
        monitor: &monitor,
        main_plan: &main_plan,
        windows: &windows,
    };
    let mut verdicts = Vec::new();
    let mut check_times = Vec::new();
    for (check, name) in config.checks.iter().zip(config.check_names()) {
        let t0 = Instant::now();
        verdicts.push(ctx.run_check(check, &name, &mut series)?);
        check_times.push((name, t0.elapsed().as_secs_f64()));
    }

    let report = RunReport {
        tool: concat!("geoflow ", env!("CARGO_PKG_VERSION")).to_string(),
        name: config.name.clone(),
        config_hash: sha256_hex(config.to_toml().as_bytes()),
        seed: config.seed,
        grid: grid.to_string(),
        steps: hist.steps,
        snapshots: hist.len(),
        clamp_count: hist.clamp_count,
        min_u: hist.min_u(),
        stability_bound: problem.stability_bound(),
        bounds,
        bounds_used,
        verdicts,
        artifacts: PLOT_FILES.iter().map(|f| f.to_string()).collect(),
        series,
        config,
    };
    Ok(RunOutcome {
        report,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            checks: check_times,
        },
    })
}

/// Writes the report, its plot data and the timing file into `dir`.
pub fn write_run(outcome: &RunOutcome, dir: &Path) -> Result<(), ExperimentError> {
    emit_plotdata(&outcome.report, dir)?;
    let write = |file: &str, text: String| {
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))
    };
    write(REPORT_FILE, outcome.report.to_json())?;
    let timing = serde_json::to_string_pretty(&outcome.timing).expect("timing serialises");
    write(TIMING_FILE, timing + "\n")
}

fn liyau_rows<'a>(source: &str, monitor: &'a MonitorReport) -> impl Iterator<Item = LiyauRow> + 'a {
    let source = source.to_string();
    monitor.rows.iter().map(move |r| LiyauRow {
        source: source.clone(),
        t: r.t,
        sup_lhs: r.sup_lhs,
        classical_bound: r.classical_bound,
        calibrated_c: r.calibrated_c,
        scaled_gap: r.scaled_gap,
        scaled_running_max: r.scaled_running_max,
    })
}

fn harnack_row(
    hist: &SolutionHistory<f64>,
    params: &LiYauParams,
    id: usize,
    query: &HarnackQuery,
    c12: f64,
) -> Result<HarnackRow, ExperimentError> {
    let out = harnack_check(hist, params, query, c12)?;
    Ok(HarnackRow {
        query: id,
        x1: query.x1,
        x2: query.x2,
        t1: query.t1,
        t2: query.t2,
        c12,
        path_length: out.path_length,
        lhs: out.lhs,
        rhs: out.rhs,
        log_lhs: out.log_lhs,
        log_rhs: out.log_rhs,
        pass: out.pass,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.4e}")
}

/// Smallest `limit / value` over configured thresholds; `None` if no
/// threshold applies.
fn threshold_margin(
    thresholds: &ResidualThresholds,
    kinds: &[ResidualKind],
    res: &IdentityResiduals<f64>,
) -> Option<f64> {
    kinds
        .iter()
        .filter_map(|&k| {
            let limit = thresholds.get(k)?;
            let r = res.all()[k.slot()];
            let value = if k == ResidualKind::Bochner {
                r.relative()
            } else {
                r.value
            };
            Some(if value > 0.0 { limit / value } else { f64::INFINITY })
        })
        .reduce(f64::min)
}

fn residual_row(source: &str, alpha: f64, res: &IdentityResiduals<f64>, points: usize) -> ResidualRow {
    let all = res.all();
    ResidualRow {
        source: source.to_string(),
        points,
        alpha,
        t: res.t,
        values: all.map(|r| r.value),
        relative: all.map(|r| r.relative()),
    }
}

/// Residuals at the centre of every probe window.
fn window_residuals(
    windows: &[SolutionHistory<f64>],
    alpha: f64,
) -> Result<Vec<IdentityResiduals<f64>>, ExperimentError> {
    windows
        .iter()
        .map(|w| Ok(identity_residuals(w, ProbePlan::MIN_HALF_WIDTH, alpha)?))
        .collect()
}

/// Worst uniform-equivalence verdict of `g(t)` against `g(0)` over all
/// snapshots, using the measured shrink and growth rates of `h`.
fn metric_equivalence(
    hist: &SolutionHistory<f64>,
    bounds: &BoundConstants<f64>,
) -> Result<EquivalenceVerdict, ExperimentError> {
    let g0 = hist.metric(0);
    let mut worst: Option<EquivalenceVerdict> = None;
    for i in 1..hist.len() {
        let v = metric_equivalence_check(g0, hist.metric(i), bounds.k2, bounds.k3, hist.time(i), hist.step_dt())?;
        if worst.is_none_or(|w| v.margin < w.margin) {
            worst = Some(v);
        }
    }
    worst.ok_or(ExperimentError::Core(crate::error::Error::EmptyHistory))
}

struct LevelResult {
    points: usize,
    dt: f64,
    /// Per alpha, per probe time.
    residuals: Vec<Vec<IdentityResiduals<f64>>>,
    equivalence: Option<EquivalenceVerdict>,
}

fn run_level(
    config: &ExperimentConfig,
    level: usize,
    times: &[f64],
    stride: usize,
    alphas: &[f64],
    equivalence: bool,
) -> Result<LevelResult, ExperimentError> {
    let (h_scale, t_scale) = (1usize << level, 1usize << (2 * level));
    let sizes: Vec<usize> = config.manifold.sizes.iter().map(|n| n * h_scale).collect();
    let mut manifold = config.manifold.clone();
    manifold.sizes = sizes;
    let grid = manifold.grid()?;
    let dt = config.time.dt / t_scale as f64;
    let problem = config.problem_on(grid, dt, config.time.snapshot_every * t_scale)?;
    let plan = ProbePlan::new(times.to_vec(), stride * h_scale);
    let (hist, windows) = solve_with_probes(&problem, &plan)?;
    let residuals = alphas
        .iter()
        .map(|&alpha| window_residuals(&windows, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let equivalence = if equivalence {
        let bounds = extract_bounds(&hist.flow_samples())?;
        Some(metric_equivalence(&hist, &bounds)?)
    } else {
        None
    };
    Ok(LevelResult {
        points: grid.len(),
        dt,
        residuals,
        equivalence,
    })
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    hist: &'a SolutionHistory<f64>,
    bounds: &'a BoundConstants<f64>,
    bounds_used: &'a BoundConstants<f64>,
    monitor: &'a MonitorReport,
    main_plan: &'a ProbePlan,
    windows: &'a [SolutionHistory<f64>],
}

impl Context<'_> {
    fn run_check(&self, check: &CheckSpec, name: &str, series: &mut Series) -> Result<Verdict, ExperimentError> {
        let hist = self.hist;
        Ok(match check {
            CheckSpec::Positivity => {
                let min_u = hist.min_u();
                Verdict::pass_if(
                    name,
                    hist.clamp_count == 0 && min_u >= U_FLOOR,
                    min_u / U_FLOOR,
                    format!("min u = {}, clamp events = {}", fmt(min_u), hist.clamp_count),
                )
            }
            CheckSpec::MetricEquivalence => {
                let v = metric_equivalence(hist, self.bounds)?;
                Verdict::pass_if(
                    name,
                    v.pass,
                    v.margin * v.tolerance,
                    format!(
                        "g(t)/g(0) in [{}, {}] within [{}, {}], tolerance factor {}",
                        fmt(v.min_ratio),
                        fmt(v.max_ratio),
                        fmt(v.lower),
                        fmt(v.upper),
                        v.tolerance
                    ),
                )
            }
            CheckSpec::LiyauClassical { tolerance, window } => self.classical(name, *tolerance, *window),
            CheckSpec::LiyauStructure { params } => {
                let owned;
                let monitor = match params {
                    Some(p) if p != &self.config.liyau => {
                        owned = liyau_monitor(hist, p, self.bounds_used, &MonitorOptions::default())?;
                        series.liyau.extend(liyau_rows(name, &owned));
                        &owned
                    }
                    _ => self.monitor,
                };
                let s = monitor.structure;
                let tol = MonitorOptions::default().settle_tolerance;
                Verdict::pass_if(
                    name,
                    s.pass,
                    if s.relative_change > 0.0 {
                        tol / s.relative_change
                    } else {
                        f64::INFINITY
                    },
                    format!(
                        "max of t·LHS − αnp/2·(1 − at) = {} at t = {:.6}, change over final 20% = {}",
                        fmt(s.final_max),
                        s.argmax_t,
                        fmt(s.relative_change)
                    ),
                )
            }
            CheckSpec::IdentityResiduals {
                times,
                stride,
                alpha,
                thresholds,
            } => {
                let plan = ProbePlan::new(times.clone(), *stride);
                let resolved;
                let windows = if &plan == self.main_plan {
                    self.windows
                } else {
                    resolved = solve_with_probes(&self.config.problem()?, &plan)?.1;
                    &resolved
                };
                let res = window_residuals(windows, *alpha)?;
                let points = hist.u(0).len();
                series
                    .residuals
                    .extend(res.iter().map(|r| residual_row(name, *alpha, r, points)));
                let finite = res.iter().all(|r| r.values().iter().all(|v| v.is_finite()));
                let margin = res
                    .iter()
                    .filter_map(|r| threshold_margin(thresholds, &ResidualKind::ALL, r))
                    .reduce(f64::min);
                let status = match (finite, margin) {
                    (false, _) => Status::Fail,
                    (true, Some(m)) if m < 1.0 => Status::Drift,
                    _ => Status::Pass,
                };
                let worst =
                    ResidualKind::ALL.map(|k| res.iter().map(|r| r.all()[k.slot()].value).fold(0.0f64, f64::max));
                Verdict::new(
                    name,
                    status,
                    margin.unwrap_or(f64::INFINITY),
                    format!(
                        "max residuals: gradient {}, laplacian {}, bochner {}, exact {}",
                        fmt(worst[0]),
                        fmt(worst[1]),
                        fmt(worst[2]),
                        fmt(worst[3])
                    ),
                )
            }
            CheckSpec::Refinement {
                times,
                stride,
                levels,
                min_order,
                alphas,
                residuals,
                thresholds,
                metric_equivalence,
            } => self.refinement(
                name,
                series,
                times,
                *stride,
                *levels,
                *min_order,
                alphas,
                residuals,
                thresholds,
                *metric_equivalence,
            )?,
            CheckSpec::Harnack => {
                let all = series.harnack.iter().all(|r| r.pass);
                let margin = series
                    .harnack
                    .iter()
                    .map(|r| (r.log_rhs - r.log_lhs).exp())
                    .fold(f64::INFINITY, f64::min);
                let failing = series.harnack.iter().filter(|r| !r.pass).count();
                Verdict::pass_if(
                    name,
                    all,
                    margin,
                    format!(
                        "{} queries, {failing} failing, min RHS/LHS = {}",
                        series.harnack.len(),
                        fmt(margin)
                    ),
                )
            }
            CheckSpec::ClosedFormConstant { tolerance } => {
                let Generator::Constant { value } = self.config.pde.initial else {
                    unreachable!("validated: constant initial data")
                };
                let a = self.config.pde.a;
                let mut err = 0.0f64;
                for i in 0..hist.len() {
                    let exact = ((-a * hist.time(i)).exp() * value.ln()).exp();
                    err = hist.u(i).values().iter().fold(err, |e, &u| e.max((u - exact).abs()));
                }
                Verdict::pass_if(
                    name,
                    err <= *tolerance,
                    if err > 0.0 { tolerance / err } else { f64::INFINITY },
                    format!("max |u − exp(e^(−at)·log c)| = {}", fmt(err)),
                )
            }
            CheckSpec::HeatKernelOracle { tolerance } => {
                let Generator::PeriodizedGaussian {
                    ref center,
                    width,
                    amplitude,
                    ..
                } = self.config.pde.initial
                else {
                    unreachable!("validated: periodized Gaussian initial data")
                };
                let grid = *hist.u(0).grid();
                let mut worst = 0.0f64;
                for i in 0..hist.len() {
                    let s = width + hist.time(i);
                    let u = hist.u(i);
                    let (mut err, mut peak) = (0.0f64, 0.0f64);
                    for k in 0..grid.len() {
                        let x = grid.coords(k);
                        let exact = amplitude
                            * center
                                .iter()
                                .enumerate()
                                .map(|(ax, &c)| periodic_heat_kernel(x[ax] - c, s, grid.period(ax)))
                                .product::<f64>();
                        err = err.max((u.get(k) - exact).abs());
                        peak = peak.max(exact.abs());
                    }
                    worst = worst.max(err / peak);
                }
                Verdict::pass_if(
                    name,
                    worst <= *tolerance,
                    if worst > 0.0 { tolerance / worst } else { f64::INFINITY },
                    format!("max relative error against the exact kernel = {}", fmt(worst)),
                )
            }
            CheckSpec::RandomProperties { cases } => self.random_properties(name, *cases)?,
        })
    }

    fn classical(&self, name: &str, tolerance: f64, window: Option<[f64; 2]>) -> Verdict {
        let options = MonitorOptions {
            classical_tolerance: tolerance,
            ..MonitorOptions::default()
        };
        if self.monitor.classical.is_none() {
            return Verdict::pass_if(
                name,
                false,
                0.0,
                "not applicable: needs α = 1, a = 0 and a flat static run without potential",
            );
        }
        let [lo, hi] = window.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
        let rows: Vec<_> = self
            .monitor
            .rows
            .iter()
            .filter(|r| r.t >= lo * (1.0 - 1e-12) && r.t <= hi * (1.0 + 1e-12))
            .collect();
        let mut margin = f64::INFINITY;
        let mut worst_t = f64::NAN;
        for r in &rows {
            let limit = r.classical_bound * (1.0 + options.classical_tolerance);
            let m = if r.sup_lhs.is_nan() {
                0.0
            } else if r.sup_lhs > 0.0 {
                limit / r.sup_lhs
            } else {
                f64::INFINITY
            };
            if m < margin {
                margin = m;
                worst_t = r.t;
            }
        }
        Verdict::pass_if(
            name,
            !rows.is_empty() && margin >= 1.0,
            margin,
            format!(
                "{} sampled times, tightest at t = {worst_t} with bound·(1 + {tolerance})/sup = {}",
                rows.len(),
                fmt(margin)
            ),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn refinement(
        &self,
        name: &str,
        series: &mut Series,
        times: &[f64],
        stride: usize,
        levels: usize,
        min_order: f64,
        alphas: &[f64],
        kinds: &[ResidualKind],
        thresholds: &ResidualThresholds,
        equivalence: bool,
    ) -> Result<Verdict, ExperimentError> {
        let results: Vec<Result<LevelResult, ExperimentError>> = thread::scope(|s| {
            let handles: Vec<_> = (0..levels)
                .map(|l| s.spawn(move || run_level(self.config, l, times, stride, alphas, equivalence)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("refinement level panicked"))
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

        for (l, level) in results.iter().enumerate() {
            for (a, &alpha) in alphas.iter().enumerate() {
                series.residuals.extend(
                    level.residuals[a]
                        .iter()
                        .map(|r| residual_row(&format!("{name}/level{l}"), alpha, r, level.points)),
                );
            }
        }

        let mut min_seen = f64::INFINITY;
        let mut worst = String::new();
        for &kind in kinds {
            // only the exact identity depends on α
            let alpha_count = if kind == ResidualKind::Exact { alphas.len() } else { 1 };
            for (a, &alpha) in alphas.iter().enumerate().take(alpha_count) {
                for (p, &t) in times.iter().enumerate() {
                    for (l, level) in results.iter().enumerate() {
                        let value = level.residuals[a][p].all()[kind.slot()].value;
                        let (ratio, order) = if l == 0 {
                            (None, None)
                        } else {
                            let prev = results[l - 1].residuals[a][p].all()[kind.slot()].value;
                            let ratio = prev / value;
                            let order = ratio.log2();
                            let order_or_fail = if order.is_nan() { f64::NEG_INFINITY } else { order };
                            if order_or_fail < min_seen {
                                min_seen = order_or_fail;
                                let at = if alpha_count > 1 {
                                    format!(" α = {alpha},")
                                } else {
                                    String::new()
                                };
                                worst = format!("{}{at} t = {t}, level {}→{l}", kind.label(), l - 1);
                            }
                            (Some(ratio), Some(order))
                        };
                        series.refinement.push(RefinementRow {
                            source: name.to_string(),
                            residual: kind.label().to_string(),
                            alpha,
                            t,
                            level: l,
                            points: level.points,
                            dt: level.dt,
                            value,
                            ratio,
                            order,
                        });
                    }
                }
            }
        }

        let finest = results.last().expect("at least two levels");
        let drift = finest
            .residuals
            .iter()
            .flatten()
            .filter_map(|r| threshold_margin(thresholds, kinds, r))
            .reduce(f64::min);
        let equivalence_failed = results.iter().filter_map(|r| r.equivalence).filter(|v| !v.pass).count();
        let orders_ok = min_seen >= min_order;
        let status = if !orders_ok || equivalence_failed > 0 {
            Status::Fail
        } else if drift.is_some_and(|m| m < 1.0) {
            Status::Drift
        } else {
            Status::Pass
        };
        let mut detail = format!("min observed order {min_seen:.3} (required {min_order}) at {worst}");
        if let Some(m) = drift {
            detail.push_str(&format!("; finest level threshold margin {}", fmt(m)));
        }
        if equivalence {
            detail.push_str(&format!("; metric equivalence failed on {equivalence_failed} levels"));
        }
        Ok(Verdict::new(name, status, min_seen / min_order, detail))
    }

    /// Seeded Harnack properties: the right side is monotone in `C12`, a pass
    /// survives raising `C12`, and degenerate queries give `LHS = RHS = 1`.
    fn random_properties(&self, name: &str, cases: usize) -> Result<Verdict, ExperimentError> {
        let hist = self.hist;
        let params = &self.config.liyau;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let points = hist.u(0).len();
        let mut violations = Vec::new();
        for case in 0..cases {
            let i1 = rng.gen_range(1..hist.len());
            let i2 = rng.gen_range(i1..hist.len());
            let (x1, x2) = (rng.gen_range(0..points), rng.gen_range(0..points));
            let c12 = rng.gen_range(0.0..10.0);
            let raised = c12 + rng.gen_range(0.0..10.0);
            let query = HarnackQuery::new(x1, x2, hist.time(i1), hist.time(i2));
            let low = harnack_check(hist, params, &query, c12)?;
            let high = harnack_check(hist, params, &query, raised)?;
            if high.log_rhs < low.log_rhs || (low.pass && !high.pass) {
                violations.push(format!("case {case}: C12 monotonicity"));
            }
            let point = HarnackQuery::new(x1, x1, hist.time(i1), hist.time(i1));
            let degenerate = harnack_check(hist, params, &point, c12)?;
            if !degenerate.pass || degenerate.lhs != 1.0 || degenerate.rhs != 1.0 {
                violations.push(format!("case {case}: degenerate query"));
            }
        }
        let detail = if violations.is_empty() {
            format!("{cases} cases, seed {}", self.config.seed)
        } else {
            violations.join("; ")
        };
        Ok(Verdict::pass_if(
            name,
            violations.is_empty(),
            if violations.is_empty() { 1.0 } else { 0.0 },
            detail,
        ))
    }
}
