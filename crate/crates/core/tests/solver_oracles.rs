use std::f64::consts::PI;
use std::sync::Arc;

use geoflow::{
    solve, FlowKind, Generator, ManifoldGrid, MetricField64, PdeProblem64, ScalarField64, SolutionHistory64,
};

fn problem(u0: ScalarField64, phi0: ScalarField64, a: f64, r: f64, dt: f64, t_end: f64, every: usize) -> PdeProblem64 {
    PdeProblem64 {
        a,
        potential: Arc::new(Generator::constant(r)),
        u0,
        metric0: MetricField64::new(phi0).unwrap(),
        flow: FlowKind::Static,
        t_end,
        dt,
        snapshot_every: every,
    }
}

fn fourier_error(n: usize, dt: f64) -> (f64, SolutionHistory64) {
    let grid = ManifoldGrid::circle(n).unwrap();
    let u0 = ScalarField64::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin());
    // snapshot spacing shrinks with dt, so time differences of the
    // snapshots refine along with the grid
    let hist = solve(&problem(u0, ScalarField64::zeros(grid), 0.0, 0.0, dt, 0.05, 20)).unwrap();
    let mut err = 0.0f64;
    for i in 0..hist.len() {
        let t = hist.time(i);
        for k in 0..grid.len() {
            let exact = 1.0 + 0.5 * (-4.0 * PI * PI * t).exp() * (2.0 * PI * grid.coords(k)[0]).sin();
            err = err.max((hist.u(i).get(k) - exact).abs());
        }
    }
    (err, hist)
}

#[test]
fn fourier_mode_converges_under_joint_refinement() {
    let levels: Vec<(f64, SolutionHistory64)> = [(32, 5e-5), (64, 1.25e-5), (128, 3.125e-6)]
        .into_iter()
        .map(|(n, dt)| fourier_error(n, dt))
        .collect();
    for w in levels.windows(2) {
        assert!(w[0].0 / w[1].0 >= 3.5, "ratio {}", w[0].0 / w[1].0);
    }
    // the PDE residual of the derived fields shrinks with the grid as well
    let residual = |h: &SolutionHistory64| (2..h.len() - 2).map(|i| h.pde_residual(i).unwrap()).fold(0.0, f64::max);
    let (coarse, fine) = (residual(&levels[0].1), residual(&levels[2].1));
    assert!(fine < coarse / 10.0, "{coarse} → {fine}");
    let log_residual = |h: &SolutionHistory64| (2..h.len() - 2).map(|i| h.log_equation_residual(i)).fold(0.0, f64::max);
    let (coarse, fine) = (log_residual(&levels[0].1), log_residual(&levels[2].1));
    assert!(fine < coarse / 10.0, "{coarse} → {fine}");
}

#[test]
fn spatially_constant_data_follow_the_closed_form() {
    let grid = ManifoldGrid::circle(8).unwrap();
    for a in [-0.5, 1.0] {
        let u0 = ScalarField64::constant(grid, std::f64::consts::E);
        let hist = solve(&problem(u0, ScalarField64::zeros(grid), a, 0.0, 1e-3, 1.0, 50)).unwrap();
        for i in 0..hist.len() {
            let exact = (-a * hist.time(i)).exp().exp();
            for &u in hist.u(i).values() {
                assert!((u - exact).abs() <= 1e-8, "a = {a}, t = {}", hist.time(i));
            }
        }
    }
    // a = 1, c = e, t = 1
    let hist = solve(&problem(
        ScalarField64::constant(grid, std::f64::consts::E),
        ScalarField64::zeros(grid),
        1.0,
        0.0,
        1e-3,
        1.0,
        50,
    ))
    .unwrap();
    assert!((hist.u(hist.len() - 1).get(3) - 1.4447).abs() < 1e-4);
}

#[test]
fn heat_flow_conserves_mass_on_a_static_bumped_torus() {
    let grid = ManifoldGrid::torus(32, 32).unwrap();
    let u0 = Generator::PeriodizedGaussian {
        center: vec![0.3, 0.6],
        width: 0.01,
        amplitude: 1.0,
        offset: 0.0,
    }
    .sample(&grid, 0.0);
    let phi0 = ScalarField64::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin());
    let hist = solve(&problem(u0, phi0, 0.0, 0.0, 2e-5, 0.02, 100)).unwrap();
    let mass = |i: usize| hist.metric(i).integrate(hist.u(i)).unwrap();
    let m0 = mass(0);
    for i in 1..hist.len() {
        assert!((mass(i) - m0).abs() <= 1e-12 * m0, "{} vs {m0}", mass(i));
    }
}

#[test]
fn maximum_principle() {
    let grid = ManifoldGrid::torus(24, 24).unwrap();
    let u0 = ScalarField64::from_fn(grid, |x| 1.0 + 0.4 * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos());
    let phi0 = ScalarField64::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin());
    // R = 0: extrema move inward
    let hist = solve(&problem(u0.clone(), phi0.clone(), 0.0, 0.0, 5e-5, 0.01, 1)).unwrap();
    for i in 1..hist.len() {
        assert!(hist.u(i).max() <= hist.u(i - 1).max() + 1e-10);
        assert!(hist.u(i).min() >= hist.u(i - 1).min() - 1e-10);
    }
    // R ≥ 0 only damps, so the maximum still cannot grow
    let hist = solve(&problem(u0, phi0, 0.0, 0.5, 5e-5, 0.01, 1)).unwrap();
    for i in 1..hist.len() {
        assert!(hist.u(i).max() <= hist.u(i - 1).max() + 1e-10);
    }
}

#[test]
fn clamp_count_is_zero_on_smooth_data() {
    let (_, hist) = fourier_error(32, 5e-5);
    assert_eq!(hist.clamp_count, 0);
    assert!(hist.min_u() >= 0.5 - 1e-12);
}
