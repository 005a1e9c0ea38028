use std::collections::BTreeSet;

use geoflow::experiment::{
    bundled, catalog, emit_plotdata, run_experiment, CheckSpec, ExperimentConfig, ExperimentError, RunReport, Series,
    Status, PLOT_FILES,
};

fn source(name: &str) -> &'static str {
    catalog().into_iter().find(|e| e.name == name).unwrap().source
}

#[test]
fn every_bundled_config_validates_and_round_trips() {
    for entry in catalog() {
        let config = bundled(entry.name).unwrap();
        let echoed = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(config, echoed, "{}", entry.name);
    }
}

#[test]
fn pq_violation_names_the_constraint() {
    let text = source("logpotential_constant").replace("q = 4.0", "q = 3.0");
    let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
    assert!(err.contains("1/p + 1/q = 1/α"), "{err}");
}

#[test]
fn cfl_violation_names_the_bound() {
    let text = source("harnack_circle").replace("dt = 5e-6", "dt = 1e-5");
    let err = ExperimentConfig::from_toml(&text).unwrap_err();
    assert!(
        matches!(err, ExperimentError::Core(geoflow::Error::Stability { .. })),
        "{err}"
    );
    let msg = err.to_string();
    // 0.2·h²/(2d) at h = 1/128, d = 1
    assert!(msg.contains("bound 6.103515625e-6"), "{msg}");
}

#[test]
fn structural_rejections() {
    let base = source("logpotential_constant");
    let cases = [
        base.replace("version = 1", "version = 2"),
        base.replace("[time]", "[time]\nsubsteps = 2"),
        base.replace("t_end = 1.0", "t_end = 1.0005"),
        base.replace("t1 = 0.05", "t1 = 0.07"),
        base.replace("x2 = [4]", "x2 = [8]"),
        base.replace("kind = \"closed_form_constant\"", "kind = \"closed_form_polynomial\""),
        base.replace("value = 2.718281828459045", "value = -1.0"),
        base.replace("sizes = [8]", "sizes = [8, 8, 8]"),
        format!("{base}\n[[checks]]\nkind = \"heat_kernel_oracle\"\ntolerance = 1e-3\n"),
        format!("{base}\n[[checks]]\nkind = \"refinement\"\ntimes = [0.5]\nstride = 1\nlevels = 1\n"),
    ];
    for (i, text) in cases.iter().enumerate() {
        assert!(ExperimentConfig::from_toml(text).is_err(), "case {i} accepted");
    }
}

#[test]
fn repeated_checks_get_unique_names() {
    let mut config = bundled("logpotential_constant").unwrap();
    config.checks.push(CheckSpec::Positivity);
    let names = config.check_names();
    assert_eq!(names[0], "positivity#1");
    assert_eq!(names.last().unwrap(), "positivity#2");
    let report = run_experiment(&config, None).unwrap().report;
    let seen: BTreeSet<_> = report.verdicts.iter().map(|v| v.name.clone()).collect();
    assert_eq!(seen.len(), config.checks.len());
}

#[test]
fn reports_are_reproducible_and_seeded() {
    let config = bundled("harnack_circle").unwrap();
    let a = run_experiment(&config, Some(3)).unwrap().report;
    let b = run_experiment(&config, Some(3)).unwrap().report;
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.digest(), b.digest());
    let c = run_experiment(&config, Some(4)).unwrap().report;
    assert_eq!(c.seed, 4);
    assert_ne!(a.config_hash, c.config_hash);
    assert_eq!(RunReport::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn classical_run_stays_below_the_bound_row_wise() {
    let report = run_experiment(&bundled("harnack_circle").unwrap(), None)
        .unwrap()
        .report;
    assert!(report.passed(true), "{:?}", report.verdicts);
    assert!(!report.series.liyau.is_empty());
    for row in &report.series.liyau {
        assert!(row.sup_lhs <= row.classical_bound, "t = {}", row.t);
    }
    let dir = tempfile::tempdir().unwrap();
    emit_plotdata(&report, dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("liyau.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let (lhs, bound) = (
        headers.iter().position(|h| h == "sup_lhs").unwrap(),
        headers.iter().position(|h| h == "classical_bound").unwrap(),
    );
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert!(rec[lhs].parse::<f64>().unwrap() <= rec[bound].parse::<f64>().unwrap());
    }
}

#[test]
fn empty_series_give_header_only_csv() {
    let mut report = run_experiment(&bundled("logpotential_constant").unwrap(), None)
        .unwrap()
        .report;
    report.series = Series::default();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plotdata(&report, dir.path()).unwrap();
    assert_eq!(files, PLOT_FILES.to_vec());
    for f in files {
        let text = std::fs::read_to_string(dir.path().join(&f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }
}

#[test]
fn failing_and_drifting_verdicts() {
    let mut config = bundled("logpotential_constant").unwrap();
    config.checks = vec![CheckSpec::ClosedFormConstant { tolerance: 1e-30 }];
    let report = run_experiment(&config, None).unwrap().report;
    assert_eq!(report.verdicts[0].status, Status::Fail);
    assert!(!report.passed(false));

    let text = source("prescribed_growth").replace(
        "thresholds = { gradient_evolution = 1e-5, laplacian_evolution = 1e-7 }",
        "thresholds = { gradient_evolution = 1e-9 }",
    );
    let report = run_experiment(&ExperimentConfig::from_toml(&text).unwrap(), None)
        .unwrap()
        .report;
    assert_eq!(report.verdict("refinement").unwrap().status, Status::Drift);
    assert!(report.passed(false) && !report.passed(true));
}
