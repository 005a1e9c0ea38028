//! Tidy CSV plot data: comma separated, `.` decimals, LF line endings, one
//! header row. Empty series produce header-only files.

use std::path::Path;

use super::config::ResidualKind;
use super::{ExperimentError, RunReport};

/// Files written by [`emit_plotdata`], in order.
pub const PLOT_FILES: [&str; 4] = ["liyau.csv", "residuals.csv", "harnack.csv", "refinement.csv"];

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn write(dir: &Path, file: &str, header: &[String], rows: Vec<Vec<String>>) -> Result<(), ExperimentError> {
    let path = dir.join(file);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| ExperimentError::io(&path, e))?;
    w.write_record(header).map_err(|e| ExperimentError::io(&path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| ExperimentError::io(&path, e))?;
    }
    w.flush().map_err(|e| ExperimentError::io(&path, e))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Writes every plot file of `report` into `dir`; returns the file names.
pub fn emit_plotdata(report: &RunReport, dir: &Path) -> Result<Vec<String>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let s = &report.series;

    write(
        dir,
        PLOT_FILES[0],
        &header(&[
            "source",
            "t",
            "sup_lhs",
            "classical_bound",
            "calibrated_c",
            "scaled_gap",
            "scaled_running_max",
        ]),
        s.liyau
            .iter()
            .map(|r| {
                vec![
                    r.source.clone(),
                    num(r.t),
                    num(r.sup_lhs),
                    num(r.classical_bound),
                    num(r.calibrated_c),
                    num(r.scaled_gap),
                    num(r.scaled_running_max),
                ]
            })
            .collect(),
    )?;

    let mut cols = header(&["source", "points", "alpha", "t"]);
    cols.extend(ResidualKind::ALL.iter().map(|k| k.label().to_string()));
    cols.extend(ResidualKind::ALL.iter().map(|k| format!("{}_relative", k.label())));
    write(
        dir,
        PLOT_FILES[1],
        &cols,
        s.residuals
            .iter()
            .map(|r| {
                let mut row = vec![r.source.clone(), r.points.to_string(), num(r.alpha), num(r.t)];
                row.extend(r.values.iter().map(|&v| num(v)));
                row.extend(r.relative.iter().map(|&v| num(v)));
                row
            })
            .collect(),
    )?;

    write(
        dir,
        PLOT_FILES[2],
        &header(&[
            "query_id",
            "x1",
            "x2",
            "t1",
            "t2",
            "c12",
            "path_length",
            "harnack_lhs",
            "harnack_rhs",
            "log_lhs",
            "log_rhs",
            "pass",
        ]),
        s.harnack
            .iter()
            .map(|r| {
                vec![
                    r.query.to_string(),
                    r.x1.to_string(),
                    r.x2.to_string(),
                    num(r.t1),
                    num(r.t2),
                    num(r.c12),
                    num(r.path_length),
                    num(r.lhs),
                    num(r.rhs),
                    num(r.log_lhs),
                    num(r.log_rhs),
                    r.pass.to_string(),
                ]
            })
            .collect(),
    )?;

    write(
        dir,
        PLOT_FILES[3],
        &header(&[
            "source", "residual", "alpha", "t", "level", "points", "dt", "value", "ratio", "order",
        ]),
        s.refinement
            .iter()
            .map(|r| {
                vec![
                    r.source.clone(),
                    r.residual.clone(),
                    num(r.alpha),
                    num(r.t),
                    r.level.to_string(),
                    r.points.to_string(),
                    num(r.dt),
                    num(r.value),
                    opt(r.ratio),
                    opt(r.order),
                ]
            })
            .collect(),
    )?;

    Ok(PLOT_FILES.iter().map(|f| f.to_string()).collect())
}
