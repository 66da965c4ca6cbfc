use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::benchmark::{ExperimentReport, MethodScores};
use crate::error::Result;

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub reps_csv: PathBuf,
    pub curves_csv: PathBuf,
}

pub fn reps_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "rep,seed,ok,k_hat,mtry_hat,selected,weight_knn,weight_drf,\
         val_knn,val_drf,val_ms,val_ca,test_knn,test_drf,test_ms,test_ca\n",
    );
    for r in &report.reps {
        let w = |i: usize| r.weights.get(i).copied().unwrap_or(f64::NAN);
        let s = |m: &MethodScores| format!("{},{},{},{}", m.knn, m.drf, m.ms, m.ca);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.rep,
            r.seed,
            r.ok,
            r.k_hat,
            r.mtry_hat,
            r.selected,
            w(0),
            w(1),
            s(&r.validation),
            s(&r.test)
        );
    }
    out
}

/// Validation curves of every successful repetition in long format.
pub fn curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("rep,method,parameter,value,validation_crps\n");
    for r in report.ok_reps() {
        for (k, v) in &r.knn_curve {
            let _ = writeln!(out, "{},knn,k,{k},{v}", r.rep);
        }
        for (m, v) in &r.drf_curve {
            let _ = writeln!(out, "{},drf,mtry,{m},{v}", r.rep);
        }
    }
    out
}

/// Writes `report.json`, `reps.csv` and `curves.csv` into `dir`.
///
/// Floats use the shortest round-trip representation, so identical reports
/// give byte-identical files.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        json: dir.join("report.json"),
        reps_csv: dir.join("reps.csv"),
        curves_csv: dir.join("curves.csv"),
    };
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&paths.json, json)?;
    fs::write(&paths.reps_csv, reps_csv(report))?;
    fs::write(&paths.curves_csv, curves_csv(report))?;
    Ok(paths)
}

/// Plain-text table of mean test CRPS with standard errors.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut out = format!(
        "dataset {} (n = {}, d = {}), {} repetitions, {} failed\n",
        report.dataset,
        report.n,
        report.d,
        report.reps.len(),
        report.failed_reps
    );
    match &report.summary {
        None => out.push_str("no successful repetitions\n"),
        Some(s) => {
            out.push_str("method  mean_crps   stderr\n");
            for (name, v) in [("knn", s.knn), ("drf", s.drf), ("ms", s.ms), ("ca", s.ca)] {
                let _ = writeln!(out, "{name:<6}  {:<10.6}  {:.6}", v.mean, v.stderr);
            }
            let _ = writeln!(out, "selection picked drf in {:.1}% of repetitions", 100.0 * report.drf_selected_fraction);
        }
    }
    out
}
