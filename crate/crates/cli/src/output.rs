//! Artifact writers: CSV records, the sweep manifest, and atomic file
//! placement (temp + rename, so concurrent sweep points never interleave).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use spoofsim_core::detect::DetCurve;
use spoofsim_core::divergence::ScenarioAnalysis;
use spoofsim_core::Scenario;

/// Write `contents` to `path` through a temporary file in the same
/// directory, creating parent directories as needed.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// DET curve rows: one line per swept threshold.
pub fn det_csv(sc: &Scenario, curve: &DetCurve) -> String {
    let mut out = String::with_capacity(64 * curve.points.len());
    out.push_str("detector,n,m,snr_sb_db,snr_se_db,theta,alpha,beta,ci_alpha,ci_beta,d_forward\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            curve.detector,
            sc.n,
            sc.m,
            sc.snr_sb_db(),
            sc.snr_se_db(),
            p.theta,
            p.alpha,
            p.beta,
            p.ci_alpha,
            p.ci_beta,
            curve.d_forward
        )
        .expect("string write");
    }
    out
}

/// Flat key,value record of a scenario analysis.
pub fn analysis_csv(sc: &Scenario, analysis: &ScenarioAnalysis) -> String {
    let mut out = String::new();
    out.push_str("key,value\n");
    let rep = &analysis.report;
    let rows: Vec<(&str, String)> = vec![
        ("m", sc.m.to_string()),
        ("n", sc.n.to_string()),
        ("mx", sc.mx.to_string()),
        ("sigma_b2", sc.sigma_b2.to_string()),
        ("sigma_bt2", sc.sigma_bt2.to_string()),
        ("sigma_e2", sc.sigma_e2.to_string()),
        ("snr_sb_db", sc.snr_sb_db().to_string()),
        ("snr_se_db", sc.snr_se_db().to_string()),
        ("signaling", sc.signaling.to_string()),
        ("seed", sc.seed.to_string()),
        ("trials", sc.trials.to_string()),
        ("classification", analysis.classification.to_string()),
        ("kernel_separates", analysis.kernel_separates.to_string()),
        ("feasible", analysis.feasibility.feasible.to_string()),
        ("margin", analysis.feasibility.margin.to_string()),
        ("lambda_max", analysis.feasibility.lambda_max.to_string()),
        ("t1", rep.t1.to_string()),
        ("t2", rep.t2.to_string()),
        ("f_forward", rep.f_forward.to_string()),
        ("f_reverse", rep.f_reverse.to_string()),
        ("d_min", rep.d_min.to_string()),
        ("k", rep.k.to_string()),
        ("lambda0", rep.lambda0.to_string()),
    ];
    for (k, v) in rows {
        writeln!(out, "{k},{v}").expect("string write");
    }
    out
}

/// Bound curve rows.
pub fn bound_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("alpha,beta_min\n");
    for (alpha, beta) in points {
        writeln!(out, "{alpha},{beta}").expect("string write");
    }
    out
}

/// Dense matrix dump for debugging.
pub fn matrix_csv(m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(out, "{}", row.join(",")).expect("string write");
    }
    out
}
