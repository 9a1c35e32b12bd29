//! `spoofsim`: scenario analysis, DET estimation, and parameter sweeps
//! from the command line.
//!
//! Exit codes: 0 on success, 2 on configuration/validation errors, 3 when
//! `--strict-feasibility` is set and the optimal attack is infeasible,
//! 1 on other failures.

mod output;
mod svg;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use spoofsim_core::channel::ChannelSet;
use spoofsim_core::detect::{estimate_det, DetCurve, Detector};
use spoofsim_core::divergence::{analyze_scenario, bound_curve, ScenarioAnalysis};
use spoofsim_core::error::Error;
use spoofsim_core::scenario::{load_scenario, normalize_delays, Scenario, Signaling};

#[derive(Parser)]
#[command(name = "spoofsim", version, about = "Spoofing attack synthesis and detection analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the Monte-Carlo trial count per hypothesis.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output directory for CSV/SVG artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Fail (exit 3) when the optimal attack is infeasible for a scenario.
    #[arg(long, global = true)]
    strict_feasibility: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print and persist the divergence analysis of a scenario.
    Analyze {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Also dump the A, F, and B matrices as CSV.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Estimate a DET curve and emit CSV and SVG.
    Det {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Detection statistic: lrt or glrt.
        #[arg(long)]
        detector: String,
    },
    /// Run a parameter sweep described by a sweep spec file.
    Sweep {
        /// Sweep spec TOML file.
        spec: PathBuf,
    },
    /// Emit the analytic error-region bound for a divergence value.
    Bound {
        /// Divergence value D.
        #[arg(long)]
        d: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Invalid { .. } => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Analyze { scenario, dump_matrices } => cmd_analyze(cli, scenario, *dump_matrices),
        Command::Det { scenario, detector } => cmd_det(cli, scenario, detector),
        Command::Sweep { spec } => cmd_sweep(cli, spec),
        Command::Bound { d } => cmd_bound(cli, *d),
    }
}

fn load_with_overrides(cli: &Cli, path: &Path) -> Result<Scenario, Error> {
    let mut sc = load_scenario(path)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    if let Some(trials) = cli.trials {
        sc.trials = trials;
    }
    sc.validate()?;
    Ok(sc)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn print_analysis(sc: &Scenario, analysis: &ScenarioAnalysis) {
    let rep = &analysis.report;
    println!("m                {}", sc.m);
    println!("n                {}", sc.n);
    println!("signaling        {}", sc.signaling);
    println!("snr_sb_db        {:.4}", sc.snr_sb_db());
    println!("snr_se_db        {:.4}", sc.snr_se_db());
    println!("classification   {}", analysis.classification);
    println!("kernel_separates {}", analysis.kernel_separates);
    println!(
        "feasible         {} (margin {:.6e}, lambda_max {:.6})",
        analysis.feasibility.feasible, analysis.feasibility.margin, analysis.feasibility.lambda_max
    );
    println!("t1               {:.9e}", rep.t1);
    println!("t2               {:.9e}", rep.t2);
    println!("f_forward        {:.9e}", rep.f_forward);
    println!("f_reverse        {:.9e}", rep.f_reverse);
    println!("d_min            {:.9e}", rep.d_min);
    println!("k                {:.9}", rep.k);
    println!("lambda0          {:.9}", rep.lambda0);
}

fn cmd_analyze(cli: &Cli, path: &Path, dump_matrices: bool) -> Result<i32, Error> {
    let sc = load_with_overrides(cli, path)?;
    let analysis = analyze_scenario(&sc)?;
    print_analysis(&sc, &analysis);
    let base = cli.out.join(format!("{}_analysis.csv", stem(path)));
    output::write_atomic(&base, &output::analysis_csv(&sc, &analysis))?;
    println!("report           {}", base.display());
    if dump_matrices {
        let ch = ChannelSet::from_scenario(&sc)?;
        for (name, m) in [
            ("a", ch.a.matrix()),
            ("f", ch.f.matrix()),
            ("b", &analysis.policy.b),
        ] {
            let p = cli.out.join(format!("{}_matrix_{name}.csv", stem(path)));
            output::write_atomic(&p, &output::matrix_csv(m))?;
        }
    }
    if cli.strict_feasibility && !analysis.feasibility.feasible {
        eprintln!(
            "infeasible attack shaping (margin {:.6e}) with --strict-feasibility",
            analysis.feasibility.margin
        );
        return Ok(3);
    }
    Ok(0)
}

fn run_det(sc: &Scenario, detector: Detector) -> Result<(ScenarioAnalysis, DetCurve), Error> {
    let analysis = analyze_scenario(sc)?;
    let channels = ChannelSet::from_scenario(sc)?;
    let curve = estimate_det(sc, &channels, detector, &analysis.policy, None)?;
    Ok((analysis, curve))
}

fn cmd_det(cli: &Cli, path: &Path, detector: &str) -> Result<i32, Error> {
    let detector: Detector = detector.parse()?;
    let sc = load_with_overrides(cli, path)?;
    let analysis = analyze_scenario(&sc)?;
    if cli.strict_feasibility && !analysis.feasibility.feasible {
        eprintln!(
            "infeasible attack shaping (margin {:.6e}) with --strict-feasibility",
            analysis.feasibility.margin
        );
        return Ok(3);
    }
    let channels = ChannelSet::from_scenario(&sc)?;
    let curve = estimate_det(&sc, &channels, detector, &analysis.policy, None)?;
    let name = format!("{}_det_{detector}", stem(path));
    let csv_path = cli.out.join(format!("{name}.csv"));
    let svg_path = cli.out.join(format!("{name}.svg"));
    output::write_atomic(&csv_path, &output::det_csv(&sc, &curve))?;
    let title = format!(
        "{} DET, m={}, n={}, SNR_SB={:.1} dB",
        detector.to_string().to_uppercase(),
        sc.m,
        sc.n,
        sc.snr_sb_db()
    );
    output::write_atomic(&svg_path, &svg::det_plot(&[(detector.to_string(), &curve)], &title))?;
    println!("d_forward {:.6e}", curve.d_forward);
    println!("csv       {}", csv_path.display());
    println!("svg       {}", svg_path.display());
    Ok(0)
}

fn cmd_bound(cli: &Cli, d: f64) -> Result<i32, Error> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::invalid("d", "must be a nonnegative divergence"));
    }
    let grid = spoofsim_core::detect::log_alpha_grid(1e-4, 1.0, 200);
    let points = bound_curve(d, &grid);
    let path = cli.out.join(format!("bound_d{d}.csv"));
    output::write_atomic(&path, &output::bound_csv(&points))?;
    println!("csv {}", path.display());
    Ok(0)
}

// --- sweep ------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: String,
    detector: String,
    values: toml::Value,
    base: toml::Value,
}

#[derive(Debug, Clone)]
enum SweepValue {
    N(usize),
    SnrSbDb(f64),
    SnrSeDb(f64),
    Signaling(Signaling),
    Positions {
        label: String,
        tau_eve: Vec<usize>,
        tau_forged: Vec<usize>,
    },
}

impl SweepValue {
    fn label(&self) -> String {
        match self {
            SweepValue::N(v) => format!("n_{v}"),
            SweepValue::SnrSbDb(v) => format!("snr_sb_{v}"),
            SweepValue::SnrSeDb(v) => format!("snr_se_{v}"),
            SweepValue::Signaling(s) => format!("sig_{s}"),
            SweepValue::Positions { label, .. } => format!("pos_{label}"),
        }
    }

    fn apply(&self, base: &Scenario) -> Result<Scenario, Error> {
        let mut sc = base.clone();
        match self {
            SweepValue::N(v) => sc.n = *v,
            SweepValue::SnrSbDb(db) => sc.sigma_b2 = sc.mx / (2.0 * 10f64.powf(db / 10.0)),
            SweepValue::SnrSeDb(db) => sc.sigma_e2 = sc.mx / (2.0 * 10f64.powf(db / 10.0)),
            SweepValue::Signaling(s) => sc.signaling = *s,
            SweepValue::Positions {
                tau_eve,
                tau_forged,
                ..
            } => {
                sc.tau_eve = tau_eve.clone();
                sc.tau_forged = tau_forged.clone();
                sc.tau_bob = tau_forged.clone();
                normalize_delays(&mut sc.tau_eve);
                normalize_delays(&mut sc.tau_forged);
                normalize_delays(&mut sc.tau_bob);
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn delays_from_toml(field: &str, v: &toml::Value) -> Result<Vec<usize>, Error> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::invalid(field, "must be an array of delays"))?;
    arr.iter()
        .map(|x| {
            x.as_integer()
                .filter(|&i| i >= 0)
                .map(|i| i as usize)
                .ok_or_else(|| Error::invalid(field, "delays must be integers ≥ 0"))
        })
        .collect()
}

fn parse_values(axis: &str, values: &toml::Value) -> Result<Vec<SweepValue>, Error> {
    let arr = values
        .as_array()
        .ok_or_else(|| Error::invalid("values", "must be an array"))?;
    if arr.is_empty() {
        return Err(Error::invalid("values", "must be non-empty"));
    }
    let as_f64 =
        |v: &toml::Value| -> Option<f64> { v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) };
    arr.iter()
        .enumerate()
        .map(|(idx, v)| match axis {
            "n" => v
                .as_integer()
                .filter(|&i| i >= 1)
                .map(|i| SweepValue::N(i as usize))
                .ok_or_else(|| Error::invalid("values", "n values must be integers ≥ 1")),
            "snr_sb" => as_f64(v)
                .map(SweepValue::SnrSbDb)
                .ok_or_else(|| Error::invalid("values", "snr_sb values must be numbers (dB)")),
            "snr_se" => as_f64(v)
                .map(SweepValue::SnrSeDb)
                .ok_or_else(|| Error::invalid("values", "snr_se values must be numbers (dB)")),
            "signaling" => match v.as_str() {
                Some("gaussian") => Ok(SweepValue::Signaling(Signaling::Gaussian)),
                Some("bpsk") => Ok(SweepValue::Signaling(Signaling::Bpsk)),
                _ => Err(Error::invalid(
                    "values",
                    "signaling values must be \"gaussian\" or \"bpsk\"",
                )),
            },
            "positions" => {
                let table = v
                    .as_table()
                    .ok_or_else(|| Error::invalid("values", "positions values must be tables"))?;
                let label = table
                    .get("label")
                    .and_then(|l| l.as_str())
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| idx.to_string());
                let tau_eve = delays_from_toml(
                    "tau_eve",
                    table
                        .get("tau_eve")
                        .ok_or_else(|| Error::invalid("tau_eve", "is required per positions value"))?,
                )?;
                let tau_forged = delays_from_toml(
                    "tau_forged",
                    table
                        .get("tau_forged")
                        .ok_or_else(|| Error::invalid("tau_forged", "is required per positions value"))?,
                )?;
                Ok(SweepValue::Positions {
                    label,
                    tau_eve,
                    tau_forged,
                })
            }
            other => Err(Error::invalid("axis", format!("unknown sweep axis {other:?}"))),
        })
        .collect()
}

struct SweepOutcome {
    label: String,
    result: Result<(ScenarioAnalysis, DetCurve, Scenario), Error>,
}

fn cmd_sweep(cli: &Cli, spec_path: &Path) -> Result<i32, Error> {
    let text = std::fs::read_to_string(spec_path)?;
    let spec: SweepFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let detector: Detector = spec.detector.parse()?;

    let mut base = match &spec.base {
        toml::Value::String(rel) => {
            let p = spec_path.parent().unwrap_or_else(|| Path::new(".")).join(rel);
            load_scenario(p)?
        }
        toml::Value::Table(_) => {
            let rendered = toml::to_string(&spec.base).map_err(|e| Error::Parse(e.to_string()))?;
            Scenario::from_toml_str(&rendered)?
        }
        _ => return Err(Error::invalid("base", "must be a scenario table or a file path")),
    };
    if let Some(seed) = cli.seed {
        base.seed = seed;
    }
    if let Some(trials) = cli.trials {
        base.trials = trials;
    }
    let values = parse_values(&spec.axis, &spec.values)?;

    // Points run in a work pool; each writes its own files afterwards, in
    // spec order, so reruns produce identical artifacts.
    let outcomes: Vec<SweepOutcome> = values
        .par_iter()
        .map(|value| {
            let label = value.label();
            let result = value
                .apply(&base)
                .and_then(|sc| run_det(&sc, detector).map(|(a, c)| (a, c, sc)));
            SweepOutcome { label, result }
        })
        .collect();

    let mut manifest_points = Vec::new();
    let mut overlay: Vec<(String, DetCurve)> = Vec::new();
    let mut any_infeasible = false;
    for outcome in &outcomes {
        match &outcome.result {
            Ok((analysis, curve, sc)) => {
                let det_name = format!("{}_det_{detector}", outcome.label);
                let csv_path = cli.out.join(format!("{det_name}.csv"));
                let svg_path = cli.out.join(format!("{det_name}.svg"));
                let analysis_path = cli.out.join(format!("{}_analysis.csv", outcome.label));
                output::write_atomic(&csv_path, &output::det_csv(sc, curve))?;
                output::write_atomic(
                    &svg_path,
                    &svg::det_plot(
                        &[(outcome.label.clone(), curve)],
                        &format!("{} DET ({})", detector.to_string().to_uppercase(), outcome.label),
                    ),
                )?;
                output::write_atomic(&analysis_path, &output::analysis_csv(sc, analysis))?;
                any_infeasible |= !analysis.feasibility.feasible;
                manifest_points.push(serde_json::json!({
                    "label": outcome.label,
                    "status": "ok",
                    "csv": csv_path.to_string_lossy(),
                    "svg": svg_path.to_string_lossy(),
                    "analysis": analysis_path.to_string_lossy(),
                    "d_forward": curve.d_forward,
                    "feasible": analysis.feasibility.feasible,
                }));
                overlay.push((outcome.label.clone(), curve.clone()));
            }
            Err(e) => {
                manifest_points.push(serde_json::json!({
                    "label": outcome.label,
                    "status": "error",
                    "error": e.to_string(),
                }));
            }
        }
    }

    if overlay.len() > 1 {
        let refs: Vec<(String, &DetCurve)> = overlay.iter().map(|(l, c)| (l.clone(), c)).collect();
        let combined = cli.out.join(format!("sweep_{}_combined.svg", spec.axis));
        output::write_atomic(
            &combined,
            &svg::det_plot(
                &refs,
                &format!("{} DET sweep over {}", detector.to_string().to_uppercase(), spec.axis),
            ),
        )?;
        println!("combined {}", combined.display());
    }

    let manifest = serde_json::json!({
        "axis": spec.axis,
        "detector": detector.to_string(),
        "points": manifest_points,
    });
    let manifest_path = cli.out.join("sweep_manifest.json");
    output::write_atomic(
        &manifest_path,
        &format!("{}\n", serde_json::to_string_pretty(&manifest).expect("manifest serializes")),
    )?;
    println!("manifest {}", manifest_path.display());

    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} sweep point(s) failed; see the manifest");
    }
    if cli.strict_feasibility && any_infeasible {
        eprintln!("sweep contains infeasible points with --strict-feasibility");
        return Ok(3);
    }
    Ok(if failed > 0 { 1 } else { 0 })
}
