//! Implementations of `validate`, `run` (all tasks), and `plotdata`.
//!
//! Exit-code contract: 0 success, 1 unexpected failure, 2 validation
//! failure, 3 certification failure, 4 non-existence witness produced as
//! expected, 5 unexpected divergence.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use nsfde::brownian::BrownianPath;
use nsfde::counterexample::{
    epsilon_sweep, maxtype_witness, render_epsilon_table, EpsilonWitness, MovingAverageFamily,
    QvVerdict,
};
use nsfde::ensemble::simulate_ensemble;
use nsfde::functional::{decompose, default_mu, select_t1_alpha, FunctionalSpec};
use nsfde::growth::certify;
use nsfde::measure::{DelayMeasure, HalfLineMeasure};
use nsfde::picard::{solve, PicardOptions};
use nsfde::volterra::{compare, solve_volterra, VolterraProblem};

use crate::artifacts::{fl, sha256_hex, ArtifactWriter, CsvBuilder};
use crate::config::{CounterexampleConfig, ExperimentConfig, Task};

/// Exit code for configuration or structural validation failures.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code when a certificate was produced but its checks fail.
pub const EXIT_CERTIFICATION_FAILURE: i32 = 3;
/// Exit code when a non-existence witness was produced as expected.
pub const EXIT_WITNESS: i32 = 4;
/// Exit code when a solve diverged although existence was expected.
pub const EXIT_UNEXPECTED_DIVERGENCE: i32 = 5;

/// Map a library error to the exit-code contract.
fn exit_for(e: &nsfde::Error) -> i32 {
    match e {
        nsfde::Error::Divergence { .. } => EXIT_UNEXPECTED_DIVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn picard_options(config: &ExperimentConfig) -> PicardOptions {
    PicardOptions {
        tol: config.numerics.tol,
        max_iter: config.numerics.max_iter,
        ..PicardOptions::default()
    }
}

/// Resolve the output directory: `--out` beats the config, which beats `.`.
pub fn output_dir(config: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Structural checks without simulation: build the problem, decompose the
/// neutral functional, run interval selection, and (when declared) confirm
/// the growth bounds.  Prints the report and returns the exit code.
pub fn validate(config: &ExperimentConfig) -> anyhow::Result<i32> {
    let mut report = String::new();
    report.push_str("validation report\n");
    report.push_str(&format!("task: {}\n", config.task.name()));
    report.push_str(&format!("tau: {}\n", fl(config.problem.tau)));
    report.push_str(&format!("dim: {}\n", config.problem.dim));
    report.push_str(&format!("horizon: {}\n", fl(config.problem.horizon)));
    report.push_str(&format!("grid_step: {}\n", fl(config.numerics.grid_step)));

    let steps = config.problem.horizon / config.numerics.grid_step;
    if (steps - steps.round()).abs() > 1e-9 * (1.0 + steps.abs()) {
        report.push_str("verdict: horizon is not a multiple of the grid step\n");
        print!("{report}");
        return Ok(EXIT_VALIDATION);
    }

    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => {
            report.push_str(&format!("verdict: invalid problem ({e})\n"));
            print!("{report}");
            return Ok(EXIT_VALIDATION);
        }
    };

    let mao = problem.neutral().check_mao_contraction();
    report.push_str(&format!("kappa: {}\n", fl(mao.kappa)));
    report.push_str(&format!(
        "mao_contraction: {}\n",
        if mao.holds { "holds" } else { "fails" }
    ));

    let dec = match decompose(problem.neutral()) {
        Ok(dec) => dec,
        Err(nsfde::Error::NonAtomicityFailure { rho_at_zero }) => {
            report.push_str(&format!("rho0_at_zero: {}\n", fl(rho_at_zero)));
            report.push_str("verdict: non-atomicity failure\n");
            print!("{report}");
            return Ok(EXIT_VALIDATION);
        }
        Err(e) => {
            report.push_str(&format!("verdict: decomposition failed ({e})\n"));
            print!("{report}");
            return Ok(EXIT_VALIDATION);
        }
    };
    report.push_str(&format!("rho0_at_zero: {}\n", fl(dec.rho_at_zero)));
    report.push_str(&format!("delta_gap: {}\n", fl(dec.delta_gap)));

    let mu = default_mu(dec.rho_at_zero);
    match select_t1_alpha(&dec, problem.lipschitz_k(), mu, config.numerics.grid_step) {
        Ok(sel) => {
            report.push_str(&format!("t1: {}\n", fl(sel.t1)));
            report.push_str(&format!("alpha: {}\n", fl(sel.alpha)));
            report.push_str(&format!("gamma: {}\n", fl(sel.gamma)));
        }
        Err(e) => {
            report.push_str(&format!("verdict: {e}\n"));
            print!("{report}");
            return Ok(EXIT_VALIDATION);
        }
    }

    if config.certify.is_some() {
        match config.build_bounds() {
            Ok(Some(bounds)) => {
                match bounds.validate(&problem, 2_000, config.numerics.seed) {
                    Ok(margin) => {
                        report.push_str(&format!("bounds_margin: {}\n", fl(margin)));
                    }
                    Err(e) => {
                        report.push_str(&format!(
                            "verdict: declared growth bounds rejected ({e})\n"
                        ));
                        print!("{report}");
                        return Ok(EXIT_VALIDATION);
                    }
                }
            }
            Ok(None) => {}
            Err(e) => {
                report.push_str(&format!("verdict: invalid growth bounds ({e})\n"));
                print!("{report}");
                return Ok(EXIT_VALIDATION);
            }
        }
    }

    let verdict = if mao.holds {
        "exists (Mao contraction holds)"
    } else {
        "exists (uniformly non-atomic, Mao contraction fails)"
    };
    report.push_str(&format!("verdict: {verdict}\n"));
    print!("{report}");
    Ok(0)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Maximum number of sample paths recorded in `paths.csv`.
const MAX_RECORDED_PATHS: usize = 16;

/// Execute the configured task, writing artifacts into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> anyhow::Result<i32> {
    let config_hash = sha256_hex(config.canonical_json()?.as_bytes());
    let writer = ArtifactWriter::new(out)?;
    match config.task {
        Task::Solve => run_solve(config, writer, &config_hash),
        Task::Certify => run_certify(config, writer, &config_hash),
        Task::PicardDiagnostics => run_picard_diagnostics(config, writer, &config_hash),
        Task::Counterexample => run_counterexample(config, writer, &config_hash),
        Task::GronwallDemo => run_gronwall_demo(config, writer, &config_hash),
    }
}

fn paths_csv(ensemble_paths: &[nsfde::SolutionPath]) -> String {
    let dim = ensemble_paths.first().map(|p| p.dim()).unwrap_or(1);
    let mut header: Vec<String> = vec!["path".into(), "t".into()];
    for c in 0..dim {
        header.push(format!("x{c}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvBuilder::new(&header_refs);
    for (idx, path) in ensemble_paths.iter().take(MAX_RECORDED_PATHS).enumerate() {
        for k in 0..path.node_count() {
            let mut row = vec![idx.to_string(), fl(path.time(k))];
            for v in path.value(k) {
                row.push(fl(*v));
            }
            csv.row(&row);
        }
    }
    csv.finish()
}

fn moment_csv(ensemble: &nsfde::PathEnsemble) -> String {
    let mut csv = CsvBuilder::new(&["t", "m2", "m2_se"]);
    for point in ensemble.moment_curve(2.0) {
        csv.row(&[fl(point.t), fl(point.mean), fl(point.se)]);
    }
    csv.finish()
}

fn run_solve(
    config: &ExperimentConfig,
    mut writer: ArtifactWriter,
    config_hash: &str,
) -> anyhow::Result<i32> {
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let ensemble = match simulate_ensemble(
        &problem,
        config.problem.horizon,
        config.numerics.n_paths,
        config.numerics.seed,
        &picard_options(config),
    ) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(exit_for(&e));
        }
    };
    writer.write("paths.csv", &paths_csv(ensemble.paths()))?;
    writer.write("diagnostics.csv", &moment_csv(&ensemble))?;
    let manifest = writer.finish(config_hash, config.numerics.seed)?;
    println!(
        "solved {} paths to horizon {}; artifacts in {}",
        ensemble.n_paths(),
        fl(config.problem.horizon),
        manifest.parent().unwrap_or(Path::new(".")).display()
    );
    Ok(0)
}

fn run_certify(
    config: &ExperimentConfig,
    mut writer: ArtifactWriter,
    config_hash: &str,
) -> anyhow::Result<i32> {
    let section = config
        .certify
        .as_ref()
        .expect("checked by ExperimentConfig::check");
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let bounds = match config.build_bounds() {
        Ok(Some(b)) => b,
        Ok(None) => unreachable!("certify section present"),
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let ensemble = match simulate_ensemble(
        &problem,
        config.problem.horizon,
        config.numerics.n_paths,
        config.numerics.seed,
        &picard_options(config),
    ) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(exit_for(&e));
        }
    };
    let certificate = match certify(&problem, &bounds, section.p, section.epsilon, &ensemble) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("certification could not run: {e}");
            return Ok(exit_for(&e));
        }
    };
    writer.write("paths.csv", &paths_csv(ensemble.paths()))?;
    writer.write("diagnostics.csv", &moment_csv(&ensemble))?;
    writer.write("certificate.txt", &certificate.render())?;
    writer.finish(config_hash, config.numerics.seed)?;
    let ok = certificate.checks.mean_ok && certificate.checks.as_ok;
    println!(
        "certified mean rate {} / a.s. rate {}: checks {}",
        fl(certificate.mean_rate),
        fl(certificate.as_rate),
        if ok { "ok" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { EXIT_CERTIFICATION_FAILURE })
}

fn run_picard_diagnostics(
    config: &ExperimentConfig,
    mut writer: ArtifactWriter,
    config_hash: &str,
) -> anyhow::Result<i32> {
    let problem = match config.build_problem() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let h = config.numerics.grid_step;
    let n_steps = (config.problem.horizon / h).round() as usize;
    let m = problem.diffusion().len();
    let noise = if m > 0 {
        Some(BrownianPath::sample(config.numerics.seed, 0, m, h, n_steps))
    } else {
        None
    };
    let (path, diag) = match solve(
        &problem,
        noise.as_ref(),
        config.problem.horizon,
        &picard_options(config),
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(exit_for(&e));
        }
    };
    writer.write("paths.csv", &paths_csv(std::slice::from_ref(&path)))?;
    let mut csv = CsvBuilder::new(&["interval", "iteration", "diff", "gamma_ref"]);
    let gamma = diag.selection.gamma;
    for (i, window) in diag.intervals.iter().enumerate() {
        let scale = window.diffs.first().copied().unwrap_or(0.0);
        for (j, diff) in window.diffs.iter().enumerate() {
            let reference = scale * gamma.powi(j as i32);
            csv.row(&[i.to_string(), j.to_string(), fl(*diff), fl(reference)]);
        }
    }
    writer.write("diagnostics.csv", &csv.finish())?;
    writer.finish(config_hash, config.numerics.seed)?;
    println!(
        "picard diagnostics: t1 {} alpha {} gamma {} over {} windows",
        fl(diag.selection.t1),
        fl(diag.selection.alpha),
        fl(gamma),
        diag.intervals.len()
    );
    Ok(0)
}

fn run_counterexample(
    config: &ExperimentConfig,
    mut writer: ArtifactWriter,
    config_hash: &str,
) -> anyhow::Result<i32> {
    let section = config
        .counterexample
        .as_ref()
        .expect("checked by ExperimentConfig::check");
    match section {
        CounterexampleConfig::MaxType(mt) => {
            let initial = match config.build_initial() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("validation error: {e}");
                    return Ok(EXIT_VALIDATION);
                }
            };
            let report = match maxtype_witness(
                mt.kappa,
                mt.delta_lb,
                &initial,
                mt.t_base,
                config.numerics.n_paths,
                config.numerics.grid_step,
                config.numerics.seed,
            ) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("witness could not run: {e}");
                    return Ok(exit_for(&e));
                }
            };
            writer.write("witness.txt", &report.render())?;
            let mut csv = CsvBuilder::new(&["level", "horizon", "path", "running_max"]);
            for (level, rung) in report.levels.iter().enumerate() {
                for (path, max) in rung.per_path_max.iter().enumerate() {
                    csv.row(&[
                        level.to_string(),
                        fl(rung.horizon),
                        path.to_string(),
                        fl(*max),
                    ]);
                }
            }
            writer.write("diagnostics.csv", &csv.finish())?;
            writer.finish(config_hash, config.numerics.seed)?;
            println!(
                "max-type witness: exceedance frequencies {} -> {} -> {}",
                fl(report.levels[0].frequency),
                fl(report.levels[1].frequency),
                fl(report.levels[2].frequency),
            );
            Ok(EXIT_WITNESS)
        }
        CounterexampleConfig::EpsilonSweep(sweep) => {
            let tau = config.problem.tau;
            let family = match (|| -> nsfde::Result<MovingAverageFamily> {
                let weight = DelayMeasure::from_literal(&sweep.weight, tau)?;
                let drift = FunctionalSpec::from_literal(&sweep.drift, tau, 1)?;
                let initial = config.build_initial()?;
                MovingAverageFamily::new(weight, sweep.map, drift, sweep.sigma, initial)
            })() {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("validation error: {e}");
                    return Ok(EXIT_VALIDATION);
                }
            };
            let cases = match epsilon_sweep(
                &family,
                &sweep.epsilons,
                config.problem.horizon,
                config.numerics.seed,
            ) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    return Ok(exit_for(&e));
                }
            };
            writer.write("witness.txt", &render_epsilon_table(&cases))?;
            let mut csv = CsvBuilder::new(&[
                "epsilon",
                "divided_by_epsilon",
                "rho0_at_zero",
                "rho0_at_tau",
                "exists",
                "integral_residual",
                "probe_floor",
                "qv_ratio",
                "qv_verdict",
            ]);
            for case in &cases {
                let mut row = vec![
                    fl(case.epsilon),
                    case.divided.to_string(),
                    fl(case.rho0_at_zero),
                    fl(case.rho0_at_tau),
                    case.exists.to_string(),
                ];
                match &case.witness {
                    EpsilonWitness::Solved { residual, .. } => {
                        row.push(fl(*residual));
                        row.push(String::new());
                        row.push(String::new());
                        row.push(String::new());
                    }
                    EpsilonWitness::NoSolution { probe_floor, qv, .. } => {
                        row.push(String::new());
                        row.push(fl(*probe_floor));
                        row.push(fl(qv.ratio));
                        row.push(qv.verdict.as_str().to_string());
                    }
                }
                csv.row(&row);
            }
            writer.write("diagnostics.csv", &csv.finish())?;
            writer.finish(config_hash, config.numerics.seed)?;

            let mut refuted = 0usize;
            for case in &cases {
                if let EpsilonWitness::NoSolution { probe_floor, qv, .. } = &case.witness {
                    let floor_needed =
                        0.5 * family.sigma().abs() * config.numerics.grid_step.sqrt();
                    if qv.verdict != QvVerdict::SmoothMismatch || *probe_floor < floor_needed {
                        eprintln!(
                            "witness inconclusive at epsilon {}: verdict {}, floor {}",
                            fl(case.epsilon),
                            qv.verdict.as_str(),
                            fl(*probe_floor)
                        );
                        return Ok(1);
                    }
                    refuted += 1;
                }
            }
            let solved = cases.len() - refuted;
            println!("epsilon sweep: {solved} solved, {refuted} refuted");
            Ok(if refuted > 0 { EXIT_WITNESS } else { 0 })
        }
    }
}

/// Growth constant of the classical comparison demo kernel.
const GRONWALL_DEMO_RATE: f64 = 1.0;

fn run_gronwall_demo(
    config: &ExperimentConfig,
    mut writer: ArtifactWriter,
    config_hash: &str,
) -> anyhow::Result<i32> {
    let h = config.numerics.grid_step;
    let horizon = config.problem.horizon;
    let n = (horizon / h).round() as usize;
    if ((horizon / h) - n as f64).abs() > 1e-9 * (1.0 + n as f64) {
        eprintln!("validation error: horizon is not a multiple of the grid step");
        return Ok(EXIT_VALIDATION);
    }
    let kernel = match HalfLineMeasure::constant_density(0.0, horizon + 1.0, GRONWALL_DEMO_RATE) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let forcing = vec![1.0; n + 1];
    let problem = match VolterraProblem::new(kernel, forcing.clone(), h) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("validation error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let bound = match solve_volterra(&problem) {
        Ok(z) => z,
        Err(e) => {
            eprintln!("comparison demo failed: {e}");
            return Ok(exit_for(&e));
        }
    };
    // A dominated trajectory: same kernel, forcing reduced by a nonnegative
    // perturbation, which must stay below the bound node by node.
    let reduced: Vec<f64> = (0..=n)
        .map(|i| 1.0 - 0.2 * (1.0 + (i as f64 * h).sin()) / 2.0)
        .collect();
    let reduced_problem =
        VolterraProblem::new(problem.kernel().clone(), reduced, h).expect("same shape");
    let dominated = match solve_volterra(&reduced_problem) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("comparison demo failed: {e}");
            return Ok(exit_for(&e));
        }
    };
    let report = match compare(&dominated, &problem) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("comparison demo failed: {e}");
            return Ok(exit_for(&e));
        }
    };

    let mut csv = CsvBuilder::new(&["t", "dominated", "bound", "reference"]);
    let mut max_ref_err = 0.0f64;
    for i in 0..=n {
        let t = i as f64 * h;
        let reference = (GRONWALL_DEMO_RATE * t).exp();
        max_ref_err = max_ref_err.max((bound[i] - reference).abs());
        csv.row(&[fl(t), fl(dominated[i]), fl(bound[i]), fl(reference)]);
    }
    writer.write("diagnostics.csv", &csv.finish())?;
    writer.finish(config_hash, config.numerics.seed)?;
    println!(
        "comparison demo: dominated {} (max violation {}), exp reference error {}",
        report.dominated,
        fl(report.max_violation),
        fl(max_ref_err)
    );
    Ok(if report.dominated { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// plotdata
// ---------------------------------------------------------------------------

/// Minimal CSV reader for our own artifacts: header plus rows, comma
/// separated, no quoting (we never emit quoted fields).
fn read_csv(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| anyhow!("schema error: {} is empty", path.display()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn parse_field(row: &[String], idx: usize, what: &str) -> anyhow::Result<f64> {
    row.get(idx)
        .ok_or_else(|| anyhow!("schema error: missing column {idx} ({what})"))?
        .parse::<f64>()
        .with_context(|| format!("schema error: bad {what} value"))
}

/// Reshape run artifacts in `dir` into gnuplot-friendly `.dat` files with
/// `x y yerr`-style columns, written into `out`.
pub fn plotdata(dir: &Path, out: &Path) -> anyhow::Result<i32> {
    if !dir.is_dir() {
        eprintln!("schema error: {} is not a directory", dir.display());
        return Ok(EXIT_VALIDATION);
    }
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let mut produced = Vec::new();

    let paths_csv = dir.join("paths.csv");
    if paths_csv.exists() {
        match build_paths_dat(&paths_csv) {
            Ok(text) => {
                std::fs::write(out.join("paths.dat"), text)?;
                produced.push("paths.dat");
            }
            Err(e) => {
                eprintln!("{e:#}");
                return Ok(EXIT_VALIDATION);
            }
        }
    }

    let diagnostics_csv = dir.join("diagnostics.csv");
    if diagnostics_csv.exists() {
        let (header, rows) = match read_csv(&diagnostics_csv) {
            Ok(hr) => hr,
            Err(e) => {
                eprintln!("{e:#}");
                return Ok(EXIT_VALIDATION);
            }
        };
        let shape: Vec<&str> = header.iter().map(String::as_str).collect();
        let built = match shape.as_slice() {
            ["t", "m2", "m2_se"] => {
                let rate = read_certified_rate(&dir.join("certificate.txt"));
                Some(("moments.dat", build_moments_dat(&rows, rate)))
            }
            ["interval", "iteration", "diff", "gamma_ref"] => {
                Some(("picard.dat", build_picard_dat(&rows)))
            }
            ["t", "dominated", "bound", "reference"] => {
                Some(("gronwall.dat", build_gronwall_dat(&rows)))
            }
            _ => None,
        };
        if let Some((name, result)) = built {
            match result {
                Ok(text) => {
                    std::fs::write(out.join(name), text)?;
                    produced.push(name);
                }
                Err(e) => {
                    eprintln!("{e:#}");
                    return Ok(EXIT_VALIDATION);
                }
            }
        }
    }

    if produced.is_empty() {
        eprintln!(
            "schema error: no recognized figure data in {}",
            dir.display()
        );
        return Ok(EXIT_VALIDATION);
    }
    println!("wrote {}", produced.join(", "));
    Ok(0)
}

fn build_paths_dat(path: &Path) -> anyhow::Result<String> {
    let (header, rows) = read_csv(path)?;
    if header.len() < 3 || header[0] != "path" || header[1] != "t" {
        bail!("schema error: paths.csv must start with path,t columns");
    }
    if rows.is_empty() {
        bail!("schema error: paths.csv has no sample paths");
    }
    let mut out = String::from("# sample paths: t x...; blocks per path\n");
    let mut current: Option<&str> = None;
    for row in &rows {
        if row.len() != header.len() {
            bail!("schema error: ragged row in paths.csv");
        }
        let id = row[0].as_str();
        if current != Some(id) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            current = Some(id);
        }
        out.push_str(&row[1..].join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Read `mean_rate: <float>` from a certificate, if present.
fn read_certified_rate(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(path).ok()?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("mean_rate: ") {
            return rest.trim().parse().ok();
        }
    }
    None
}

fn build_moments_dat(rows: &[Vec<String>], rate: Option<f64>) -> anyhow::Result<String> {
    if rows.is_empty() {
        bail!("schema error: empty ensemble (no moment rows)");
    }
    let mut out = String::from("# log second moment: t ln_m2 yerr\n");
    let mut anchor: Option<(f64, f64)> = None;
    let mut curve = Vec::new();
    for row in rows {
        let t = parse_field(row, 0, "t")?;
        let m2 = parse_field(row, 1, "m2")?;
        let se = parse_field(row, 2, "m2_se")?;
        if m2 > 0.0 {
            let ln = m2.ln();
            if anchor.is_none() {
                anchor = Some((t, ln));
            }
            curve.push((t, ln, se / m2));
        }
    }
    if curve.is_empty() {
        bail!("schema error: no positive moment values to plot");
    }
    for (t, ln, err) in &curve {
        out.push_str(&format!("{} {} {}\n", fl(*t), fl(*ln), fl(*err)));
    }
    if let (Some(rate), Some((t0, ln0))) = (rate, anchor) {
        out.push_str("\n\n# certified-rate reference line: t value 0\n");
        for (t, _, _) in &curve {
            let reference = ln0 + rate * (t - t0);
            out.push_str(&format!("{} {} {}\n", fl(*t), fl(reference), fl(0.0)));
        }
    }
    Ok(out)
}

fn build_picard_dat(rows: &[Vec<String>]) -> anyhow::Result<String> {
    if rows.is_empty() {
        bail!("schema error: no iteration rows to plot");
    }
    let mut out =
        String::from("# per-window contraction: iteration diff gamma_reference; blocks per window\n");
    let mut current: Option<&str> = None;
    for row in rows {
        let interval = row
            .first()
            .ok_or_else(|| anyhow!("schema error: missing interval column"))?
            .as_str();
        let iteration = parse_field(row, 1, "iteration")?;
        let diff = parse_field(row, 2, "diff")?;
        let reference = parse_field(row, 3, "gamma_ref")?;
        if current != Some(interval) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            current = Some(interval);
        }
        out.push_str(&format!("{} {} {}\n", iteration, fl(diff), fl(reference)));
    }
    Ok(out)
}

fn build_gronwall_dat(rows: &[Vec<String>]) -> anyhow::Result<String> {
    if rows.is_empty() {
        bail!("schema error: no comparison rows to plot");
    }
    let mut out = String::from("# comparison bound: t bound classical_reference\n");
    for row in rows {
        let t = parse_field(row, 0, "t")?;
        let bound = parse_field(row, 2, "bound")?;
        let reference = parse_field(row, 3, "reference")?;
        out.push_str(&format!("{} {} {}\n", fl(t), fl(bound), fl(reference)));
    }
    Ok(out)
}
