//! Command-line front end: load activation matrices from CSV, compute
//! measure suites, run verification, and run the experiment harnesses.
//!
//! Exit codes: 0 ok, 2 parse/I-O, 3 dimension mismatch, 4 degenerate
//! input, 5 numerical/not-PSD, 6 verification failure.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use crate::duality::{
    envelope_bounds, fuchs_van_de_graaf, sqrt_cka, verify_duality, BoundReport, DualityReport,
    EnvelopeReport,
};
use crate::error::{Error, Result};
use crate::experiments::{
    emit_table, median_errors_by_size, run_convergence_neurons, run_convergence_stimuli,
    run_envelope, ConvergenceConfig, ConvergenceMode, EnvelopeConfig, EnvelopeScheme, TableFormat,
};
use crate::linalg::{random_gaussian, trial_rng, DataMatrix, PsdMatrix, Tolerances};
use crate::measures::{linear_kernels, similarity_report, KernelPair, Measure, SimilarityReport};

const EXIT_OK: i32 = 0;
const EXIT_VERIFICATION: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "repsim",
    version,
    about = "Representational similarity measures, duality verification, and experiment harnesses",
    after_help = "Exit codes: 0 ok, 2 parse/I-O, 3 dimension mismatch, \
                  4 degenerate input, 5 numerical/not-PSD, 6 verification failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute similarity measures between two activation matrices.
    Compare(CompareArgs),
    /// Verify the duality identities and CKA/NBS bounds.
    Verify(VerifyArgs),
    /// Sample kernel pairs and tabulate CKA, NBS, and their bounds.
    Envelope(EnvelopeArgs),
    /// Tabulate convergence of the normalized distances with sample size.
    Converge(ConvergeArgs),
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// CSV file with the first activation matrix (rows = stimuli).
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    /// CSV file with the second activation matrix (rows = stimuli).
    #[arg(long, value_name = "FILE")]
    y: PathBuf,
    /// Comma-separated measures to compute.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "procrustes,riemannian,cka,nbs,bures"
    )]
    measures: Vec<String>,
    /// Output format for the report.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// CSV file with the first matrix.
    #[arg(long, value_name = "FILE", required_unless_present = "random")]
    x: Option<PathBuf>,
    /// CSV file with the second matrix.
    #[arg(long, value_name = "FILE", required_unless_present = "random")]
    y: Option<PathBuf>,
    /// Treat the input files as M x M kernel matrices instead of
    /// activations; checks the CKA/NBS bounds (the duality identities
    /// need activation matrices and are skipped).
    #[arg(long, conflicts_with = "random")]
    kernels: bool,
    /// Verify on this many randomly sampled activation pairs instead of
    /// files.
    #[arg(long, value_name = "TRIALS", conflicts_with_all = ["x", "y"])]
    random: Option<usize>,
    /// Master seed for --random (REPSIM_SEED overrides the default).
    #[arg(long, env = "REPSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Pin the sampled dimensions to M,NX,NY; by default each trial draws
    /// M in [3,40] and NX, NY in [1,25].
    #[arg(long, value_name = "M,NX,NY", value_delimiter = ',')]
    dims: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct EnvelopeArgs {
    /// Kernel dimension p.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Degrees of freedom for sqrt(K_X) ~ W_p(I, dof_x).
    #[arg(long = "dof-x", default_value_t = 1)]
    dof_x: usize,
    /// Degrees of freedom for sqrt(K_Y) under the independent scheme.
    #[arg(long = "dof-y", default_value_t = 5)]
    dof_y: usize,
    /// Degrees of freedom of the perturbation under the perturbed scheme.
    #[arg(long = "dof-eps", default_value_t = 4)]
    dof_eps: usize,
    /// Sampling scheme.
    #[arg(long, default_value = "independent", value_parser = ["independent", "perturbed"])]
    scheme: String,
    /// Number of sampled kernel pairs.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Master seed (REPSIM_SEED overrides the default).
    #[arg(long, env = "REPSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file for the table.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Table format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    /// Which dimension grows: 'stimuli' (M) or 'neurons' (N).
    #[arg(long, default_value = "stimuli", value_parser = ["stimuli", "neurons"])]
    mode: String,
    /// The dimension held fixed while the other grows.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Comma-separated sample-size grid, strictly increasing.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "16,32,64,128,256,512,1024,2048,4096"
    )]
    sizes: Vec<usize>,
    /// Trials per grid size. Medians over fewer than ~40 trials are noisy
    /// enough that strict monotonicity may not show.
    #[arg(long, default_value_t = 60)]
    trials: usize,
    /// Master seed (REPSIM_SEED overrides the default).
    #[arg(long, env = "REPSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file for the table.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Table format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

/// Parses `std::env::args` and runs the selected command, returning the
/// process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compare(args) => cmd_compare(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Envelope(args) => cmd_envelope(&args),
        Command::Converge(args) => cmd_converge(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Reads a matrix from CSV: one row per line, comma-separated finite
/// decimal floats, optional leading '#' comment lines. Errors carry
/// 1-based line/column positions.
pub fn read_matrix_csv(path: &Path) -> Result<DataMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        let mut column = 1usize;
        for cell in line.split(',') {
            let cell_trimmed = cell.trim();
            let value = cell_trimmed.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                column,
                message: format!("cannot parse '{cell_trimmed}' as a decimal float"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    column,
                    message: format!("non-finite value '{cell_trimmed}'"),
                });
            }
            row.push(value);
            column += cell.len() + 1;
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    column: 1,
                    message: format!("expected {w} columns, found {}", row.len()),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "no data rows".to_string(),
        });
    }
    DataMatrix::from_rows(&rows)
}

fn load_matrix(path: &Path, label: &str) -> Result<DataMatrix> {
    let m = read_matrix_csv(path)?;
    eprintln!(
        "loaded {label}: {} rows (stimuli) x {} cols (neurons) from {}",
        m.nrows(),
        m.ncols(),
        path.display()
    );
    Ok(m)
}

fn parse_measures(names: &[String]) -> Result<Vec<Measure>> {
    if names.is_empty() {
        return Err(Error::degenerate("at least one measure is required"));
    }
    names.iter().map(|n| Measure::from_str(n)).collect()
}

fn report_to_csv(report: &SimilarityReport) -> String {
    let mut out = String::from("measure,value,error\n");
    for r in &report.results {
        let value = r
            .value
            .map(crate::experiments::format_float)
            .unwrap_or_default();
        let error = r.error.clone().unwrap_or_default().replace(',', ";");
        out.push_str(&format!("{},{},{}\n", r.measure, value, error));
    }
    out
}

fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let measures = parse_measures(&args.measures)?;
    let x = load_matrix(&args.x, "X")?;
    let y = load_matrix(&args.y, "Y")?;
    let tol = Tolerances::default();
    let report = similarity_report(&x, &y, &measures, &tol)?;

    match args.format.as_str() {
        "json" => println!(
            "{}",
            serde_json::to_string_pretty(&report)
                .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?
        ),
        _ => print!("{}", report_to_csv(&report)),
    }

    // Per-measure failures leave the rest of the report intact but decide
    // the exit code by severity (lowest code wins).
    let mut code = EXIT_OK;
    for r in &report.results {
        if let Some(measure_code) = r.exit_code {
            eprintln!(
                "measure '{}' failed: {}",
                r.measure,
                r.error.as_deref().unwrap_or("unknown")
            );
            if code == EXIT_OK || measure_code < code {
                code = measure_code;
            }
        }
    }
    Ok(code)
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    mode: &'static str,
    trials: usize,
    passed: usize,
    max_bures_vs_procrustes_abs_err: f64,
    max_nbs_vs_cos_theta_abs_err: f64,
    max_fidelity_vs_nuclear_abs_err: f64,
    bound_violations: usize,
    pass: bool,
    first_failure: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyFileReport {
    duality: Option<DualityReport>,
    envelope: EnvelopeReport,
    fuchs_van_de_graaf: BoundReport,
    sqrt_cka: f64,
    pass: bool,
}

fn read_kernel_csv(path: &Path, tol: &Tolerances) -> Result<PsdMatrix> {
    let data = read_matrix_csv(path)?;
    PsdMatrix::new(data.into_matrix(), tol)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let tol = Tolerances::default();

    if let Some(trials) = args.random {
        if trials < 1 {
            return Err(Error::degenerate("--random needs at least one trial"));
        }
        if let Some(dims) = &args.dims {
            if dims.len() != 3 || dims.iter().any(|&d| d < 1) {
                return Err(Error::dimension_mismatch(
                    "--dims expects three positive values M,NX,NY",
                ));
            }
        }
        let mut summary = VerifySummary {
            mode: "random",
            trials,
            passed: 0,
            max_bures_vs_procrustes_abs_err: 0.0,
            max_nbs_vs_cos_theta_abs_err: 0.0,
            max_fidelity_vs_nuclear_abs_err: 0.0,
            bound_violations: 0,
            pass: true,
            first_failure: None,
        };
        for trial in 0..trials {
            let mut rng = trial_rng(args.seed, trial as u64);
            let (m, nx, ny) = match &args.dims {
                Some(dims) => (dims[0], dims[1], dims[2]),
                None => (
                    rng.random_range(3..=40),
                    rng.random_range(1..=25),
                    rng.random_range(1..=25),
                ),
            };
            let x = random_gaussian(m, nx, &mut rng);
            let y = random_gaussian(m, ny, &mut rng);
            let report = verify_duality(&x, &y, &tol)?;
            summary.max_bures_vs_procrustes_abs_err = summary
                .max_bures_vs_procrustes_abs_err
                .max(report.bures_vs_procrustes_abs_err);
            summary.max_nbs_vs_cos_theta_abs_err = summary
                .max_nbs_vs_cos_theta_abs_err
                .max(report.nbs_vs_cos_theta_abs_err);
            summary.max_fidelity_vs_nuclear_abs_err = summary
                .max_fidelity_vs_nuclear_abs_err
                .max(report.fidelity_vs_nuclear_abs_err);
            if report.pass {
                summary.passed += 1;
            } else if summary.first_failure.is_none() {
                summary.first_failure = Some(format!("duality check failed on trial {trial}"));
            }
            let kernels = linear_kernels(&x, &y)?;
            let envelope = envelope_bounds(&kernels, &tol)?;
            let fvdg = fuchs_van_de_graaf(&kernels, &tol)?;
            if !envelope.bounds.holds || !fvdg.holds {
                summary.bound_violations += 1;
                if summary.first_failure.is_none() {
                    summary.first_failure = Some(format!("bound check failed on trial {trial}"));
                }
            }
        }
        summary.pass = summary.passed == trials && summary.bound_violations == 0;
        println!(
            "{}",
            serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?
        );
        if !summary.pass {
            if let Some(f) = &summary.first_failure {
                eprintln!("verification failed: {f}");
            }
            return Ok(EXIT_VERIFICATION);
        }
        return Ok(EXIT_OK);
    }

    let x_path = args.x.as_ref().expect("clap enforces presence");
    let y_path = args.y.as_ref().expect("clap enforces presence");

    if args.kernels {
        let k_x = read_kernel_csv(x_path, &tol)?;
        let k_y = read_kernel_csv(y_path, &tol)?;
        let kernels = KernelPair::new(k_x, k_y)?;
        let envelope = envelope_bounds(&kernels, &tol)?;
        let fvdg = fuchs_van_de_graaf(&kernels, &tol)?;
        let sqrt_cka_value = sqrt_cka(&kernels, &tol)?;
        let pass = envelope.bounds.holds && fvdg.holds;
        let report = VerifyFileReport {
            duality: None,
            envelope,
            fuchs_van_de_graaf: fvdg,
            sqrt_cka: sqrt_cka_value,
            pass,
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&report)
                .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?
        );
        if !pass {
            eprintln!("verification failed: bound check");
            return Ok(EXIT_VERIFICATION);
        }
        return Ok(EXIT_OK);
    }

    let x = load_matrix(x_path, "X")?;
    let y = load_matrix(y_path, "Y")?;
    let duality = verify_duality(&x, &y, &tol)?;
    let kernels = linear_kernels(&x, &y)?;
    let envelope = envelope_bounds(&kernels, &tol)?;
    let fvdg = fuchs_van_de_graaf(&kernels, &tol)?;
    let sqrt_cka_value = sqrt_cka(&kernels, &tol)?;
    let pass = duality.pass && envelope.bounds.holds && fvdg.holds;
    let first_failure = if !duality.pass {
        Some("duality check")
    } else if !envelope.bounds.holds {
        Some("rank envelope")
    } else if !fvdg.holds {
        Some("Fuchs-van de Graaf bound")
    } else {
        None
    };
    let report = VerifyFileReport {
        duality: Some(duality),
        envelope,
        fuchs_van_de_graaf: fvdg,
        sqrt_cka: sqrt_cka_value,
        pass,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?
    );
    if let Some(failure) = first_failure {
        eprintln!("verification failed: {failure}");
        return Ok(EXIT_VERIFICATION);
    }
    Ok(EXIT_OK)
}

fn cmd_envelope(args: &EnvelopeArgs) -> Result<i32> {
    let cfg = EnvelopeConfig {
        dim: args.dim,
        dof_x: args.dof_x,
        dof_y: args.dof_y,
        dof_eps: args.dof_eps,
        trials: args.trials,
        seed: args.seed,
        scheme: EnvelopeScheme::from_str(&args.scheme)?,
    };
    let format = TableFormat::from_str(&args.format)?;
    let tol = Tolerances::default();
    let start = Instant::now();
    let rows = run_envelope(&cfg, &tol)?;
    let violations = rows.iter().filter(|r| !r.within_bounds()).count();
    emit_table(&rows, &args.out, format)?;
    println!(
        "trials={} violations={} runtime_ms={} out={}",
        rows.len(),
        violations,
        start.elapsed().as_millis(),
        args.out.display()
    );
    if violations > 0 {
        eprintln!("verification failed: {violations} bound violations");
        return Ok(EXIT_VERIFICATION);
    }
    Ok(EXIT_OK)
}

fn cmd_converge(args: &ConvergeArgs) -> Result<i32> {
    let mode = ConvergenceMode::from_str(&args.mode)?;
    let cfg = ConvergenceConfig {
        mode,
        fixed_dim: args.dim,
        sizes: args.sizes.clone(),
        trials_per_size: args.trials,
        seed: args.seed,
    };
    let format = TableFormat::from_str(&args.format)?;
    let tol = Tolerances::default();
    let start = Instant::now();
    let rows = match mode {
        ConvergenceMode::Stimuli => run_convergence_stimuli(&cfg, &tol)?,
        ConvergenceMode::Neurons => run_convergence_neurons(&cfg, &tol)?,
    };
    let pairing_violations = rows
        .iter()
        .filter(|r| (r.rho - r.bures).abs() > 1e-8)
        .count();
    emit_table(&rows, &args.out, format)?;

    let medians = median_errors_by_size(&rows);
    let monotone = medians.windows(2).all(|w| w[1].1 < w[0].1);
    let summary: Vec<String> = medians
        .iter()
        .map(|(size, median)| format!("{size}:{median:.3e}"))
        .collect();
    println!(
        "mode={} trials={} pairing_violations={} monotone={} median_errors=[{}] runtime_ms={} out={}",
        mode.name(),
        rows.len(),
        pairing_violations,
        monotone,
        summary.join(" "),
        start.elapsed().as_millis(),
        args.out.display()
    );
    // The rho/bures pairing is an identity and must hold; monotonicity of
    // the medians is a statistical observation reported in the summary.
    if pairing_violations > 0 {
        eprintln!("verification failed: pairing_violations={pairing_violations}");
        return Ok(EXIT_VERIFICATION);
    }
    Ok(EXIT_OK)
}
