//! Seeded experiment harnesses: the CKA-vs-NBS scatter with its bound
//! envelopes, and convergence of the normalized distances as stimuli or
//! neurons are added. Results are emitted as flat CSV/JSON tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::duality::{envelope_bounds, fuchs_van_de_graaf, sqrt_cka};
use crate::error::{Error, Result};
use crate::linalg::{
    center_columns, nuclear_norm, psd_sqrt, random_gaussian, sample_wishart, trial_rng,
    DataMatrix, PsdMatrix, Tolerances,
};
use crate::measures::{
    bures_distance, centered_squared_norm, fidelity, gram_fidelity, linear_kernels,
    procrustes_distance, KernelPair,
};

/// Stream indices are derived from (kind, size index, trial) so every
/// trial owns an independent generator regardless of execution order.
const GROUND_TRUTH_STREAM: u64 = u64::MAX;

fn trial_stream(size_index: usize, trial: usize) -> u64 {
    ((size_index as u64) << 32) | trial as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeScheme {
    /// `sqrt(K_X) ~ W_p(I, dof_x)` and `sqrt(K_Y) ~ W_p(I, dof_y)`,
    /// independently.
    Independent,
    /// `sqrt(K_X) ~ W_p(I, dof_x)` and `sqrt(K_Y) = sqrt(K_X) + eps` with
    /// `eps ~ W_p(I, dof_eps)`.
    Perturbed,
}

impl EnvelopeScheme {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeScheme::Independent => "independent",
            EnvelopeScheme::Perturbed => "perturbed",
        }
    }
}

impl std::str::FromStr for EnvelopeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(EnvelopeScheme::Independent),
            "perturbed" => Ok(EnvelopeScheme::Perturbed),
            other => Err(Error::degenerate(format!(
                "unknown scheme '{other}'; expected 'independent' or 'perturbed'"
            ))),
        }
    }
}

/// Configuration for the CKA-vs-NBS scatter experiment. The defaults are
/// the published scatter's parameters: dimension 10, square-root degrees
/// of freedom 1 and 5, perturbation degrees of freedom 4.
#[derive(Debug, Clone)]
pub struct EnvelopeConfig {
    pub dim: usize,
    pub dof_x: usize,
    pub dof_y: usize,
    pub dof_eps: usize,
    pub trials: usize,
    pub seed: u64,
    pub scheme: EnvelopeScheme,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            dof_x: 1,
            dof_y: 5,
            dof_eps: 4,
            trials: 1000,
            seed: 0,
            scheme: EnvelopeScheme::Independent,
        }
    }
}

impl EnvelopeConfig {
    fn validate(&self) -> Result<()> {
        if self.trials < 1 || self.dim < 1 || self.dof_x < 1 || self.dof_y < 1 || self.dof_eps < 1
        {
            return Err(Error::dimension_mismatch(
                "envelope config needs trials, dim, and all dofs >= 1",
            ));
        }
        Ok(())
    }
}

/// One sampled kernel pair with its similarity values and bound checks.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeRow {
    pub trial: u64,
    pub scheme: &'static str,
    pub cka: f64,
    pub nbs: f64,
    pub nbs_squared: f64,
    pub sqrt_cka: f64,
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    pub fvdg_lower: f64,
    pub fvdg_value: f64,
    pub fvdg_upper: f64,
    pub rank_x: u64,
    pub rank_y: u64,
}

impl EnvelopeRow {
    /// Both the rank envelope and the Fuchs-van de Graaf bounds hold with
    /// slack at least `-1e-8` (scaled by bound magnitude).
    pub fn within_bounds(&self) -> bool {
        let slack = |bound: f64| -1e-8 * (1.0 + bound.abs());
        self.nbs_squared - self.envelope_lower >= slack(self.envelope_lower)
            && self.envelope_upper - self.nbs_squared >= slack(self.envelope_upper)
            && self.fvdg_value - self.fvdg_lower >= slack(self.fvdg_lower)
            && self.fvdg_upper - self.fvdg_value >= slack(self.fvdg_upper)
    }
}

/// Samples kernel pairs per the configured scheme and records similarity
/// values, ranks, and bound checks for each trial. Trials run
/// concurrently; output order is by trial index.
pub fn run_envelope(cfg: &EnvelopeConfig, tol: &Tolerances) -> Result<Vec<EnvelopeRow>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial_stream(0, trial));
            let sqrt_kx = sample_wishart(cfg.dim, cfg.dof_x, &mut rng)?;
            let sqrt_ky = match cfg.scheme {
                EnvelopeScheme::Independent => sample_wishart(cfg.dim, cfg.dof_y, &mut rng)?,
                EnvelopeScheme::Perturbed => {
                    let eps = sample_wishart(cfg.dim, cfg.dof_eps, &mut rng)?;
                    PsdMatrix::from_symmetric_unchecked(sqrt_kx.as_matrix() + eps.as_matrix())
                }
            };
            let kernels = KernelPair::new(
                PsdMatrix::from_factor(sqrt_kx.as_matrix()),
                PsdMatrix::from_factor(sqrt_ky.as_matrix()),
            )?;
            let envelope = envelope_bounds(&kernels, tol)?;
            let fvdg = fuchs_van_de_graaf(&kernels, tol)?;
            let sqrt_cka_value = sqrt_cka(&kernels, tol)?;
            Ok(EnvelopeRow {
                trial: trial as u64,
                scheme: cfg.scheme.name(),
                cka: envelope.cka,
                nbs: envelope.nbs,
                nbs_squared: envelope.bounds.value,
                sqrt_cka: sqrt_cka_value,
                envelope_lower: envelope.bounds.lower,
                envelope_upper: envelope.bounds.upper,
                fvdg_lower: fvdg.lower,
                fvdg_value: fvdg.value,
                fvdg_upper: fvdg.upper,
                rank_x: envelope.rank_x as u64,
                rank_y: envelope.rank_y as u64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceMode {
    /// Grow the stimulus count M; neuron count stays at `fixed_dim`.
    Stimuli,
    /// Grow the neuron count N; stimulus count stays at `fixed_dim`.
    Neurons,
}

impl ConvergenceMode {
    pub fn name(self) -> &'static str {
        match self {
            ConvergenceMode::Stimuli => "stimuli",
            ConvergenceMode::Neurons => "neurons",
        }
    }
}

impl std::str::FromStr for ConvergenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stimuli" => Ok(ConvergenceMode::Stimuli),
            "neurons" => Ok(ConvergenceMode::Neurons),
            other => Err(Error::degenerate(format!(
                "unknown mode '{other}'; expected 'stimuli' or 'neurons'"
            ))),
        }
    }
}

/// Configuration for the convergence experiments.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub mode: ConvergenceMode,
    /// Dimension held fixed: neurons per network in stimuli mode, stimuli
    /// in neurons mode.
    pub fixed_dim: usize,
    /// Strictly increasing sample-size grid.
    pub sizes: Vec<usize>,
    pub trials_per_size: usize,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            mode: ConvergenceMode::Stimuli,
            fixed_dim: 10,
            sizes: vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
            trials_per_size: 20,
            seed: 0,
        }
    }
}

impl ConvergenceConfig {
    fn validate(&self) -> Result<()> {
        if self.fixed_dim < 1 || self.trials_per_size < 1 || self.sizes.is_empty() {
            return Err(Error::dimension_mismatch(
                "convergence config needs fixed_dim, trials, and at least one size",
            ));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::dimension_mismatch(
                "sample sizes must be strictly increasing",
            ));
        }
        if self.sizes[0] < 2 {
            return Err(Error::dimension_mismatch("sample sizes must be >= 2"));
        }
        Ok(())
    }
}

/// One finite-sample estimate against the population value.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub mode: &'static str,
    pub size: u64,
    pub trial: u64,
    /// Normalized Procrustes distance, covariance route.
    pub rho: f64,
    /// Normalized Bures distance, kernel route.
    pub bures: f64,
    /// Population value of the normalized distance.
    pub ground_truth: f64,
    /// `|rho - ground_truth|`.
    pub abs_error: f64,
}

/// Ground truth for stimuli mode: a seeded random PSD joint covariance
/// over the 2N neuron coordinates, split into blocks.
struct StimuliGroundTruth {
    /// PSD square root of the joint covariance; rows are drawn as
    /// `g^T sqrt(J)`.
    joint_sqrt: DMatrix<f64>,
    rho_limit: f64,
}

fn stimuli_ground_truth(cfg: &ConvergenceConfig, tol: &Tolerances) -> Result<StimuliGroundTruth> {
    let n = cfg.fixed_dim;
    let mut rng = trial_rng(cfg.seed, GROUND_TRUTH_STREAM);
    // Full-rank PSD by construction; division keeps entries O(1).
    let joint = sample_wishart(2 * n, 2 * n, &mut rng)?;
    let joint = PsdMatrix::from_symmetric_unchecked(joint.as_matrix() / (2 * n) as f64);
    let jm = joint.as_matrix();
    let sigma_x = jm.view((0, 0), (n, n)).into_owned();
    let sigma_y = jm.view((n, n), (n, n)).into_owned();
    let sigma_xy = jm.view((0, n), (n, n)).into_owned();
    let rho_limit = population_distance(
        sigma_x.trace(),
        sigma_y.trace(),
        nuclear_norm(&sigma_xy)?,
        n,
    )?;
    Ok(StimuliGroundTruth {
        joint_sqrt: psd_sqrt(&joint, tol)?.into_matrix(),
        rho_limit,
    })
}

/// `sqrt((tr_x + tr_y - 2 * overlap) / denom)`, the population form of the
/// normalized distances.
fn population_distance(tr_x: f64, tr_y: f64, overlap: f64, denom: usize) -> Result<f64> {
    let root = crate::measures::trace_deficit_sqrt(
        tr_x,
        tr_y,
        overlap,
        "population squared distance",
    )?;
    Ok(root / (denom as f64).sqrt())
}

/// M -> infinity: rows are joint Gaussian over both networks' neurons.
/// `rho` takes the covariance route (SVD of the N x N cross-covariance);
/// `bures` takes the kernel route through the spectral factors of the
/// M x M kernels, and the two must agree at every size.
pub fn run_convergence_stimuli(
    cfg: &ConvergenceConfig,
    tol: &Tolerances,
) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    if cfg.mode != ConvergenceMode::Stimuli {
        return Err(Error::degenerate("config mode is not 'stimuli'"));
    }
    let n = cfg.fixed_dim;
    let gt = stimuli_ground_truth(cfg, tol)?;

    let mut jobs = Vec::new();
    for (size_index, &m) in cfg.sizes.iter().enumerate() {
        for trial in 0..cfg.trials_per_size {
            jobs.push((size_index, m, trial));
        }
    }

    jobs.into_par_iter()
        .map(|(size_index, m, trial)| {
            let mut rng = trial_rng(cfg.seed, trial_stream(size_index, trial));
            let g = random_gaussian(m, 2 * n, &mut rng).into_matrix();
            let z = g * &gt.joint_sqrt;
            let x = DataMatrix::new(z.columns(0, n).into_owned())?;
            let y = DataMatrix::new(z.columns(n, n).into_owned())?;

            let rho = procrustes_distance(&x, &y)? / ((n * m) as f64).sqrt();

            // Kernel route, factored so the M x M kernels are never formed.
            let a = center_columns(&x).into_matrix();
            let b = center_columns(&y).into_matrix();
            let fid = gram_fidelity(&a, &b)?;
            let bures = population_distance(
                centered_squared_norm(&x),
                centered_squared_norm(&y),
                fid,
                n * m,
            )?;

            Ok(ConvergenceRow {
                mode: "stimuli",
                size: m as u64,
                trial: trial as u64,
                rho,
                bures,
                ground_truth: gt.rho_limit,
                abs_error: (rho - gt.rho_limit).abs(),
            })
        })
        .collect()
}

/// Ground truth for neurons mode: independent centered PSD stimulus
/// kernels for the two networks.
struct NeuronsGroundTruth {
    sqrt_kx: DMatrix<f64>,
    sqrt_ky: DMatrix<f64>,
    bures_limit: f64,
}

fn neurons_ground_truth(cfg: &ConvergenceConfig, tol: &Tolerances) -> Result<NeuronsGroundTruth> {
    let m = cfg.fixed_dim;
    let mut rng = trial_rng(cfg.seed, GROUND_TRUTH_STREAM);
    // Centered so finite-sample kernels and their limits live in the same
    // space; C K C stays PSD.
    let center = DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64);
    let mut draw = |dof: usize| -> Result<PsdMatrix> {
        let w = sample_wishart(m, dof, &mut rng)?;
        Ok(PsdMatrix::from_symmetric_unchecked(
            &center * (w.as_matrix() / m as f64) * &center,
        ))
    };
    let k_x = draw(m)?;
    let k_y = draw(m)?;
    let fid = fidelity(&k_x, &k_y, tol)?;
    let bures_limit = population_distance(k_x.trace(), k_y.trace(), fid, m)?;
    Ok(NeuronsGroundTruth {
        sqrt_kx: psd_sqrt(&k_x, tol)?.into_matrix(),
        sqrt_ky: psd_sqrt(&k_y, tol)?.into_matrix(),
        bures_limit,
    })
}

/// N -> infinity: each network's neuron columns are drawn independently
/// with covariance given by its population kernel. `bures` takes the
/// kernel route (nested eigendecompositions of the M x M kernels, which
/// stay small); `rho` takes the covariance route through the factored
/// cross-covariance nuclear norm.
pub fn run_convergence_neurons(
    cfg: &ConvergenceConfig,
    tol: &Tolerances,
) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    if cfg.mode != ConvergenceMode::Neurons {
        return Err(Error::degenerate("config mode is not 'neurons'"));
    }
    let m = cfg.fixed_dim;
    let gt = neurons_ground_truth(cfg, tol)?;

    let mut jobs = Vec::new();
    for (size_index, &n) in cfg.sizes.iter().enumerate() {
        for trial in 0..cfg.trials_per_size {
            jobs.push((size_index, n, trial));
        }
    }

    jobs.into_par_iter()
        .map(|(size_index, n, trial)| {
            let mut rng = trial_rng(cfg.seed, trial_stream(size_index, trial));
            let gx = random_gaussian(m, n, &mut rng).into_matrix();
            let gy = random_gaussian(m, n, &mut rng).into_matrix();
            let x = DataMatrix::new(&gt.sqrt_kx * gx)?;
            let y = DataMatrix::new(&gt.sqrt_ky * gy)?;

            let kernels = linear_kernels(&x, &y)?;
            let bures = bures_distance(&kernels.k_x, &kernels.k_y, tol)? / ((n * m) as f64).sqrt();

            // Covariance route, factored: ||Sigma_XY||_* without forming
            // the N x N cross-covariance.
            let a = center_columns(&x).into_matrix();
            let b = center_columns(&y).into_matrix();
            let cross_nn = gram_fidelity(&a, &b)?;
            let rho = population_distance(
                centered_squared_norm(&x),
                centered_squared_norm(&y),
                cross_nn,
                n * m,
            )?;

            Ok(ConvergenceRow {
                mode: "neurons",
                size: n as u64,
                trial: trial as u64,
                rho,
                bures,
                ground_truth: gt.bures_limit,
                abs_error: (bures - gt.bures_limit).abs(),
            })
        })
        .collect()
}

/// Median absolute error per grid size, ordered by size.
pub fn median_errors_by_size(rows: &[ConvergenceRow]) -> Vec<(u64, f64)> {
    let mut sizes: Vec<u64> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|size| {
            let mut errors: Vec<f64> = rows
                .iter()
                .filter(|r| r.size == size)
                .map(|r| r.abs_error)
                .collect();
            errors.sort_by(|a, b| a.total_cmp(b));
            let mid = errors.len() / 2;
            let median = if errors.len().is_multiple_of(2) {
                0.5 * (errors[mid - 1] + errors[mid])
            } else {
                errors[mid]
            };
            (size, median)
        })
        .collect()
}

/// Output format for experiment tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::degenerate(format!(
                "unknown format '{other}'; expected 'csv' or 'json'"
            ))),
        }
    }
}

/// A typed cell of an experiment table.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Int(u64),
    Float(f64),
    Text(&'static str),
}

/// Row types that know their column names and values. Column order must
/// match the struct's serde field order; a test enforces it.
pub trait TableRow: Serialize {
    fn columns() -> &'static [&'static str];
    fn values(&self) -> Vec<CellValue>;
}

impl TableRow for EnvelopeRow {
    fn columns() -> &'static [&'static str] {
        &[
            "trial",
            "scheme",
            "cka",
            "nbs",
            "nbs_squared",
            "sqrt_cka",
            "envelope_lower",
            "envelope_upper",
            "fvdg_lower",
            "fvdg_value",
            "fvdg_upper",
            "rank_x",
            "rank_y",
        ]
    }

    fn values(&self) -> Vec<CellValue> {
        vec![
            CellValue::Int(self.trial),
            CellValue::Text(self.scheme),
            CellValue::Float(self.cka),
            CellValue::Float(self.nbs),
            CellValue::Float(self.nbs_squared),
            CellValue::Float(self.sqrt_cka),
            CellValue::Float(self.envelope_lower),
            CellValue::Float(self.envelope_upper),
            CellValue::Float(self.fvdg_lower),
            CellValue::Float(self.fvdg_value),
            CellValue::Float(self.fvdg_upper),
            CellValue::Int(self.rank_x),
            CellValue::Int(self.rank_y),
        ]
    }
}

impl TableRow for ConvergenceRow {
    fn columns() -> &'static [&'static str] {
        &[
            "mode",
            "size",
            "trial",
            "rho",
            "bures",
            "ground_truth",
            "abs_error",
        ]
    }

    fn values(&self) -> Vec<CellValue> {
        vec![
            CellValue::Text(self.mode),
            CellValue::Int(self.size),
            CellValue::Int(self.trial),
            CellValue::Float(self.rho),
            CellValue::Float(self.bures),
            CellValue::Float(self.ground_truth),
            CellValue::Float(self.abs_error),
        ]
    }
}

/// Floats are written with 17 significant digits so parsing the text
/// reproduces the exact f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_cell(cell: &CellValue) -> String {
    match cell {
        CellValue::Int(i) => i.to_string(),
        CellValue::Float(f) => format_float(*f),
        CellValue::Text(t) => (*t).to_string(),
    }
}

/// Renders rows as CSV: one header line, comma separators, LF endings.
pub fn render_csv<R: TableRow>(rows: &[R]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", R::columns().join(","));
    for row in rows {
        let cells: Vec<String> = row.values().iter().map(format_cell).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Renders rows as a JSON array of flat objects with the same field names
/// as the CSV header.
pub fn render_json<R: TableRow>(rows: &[R]) -> Result<String> {
    let mut out = serde_json::to_string_pretty(rows)
        .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?;
    out.push('\n');
    Ok(out)
}

/// Writes rows to `path` in the requested format.
pub fn emit_table<R: TableRow>(rows: &[R], path: &Path, format: TableFormat) -> Result<()> {
    let content = match format {
        TableFormat::Csv => render_csv(rows),
        TableFormat::Json => render_json(rows)?,
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses one numeric CSV cell back to the exact f64 the writer emitted.
pub fn parse_float_cell(cell: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|e| Error::numerical(format!("bad float cell '{cell}': {e}")))
}
