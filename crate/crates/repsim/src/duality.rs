//! Numerical verification of the kernel/shape duality and of the bounds
//! relating CKA to NBS.
//!
//! Every check here computes its two sides through independent code paths
//! (the kernel route uses nested eigendecompositions of the M x M
//! kernels, the covariance route SVDs of the N x N cross-covariance) and
//! reports the observed discrepancy instead of assuming the identity.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    checked_clamp, nuclear_norm, numerical_rank, psd_sqrt, symmetrize, DataMatrix, PsdMatrix,
    Tolerances,
};
use crate::measures::{
    cka, cross_covariances, fidelity, linear_kernels, nbs, procrustes_distance,
    riemannian_shape_distance, KernelPair,
};

/// Slack below which a bound is considered saturated.
const SATURATION_TOL: f64 = 1e-8;

/// Absolute slack tolerance for bound checks, scaled by (1 + bound
/// magnitude) so the criterion is uniform across measures of different
/// scales.
const BOUND_SLACK_TOL: f64 = 1e-8;

/// One two-sided bound check: `lower <= value <= upper` up to slack.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    /// `value - lower`; negative means the lower bound is violated.
    pub slack_lower: f64,
    /// `upper - value`; negative means the upper bound is violated.
    pub slack_upper: f64,
    pub saturated_lower: bool,
    pub saturated_upper: bool,
    /// Both slacks within `-1e-8 * (1 + |bound|)`.
    pub holds: bool,
}

impl BoundReport {
    fn new(lower: f64, value: f64, upper: f64) -> Self {
        let slack_lower = value - lower;
        let slack_upper = upper - value;
        Self {
            lower,
            value,
            upper,
            slack_lower,
            slack_upper,
            saturated_lower: slack_lower.abs() <= SATURATION_TOL,
            saturated_upper: slack_upper.abs() <= SATURATION_TOL,
            holds: slack_lower >= -BOUND_SLACK_TOL * (1.0 + lower.abs())
                && slack_upper >= -BOUND_SLACK_TOL * (1.0 + upper.abs()),
        }
    }
}

/// Rank-dependent envelope around `NBS^2` in terms of CKA.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub bounds: BoundReport,
    pub cka: f64,
    pub nbs: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    /// The relative singular-value cutoff the ranks were computed with;
    /// the envelope is rank-sensitive, so the report records it.
    pub rank_tol: f64,
}

/// Discrepancies between the kernel-route and covariance-route values of
/// the dual quantities, for one (X, Y) pair.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub bures_vs_procrustes_abs_err: f64,
    pub nbs_vs_cos_theta_abs_err: f64,
    pub fidelity_vs_nuclear_abs_err: f64,
    /// All comparisons within `equality_tol * (1 + magnitude)` and no
    /// numerical failures along either route.
    pub pass: bool,
    /// Numerical errors hit along either route (flagged, not thrown).
    pub failures: Vec<String>,
}

/// Checks the Bures = Procrustes and NBS = cos(shape distance) identities
/// plus the fidelity = cross-covariance nuclear norm lemma, computing the
/// kernel side and the covariance side independently.
pub fn verify_duality(x: &DataMatrix, y: &DataMatrix, tol: &Tolerances) -> Result<DualityReport> {
    let kernels = linear_kernels(x, y)?;
    let cov = cross_covariances(x, y)?;

    let mut failures = Vec::new();
    let nan = f64::NAN;

    // Kernel route: nested-eigendecomposition fidelity on M x M kernels.
    let fid = fidelity(&kernels.k_x, &kernels.k_y, tol);
    let b = crate::measures::bures_distance(&kernels.k_x, &kernels.k_y, tol);
    let s = nbs(&kernels, tol);

    // Covariance route: SVD of the N_x x N_y cross-covariance.
    let nn = nuclear_norm(&cov.sigma_xy);
    let p = procrustes_distance(x, y);
    let theta = riemannian_shape_distance(x, y);

    let mut take = |label: &str, r: std::result::Result<f64, Error>| match r {
        Ok(v) => v,
        Err(e) => {
            failures.push(format!("{label}: {e}"));
            nan
        }
    };

    let fid = take("fidelity", fid);
    let b = take("bures", b);
    let s = take("nbs", s);
    let nn = take("nuclear norm", nn);
    let p = take("procrustes", p);
    let cos_theta = take("shape distance", theta).cos();

    let report_err = |a: f64, b: f64| (a - b).abs();
    let within = |err: f64, magnitude: f64| err <= tol.equality_tol * (1.0 + magnitude.abs());

    let bures_vs_procrustes_abs_err = report_err(b, p);
    let nbs_vs_cos_theta_abs_err = report_err(s, cos_theta);
    let fidelity_vs_nuclear_abs_err = report_err(fid, nn);

    let pass = failures.is_empty()
        && within(bures_vs_procrustes_abs_err, p)
        && within(nbs_vs_cos_theta_abs_err, cos_theta)
        && within(fidelity_vs_nuclear_abs_err, nn);

    Ok(DualityReport {
        bures_vs_procrustes_abs_err,
        nbs_vs_cos_theta_abs_err,
        fidelity_vs_nuclear_abs_err,
        pass,
        failures,
    })
}

/// Envelope `CKA / sqrt(r_x r_y) <= NBS^2 <= min(r_x, r_y) * CKA` with
/// ranks taken numerically.
pub fn envelope_bounds(kernels: &KernelPair, tol: &Tolerances) -> Result<EnvelopeReport> {
    let cka_value = cka(kernels)?;
    let nbs_value = nbs(kernels, tol)?;
    let rank_x = numerical_rank(kernels.k_x.as_matrix(), tol)?;
    let rank_y = numerical_rank(kernels.k_y.as_matrix(), tol)?;
    let lower = cka_value / ((rank_x * rank_y) as f64).sqrt();
    let upper = rank_x.min(rank_y) as f64 * cka_value;
    Ok(EnvelopeReport {
        bounds: BoundReport::new(lower, nbs_value * nbs_value, upper),
        cka: cka_value,
        nbs: nbs_value,
        rank_x,
        rank_y,
        rank_tol: tol.rank_tol,
    })
}

/// CKA evaluated at the PSD square roots:
/// `Tr[K_X^{1/2} K_Y^{1/2}] / sqrt(Tr K_X Tr K_Y)`. Never exceeds NBS,
/// with equality when the square roots commute.
pub fn sqrt_cka(kernels: &KernelPair, tol: &Tolerances) -> Result<f64> {
    let tr_x = kernels.k_x.trace();
    let tr_y = kernels.k_y.trace();
    if tr_x <= 0.0 || tr_y <= 0.0 {
        return Err(Error::degenerate(
            "sqrt-CKA is undefined for a zero-trace kernel",
        ));
    }
    let sx = psd_sqrt(&kernels.k_x, tol)?;
    let sy = psd_sqrt(&kernels.k_y, tol)?;
    let overlap = sx.as_matrix().dot(sy.as_matrix());
    checked_clamp(overlap / (tr_x * tr_y).sqrt(), 0.0, 1.0, 1.0, "sqrt-CKA")
}

/// Fuchs-van de Graaf check: `1 - NBS <= 1 - sqrt-CKA <= sqrt(1 - NBS^2)`.
pub fn fuchs_van_de_graaf(kernels: &KernelPair, tol: &Tolerances) -> Result<BoundReport> {
    let nbs_value = nbs(kernels, tol)?;
    let sqrt_cka_value = sqrt_cka(kernels, tol)?;
    let upper = checked_clamp(
        1.0 - nbs_value * nbs_value,
        0.0,
        f64::INFINITY,
        1.0,
        "1 - NBS^2",
    )?
    .sqrt();
    Ok(BoundReport::new(
        1.0 - nbs_value,
        1.0 - sqrt_cka_value,
        upper,
    ))
}

/// Maximum overlap `max_U |Tr[X^T Y U]|` over orthogonal U, in closed
/// form the nuclear norm of the (uncentered) cross product. Equals the
/// fidelity of the uncentered Gram matrices.
pub fn uhlmann_overlap(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    crate::measures::require_same_rows(x, y)?;
    crate::measures::require_same_cols(x, y)?;
    nuclear_norm(&x.as_matrix().tr_mul(y.as_matrix()))
}

/// Outcome of extrapolating along the Euclidean segment between kernels.
#[derive(Debug, Clone)]
pub struct ExtrapolationProbe {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub is_psd: bool,
}

/// Forms `alpha * K_X + (1 - alpha) * K_Y` and inspects its spectrum.
/// Inside `[0, 1]` the combination is convex and stays PSD; outside it
/// may pick up negative eigenvalues.
pub fn euclidean_extrapolation_demo(
    kernels: &KernelPair,
    alpha: f64,
    tol: &Tolerances,
) -> ExtrapolationProbe {
    let combo = symmetrize(
        &(alpha * kernels.k_x.as_matrix() + (1.0 - alpha) * kernels.k_y.as_matrix()),
    );
    let eig = combo.clone().symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    let max_abs = eig.eigenvalues.amax();
    let is_psd = min_eigenvalue >= -tol.eig_clamp_tol * max_abs;
    ExtrapolationProbe {
        matrix: combo,
        min_eigenvalue,
        is_psd,
    }
}

/// Fidelity of the uncentered Gram matrices `X X^T`, `Y Y^T`; used to
/// cross-check [`uhlmann_overlap`] through an independent route.
pub fn uncentered_gram_fidelity(x: &DataMatrix, y: &DataMatrix, tol: &Tolerances) -> Result<f64> {
    let kx = PsdMatrix::from_factor(x.as_matrix());
    let ky = PsdMatrix::from_factor(y.as_matrix());
    fidelity(&kx, &ky, tol)
}
