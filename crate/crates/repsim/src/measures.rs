//! All (dis)similarity measures, in both alignment form (angular,
//! Riemannian shape, Procrustes distances over the neuron axes) and
//! kernel/covariance form (CKA, fidelity, NBS, Bures distance over
//! stimulus-by-stimulus matrices).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    center_columns, checked_clamp, nuclear_norm, psd_sqrt, DataMatrix, PsdMatrix, Tolerances,
};

/// Neuron-space covariance and cross-covariance of a pair of centered
/// activation matrices.
#[derive(Debug, Clone)]
pub struct CovarianceSummary {
    /// `(CX)^T (CX)`, `N_x x N_x`.
    pub sigma_x: PsdMatrix,
    /// `(CY)^T (CY)`, `N_y x N_y`.
    pub sigma_y: PsdMatrix,
    /// `(CX)^T (CY)`, `N_x x N_y`.
    pub sigma_xy: DMatrix<f64>,
}

/// A pair of equal-dimension PSD kernel matrices.
///
/// [`linear_kernels`] builds the centered linear kernels of a data pair,
/// which additionally satisfy `K . 1 = 0`. Kernels assembled directly from
/// PSD matrices (e.g. Wishart ensembles) need not be centered; measures
/// that rely on centering (the duality identities) say so explicitly.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub k_x: PsdMatrix,
    pub k_y: PsdMatrix,
}

impl KernelPair {
    pub fn new(k_x: PsdMatrix, k_y: PsdMatrix) -> Result<Self> {
        if k_x.dim() != k_y.dim() {
            return Err(Error::dimension_mismatch(format!(
                "kernel dimensions differ: {} vs {}",
                k_x.dim(),
                k_y.dim()
            )));
        }
        Ok(Self { k_x, k_y })
    }

    pub fn dim(&self) -> usize {
        self.k_x.dim()
    }
}

/// Orthogonal alignment returned by [`procrustes_align`].
///
/// When the cross-covariance has repeated or zero singular values the
/// optimum is not unique; only the achieved cost is contractual.
#[derive(Debug, Clone)]
pub struct OrthogonalTransform {
    q: DMatrix<f64>,
}

impl OrthogonalTransform {
    pub(crate) fn from_svd_product(q: DMatrix<f64>) -> Self {
        Self { q }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

/// `Sigma_X = (CX)^T (CX)`, `Sigma_Y = (CY)^T (CY)`, `Sigma_XY = (CX)^T (CY)`.
pub fn cross_covariances(x: &DataMatrix, y: &DataMatrix) -> Result<CovarianceSummary> {
    require_same_rows(x, y)?;
    let a = center_columns(x).into_matrix();
    let b = center_columns(y).into_matrix();
    let sigma_xy = a.tr_mul(&b);
    Ok(CovarianceSummary {
        sigma_x: PsdMatrix::from_factor(&a.transpose()),
        sigma_y: PsdMatrix::from_factor(&b.transpose()),
        sigma_xy,
    })
}

/// Centered linear kernels `K_X = (CX)(CX)^T`, `K_Y = (CY)(CY)^T`.
pub fn linear_kernels(x: &DataMatrix, y: &DataMatrix) -> Result<KernelPair> {
    require_same_rows(x, y)?;
    let a = center_columns(x).into_matrix();
    let b = center_columns(y).into_matrix();
    KernelPair::new(PsdMatrix::from_factor(&a), PsdMatrix::from_factor(&b))
}

/// Angle between two same-shape matrices under the trace inner product,
/// on the raw (uncentered) inputs. Range `[0, pi]`.
pub fn angular_distance(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::dimension_mismatch(format!(
            "angular distance needs equal shapes, got {}x{} vs {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let nx = x.as_matrix().norm();
    let ny = y.as_matrix().norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::degenerate(
            "angular distance is undefined for a zero matrix",
        ));
    }
    let cos = x.as_matrix().dot(y.as_matrix()) / (nx * ny);
    Ok(checked_clamp(cos, -1.0, 1.0, 1.0, "angular cosine")?.acos())
}

/// Orthogonal `Q` maximizing `Tr[Sigma_XY Q]`, i.e. minimizing
/// `||CX - CY Q||_F` (Schonemann's solution). Requires `N_x = N_y`.
///
/// The singular pairs come from the symmetric eigendecomposition of the
/// block embedding `[[0, S], [S^T, 0]]` rather than an SVD: nalgebra's
/// SVD with singular vectors returns inconsistent factors on a small
/// fraction of rank-deficient inputs, while the symmetric solver is
/// reliably accurate. Eigenvectors at eigenvalue `+sigma` are
/// `(u; v)/sqrt(2)`, and the null spaces are completed by QR so `Q` is a
/// full orthogonal matrix.
pub fn procrustes_align(x: &DataMatrix, y: &DataMatrix) -> Result<OrthogonalTransform> {
    require_same_rows(x, y)?;
    require_same_cols(x, y)?;
    let a = center_columns(x).into_matrix();
    let b = center_columns(y).into_matrix();
    let sigma_xy = a.tr_mul(&b);
    let n = sigma_xy.nrows();

    let mut embedding = DMatrix::zeros(2 * n, 2 * n);
    embedding.view_mut((0, n), (n, n)).copy_from(&sigma_xy);
    embedding
        .view_mut((n, 0), (n, n))
        .copy_from(&sigma_xy.transpose());
    let eig = embedding.symmetric_eigen();
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical(format!(
            "eigendecomposition failed for {n}x{n} cross-covariance embedding"
        )));
    }

    // Pairs below the round-off cutoff go to the null completion; each
    // contributes at most `cutoff` to the objective.
    let lambda_max = eig.eigenvalues.amax();
    let cutoff = 1e-12 * lambda_max;
    let mut u_range: Vec<DMatrix<f64>> = Vec::new();
    let mut v_range: Vec<DMatrix<f64>> = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let w = eig.eigenvectors.column(i);
            let scale = std::f64::consts::SQRT_2;
            u_range.push(DMatrix::from_fn(n, 1, |r, _| scale * w[r]));
            v_range.push(DMatrix::from_fn(n, 1, |r, _| scale * w[n + r]));
        }
    }
    let rank = u_range.len();

    let assemble = |cols: &[DMatrix<f64>]| {
        let mut m = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.column_mut(j).copy_from(&c.column(0));
        }
        m
    };
    let u_plus = assemble(&u_range);
    let v_plus = assemble(&v_range);

    // Orthonormal completion of a set of orthonormal columns: QR of
    // [cols | I] keeps the leading columns' span and fills the rest.
    let complete = |plus: &DMatrix<f64>| {
        let mut seed = DMatrix::zeros(n, rank + n);
        seed.view_mut((0, 0), (n, rank)).copy_from(plus);
        seed.view_mut((0, rank), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        let q = seed.qr().q();
        q.columns(rank, n - rank).into_owned()
    };

    let q = if rank == n {
        &v_plus * u_plus.transpose()
    } else {
        let u_null = complete(&u_plus);
        let v_null = complete(&v_plus);
        &v_plus * u_plus.transpose() + v_null * u_null.transpose()
    };
    Ok(OrthogonalTransform::from_svd_product(q))
}

/// Procrustes size-and-shape distance in covariance form,
/// `sqrt(Tr Sigma_X + Tr Sigma_Y - 2 ||Sigma_XY||_*)`. Column counts may
/// differ.
pub fn procrustes_distance(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let cov = cross_covariances(x, y)?;
    let nn = nuclear_norm(&cov.sigma_xy)?;
    trace_deficit_sqrt(
        cov.sigma_x.trace(),
        cov.sigma_y.trace(),
        nn,
        "squared Procrustes distance",
    )
}

/// Riemannian shape distance `arccos(||Sigma_XY||_* / sqrt(Tr Sigma_X Tr
/// Sigma_Y))`, range `[0, pi/2]`.
pub fn riemannian_shape_distance(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let cov = cross_covariances(x, y)?;
    let tr_x = cov.sigma_x.trace();
    let tr_y = cov.sigma_y.trace();
    if tr_x <= 0.0 || tr_y <= 0.0 {
        return Err(Error::degenerate(
            "shape distance is undefined when a representation is constant across stimuli",
        ));
    }
    let cos = nuclear_norm(&cov.sigma_xy)? / (tr_x * tr_y).sqrt();
    Ok(checked_clamp(cos, 0.0, 1.0, 1.0, "shape cosine")?.acos())
}

/// Centered kernel alignment: the cosine between two kernel matrices
/// under the trace inner product. Range `[0, 1]` for PSD inputs.
pub fn cka(kernels: &KernelPair) -> Result<f64> {
    let kx = kernels.k_x.as_matrix();
    let ky = kernels.k_y.as_matrix();
    let nx = kx.norm();
    let ny = ky.norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::degenerate("CKA is undefined for a zero kernel"));
    }
    let cos = kx.dot(ky) / (nx * ny);
    checked_clamp(cos, 0.0, 1.0, 1.0, "CKA")
}

/// Fidelity `Tr[(K_X^{1/2} K_Y K_X^{1/2})^{1/2}]` from the PSD square
/// roots of both kernels. Symmetric in its arguments up to round-off.
///
/// The inner matrix factors as `(S_X S_Y)(S_X S_Y)^T` with `S = K^{1/2}`,
/// so the trace of its square root is the nuclear norm of `S_X S_Y`.
/// Evaluating that nuclear norm directly keeps full singular-value
/// precision; eigendecomposing the assembled triple product instead loses
/// half the significant digits to squaring near the null space.
pub fn fidelity(k_x: &PsdMatrix, k_y: &PsdMatrix, tol: &Tolerances) -> Result<f64> {
    if k_x.dim() != k_y.dim() {
        return Err(Error::dimension_mismatch(format!(
            "fidelity needs equal kernel dimensions, got {} vs {}",
            k_x.dim(),
            k_y.dim()
        )));
    }
    let s_x = psd_sqrt(k_x, tol)?;
    let s_y = psd_sqrt(k_y, tol)?;
    nuclear_norm(&(s_x.as_matrix() * s_y.as_matrix()))
}

/// Radicands of the squared-distance formulas sit one cancellation away
/// from zero; below this relative level they are indistinguishable from
/// zero in f64 and are snapped to exactly zero.
const RADICAND_SNAP_TOL: f64 = 1e-12;

/// `sqrt(tr_x + tr_y - 2 * overlap)` with round-off guards: negative
/// radicands within `1e-10` of zero (relative to the trace scale) clamp
/// to zero, larger ones error, and positive radicands below the
/// cancellation noise floor snap to zero so coincident inputs report an
/// exact zero distance.
pub(crate) fn trace_deficit_sqrt(
    tr_x: f64,
    tr_y: f64,
    overlap: f64,
    what: &str,
) -> Result<f64> {
    let scale = tr_x + tr_y;
    let radicand = checked_clamp(
        tr_x + tr_y - 2.0 * overlap,
        0.0,
        f64::INFINITY,
        scale,
        what,
    )?;
    if radicand < RADICAND_SNAP_TOL * scale {
        return Ok(0.0);
    }
    Ok(radicand.sqrt())
}

/// Fidelity of the outer-product kernels `A A^T` and `B B^T`, computed
/// from the factors: with thin SVD `A = U S V^T`, the kernel square root
/// is `U S U^T` and the fidelity reduces to the nuclear norm of
/// `S (U^T B)`. Never forms the `M x M` kernels, so it stays cheap when
/// the factors are tall.
pub fn gram_fidelity(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::dimension_mismatch(format!(
            "factors must share row count, got {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let svd = a.clone().svd_unordered(true, false);
    if !svd.singular_values.iter().all(|s| s.is_finite()) {
        return Err(Error::numerical(format!(
            "SVD failed to converge for {}x{} factor",
            a.nrows(),
            a.ncols()
        )));
    }
    let u = svd.u.expect("u requested");
    let mut t = u.tr_mul(b);
    for (i, mut row) in t.row_iter_mut().enumerate() {
        row *= svd.singular_values[i];
    }
    nuclear_norm(&t)
}

/// Normalized Bures similarity `F(K_X, K_Y) / sqrt(Tr K_X Tr K_Y)`,
/// range `[0, 1]`.
pub fn nbs(kernels: &KernelPair, tol: &Tolerances) -> Result<f64> {
    let tr_x = kernels.k_x.trace();
    let tr_y = kernels.k_y.trace();
    if tr_x <= 0.0 || tr_y <= 0.0 {
        return Err(Error::degenerate("NBS is undefined for a zero-trace kernel"));
    }
    let f = fidelity(&kernels.k_x, &kernels.k_y, tol)?;
    checked_clamp(f / (tr_x * tr_y).sqrt(), 0.0, 1.0, 1.0, "NBS")
}

/// Bures distance `sqrt(Tr K_X + Tr K_Y - 2 F(K_X, K_Y))`.
pub fn bures_distance(k_x: &PsdMatrix, k_y: &PsdMatrix, tol: &Tolerances) -> Result<f64> {
    let f = fidelity(k_x, k_y, tol)?;
    trace_deficit_sqrt(k_x.trace(), k_y.trace(), f, "squared Bures distance")
}

/// Procrustes distance scaled by `1 / sqrt(N M)`; the scaling keeps the
/// value finite as stimuli or neurons are added. Requires `N_x = N_y`.
pub fn normalized_procrustes(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    require_same_cols(x, y)?;
    let p = procrustes_distance(x, y)?;
    Ok(p / ((x.ncols() * x.nrows()) as f64).sqrt())
}

/// Bures distance scaled by `1 / sqrt(N M)`. The neuron count `N` is not
/// recoverable from the `M x M` kernels and must be supplied.
pub fn normalized_bures(
    kernels: &KernelPair,
    neuron_count: usize,
    tol: &Tolerances,
) -> Result<f64> {
    if neuron_count < 1 {
        return Err(Error::dimension_mismatch("neuron count must be >= 1"));
    }
    let b = bures_distance(&kernels.k_x, &kernels.k_y, tol)?;
    Ok(b / ((neuron_count * kernels.dim()) as f64).sqrt())
}

/// Representational dissimilarity matrix: pairwise Euclidean distances
/// between rows. Symmetric with zero diagonal.
pub fn rdm(x: &DataMatrix) -> DMatrix<f64> {
    let m = x.as_matrix();
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (m.row(i) - m.row(j)).norm();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

/// Appends `target_cols - N` columns of zeros. Padding is an isometric
/// embedding: every measure is unchanged.
pub fn zero_pad(x: &DataMatrix, target_cols: usize) -> Result<DataMatrix> {
    if target_cols < x.ncols() {
        return Err(Error::dimension_mismatch(format!(
            "cannot pad {} columns down to {target_cols}",
            x.ncols()
        )));
    }
    let padded = x.as_matrix().clone().resize(x.nrows(), target_cols, 0.0);
    Ok(DataMatrix::new(padded).expect("padding preserves validity"))
}

/// The measure vocabulary understood by reports, the CLI, and the C API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Angular,
    Procrustes,
    Riemannian,
    Cka,
    Nbs,
    Bures,
    Fidelity,
    NormalizedProcrustes,
    NormalizedBures,
    /// Frobenius distance between the two representational dissimilarity
    /// matrices (a scalar summary; the RDMs themselves come from [`rdm`]).
    Rdm,
}

impl Measure {
    pub const ALL: [Measure; 10] = [
        Measure::Angular,
        Measure::Procrustes,
        Measure::Riemannian,
        Measure::Cka,
        Measure::Nbs,
        Measure::Bures,
        Measure::Fidelity,
        Measure::NormalizedProcrustes,
        Measure::NormalizedBures,
        Measure::Rdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Angular => "angular",
            Measure::Procrustes => "procrustes",
            Measure::Riemannian => "riemannian",
            Measure::Cka => "cka",
            Measure::Nbs => "nbs",
            Measure::Bures => "bures",
            Measure::Fidelity => "fidelity",
            Measure::NormalizedProcrustes => "normalized_procrustes",
            Measure::NormalizedBures => "normalized_bures",
            Measure::Rdm => "rdm",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::degenerate(format!(
                    "unknown measure '{s}'; expected one of: {}",
                    Measure::ALL.map(Measure::name).join(", ")
                ))
            })
    }
}

/// Value or per-measure error for one entry of a [`SimilarityReport`].
#[derive(Debug, Clone, Serialize)]
pub struct MeasureOutcome {
    pub measure: String,
    pub value: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub exit_code: Option<i32>,
}

/// Named measure values plus metadata for one (X, Y) comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityReport {
    pub rows: usize,
    pub cols_x: usize,
    pub cols_y: usize,
    pub results: Vec<MeasureOutcome>,
    pub tolerances: Tolerances,
}

/// Evaluates the requested measures on one pair. Measures that fail (for
/// example a degenerate input) are reported per entry so the remaining
/// measures still compute.
pub fn similarity_report(
    x: &DataMatrix,
    y: &DataMatrix,
    measures: &[Measure],
    tol: &Tolerances,
) -> Result<SimilarityReport> {
    require_same_rows(x, y)?;
    let kernels = linear_kernels(x, y)?;
    let mut results = Vec::with_capacity(measures.len());
    for &measure in measures {
        let value = match measure {
            Measure::Angular => angular_distance(x, y),
            Measure::Procrustes => procrustes_distance(x, y),
            Measure::Riemannian => riemannian_shape_distance(x, y),
            Measure::Cka => cka(&kernels),
            Measure::Nbs => nbs(&kernels, tol),
            Measure::Bures => bures_distance(&kernels.k_x, &kernels.k_y, tol),
            Measure::Fidelity => fidelity(&kernels.k_x, &kernels.k_y, tol),
            Measure::NormalizedProcrustes => normalized_procrustes(x, y),
            Measure::NormalizedBures => {
                require_same_cols(x, y).and_then(|_| normalized_bures(&kernels, x.ncols(), tol))
            }
            Measure::Rdm => Ok((rdm(x) - rdm(y)).norm()),
        };
        results.push(match value {
            Ok(v) => MeasureOutcome {
                measure: measure.name().to_string(),
                value: Some(v),
                error: None,
                exit_code: None,
            },
            Err(e) => MeasureOutcome {
                measure: measure.name().to_string(),
                value: None,
                error: Some(e.to_string()),
                exit_code: Some(e.exit_code()),
            },
        });
    }
    Ok(SimilarityReport {
        rows: x.nrows(),
        cols_x: x.ncols(),
        cols_y: y.ncols(),
        results,
        tolerances: *tol,
    })
}

pub(crate) fn require_same_rows(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::dimension_mismatch(format!(
            "stimulus counts differ: {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn require_same_cols(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.ncols() != y.ncols() {
        return Err(Error::dimension_mismatch(format!(
            "neuron counts differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Achieved alignment cost `||CX - CY Q||_F` for a given transform.
pub fn alignment_cost(x: &DataMatrix, y: &DataMatrix, q: &OrthogonalTransform) -> f64 {
    let a = center_columns(x).into_matrix();
    let b = center_columns(y).into_matrix();
    (a - b * q.matrix()).norm()
}

/// Kernel traces also available without forming kernels: `Tr K = ||CX||_F^2`.
pub(crate) fn centered_squared_norm(x: &DataMatrix) -> f64 {
    center_columns(x).as_matrix().norm_squared()
}
