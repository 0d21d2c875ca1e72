//! Numerical primitives: centering, SVD-based nuclear norms, PSD square
//! roots, numerical rank, and seeded random sampling. Everything above
//! (measures, verification, experiments) is built on these.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

// Decompositions use nalgebra's run-to-convergence entry points; the
// capped try_* variants return corrupted factors on rank-deficient input
// instead of reporting failure. Convergence failure surfaces as NaNs in
// the output, which every caller checks.

/// Domain violations (arccos arguments, square-root radicands) below this
/// relative threshold are clamped; larger ones are numerical failures.
pub(crate) const DOMAIN_CLAMP_TOL: f64 = 1e-10;

/// Relative thresholds used across validation and verification.
///
/// All fields are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Max relative asymmetry accepted when treating a matrix as symmetric.
    pub symmetry_tol: f64,
    /// Negative eigenvalues above `-eig_clamp_tol * lambda_max` are clamped
    /// to zero; anything below fails as not PSD.
    pub eig_clamp_tol: f64,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_tol: f64,
    /// Relative tolerance for equality checks in verification reports.
    pub equality_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry_tol: 1e-10,
            eig_clamp_tol: 1e-10,
            rank_tol: 1e-10,
            equality_tol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(
        symmetry_tol: f64,
        eig_clamp_tol: f64,
        rank_tol: f64,
        equality_tol: f64,
    ) -> Result<Self> {
        let tol = Self {
            symmetry_tol,
            eig_clamp_tol,
            rank_tol,
            equality_tol,
        };
        for (name, v) in [
            ("symmetry_tol", symmetry_tol),
            ("eig_clamp_tol", eig_clamp_tol),
            ("rank_tol", rank_tol),
            ("equality_tol", equality_tol),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::numerical(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(tol)
    }
}

/// Activation matrix: rows are stimuli, columns are neurons.
///
/// Invariants: at least one row and one column, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::dimension_mismatch(
                "data matrix needs at least one row and one column",
            ));
        }
        if !inner.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("data matrix contains non-finite entries"));
        }
        Ok(Self { inner })
    }

    /// Builds from `rows * cols` values laid out row by row.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dimension_mismatch(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::dimension_mismatch(
                "data matrix needs at least one row and one column",
            ));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dimension_mismatch("rows have unequal lengths"));
        }
        if nrows == 0 || ncols == 0 {
            return Err(Error::dimension_mismatch(
                "data matrix needs at least one row and one column",
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(nrows, ncols, &flat))
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// Wraps a matrix that is finite by construction (e.g. sampled).
    pub(crate) fn from_finite(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.nrows() >= 1 && inner.ncols() >= 1);
        debug_assert!(inner.iter().all(|v| v.is_finite()));
        Self { inner }
    }
}

/// Symmetric positive semidefinite matrix, stored symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    inner: DMatrix<f64>,
}

impl PsdMatrix {
    /// Validates squareness, symmetry, and the eigenvalue floor
    /// (`min eig >= -eig_clamp_tol * max |eig|`), then stores the
    /// symmetrized matrix. Costs one eigendecomposition.
    pub fn new(m: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dimension_mismatch(format!(
                "PSD matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.is_empty() {
            return Err(Error::dimension_mismatch("PSD matrix must be nonempty"));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("PSD matrix contains non-finite entries"));
        }
        let max_abs = m.amax();
        let mut max_asym = 0.0f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_asym > tol.symmetry_tol * max_abs {
            return Err(Error::not_psd(format!(
                "matrix is not symmetric: max |a_ij - a_ji| = {max_asym:.3e} \
                 exceeds {:.3e} relative to max |entry| = {max_abs:.3e}",
                tol.symmetry_tol
            )));
        }
        let sym = symmetrize(&m);
        let eig = sym.clone().symmetric_eigen();
        if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
            return Err(decomposition_failure("symmetric eigendecomposition", &sym));
        }
        let lambda_max = eig.eigenvalues.amax();
        let lambda_min = eig.eigenvalues.min();
        let floor = -tol.eig_clamp_tol * lambda_max;
        if lambda_min < floor {
            return Err(Error::not_psd(format!(
                "min eigenvalue {lambda_min:.6e} below floor {floor:.6e} \
                 (eig_clamp_tol = {:.1e}, max |eigenvalue| = {lambda_max:.6e})",
                tol.eig_clamp_tol
            )));
        }
        Ok(Self { inner: sym })
    }

    /// Builds `G * G^T`, positive semidefinite by construction.
    pub fn from_factor(g: &DMatrix<f64>) -> Self {
        let p = g * g.transpose();
        Self {
            inner: symmetrize(&p),
        }
    }

    /// Accepts a matrix already known to be PSD up to round-off; only
    /// symmetrizes. Negative round-off eigenvalues are handled downstream
    /// by the clamping in [`psd_sqrt`].
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        Self {
            inner: symmetrize(&m),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

fn decomposition_failure(op: &str, a: &DMatrix<f64>) -> Error {
    Error::numerical(format!(
        "{op} failed to converge on {}x{} matrix (frobenius norm {:.3e}, max |entry| {:.3e})",
        a.nrows(),
        a.ncols(),
        a.norm(),
        a.amax()
    ))
}

/// Subtracts each column's mean. This applies the centering projection
/// in O(MN) without materializing the M x M projector.
pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let mut m = x.as_matrix().clone();
    let rows = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / rows;
        col.add_scalar_mut(-mean);
    }
    DataMatrix::from_finite(m)
}

/// Sum of singular values (Schatten 1-norm) via full SVD.
pub fn nuclear_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// Singular values of `a`, unordered.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = a.clone().svd_unordered(false, false);
    if !svd.singular_values.iter().all(|s| s.is_finite()) {
        return Err(decomposition_failure("SVD", a));
    }
    Ok(svd.singular_values.iter().copied().collect())
}

/// Unique PSD square root `U * sqrt(Lambda) * U^T`.
///
/// Eigenvalues within `eig_clamp_tol * lambda_max` of zero (on either
/// side) are treated as exact zeros: negatives there are round-off on
/// genuinely PSD input, and keeping positive round-off residue would put
/// `sqrt(eps)`-sized noise into the null space of the root. Eigenvalues
/// below the negative end of that band fail as not PSD.
pub fn psd_sqrt(k: &PsdMatrix, tol: &Tolerances) -> Result<PsdMatrix> {
    let m = k.as_matrix();
    let eig = m.clone().symmetric_eigen();
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return Err(decomposition_failure("symmetric eigendecomposition", m));
    }
    let lambda_max = eig.eigenvalues.amax();
    let band = tol.eig_clamp_tol * lambda_max;
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -band {
            return Err(Error::not_psd(format!(
                "min eigenvalue {:.6e} below -{band:.6e} in psd_sqrt",
                *v
            )));
        }
        *v = if *v <= band { 0.0 } else { v.sqrt() };
    }
    let u = &eig.eigenvectors;
    let sqrt = u * DMatrix::from_diagonal(&roots) * u.transpose();
    Ok(PsdMatrix::from_symmetric_unchecked(sqrt))
}

/// Count of singular values above `rank_tol * sigma_max * max(M, N)`.
/// The zero matrix has rank 0.
pub fn numerical_rank(a: &DMatrix<f64>, tol: &Tolerances) -> Result<usize> {
    let values = singular_values(a)?;
    let sigma_max = values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = tol.rank_tol * sigma_max * a.nrows().max(a.ncols()) as f64;
    Ok(values.iter().filter(|s| **s > cutoff).count())
}

/// Draws `G * G^T` for a `p x dof` matrix G of independent standard
/// normals: one sample of the Wishart distribution W_p(I, dof). The
/// result has rank `min(p, dof)` almost surely.
pub fn sample_wishart(p: usize, dof: usize, rng: &mut impl Rng) -> Result<PsdMatrix> {
    if p < 1 || dof < 1 {
        return Err(Error::dimension_mismatch(format!(
            "Wishart sampling needs p >= 1 and dof >= 1, got p = {p}, dof = {dof}"
        )));
    }
    let mut g = DMatrix::zeros(p, dof);
    for j in 0..dof {
        for i in 0..p {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(PsdMatrix::from_factor(&g))
}

/// Haar-distributed orthogonal matrix over O(n), including reflections:
/// QR of a Gaussian matrix with the R diagonal signs fixed nonnegative.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if n < 1 {
        return Err(Error::dimension_mismatch("orthogonal dimension must be >= 1"));
    }
    let g = random_gaussian(n, n, rng).into_matrix();
    let (mut q, r) = g.qr().unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Matrix of independent standard-normal entries, filled column-major.
pub fn random_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DataMatrix {
    assert!(rows >= 1 && cols >= 1, "empty matrix requested");
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    DataMatrix::from_finite(m)
}

/// Independent generator for one trial, derived from a master seed and a
/// stream index. Streams are independent of execution order, so trials
/// can run concurrently without sharing generator state.
pub fn trial_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&stream.to_le_bytes());
    // Fixed domain tag so (seed, stream) never collides with a plain
    // seed_from_u64 construction elsewhere.
    seed[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Clamps `x` into `[lo, hi]` when the violation is attributable to
/// round-off (below [`DOMAIN_CLAMP_TOL`] relative to `scale`); larger
/// violations are reported as numerical failures rather than hidden.
pub(crate) fn checked_clamp(x: f64, lo: f64, hi: f64, scale: f64, what: &str) -> Result<f64> {
    let slack = DOMAIN_CLAMP_TOL * scale.abs().max(1.0);
    if x < lo - slack || x > hi + slack {
        return Err(Error::numerical(format!(
            "{what} = {x:.17e} outside [{lo}, {hi}] by more than {slack:.3e}"
        )));
    }
    Ok(x.clamp(lo, hi))
}
