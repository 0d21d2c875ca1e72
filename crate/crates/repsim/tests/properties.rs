//! Property-based checks of the structural invariants: centering
//! idempotence, norm inequalities, square-root consistency, measure
//! symmetry, and the duality identities on arbitrary well-formed inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use repsim::linalg::{
    center_columns, nuclear_norm, numerical_rank, psd_sqrt, sample_wishart, trial_rng,
};
use repsim::measures::{
    bures_distance, cka, linear_kernels, nbs, procrustes_distance, riemannian_shape_distance,
};
use repsim::{DataMatrix, PsdMatrix, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Bounded random matrices keep the numerics far from overflow while
/// still exercising rank deficiency (entries are coarse, so repeated
/// values and zero rows occur).
fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DataMatrix> {
    (2..=max_rows, 1..=max_cols)
        .prop_flat_map(|(m, n)| {
            proptest::collection::vec(-50i32..=50, m * n)
                .prop_map(move |cells| {
                    let values: Vec<f64> = cells.iter().map(|&c| c as f64 / 8.0).collect();
                    DataMatrix::new(DMatrix::from_row_slice(m, n, &values)).unwrap()
                })
        })
}

/// Same-row-count pair.
fn pair_strategy() -> impl Strategy<Value = (DataMatrix, DataMatrix)> {
    (3..=10usize, 1..=6usize, 1..=6usize)
        .prop_flat_map(|(m, nx, ny)| {
            (
                proptest::collection::vec(-50i32..=50, m * nx),
                proptest::collection::vec(-50i32..=50, m * ny),
                Just((m, nx, ny)),
            )
        })
        .prop_map(|(xv, yv, (m, nx, ny))| {
            let x: Vec<f64> = xv.iter().map(|&c| c as f64 / 8.0).collect();
            let y: Vec<f64> = yv.iter().map(|&c| c as f64 / 8.0).collect();
            (
                DataMatrix::new(DMatrix::from_row_slice(m, nx, &x)).unwrap(),
                DataMatrix::new(DMatrix::from_row_slice(m, ny, &y)).unwrap(),
            )
        })
}

proptest! {
    #[test]
    fn centering_is_idempotent(x in matrix_strategy(12, 8)) {
        let once = center_columns(&x);
        let twice = center_columns(&once);
        let diff = (once.as_matrix() - twice.as_matrix()).amax();
        prop_assert!(diff <= 1e-12 * (1.0 + once.as_matrix().amax()));
    }

    #[test]
    fn nuclear_norm_brackets_frobenius(x in matrix_strategy(10, 8)) {
        let a = x.as_matrix();
        let nn = nuclear_norm(a).unwrap();
        let fro = a.norm();
        let rank = numerical_rank(a, &tol()).unwrap();
        prop_assert!(nn >= fro - 1e-10 * (1.0 + fro));
        prop_assert!(nn <= (rank as f64).sqrt() * fro + 1e-10 * (1.0 + fro));
    }

    #[test]
    fn psd_sqrt_squares_back(seed in 0u64..500, dim in 2usize..12, dof in 1usize..14) {
        let mut rng = trial_rng(seed, 31);
        let k = sample_wishart(dim, dof, &mut rng).unwrap();
        let s = psd_sqrt(&k, &tol()).unwrap();
        let err = (s.as_matrix() * s.as_matrix() - k.as_matrix()).norm();
        prop_assert!(err <= 1e-8 * (1.0 + k.as_matrix().norm()));
    }

    #[test]
    fn wishart_is_deterministic(seed in 0u64..1000) {
        let a = sample_wishart(5, 3, &mut trial_rng(seed, 7)).unwrap();
        let b = sample_wishart(5, 3, &mut trial_rng(seed, 7)).unwrap();
        prop_assert_eq!(a.as_matrix(), b.as_matrix());
    }

    #[test]
    fn distances_are_symmetric((x, y) in pair_strategy()) {
        let p_xy = procrustes_distance(&x, &y).unwrap();
        let p_yx = procrustes_distance(&y, &x).unwrap();
        prop_assert!((p_xy - p_yx).abs() <= 1e-8 * (1.0 + p_xy));

        let kernels_xy = linear_kernels(&x, &y).unwrap();
        let b_xy = bures_distance(&kernels_xy.k_x, &kernels_xy.k_y, &tol()).unwrap();
        let b_yx = bures_distance(&kernels_xy.k_y, &kernels_xy.k_x, &tol()).unwrap();
        prop_assert!((b_xy - b_yx).abs() <= 1e-8 * (1.0 + b_xy));
    }

    #[test]
    fn duality_holds_on_arbitrary_pairs((x, y) in pair_strategy()) {
        let p = procrustes_distance(&x, &y).unwrap();
        let kernels = linear_kernels(&x, &y).unwrap();
        let b = bures_distance(&kernels.k_x, &kernels.k_y, &tol()).unwrap();
        prop_assert!((p - b).abs() <= 1e-8 * (1.0 + p));

        // The similarity side is defined only for non-degenerate inputs.
        let theta = riemannian_shape_distance(&x, &y);
        let s = nbs(&kernels, &tol());
        match (theta, s) {
            (Ok(theta), Ok(s)) => prop_assert!((s - theta.cos()).abs() <= 1e-8),
            (Err(_), Err(_)) => {}
            (theta, s) => prop_assert!(false, "routes disagree on degeneracy: {theta:?} vs {s:?}"),
        }
    }

    #[test]
    fn cka_and_nbs_stay_in_unit_interval((x, y) in pair_strategy()) {
        let kernels = linear_kernels(&x, &y).unwrap();
        if let Ok(v) = cka(&kernels) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if let Ok(v) = nbs(&kernels, &tol()) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn wishart_rank_is_min_of_dims(seed in 0u64..200, p in 2usize..10, dof in 1usize..12) {
        let mut rng = trial_rng(seed, 13);
        let k = sample_wishart(p, dof, &mut rng).unwrap();
        prop_assert_eq!(numerical_rank(k.as_matrix(), &tol()).unwrap(), p.min(dof));
    }

    #[test]
    fn psd_validation_accepts_scaled_grams(seed in 0u64..200, dim in 2usize..10) {
        let mut rng = trial_rng(seed, 17);
        let k = sample_wishart(dim, dim + 1, &mut rng).unwrap();
        let scaled = k.as_matrix() / (dim as f64);
        prop_assert!(PsdMatrix::new(scaled, &tol()).is_ok());
    }
}
