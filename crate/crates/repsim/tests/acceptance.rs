//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with its headline numbers. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines for passing criteria too).

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use repsim::duality::{envelope_bounds, euclidean_extrapolation_demo, sqrt_cka, verify_duality};
use repsim::experiments::{
    render_csv, run_convergence_neurons, run_convergence_stimuli, run_envelope, ConvergenceConfig,
    ConvergenceMode, EnvelopeConfig, EnvelopeScheme,
};
use repsim::linalg::{
    center_columns, nuclear_norm, psd_sqrt, random_gaussian, random_orthogonal, sample_wishart,
    trial_rng,
};
use repsim::measures::{
    alignment_cost, cka, cross_covariances, fidelity, linear_kernels, nbs, procrustes_align,
    procrustes_distance, riemannian_shape_distance, zero_pad, KernelPair,
};
use repsim::{DataMatrix, PsdMatrix, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Seeded pair with dimensions drawn from the acceptance ranges
/// (M in [3,40], N in [1,25]).
fn random_pair(seed: u64, stream: u64, equal_dims: bool) -> (DataMatrix, DataMatrix) {
    let mut rng = trial_rng(seed, stream);
    let m = rng.random_range(3..=40);
    let nx = rng.random_range(1..=25);
    let ny = if equal_dims {
        nx
    } else {
        rng.random_range(1..=25)
    };
    (
        random_gaussian(m, nx, &mut rng),
        random_gaussian(m, ny, &mut rng),
    )
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

#[test]
fn criterion_01_duality_theorem() {
    let start = Instant::now();
    let t = tol();
    let mut worst_bp = 0.0f64;
    let mut worst_nbs = 0.0f64;
    let mut passed = 0usize;
    let trials = 500;
    for trial in 0..trials {
        let (x, y) = random_pair(101, trial as u64, false);
        let kernels = linear_kernels(&x, &y).unwrap();
        let b = repsim::measures::bures_distance(&kernels.k_x, &kernels.k_y, &t).unwrap();
        let p = procrustes_distance(&x, &y).unwrap();
        let s = nbs(&kernels, &t).unwrap();
        let cos_theta = riemannian_shape_distance(&x, &y).unwrap().cos();
        let bp_err = (b - p).abs();
        let nbs_err = (s - cos_theta).abs();
        worst_bp = worst_bp.max(bp_err / (1.0 + p));
        worst_nbs = worst_nbs.max(nbs_err);
        let report = verify_duality(&x, &y, &t).unwrap();
        if bp_err <= 1e-8 * (1.0 + p) && nbs_err <= 1e-8 && report.pass {
            passed += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = passed == trials && elapsed.as_secs_f64() < 30.0;
    report(
        "criterion 1 (duality: Bures = Procrustes, NBS = cos shape distance)",
        pass,
        &format!(
            "{passed}/{trials} pairs, worst |B-P|/(1+P) = {worst_bp:.3e}, \
             worst |NBS-cos| = {worst_nbs:.3e}, runtime {:.2}s (< 30s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_lemma_1_alignment_vs_covariance() {
    let mut worst_equal = 0.0f64;
    let mut worst_padded = 0.0f64;
    let trials = 200;
    for trial in 0..trials {
        let (x, y) = random_pair(102, trial as u64, true);
        let q = procrustes_align(&x, &y).unwrap();
        let direct = alignment_cost(&x, &y, &q);
        let covariance_form = procrustes_distance(&x, &y).unwrap();
        worst_equal = worst_equal.max((direct - covariance_form).abs() / (1.0 + covariance_form));
    }
    // Unequal dimensions: zero-pad to a common width, then the alignment
    // form must reproduce the covariance-form value of the originals.
    for trial in 0..50 {
        let (x, y) = random_pair(103, trial as u64, false);
        let width = x.ncols().max(y.ncols());
        let xp = zero_pad(&x, width).unwrap();
        let yp = zero_pad(&y, width).unwrap();
        let q = procrustes_align(&xp, &yp).unwrap();
        let direct = alignment_cost(&xp, &yp, &q);
        let covariance_form = procrustes_distance(&x, &y).unwrap();
        worst_padded = worst_padded.max((direct - covariance_form).abs() / (1.0 + covariance_form));
    }
    let pass = worst_equal <= 1e-8 && worst_padded <= 1e-8;
    report(
        "criterion 2 (Lemma 1: alignment form = covariance form)",
        pass,
        &format!(
            "{trials} equal-dim pairs worst rel err {worst_equal:.3e}, \
             50 zero-padded unequal pairs worst rel err {worst_padded:.3e}"
        ),
    );
}

/// Nonzero eigenvalues of a symmetric PSD matrix, descending.
fn psd_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eigenvalues: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    eigenvalues
}

#[test]
fn criterion_03_lemma_2_fidelity_and_spectra() {
    let t = tol();
    let mut worst_fid = 0.0f64;
    let trials = 500;
    for trial in 0..trials {
        let (x, y) = random_pair(104, trial as u64, false);
        let kernels = linear_kernels(&x, &y).unwrap();
        let fid = fidelity(&kernels.k_x, &kernels.k_y, &t).unwrap();
        let nn = nuclear_norm(&cross_covariances(&x, &y).unwrap().sigma_xy).unwrap();
        worst_fid = worst_fid.max((fid - nn).abs() / (1.0 + nn));
    }

    // Nonzero eigenvalues of A = X^T Y Y^T X, B = X X^T Y Y^T, and
    // C = (X X^T)^{1/2} Y Y^T (X X^T)^{1/2} agree (on centered data).
    let mut worst_spec = 0.0f64;
    for trial in 0..50 {
        let (x, y) = random_pair(105, trial as u64, false);
        let a = center_columns(&x).into_matrix();
        let b = center_columns(&y).into_matrix();
        let cross = a.tr_mul(&b);
        let mat_a = &cross * cross.transpose();
        let gram_x = PsdMatrix::from_factor(&a);
        let gram_y = &b * b.transpose();
        let mat_b = gram_x.as_matrix() * &gram_y;
        let sx = psd_sqrt(&gram_x, &t).unwrap();
        let mat_c = sx.as_matrix() * &gram_y * sx.as_matrix();

        let spec_a = psd_spectrum(&(0.5 * (&mat_a + mat_a.transpose())));
        let spec_c = psd_spectrum(&(0.5 * (&mat_c + mat_c.transpose())));
        let eig_b = mat_b.complex_eigenvalues();
        let mut spec_b: Vec<f64> = eig_b.iter().map(|z| z.re).collect();
        spec_b.sort_by(|p, q| q.total_cmp(p));
        let max_im = eig_b.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);

        let lambda_max = spec_a.first().copied().unwrap_or(0.0).max(
            spec_b.first().copied().unwrap_or(0.0),
        );
        let rank = spec_a.len().min(spec_b.len()).min(spec_c.len());
        for i in 0..rank {
            let a_i = spec_a.get(i).copied().unwrap_or(0.0).max(0.0);
            let b_i = spec_b.get(i).copied().unwrap_or(0.0).max(0.0);
            let c_i = spec_c.get(i).copied().unwrap_or(0.0).max(0.0);
            let err = (a_i - b_i).abs().max((a_i - c_i).abs()) / (1.0 + lambda_max);
            worst_spec = worst_spec.max(err);
        }
        worst_spec = worst_spec.max(max_im / (1.0 + lambda_max));
    }

    let pass = worst_fid <= 1e-8 && worst_spec <= 1e-8;
    report(
        "criterion 3 (Lemma 2: fidelity = cross-covariance nuclear norm; spectra of A, B, C)",
        pass,
        &format!(
            "{trials} pairs worst fidelity rel err {worst_fid:.3e}, \
             50 spectra worst eigenvalue err {worst_spec:.3e}"
        ),
    );
}

#[test]
fn criterion_04_metric_axioms() {
    let t = tol();
    let mut worst_symmetry = 0.0f64;
    let mut worst_triangle = f64::NEG_INFINITY;
    let trials = 500;
    for trial in 0..trials {
        let mut rng = trial_rng(106, trial as u64);
        let m = rng.random_range(3..=40);
        let x = random_gaussian(m, rng.random_range(1..=25), &mut rng);
        let y = random_gaussian(m, rng.random_range(1..=25), &mut rng);
        let z = random_gaussian(m, rng.random_range(1..=25), &mut rng);

        let p = |a: &DataMatrix, b: &DataMatrix| procrustes_distance(a, b).unwrap();
        let theta_b = |a: &DataMatrix, b: &DataMatrix| {
            let kernels = linear_kernels(a, b).unwrap();
            nbs(&kernels, &t).unwrap().clamp(0.0, 1.0).acos()
        };

        let (pxy, pyx) = (p(&x, &y), p(&y, &x));
        worst_symmetry = worst_symmetry.max((pxy - pyx).abs() / (1.0 + pxy));
        let (txy, tyx) = (theta_b(&x, &y), theta_b(&y, &x));
        worst_symmetry = worst_symmetry.max((txy - tyx).abs() / (1.0 + txy));

        worst_triangle = worst_triangle.max(pxy - p(&x, &z) - p(&z, &y));
        worst_triangle = worst_triangle.max(txy - theta_b(&x, &z) - theta_b(&z, &y));
    }
    let pass = worst_symmetry <= 1e-8 && worst_triangle <= 1e-8;
    report(
        "criterion 4 (metric axioms: symmetry, sampled triangle inequality)",
        pass,
        &format!(
            "{trials} triples incl. unequal dims, worst symmetry rel err {worst_symmetry:.3e}, \
             worst triangle violation {worst_triangle:.3e}"
        ),
    );
}

#[test]
fn criterion_05_invariances() {
    let t = tol();
    let trials = 100;
    let mut worst_procrustes = 0.0f64;
    let mut worst_riemannian = 0.0f64;
    let mut worst_kernel = 0.0f64;
    let mut worst_self = 0.0f64;
    for trial in 0..trials {
        let mut rng = trial_rng(107, trial as u64);
        let m = rng.random_range(4..=30);
        let n = rng.random_range(2..=15);
        let x = random_gaussian(m, n, &mut rng);
        let y = random_gaussian(m, n, &mut rng);
        let q = random_orthogonal(n, &mut rng).unwrap();
        let shift = random_gaussian(1, n, &mut rng);
        let scale = 10.0f64.powf(rng.random_range(-1.0..1.0));

        let mut moved = y.as_matrix() * &q;
        for i in 0..m {
            for j in 0..n {
                moved[(i, j)] += shift.as_matrix()[(0, j)];
            }
        }
        let y_moved = DataMatrix::new(moved).unwrap();
        let p_ref = procrustes_distance(&x, &y).unwrap();
        let p_moved = procrustes_distance(&x, &y_moved).unwrap();
        worst_procrustes = worst_procrustes.max((p_ref - p_moved).abs() / (1.0 + p_ref));

        let y_scaled = DataMatrix::new(scale * y.as_matrix() * &q).unwrap();
        let theta_ref = riemannian_shape_distance(&x, &y).unwrap();
        let theta_scaled = riemannian_shape_distance(&x, &y_scaled).unwrap();
        worst_riemannian = worst_riemannian.max((theta_ref - theta_scaled).abs());

        let y_rotated = DataMatrix::new(y.as_matrix() * &q).unwrap();
        let k_ref = linear_kernels(&x, &y).unwrap();
        let k_rot = linear_kernels(&x, &y_rotated).unwrap();
        worst_kernel =
            worst_kernel.max((cka(&k_ref).unwrap() - cka(&k_rot).unwrap()).abs());
        worst_kernel =
            worst_kernel.max((nbs(&k_ref, &t).unwrap() - nbs(&k_rot, &t).unwrap()).abs());

        // Transforming a matrix against itself gives distance zero.
        let mut self_moved = x.as_matrix() * &q;
        for i in 0..m {
            for j in 0..n {
                self_moved[(i, j)] += shift.as_matrix()[(0, j)];
            }
        }
        let x_moved = DataMatrix::new(self_moved).unwrap();
        worst_self = worst_self.max(procrustes_distance(&x, &x_moved).unwrap());
    }
    let pass = worst_procrustes <= 1e-8
        && worst_riemannian <= 1e-8
        && worst_kernel <= 1e-8
        && worst_self <= 1e-8;
    report(
        "criterion 5 (invariances: orthogonal+translation, scaling, kernel rotation)",
        pass,
        &format!(
            "{trials} instances: Procrustes {worst_procrustes:.3e}, \
             Riemannian {worst_riemannian:.3e}, CKA/NBS {worst_kernel:.3e}, \
             self-transform distance {worst_self:.3e}"
        ),
    );
}

#[test]
fn criterion_06_identities() {
    let t = tol();
    let trials = 200;
    let mut worst_eq5 = 0.0f64;
    let mut worst_cka = 0.0f64;
    let mut worst_nbs = 0.0f64;
    for trial in 0..trials {
        let (x, y) = random_pair(108, trial as u64, false);

        // cos theta* = 1 - P^2(X/||CX||, Y/||CY||)/2
        let theta = riemannian_shape_distance(&x, &y).unwrap();
        let xn = DataMatrix::new(x.as_matrix() / center_columns(&x).as_matrix().norm()).unwrap();
        let yn = DataMatrix::new(y.as_matrix() / center_columns(&y).as_matrix().norm()).unwrap();
        let p = procrustes_distance(&xn, &yn).unwrap();
        worst_eq5 = worst_eq5.max((theta.cos() - (1.0 - 0.5 * p * p)).abs());

        let kernels = linear_kernels(&x, &y).unwrap();
        let cka_value = cka(&kernels).unwrap();
        let kxn = kernels.k_x.as_matrix() / kernels.k_x.as_matrix().norm();
        let kyn = kernels.k_y.as_matrix() / kernels.k_y.as_matrix().norm();
        worst_cka =
            worst_cka.max((cka_value - (1.0 - 0.5 * (kxn - kyn).norm_squared())).abs());

        let nbs_value = nbs(&kernels, &t).unwrap();
        let kx_tr =
            PsdMatrix::new(kernels.k_x.as_matrix() / kernels.k_x.trace(), &t).unwrap();
        let ky_tr =
            PsdMatrix::new(kernels.k_y.as_matrix() / kernels.k_y.trace(), &t).unwrap();
        let b = repsim::measures::bures_distance(&kx_tr, &ky_tr, &t).unwrap();
        worst_nbs = worst_nbs.max((nbs_value - (1.0 - 0.5 * b * b)).abs());
    }
    let pass = worst_eq5 <= 1e-8 && worst_cka <= 1e-8 && worst_nbs <= 1e-8;
    report(
        "criterion 6 (identities: shape-Procrustes, CKA-Euclidean, NBS-Bures)",
        pass,
        &format!(
            "{trials} pairs: shape-Procrustes {worst_eq5:.3e}, \
             CKA-Euclidean {worst_cka:.3e}, NBS-Bures {worst_nbs:.3e}"
        ),
    );
}

#[test]
fn criterion_07_envelope_bounds() {
    let start = Instant::now();
    let t = tol();
    let mut violations = 0usize;
    for scheme in [EnvelopeScheme::Independent, EnvelopeScheme::Perturbed] {
        let cfg = EnvelopeConfig {
            trials: 1000,
            seed: 109,
            scheme,
            ..EnvelopeConfig::default()
        };
        let rows = run_envelope(&cfg, &t).unwrap();
        violations += rows.iter().filter(|r| !r.within_bounds()).count();
    }

    // Rank-1 pairs saturate the envelope.
    let mut worst_saturation = 0.0f64;
    for trial in 0..50 {
        let mut rng = trial_rng(110, trial);
        let sqrt_kx = sample_wishart(10, 1, &mut rng).unwrap();
        let sqrt_ky = sample_wishart(10, 1, &mut rng).unwrap();
        let kernels = KernelPair::new(
            PsdMatrix::from_factor(sqrt_kx.as_matrix()),
            PsdMatrix::from_factor(sqrt_ky.as_matrix()),
        )
        .unwrap();
        let envelope = envelope_bounds(&kernels, &t).unwrap();
        worst_saturation = worst_saturation
            .max(envelope.bounds.slack_lower.abs())
            .max(envelope.bounds.slack_upper.abs());
    }

    // Commuting kernels saturate the sqrt-CKA inequality.
    let mut worst_commuting = 0.0f64;
    for trial in 0..50 {
        let mut rng = trial_rng(111, trial);
        let dx = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            8,
            (0..8).map(|_| rng.random_range(0.1..4.0)),
        ));
        let dy = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            8,
            (0..8).map(|_| rng.random_range(0.1..4.0)),
        ));
        let kernels = KernelPair::new(
            PsdMatrix::new(dx, &t).unwrap(),
            PsdMatrix::new(dy, &t).unwrap(),
        )
        .unwrap();
        let s = sqrt_cka(&kernels, &t).unwrap();
        let n = nbs(&kernels, &t).unwrap();
        worst_commuting = worst_commuting.max((s - n).abs());
    }

    let elapsed = start.elapsed();
    let pass = violations == 0
        && worst_saturation <= 1e-8
        && worst_commuting <= 1e-8
        && elapsed.as_secs_f64() < 60.0;
    report(
        "criterion 7 (scatter bounds: rank envelope and Fuchs-van de Graaf)",
        pass,
        &format!(
            "2x1000 trials, {violations} violations, rank-1 saturation {worst_saturation:.3e}, \
             commuting sqrt-CKA vs NBS {worst_commuting:.3e}, runtime {:.2}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_extrapolation_fixture() {
    let t = tol();
    let fixture: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/extrapolation_seed.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let seed = fixture["seed"].as_u64().unwrap();
    let dim = fixture["dim"].as_u64().unwrap() as usize;
    let dof_x = fixture["dof_x"].as_u64().unwrap() as usize;
    let dof_y = fixture["dof_y"].as_u64().unwrap() as usize;
    let alpha = fixture["alpha"].as_f64().unwrap();
    let threshold = fixture["min_eigenvalue_below"].as_f64().unwrap();

    let mut rng = trial_rng(seed, 0);
    let sqrt_kx = sample_wishart(dim, dof_x, &mut rng).unwrap();
    let sqrt_ky = sample_wishart(dim, dof_y, &mut rng).unwrap();
    let kernels = KernelPair::new(
        PsdMatrix::from_factor(sqrt_kx.as_matrix()),
        PsdMatrix::from_factor(sqrt_ky.as_matrix()),
    )
    .unwrap();

    let probe = euclidean_extrapolation_demo(&kernels, alpha, &t);
    let mut interval_psd = true;
    for i in 0..=10 {
        let a = i as f64 / 10.0;
        interval_psd &= euclidean_extrapolation_demo(&kernels, a, &t).is_psd;
    }
    let pass = probe.min_eigenvalue < threshold && !probe.is_psd && interval_psd;
    report(
        "criterion 8 (Euclidean extrapolation leaves the PSD cone)",
        pass,
        &format!(
            "fixture seed {seed}: alpha={alpha} min eigenvalue {:.3e} (< {threshold:.0e}), \
             alpha in [0,1] all PSD: {interval_psd}",
            probe.min_eigenvalue
        ),
    );
}

#[test]
fn criterion_09_convergence() {
    let start = Instant::now();
    let t = tol();
    let mut detail = String::new();
    let mut pass = true;
    for mode in [ConvergenceMode::Stimuli, ConvergenceMode::Neurons] {
        let cfg = ConvergenceConfig {
            mode,
            fixed_dim: 10,
            sizes: vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
            trials_per_size: 60,
            seed: 4,
        };
        let rows = match mode {
            ConvergenceMode::Stimuli => run_convergence_stimuli(&cfg, &t).unwrap(),
            ConvergenceMode::Neurons => run_convergence_neurons(&cfg, &t).unwrap(),
        };
        let worst_pairing = rows
            .iter()
            .map(|r| (r.rho - r.bures).abs())
            .fold(0.0f64, f64::max);
        let medians = repsim::experiments::median_errors_by_size(&rows);
        let monotone = medians.windows(2).all(|w| w[1].1 < w[0].1);
        let ground_truth = rows[0].ground_truth;
        let final_median = medians.last().unwrap().1;
        let final_ok = final_median < 0.1 * ground_truth;
        pass &= worst_pairing <= 1e-8 && monotone && final_ok;
        detail.push_str(&format!(
            "[{}: pairing {worst_pairing:.2e}, monotone {monotone}, \
             final median {final_median:.3e} vs 10% of truth {:.3e}] ",
            mode.name(),
            0.1 * ground_truth
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 300.0;
    detail.push_str(&format!("runtime {:.1}s (< 300s)", elapsed.as_secs_f64()));
    report("criterion 9 (convergence in M and N)", pass, &detail);
}

#[test]
fn criterion_10_determinism() {
    let t = tol();
    // Library level: identical config and seed give identical bytes,
    // including under rayon's concurrent trial execution.
    let cfg = EnvelopeConfig {
        trials: 64,
        seed: 113,
        ..EnvelopeConfig::default()
    };
    let csv_a = render_csv(&run_envelope(&cfg, &t).unwrap());
    let csv_b = render_csv(&run_envelope(&cfg, &t).unwrap());
    let envelope_ok = csv_a == csv_b;

    let conv_cfg = ConvergenceConfig {
        sizes: vec![16, 32, 64],
        trials_per_size: 5,
        fixed_dim: 5,
        seed: 114,
        mode: ConvergenceMode::Stimuli,
    };
    let conv_a = render_csv(&run_convergence_stimuli(&conv_cfg, &t).unwrap());
    let conv_b = render_csv(&run_convergence_stimuli(&conv_cfg, &t).unwrap());
    let converge_ok = conv_a == conv_b;

    // Command level: the shipped binary produces byte-identical files.
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("env_a.csv");
    let out_b = dir.path().join("env_b.csv");
    let mut cli_ok = true;
    for out in [&out_a, &out_b] {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_repsim"))
            .args([
                "envelope",
                "--trials",
                "32",
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ])
            .env_remove("REPSIM_SEED")
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        cli_ok &= status.success();
    }
    cli_ok &= std::fs::read(&out_a).unwrap() == std::fs::read(&out_b).unwrap();

    let pass = envelope_ok && converge_ok && cli_ok;
    report(
        "criterion 10 (determinism: byte-identical output per seed)",
        pass,
        &format!("library envelope {envelope_ok}, library converge {converge_ok}, CLI {cli_ok}"),
    );
}
