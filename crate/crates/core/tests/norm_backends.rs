use resolvent1d::norm::{check_rescaling_invariance, compute_norm, eps_trend, Backend, NormOptions, NormWeight};
use resolvent1d::potential::{catalog_get, Envelope};
use resolvent1d::sweep::{envelope_bound, weighted_bound};
use resolvent1d::weights::{build_thm1_weight, build_thm2_weight};

#[test]
fn backends_agree_for_compact_potential() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    let a = NormWeight::from_weight(&build_thm2_weight(1.0, 1.0).unwrap());
    let opts = NormOptions::default();
    for frac in [0.1, 0.5] {
        let eps = frac * 2.0;
        let k = compute_norm(Backend::KernelNystrom, &v, 0.5, 2.0, eps, &a, &opts).unwrap();
        let m = compute_norm(Backend::FdMatrix, &v, 0.5, 2.0, eps, &a, &opts).unwrap();
        let rel = (k.value - m.value).abs() / k.value;
        assert!(rel < 0.02, "eps={eps}: kernel {} matrix {}", k.value, m.value);
        assert!(k.convergence_flag && m.convergence_flag);
    }
}

#[test]
fn free_box_norm_is_inverse_eps() {
    let v = catalog_get("free", &[]).unwrap();
    let a = NormWeight::indicator(-400.0, 400.0);
    let mut opts = NormOptions::default();
    opts.truncation = Some(400.0);
    let est = compute_norm(Backend::FdMatrix, &v, 1.0, 1.0, 0.1, &a, &opts).unwrap();
    assert!((est.value - 10.0).abs() < 0.1, "{}", est.value);
}

#[test]
fn weighted_and_envelope_norms_respect_bounds() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    let m = Envelope::abs_of(&v);
    let opts = NormOptions::default();
    for &(h, e) in &[(1.0, 1.0), (0.5, 2.0)] {
        let w = build_thm1_weight(&m, h, e).unwrap();
        let est = compute_norm(
            Backend::KernelNystrom,
            &v,
            h,
            e,
            0.0,
            &NormWeight::from_weight(&w),
            &opts,
        )
        .unwrap();
        assert!(est.value <= weighted_bound(h, e), "h={h}: {}", est.value);
        let est = compute_norm(
            Backend::KernelNystrom,
            &v,
            h,
            e,
            0.1,
            &NormWeight::from_envelope(&m),
            &opts,
        )
        .unwrap();
        assert!(est.value <= envelope_bound(m.total(), h, e), "h={h}: {}", est.value);
    }
}

#[test]
fn rescaled_problems_have_the_same_norm() {
    let v = catalog_get("gaussian_truncated", &[1.0, 0.5, 2.0]).unwrap();
    let a = NormWeight::from_envelope(&Envelope::abs_of(&v));
    let rep =
        check_rescaling_invariance(&v, 0.5, 1.0, 0.2, &a, Backend::KernelNystrom, &NormOptions::default()).unwrap();
    assert!(rep.dilation_pass && rep.energy_pass, "{rep:?}");
}

#[test]
fn zero_eps_on_matrix_backend_is_rejected() {
    let v = catalog_get("free", &[]).unwrap();
    let a = NormWeight::indicator(-1.0, 1.0);
    assert!(compute_norm(Backend::FdMatrix, &v, 1.0, 1.0, 0.0, &a, &NormOptions::default()).is_err());
}

#[test]
fn eps_trend_for_slowly_decaying_potential() {
    let v = catalog_get("wvn_like", &[1.0, 1.0]).unwrap();
    let a = NormWeight::indicator(-2.0, 2.0);
    let trend = eps_trend(&v, 1.0, 1.0, &a, &[0.1, 0.4, 0.2], &NormOptions::default()).unwrap();
    assert_eq!(trend.eps, vec![0.4, 0.2, 0.1]);
    assert!(trend.values.iter().all(|x| x.is_finite() && *x > 0.0));
    assert!(trend.extrapolated.is_finite());
    assert!(eps_trend(&v, 1.0, 1.0, &a, &[0.1], &NormOptions::default()).is_err());
}
