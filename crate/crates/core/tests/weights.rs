use resolvent1d::potential::{catalog_get, Envelope};
use resolvent1d::weights::{
    build_custom_weight, build_thm1_weight, build_thm2_weight, thm1_lower_bound, verify_w2_condition,
};

#[test]
fn sinh_weight_is_admissible_and_dominates_its_lower_bound() {
    for (name, params) in [
        ("square_barrier", vec![1.0, 1.0]),
        ("gaussian_truncated", vec![2.0, 0.5, 2.0]),
        ("inverse_sqrt_singular", vec![1.0, 1.0]),
        ("wvn_like", vec![1.0, 0.5]),
    ] {
        let v = catalog_get(name, &params).unwrap();
        let m = Envelope::abs_of(&v);
        for &(h, e) in &[(1.0, 1.0), (0.2, 4.0)] {
            let w = build_thm1_weight(&m, h, e).unwrap();
            let val = w.validate(2000);
            assert!(val.pass, "{name} h={h} E={e}: {val:?}");
            let check = verify_w2_condition(&w, &v, h, e);
            assert!(check.pass, "{name} h={h} E={e}: {check:?}");
            for x in [-0.9, -0.3, 0.1, 0.6] {
                assert!(w.w_prime(x) >= thm1_lower_bound(&m, h, e, x) * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn exterior_weight_satisfies_the_condition_for_supported_potentials() {
    let w = build_thm2_weight(1.0, 1.0).unwrap();
    assert!(w.validate(2000).pass);
    let v = catalog_get("square_barrier", &[5.0, 1.0]).unwrap();
    assert!(verify_w2_condition(&w, &v, 0.1, 0.5).pass);
    let wide = catalog_get("square_barrier", &[1.0, 2.0]).unwrap();
    assert!(!verify_w2_condition(&w, &wide, 1.0, 1.0).pass);
}

#[test]
fn custom_weights_validate_and_broken_one_fails_the_condition() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    for spec in ["tanh:1", "arctan:2"] {
        assert!(build_custom_weight(spec).unwrap().validate(2000).pass, "{spec}");
    }
    let broken = build_custom_weight("const:1").unwrap();
    assert!(!verify_w2_condition(&broken, &v, 1.0, 1.0).pass);
}

#[test]
fn weight_condition_is_scale_covariant() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    let m = Envelope::abs_of(&v);
    let w = build_thm1_weight(&m, 0.5, 2.0).unwrap();
    let s = 2.0;
    let (vd, wd) = (v.dilate(s), w.dilate(s));
    for y in [-0.4, 0.0, 0.3] {
        assert!((wd.w(y) - w.w(s * y)).abs() < 1e-14);
        assert!((vd.eval(y) - v.eval(s * y)).abs() < 1e-14);
    }
}
