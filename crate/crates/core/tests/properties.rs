use proptest::prelude::*;
use resolvent1d::jost::solve_pair;
use resolvent1d::kernel::KernelEval;
use resolvent1d::norm::{compute_norm, Backend, NormOptions, NormWeight};
use resolvent1d::potential::catalog_get;
use resolvent1d::sweep::{weighted_bound, EpsChoice};
use resolvent1d::weights::build_thm2_weight;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scattering_matrix_is_unitary(v0 in -3.0f64..3.0, r in 0.2f64..2.0, h in 0.1f64..1.0, e in 0.5f64..4.0) {
        let v = catalog_get("square_barrier", &[v0, r]).unwrap();
        let d = solve_pair(&v, h, e, 0.0).unwrap().scattering.unitarity();
        prop_assert!(d.ab <= 1e-8 && d.b_conj_c <= 1e-8 && d.a_minus_d <= 1e-8, "{:?}", d);
    }

    #[test]
    fn kernel_is_symmetric(x in -3.0f64..3.0, y in -3.0f64..3.0, eps in 0.0f64..0.5) {
        let v = catalog_get("gaussian_truncated", &[1.0, 0.5, 2.0]).unwrap();
        let k = KernelEval::new(&v, 0.5, 1.0, eps).unwrap();
        let (a, b) = (k.value(x, y), k.value(y, x));
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300));
    }

    #[test]
    fn eps_fraction_round_trips(r in 0.0f64..=0.5) {
        let label = EpsChoice::Fraction(r).label();
        prop_assert_eq!(EpsChoice::parse(&label).unwrap(), EpsChoice::Fraction(r));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn exterior_weighted_norm_below_bound(h in 0.2f64..1.0, e in 0.5f64..4.0, frac in 0.0f64..0.5) {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let a = NormWeight::from_weight(&build_thm2_weight(1.0, 1.0).unwrap());
        let est = compute_norm(Backend::KernelNystrom, &v, h, e, frac * e, &a, &NormOptions::default()).unwrap();
        prop_assert!(est.value <= weighted_bound(h, e));
    }
}
