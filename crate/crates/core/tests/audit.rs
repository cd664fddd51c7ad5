use resolvent1d::audit::{audit_apriori_bound, audit_energy, TestFunction};
use resolvent1d::potential::{catalog_get, Envelope};
use resolvent1d::weights::{build_thm1_weight, build_thm2_weight};

#[test]
fn identities_and_apriori_bound_on_barrier() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    let m = Envelope::abs_of(&v);
    let (h, e, eps) = (0.5, 2.0, 0.2);
    let weights = [
        build_thm1_weight(&m, h, e).unwrap(),
        build_thm2_weight(1.0, 1.0).unwrap(),
    ];
    for w in &weights {
        for t in ["bump:0,0.5", "packet:0.5,0.7,3", "plateau:-1,1,0.5"] {
            let test = TestFunction::parse(t).unwrap();
            let trace = audit_energy(&v, w, &test, h, e, eps).unwrap();
            assert!(trace.relative_flux() <= 1e-6, "{t}: {}", trace.relative_flux());
            assert!(trace.dissipation_defect() <= 1e-6, "{t}");
            assert!(trace.worst_margin >= 0.0, "{t}");
            let ap = audit_apriori_bound(&trace, test.norm_sq());
            assert!(ap.pass && ap.ratio <= 1.0, "{t}: {ap:?}");
        }
    }
}

#[test]
fn zero_source_gives_zero_solution() {
    let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
    let w = build_thm2_weight(1.0, 1.0).unwrap();
    let trace = audit_energy(&v, &w, &TestFunction::Zero, 1.0, 1.0, 0.1).unwrap();
    assert!(trace.u.iter().all(|u| u.norm() == 0.0));
}

#[test]
fn trace_dump_has_one_row_per_node() {
    let v = catalog_get("free", &[]).unwrap();
    let w = build_thm2_weight(1.0, 1.0).unwrap();
    let trace = audit_energy(&v, &w, &TestFunction::parse("bump:0,0.5").unwrap(), 1.0, 1.0, 0.2).unwrap();
    let mut buf = Vec::new();
    trace.dump_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), trace.x.len() + 1);
}
