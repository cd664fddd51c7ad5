//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use resolvent1d::audit::{audit_apriori_bound, audit_energy, TestFunction};
use resolvent1d::jost::solve_pair;
use resolvent1d::kernel::{exterior_grid, KernelEval};
use resolvent1d::norm::{check_rescaling_invariance, compute_norm, Backend, NormOptions, NormWeight};
use resolvent1d::potential::{catalog_get, Envelope, EnvelopeSpec, Potential, PotentialSpec};
use resolvent1d::sweep::{run_sweep, EpsChoice, RowStatus, SweepSpec};
use resolvent1d::weights::{build_thm1_weight, build_thm2_weight};

const HS: [f64; 4] = [1.0, 0.5, 0.2, 0.1];
const ES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn compact_specs() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("square_barrier", vec![1.0, 1.0]),
        ("gaussian_truncated", vec![1.0, 0.5, 2.0]),
        ("inverse_sqrt_singular", vec![1.0, 1.0]),
    ]
}

fn pot(name: &str, params: &[f64]) -> Potential {
    catalog_get(name, params).unwrap()
}

fn sweep(potential: PotentialSpec, weight: &str, backend: &str, h: &[f64], e: &[f64], eps: &[EpsChoice]) -> SweepSpec {
    SweepSpec {
        potential,
        weight: weight.into(),
        backend: backend.into(),
        h: h.to_vec(),
        energy: e.to_vec(),
        eps: eps.to_vec(),
        slack: 1.05,
        grid_ppw: 20.0,
        out: None,
    }
}

/// Runs a sweep and reports the worst ratio; every row must pass and converge.
fn sweep_ok(spec: &SweepSpec, worst: &mut f64, bad: &mut Vec<String>) -> Vec<f64> {
    let report = run_sweep(spec).unwrap();
    let mut norms = Vec::new();
    for r in &report.rows {
        *worst = worst.max(r.ratio);
        if r.status != RowStatus::Pass {
            bad.push(format!(
                "{} {} {} h={} E={} eps={}: {:?} {}",
                spec.potential.name,
                spec.weight,
                spec.backend,
                r.h,
                r.energy,
                r.eps,
                r.status,
                r.message.as_deref().unwrap_or("")
            ));
        }
        norms.push(r.computed_norm);
    }
    norms
}

fn c1_unitarity() -> Outcome {
    let mut worst = 0.0f64;
    for (name, params) in compact_specs() {
        let v = pot(name, &params);
        for h in HS {
            for e in ES {
                let d = solve_pair(&v, h, e, 0.0).unwrap().scattering.unitarity();
                worst = worst.max(d.ab).max(d.a_minus_d).max(d.b_conj_c);
            }
        }
    }
    outcome(worst <= 1e-8, format!("48 points, worst defect {worst:.2e} (tol 1e-8)"))
}

fn c2_free_kernel() -> Outcome {
    let v = pot("free", &[]);
    let xs: Vec<f64> = (0..50).map(|i| -5.0 + 10.0 * i as f64 / 49.0).collect();
    let mut worst = 0.0f64;
    for (h, e) in [(1.0, 1.0), (0.5, 2.0)] {
        let k = KernelEval::new(&v, h, e, 0.0).unwrap();
        for &x in &xs {
            for &y in &xs {
                let want = k.free_value(x, y);
                worst = worst.max((k.value(x, y) - want).norm() / want.norm());
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("2 x 50x50 grid, worst relative error {worst:.2e} (tol 1e-10)"),
    )
}

fn c3_kernel_bound() -> Outcome {
    let mut specs = compact_specs();
    specs.push(("free", vec![]));
    specs.push(("sinh_test", vec![1.0, 1.0, 3.0]));
    let (mut worst_crude, mut worst_sharp, mut pass) = (0.0f64, 0.0f64, true);
    for (name, params) in specs {
        let v = pot(name, &params);
        let r = v.support_radius().unwrap();
        for h in HS {
            for e in ES {
                let k = KernelEval::new(&v, h, e, 0.0).unwrap();
                let rep = k.exterior_bound_check(&exterior_grid(r, 1e-6, r + 6.0, 30)).unwrap();
                worst_crude = worst_crude.max(rep.slack_crude);
                worst_sharp = worst_sharp.max(rep.slack_sharp);
                pass &= rep.pass;
            }
        }
    }
    outcome(
        pass,
        format!("80 points, max |K| / crude {worst_crude:.6}, max |K| / sharp {worst_sharp:.6} (no slack)"),
    )
}

fn c4_weighted_sweep() -> Outcome {
    let (h, e) = ([1.0, 0.5, 0.2], ES);
    let eps = [
        EpsChoice::Value(0.0),
        EpsChoice::Fraction(0.1),
        EpsChoice::Fraction(0.5),
    ];
    let damped = [EpsChoice::Fraction(0.1), EpsChoice::Fraction(0.5)];
    let (mut worst, mut bad, mut rows) = (0.0, Vec::new(), 0);
    let mut spread = 0.0f64;
    for weight in ["thm1", "thm2:1,1"] {
        let p = PotentialSpec::new("square_barrier", &[1.0, 1.0]);
        let kernel = sweep_ok(&sweep(p.clone(), weight, "kernel", &h, &e, &eps), &mut worst, &mut bad);
        let matrix = sweep_ok(&sweep(p, weight, "matrix", &h, &e, &damped), &mut worst, &mut bad);
        rows += kernel.len() + matrix.len();
        // kernel rows run (h, E, eps) with eps fastest; the matrix rows skip eps = 0
        let damped_kernel: Vec<f64> = kernel.chunks(3).flat_map(|c| c[1..].to_vec()).collect();
        for (k, m) in damped_kernel.iter().zip(&matrix) {
            spread = spread.max((k - m).abs() / k);
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{rows} rows, max norm / bound {worst:.4}, max backend spread {spread:.2e}{}",
            failures(&bad)
        ),
    )
}

fn failures(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", bad.join("; "))
    }
}

fn c5_envelope_sweep() -> Outcome {
    let mut p = PotentialSpec::new("square_barrier", &[1.0, 1.0]);
    p.envelope = Some(EnvelopeSpec::Abs);
    let eps = [EpsChoice::Value(0.0), EpsChoice::Fraction(0.1)];
    let (mut worst, mut bad) = (0.0, Vec::new());
    let norms = sweep_ok(&sweep(p, "envelope", "kernel", &HS, &ES, &eps), &mut worst, &mut bad);
    let largest = norms.iter().cloned().fold(0.0, f64::max);
    outcome(
        bad.is_empty(),
        format!(
            "{} rows down to h = 0.1, largest norm {largest:.3e}, max norm / bound {worst:.3e}{}",
            norms.len(),
            failures(&bad)
        ),
    )
}

fn c6_exterior_sweep() -> Outcome {
    let (mut worst, mut worst_secondary, mut bad, mut rows) = (0.0f64, 0.0f64, Vec::new(), 0);
    for (name, params) in [
        ("square_barrier", vec![1.0, 1.0]),
        ("inverse_sqrt_singular", vec![1.0, 1.0]),
    ] {
        for delta in [0.5, 1.0, 2.0] {
            let spec = sweep(
                PotentialSpec::new(name, &params),
                &format!("exterior:1,{delta}"),
                "kernel",
                &[1.0, 0.5, 0.2],
                &ES,
                &[EpsChoice::Value(0.0)],
            );
            let report = run_sweep(&spec).unwrap();
            for r in &report.rows {
                rows += 1;
                worst = worst.max(r.ratio);
                worst_secondary = worst_secondary.max(r.computed_norm / r.secondary_bound.unwrap_or(f64::NAN));
                if r.status != RowStatus::Pass {
                    bad.push(format!("{name} delta={delta} h={} E={}: {:?}", r.h, r.energy, r.status));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{rows} rows, max norm / exterior constant {worst:.4}, max norm / kernel-route constant {worst_secondary:.4}{}",
            failures(&bad)
        ),
    )
}

fn c7_cross_validation() -> Outcome {
    let mut worst = 0.0f64;
    let mut rows = 0;
    let a_of = |v: &Potential| NormWeight::from_envelope(&Envelope::abs_of(v));
    for (name, params) in [
        ("square_barrier", vec![1.0, 1.0]),
        ("gaussian_truncated", vec![1.0, 0.5, 2.0]),
    ] {
        let v = pot(name, &params);
        let a = a_of(&v);
        for h in [1.0, 0.5] {
            for e in [1.0, 2.0] {
                for frac in [0.01, 0.1, 0.5] {
                    let opts = NormOptions::default();
                    let k = compute_norm(Backend::KernelNystrom, &v, h, e, frac * e, &a, &opts).unwrap();
                    let m = compute_norm(Backend::FdMatrix, &v, h, e, frac * e, &a, &opts).unwrap();
                    worst = worst.max((k.value - m.value).abs() / k.value);
                    rows += 1;
                }
            }
        }
    }
    outcome(
        worst <= 0.02,
        format!("{rows} comparisons, worst relative gap {worst:.2e} (tol 2e-2)"),
    )
}

fn c8_energy_audit() -> Outcome {
    let (h, e, eps) = (0.5, 2.0, 0.2);
    let envelope = Envelope::new(pot("square_barrier", &[1.0, 1.0]), &pot("free", &[])).unwrap();
    let (mut flux, mut diss, mut margin, mut ratio, mut count) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64, 0);
    for v in [pot("free", &[]), pot("square_barrier", &[1.0, 1.0])] {
        let m = if v.is_zero() {
            envelope.clone()
        } else {
            Envelope::abs_of(&v)
        };
        let weights = [
            build_thm1_weight(&m, h, e).unwrap(),
            build_thm2_weight(1.0, 1.0).unwrap(),
        ];
        for w in &weights {
            for t in ["bump:0.3,0.5", "plateau:-1,1,0.5", "packet:0,0.7,3"] {
                let test = TestFunction::parse(t).unwrap();
                let trace = audit_energy(&v, w, &test, h, e, eps).unwrap();
                let ap = audit_apriori_bound(&trace, test.norm_sq());
                flux = flux.max(trace.relative_flux());
                diss = diss.max(trace.dissipation_defect());
                margin = margin.min(trace.worst_margin);
                ratio = ratio.max(ap.ratio);
                count += 1;
            }
        }
    }
    outcome(
        flux <= 1e-6 && diss <= 1e-6 && ratio <= 1.0 && margin >= 0.0,
        format!("{count} audits, flux {flux:.2e}, dissipation {diss:.2e}, min margin {margin:.2e}, max a priori ratio {ratio:.4}"),
    )
}

fn c9_rescaling() -> Outcome {
    let (mut worst, mut pass) = (0.0f64, true);
    for (name, params) in compact_specs() {
        let v = pot(name, &params);
        let a = NormWeight::from_envelope(&Envelope::abs_of(&v));
        let rep =
            check_rescaling_invariance(&v, 0.5, 2.0, 0.2, &a, Backend::KernelNystrom, &NormOptions::default()).unwrap();
        worst = worst.max(rep.dilation_difference).max(rep.energy_difference);
        pass &= rep.dilation_pass && rep.energy_pass;
    }
    outcome(
        pass,
        format!("3 potentials, worst relative difference {worst:.2e} (tol 1e-4)"),
    )
}

fn c10_free_oracle() -> Outcome {
    let v = pot("free", &[]);
    let radius = 400.0;
    let a = NormWeight::indicator(-radius, radius);
    let mut opts = NormOptions::default();
    opts.truncation = Some(radius);
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for (e, eps) in [(1.0, 0.1), (2.0, 0.2)] {
        let est = compute_norm(Backend::FdMatrix, &v, 1.0, e, eps, &a, &opts).unwrap();
        worst = worst.max((est.value * eps - 1.0).abs());
        values.push(format!("{:.4} vs {}", est.value, 1.0 / eps));
    }
    outcome(
        worst <= 0.01,
        format!("{}, worst relative error {worst:.2e} (tol 1e-2)", values.join(", ")),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("unitarity suite", Duration::from_secs(10), c1_unitarity),
        ("free-kernel oracle", Duration::from_secs(1), c2_free_kernel),
        ("exterior kernel bound", Duration::from_secs(10), c3_kernel_bound),
        ("weighted sweep", Duration::from_secs(300), c4_weighted_sweep),
        ("envelope sweep", Duration::from_secs(300), c5_envelope_sweep),
        ("exterior sweep", Duration::from_secs(120), c6_exterior_sweep),
        (
            "backend cross-validation",
            Duration::from_secs(180),
            c7_cross_validation,
        ),
        ("energy audit", Duration::from_secs(120), c8_energy_audit),
        ("rescaling invariance", Duration::from_secs(120), c9_rescaling),
        ("free-operator norm oracle", Duration::from_secs(30), c10_free_oracle),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *limit, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {}  [{:.2} s / limit {} s] {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            detail
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
