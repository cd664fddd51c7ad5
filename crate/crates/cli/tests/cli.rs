use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resolvent1d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn jost_prints_unitarity() {
    let out = run(&["jost", "--potential", "square_barrier:1,1", "--h", "0.5", "--E", "2"]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["unitarity"]["ab"].as_f64().unwrap() < 1e-8);
}

#[test]
fn kernel_dump_and_exterior_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "kernel",
        "--potential",
        "gaussian_truncated:1,0.5,2",
        "--h",
        "0.5",
        "--E",
        "1",
        "--points",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with("x,y,re_k,im_k"));
}

#[test]
fn weights_flag_broken_weight() {
    let good = run(&[
        "weights",
        "--potential",
        "square_barrier:1,1",
        "--h",
        "0.5",
        "--E",
        "2",
        "--weight",
        "thm1",
    ]);
    assert_eq!(code(&good), 0);
    let bad = run(&[
        "weights",
        "--potential",
        "square_barrier:1,1",
        "--h",
        "0.5",
        "--E",
        "2",
        "--weight",
        "custom:const:1",
    ]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn sweep_writes_deterministic_reports_and_repro_matches() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &str| {
        vec![
            "sweep".to_string(),
            "--potential".into(),
            "square_barrier:1,1".into(),
            "--weight".into(),
            "thm2:1,1".into(),
            "--h".into(),
            "1,0.5".into(),
            "--E".into(),
            "1,2".into(),
            "--eps".into(),
            "0;frac:0.1".into(),
            "--out".into(),
            dir.to_string(),
        ]
    };
    for dir in [&a, &b] {
        let args = args(dir.path().to_str().unwrap());
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(a.path().join("report.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("report.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 9);

    let report = a.path().join("report.json");
    let out = run(&["repro", "--report", report.to_str().unwrap(), "--row", "5"]);
    assert_eq!(code(&out), 0);
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(row["computed_norm"], json["rows"][5]["computed_norm"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "weight = \"envelope\"\nh = [1.0]\nE = [1.0, 4.0]\neps = [\"frac:0.1\"]\n[potential]\nname = \"free\"\n[potential.envelope]\nkind = \"catalog\"\nname = \"square_barrier\"\nparams = [1.0, 1.0]\n",
    )
    .unwrap();
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--h", "1,0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5);
}

#[test]
fn exit_codes_for_refusal_and_bad_input() {
    let refused = run(&[
        "sweep",
        "--potential",
        "square_barrier:1,1",
        "--weight",
        "custom:const:1",
        "--h",
        "1",
        "--E",
        "1",
        "--eps",
        "frac:0.1",
    ]);
    assert_eq!(code(&refused), 2);
    let regime = run(&["sweep", "--potential", "free", "--h", "1", "--E", "1", "--eps", "0.6"]);
    assert_eq!(code(&regime), 2);
    let zero_eps_matrix = run(&[
        "norm",
        "--potential",
        "free",
        "--h",
        "1",
        "--E",
        "1",
        "--eps",
        "0",
        "--backend",
        "matrix",
    ]);
    assert_eq!(code(&zero_eps_matrix), 2);
    let unknown = run(&["jost", "--potential", "nope", "--h", "1", "--E", "1"]);
    assert_eq!(code(&unknown), 2);
    let malformed = tempfile::NamedTempFile::new().unwrap();
    fs::write(malformed.path(), "potentials = 3\n").unwrap();
    let audit = run(&["audit", "--config", malformed.path().to_str().unwrap()]);
    assert_eq!(code(&audit), 2);
}

#[test]
fn norm_matrix_backend() {
    let out = run(&[
        "norm",
        "--potential",
        "square_barrier:1,1",
        "--h",
        "1",
        "--E",
        "1",
        "--eps",
        "frac:0.5",
        "--weight",
        "thm2:1,1",
        "--backend",
        "matrix",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(row["ratio"].as_f64().unwrap() < 1.0);
}

#[test]
fn audit_batch_on_free_potential() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "audit",
        "--potential",
        "free",
        "--envelope",
        "square_barrier:1,1",
        "--weight",
        "thm1;thm2:1,1",
        "--test",
        "bump:0,0.5;packet:0.5,0.7,3;plateau:-1,1,0.5",
        "--h",
        "0.5",
        "--E",
        "2",
        "--eps",
        "frac:0.1",
        "--traces",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join("trace_5.csv").exists());
}
