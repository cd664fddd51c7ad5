//! Command-line front end: single evaluations, sweeps against the explicit
//! bounds, batched energy audits and single-row reproduction.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use resolvent1d::audit::{audit_energy, TestFunction};
use resolvent1d::csv;
use resolvent1d::jost::solve_pair;
use resolvent1d::kernel::{exterior_grid, KernelEval};
use resolvent1d::potential::{EnvelopeSpec, PotentialSpec};
use resolvent1d::sweep::{
    exit, repro, run_audit, run_sweep, AuditSpec, EpsChoice, SweepReport, SweepSpec, WeightChoice,
};
use resolvent1d::weights::verify_w2_condition;
use resolvent1d::Error;

#[derive(Parser)]
#[command(
    name = "resolvent1d",
    version,
    about = "Weighted resolvent norms for 1D semiclassical Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jost solutions and scattering coefficients at one point.
    Jost(PointArgs),
    /// Resolvent kernel dump and, at eps = 0, the exterior bound check.
    Kernel(KernelArgs),
    /// Build a weight, validate it and check the weight condition.
    Weights(WeightArgs),
    /// One weighted norm compared with its bound.
    Norm(NormArgs),
    /// Batched energy audits.
    Audit(AuditArgs),
    /// Sweep a grid of (h, E, eps) against the bounds.
    Sweep(SweepArgs),
    /// Rerun one row of an existing report.
    Repro(ReproArgs),
}

#[derive(Args, Clone)]
struct PointArgs {
    /// catalog potential `name:p1,p2,...`
    #[arg(long)]
    potential: String,
    #[arg(long)]
    h: f64,
    #[arg(long = "E")]
    energy: f64,
    /// value or `frac:r` (eps = r E, r <= 1/2)
    #[arg(long, default_value = "0")]
    eps: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PointArgs {
    fn eps(&self) -> Result<f64, Error> {
        Ok(EpsChoice::parse(&self.eps)?.resolve(self.energy))
    }
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    point: PointArgs,
    /// dump grid: points per axis
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// dump grid: half-width of the square
    #[arg(long, default_value_t = 4.0)]
    span: f64,
}

#[derive(Args)]
struct WeightArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value = "thm1")]
    weight: String,
    /// envelope `m`: `abs`, `power:A,delta` or a catalog potential
    #[arg(long)]
    envelope: Option<String>,
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value = "envelope")]
    weight: String,
    #[arg(long)]
    envelope: Option<String>,
    #[arg(long, default_value = "kernel", value_parser = ["kernel", "matrix"])]
    backend: String,
    #[arg(long, default_value_t = resolvent1d::sweep::DEFAULT_SLACK)]
    slack: f64,
    #[arg(long = "grid-ppw", default_value_t = resolvent1d::sweep::DEFAULT_PPW)]
    grid_ppw: f64,
}

#[derive(Args)]
struct AuditArgs {
    /// TOML file mirroring the audit spec
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ';')]
    potential: Option<Vec<String>>,
    #[arg(long)]
    envelope: Option<String>,
    #[arg(long, value_delimiter = ';')]
    weight: Option<Vec<String>>,
    /// test functions, `;`-separated
    #[arg(long, value_delimiter = ';')]
    test: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long = "E", value_delimiter = ',')]
    energy: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ';')]
    eps: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// also write the pointwise trace of every row
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file mirroring the sweep spec; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    envelope: Option<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, value_parser = ["kernel", "matrix"])]
    backend: Option<String>,
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long = "E", value_delimiter = ',')]
    energy: Option<Vec<f64>>,
    /// `;`-separated values or `frac:r`
    #[arg(long, value_delimiter = ';')]
    eps: Option<Vec<String>>,
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long = "grid-ppw")]
    grid_ppw: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproArgs {
    /// a report.json written by `sweep`
    #[arg(long)]
    report: PathBuf,
    /// row index in grid order
    #[arg(long)]
    row: usize,
}

/// Failure with its exit code.
struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownPotential(_)
            | Error::InvalidParameters { .. }
            | Error::InvalidArgument(_)
            | Error::MissingSupport(_)
            | Error::OutOfRegime { .. }
            | Error::PointInsideSupport(..)
            | Error::NotApplicable(_)
            | Error::Config(_) => exit::USAGE,
            _ => exit::NONCONVERGENCE,
        };
        Failure(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(exit::USAGE, e.to_string())
    }
}

type CliResult = Result<i32, Failure>;

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn potential_spec(text: &str, envelope: Option<&str>) -> Result<PotentialSpec, Error> {
    let mut spec = PotentialSpec::parse(text)?;
    if let Some(e) = envelope {
        spec.envelope = Some(EnvelopeSpec::parse(e)?);
    }
    Ok(spec)
}

fn create(dir: &Path, name: &str) -> io::Result<io::BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(io::BufWriter::new(fs::File::create(dir.join(name))?))
}

fn cmd_jost(args: PointArgs) -> CliResult {
    let v = PotentialSpec::parse(&args.potential)?.build()?;
    let pair = solve_pair(&v, args.h, args.energy, args.eps()?)?;
    #[derive(Serialize)]
    struct Out<'a> {
        scattering: &'a resolvent1d::jost::ScatteringData,
        unitarity: resolvent1d::jost::UnitarityDefects,
        wronskian_relations: (f64, f64),
    }
    print_json(&Out {
        scattering: &pair.scattering,
        unitarity: pair.scattering.unitarity(),
        wronskian_relations: pair.scattering.wronskian_relations(),
    });
    if let Some(dir) = &args.out {
        let mut out = create(dir, "jost.csv")?;
        csv::write_header(&mut out, &["x", "re_u_plus", "im_u_plus", "re_u_minus", "im_u_minus"])?;
        for x in pair.plus.nodes() {
            let (p, m) = (pair.plus.eval(x).0, pair.minus.eval(x).0);
            csv::write_row(&mut out, &[x, p.re, p.im, m.re, m.im])?;
        }
        out.flush()?;
    }
    Ok(exit::PASS)
}

fn cmd_kernel(args: KernelArgs) -> CliResult {
    let p = &args.point;
    let v = PotentialSpec::parse(&p.potential)?.build()?;
    let eps = p.eps()?;
    let k = KernelEval::new(&v, p.h, p.energy, eps)?;
    let mut code = exit::PASS;
    match v.support_radius() {
        Some(r) if eps == 0.0 => {
            let report = k.exterior_bound_check(&exterior_grid(r, 1e-3, r + args.span, args.points))?;
            if !report.pass {
                code = exit::VIOLATION;
            }
            print_json(&report);
        }
        _ => eprintln!("exterior bound check skipped (needs eps = 0 and compact support)"),
    }
    if let Some(dir) = &p.out {
        let n = args.points.max(2);
        let xs: Vec<f64> = (0..n)
            .map(|i| -args.span + 2.0 * args.span * i as f64 / (n - 1) as f64)
            .collect();
        let mut out = create(dir, "kernel.csv")?;
        k.dump_csv(&mut out, &xs, &xs)?;
        out.flush()?;
    }
    Ok(code)
}

fn cmd_weights(args: WeightArgs) -> CliResult {
    let p = &args.point;
    let spec = potential_spec(&p.potential, args.envelope.as_deref())?;
    let v = spec.build()?;
    let m = spec.build_envelope(&v)?;
    let w = WeightChoice::parse(&args.weight)?
        .weight_function(&m, p.h, p.energy)?
        .ok_or_else(|| {
            Failure(
                exit::USAGE,
                format!("`{}` is not defined through a weight function", args.weight),
            )
        })?;
    #[derive(Serialize)]
    struct Out {
        label: String,
        validation: resolvent1d::weights::WeightValidation,
        condition: resolvent1d::weights::W2Report,
    }
    let out = Out {
        label: w.label(),
        validation: w.validate(2000),
        condition: verify_w2_condition(&w, &v, p.h, p.energy),
    };
    let code = if out.validation.pass && out.condition.pass {
        exit::PASS
    } else {
        exit::VIOLATION
    };
    print_json(&out);
    if let Some(dir) = &p.out {
        let mut f = create(dir, "weight.csv")?;
        w.dump_csv(&mut f, &w.check_grid(2000))?;
        f.flush()?;
    }
    Ok(code)
}

fn write_report(report: &SweepReport, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(dir) => report.write(dir),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            report.write_csv(&mut lock)
        }
    }
}

fn cmd_norm(args: NormArgs) -> CliResult {
    let p = &args.point;
    let spec = SweepSpec {
        potential: potential_spec(&p.potential, args.envelope.as_deref())?,
        weight: args.weight.clone(),
        backend: args.backend.clone(),
        h: vec![p.h],
        energy: vec![p.energy],
        eps: vec![EpsChoice::parse(&p.eps)?],
        slack: args.slack,
        grid_ppw: args.grid_ppw,
        out: p.out.clone(),
    };
    let report = run_sweep(&spec)?;
    print_json(&report.rows[0]);
    if let Some(dir) = &p.out {
        report.write(dir)?;
    }
    Ok(report.summary.exit_code)
}

fn parse_eps(list: &[String]) -> Result<Vec<EpsChoice>, Error> {
    list.iter().map(|e| EpsChoice::parse(e)).collect()
}

fn missing(what: &str) -> Failure {
    Failure(
        exit::USAGE,
        format!("missing `{what}` (give it as a flag or in --config)"),
    )
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let base = args.config.as_deref().map(SweepSpec::from_file).transpose()?;
    let potential = match (&args.potential, &base) {
        (Some(p), _) => potential_spec(p, args.envelope.as_deref())?,
        (None, Some(b)) => {
            let mut p = b.potential.clone();
            if let Some(e) = &args.envelope {
                p.envelope = Some(EnvelopeSpec::parse(e)?);
            }
            p
        }
        (None, None) => return Err(missing("potential")),
    };
    let spec = SweepSpec {
        potential,
        weight: args
            .weight
            .or(base.as_ref().map(|b| b.weight.clone()))
            .unwrap_or_else(|| "envelope".into()),
        backend: args
            .backend
            .or(base.as_ref().map(|b| b.backend.clone()))
            .unwrap_or_else(|| "kernel".into()),
        h: args
            .h
            .or(base.as_ref().map(|b| b.h.clone()))
            .ok_or_else(|| missing("h"))?,
        energy: args
            .energy
            .or(base.as_ref().map(|b| b.energy.clone()))
            .ok_or_else(|| missing("E"))?,
        eps: match args.eps {
            Some(e) => parse_eps(&e)?,
            None => base.as_ref().map(|b| b.eps.clone()).ok_or_else(|| missing("eps"))?,
        },
        slack: args
            .slack
            .or(base.as_ref().map(|b| b.slack))
            .unwrap_or(resolvent1d::sweep::DEFAULT_SLACK),
        grid_ppw: args
            .grid_ppw
            .or(base.as_ref().map(|b| b.grid_ppw))
            .unwrap_or(resolvent1d::sweep::DEFAULT_PPW),
        out: args.out.or(base.as_ref().and_then(|b| b.out.clone())),
    };
    let report = run_sweep(&spec)?;
    write_report(&report, spec.out.as_deref())?;
    let s = &report.summary;
    eprintln!(
        "{} rows: max ratio {:.4e}, {} violations, {} refused, {} unconverged, {} errors",
        s.rows, s.max_ratio, s.failures, s.refused, s.unconverged, s.errors
    );
    for r in report.rows.iter().filter(|r| r.message.is_some()) {
        eprintln!("row {}: {}", r.index, r.message.as_deref().unwrap_or(""));
    }
    Ok(s.exit_code)
}

fn cmd_audit(args: AuditArgs) -> CliResult {
    let base = args.config.as_deref().map(AuditSpec::from_file).transpose()?;
    let potentials = match (&args.potential, &base) {
        (Some(list), _) => list
            .iter()
            .map(|p| potential_spec(p, args.envelope.as_deref()))
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(b)) => b.potentials.clone(),
        (None, None) => return Err(missing("potential")),
    };
    let spec = AuditSpec {
        potentials,
        weights: args
            .weight
            .or(base.as_ref().map(|b| b.weights.clone()))
            .ok_or_else(|| missing("weight"))?,
        tests: args
            .test
            .or(base.as_ref().map(|b| b.tests.clone()))
            .ok_or_else(|| missing("test"))?,
        h: args
            .h
            .or(base.as_ref().map(|b| b.h.clone()))
            .ok_or_else(|| missing("h"))?,
        energy: args
            .energy
            .or(base.as_ref().map(|b| b.energy.clone()))
            .ok_or_else(|| missing("E"))?,
        eps: match args.eps {
            Some(e) => parse_eps(&e)?,
            None => base.as_ref().map(|b| b.eps.clone()).ok_or_else(|| missing("eps"))?,
        },
        out: args.out.or(base.as_ref().and_then(|b| b.out.clone())),
    };
    let report = run_audit(&spec)?;
    match &spec.out {
        Some(dir) => {
            report.write(dir)?;
            if args.traces {
                write_traces(&spec, dir)?;
            }
        }
        None => report.write_csv(&mut io::stdout().lock())?,
    }
    Ok(report.exit_code)
}

/// One `trace_<row>.csv` per audit row that can be solved.
fn write_traces(spec: &AuditSpec, dir: &Path) -> CliResult {
    let mut index = 0;
    for p in &spec.potentials {
        let v = p.build()?;
        let m = p.build_envelope(&v)?;
        for w in &spec.weights {
            for t in &spec.tests {
                let test = TestFunction::parse(t)?;
                for &h in &spec.h {
                    for &e in &spec.energy {
                        for eps in &spec.eps {
                            let weight = WeightChoice::parse(w)?.weight_function(&m, h, e)?;
                            if let Some(weight) = weight {
                                if let Ok(trace) = audit_energy(&v, &weight, &test, h, e, eps.resolve(e)) {
                                    let mut f = create(dir, &format!("trace_{index}.csv"))?;
                                    trace.dump_csv(&mut f)?;
                                    f.flush()?;
                                }
                            }
                            index += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(exit::PASS)
}

fn cmd_repro(args: ReproArgs) -> CliResult {
    let text = fs::read_to_string(&args.report)?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure(exit::USAGE, format!("{}: {e}", args.report.display())))?;
    let spec: SweepSpec = serde_json::from_value(json["provenance"]["spec"].clone())
        .map_err(|e| Failure(exit::USAGE, format!("report has no usable spec: {e}")))?;
    let recorded = json["provenance"]["spec_hash"].as_str().unwrap_or("");
    if recorded != spec.hash() {
        eprintln!("warning: spec hash differs from the recorded one");
    }
    let row = repro(&spec, args.row)?;
    let before = json["rows"][args.row]["computed_norm"].as_f64();
    print_json(&row);
    if let Some(before) = before {
        eprintln!(
            "recorded {}, recomputed {}",
            csv::fmt_e(before),
            csv::fmt_e(row.computed_norm)
        );
    }
    Ok(match row.status {
        resolvent1d::sweep::RowStatus::Pass => exit::PASS,
        resolvent1d::sweep::RowStatus::Fail => exit::VIOLATION,
        resolvent1d::sweep::RowStatus::Refused => exit::USAGE,
        _ => exit::NONCONVERGENCE,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Jost(a) => cmd_jost(a),
        Command::Kernel(a) => cmd_kernel(a),
        Command::Weights(a) => cmd_weights(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Repro(a) => cmd_repro(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
