//! Parameter sweeps that compare computed weighted resolvent norms with the
//! explicit bounds, and batched energy audits.
//!
//! Rows run in parallel and are reassembled in grid order, and every Krylov
//! start vector is seeded from a hash of the spec and the row, so identical
//! specs give byte-identical reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{audit_apriori_bound, audit_energy, TestFunction};
use crate::csv::fmt_e;
use crate::error::{Error, Result};
use crate::norm::{compute_norm, seed_from, Backend, NormEstimate, NormOptions, NormWeight};
use crate::potential::{Envelope, Potential, PotentialSpec};
use crate::weights::{build_custom_weight, build_thm1_weight, build_thm2_weight, verify_w2_condition, WeightFunction};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SLACK: f64 = 1.05;
pub const DEFAULT_PPW: f64 = 20.0;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VIOLATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NONCONVERGENCE: i32 = 3;
}

/// Audit tolerances.
pub const FLUX_TOLERANCE: f64 = 1e-6;
pub const DISSIPATION_TOLERANCE: f64 = 1e-6;
pub const MARGIN_TOLERANCE: f64 = 1e-8;

/// Which bound a weight is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `‖m^{1/2} R m^{1/2}‖ <= exp(2E^{-1/2}∫m/h)`
    Envelope,
    /// `‖(w')^{1/2} R (w')^{1/2}‖ <= 8E^{-1/2}/h`
    Weighted,
    /// exterior weight: `8(1+R)^{-δ}δ^{-1}E^{-1/2}/h`, and at `ε = 0` also
    /// `2/(hδ(1+R)^δ E^{1/2})`
    Exterior,
}

/// A weight selection:
/// `envelope` (`a = m^{1/2}`), `thm1` (sinh weight from `m`), `thm2:R,δ`
/// (odd exterior weight), `exterior:R,δ` (`a = 1_{|x|>R}(1+|x|)^{-(1+δ)/2}`)
/// or `custom:<const|tanh|arctan>[:p]`, the last three with
/// `a = (w')^{1/2}` except `exterior`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightChoice {
    Envelope,
    Thm1,
    Thm2 { radius: f64, delta: f64 },
    Exterior { radius: f64, delta: f64 },
    Custom { spec: String },
}

fn two_params(name: &str, args: &str) -> Result<(f64, f64)> {
    let nums: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("weight `{name}` needs R,delta, got `{args}`")))?;
    match nums.as_slice() {
        [r, d] if *r >= 0.0 && *d > 0.0 => Ok((*r, *d)),
        _ => Err(Error::Config(format!(
            "weight `{name}` needs R >= 0 and delta > 0, got `{args}`"
        ))),
    }
}

impl WeightChoice {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        match name {
            "envelope" | "m" => Ok(WeightChoice::Envelope),
            "thm1" => Ok(WeightChoice::Thm1),
            "thm2" => {
                let (radius, delta) = if args.is_empty() {
                    (1.0, 1.0)
                } else {
                    two_params(name, args)?
                };
                Ok(WeightChoice::Thm2 { radius, delta })
            }
            "exterior" => {
                let (radius, delta) = if args.is_empty() {
                    (1.0, 1.0)
                } else {
                    two_params(name, args)?
                };
                Ok(WeightChoice::Exterior { radius, delta })
            }
            "custom" if !args.is_empty() => Ok(WeightChoice::Custom { spec: args.to_string() }),
            _ => Err(Error::Config(format!("unknown weight `{text}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightChoice::Envelope => "envelope".into(),
            WeightChoice::Thm1 => "thm1".into(),
            WeightChoice::Thm2 { radius, delta } => format!("thm2:{radius},{delta}"),
            WeightChoice::Exterior { radius, delta } => format!("exterior:{radius},{delta}"),
            WeightChoice::Custom { spec } => format!("custom:{spec}"),
        }
    }

    pub fn bound_kind(&self) -> BoundKind {
        match self {
            WeightChoice::Envelope => BoundKind::Envelope,
            WeightChoice::Exterior { .. } => BoundKind::Exterior,
            _ => BoundKind::Weighted,
        }
    }

    /// The weight function `w`, for choices defined through one.
    pub fn weight_function(&self, m: &Envelope, h: f64, energy: f64) -> Result<Option<WeightFunction>> {
        match self {
            WeightChoice::Envelope | WeightChoice::Exterior { .. } => Ok(None),
            WeightChoice::Thm1 => build_thm1_weight(m, h, energy).map(Some),
            WeightChoice::Thm2 { radius, delta } => build_thm2_weight(*radius, *delta).map(Some),
            WeightChoice::Custom { spec } => build_custom_weight(spec).map(Some),
        }
    }

    /// The multiplication weight `a` and, when defined through `w`, the
    /// weight function itself.
    pub fn build(&self, m: &Envelope, h: f64, energy: f64) -> Result<(NormWeight, Option<WeightFunction>)> {
        match self {
            WeightChoice::Envelope => Ok((NormWeight::from_envelope(m), None)),
            WeightChoice::Exterior { radius, delta } => Ok((NormWeight::exterior(*radius, *delta), None)),
            _ => {
                let w = self.weight_function(m, h, energy)?.expect("weight defined through w");
                Ok((NormWeight::from_weight(&w), Some(w)))
            }
        }
    }
}

/// `ε` either absolute or as a fraction `r` of `E` (`frac:r`, `r <= 1/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsChoice {
    Value(f64),
    Fraction(f64),
}

impl EpsChoice {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Config(format!("bad eps `{text}` (expected a number or frac:r)"));
        if let Some(r) = text.strip_prefix("frac:") {
            let r: f64 = r.trim().parse().map_err(|_| bad())?;
            if !(0.0..=0.5).contains(&r) {
                return Err(Error::Config(format!("eps fraction {r} outside [0, 1/2]")));
            }
            Ok(EpsChoice::Fraction(r))
        } else {
            let v: f64 = text.parse().map_err(|_| bad())?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("eps must be nonnegative, got {v}")));
            }
            Ok(EpsChoice::Value(v))
        }
    }

    pub fn resolve(&self, energy: f64) -> f64 {
        match *self {
            EpsChoice::Value(v) => v,
            EpsChoice::Fraction(r) => r * energy,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EpsChoice::Value(v) => format!("{v}"),
            EpsChoice::Fraction(r) => format!("frac:{r}"),
        }
    }
}

impl Serialize for EpsChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpsChoice::Value(v) => s.serialize_f64(*v),
            EpsChoice::Fraction(_) => s.serialize_str(&self.label()),
        }
    }
}

impl<'de> Deserialize<'de> for EpsChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => EpsChoice::parse(&v.to_string()),
            Raw::Text(t) => EpsChoice::parse(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

fn default_ppw() -> f64 {
    DEFAULT_PPW
}

fn default_backend() -> String {
    "kernel".into()
}

fn default_weight() -> String {
    "envelope".into()
}

/// A sweep over `(h, E, ε)` for one potential and weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub potential: PotentialSpec,
    #[serde(default = "default_weight")]
    pub weight: String,
    #[serde(default = "default_backend")]
    pub backend: String,
    pub h: Vec<f64>,
    #[serde(alias = "E")]
    pub energy: Vec<f64>,
    pub eps: Vec<EpsChoice>,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_ppw")]
    pub grid_ppw: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Hex digest of the canonical JSON form, excluding the output location.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&SweepSpec {
            out: None,
            ..self.clone()
        })
        .expect("spec serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn backend(&self) -> Result<Backend> {
        self.backend.parse()
    }

    /// `(h, E, ε)` in grid order.
    pub fn grid(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &h in &self.h {
            for &e in &self.energy {
                for eps in &self.eps {
                    out.push((h, e, eps.resolve(e)));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let backend = self.backend()?;
        WeightChoice::parse(&self.weight)?;
        self.potential.build()?;
        if self.h.is_empty() || self.energy.is_empty() || self.eps.is_empty() {
            return Err(Error::Config("h, energy and eps grids must be nonempty".into()));
        }
        if let Some(h) = self.h.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::Config(format!("h must be positive, got {h}")));
        }
        if let Some(e) = self.energy.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("E must be positive, got {e}")));
        }
        if !(self.slack >= 1.0) {
            return Err(Error::Config(format!("slack must be at least 1, got {}", self.slack)));
        }
        if !(self.grid_ppw >= 4.0) {
            return Err(Error::Config(format!(
                "grid_ppw must be at least 4, got {}",
                self.grid_ppw
            )));
        }
        for (_, e, eps) in self.grid() {
            if e < 2.0 * eps {
                return Err(Error::Config(format!("E = {e}, eps = {eps} violates E >= 2 eps")));
            }
            if eps == 0.0 && backend == Backend::FdMatrix {
                return Err(Error::Config("eps = 0 requires the kernel backend".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    /// computed norm above slack × bound
    Fail,
    /// the weight's hypotheses do not hold, so no bound is attributed
    Refused,
    /// the estimate did not converge under refinement
    Unconverged,
    /// the backend returned an error
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    pub computed_norm: f64,
    pub bound: f64,
    pub ratio: f64,
    /// the `ε = 0` kernel-route constant, for exterior weights
    pub secondary_bound: Option<f64>,
    pub pass: bool,
    pub status: RowStatus,
    pub seed: u64,
    pub estimate: Option<NormEstimate>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub max_ratio: f64,
    pub failures: usize,
    pub refused: usize,
    pub unconverged: usize,
    pub errors: usize,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub catalog_name: String,
    pub potential: String,
    pub backend: Backend,
    pub weight: String,
    pub bound: BoundKind,
    pub spec_hash: String,
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
    pub provenance: Provenance,
}

/// `exp(2E^{-1/2}∫m/h)`.
pub fn envelope_bound(m_total: f64, h: f64, energy: f64) -> f64 {
    (2.0 * m_total / (energy.sqrt() * h)).exp()
}

/// `8E^{-1/2}/h`.
pub fn weighted_bound(h: f64, energy: f64) -> f64 {
    8.0 / (energy.sqrt() * h)
}

/// `8(1+R)^{-δ}δ^{-1}E^{-1/2}/h`.
pub fn exterior_bound(radius: f64, delta: f64, h: f64, energy: f64) -> f64 {
    8.0 * (1.0 + radius).powf(-delta) / (delta * energy.sqrt() * h)
}

/// `2/(hδ(1+R)^δ E^{1/2})`, the `ε = 0` constant from the kernel bound.
pub fn exterior_kernel_bound(radius: f64, delta: f64, h: f64, energy: f64) -> f64 {
    2.0 / (h * delta * (1.0 + radius).powf(delta) * energy.sqrt())
}

struct Prepared {
    v: Potential,
    m: Envelope,
    choice: WeightChoice,
    backend: Backend,
    hash: String,
}

fn prepare(spec: &SweepSpec) -> Result<Prepared> {
    spec.validate()?;
    let v = spec.potential.build()?;
    let m = spec.potential.build_envelope(&v)?;
    Ok(Prepared {
        choice: WeightChoice::parse(&spec.weight)?,
        backend: spec.backend()?,
        hash: spec.hash(),
        v,
        m,
    })
}

fn run_row(p: &Prepared, spec: &SweepSpec, index: usize, (h, e, eps): (f64, f64, f64)) -> SweepRow {
    let seed = seed_from(&format!("{}:{index}:{h}:{e}:{eps}", p.hash));
    let mut row = SweepRow {
        index,
        h,
        energy: e,
        eps,
        computed_norm: f64::NAN,
        bound: f64::NAN,
        ratio: f64::NAN,
        secondary_bound: None,
        pass: false,
        status: RowStatus::Error,
        seed,
        estimate: None,
        message: None,
    };
    let refuse = |mut row: SweepRow, why: String| {
        row.status = RowStatus::Refused;
        row.message = Some(why);
        row
    };
    let (a, w) = match p.choice.build(&p.m, h, e) {
        Ok(x) => x,
        Err(err) => return refuse(row, err.to_string()),
    };
    let (bound, secondary) = match p.choice {
        WeightChoice::Envelope => (envelope_bound(p.m.total(), h, e), None),
        WeightChoice::Exterior { radius, delta } => {
            match p.v.support_radius() {
                Some(r) if r <= radius => {}
                _ => return refuse(row, format!("V is not supported in [-{radius}, {radius}]")),
            }
            let sec = (eps == 0.0).then(|| exterior_kernel_bound(radius, delta, h, e));
            (exterior_bound(radius, delta, h, e), sec)
        }
        _ => {
            let w = w.as_ref().expect("weight function");
            let check = verify_w2_condition(w, &p.v, h, e);
            if !check.pass {
                return refuse(
                    row,
                    format!(
                        "weight condition (k/h)|Vw| <= w' fails at x = {} (margin {:.3e})",
                        check.worst_x, check.min_margin
                    ),
                );
            }
            (weighted_bound(h, e), None)
        }
    };
    row.bound = bound;
    row.secondary_bound = secondary;
    let mut options = NormOptions::default().with_seed(seed);
    options.points_per_wavelength = spec.grid_ppw;
    match compute_norm(p.backend, &p.v, h, e, eps, &a, &options) {
        Ok(est) => {
            row.computed_norm = est.value;
            row.ratio = est.value / bound;
            let limit = |b: f64| est.value <= spec.slack * b;
            row.pass = limit(bound) && secondary.map_or(true, limit);
            row.status = if !row.pass {
                RowStatus::Fail
            } else if !est.convergence_flag {
                RowStatus::Unconverged
            } else {
                RowStatus::Pass
            };
            row.estimate = Some(est);
        }
        Err(err) => row.message = Some(err.to_string()),
    }
    row
}

fn exit_code<'a>(statuses: impl Iterator<Item = &'a RowStatus>) -> i32 {
    let mut code = exit::PASS;
    let rank = |c: i32| match c {
        exit::USAGE => 3,
        exit::VIOLATION => 2,
        exit::NONCONVERGENCE => 1,
        _ => 0,
    };
    for s in statuses {
        let c = match s {
            RowStatus::Pass => exit::PASS,
            RowStatus::Fail => exit::VIOLATION,
            RowStatus::Refused => exit::USAGE,
            RowStatus::Unconverged | RowStatus::Error => exit::NONCONVERGENCE,
        };
        if rank(c) > rank(code) {
            code = c;
        }
    }
    code
}

/// Evaluates every grid point. Exit code: 2 if any row was refused, else 1
/// if any bound is violated, else 3 if any row failed to converge or
/// errored, else 0.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let p = prepare(spec)?;
    let grid = spec.grid();
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &point)| run_row(&p, spec, i, point))
        .collect();
    rows.sort_by_key(|r| r.index);
    let count = |s: RowStatus| rows.iter().filter(|r| r.status == s).count();
    let summary = SweepSummary {
        rows: rows.len(),
        max_ratio: rows
            .iter()
            .map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max),
        failures: count(RowStatus::Fail),
        refused: count(RowStatus::Refused),
        unconverged: count(RowStatus::Unconverged),
        errors: count(RowStatus::Error),
        exit_code: exit_code(rows.iter().map(|r| &r.status)),
    };
    Ok(SweepReport {
        summary,
        provenance: Provenance {
            tool_version: TOOL_VERSION.to_string(),
            catalog_name: spec.potential.name.clone(),
            potential: p.v.label(),
            backend: p.backend,
            weight: p.choice.label(),
            bound: p.choice.bound_kind(),
            spec_hash: p.hash.clone(),
            spec: spec.clone(),
        },
        rows,
    })
}

/// Reruns one row of a sweep.
pub fn repro(spec: &SweepSpec, index: usize) -> Result<SweepRow> {
    let p = prepare(spec)?;
    let grid = spec.grid();
    let point = *grid
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("row {index} outside a grid of {} rows", grid.len())))?;
    Ok(run_row(&p, spec, index, point))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_e).unwrap_or_default()
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "h,E,eps,computed_norm,bound,ratio,secondary_bound,pass,status,converged,refinement_change,grid_spacing,truncation_radius,nodes"
        )?;
        for r in &self.rows {
            let est = r.estimate.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_e(r.h),
                fmt_e(r.energy),
                fmt_e(r.eps),
                fmt_e(r.computed_norm),
                fmt_e(r.bound),
                fmt_e(r.ratio),
                opt(r.secondary_bound),
                r.pass,
                serde_json::to_value(r.status).expect("status").as_str().unwrap_or(""),
                est.map(|e| e.convergence_flag.to_string()).unwrap_or_default(),
                opt(est.map(|e| e.refinement_change)),
                opt(est.map(|e| e.discretization.grid_spacing)),
                opt(est.map(|e| e.discretization.truncation_radius)),
                est.map(|e| e.discretization.nodes.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut csv = fs::File::create(dir.join("report.csv"))?;
        self.write_csv(&mut csv)?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(dir.join("report.json"), json + "\n")
    }
}

/// A batch of energy audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub potentials: Vec<PotentialSpec>,
    pub weights: Vec<String>,
    pub tests: Vec<String>,
    pub h: Vec<f64>,
    #[serde(alias = "E")]
    pub energy: Vec<f64>,
    pub eps: Vec<EpsChoice>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl AuditSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.potentials.is_empty() || self.weights.is_empty() || self.tests.is_empty() {
            return Err(Error::Config("potentials, weights and tests must be nonempty".into()));
        }
        for p in &self.potentials {
            let v = p.build()?;
            p.build_envelope(&v)?;
        }
        for w in &self.weights {
            match WeightChoice::parse(w)? {
                WeightChoice::Envelope | WeightChoice::Exterior { .. } => {
                    return Err(Error::Config(format!(
                        "audit weights are weight functions w, got `{w}`"
                    )))
                }
                _ => {}
            }
        }
        for t in &self.tests {
            TestFunction::parse(t)?;
        }
        if self.h.iter().chain(&self.energy).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("h and E must be positive".into()));
        }
        for &e in &self.energy {
            for eps in &self.eps {
                let eps = eps.resolve(e);
                if e < 2.0 * eps {
                    return Err(Error::Config(format!("E = {e}, eps = {eps} violates E >= 2 eps")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub index: usize,
    pub potential: String,
    pub weight: String,
    pub test: String,
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    pub relative_flux: f64,
    pub dissipation_defect: f64,
    pub worst_margin: f64,
    pub apriori_ratio: f64,
    pub pass: bool,
    pub status: RowStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub exit_code: i32,
    pub tool_version: String,
    pub spec: AuditSpec,
}

fn potential_label(p: &PotentialSpec) -> String {
    if p.params.is_empty() {
        return p.name.clone();
    }
    let params: Vec<String> = p.params.iter().map(|x| x.to_string()).collect();
    format!("{}:{}", p.name, params.join(","))
}

fn quoted(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

/// Runs every combination; a row passes when the flux and dissipation
/// identities hold to 1e-6 relative, the pointwise inequality margin is above
/// -1e-8 relative, and the a priori ratio is at most 1. `ε = 0` rows only
/// check the inequality and the a priori ratio, since `u` does not decay.
pub fn run_audit(spec: &AuditSpec) -> Result<AuditReport> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for p in &spec.potentials {
        for w in &spec.weights {
            for t in &spec.tests {
                for &h in &spec.h {
                    for &e in &spec.energy {
                        for eps in &spec.eps {
                            jobs.push((p, w, t, h, e, eps.resolve(e)));
                        }
                    }
                }
            }
        }
    }
    let mut rows: Vec<AuditRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(p, w, t, h, e, eps))| {
            let mut row = AuditRow {
                index,
                potential: potential_label(p),
                weight: w.clone(),
                test: t.clone(),
                h,
                energy: e,
                eps,
                relative_flux: f64::NAN,
                dissipation_defect: f64::NAN,
                worst_margin: f64::NAN,
                apriori_ratio: f64::NAN,
                pass: false,
                status: RowStatus::Error,
                message: None,
            };
            let run = || -> Result<(f64, f64, f64, f64, bool)> {
                let v = p.build()?;
                let m = p.build_envelope(&v)?;
                let wf = WeightChoice::parse(w)?
                    .weight_function(&m, h, e)?
                    .expect("weight function");
                let check = verify_w2_condition(&wf, &v, h, e);
                if !check.pass {
                    return Err(Error::NotApplicable(format!(
                        "weight condition fails at x = {} (margin {:.3e})",
                        check.worst_x, check.min_margin
                    )));
                }
                let test = TestFunction::parse(t)?;
                let trace = audit_energy(&v, &wf, &test, h, e, eps)?;
                let apriori = audit_apriori_bound(&trace, test.norm_sq());
                Ok((
                    trace.relative_flux(),
                    trace.dissipation_defect(),
                    trace.worst_margin,
                    apriori.ratio,
                    eps > 0.0,
                ))
            };
            match run() {
                Ok((flux, diss, margin, ratio, identities)) => {
                    row.relative_flux = flux;
                    row.dissipation_defect = diss;
                    row.worst_margin = margin;
                    row.apriori_ratio = ratio;
                    row.pass = margin >= -MARGIN_TOLERANCE
                        && ratio <= 1.0
                        && (!identities || (flux <= FLUX_TOLERANCE && diss <= DISSIPATION_TOLERANCE));
                    row.status = if row.pass { RowStatus::Pass } else { RowStatus::Fail };
                }
                Err(Error::NotApplicable(msg)) => {
                    row.status = RowStatus::Refused;
                    row.message = Some(msg);
                }
                Err(err) => row.message = Some(err.to_string()),
            }
            row
        })
        .collect();
    rows.sort_by_key(|r| r.index);
    let exit_code = exit_code(rows.iter().map(|r| &r.status));
    Ok(AuditReport {
        rows,
        exit_code,
        tool_version: TOOL_VERSION.to_string(),
        spec: spec.clone(),
    })
}

impl AuditReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "potential,weight,test,h,E,eps,relative_flux,dissipation_defect,worst_margin,apriori_ratio,pass,status"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                quoted(&r.potential),
                quoted(&r.weight),
                quoted(&r.test),
                fmt_e(r.h),
                fmt_e(r.energy),
                fmt_e(r.eps),
                fmt_e(r.relative_flux),
                fmt_e(r.dissipation_defect),
                fmt_e(r.worst_margin),
                fmt_e(r.apriori_ratio),
                r.pass,
                serde_json::to_value(r.status).expect("status").as_str().unwrap_or(""),
            )?;
        }
        Ok(())
    }

    /// Writes `audit.csv` and `audit.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut csv = fs::File::create(dir.join("audit.csv"))?;
        self.write_csv(&mut csv)?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(dir.join("audit.json"), json + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(weight: &str, eps: &[&str]) -> SweepSpec {
        SweepSpec {
            potential: PotentialSpec::new("square_barrier", &[1.0, 1.0]),
            weight: weight.into(),
            backend: "kernel".into(),
            h: vec![1.0, 0.5],
            energy: vec![1.0],
            eps: eps.iter().map(|e| EpsChoice::parse(e).unwrap()).collect(),
            slack: DEFAULT_SLACK,
            grid_ppw: DEFAULT_PPW,
            out: None,
        }
    }

    #[test]
    fn eps_choices() {
        assert_eq!(EpsChoice::parse("frac:0.1").unwrap().resolve(2.0), 0.2);
        assert!(EpsChoice::parse("frac:0.6").is_err());
        assert!(EpsChoice::parse("-1").is_err());
        assert_eq!(EpsChoice::parse("0.3").unwrap(), EpsChoice::Value(0.3));
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut s = spec("thm1", &["0.6"]);
        assert!(s.validate().is_err());
        s = spec("thm1", &["0"]);
        s.backend = "matrix".into();
        assert!(s.validate().is_err());
        s = spec("bogus", &["0"]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn broken_weight_is_refused() {
        let report = run_sweep(&spec("custom:const:1", &["frac:0.1"])).unwrap();
        assert!(report.rows.iter().all(|r| r.status == RowStatus::Refused));
        assert_eq!(report.summary.exit_code, exit::USAGE);
    }

    #[test]
    fn exterior_sweep_passes_both_constants() {
        let report = run_sweep(&spec("exterior:1,1", &["0"])).unwrap();
        assert_eq!(report.summary.exit_code, exit::PASS, "{:?}", report.summary);
        assert!(report.rows.iter().all(|r| r.secondary_bound.is_some()));
    }

    #[test]
    fn toml_round_trip_and_determinism() {
        let text = r#"
            weight = "thm2:1,1"
            h = [1.0]
            E = [1.0, 2.0]
            eps = [0.0, "frac:0.25"]
            [potential]
            name = "square_barrier"
            params = [1.0, 1.0]
        "#;
        let s = SweepSpec::from_toml(text).unwrap();
        assert_eq!(s.eps, vec![EpsChoice::Value(0.0), EpsChoice::Fraction(0.25)]);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        run_sweep(&s).unwrap().write_csv(&mut a).unwrap();
        run_sweep(&s).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let back: SweepSpec = toml::from_str(&toml::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
