//! Integrable potentials, envelopes and the built-in test catalog.
//!
//! Potentials are closed-form functions carrying the metadata the numerics
//! need: an optional support radius, integrable singularities, jump
//! locations and, for non-compact potentials, a description of the tail.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_piecewise, integrate_to_infinity, QuadSettings, Singularity};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tail of a non-compact potential beyond `start`. `integral(X)` returns
/// `∫_X^∞ |V| = ∫_{-∞}^{-X} |V|` for `X >= start`; tails are symmetric.
#[derive(Clone)]
pub struct Tail {
    pub start: f64,
    pub integral: RealFn,
}

#[derive(Clone)]
pub struct Potential {
    name: String,
    params: Vec<f64>,
    profile: RealFn,
    support_radius: Option<f64>,
    singular_points: Vec<Singularity>,
    breakpoints: Vec<f64>,
    tail: Option<Tail>,
    l1_norm: f64,
    /// `(x_j, ∫_{lo}^{x_j} |V|)` at the breakpoints of the core region,
    /// built on first use
    abs_table: Arc<OnceLock<Vec<(f64, f64)>>>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("support_radius", &self.support_radius)
            .field("singular_points", &self.singular_points)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

pub struct PotentialBuilder {
    name: String,
    params: Vec<f64>,
    profile: RealFn,
    support_radius: Option<f64>,
    singular_points: Vec<Singularity>,
    breakpoints: Vec<f64>,
    tail: Option<Tail>,
}

impl PotentialBuilder {
    pub fn support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    pub fn singularity(mut self, at: f64, exponent: f64) -> Self {
        self.singular_points.push(Singularity::new(at, exponent));
        self
    }

    pub fn breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    pub fn tail(mut self, tail: Tail) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn build(mut self) -> Result<Potential> {
        if let Some(r) = self.support_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameters {
                    name: self.name,
                    reason: format!("support radius must be finite and nonnegative, got {r}"),
                });
            }
            self.breakpoints.extend([-r, r]);
        }
        if self.support_radius.is_none() && self.tail.is_none() {
            return Err(Error::InvalidParameters {
                name: self.name,
                reason: "non-compact potential needs a tail description".into(),
            });
        }
        for s in &self.singular_points {
            if !(0.0..1.0).contains(&s.exponent) {
                return Err(Error::InvalidParameters {
                    name: self.name.clone(),
                    reason: format!("singularity exponent {} is not integrable", s.exponent),
                });
            }
        }
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        let mut v = Potential {
            name: self.name,
            params: self.params,
            profile: self.profile,
            support_radius: self.support_radius,
            singular_points: self.singular_points,
            breakpoints: self.breakpoints,
            tail: self.tail,
            l1_norm: 0.0,
            abs_table: Arc::default(),
        };
        v.l1_norm = v.cumulative_abs(f64::INFINITY)?;
        Ok(v)
    }
}

impl Potential {
    pub fn builder(name: impl Into<String>, params: Vec<f64>, profile: RealFn) -> PotentialBuilder {
        PotentialBuilder {
            name: name.into(),
            params,
            profile,
            support_radius: None,
            singular_points: Vec::new(),
            breakpoints: Vec::new(),
            tail: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.name.clone()
        } else {
            let p: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
            format!("{}({})", self.name, p.join(","))
        }
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn singular_points(&self) -> &[Singularity] {
        &self.singular_points
    }

    /// Jump and kink locations, including `±R` when the support is compact.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn is_zero(&self) -> bool {
        self.l1_norm == 0.0
    }

    /// Radius outside of which the potential is either zero or described by
    /// its tail model.
    pub fn core_radius(&self) -> f64 {
        match (self.support_radius, &self.tail) {
            (Some(r), _) => r,
            (None, Some(t)) => t.start,
            (None, None) => unreachable!("validated at construction"),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if let Some(r) = self.support_radius {
            if x.abs() > r {
                return 0.0;
            }
        }
        (self.profile)(x)
    }

    pub fn profile(&self) -> RealFn {
        let v = self.clone();
        Arc::new(move |x| v.eval(x))
    }

    fn quad_settings() -> QuadSettings {
        QuadSettings {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }

    fn integrate_finite<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> Result<f64> {
        let lo = a.min(b);
        let hi = a.max(b);
        let breaks: Vec<f64> = self.breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
        integrate_piecewise(f, a, b, &self.singular_points, &breaks, &Self::quad_settings())
    }

    /// `∫_a^b V` over a finite interval.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.clip(a, b);
        if lo >= hi {
            return Ok(0.0);
        }
        let f = |x: f64| self.eval(x);
        self.integrate_finite(&f, lo, hi)
    }

    /// `∫_a^b |V|` over a finite interval.
    pub fn integrate_abs(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.clip(a, b);
        if lo >= hi {
            return Ok(0.0);
        }
        let f = |x: f64| self.eval(x).abs();
        self.integrate_finite(&f, lo, hi)
    }

    fn clip(&self, a: f64, b: f64) -> (f64, f64) {
        match self.support_radius {
            Some(r) => (a.max(-r), b.min(r)),
            None => (a, b),
        }
    }

    /// The region `[lo, hi]` outside which `|V|` is zero or described by
    /// the tail.
    fn core(&self) -> (f64, f64) {
        match (self.support_radius, &self.tail) {
            (Some(r), _) => (-r, r),
            (None, Some(t)) => (-t.start, t.start),
            (None, None) => unreachable!("validated at construction"),
        }
    }

    /// `∫_{lo}^x |V|` for `x` in the core, from a prefix table over the
    /// breakpoints so that long oscillating cores are integrated only once.
    fn core_cumulative_abs(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.core();
        let f = |t: f64| self.eval(t).abs();
        let table = match self.abs_table.get() {
            Some(t) => t,
            None => {
                let mut knots = vec![lo];
                knots.extend(self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
                knots.push(hi);
                let mut table = Vec::with_capacity(knots.len());
                let mut acc = 0.0;
                table.push((lo, 0.0));
                for pair in knots.windows(2) {
                    if pair[1] > pair[0] {
                        acc += self.integrate_finite(&f, pair[0], pair[1])?;
                        table.push((pair[1], acc));
                    }
                }
                self.abs_table.get_or_init(|| table)
            }
        };
        let x = x.clamp(lo, hi);
        let j = table.partition_point(|&(k, _)| k <= x).saturating_sub(1);
        let (k, base) = table[j];
        if x == k {
            return Ok(base);
        }
        Ok(base + self.integrate_finite(&f, k, x)?)
    }

    /// `∫_{-∞}^x |V|`.
    pub fn cumulative_abs(&self, x: f64) -> Result<f64> {
        if let Some(r) = self.support_radius {
            if x <= -r {
                return Ok(0.0);
            }
            return self.core_cumulative_abs(x.min(r));
        }
        let tail = self.tail.as_ref().expect("validated at construction");
        let s = tail.start;
        if x <= -s {
            return Ok((tail.integral)(-x));
        }
        let left = (tail.integral)(s);
        let core = self.core_cumulative_abs(x.min(s))?;
        let right = if x > s {
            if x.is_infinite() {
                left
            } else {
                left - (tail.integral)(x)
            }
        } else {
            0.0
        };
        Ok(left + core + right)
    }

    /// `y ↦ V(s y)`.
    pub fn dilate(&self, s: f64) -> Potential {
        assert!(s > 0.0 && s.is_finite());
        let profile = self.profile.clone();
        let tail = self.tail.as_ref().map(|t| {
            let integral = t.integral.clone();
            Tail {
                start: t.start / s,
                integral: Arc::new(move |y| integral(s * y) / s),
            }
        });
        Potential {
            name: format!("{}@dilate({s})", self.name),
            params: self.params.clone(),
            profile: Arc::new(move |y| profile(s * y)),
            support_radius: self.support_radius.map(|r| r / s),
            singular_points: self
                .singular_points
                .iter()
                .map(|p| Singularity::new(p.at / s, p.exponent))
                .collect(),
            breakpoints: self.breakpoints.iter().map(|b| b / s).collect(),
            tail,
            l1_norm: self.l1_norm / s,
            abs_table: Arc::default(),
        }
    }

    /// `x ↦ c V(x)`.
    pub fn scaled(&self, c: f64) -> Potential {
        let profile = self.profile.clone();
        let tail = self.tail.as_ref().map(|t| {
            let integral = t.integral.clone();
            Tail {
                start: t.start,
                integral: Arc::new(move |y| c.abs() * integral(y)),
            }
        });
        Potential {
            name: format!("{}@scale({c})", self.name),
            params: self.params.clone(),
            profile: Arc::new(move |x| c * profile(x)),
            support_radius: self.support_radius,
            singular_points: if c == 0.0 {
                Vec::new()
            } else {
                self.singular_points.clone()
            },
            breakpoints: self.breakpoints.clone(),
            tail,
            l1_norm: c.abs() * self.l1_norm,
            abs_table: Arc::default(),
        }
    }

    /// `x ↦ |V(x)|`.
    pub fn abs(&self) -> Potential {
        let profile = self.profile.clone();
        Potential {
            name: format!("|{}|", self.name),
            params: self.params.clone(),
            profile: Arc::new(move |x| profile(x).abs()),
            support_radius: self.support_radius,
            singular_points: self.singular_points.clone(),
            breakpoints: self.breakpoints.clone(),
            tail: self.tail.clone(),
            l1_norm: self.l1_norm,
            abs_table: self.abs_table.clone(),
        }
    }

    /// Sample points used for pointwise checks: a uniform grid over the core
    /// region plus geometric refinement towards every singular point and
    /// breakpoint.
    pub fn check_grid(&self, uniform: usize) -> Vec<f64> {
        let extent = (self.core_radius() * 1.5).max(4.0);
        let mut xs: Vec<f64> = (0..uniform)
            .map(|i| -extent + 2.0 * extent * (i as f64 + 0.5) / uniform as f64)
            .collect();
        let mut specials: Vec<f64> = self.singular_points.iter().map(|s| s.at).collect();
        specials.extend(self.breakpoints.iter().copied().filter(|b| b.abs() <= extent));
        for s in specials {
            for k in 1..=12 {
                let d = 10f64.powi(-k);
                xs.push(s - d);
                xs.push(s + d);
            }
        }
        xs.sort_by(f64::total_cmp);
        xs
    }
}

/// Names understood by [`catalog_get`].
pub const CATALOG: &[&str] = &[
    "free",
    "square_barrier",
    "gaussian_truncated",
    "inverse_sqrt_singular",
    "wvn_like",
    "sinh_test",
];

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameters {
        name: name.to_string(),
        reason: reason.into(),
    }
}

fn expect_params(name: &str, params: &[f64], allowed: &[usize]) -> Result<()> {
    if !allowed.contains(&params.len()) {
        return Err(invalid(
            name,
            format!("expected {allowed:?} parameters, got {}", params.len()),
        ));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(invalid(name, "parameters must be finite"));
    }
    Ok(())
}

fn positive(name: &str, label: &str, value: f64) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("{label} must be positive, got {value}")))
    }
}

fn sech(y: f64) -> f64 {
    let e = (-y.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// Builds a catalog potential.
///
/// | name | params | V(x) |
/// |---|---|---|
/// | `free` | – | 0 |
/// | `square_barrier` | V₀, R | V₀ on [−R, R] |
/// | `gaussian_truncated` | A, σ, R | A exp(−x²/2σ²) on [−R, R] |
/// | `inverse_sqrt_singular` | A, R | A \|x\|^(−1/2) on (−R, R) |
/// | `wvn_like` | A, δ | A sin(2x) (1+\|x\|)^(−1−δ) |
/// | `sinh_test` | A, σ [, R] | A sech²(x/σ), optionally truncated to [−R, R] |
pub fn catalog_get(name: &str, params: &[f64]) -> Result<Potential> {
    match name {
        "free" => {
            expect_params(name, params, &[0])?;
            Potential::builder(name, vec![], Arc::new(|_| 0.0))
                .support_radius(0.0)
                .build()
        }
        "square_barrier" => {
            expect_params(name, params, &[2])?;
            let v0 = params[0];
            let r = positive(name, "R", params[1])?;
            Potential::builder(name, params.to_vec(), Arc::new(move |_| v0))
                .support_radius(r)
                .build()
        }
        "gaussian_truncated" => {
            expect_params(name, params, &[3])?;
            let a = params[0];
            let sigma = positive(name, "sigma", params[1])?;
            let r = positive(name, "R", params[2])?;
            Potential::builder(
                name,
                params.to_vec(),
                Arc::new(move |x| a * (-0.5 * (x / sigma).powi(2)).exp()),
            )
            .support_radius(r)
            .build()
        }
        "inverse_sqrt_singular" => {
            expect_params(name, params, &[2])?;
            let a = params[0];
            let r = positive(name, "R", params[1])?;
            Potential::builder(name, params.to_vec(), Arc::new(move |x| a / x.abs().sqrt()))
                .support_radius(r)
                .singularity(0.0, 0.5)
                .breakpoints([0.0])
                .build()
        }
        "wvn_like" => {
            expect_params(name, params, &[2])?;
            let a = params[0];
            let delta = params[1];
            if delta <= 0.0 {
                return Err(invalid(
                    name,
                    format!("delta must be positive for integrability, got {delta}"),
                ));
            }
            wvn_like(a, delta)
        }
        "sinh_test" => {
            expect_params(name, params, &[2, 3])?;
            let a = params[0];
            let sigma = positive(name, "sigma", params[1])?;
            let profile: RealFn = Arc::new(move |x| a * sech(x / sigma).powi(2));
            let builder = Potential::builder(name, params.to_vec(), profile.clone());
            if params.len() == 3 {
                let r = positive(name, "R", params[2])?;
                builder.support_radius(r).build()
            } else {
                let start = 20.0 * sigma;
                let integral: RealFn = Arc::new(move |x0| {
                    let f = |x: f64| profile(x).abs();
                    integrate_to_infinity(&f, x0, &QuadSettings::default()).unwrap_or(f64::NAN)
                });
                builder.tail(Tail { start, integral }).build()
            }
        }
        _ => Err(Error::UnknownPotential(name.to_string())),
    }
}

/// Oscillating, slowly decaying potential of Wigner–von Neumann shape.
/// `|V|` has kinks at multiples of π/2; beyond the core the tail integral
/// uses the period average 2/π of `|sin 2x|`, whose remainder is
/// O(g'(X)) for the decaying factor g.
fn wvn_like(a: f64, delta: f64) -> Result<Potential> {
    let half_periods = 2000usize;
    let start = half_periods as f64 * FRAC_PI_2;
    let profile: RealFn = Arc::new(move |x| a * (2.0 * x).sin() * (1.0 + x.abs()).powf(-1.0 - delta));
    let kinks: Vec<f64> = (1..=half_periods)
        .flat_map(|k| {
            let x = k as f64 * FRAC_PI_2;
            [x, -x]
        })
        .chain([0.0])
        .collect();
    let p = profile.clone();
    let integral: RealFn = Arc::new(move |x0| {
        let next = (x0 / FRAC_PI_2).ceil() * FRAC_PI_2;
        let f = |x: f64| p(x).abs();
        let head = integrate_piecewise(&f, x0, next, &[], &[], &QuadSettings::default()).unwrap_or(f64::NAN);
        head + 2.0 / PI * a.abs() * (1.0 + next).powf(-delta) / delta
    });
    Potential::builder("wvn_like", vec![a, delta], profile)
        .breakpoints(kinks)
        .tail(Tail { start, integral })
        .build()
}

/// A nonnegative integrable majorant `m >= |V|`.
#[derive(Clone, Debug)]
pub struct Envelope {
    profile: Potential,
    dominates: Option<Potential>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub samples: usize,
    pub min_margin: f64,
    pub worst_x: f64,
    pub pass: bool,
}

impl Envelope {
    /// The default envelope `m = |V|`.
    pub fn abs_of(v: &Potential) -> Envelope {
        Envelope {
            profile: v.abs(),
            dominates: Some(v.clone()),
        }
    }

    /// Wraps a nonnegative profile, validating that it majorizes `v`.
    pub fn new(profile: Potential, dominates: &Potential) -> Result<Envelope> {
        let env = Envelope {
            profile,
            dominates: None,
        };
        let report = env.check_domination(dominates, 10_000);
        if !report.pass {
            return Err(Error::InvalidArgument(format!(
                "envelope `{}` does not dominate `{}` (margin {:.3e} at x = {})",
                env.profile.label(),
                dominates.label(),
                report.min_margin,
                report.worst_x
            )));
        }
        Ok(Envelope {
            dominates: Some(dominates.clone()),
            ..env
        })
    }

    /// `A (1 + |x|)^(-1-δ)`.
    pub fn power_law_profile(amplitude: f64, delta: f64) -> Result<Potential> {
        if amplitude < 0.0 || delta <= 0.0 {
            return Err(invalid("power_law", "need A >= 0 and delta > 0"));
        }
        let profile: RealFn = Arc::new(move |x| amplitude * (1.0 + x.abs()).powf(-1.0 - delta));
        let integral: RealFn = Arc::new(move |x0| amplitude * (1.0 + x0).powf(-delta) / delta);
        Potential::builder("power_law", vec![amplitude, delta], profile)
            .breakpoints([0.0])
            .tail(Tail { start: 1.0, integral })
            .build()
    }

    pub fn profile(&self) -> &Potential {
        &self.profile
    }

    pub fn dominated(&self) -> Option<&Potential> {
        self.dominates.as_ref()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    /// `∫ m`.
    pub fn total(&self) -> f64 {
        self.profile.l1_norm()
    }

    pub fn cumulative(&self, x: f64) -> Result<f64> {
        self.profile.cumulative_abs(x)
    }

    pub fn dilate(&self, s: f64) -> Envelope {
        Envelope {
            profile: self.profile.dilate(s),
            dominates: self.dominates.as_ref().map(|v| v.dilate(s)),
        }
    }

    /// Checks `m(x) >= |V(x)|` on `uniform` grid points plus refined points
    /// near the singularities and breakpoints of both functions.
    pub fn check_domination(&self, v: &Potential, uniform: usize) -> DominationReport {
        let mut xs = v.check_grid(uniform);
        xs.extend(self.profile.check_grid(uniform / 4));
        let mut min_margin = f64::INFINITY;
        let mut worst_x = f64::NAN;
        let mut negative = false;
        for &x in &xs {
            let m = self.profile.eval(x);
            if m < 0.0 {
                negative = true;
            }
            let vx = v.eval(x).abs();
            let margin = m - vx;
            let scaled = if vx.is_finite() && vx > 0.0 {
                margin / vx
            } else {
                margin
            };
            if scaled < min_margin {
                min_margin = scaled;
                worst_x = x;
            }
        }
        DominationReport {
            samples: xs.len(),
            min_margin,
            worst_x,
            pass: !negative && min_margin >= -1e-14,
        }
    }
}

/// Serialized potential definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub envelope: Option<EnvelopeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeSpec {
    /// `m = |V|`.
    Abs,
    /// `m = A (1 + |x|)^(-1-δ)`.
    PowerLaw { amplitude: f64, delta: f64 },
    /// `m = |W|` for another catalog potential `W`.
    Catalog {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
}

impl EnvelopeSpec {
    /// Parses `abs`, `power:A,delta` or a catalog potential `name:p1,...`
    /// whose absolute value is the envelope.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "abs" {
            return Ok(EnvelopeSpec::Abs);
        }
        let spec = PotentialSpec::parse(text)?;
        if spec.name == "power" {
            return match spec.params.as_slice() {
                [amplitude, delta] => Ok(EnvelopeSpec::PowerLaw {
                    amplitude: *amplitude,
                    delta: *delta,
                }),
                _ => Err(Error::Config(format!("envelope `{text}` needs power:A,delta"))),
            };
        }
        catalog_get(&spec.name, &spec.params)?;
        Ok(EnvelopeSpec::Catalog {
            name: spec.name,
            params: spec.params,
        })
    }
}

impl PotentialSpec {
    pub fn new(name: &str, params: &[f64]) -> Self {
        Self {
            name: name.to_string(),
            params: params.to_vec(),
            envelope: None,
        }
    }

    /// Parses `name` or `name:p1,p2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (text.trim(), ""),
        };
        let params = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad potential parameter `{p}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self::new(name, &params))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrapper {
            potential: PotentialSpec,
        }
        toml::from_str::<Wrapper>(text)
            .map(|w| w.potential)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<Potential> {
        catalog_get(&self.name, &self.params)
    }

    pub fn build_envelope(&self, v: &Potential) -> Result<Envelope> {
        match &self.envelope {
            None | Some(EnvelopeSpec::Abs) => Ok(Envelope::abs_of(v)),
            Some(EnvelopeSpec::PowerLaw { amplitude, delta }) => {
                Envelope::new(Envelope::power_law_profile(*amplitude, *delta)?, v)
            }
            Some(EnvelopeSpec::Catalog { name, params }) => Envelope::new(catalog_get(name, params)?.abs(), v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn free_potential_metadata() {
        let v = catalog_get("free", &[]).unwrap();
        assert_eq!(v.l1_norm(), 0.0);
        assert_eq!(v.support_radius(), Some(0.0));
        assert_eq!(v.cumulative_abs(5.0).unwrap(), 0.0);
    }

    #[test]
    fn square_barrier_values() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        assert!(close(v.l1_norm(), 2.0, 1e-13));
        assert!(close(v.cumulative_abs(0.0).unwrap(), 1.0, 1e-13));
        assert_eq!(v.eval(1.0 + 1e-15), 0.0);
        assert_eq!(v.eval(0.3), 1.0);
    }

    #[test]
    fn inverse_sqrt_closed_forms() {
        // antiderivative of |x|^(-1/2) is 2 sign(x) sqrt|x|
        let v = catalog_get("inverse_sqrt_singular", &[1.0, 1.0]).unwrap();
        assert!(close(v.l1_norm(), 4.0, 1e-10));
        assert!(close(v.cumulative_abs(0.0).unwrap(), 2.0, 1e-8));
        for &x in &[-0.7, -1e-6, 1e-9, 0.25, 0.9] {
            let exact = 2.0 + 2.0 * f64::signum(x) * f64::sqrt(f64::abs(x));
            assert!(close(v.cumulative_abs(x).unwrap(), exact, 1e-8), "x = {x}");
        }
    }

    #[test]
    fn gaussian_l1_matches_erf_free_oracle() {
        // independent oracle: fine composite Simpson on [-R, R]
        let (a, s, r) = (1.5, 0.5, 2.0);
        let v = catalog_get("gaussian_truncated", &[a, s, r]).unwrap();
        let n = 200_000;
        let h = 2.0 * r / n as f64;
        let f = |x: f64| a * (-0.5 * (x / s) * (x / s)).exp();
        let mut simpson = f(-r) + f(r);
        for i in 1..n {
            let x = -r + i as f64 * h;
            simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        simpson *= h / 3.0;
        assert!(close(v.l1_norm(), simpson, 1e-10 * simpson));
    }

    #[test]
    fn sinh_test_cumulative_matches_tanh() {
        let v = catalog_get("sinh_test", &[2.0, 0.5]).unwrap();
        // ∫_{-∞}^x A sech²(t/σ) dt = Aσ (1 + tanh(x/σ))
        assert!(close(v.l1_norm(), 2.0, 1e-10));
        for &x in &[-30.0, -3.0, -0.2, 0.0, 1.1, 12.0, 40.0] {
            let exact = 2.0 * 0.5 * (1.0 + (x / 0.5f64).tanh());
            let got = v.cumulative_abs(x).unwrap();
            assert!(close(got, exact, 1e-10 * exact.max(1e-3)), "x = {x}: {got} vs {exact}");
        }
    }

    #[test]
    fn wvn_like_requires_positive_delta() {
        assert!(catalog_get("wvn_like", &[1.0, 0.0]).is_err());
        assert!(catalog_get("wvn_like", &[1.0, -0.5]).is_err());
    }

    #[test]
    fn wvn_like_tail_is_consistent() {
        let v = catalog_get("wvn_like", &[1.0, 1.0]).unwrap();
        // continuity of the cumulative function across the tail boundary
        let s = 2000.0 * FRAC_PI_2;
        let below = v.cumulative_abs(-s - 1e-9).unwrap();
        let above = v.cumulative_abs(-s + 1e-9).unwrap();
        assert!(close(below, above, 1e-8), "{below} vs {above}");
        let total = v.l1_norm();
        assert!(close(v.cumulative_abs(0.0).unwrap(), 0.5 * total, 1e-9));
        // direct integration of the core plus a long explicit range
        let f = |x: f64| v.eval(x).abs();
        let kinks: Vec<f64> = (1..4000).map(|k| k as f64 * FRAC_PI_2).collect();
        let direct =
            2.0 * integrate_piecewise(&f, 0.0, 4000.0 * FRAC_PI_2, &[], &kinks, &QuadSettings::default()).unwrap();
        let rest = 2.0 * 2.0 / PI / (1.0 + 4000.0 * FRAC_PI_2);
        assert!(close(total, direct + rest, 1e-8), "{total} vs {}", direct + rest);
    }

    #[test]
    fn unknown_and_bad_parameters() {
        assert!(matches!(catalog_get("nope", &[]), Err(Error::UnknownPotential(_))));
        assert!(catalog_get("square_barrier", &[1.0]).is_err());
        assert!(catalog_get("square_barrier", &[1.0, -1.0]).is_err());
    }

    #[test]
    fn dilation_rescales_metadata() {
        let v = catalog_get("inverse_sqrt_singular", &[1.0, 1.0]).unwrap();
        let d = v.dilate(0.5);
        assert_eq!(d.support_radius(), Some(2.0));
        assert!(close(d.eval(1.0), v.eval(0.5), 1e-15));
        assert!(close(d.l1_norm(), 8.0, 1e-9));
        assert!(close(d.cumulative_abs(0.0).unwrap(), 4.0, 1e-8));
    }

    #[test]
    fn envelopes_dominate() {
        let v = catalog_get("inverse_sqrt_singular", &[1.0, 1.0]).unwrap();
        let m = Envelope::abs_of(&v);
        let r = m.check_domination(&v, 10_000);
        assert!(r.pass);
        assert!(r.samples >= 10_000);

        let w = catalog_get("wvn_like", &[1.0, 0.5]).unwrap();
        let env = Envelope::new(Envelope::power_law_profile(1.0, 0.5).unwrap(), &w).unwrap();
        assert!(close(env.total(), 2.0 / 0.5, 1e-12));

        let too_small = Envelope::power_law_profile(0.5, 0.5).unwrap();
        assert!(Envelope::new(too_small, &w).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(EnvelopeSpec::parse("abs").unwrap(), EnvelopeSpec::Abs);
        assert_eq!(
            EnvelopeSpec::parse("power:2,0.5").unwrap(),
            EnvelopeSpec::PowerLaw {
                amplitude: 2.0,
                delta: 0.5
            }
        );
        assert!(EnvelopeSpec::parse("nonsense:1").is_err());
        let s = PotentialSpec::parse("square_barrier:1,2.5").unwrap();
        assert_eq!(s.params, vec![1.0, 2.5]);
        let t = PotentialSpec::from_toml(
            "[potential]\nname = \"free\"\n[potential.envelope]\nkind = \"catalog\"\nname = \"square_barrier\"\nparams = [1.0, 1.0]\n",
        )
        .unwrap();
        let v = t.build().unwrap();
        let m = t.build_envelope(&v).unwrap();
        assert!(close(m.total(), 2.0, 1e-12));
    }
}
