//! Weight functions `w` with `|w| <= 1`, `w' >= 0` for the weighted resolvent
//! estimate, and the pointwise check of `(k/h)|V w| <= w'` with `k = 4/E^{1/2}`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::csv;
use crate::error::{Error, Result};
use crate::potential::{Envelope, Potential, RealFn};
use crate::quadrature::Singularity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Thm1Sinh,
    Thm2Exterior,
    Custom,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMeta {
    /// `a` splits the mass of `m` in half; `total = ∫ m`.
    Sinh {
        median: f64,
        total: f64,
        degenerate: bool,
    },
    Exterior {
        radius: f64,
        delta: f64,
    },
    Custom {
        description: String,
    },
}

/// `k = 4 / E^{1/2}`.
pub fn weight_constant(energy: f64) -> f64 {
    4.0 / energy.sqrt()
}

#[derive(Clone)]
pub struct WeightFunction {
    pub kind: WeightKind,
    /// `4/E^{1/2}` when the weight was built for a specific energy
    pub k: Option<f64>,
    pub meta: WeightMeta,
    w: RealFn,
    w_prime: RealFn,
    /// `w(+∞) - w(-∞)`
    total_variation: f64,
    /// locations where `w'` may jump or be singular, for grid refinement
    special_points: Vec<f64>,
    singular_points: Vec<Singularity>,
    /// `[-extent, extent]` contains everything of interest
    extent: f64,
    /// support of `w'`, when bounded
    support: Option<(f64, f64)>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("kind", &self.kind)
            .field("k", &self.k)
            .field("meta", &self.meta)
            .finish()
    }
}

impl WeightFunction {
    pub fn w(&self, x: f64) -> f64 {
        (self.w)(x)
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        (self.w_prime)(x)
    }

    pub fn w_fn(&self) -> RealFn {
        self.w.clone()
    }

    pub fn w_prime_fn(&self) -> RealFn {
        self.w_prime.clone()
    }

    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    pub fn special_points(&self) -> &[f64] {
        &self.special_points
    }

    pub fn singular_points(&self) -> &[Singularity] {
        &self.singular_points
    }

    /// Bounded support of `w'`, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        match &self.meta {
            WeightMeta::Sinh { total, .. } => format!("thm1_sinh(int_m={total})"),
            WeightMeta::Exterior { radius, delta } => format!("thm2_exterior(R={radius},delta={delta})"),
            WeightMeta::Custom { description } => format!("custom({description})"),
        }
    }

    /// Sample grid: uniform points over `[-extent, extent]` plus geometric
    /// refinement near every special and singular point.
    pub fn check_grid(&self, uniform: usize) -> Vec<f64> {
        let e = self.extent;
        let mut xs: Vec<f64> = (0..uniform)
            .map(|i| -e + 2.0 * e * (i as f64 + 0.5) / uniform as f64)
            .collect();
        let specials = self
            .special_points
            .iter()
            .copied()
            .chain(self.singular_points.iter().map(|s| s.at));
        for s in specials {
            for k in 1..=12 {
                let d = 10f64.powi(-k);
                xs.push(s - d);
                xs.push(s + d);
            }
            xs.push(s);
        }
        // far field
        for k in 1..=6 {
            let x = e * 10f64.powi(k);
            xs.push(x);
            xs.push(-x);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// Checks `|w| <= 1`, `w' >= 0` and that `w'` integrates to the
    /// increments of `w` between consecutive grid points.
    pub fn validate(&self, uniform: usize) -> WeightValidation {
        let xs = self.check_grid(uniform);
        let max_abs_w = xs.iter().map(|&x| self.w(x).abs()).fold(0.0, f64::max);
        let min_w_prime = xs.iter().map(|&x| self.w_prime(x)).fold(f64::INFINITY, f64::min);
        let mut worst = 0.0f64;
        let e = self.extent;
        let coarse: Vec<f64> = (0..=64).map(|i| -e + 2.0 * e * i as f64 / 64.0).collect();
        for pair in coarse.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let f = |x: f64| self.w_prime(x);
            let mut breaks: Vec<f64> = self.special_points.clone();
            breaks.retain(|&x| x > a && x < b);
            let integral =
                crate::quadrature::integrate_piecewise(&f, a, b, &self.singular_points, &breaks, &Default::default())
                    .unwrap_or(f64::NAN);
            let inc = self.w(b) - self.w(a);
            worst = worst.max((integral - inc).abs());
        }
        WeightValidation {
            max_abs_w,
            min_w_prime,
            derivative_mismatch: worst,
            pass: max_abs_w <= 1.0 + 1e-12 && min_w_prime >= 0.0 && worst <= 1e-8,
        }
    }

    /// Writes `x,w,w_prime` at the given points.
    pub fn dump_csv<W: Write>(&self, out: &mut W, xs: &[f64]) -> io::Result<()> {
        csv::write_header(out, &["x", "w", "w_prime"])?;
        for &x in xs {
            csv::write_row(out, &[x, self.w(x), self.w_prime(x)])?;
        }
        Ok(())
    }

    /// The same weight, for the dilated problem `x = s y`: `w_s(y) = w(s y)`.
    pub fn dilate(&self, s: f64) -> WeightFunction {
        let w = self.w.clone();
        let wp = self.w_prime.clone();
        WeightFunction {
            w: Arc::new(move |y| w(s * y)),
            w_prime: Arc::new(move |y| s * wp(s * y)),
            special_points: self.special_points.iter().map(|x| x / s).collect(),
            singular_points: self
                .singular_points
                .iter()
                .map(|p| Singularity::new(p.at / s, p.exponent))
                .collect(),
            extent: self.extent / s,
            support: self.support.map(|(a, b)| (a / s, b / s)),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightValidation {
    pub max_abs_w: f64,
    pub min_w_prime: f64,
    pub derivative_mismatch: f64,
    pub pass: bool,
}

/// The sinh weight
/// `w(x) = 2 exp(-(k/2h) ∫m) sinh((k/h) ∫_a^x m)` with `a` the median of
/// `m`, and `w' = (2k/h) exp(-(k/2h) ∫m) cosh((k/h) ∫_a^x m) m(x)`.
pub fn build_thm1_weight(m: &Envelope, h: f64, energy: f64) -> Result<WeightFunction> {
    if !(h > 0.0 && energy > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and E > 0, got h = {h}, E = {energy}"
        )));
    }
    let k = weight_constant(energy);
    let total = m.total();
    let profile = m.profile().clone();
    let extent = (profile.core_radius() * 1.5).max(4.0);
    let mut special_points = profile.breakpoints().to_vec();
    special_points.retain(|x| x.abs() <= extent);
    let support = profile.support_radius().map(|r| (-r, r));
    if total == 0.0 {
        let zero: RealFn = Arc::new(|_| 0.0);
        return Ok(WeightFunction {
            kind: WeightKind::Thm1Sinh,
            k: Some(k),
            meta: WeightMeta::Sinh {
                median: 0.0,
                total,
                degenerate: true,
            },
            w: zero.clone(),
            w_prime: zero,
            total_variation: 0.0,
            special_points,
            singular_points: profile.singular_points().to_vec(),
            extent,
            support,
        });
    }
    let median = median_point(m, total)?;
    let big_k = k * total / h;
    let half = 0.5 * total;
    // w = e^{φ - K/2} - e^{-φ - K/2} with φ = (k/h)(C(x) - C(a)), C(a) = ∫m/2
    let phi = {
        let p = profile.clone();
        move |x: f64| k / h * (p.cumulative_abs(x).unwrap_or(f64::NAN) - half)
    };
    let phi_w = phi.clone();
    let w: RealFn = Arc::new(move |x| {
        let f = phi_w(x);
        (f - 0.5 * big_k).exp() - (-f - 0.5 * big_k).exp()
    });
    let p = profile.clone();
    let w_prime: RealFn = Arc::new(move |x| {
        let mx = p.eval(x).abs();
        if mx == 0.0 {
            return 0.0;
        }
        let f = phi(x);
        k / h * ((f - 0.5 * big_k).exp() + (-f - 0.5 * big_k).exp()) * mx
    });
    Ok(WeightFunction {
        kind: WeightKind::Thm1Sinh,
        k: Some(k),
        meta: WeightMeta::Sinh {
            median,
            total,
            degenerate: false,
        },
        w,
        w_prime,
        total_variation: 2.0 * (1.0 - (-big_k).exp()),
        special_points,
        singular_points: profile.singular_points().to_vec(),
        extent,
        support,
    })
}

/// Lower bound `(2k/h) exp(-(k/2h)∫m) m(x)` for the sinh weight's derivative.
pub fn thm1_lower_bound(m: &Envelope, h: f64, energy: f64, x: f64) -> f64 {
    let k = weight_constant(energy);
    2.0 * k / h * (-0.5 * k * m.total() / h).exp() * m.eval(x)
}

/// Bisection for `C(a) = ∫m / 2`, to an absolute tolerance of 1e-12.
fn median_point(m: &Envelope, total: f64) -> Result<f64> {
    let target = 0.5 * total;
    let mut lo = -1.0;
    while m.cumulative(lo)? > target {
        lo *= 2.0;
    }
    let mut hi = 1.0;
    while m.cumulative(hi)? < target {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if m.cumulative(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the plateau of C (where m vanishes) makes any point of it a median;
    // pick its midpoint so symmetric envelopes give a = 0
    let c = 0.5 * (lo + hi);
    let tol = 1e-13 * total.max(1.0);
    let plateau_edge = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if (m.cumulative(mid)? - target).abs() <= tol {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let scale = c.abs().max(1.0) * 1e6;
    let left = plateau_edge(c, c - scale)?;
    let right = plateau_edge(c, c + scale)?;
    if right - left > 1e-9 {
        Ok(0.5 * (left + right))
    } else {
        Ok(c)
    }
}

/// The odd exterior weight: zero on `[-R, R]`,
/// `w(x) = 1 - (1+R)^δ / (1+x)^δ` for `x > R`, with
/// `w'(x) = δ (1+R)^δ (1+|x|)^{-1-δ}` for `|x| > R`.
pub fn build_thm2_weight(r: f64, delta: f64) -> Result<WeightFunction> {
    if !(r > 0.0 && delta > 0.0 && r.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need R > 0 and delta > 0, got R = {r}, delta = {delta}"
        )));
    }
    let c = (1.0 + r).powf(delta);
    let w: RealFn = Arc::new(move |x: f64| {
        if x.abs() <= r {
            0.0
        } else {
            x.signum() * (1.0 - c * (1.0 + x.abs()).powf(-delta))
        }
    });
    let w_prime: RealFn = Arc::new(move |x: f64| {
        if x.abs() <= r {
            0.0
        } else {
            delta * c * (1.0 + x.abs()).powf(-1.0 - delta)
        }
    });
    Ok(WeightFunction {
        kind: WeightKind::Thm2Exterior,
        k: None,
        meta: WeightMeta::Exterior { radius: r, delta },
        w,
        w_prime,
        total_variation: 2.0,
        special_points: vec![-r, r],
        singular_points: Vec::new(),
        extent: (2.0 * r).max(4.0),
        support: None,
    })
}

/// Custom weights accepted from configuration:
/// `const:c`, `tanh:s` (w = tanh(x/s)) and `arctan:s` (w = (2/π) arctan(x/s)).
pub fn build_custom_weight(text: &str) -> Result<WeightFunction> {
    let (name, arg) = text.split_once(':').unwrap_or((text, ""));
    let value: f64 = if arg.is_empty() {
        1.0
    } else {
        arg.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad weight parameter `{arg}`")))?
    };
    let (w, w_prime, tv, support): (RealFn, RealFn, f64, Option<(f64, f64)>) = match name.trim() {
        "const" => {
            if value.abs() > 1.0 {
                return Err(Error::InvalidArgument(format!("constant weight {value} exceeds 1")));
            }
            (Arc::new(move |_| value), Arc::new(|_| 0.0), 0.0, Some((0.0, 0.0)))
        }
        "tanh" if value > 0.0 => (
            Arc::new(move |x: f64| (x / value).tanh()),
            Arc::new(move |x: f64| {
                let c = (x / value).cosh();
                1.0 / (value * c * c)
            }),
            2.0,
            None,
        ),
        "arctan" if value > 0.0 => (
            Arc::new(move |x: f64| 2.0 / PI * (x / value).atan()),
            Arc::new(move |x: f64| 2.0 / (PI * value * (1.0 + (x / value).powi(2)))),
            2.0,
            None,
        ),
        _ => return Err(Error::Config(format!("unknown custom weight `{text}`"))),
    };
    let weight = WeightFunction {
        kind: WeightKind::Custom,
        k: None,
        meta: WeightMeta::Custom {
            description: text.to_string(),
        },
        w,
        w_prime,
        total_variation: tv,
        special_points: Vec::new(),
        singular_points: Vec::new(),
        extent: (4.0 * value.abs()).max(4.0),
        support,
    };
    let check = weight.validate(2000);
    if !check.pass {
        return Err(Error::InvalidArgument(format!(
            "custom weight `{text}` fails validation: {check:?}"
        )));
    }
    Ok(weight)
}

#[derive(Debug, Clone, Serialize)]
pub struct W2Report {
    pub samples: usize,
    /// `min (w' - (k/h)|V w|)`
    pub min_margin: f64,
    pub worst_x: f64,
    pub pass: bool,
}

/// Samples `w' - (k/h)|V w|` with `k = 4/E^{1/2}` on a refined grid. The
/// condition is pointwise almost everywhere, so samples where `V` itself is
/// infinite are skipped.
pub fn verify_w2_condition(w: &WeightFunction, v: &Potential, h: f64, energy: f64) -> W2Report {
    let k = weight_constant(energy);
    let mut xs = w.check_grid(20_000);
    xs.extend(v.check_grid(20_000));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut min_margin = f64::INFINITY;
    let mut worst_x = f64::NAN;
    let mut pass = true;
    xs.retain(|&x| v.eval(x).is_finite());
    for &x in &xs {
        let lhs = k / h * (v.eval(x) * w.w(x)).abs();
        let rhs = w.w_prime(x);
        let margin = rhs - lhs;
        if margin < min_margin {
            min_margin = margin;
            worst_x = x;
        }
        if !(margin >= -1e-12 * lhs.max(rhs)) {
            pass = false;
        }
    }
    W2Report {
        samples: xs.len(),
        min_margin,
        worst_x,
        pass,
    }
}
