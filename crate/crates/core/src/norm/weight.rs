//! Multiplication weights `a(x)` for the weighted resolvent `a R a`, stored
//! through their squares `a²` and a primitive of `a²`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::potential::{Envelope, RealFn};
use crate::quadrature::Singularity;
use crate::weights::WeightFunction;

/// Where `a²` may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSupport {
    /// vanishes identically
    Empty,
    /// inside `[lo, hi]`
    Bounded { lo: f64, hi: f64 },
    /// everywhere except possibly the hole `(lo, hi)`
    Unbounded { hole: Option<(f64, f64)> },
}

#[derive(Clone)]
pub struct NormWeight {
    pub description: String,
    density: RealFn,
    primitive: RealFn,
    total: f64,
    pub support: WeightSupport,
    pub breakpoints: Vec<f64>,
    pub singular_points: Vec<Singularity>,
}

impl fmt::Debug for NormWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormWeight")
            .field("description", &self.description)
            .field("total", &self.total)
            .field("support", &self.support)
            .finish()
    }
}

impl NormWeight {
    /// `a = (w')^{1/2}`.
    pub fn from_weight(w: &WeightFunction) -> Self {
        let support = match (w.support(), w.total_variation()) {
            (_, tv) if tv == 0.0 => WeightSupport::Empty,
            (Some((lo, hi)), _) => WeightSupport::Bounded { lo, hi },
            (None, _) => {
                let hole = match w.meta {
                    crate::weights::WeightMeta::Exterior { radius, .. } => Some((-radius, radius)),
                    _ => None,
                };
                WeightSupport::Unbounded { hole }
            }
        };
        NormWeight {
            description: format!("sqrt(w') for {}", w.label()),
            density: w.w_prime_fn(),
            primitive: w.w_fn(),
            total: w.total_variation(),
            support,
            breakpoints: w.special_points().to_vec(),
            singular_points: w.singular_points().to_vec(),
        }
    }

    /// `a = m^{1/2}`.
    pub fn from_envelope(m: &Envelope) -> Self {
        let p = m.profile().clone();
        let total = m.total();
        let support = if total == 0.0 {
            WeightSupport::Empty
        } else {
            match p.support_radius() {
                Some(r) => WeightSupport::Bounded { lo: -r, hi: r },
                None => WeightSupport::Unbounded { hole: None },
            }
        };
        let (p1, p2) = (p.clone(), p.clone());
        NormWeight {
            description: format!("sqrt(m) for m = {}", p.label()),
            density: Arc::new(move |x| p1.eval(x).abs()),
            primitive: Arc::new(move |x| p2.cumulative_abs(x).unwrap_or(f64::NAN)),
            total,
            support,
            breakpoints: p.breakpoints().to_vec(),
            singular_points: p.singular_points().to_vec(),
        }
    }

    /// `a = 1_{|x|>R} (1 + |x|)^{-(1+δ)/2}`.
    pub fn exterior(r: f64, delta: f64) -> Self {
        let total = 2.0 * (1.0 + r).powf(-delta) / delta;
        NormWeight {
            description: format!("1_(|x|>{r}) (1+|x|)^(-(1+{delta})/2)"),
            density: Arc::new(move |x: f64| {
                if x.abs() <= r {
                    0.0
                } else {
                    (1.0 + x.abs()).powf(-1.0 - delta)
                }
            }),
            primitive: Arc::new(move |x: f64| {
                let half = (1.0 + r).powf(-delta) / delta;
                if x.abs() <= r {
                    half
                } else if x > 0.0 {
                    2.0 * half - (1.0 + x).powf(-delta) / delta
                } else {
                    (1.0 - x).powf(-delta) / delta
                }
            }),
            total,
            support: WeightSupport::Unbounded { hole: Some((-r, r)) },
            breakpoints: vec![-r, r],
            singular_points: Vec::new(),
        }
    }

    /// `a = 1` on `[lo, hi]`, zero elsewhere.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        NormWeight {
            description: format!("1_[{lo},{hi}]"),
            density: Arc::new(move |x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 }),
            primitive: Arc::new(move |x: f64| x.clamp(lo, hi) - lo),
            total: hi - lo,
            support: WeightSupport::Bounded { lo, hi },
            breakpoints: vec![lo, hi],
            singular_points: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        NormWeight {
            description: "0".into(),
            density: Arc::new(|_| 0.0),
            primitive: Arc::new(|_| 0.0),
            total: 0.0,
            support: WeightSupport::Empty,
            breakpoints: Vec::new(),
            singular_points: Vec::new(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    pub fn a(&self, x: f64) -> f64 {
        (self.density)(x).max(0.0).sqrt()
    }

    /// `∫_lo^hi a²` from the primitive.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        ((self.primitive)(hi) - (self.primitive)(lo)).max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `∫_{|x|>L} a²`.
    pub fn tail_mass(&self, l: f64) -> f64 {
        match self.support {
            WeightSupport::Empty => 0.0,
            WeightSupport::Bounded { lo, hi } if -l <= lo && hi <= l => 0.0,
            _ => (self.total - self.mass(-l, l)).max(0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.support, WeightSupport::Empty)
    }

    /// Intervals covering the support of `a²` inside `[-l, l]`.
    pub fn intervals(&self, l: f64) -> Vec<(f64, f64)> {
        match self.support {
            WeightSupport::Empty => Vec::new(),
            WeightSupport::Bounded { lo, hi } => {
                let (lo, hi) = (lo.max(-l), hi.min(l));
                if lo < hi {
                    vec![(lo, hi)]
                } else {
                    Vec::new()
                }
            }
            WeightSupport::Unbounded { hole: None } => vec![(-l, l)],
            WeightSupport::Unbounded { hole: Some((a, b)) } => {
                let mut out = Vec::new();
                if -l < a {
                    out.push((-l, a.min(l)));
                }
                if b < l {
                    out.push((b.max(-l), l));
                }
                out
            }
        }
    }

    /// Radius beyond which `a²` has no features: the support edge, hole edge
    /// or outermost breakpoint.
    pub fn core_radius(&self) -> f64 {
        let mut r = self.breakpoints.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        match self.support {
            WeightSupport::Bounded { lo, hi } => r = r.max(lo.abs()).max(hi.abs()),
            WeightSupport::Unbounded { hole: Some((a, b)) } => r = r.max(a.abs()).max(b.abs()),
            _ => {}
        }
        r
    }

    /// The weight for the dilated problem `x = s y`: `a_s(y) = a(s y)`.
    pub fn dilate(&self, s: f64) -> Self {
        let (d, p) = (self.density.clone(), self.primitive.clone());
        let scale = |(a, b): (f64, f64)| (a / s, b / s);
        NormWeight {
            description: format!("{}@dilate({s})", self.description),
            density: Arc::new(move |y| d(s * y)),
            primitive: Arc::new(move |y| p(s * y) / s),
            total: self.total / s,
            support: match self.support {
                WeightSupport::Empty => WeightSupport::Empty,
                WeightSupport::Bounded { lo, hi } => WeightSupport::Bounded { lo: lo / s, hi: hi / s },
                WeightSupport::Unbounded { hole } => WeightSupport::Unbounded { hole: hole.map(scale) },
            },
            breakpoints: self.breakpoints.iter().map(|b| b / s).collect(),
            singular_points: self
                .singular_points
                .iter()
                .map(|p| Singularity::new(p.at / s, p.exponent))
                .collect(),
        }
    }
}
