//! Audit of the energy argument behind the weighted resolvent estimate.
//!
//! For `u = (P - E - iε)^{-1} (w')^{1/2} v` and the pointwise energy
//! `F = |hu'|² + E|u|²`, the derivative
//! `(wF)' = -2w(w')^{1/2} Re v ū' + 2wV Re u ū' - 2w Re iε u ū' + w'|hu'|² + Ew'|u|²`
//! is assembled from nodal values of `u` and `u'` (never by differencing),
//! and the identities and inequalities of the argument are checked by
//! quadrature. The solution comes from the Jost kernel, so `V` must be
//! compactly supported.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::csv;
use crate::error::{Error, Result};
use crate::jost::solve_pair;
use crate::norm::NormWeight;
use crate::potential::Potential;
use crate::weights::{weight_constant, WeightFunction};

/// Decay `e^{-2 Im λ D}` of `|u|²` across the margin beyond the data.
const TAIL_DECAY: f64 = 1e-14;
/// Margin used at `ε = 0`, where `u` does not decay.
const UNDAMPED_MARGIN: f64 = 10.0;
/// Margin cap in units of `1 / Im λ`.
const DECAY_LENGTHS: f64 = 300.0;

/// Bounded test functions of bounded support.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    /// `exp(-(x-c)²/2σ²)` cut off at `|x - c| = 5σ`
    Bump {
        center: f64,
        width: f64,
    },
    /// `1` on `[lo, hi]` with `cos²` ramps of the given length on both sides
    Plateau {
        lo: f64,
        hi: f64,
        ramp: f64,
    },
    /// `e^{iξx}` times a bump
    Packet {
        center: f64,
        width: f64,
        frequency: f64,
    },
}

const BUMP_CUTOFF: f64 = 5.0;

impl TestFunction {
    /// Parses `zero`, `bump:c,σ`, `plateau:lo,hi,ramp` or `packet:c,σ,ξ`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = text.trim().split_once(':').unwrap_or((text.trim(), ""));
        let nums: Vec<f64> = args
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("test function '{text}': {e}")))?;
        let bad = || Error::InvalidArgument(format!("test function '{text}': wrong parameters"));
        let f = match (name, nums.as_slice()) {
            ("zero", []) => TestFunction::Zero,
            ("bump", [c, s]) if *s > 0.0 => TestFunction::Bump { center: *c, width: *s },
            ("plateau", [lo, hi, r]) if lo < hi && *r > 0.0 => TestFunction::Plateau {
                lo: *lo,
                hi: *hi,
                ramp: *r,
            },
            ("packet", [c, s, xi]) if *s > 0.0 => TestFunction::Packet {
                center: *c,
                width: *s,
                frequency: *xi,
            },
            ("zero" | "bump" | "plateau" | "packet", _) => return Err(bad()),
            _ => return Err(Error::InvalidArgument(format!("unknown test function '{name}'"))),
        };
        Ok(f)
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Zero => "zero".into(),
            TestFunction::Bump { center, width } => format!("bump:{center},{width}"),
            TestFunction::Plateau { lo, hi, ramp } => format!("plateau:{lo},{hi},{ramp}"),
            TestFunction::Packet {
                center,
                width,
                frequency,
            } => format!("packet:{center},{width},{frequency}"),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let bump = |c: f64, s: f64| {
            let t = (x - c) / s;
            if t.abs() > BUMP_CUTOFF {
                0.0
            } else {
                (-0.5 * t * t).exp()
            }
        };
        match *self {
            TestFunction::Zero => Complex64::new(0.0, 0.0),
            TestFunction::Bump { center, width } => Complex64::new(bump(center, width), 0.0),
            TestFunction::Plateau { lo, hi, ramp } => {
                let r = if x < lo - ramp || x > hi + ramp {
                    0.0
                } else if x < lo {
                    (0.5 * std::f64::consts::PI * (lo - x) / ramp).cos().powi(2)
                } else if x > hi {
                    (0.5 * std::f64::consts::PI * (x - hi) / ramp).cos().powi(2)
                } else {
                    1.0
                };
                Complex64::new(r, 0.0)
            }
            TestFunction::Packet {
                center,
                width,
                frequency,
            } => Complex64::from_polar(bump(center, width), frequency * x),
        }
    }

    /// Closed support, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Zero => None,
            TestFunction::Bump { center, width } | TestFunction::Packet { center, width, .. } => {
                Some((center - BUMP_CUTOFF * width, center + BUMP_CUTOFF * width))
            }
            TestFunction::Plateau { lo, hi, ramp } => Some((lo - ramp, hi + ramp)),
        }
    }

    /// Panel edges resolving the shape and oscillation.
    fn breaks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Zero => Vec::new(),
            TestFunction::Bump { center, width } => (-5..=5).map(|k| center + k as f64 * width).collect(),
            TestFunction::Packet {
                center,
                width,
                frequency,
            } => {
                let (lo, hi) = (center - BUMP_CUTOFF * width, center + BUMP_CUTOFF * width);
                let step = width.min(if frequency != 0.0 { 4.0 / frequency.abs() } else { width });
                let n = ((hi - lo) / step).ceil() as usize;
                (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
            }
            TestFunction::Plateau { lo, hi, ramp } => vec![lo - ramp, lo, hi, hi + ramp],
        }
    }

    /// `∫|v|²` by quadrature on the breaks.
    pub fn norm_sq(&self) -> f64 {
        let b = self.breaks();
        let rule = crate::quadrature::GaussRule::new(crate::mesh::PANEL_ORDER);
        b.windows(2)
            .map(|w| {
                let (m, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(t, q)| q * r * self.eval(m + r * t).norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Nodal record of one audited solve.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyTrace {
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    pub k: f64,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub quadrature_weights: Vec<f64>,
    #[serde(skip)]
    pub u: Vec<Complex64>,
    #[serde(skip)]
    pub du: Vec<Complex64>,
    #[serde(skip)]
    pub w: Vec<f64>,
    #[serde(skip)]
    pub w_prime: Vec<f64>,
    /// `F = |hu'|² + E|u|²`
    #[serde(skip)]
    pub f: Vec<f64>,
    #[serde(skip)]
    pub wf: Vec<f64>,
    /// `(wF)'` from the analytic expansion
    #[serde(skip)]
    pub dwf: Vec<f64>,
    /// `(wF)'` minus the lower bound obtained from `|w| <= 1` and the weight
    /// condition
    #[serde(skip)]
    pub margin: Vec<f64>,
    /// sum of the magnitudes of the terms entering each margin
    #[serde(skip)]
    pub margin_scale: Vec<f64>,
    /// `∫(wF)'` over the computational window
    pub flux_integral: f64,
    /// `[wF]` across the window ends, which `∫(wF)'` must reproduce
    pub boundary_flux: f64,
    /// `∫ w'F`, the scale of the flux identity
    pub flux_scale: f64,
    /// `∫ ε|u|²`
    pub dissipation: f64,
    /// `-Im ∫ (w')^{1/2} v ū`
    pub dissipation_source: f64,
    /// smallest `margin / margin_scale` (0 where both vanish)
    pub worst_margin: f64,
    pub window: (f64, f64),
}

impl EnergyTrace {
    /// `|∫(wF)'| / ∫w'F`.
    pub fn relative_flux(&self) -> f64 {
        if self.flux_scale == 0.0 {
            self.flux_integral.abs()
        } else {
            self.flux_integral.abs() / self.flux_scale
        }
    }

    /// Relative defect of `∫ε|u|² = -Im ∫(w')^{1/2} v ū`.
    pub fn dissipation_defect(&self) -> f64 {
        let scale = self.dissipation.abs().max(self.dissipation_source.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.dissipation - self.dissipation_source).abs() / scale
        }
    }

    fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.quadrature_weights.iter().enumerate().map(|(i, q)| q * f(i)).sum()
    }

    /// Writes `x,F,wF,dwF,margin`.
    pub fn dump_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        csv::write_header(out, &["x", "F", "wF", "dwF", "margin"])?;
        for i in 0..self.x.len() {
            csv::write_row(out, &[self.x[i], self.f[i], self.wf[i], self.dwf[i], self.margin[i]])?;
        }
        Ok(())
    }
}

/// Solves for `u` and records the energy identities.
pub fn audit_energy(
    v: &Potential,
    w: &WeightFunction,
    test: &TestFunction,
    h: f64,
    energy: f64,
    eps: f64,
) -> Result<EnergyTrace> {
    let pair = solve_pair(v, h, energy, eps)?;
    let lambda = pair.scattering.lambda;
    let k = w.k.unwrap_or_else(|| weight_constant(energy));
    let (jlo, jhi) = pair.plus.window();
    let (slo, shi) = test.support().unwrap_or((0.0, 0.0));
    let core = jhi.max(-jlo).max(shi.abs()).max(slo.abs());
    let margin = if lambda.im > 0.0 {
        (-TAIL_DECAY.ln() / (2.0 * lambda.im)).min(DECAY_LENGTHS / lambda.im)
    } else {
        UNDAMPED_MARGIN
    };
    let (lo, hi) = (-core - margin, core + margin);
    let a = NormWeight::from_weight(w);
    let mesh = crate::norm::resolving_mesh_for(&pair, &a, &[(lo, hi)], v, &test.breaks());
    let x = mesh.nodes();
    let q = mesh.weights();
    let n = x.len();

    let wv: Vec<f64> = x.iter().map(|&x| w.w(x)).collect();
    let wp: Vec<f64> = x.iter().map(|&x| w.w_prime(x).max(0.0)).collect();
    let vt: Vec<Complex64> = x.iter().map(|&x| test.eval(x)).collect();
    let src: Vec<Complex64> = (0..n).map(|i| vt[i] * wp[i].sqrt()).collect();
    let plus: Vec<(Complex64, Complex64)> = x.iter().map(|&x| pair.plus.eval(x)).collect();
    let minus: Vec<(Complex64, Complex64)> = x.iter().map(|&x| pair.minus.eval(x)).collect();
    let left = mesh.cumulative_left(&(0..n).map(|i| minus[i].0 * src[i]).collect::<Vec<_>>());
    let right = mesh.cumulative_right(&(0..n).map(|i| plus[i].0 * src[i]).collect::<Vec<_>>());
    let c = -1.0 / (h * h * pair.scattering.w);
    let u: Vec<Complex64> = (0..n)
        .map(|i| c * (plus[i].0 * left[i] + minus[i].0 * right[i]))
        .collect();
    let du: Vec<Complex64> = (0..n)
        .map(|i| c * (plus[i].1 * left[i] + minus[i].1 * right[i]))
        .collect();

    let vx: Vec<f64> = x.iter().map(|&x| v.eval(x)).collect();
    let ie = Complex64::new(0.0, eps);
    let mut f = Vec::with_capacity(n);
    let mut wf = Vec::with_capacity(n);
    let mut dwf = Vec::with_capacity(n);
    let mut margin_v = Vec::with_capacity(n);
    let mut scale_v = Vec::with_capacity(n);
    let mut worst = f64::INFINITY;
    for i in 0..n {
        let (ui, dui) = (u[i], du[i]);
        let sa = wp[i].sqrt();
        let kin = (h * dui).norm_sqr();
        let pot = energy * ui.norm_sqr();
        let fi = kin + pot;
        let uu = ui * dui.conj();
        let t_source = -2.0 * wv[i] * sa * (vt[i] * dui.conj()).re;
        let t_potential = 2.0 * wv[i] * vx[i] * uu.re;
        let t_absorb = -2.0 * wv[i] * (ie * uu).re;
        let t_weight = wp[i] * (kin + pot);
        let d = t_source + t_potential + t_absorb + t_weight;
        let lower =
            -2.0 * sa * (vt[i] * dui).norm() - 2.0 * h / k * wp[i] * uu.norm() - 2.0 * eps * (wv[i] * uu.norm()).abs()
                + t_weight;
        let m = d - lower;
        let scale =
            t_source.abs() + t_potential.abs() + t_absorb.abs() + t_weight.abs() + 2.0 * h / k * wp[i] * uu.norm();
        if scale > 0.0 {
            worst = worst.min(m / scale);
        }
        f.push(fi);
        wf.push(wv[i] * fi);
        dwf.push(d);
        margin_v.push(m);
        scale_v.push(scale);
    }
    let integrate = |g: &dyn Fn(usize) -> f64| (0..n).map(|i| q[i] * g(i)).sum::<f64>();
    let flux_integral = integrate(&|i| dwf[i]);
    let flux_scale = integrate(&|i| wp[i] * f[i]);
    let dissipation = integrate(&|i| eps * u[i].norm_sqr());
    let dissipation_source = -integrate(&|i| (src[i] * u[i].conj()).im);
    let ends = |x: f64| {
        let (p, m) = (pair.plus.eval(x), pair.minus.eval(x));
        // at the window ends one of the two running integrals vanishes
        let (ux, dux) = if x > 0.0 {
            (c * p.0 * left[n - 1], c * p.1 * left[n - 1])
        } else {
            (c * m.0 * right[0], c * m.1 * right[0])
        };
        w.w(x) * ((h * dux).norm_sqr() + energy * ux.norm_sqr())
    };
    // the running integrals at the extreme nodes equal the full integrals
    // because the source vanishes near the window ends
    let boundary_flux = ends(hi) - ends(lo);

    Ok(EnergyTrace {
        h,
        energy,
        eps,
        k,
        x,
        quadrature_weights: q,
        u,
        du,
        w: wv,
        w_prime: wp,
        f,
        wf,
        dwf,
        margin: margin_v,
        margin_scale: scale_v,
        flux_integral,
        boundary_flux,
        flux_scale,
        dissipation,
        dissipation_source,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        window: (lo, hi),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    /// `(E/7) ∫w'|u|² + (1/6) ∫w'|hu'|²`
    pub lhs: f64,
    /// `(15/2h²) ∫|v|²`
    pub rhs: f64,
    /// `lhs / rhs`, 0 when both vanish
    pub ratio: f64,
    pub pass: bool,
}

/// The a priori inequality `(E/7)∫w'|u|² + (1/6)∫w'|hu'|² <= (15/2h²)∫|v|²`.
pub fn audit_apriori_bound(trace: &EnergyTrace, v_norm_sq: f64) -> AprioriReport {
    let (h, e) = (trace.h, trace.energy);
    let lhs = e / 7.0 * trace.integrate(|i| trace.w_prime[i] * trace.u[i].norm_sqr())
        + trace.integrate(|i| trace.w_prime[i] * (h * trace.du[i]).norm_sqr()) / 6.0;
    let rhs = 15.0 / (2.0 * h * h) * v_norm_sq;
    let ratio = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    };
    AprioriReport {
        lhs,
        rhs,
        ratio,
        pass: ratio <= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{catalog_get, Envelope};
    use crate::weights::{build_thm1_weight, build_thm2_weight};

    #[test]
    fn zero_data_gives_zero_trace() {
        let v = catalog_get("free", &[]).unwrap();
        let w = build_thm2_weight(1.0, 1.0).unwrap();
        let t = audit_energy(&v, &w, &TestFunction::Zero, 1.0, 1.0, 0.1).unwrap();
        assert!(t.f.iter().all(|&f| f == 0.0));
        assert_eq!(t.flux_integral, 0.0);
        let r = audit_apriori_bound(&t, 0.0);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn free_flux_identity() {
        let v = catalog_get("free", &[]).unwrap();
        let w = build_thm2_weight(1.0, 1.0).unwrap();
        let bump = TestFunction::Bump {
            center: 0.3,
            width: 0.5,
        };
        let t = audit_energy(&v, &w, &bump, 1.0, 1.0, 0.1).unwrap();
        assert!(t.f.iter().all(|&f| f >= 0.0));
        assert!(t.relative_flux() <= 1e-6, "{}", t.relative_flux());
        assert!(t.dissipation_defect() <= 1e-6, "{}", t.dissipation_defect());
    }

    #[test]
    fn barrier_inequality_margin() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let w = build_thm1_weight(&Envelope::abs_of(&v), 0.5, 2.0).unwrap();
        let bump = TestFunction::Bump {
            center: 0.0,
            width: 0.4,
        };
        let t = audit_energy(&v, &w, &bump, 0.5, 2.0, 0.05).unwrap();
        assert!(t.worst_margin >= -1e-8, "{}", t.worst_margin);
        assert!(t.relative_flux() <= 1e-6, "{}", t.relative_flux());
        let r = audit_apriori_bound(&t, bump.norm_sq());
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn parses_test_functions() {
        assert_eq!(
            TestFunction::parse("bump:0,1").unwrap(),
            TestFunction::Bump {
                center: 0.0,
                width: 1.0
            }
        );
        assert!(TestFunction::parse("bump:0").is_err());
        assert!(TestFunction::parse("wiggle:1").is_err());
        let p = TestFunction::parse("packet:0,1,3").unwrap();
        assert_eq!(TestFunction::parse(&p.label()).unwrap(), p);
        let n = TestFunction::Bump {
            center: 0.0,
            width: 1.0,
        }
        .norm_sq();
        assert!((n - std::f64::consts::PI.sqrt()).abs() < 1e-6);
    }
}
