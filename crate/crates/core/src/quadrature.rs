//! Quadrature primitives: adaptive Gauss–Kronrod integration with explicit
//! handling of integrable power-law singularities, plus the fixed
//! Gauss–Legendre panel rule used by the collocation solvers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// An integrable singularity `|f(x)| ~ c |x - at|^(-exponent)` with
/// `exponent` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Singularity {
    pub at: f64,
    pub exponent: f64,
}

impl Singularity {
    pub fn new(at: f64, exponent: f64) -> Self {
        Self { at, exponent }
    }

    /// Power of the graded map `x = s + t^p` that cancels the singularity.
    pub fn grading_power(&self) -> f64 {
        1.0 / (1.0 - self.exponent)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One application of the 15-point Gauss–Kronrod rule; returns
/// `(estimate, error_estimate)` with the QUADPACK error heuristic.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration over a finite interval.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, settings: &QuadSettings) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    loop {
        let tol = settings.abs_tol.max(settings.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if !total.is_finite() {
            return Err(Error::QuadratureNonConvergence { a, b, error: total_err });
        }
        if count >= settings.max_intervals {
            // Report failure only when the estimate is far from the target;
            // the heuristic error estimate is pessimistic for smooth integrands.
            if total_err <= 100.0 * tol {
                return Ok(total);
            }
            return Err(Error::QuadratureNonConvergence { a, b, error: total_err });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // Interval can no longer be bisected in floating point.
            return Err(Error::QuadratureNonConvergence { a, b, error: total_err });
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        count += 1;
        if count % 64 == 0 {
            // resum to limit drift of the running totals
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Integrates `f` over `[a, b]`, splitting at every breakpoint and singular
/// point inside the interval. Next to a singular point `s` of exponent `α`
/// the substitution `x = s ± t^(1/(1-α))` removes the singularity.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    singular: &[Singularity],
    breaks: &[f64],
    settings: &QuadSettings,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate_piecewise(f, b, a, singular, breaks, settings).map(|v| -v);
    }
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(singular.iter().map(|s| s.at).filter(|&x| x > a && x < b));
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let singular_at = |x: f64| singular.iter().find(|s| s.at == x && s.exponent > 0.0).copied();
    let pieces = cuts.len() - 1;
    let piece_settings = QuadSettings {
        abs_tol: settings.abs_tol / pieces as f64,
        ..*settings
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        match (singular_at(p), singular_at(q)) {
            (None, None) => total += integrate_adaptive(f, p, q, &piece_settings)?,
            (Some(s), None) => total += integrate_graded(f, p, q, s.grading_power(), true, &piece_settings)?,
            (None, Some(s)) => total += integrate_graded(f, p, q, s.grading_power(), false, &piece_settings)?,
            (Some(sl), Some(sr)) => {
                let m = 0.5 * (p + q);
                total += integrate_graded(f, p, m, sl.grading_power(), true, &piece_settings)?;
                total += integrate_graded(f, m, q, sr.grading_power(), false, &piece_settings)?;
            }
        }
    }
    Ok(total)
}

fn integrate_graded<F: Fn(f64) -> f64>(
    f: &F,
    p: f64,
    q: f64,
    power: f64,
    singular_left: bool,
    settings: &QuadSettings,
) -> Result<f64> {
    let len = q - p;
    let t_max = len.powf(1.0 / power);
    let g = |t: f64| {
        let dx = t.powf(power);
        let jac = power * t.powf(power - 1.0);
        let x = if singular_left { p + dx } else { q - dx };
        f(x) * jac
    };
    integrate_adaptive(&g, 0.0, t_max, settings)
}

/// `∫_a^∞ f` through the map `x = a + t/(1-t)`; intended for integrands with
/// fast (exponential) decay.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, settings: &QuadSettings) -> Result<f64> {
    let g = |t: f64| {
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    integrate_adaptive(&g, 0.0, 1.0, settings)
}

/// Gauss–Legendre rule on `[-1, 1]` with everything the panel solvers need:
/// nodes, weights, barycentric weights and the spectral integration matrix
/// `S[i][j] = ∫_{-1}^{τ_i} ℓ_j(τ) dτ` for the Lagrange basis `ℓ_j`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary: Vec<f64>,
    pub integration: Vec<Vec<f64>>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "panel rule needs at least two nodes");
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("nonzero order"));
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        let bary = (0..order)
            .map(|j| {
                let prod: f64 = (0..order).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
                1.0 / prod
            })
            .collect();

        // ℓ_j = Σ_k c_jk P_k with c_jk = w_j P_k(τ_j) (2k+1)/2 (exact for GL).
        let p_at_nodes: Vec<Vec<f64>> = nodes.iter().map(|&t| legendre_values(t, order + 1)).collect();
        let mut integration = vec![vec![0.0; order]; order];
        for (i, row) in integration.iter_mut().enumerate() {
            let ti = nodes[i];
            let pi = &p_at_nodes[i];
            // ∫_{-1}^{τ} P_k = τ + 1 for k = 0, (P_{k+1} - P_{k-1})/(2k+1) otherwise
            let ints: Vec<f64> = (0..order)
                .map(|k| {
                    if k == 0 {
                        ti + 1.0
                    } else {
                        (pi[k + 1] - pi[k - 1]) / (2 * k + 1) as f64
                    }
                })
                .collect();
            for (j, entry) in row.iter_mut().enumerate() {
                let pj = &p_at_nodes[j];
                *entry = (0..order)
                    .map(|k| weights[j] * pj[k] * (2 * k + 1) as f64 * 0.5 * ints[k])
                    .sum();
            }
        }
        Self {
            nodes,
            weights,
            bary,
            integration,
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Barycentric Lagrange weights `ℓ_j(τ)` for evaluation at `τ`.
    pub fn lagrange_at(&self, tau: f64) -> Vec<f64> {
        let n = self.order();
        if let Some(j) = self.nodes.iter().position(|&t| t == tau) {
            let mut out = vec![0.0; n];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..n).map(|j| self.bary[j] / (tau - self.nodes[j])).collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }
}

/// `P_0(t), …, P_{count-1}(t)` by the three-term recurrence.
pub fn legendre_values(t: f64, count: usize) -> Vec<f64> {
    let mut p = vec![0.0; count.max(2)];
    p[0] = 1.0;
    p[1] = t;
    for k in 1..count.max(2) - 1 {
        p[k + 1] = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p.truncate(count);
    p
}
