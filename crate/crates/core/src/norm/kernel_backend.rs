//! Nyström discretization of `a K a` with the Jost-solution kernel.
//!
//! The kernel `K(x, y) = c u₋(min) u₊(max)`, `c = -1/(h²W)`, is semi-separable,
//! so `(a K a f)(x)` is assembled from two running integrals that are
//! evaluated panel by panel with the spectral integration matrices of the
//! mesh. This resolves the kink of `K` on the diagonal to full Gauss order and
//! applies the operator in `O(n)`.

use std::sync::Arc;

use num_complex::Complex64;

use super::krylov::{dense_norm, operator_norm, LinearMap};
use super::weight::{NormWeight, WeightSupport};
use super::{
    dissipative_tail_bound, extrapolate_truncation, relative_change, zero_estimate, Backend, Discretization,
    NormEstimate, NormOptions, REFINEMENT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::jost::{solve_pair, JostPair};
use crate::mesh::{PanelMesh, PANEL_ORDER};
use crate::potential::Potential;
use crate::quadrature::{GaussRule, Singularity};

/// Phase `|λ| w` allowed per panel inside / outside the Jost window.
const PHASE_INSIDE: f64 = 4.0;
const PHASE_OUTSIDE: f64 = 8.0;
/// Largest ratio `max a² / min a²` on a panel before it is split.
const DENSITY_RATIO: f64 = 54.6; // e^4
/// Number of fourfold truncation steps for weights of unbounded support.
const TRUNCATION_STEPS: usize = 4;
/// Truncation radius cap, in units of `1 / Im λ`, keeping the growing Jost
/// solutions in floating-point range.
const DECAY_LENGTHS: f64 = 300.0;

/// `M = Q^{1/2} T Q^{-1/2}` with `T = D_a c (D₊ C_L D₋ + D₋ C_R D₊) D_a`.
pub struct KernelOperator {
    mesh: PanelMesh,
    a: Vec<f64>,
    sqrt_q: Vec<f64>,
    up: Vec<Complex64>,
    um: Vec<Complex64>,
    c: Complex64,
}

impl KernelOperator {
    pub fn base_mesh(pair: &JostPair, a: &NormWeight, intervals: &[(f64, f64)], v: &Potential) -> PanelMesh {
        resolving_mesh(pair, a, intervals, v, &[])
    }

    /// Every panel of `mesh` bisected once.
    pub fn bisected(mesh: &PanelMesh, a: &NormWeight, v: &Potential) -> PanelMesh {
        let cells: Vec<(f64, f64)> = mesh.panels.iter().map(|p| (p.a, p.b)).collect();
        let split = |lo: f64, hi: f64| {
            cells
                .binary_search_by(|c| c.0.total_cmp(&lo))
                .map_or(false, |i| cells[i].1 == hi)
        };
        PanelMesh::build(&cells, &[], &singular_points(a, v), split, mesh.rule.clone())
    }

    pub fn new(pair: &JostPair, a: &NormWeight, mesh: PanelMesh) -> Self {
        let x = mesh.nodes();
        let a_vals: Vec<f64> = x.iter().map(|&x| a.a(x)).collect();
        let sqrt_q: Vec<f64> = mesh.weights().iter().map(|q| q.sqrt()).collect();
        let up: Vec<Complex64> = x.iter().map(|&x| pair.plus.eval(x).0).collect();
        let um: Vec<Complex64> = x.iter().map(|&x| pair.minus.eval(x).0).collect();
        let h = pair.plus.h;
        let c = -1.0 / (h * h * pair.scattering.w);
        KernelOperator {
            mesh,
            a: a_vals,
            sqrt_q,
            up,
            um,
            c,
        }
    }

    pub fn mesh(&self) -> &PanelMesh {
        &self.mesh
    }

    fn max_panel_width(&self) -> f64 {
        self.mesh.panels.iter().map(|p| p.width()).fold(0.0, f64::max)
    }
}

/// Mesh over `intervals` resolving the oscillation of the Jost solutions,
/// every feature of `V` and `a`, the extra breakpoints, and the variation of
/// `a²`.
pub(crate) fn resolving_mesh(
    pair: &JostPair,
    a: &NormWeight,
    intervals: &[(f64, f64)],
    v: &Potential,
    extra_breaks: &[f64],
) -> PanelMesh {
    let lambda = pair.scattering.lambda.norm();
    let (jlo, jhi) = pair.plus.window();
    let mut breaks: Vec<f64> = pair.plus.mesh().edges();
    breaks.extend_from_slice(&a.breakpoints);
    breaks.extend_from_slice(v.breakpoints());
    breaks.extend_from_slice(extra_breaks);
    let singular = singular_points(a, v);
    let singular_at: Vec<f64> = singular.iter().filter(|s| s.exponent > 0.0).map(|s| s.at).collect();
    let split = |lo: f64, hi: f64| {
        let w = hi - lo;
        let inside = hi > jlo && lo < jhi;
        let phase = if inside { PHASE_INSIDE } else { PHASE_OUTSIDE };
        if lambda * w > phase {
            return true;
        }
        let dist = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        };
        if !inside && w > 0.5 * (1.0 + dist) {
            return true;
        }
        if singular_at.contains(&lo) || singular_at.contains(&hi) {
            return false;
        }
        let samples: Vec<f64> = (0..5).map(|k| a.density(lo + w * k as f64 / 4.0)).collect();
        let max = samples.iter().copied().fold(0.0, f64::max);
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        min > 0.0 && max / min > DENSITY_RATIO
    };
    let rule = Arc::new(GaussRule::new(PANEL_ORDER));
    PanelMesh::build(intervals, &breaks, &singular, split, rule)
}

impl LinearMap for KernelOperator {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        let g: Vec<Complex64> = (0..n).map(|i| x[i] * (self.a[i] / self.sqrt_q[i])).collect();
        let fm: Vec<Complex64> = (0..n).map(|i| self.um[i] * g[i]).collect();
        let fp: Vec<Complex64> = (0..n).map(|i| self.up[i] * g[i]).collect();
        let left = self.mesh.cumulative_left(&fm);
        let right = self.mesh.cumulative_right(&fp);
        (0..n)
            .map(|i| self.c * (self.up[i] * left[i] + self.um[i] * right[i]) * (self.a[i] * self.sqrt_q[i]))
            .collect()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = y.len();
        let z: Vec<Complex64> = (0..n).map(|i| y[i] * (self.a[i] * self.sqrt_q[i])).collect();
        let zp: Vec<Complex64> = (0..n).map(|i| self.up[i].conj() * z[i]).collect();
        let zm: Vec<Complex64> = (0..n).map(|i| self.um[i].conj() * z[i]).collect();
        let left = self.mesh.cumulative_left_transpose(&zp);
        let right = self.mesh.cumulative_right_transpose(&zm);
        let cc = self.c.conj();
        (0..n)
            .map(|i| cc * (self.um[i].conj() * left[i] + self.up[i].conj() * right[i]) * (self.a[i] / self.sqrt_q[i]))
            .collect()
    }
}

fn singular_points(a: &NormWeight, v: &Potential) -> Vec<Singularity> {
    let mut out = a.singular_points.clone();
    out.extend_from_slice(v.singular_points());
    out
}

struct Solve {
    value: f64,
    iterations: usize,
    nodes: usize,
    spacing: f64,
    dense: Option<f64>,
}

fn solve_on(
    pair: &JostPair,
    a: &NormWeight,
    v: &Potential,
    l: f64,
    refined: bool,
    options: &NormOptions,
) -> Result<Solve> {
    let intervals = a.intervals(l);
    if intervals.is_empty() {
        return Ok(Solve {
            value: 0.0,
            iterations: 0,
            nodes: 0,
            spacing: 0.0,
            dense: None,
        });
    }
    let mut mesh = KernelOperator::base_mesh(pair, a, &intervals, v);
    if refined {
        mesh = KernelOperator::bisected(&mesh, a, v);
    }
    let op = KernelOperator::new(pair, a, mesh);
    let it = operator_norm(&op, &options.krylov)?;
    let dense = (op.dim() <= options.dense_oracle_limit).then(|| dense_norm(&op));
    Ok(Solve {
        value: it.value,
        iterations: it.iterations,
        nodes: op.dim(),
        spacing: op.max_panel_width(),
        dense,
    })
}

/// `‖a (P - E - iε)^{-1} a‖` from the Jost kernel. `V` must be compactly
/// supported; `ε = 0` gives the outgoing limit.
///
/// Weights of unbounded support are truncated to `[-L, L]` for a fourfold
/// ladder of radii. The reported value extrapolates the last two truncated
/// norms linearly in the discarded mass `t(L) = ∫_{|x|>L} a²`, clamped between
/// the finest truncated norm and that norm plus a rigorous bound on the
/// discarded part.
pub fn norm_via_kernel(
    v: &Potential,
    h: f64,
    energy: f64,
    eps: f64,
    a: &NormWeight,
    options: &NormOptions,
) -> Result<NormEstimate> {
    if v.support_radius().is_none() {
        return Err(Error::MissingSupport(v.label()));
    }
    let pair = solve_pair(v, h, energy, eps)?;
    if a.is_zero() {
        return Ok(zero_estimate(Backend::KernelNystrom, a));
    }
    let lambda = pair.scattering.lambda;
    let ppw = |spacing: f64| {
        let wavelength = 2.0 * std::f64::consts::PI / lambda.norm();
        PANEL_ORDER as f64 * wavelength / spacing
    };
    let (_, jhi) = pair.plus.window();

    let radii: Vec<f64> = match (a.support, options.truncation) {
        (_, Some(l)) => vec![l],
        (WeightSupport::Bounded { lo, hi }, None) => vec![lo.abs().max(hi.abs())],
        _ => {
            let l0 = 2.0 * jhi.max(a.core_radius() + 1.0);
            let cap = if lambda.im > 0.0 {
                DECAY_LENGTHS / lambda.im
            } else {
                f64::INFINITY
            };
            let mut out: Vec<f64> = (0..TRUNCATION_STEPS)
                .map(|k| l0 * 4f64.powi(k as i32))
                .filter(|&l| l <= cap)
                .collect();
            if out.is_empty() {
                out.push(cap);
            }
            out
        }
    };

    let mut ladder: Vec<(f64, f64)> = Vec::new();
    let mut last = None;
    for (k, &l) in radii.iter().enumerate() {
        let s = solve_on(&pair, a, v, l, false, options)?;
        ladder.push((l, s.value));
        let tail = tail_bound(&pair, a, l);
        last = Some(s);
        if tail <= options.tail_tolerance * ladder[k].1 {
            break;
        }
    }
    let fine = last.expect("at least one truncation radius");
    let &(l, truncated) = ladder.last().expect("nonempty ladder");
    let tail = tail_bound(&pair, a, l);
    let value = match ladder.len() {
        n if n >= 2 => extrapolate_truncation(a, ladder[n - 2], ladder[n - 1], tail),
        _ => truncated,
    };

    // refinement check: every panel bisected at the final radius
    let refined = solve_on(&pair, a, v, l, true, options)?;
    let change = relative_change(fine.value, refined.value);
    let shift = refined.value - truncated;
    Ok(NormEstimate {
        value: value + shift,
        backend: Backend::KernelNystrom,
        discretization: Discretization {
            grid_spacing: refined.spacing,
            truncation_radius: l,
            points_per_wavelength: ppw(refined.spacing),
            nodes: refined.nodes,
        },
        convergence_flag: change <= REFINEMENT_TOLERANCE,
        refinement_change: change,
        weight_spec: a.description.clone(),
        truncated_value: refined.value,
        tail_bound: tail,
        truncation_change: None,
        iterations: refined.iterations,
        dense_oracle: refined.dense,
    })
}

/// Upper bound on `‖a K a - χ_L a K a χ_L‖`, `χ_L = 1_{[-L, L]}`.
///
/// At `ε = 0` the kernel is bounded and the Hilbert–Schmidt norm of the
/// discarded part is at most `sup|K| (2 t(L) ∫a²)^{1/2}`. For `ε > 0` the
/// bound of [`dissipative_tail_bound`] applies.
fn tail_bound(pair: &JostPair, a: &NormWeight, l: f64) -> f64 {
    let t = a.tail_mass(l);
    if t == 0.0 {
        return 0.0;
    }
    let s = &pair.scattering;
    if s.eps > 0.0 {
        return dissipative_tail_bound(a, l, s.eps);
    }
    // sup |u±| over the line: nodal values inside the window, far-field
    // plane-wave amplitudes outside
    let sup = |sol: &crate::jost::JostSolution| {
        let [p, q] = sol.far_coefficients();
        sol.values()
            .iter()
            .map(|z| z.norm())
            .fold((p.norm() + q.norm()).max(1.0), f64::max)
    };
    let kmax = sup(&pair.plus).max(sup(&pair.minus)) / (s.h * s.h * s.w.norm());
    kmax * (2.0 * t * a.total()).sqrt()
}
