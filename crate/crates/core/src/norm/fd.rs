//! Second-order finite differences for `P - E - iε` on `[-L, L]` with
//! Dirichlet ends.
//!
//! The potential enters through cell averages `∫_cell V / Δx`, which are
//! meaningful for any `V ∈ L¹`, and `a²` likewise through its cell masses.
//! The grid is aligned so that the support edges `±R` and the origin are
//! nodes, which keeps the jump of a truncated potential symmetric inside one
//! cell and the scheme second order; Richardson extrapolation over one
//! halving of `Δx` removes the leading error.

use num_complex::Complex64;

use super::krylov::{dense_norm, operator_norm, LinearMap};
use super::weight::{NormWeight, WeightSupport};
use super::{
    dissipative_tail_bound, extrapolate_truncation, relative_change, zero_estimate, Backend, Discretization,
    NormEstimate, NormOptions, REFINEMENT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::jost::{check_regime, wavenumber};
use crate::potential::Potential;

/// Kernel decay `e^{-2 Im λ D}` required across the margin `D` between the
/// weight and the Dirichlet boundary.
const BOUNDARY_DECAY: f64 = 1e-4;
const TRUNCATION_STEPS: usize = 4;
/// Largest number of unknowns of a single solve.
const MAX_UNKNOWNS: usize = 4_000_000;

/// LU factorization with partial pivoting of a complex tridiagonal matrix.
#[derive(Debug, Clone)]
struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(mut dl: Vec<Complex64>, mut d: Vec<Complex64>, mut du: Vec<Complex64>) -> Result<Self> {
        let n = d.len();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] == Complex64::new(0.0, 0.0) {
                    return Err(Error::InvalidArgument("singular finite-difference matrix".into()));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument("singular finite-difference matrix".into()));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    fn solve(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let t = self.dl[i] * b[i];
                b[i + 1] -= t;
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// `diag(a) (P_Δ - E - iε)^{-1} diag(a)` on the interior nodes of a uniform
/// grid.
pub struct FdOperator {
    lu: TridiagonalLu,
    a: Vec<f64>,
    pub spacing: f64,
    pub radius: f64,
}

impl FdOperator {
    /// Grid `x_i = iΔx`, `|i| < L/Δx`; `L` must be a multiple of `Δx`.
    /// The weight is cut to `[-weight_radius, weight_radius]`.
    pub fn new(
        v: &Potential,
        h: f64,
        energy: f64,
        eps: f64,
        a: &NormWeight,
        spacing: f64,
        radius: f64,
        weight_radius: f64,
    ) -> Result<Self> {
        let m = (radius / spacing).round() as i64;
        if m < 1 {
            return Err(Error::InvalidArgument(format!(
                "grid radius {radius} below spacing {spacing}"
            )));
        }
        let n = (2 * m - 1) as usize;
        if n > MAX_UNKNOWNS {
            return Err(Error::InvalidArgument(format!(
                "finite-difference grid of {n} unknowns is too large"
            )));
        }
        let x: Vec<f64> = (1 - m..m).map(|i| i as f64 * spacing).collect();
        let core = v.support_radius();
        let mut diag = Vec::with_capacity(n);
        let z = Complex64::new(energy, eps);
        let kinetic = h * h / (spacing * spacing);
        for &xi in &x {
            let (lo, hi) = (xi - 0.5 * spacing, xi + 0.5 * spacing);
            let vbar = match core {
                Some(r) if lo >= r || hi <= -r => 0.0,
                _ => v.integrate(lo, hi)? / spacing,
            };
            diag.push(Complex64::new(2.0 * kinetic + vbar, 0.0) - z);
        }
        let off = vec![Complex64::new(-kinetic, 0.0); n.saturating_sub(1)];
        let lu = TridiagonalLu::new(off.clone(), diag, off)?;
        let a_vals = x
            .iter()
            .map(|&xi| {
                let lo = (xi - 0.5 * spacing).max(-weight_radius);
                let hi = (xi + 0.5 * spacing).min(weight_radius);
                if lo >= hi {
                    0.0
                } else {
                    (a.mass(lo, hi) / spacing).sqrt()
                }
            })
            .collect();
        Ok(Self {
            lu,
            a: a_vals,
            spacing,
            radius,
        })
    }

    fn resolve(&self, x: &[Complex64], conjugate: bool) -> Vec<Complex64> {
        let mut b: Vec<Complex64> = x
            .iter()
            .zip(&self.a)
            .map(|(v, a)| if conjugate { v.conj() * a } else { v * a })
            .collect();
        self.lu.solve(&mut b);
        b.iter()
            .zip(&self.a)
            .map(|(v, a)| if conjugate { v.conj() * a } else { v * a })
            .collect()
    }
}

impl LinearMap for FdOperator {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.resolve(x, false)
    }

    /// The matrix is complex symmetric, so `G^H y = conj(G conj(y))`.
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.resolve(y, true)
    }
}

/// Grid spacing for the requested points per local wavelength, aligned so
/// that `unit` (the support radius) is a whole number of cells.
fn aligned_spacing(v: &Potential, h: f64, energy: f64, ppw: f64) -> Result<f64> {
    let unit = match v.support_radius() {
        Some(r) if r > 0.0 => r,
        _ => 1.0,
    };
    // deepest cell-averaged well on a coarse grid sets the local wavelength
    let extent = v.core_radius().max(1.0);
    let cells = 200;
    let mut depth = 0.0f64;
    for k in 0..cells {
        let lo = -extent + 2.0 * extent * k as f64 / cells as f64;
        let hi = lo + 2.0 * extent / cells as f64;
        depth = depth.max(-v.integrate(lo, hi)? / (hi - lo));
    }
    let e_eff = energy + depth.max(0.0);
    let target = 2.0 * std::f64::consts::PI * h / (e_eff.sqrt() * ppw);
    Ok(unit / (unit / target).ceil())
}

struct Richardson {
    value: f64,
    coarse: f64,
    fine: f64,
    iterations: usize,
    nodes: usize,
    dense: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn richardson(
    v: &Potential,
    h: f64,
    energy: f64,
    eps: f64,
    a: &NormWeight,
    spacing: f64,
    radius: f64,
    weight_radius: f64,
    options: &NormOptions,
) -> Result<Richardson> {
    let coarse_op = FdOperator::new(v, h, energy, eps, a, spacing, radius, weight_radius)?;
    let coarse = operator_norm(&coarse_op, &options.krylov)?;
    let fine_op = FdOperator::new(v, h, energy, eps, a, 0.5 * spacing, radius, weight_radius)?;
    let fine = operator_norm(&fine_op, &options.krylov)?;
    let dense = (fine_op.dim() <= options.dense_oracle_limit).then(|| dense_norm(&fine_op));
    Ok(Richardson {
        value: ((4.0 * fine.value - coarse.value) / 3.0).max(0.0),
        coarse: coarse.value,
        fine: fine.value,
        iterations: fine.iterations,
        nodes: fine_op.dim(),
        dense,
    })
}

/// `‖a (P - E - iε)^{-1} a‖` from a finite-difference matrix. Requires
/// `ε > 0`: the Dirichlet truncation is controlled by the decay `e^{-Im λ |x-y|}`
/// of the resolvent kernel, which is lost at `ε = 0`.
pub fn norm_via_matrix(
    v: &Potential,
    h: f64,
    energy: f64,
    eps: f64,
    a: &NormWeight,
    options: &NormOptions,
) -> Result<NormEstimate> {
    check_regime(h, energy, eps)?;
    if eps <= 0.0 {
        return Err(Error::NotApplicable(
            "the matrix backend needs eps > 0; use the kernel backend for the outgoing limit".into(),
        ));
    }
    if a.is_zero() {
        return Ok(zero_estimate(Backend::FdMatrix, a));
    }
    let lambda = wavenumber(h, energy, eps);
    let margin = -BOUNDARY_DECAY.ln() / (2.0 * lambda.im);
    let spacing = aligned_spacing(v, h, energy, options.points_per_wavelength)?;
    let align = |l: f64| (l / spacing).ceil() * spacing;
    let v_core = v.core_radius();

    let radii: Vec<f64> = match (a.support, options.truncation) {
        (_, Some(l)) => vec![l],
        (WeightSupport::Bounded { lo, hi }, None) => vec![lo.abs().max(hi.abs())],
        _ => {
            let l0 = 2.0 * (a.core_radius().max(v_core) + 1.0);
            (0..TRUNCATION_STEPS).map(|k| l0 * 4f64.powi(k as i32)).collect()
        }
    };
    // a fixed truncation puts the Dirichlet boundary on the weight's edge
    let boundary = |ra: f64| {
        if options.truncation.is_some() {
            align(ra)
        } else {
            align(ra.max(v_core) + margin)
        }
    };

    let mut ladder: Vec<(f64, f64)> = Vec::new();
    let mut last: Option<(Richardson, f64)> = None;
    for &ra in &radii {
        let l = boundary(ra);
        if (2.0 * l / (0.5 * spacing)) as usize > MAX_UNKNOWNS && !ladder.is_empty() {
            break;
        }
        let r = richardson(v, h, energy, eps, a, spacing, l, ra, options)?;
        ladder.push((ra, r.value));
        let tail = dissipative_tail_bound(a, ra, eps);
        let done = tail <= options.tail_tolerance * r.value;
        last = Some((r, l));
        if done {
            break;
        }
    }
    let (fine, l) = last.expect("at least one truncation radius");
    let &(ra, truncated) = ladder.last().expect("nonempty ladder");
    let tail = dissipative_tail_bound(a, ra, eps);
    let value = match ladder.len() {
        n if n >= 2 => extrapolate_truncation(a, ladder[n - 2], ladder[n - 1], tail),
        _ => truncated,
    };

    // doubling test: the boundary margin doubled, on the coarse grid
    let truncation_change = if options.truncation.is_none() {
        let far = align(ra.max(v_core) + 2.0 * margin);
        let op = FdOperator::new(v, h, energy, eps, a, spacing, far, ra)?;
        let far_value = operator_norm(&op, &options.krylov)?.value;
        Some(relative_change(fine.coarse, far_value))
    } else {
        None
    };
    let change = relative_change(fine.coarse, fine.fine).min(relative_change(fine.fine, fine.value));
    let converged = change <= REFINEMENT_TOLERANCE && truncation_change.map_or(true, |c| c <= REFINEMENT_TOLERANCE);
    Ok(NormEstimate {
        value,
        backend: Backend::FdMatrix,
        discretization: Discretization {
            grid_spacing: 0.5 * spacing,
            truncation_radius: l,
            points_per_wavelength: 2.0 * options.points_per_wavelength,
            nodes: fine.nodes,
        },
        convergence_flag: converged,
        refinement_change: change,
        weight_spec: a.description.clone(),
        truncated_value: truncated,
        tail_bound: tail,
        truncation_change,
        iterations: fine.iterations,
        dense_oracle: fine.dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::catalog_get;
    use nalgebra::DMatrix;

    #[test]
    fn tridiagonal_solve_matches_dense() {
        let n = 9;
        let dl: Vec<Complex64> = (0..n - 1).map(|i| Complex64::new(3.0 + i as f64, 0.5)).collect();
        let d: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.1 * i as f64 - 0.3, -0.2)).collect();
        let du: Vec<Complex64> = (0..n - 1).map(|i| Complex64::new(-1.0, 0.1 * i as f64)).collect();
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else if i == j + 1 {
                dl[j]
            } else if j == i + 1 {
                du[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let lu = TridiagonalLu::new(dl, d, du).unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        let r = &m * nalgebra::DVector::from_column_slice(&x) - nalgebra::DVector::from_column_slice(&b);
        assert!(r.norm() < 1e-12 * 30.0, "{}", r.norm());
    }

    #[test]
    fn refuses_zero_eps() {
        let v = catalog_get("free", &[]).unwrap();
        let r = norm_via_matrix(
            &v,
            1.0,
            1.0,
            0.0,
            &NormWeight::indicator(-1.0, 1.0),
            &NormOptions::default(),
        );
        assert!(matches!(r, Err(Error::NotApplicable(_))));
        let z = norm_via_matrix(&v, 1.0, 1.0, 0.1, &NormWeight::zero(), &NormOptions::default()).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn free_box_matches_dirichlet_spectrum() {
        // a ≡ 1 on the whole box: the norm is 1 / min |μ_k - z| over the
        // discrete Dirichlet eigenvalues μ_k
        let v = catalog_get("free", &[]).unwrap();
        let (h, e, eps, l) = (1.0, 1.0, 0.1, 10.0);
        let spacing = 0.05;
        let a = NormWeight::indicator(-l, l);
        let op = FdOperator::new(&v, h, e, eps, &a, spacing, l, l).unwrap();
        let n = op.dim();
        let exact = (1..=n)
            .map(|k| {
                let mu = 2.0 * h * h / (spacing * spacing)
                    * (1.0 - (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos());
                1.0 / Complex64::new(mu - e, -eps).norm()
            })
            .fold(0.0, f64::max);
        let est = operator_norm(&op, &Default::default()).unwrap().value;
        assert!((est - exact).abs() <= 1e-9 * exact, "{est} vs {exact}");
    }
}
