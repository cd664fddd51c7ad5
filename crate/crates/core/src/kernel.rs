//! The resolvent kernel `K(x, y) = -u₋(x) u₊(y) / (h² W)` for `x <= y`.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::csv;
use crate::error::{Error, Result};
use crate::jost::{solve_pair, JostPair, JostSolution, ScatteringData};
use crate::potential::Potential;

/// Relative rounding allowance for the exact exterior bounds: for the free
/// potential `|K|` attains the bound, so only floating-point noise separates
/// the two sides.
pub const ROUNDING_ALLOWANCE: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub struct KernelEval {
    pub scattering: ScatteringData,
    pub u_plus: JostSolution,
    pub u_minus: JostSolution,
    pub h: f64,
}

impl KernelEval {
    pub fn new(v: &Potential, h: f64, energy: f64, eps: f64) -> Result<Self> {
        Ok(Self::from_pair(solve_pair(v, h, energy, eps)?))
    }

    pub fn from_pair(pair: JostPair) -> Self {
        let h = pair.plus.h;
        Self {
            scattering: pair.scattering,
            u_plus: pair.plus,
            u_minus: pair.minus,
            h,
        }
    }

    /// `-1 / (h² W)`.
    pub fn prefactor(&self) -> Complex64 {
        -1.0 / (self.h * self.h * self.scattering.w)
    }

    pub fn value(&self, x: f64, y: f64) -> Complex64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        self.u_minus.eval(lo).0 * self.u_plus.eval(hi).0 * self.prefactor()
    }

    /// Free-space kernel `i e^{iλ|x-y|} / (2h²λ)` with this kernel's `λ`.
    pub fn free_value(&self, x: f64, y: f64) -> Complex64 {
        let l = self.scattering.lambda;
        let i = Complex64::i();
        i * (i * l * (x - y).abs()).exp() / (2.0 * self.h * self.h * l)
    }

    /// Writes `x,y,re_k,im_k` for every point of the grid.
    pub fn dump_csv<W: Write>(&self, out: &mut W, xs: &[f64], ys: &[f64]) -> io::Result<()> {
        csv::write_header(out, &["x", "y", "re_k", "im_k"])?;
        for &x in xs {
            for &y in ys {
                let k = self.value(x, y);
                csv::write_row(out, &[x, y, k.re, k.im])?;
            }
        }
        Ok(())
    }

    /// Exterior bounds at `ε = 0`:
    /// `|K| <= (|A|+|B|)/(2|A|hE^{1/2}) <= 1/(hE^{1/2})` for `|x|, |y| > R`.
    pub fn exterior_bound_check(&self, grid: &[(f64, f64)]) -> Result<ExteriorBoundReport> {
        let s = &self.scattering;
        if s.eps != 0.0 {
            return Err(Error::NotApplicable(
                "the exterior kernel bound is stated only at eps = 0".into(),
            ));
        }
        let r = self.u_plus.support_radius;
        let mut max_abs = 0.0f64;
        let mut argmax = (f64::NAN, f64::NAN);
        for &(x, y) in grid {
            if x.abs() <= r || y.abs() <= r {
                return Err(Error::PointInsideSupport(x, y));
            }
            let k = self.value(x, y).norm();
            if k > max_abs {
                max_abs = k;
                argmax = (x, y);
            }
        }
        let hs = self.h * s.energy.sqrt();
        let crude = 1.0 / hs;
        let (a, b) = (s.a.norm(), s.b.norm());
        let sharp = (a + b) / (2.0 * a * hs);
        let tol = 1.0 + ROUNDING_ALLOWANCE;
        let intermediate_ok = s.reflection_below_transmission() && sharp <= crude * tol;
        let pass = max_abs <= sharp * tol && max_abs <= crude * tol && intermediate_ok;
        Ok(ExteriorBoundReport {
            points: grid.len(),
            max_abs,
            argmax,
            sharp_bound: sharp,
            crude_bound: crude,
            slack_sharp: max_abs / sharp,
            slack_crude: max_abs / crude,
            intermediate_ok,
            pass,
        })
    }

    /// Checks that the kernel inverts `P - E - iε` on a smooth bump.
    ///
    /// With `g = ∫K(·,y) f(y) dy`, the equation `-h²g'' + (V - z)g = f` is
    /// tested in integrated form
    /// `h²(g'(x) - g'(x₀)) = ∫_{x₀}^x ((V - z) g - f)`, with every integral
    /// evaluated on the Jost collocation mesh. Returns the relative L² defect
    /// against `∫_{x₀}^x f`.
    pub fn resolvent_defect(&self, v: &Potential) -> f64 {
        let mesh = self.u_plus.mesh();
        let (lo, hi) = self.u_plus.window();
        let rho = hi.max(-lo);
        let x = mesh.nodes();
        let f: Vec<Complex64> = x
            .iter()
            .map(|&x| Complex64::new((1.0 - (x / rho).powi(2)).powi(6), 0.0))
            .collect();
        let up = self.u_plus.values();
        let um = self.u_minus.values();
        let dup = self.u_plus.derivatives();
        let dum = self.u_minus.derivatives();
        let mf: Vec<Complex64> = um.iter().zip(&f).map(|(u, f)| u * f).collect();
        let pf: Vec<Complex64> = up.iter().zip(&f).map(|(u, f)| u * f).collect();
        let left = mesh.cumulative_left(&mf);
        let right = mesh.cumulative_right(&pf);
        let c = self.prefactor();
        let n = x.len();
        let g: Vec<Complex64> = (0..n).map(|i| c * (up[i] * left[i] + um[i] * right[i])).collect();
        let dg: Vec<Complex64> = (0..n).map(|i| c * (dup[i] * left[i] + dum[i] * right[i])).collect();
        let total_plus = mesh.integrate(&pf);
        let dg_lo = c * self.u_minus.eval(lo).1 * total_plus;
        let z = Complex64::new(self.scattering.energy, self.scattering.eps);
        let h2 = self.h * self.h;
        let src: Vec<Complex64> = (0..n).map(|i| (v.eval(x[i]) - z) * g[i] - f[i]).collect();
        let cum_src = mesh.cumulative_left(&src);
        let cum_f = mesh.cumulative_left(&f);
        let defect: Vec<f64> = (0..n).map(|i| (h2 * (dg[i] - dg_lo) - cum_src[i]).norm_sqr()).collect();
        let reference: Vec<f64> = cum_f.iter().map(|v| v.norm_sqr()).collect();
        (mesh.integrate_real(&defect) / mesh.integrate_real(&reference)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExteriorBoundReport {
    pub points: usize,
    pub max_abs: f64,
    pub argmax: (f64, f64),
    /// `(|A|+|B|) / (2|A| h E^{1/2})`
    pub sharp_bound: f64,
    /// `1 / (h E^{1/2})`
    pub crude_bound: f64,
    pub slack_sharp: f64,
    pub slack_crude: f64,
    /// whether the sharp bound is itself below the crude one
    pub intermediate_ok: bool,
    pub pass: bool,
}

/// Grid of point pairs outside `[-R, R]`: `count` points on each of
/// `[-R-span, -R-gap]` and `[R+gap, R+span]`, all pairs.
pub fn exterior_grid(r: f64, gap: f64, span: f64, count: usize) -> Vec<(f64, f64)> {
    let side: Vec<f64> = (0..count)
        .map(|i| r + gap + (span - gap) * i as f64 / (count.max(2) - 1) as f64)
        .collect();
    let pts: Vec<f64> = side.iter().map(|&x| -x).chain(side.iter().copied()).collect();
    pts.iter().flat_map(|&x| pts.iter().map(move |&y| (x, y))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::catalog_get;
    use std::f64::consts::PI;

    #[test]
    fn free_kernel_values() {
        let k = KernelEval::new(&catalog_get("free", &[]).unwrap(), 1.0, 1.0, 0.0).unwrap();
        assert!((k.value(0.0, 0.0) - Complex64::new(0.0, 0.5)).norm() < 1e-13);
        assert!((k.value(0.0, PI) - Complex64::new(0.0, -0.5)).norm() < 1e-13);
    }

    #[test]
    fn kernel_is_symmetric() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let k = KernelEval::new(&v, 0.5, 2.0, 0.0).unwrap();
        assert_eq!(k.value(2.0, 3.0), k.value(3.0, 2.0));
        for &(x, y) in &[(-0.3, 0.7), (-1.5, 0.2), (0.9, 1.8)] {
            let a = k.value(x, y);
            let b = k.value(y, x);
            assert!((a - b).norm() <= 1e-10 * a.norm());
        }
    }

    #[test]
    fn exterior_bound_rejects_interior_points() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let k = KernelEval::new(&v, 0.5, 2.0, 0.0).unwrap();
        assert!(matches!(
            k.exterior_bound_check(&[(0.5, 3.0)]),
            Err(Error::PointInsideSupport(..))
        ));
        let rep = k.exterior_bound_check(&exterior_grid(1.0, 1e-3, 4.0, 20)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.max_abs <= 1.0 / (0.5 * 2f64.sqrt()));
    }

    #[test]
    fn free_kernel_attains_the_bound() {
        let k = KernelEval::new(&catalog_get("free", &[]).unwrap(), 1.0, 1.0, 0.0).unwrap();
        let rep = k.exterior_bound_check(&exterior_grid(0.0, 0.1, 3.0, 10)).unwrap();
        assert!(rep.pass);
        assert!((rep.max_abs - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kernel_inverts_the_operator() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        for eps in [0.0, 0.2] {
            let k = KernelEval::new(&v, 0.5, 2.0, eps).unwrap();
            let d = k.resolvent_defect(&v);
            assert!(d < 1e-6, "eps = {eps}: {d}");
        }
    }
}
