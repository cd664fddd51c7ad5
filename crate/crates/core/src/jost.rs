//! Jost solutions and scattering coefficients for compactly supported
//! potentials.
//!
//! Each solution solves its Volterra integral equation by Picard iteration
//! panel by panel on a Gauss–Legendre mesh of `[-R-1, R+1]`. A panel maps the
//! state `(u, u'/λ)` at its right edge to the state at its left edge; these
//! transfer matrices are normalized to unit determinant and multiplied in
//! double-double arithmetic, so the unitarity identities of the scattering
//! matrix survive the exponential growth of tunneling solutions.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::dd::{dd, lift, lower, zero, DdComplex};
use crate::error::{Error, Result};
use crate::mesh::{PanelMesh, PANEL_ORDER};
use crate::potential::Potential;
use crate::quadrature::GaussRule;

/// Padding of the stored window beyond the support.
pub const WINDOW_PAD: f64 = 1.0;

const MAX_PHASE_PER_PANEL: f64 = 4.0;
const MAX_PANEL_CONTRACTION: f64 = 0.25;
const MIN_PANELS: usize = 6;
const PICARD_TOL: f64 = 1e-14;
const PICARD_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// `λ = (E + iε)^{1/2}/h` on the branch `Im λ >= 0`.
pub fn wavenumber(h: f64, energy: f64, eps: f64) -> Complex64 {
    if eps == 0.0 {
        Complex64::new(energy.sqrt() / h, 0.0)
    } else {
        Complex64::new(energy, eps).sqrt() / h
    }
}

pub(crate) fn check_regime(h: f64, energy: f64, eps: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    if !(energy > 0.0 && energy.is_finite()) || !(eps >= 0.0) || energy < 2.0 * eps {
        return Err(Error::OutOfRegime { energy, eps });
    }
    Ok(())
}

/// `e^{iλx}` in double-double, with the oscillating factor normalized to unit
/// modulus.
fn plane_wave_dd(lambda: Complex64, x: f64) -> DdComplex {
    let theta = lambda.re * x;
    let (s, c) = theta.sin_cos();
    let (c, s) = (dd(c), dd(s));
    let norm = (c * c + s * s).sqrt();
    let damp = dd((-lambda.im * x).exp());
    DdComplex::new(c / norm * damp, s / norm * damp)
}

fn dd_mul(a: DdComplex, b: DdComplex) -> DdComplex {
    DdComplex::new(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)
}

fn dd_scale(a: DdComplex, s: TwoFloat) -> DdComplex {
    DdComplex::new(a.re * s, a.im * s)
}

fn dd_div(a: DdComplex, b: DdComplex) -> DdComplex {
    let den = b.re * b.re + b.im * b.im;
    DdComplex::new((a.re * b.re + a.im * b.im) / den, (a.im * b.re - a.re * b.im) / den)
}

fn dd_norm_sqr(a: DdComplex) -> TwoFloat {
    a.re * a.re + a.im * a.im
}

/// `i·z`.
fn dd_times_i(a: DdComplex) -> DdComplex {
    DdComplex::new(-a.im, a.re)
}

/// Square root of a double-double complex number: an f64 estimate refined by
/// one Newton step.
fn dd_sqrt(z: DdComplex) -> DdComplex {
    let r0 = lift(lower(z).sqrt());
    let two = dd(2.0);
    let corr = dd_div(z - dd_mul(r0, r0), dd_scale(r0, two));
    r0 + corr
}

/// Per-panel data shared by both Jost solutions.
#[derive(Debug)]
struct PanelSolution {
    /// nodal `u` for right-edge states `(1, 0)` and `(0, 1)`
    u: [Vec<Complex64>; 2],
    /// nodal `u'/λ` for the same two states
    s: [Vec<Complex64>; 2],
    /// unit-determinant transfer matrix, right state to left state
    transfer: [[DdComplex; 2]; 2],
}

/// Convergence record of the panel Picard iterations.
#[derive(Debug, Clone, Serialize)]
pub struct PicardStats {
    /// global diagnostic `(h²|λ|)^{-1} ∫|V|`
    pub diagnostic: f64,
    pub max_iterations: usize,
    /// largest per-panel contraction estimate
    pub worst_contraction: f64,
    /// sup-norm iterate differences on the panel with the largest estimate
    pub worst_differences: Vec<f64>,
}

/// The discretized Volterra system for one `(V, h, E, ε)`.
#[derive(Debug)]
pub struct JostSystem {
    pub lambda: Complex64,
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    pub support_radius: f64,
    potential: Potential,
    mesh: Arc<PanelMesh>,
    potential_at_nodes: Vec<f64>,
    panels: Vec<PanelSolution>,
    picard: PicardStats,
}

impl JostSystem {
    pub fn new(v: &Potential, h: f64, energy: f64, eps: f64) -> Result<Self> {
        check_regime(h, energy, eps)?;
        let r = v.support_radius().ok_or_else(|| Error::MissingSupport(v.label()))?;
        let lambda = wavenumber(h, energy, eps);
        let scale = h * h * lambda.norm();
        let lo = -r - WINDOW_PAD;
        let hi = r + WINDOW_PAD;
        let min_width = (hi - lo) / MIN_PANELS as f64;
        let split = |a: f64, b: f64| {
            let w = b - a;
            if w > min_width * 1.000001 || lambda.norm() * w > MAX_PHASE_PER_PANEL {
                return true;
            }
            let mass = v.integrate_abs(a, b).unwrap_or(f64::INFINITY);
            mass * (lambda.im * w).exp() / scale > MAX_PANEL_CONTRACTION
        };
        let rule = Arc::new(GaussRule::new(PANEL_ORDER));
        let mesh = Arc::new(PanelMesh::build(
            &[(lo, hi)],
            v.breakpoints(),
            v.singular_points(),
            split,
            rule,
        ));
        let potential_at_nodes: Vec<f64> = mesh.nodes().iter().map(|&x| v.eval(x)).collect();

        let mut panels = Vec::with_capacity(mesh.panels.len());
        let mut picard = PicardStats {
            diagnostic: v.l1_norm() / scale,
            max_iterations: 0,
            worst_contraction: 0.0,
            worst_differences: Vec::new(),
        };
        let n = mesh.order();
        for (p, _) in mesh.panels.iter().enumerate() {
            let vp = &potential_at_nodes[p * n..(p + 1) * n];
            let (sol, iterations, contraction, diffs) = solve_panel(&mesh, p, vp, lambda, h)?;
            picard.max_iterations = picard.max_iterations.max(iterations);
            if contraction > picard.worst_contraction || picard.worst_differences.is_empty() {
                picard.worst_contraction = contraction;
                picard.worst_differences = diffs;
            }
            panels.push(sol);
        }
        Ok(Self {
            lambda,
            h,
            energy,
            eps,
            support_radius: r,
            potential: v.clone(),
            mesh,
            potential_at_nodes,
            panels,
            picard,
        })
    }

    pub fn mesh(&self) -> &Arc<PanelMesh> {
        &self.mesh
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn potential_at_nodes(&self) -> &[f64] {
        &self.potential_at_nodes
    }

    pub fn picard(&self) -> &PicardStats {
        &self.picard
    }

    /// Propagates the Jost solution of the given side across the mesh.
    pub fn solve(&self, side: Side) -> JostSolution {
        let lambda = self.lambda;
        let np = self.panels.len();
        let n = self.mesh.order();
        // edge states (u, u'/λ); edge k is the left edge of panel k, edge np
        // is hi. Each solution is seeded at its own support edge so that the
        // pure plane-wave form there is exact.
        let edges: Vec<f64> = self.mesh.edges();
        debug_assert_eq!(edges.len(), np + 1);
        let r = self.support_radius;
        let mut states = vec![(zero(), zero()); np + 1];
        let seed = match side {
            Side::Plus => {
                let k = edge_index(&edges, r);
                let e = plane_wave_dd(lambda, r);
                states[k] = (e, dd_times_i(e));
                k
            }
            Side::Minus => {
                let k = edge_index(&edges, -r);
                let e = plane_wave_dd(-lambda, -r);
                states[k] = (e, -dd_times_i(e));
                k
            }
        };
        for p in (0..seed).rev() {
            let (u, s) = states[p + 1];
            let t = &self.panels[p].transfer;
            states[p] = (
                dd_mul(t[0][0], u) + dd_mul(t[0][1], s),
                dd_mul(t[1][0], u) + dd_mul(t[1][1], s),
            );
        }
        for p in seed..np {
            let (u, s) = states[p];
            let t = &self.panels[p].transfer;
            // exact inverse of a unit-determinant matrix
            states[p + 1] = (
                dd_mul(t[1][1], u) - dd_mul(t[0][1], s),
                dd_mul(t[0][0], s) - dd_mul(t[1][0], u),
            );
        }
        let mut u = Vec::with_capacity(np * n);
        let mut du = Vec::with_capacity(np * n);
        for (p, panel) in self.panels.iter().enumerate() {
            let (ur, sr) = states[p + 1];
            let (ur, sr) = (lower(ur), lower(sr));
            for i in 0..n {
                u.push(ur * panel.u[0][i] + sr * panel.u[1][i]);
                du.push(lambda * (ur * panel.s[0][i] + sr * panel.s[1][i]));
            }
        }
        // plane-wave coefficients on the far side of the support
        let far_x = match side {
            Side::Plus => -r,
            Side::Minus => r,
        };
        let k = edge_index(&edges, far_x);
        let (uf, sf) = states[k];
        let forward = dd_scale(uf - dd_times_i(sf), dd(0.5));
        let backward = dd_scale(uf + dd_times_i(sf), dd(0.5));
        let far = [
            dd_mul(forward, plane_wave_dd(-lambda, far_x)),
            dd_mul(backward, plane_wave_dd(lambda, far_x)),
        ];
        JostSolution {
            side,
            lambda,
            h: self.h,
            energy: self.energy,
            eps: self.eps,
            support_radius: r,
            mesh: self.mesh.clone(),
            u,
            du,
            edges,
            edge_states: states,
            far_dd: far,
            far: [lower(far[0]), lower(far[1])],
            picard: self.picard.clone(),
        }
    }
}

fn edge_index(edges: &[f64], x: f64) -> usize {
    edges
        .iter()
        .position(|&e| e == x)
        .unwrap_or_else(|| edges.partition_point(|&e| e < x).min(edges.len() - 1))
}

type PanelOutcome = (PanelSolution, usize, f64, Vec<f64>);

/// Picard iteration for the two basis states of one panel.
fn solve_panel(mesh: &PanelMesh, p: usize, vp: &[f64], lambda: Complex64, h: f64) -> Result<PanelOutcome> {
    let panel = &mesh.panels[p];
    let rule = &mesh.rule;
    let n = rule.order();
    let b = panel.b;
    let a = panel.a;
    let c = 1.0 / (h * h * lambda);
    // g = V u / (h² λ) carries the quadrature weights through `kmat`
    let mut kmat = vec![Complex64::new(0.0, 0.0); n * n];
    let mut cmat = vec![Complex64::new(0.0, 0.0); n * n];
    let mut contraction = 0.0f64;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let wr = (rule.weights[j] - rule.integration[i][j]) * panel.jac[j];
            let arg = lambda * (panel.x[j] - panel.x[i]);
            kmat[i * n + j] = wr * arg.sin() * vp[j] * c;
            cmat[i * n + j] = wr * arg.cos() * vp[j] * c;
            row += kmat[i * n + j].norm();
        }
        contraction = contraction.max(row);
    }
    let mut u: [Vec<Complex64>; 2] = Default::default();
    let mut s: [Vec<Complex64>; 2] = Default::default();
    let mut left = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut max_iter = 0;
    let mut diffs_out = Vec::new();
    for basis in 0..2 {
        let (ub, sb) = if basis == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
        let free_u: Vec<Complex64> = panel
            .x
            .iter()
            .map(|&x| {
                let arg = lambda * (x - b);
                ub * arg.cos() + sb * arg.sin()
            })
            .collect();
        let free_s: Vec<Complex64> = panel
            .x
            .iter()
            .map(|&x| {
                let arg = lambda * (x - b);
                -ub * arg.sin() + sb * arg.cos()
            })
            .collect();
        let scale = free_u.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut cur = free_u.clone();
        let mut diffs = Vec::new();
        let mut iterations = 0;
        if vp.iter().any(|&v| v != 0.0) {
            loop {
                let next: Vec<Complex64> = (0..n)
                    .map(|i| free_u[i] + (0..n).map(|j| kmat[i * n + j] * cur[j]).sum::<Complex64>())
                    .collect();
                let diff = next.iter().zip(&cur).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                cur = next;
                iterations += 1;
                diffs.push(diff);
                if diff <= PICARD_TOL * scale {
                    break;
                }
                if iterations >= PICARD_MAX_ITER || !diff.is_finite() {
                    return Err(Error::PicardNonConvergence {
                        diagnostic: contraction,
                    });
                }
            }
        }
        max_iter = max_iter.max(iterations);
        if basis == 0 {
            diffs_out = diffs;
        }
        let sv: Vec<Complex64> = (0..n)
            .map(|i| free_s[i] - (0..n).map(|j| cmat[i * n + j] * cur[j]).sum::<Complex64>())
            .collect();
        // left-edge state from full panel sums
        let arg_ab = lambda * (a - b);
        let mut ul = ub * arg_ab.cos() + sb * arg_ab.sin();
        let mut sl = -ub * arg_ab.sin() + sb * arg_ab.cos();
        for j in 0..n {
            let g = panel.q[j] * vp[j] * c * cur[j];
            let arg = lambda * (panel.x[j] - a);
            ul += arg.sin() * g;
            sl -= arg.cos() * g;
        }
        left[0][basis] = ul;
        left[1][basis] = sl;
        u[basis] = cur;
        s[basis] = sv;
    }
    let transfer = normalize_transfer(left, lambda.im == 0.0);
    Ok((PanelSolution { u, s, transfer }, max_iter, contraction, diffs_out))
}

/// Lifts a panel transfer matrix to double-double and rescales it to unit
/// determinant. For real `λ` the exact matrix is real, so rounding noise in
/// the imaginary parts is discarded.
fn normalize_transfer(t: [[Complex64; 2]; 2], real: bool) -> [[DdComplex; 2]; 2] {
    let mut m = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = if real {
                DdComplex::new(dd(t[i][j].re), dd(0.0))
            } else {
                lift(t[i][j])
            };
        }
    }
    let det = dd_mul(m[0][0], m[1][1]) - dd_mul(m[0][1], m[1][0]);
    let root = if real {
        DdComplex::new(det.re.sqrt(), dd(0.0))
    } else {
        dd_sqrt(det)
    };
    for row in m.iter_mut() {
        for e in row.iter_mut() {
            *e = dd_div(*e, root);
        }
    }
    m
}

/// A Jost solution on the window `[-R-1, R+1]`, extended outside by its exact
/// plane-wave form.
#[derive(Debug, Clone)]
pub struct JostSolution {
    pub side: Side,
    pub lambda: Complex64,
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    pub support_radius: f64,
    mesh: Arc<PanelMesh>,
    u: Vec<Complex64>,
    du: Vec<Complex64>,
    edges: Vec<f64>,
    edge_states: Vec<(DdComplex, DdComplex)>,
    far_dd: [DdComplex; 2],
    far: [Complex64; 2],
    picard: PicardStats,
}

impl JostSolution {
    pub fn window(&self) -> (f64, f64) {
        (self.mesh.lo(), self.mesh.hi())
    }

    pub fn mesh(&self) -> &Arc<PanelMesh> {
        &self.mesh
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.mesh.nodes()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.u
    }

    pub fn derivatives(&self) -> &[Complex64] {
        &self.du
    }

    pub fn picard(&self) -> &PicardStats {
        &self.picard
    }

    /// Plane-wave coefficients `(α, β)` on the far side of the support:
    /// `u = α e^{iλx} + β e^{-iλx}` there.
    pub fn far_coefficients(&self) -> [Complex64; 2] {
        self.far
    }

    /// `(u(x), u'(x))`. Outside the support the plane-wave form is exact and
    /// is used instead of interpolating the nodal values.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let (lo, hi) = (-self.support_radius, self.support_radius);
        let i = Complex64::i();
        let l = self.lambda;
        let outgoing = |x: f64| (i * l * x).exp();
        let incoming = |x: f64| (-i * l * x).exp();
        let far = |x: f64| {
            let (a, b) = (self.far[0] * outgoing(x), self.far[1] * incoming(x));
            (a + b, i * l * (a - b))
        };
        match self.side {
            Side::Plus if x > hi => (outgoing(x), i * l * outgoing(x)),
            Side::Plus if x < lo => far(x),
            Side::Minus if x < lo => (incoming(x), -i * l * incoming(x)),
            Side::Minus if x > hi => far(x),
            _ => {
                let p = self.mesh.locate(x).expect("point inside the window");
                (
                    self.mesh.interpolate(p, &self.u, x),
                    self.mesh.interpolate(p, &self.du, x),
                )
            }
        }
    }

    /// Relative sup-norm residual of the Volterra equation at the nodes.
    pub fn volterra_residual(&self, v: &Potential) -> f64 {
        let mesh = &self.mesh;
        let n = mesh.order();
        let x = mesh.nodes();
        let q = mesh.weights();
        let l = self.lambda;
        let c = 1.0 / (self.h * self.h * l);
        let i = Complex64::i();
        let vu: Vec<Complex64> = x.iter().zip(&self.u).map(|(&x, u)| v.eval(x) * u).collect();
        let rule = &mesh.rule;
        let mut worst = 0.0f64;
        let scale = self.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (p, panel) in mesh.panels.iter().enumerate() {
            for li in 0..n {
                let gi = p * n + li;
                let xi = x[gi];
                let mut acc = Complex64::new(0.0, 0.0);
                match self.side {
                    Side::Plus => {
                        for lj in 0..n {
                            let gj = p * n + lj;
                            let wr = (rule.weights[lj] - rule.integration[li][lj]) * panel.jac[lj];
                            acc += wr * (l * (x[gj] - xi)).sin() * vu[gj];
                        }
                        for gj in (p + 1) * n..x.len() {
                            acc += q[gj] * (l * (x[gj] - xi)).sin() * vu[gj];
                        }
                        let r = self.u[gi] - (i * l * xi).exp() - c * acc;
                        worst = worst.max(r.norm());
                    }
                    Side::Minus => {
                        for lj in 0..n {
                            let gj = p * n + lj;
                            let wl = rule.integration[li][lj] * panel.jac[lj];
                            acc += wl * (l * (x[gj] - xi)).sin() * vu[gj];
                        }
                        for gj in 0..p * n {
                            acc += q[gj] * (l * (x[gj] - xi)).sin() * vu[gj];
                        }
                        let r = self.u[gi] - (-i * l * xi).exp() + c * acc;
                        worst = worst.max(r.norm());
                    }
                }
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    fn edge_state(&self, k: usize) -> (DdComplex, DdComplex) {
        self.edge_states[k]
    }
}

/// Jost coefficients: `u₊ = A e^{iλx} + B e^{-iλx}` for `x < -R` and
/// `u₋ = C e^{iλx} + D e^{-iλx}` for `x > R`.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringData {
    pub lambda: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    /// Wronskian `u₋u₊' - u₋'u₊`, averaged over sample points
    pub w: Complex64,
    /// `max |W(x_k) - W| / |W|` over the averaging samples
    pub w_spread: f64,
    pub w_samples: Vec<(f64, Complex64)>,
    /// same spread measured from interpolated nodal values inside the
    /// support, independent of the transfer products
    pub w_nodal_spread: f64,
    pub h: f64,
    pub energy: f64,
    pub eps: f64,
    #[serde(skip)]
    exact: [DdComplex; 4],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UnitarityDefects {
    /// `| |A|² - |B|² - 1 |`
    pub ab: f64,
    /// `| |C|² - |D|² + 1 |`
    pub cd: f64,
    /// `|B + conj(C)|`
    pub b_conj_c: f64,
    /// `|A - D| / |A|`
    pub a_minus_d: f64,
}

impl ScatteringData {
    /// Identities of the scattering matrix, evaluated in extended precision.
    pub fn unitarity(&self) -> UnitarityDefects {
        let [a, b, c, d] = self.exact;
        let one = dd(1.0);
        let ab = dd_norm_sqr(a) - dd_norm_sqr(b) - one;
        let cd = dd_norm_sqr(c) - dd_norm_sqr(d) + one;
        let bc = b + c.conj();
        let ad = a - d;
        UnitarityDefects {
            ab: f64::from(ab).abs(),
            cd: f64::from(cd).abs(),
            b_conj_c: f64::from(dd_norm_sqr(bc).sqrt()),
            a_minus_d: f64::from((dd_norm_sqr(ad) / dd_norm_sqr(a)).sqrt()),
        }
    }

    /// `|B| <= |A|`, decided in extended precision: in deep tunneling
    /// `|A| - |B| = 1/(|A| + |B|)` is below double resolution.
    pub fn reflection_below_transmission(&self) -> bool {
        let [a, b, _, _] = self.exact;
        f64::from(dd_norm_sqr(a) - dd_norm_sqr(b)) >= 0.0
    }

    /// `(|W - 2iAλ|, |W - 2iDλ|)` relative to `|W|`.
    pub fn wronskian_relations(&self) -> (f64, f64) {
        let i = Complex64::i();
        let wn = self.w.norm();
        (
            (self.w - 2.0 * i * self.a * self.lambda).norm() / wn,
            (self.w - 2.0 * i * self.d * self.lambda).norm() / wn,
        )
    }
}

const WRONSKIAN_SAMPLES: usize = 7;

/// Reads the coefficients off both solutions and averages the Wronskian.
pub fn extract_scattering(plus: &JostSolution, minus: &JostSolution) -> Result<ScatteringData> {
    if plus.side != Side::Plus || minus.side != Side::Minus {
        return Err(Error::InvalidArgument("expected (u+, u-) in that order".into()));
    }
    if plus.lambda != minus.lambda || plus.edges != minus.edges || plus.h != minus.h {
        return Err(Error::InvalidArgument(
            "Jost solutions come from different (V, h, E, eps)".into(),
        ));
    }
    let l = lift(plus.lambda);
    let ne = plus.edges.len();
    let mut w_dd = Vec::with_capacity(WRONSKIAN_SAMPLES);
    for s in 0..WRONSKIAN_SAMPLES {
        let k = s * (ne - 1) / (WRONSKIAN_SAMPLES - 1);
        let (up, sp) = plus.edge_state(k);
        let (um, sm) = minus.edge_state(k);
        let w = dd_mul(l, dd_mul(um, sp) - dd_mul(sm, up));
        w_dd.push((plus.edges[k], w));
    }
    let mut mean = zero();
    for (_, w) in &w_dd {
        mean = mean + *w;
    }
    let mean = dd_scale(mean, dd(1.0 / WRONSKIAN_SAMPLES as f64));
    let w = lower(mean);
    if w.norm() < 1e-12 {
        return Err(Error::DegenerateWronskian(w.norm()));
    }
    let samples: Vec<(f64, Complex64)> = w_dd.iter().map(|(x, w)| (*x, lower(*w))).collect();
    let spread = w_dd
        .iter()
        .map(|(_, s)| f64::from(dd_norm_sqr(*s - mean).sqrt()))
        .fold(0.0, f64::max)
        / w.norm();

    // independent check from nodal values
    let r = plus.support_radius;
    let nodes = plus.nodes();
    let inside: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].abs() <= r.max(1.0)).collect();
    let mut nodal_spread = 0.0f64;
    for s in 0..WRONSKIAN_SAMPLES {
        if inside.is_empty() {
            break;
        }
        let i = inside[s * (inside.len() - 1) / (WRONSKIAN_SAMPLES - 1)];
        let wi = minus.u[i] * plus.du[i] - minus.du[i] * plus.u[i];
        nodal_spread = nodal_spread.max((wi - w).norm() / w.norm());
    }

    let exact = [plus.far_dd[0], plus.far_dd[1], minus.far_dd[0], minus.far_dd[1]];
    Ok(ScatteringData {
        lambda: plus.lambda,
        a: plus.far[0],
        b: plus.far[1],
        c: minus.far[0],
        d: minus.far[1],
        w,
        w_spread: spread,
        w_samples: samples,
        w_nodal_spread: nodal_spread,
        h: plus.h,
        energy: plus.energy,
        eps: plus.eps,
        exact,
    })
}

/// Solves for one Jost solution.
pub fn solve_jost(v: &Potential, h: f64, energy: f64, eps: f64, side: Side) -> Result<JostSolution> {
    Ok(JostSystem::new(v, h, energy, eps)?.solve(side))
}

/// Both Jost solutions on a shared mesh together with their scattering data.
#[derive(Debug, Clone)]
pub struct JostPair {
    pub plus: JostSolution,
    pub minus: JostSolution,
    pub scattering: ScatteringData,
}

pub fn solve_pair(v: &Potential, h: f64, energy: f64, eps: f64) -> Result<JostPair> {
    let system = JostSystem::new(v, h, energy, eps)?;
    let plus = system.solve(Side::Plus);
    let minus = system.solve(Side::Minus);
    let scattering = extract_scattering(&plus, &minus)?;
    Ok(JostPair {
        plus,
        minus,
        scattering,
    })
}

/// Exact scattering coefficients `(A, B)` of `u₊` for a piecewise-constant
/// potential given as `(left, right, value)` pieces, by plane-wave matching.
pub fn piecewise_constant_coefficients(
    pieces: &[(f64, f64, f64)],
    h: f64,
    energy: f64,
    eps: f64,
) -> (Complex64, Complex64) {
    let z = Complex64::new(energy, eps);
    let k0 = z.sqrt() / h;
    let i = Complex64::i();
    let right = pieces.last().map(|p| p.1).unwrap_or(0.0);
    // state (u, u') propagated right to left
    let mut u = (i * k0 * right).exp();
    let mut du = i * k0 * u;
    for &(a, b, v) in pieces.iter().rev() {
        let k = (z - v).sqrt() / h;
        let len = a - b;
        let (c, s) = ((k * len).cos(), (k * len).sin());
        let sk = if k.norm() == 0.0 {
            Complex64::new(len, 0.0)
        } else {
            s / k
        };
        let nu = u * c + du * sk;
        let ndu = -u * k * s + du * c;
        u = nu;
        du = ndu;
    }
    let left = pieces.first().map(|p| p.0).unwrap_or(0.0);
    let a = 0.5 * (u + du / (i * k0)) * (-i * k0 * left).exp();
    let b = 0.5 * (u - du / (i * k0)) * (i * k0 * left).exp();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::catalog_get;

    #[test]
    fn free_solution_is_a_plane_wave() {
        let v = catalog_get("free", &[]).unwrap();
        let pair = solve_pair(&v, 1.0, 1.0, 0.0).unwrap();
        let s = &pair.scattering;
        assert!((s.a - 1.0).norm() < 1e-13);
        assert!(s.b.norm() < 1e-13);
        assert!(s.c.norm() < 1e-13);
        assert!((s.d - 1.0).norm() < 1e-13);
        assert!((s.w - Complex64::new(0.0, 2.0)).norm() < 1e-13);
        for &x in &[-3.0, -0.7, 0.0, 0.4, 5.0] {
            let (u, du) = pair.plus.eval(x);
            let e = Complex64::new(0.0, x).exp();
            assert!((u - e).norm() < 1e-13, "x = {x}");
            assert!((du - Complex64::i() * e).norm() < 1e-13);
        }
    }

    #[test]
    fn square_barrier_matches_transfer_matrix_oracle() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let pair = solve_pair(&v, 1.0, 2.0, 0.0).unwrap();
        let (a, b) = piecewise_constant_coefficients(&[(-1.0, 1.0, 1.0)], 1.0, 2.0, 0.0);
        assert!((pair.scattering.a - a).norm() < 1e-12 * a.norm());
        assert!((pair.scattering.b - b).norm() < 1e-12 * a.norm());
        let d = pair.scattering.unitarity();
        assert!(d.ab < 1e-12 && d.cd < 1e-12 && d.b_conj_c < 1e-12 && d.a_minus_d < 1e-12);
    }

    #[test]
    fn complex_energy_uses_decaying_branch() {
        let l = wavenumber(0.5, 1.0, 0.3);
        assert!(l.im > 0.0 && l.re > 0.0);
        assert_eq!(wavenumber(0.5, 2.0, 0.0), Complex64::new(2f64.sqrt() / 0.5, 0.0));
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        let pair = solve_pair(&v, 0.5, 1.0, 0.3).unwrap();
        let pieces = [(-1.0, 1.0, 1.0)];
        let (a, b) = piecewise_constant_coefficients(&pieces, 0.5, 1.0, 0.3);
        assert!((pair.scattering.a - a).norm() < 1e-11 * a.norm());
        assert!((pair.scattering.b - b).norm() < 1e-11 * a.norm());
        let (r1, r2) = pair.scattering.wronskian_relations();
        assert!(r1 < 1e-12 && r2 < 1e-10);
    }

    #[test]
    fn rejects_out_of_regime_and_noncompact() {
        let v = catalog_get("square_barrier", &[1.0, 1.0]).unwrap();
        assert!(matches!(solve_pair(&v, 1.0, 1.0, 0.6), Err(Error::OutOfRegime { .. })));
        let w = catalog_get("wvn_like", &[1.0, 1.0]).unwrap();
        assert!(matches!(
            solve_jost(&w, 1.0, 1.0, 0.0, Side::Plus),
            Err(Error::MissingSupport(_))
        ));
    }

    #[test]
    fn volterra_residual_is_small() {
        let v = catalog_get("inverse_sqrt_singular", &[1.0, 1.0]).unwrap();
        let system = JostSystem::new(&v, 1.0, 4.0, 0.0).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let u = system.solve(side);
            let r = u.volterra_residual(&v);
            assert!(r < 1e-9, "{side:?}: {r}");
        }
    }
}
