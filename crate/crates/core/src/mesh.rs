//! Gauss–Legendre panel meshes with graded panels at singular points and
//! spectrally accurate cumulative integration.

use std::sync::Arc;

use num_complex::Complex64;

use crate::quadrature::{GaussRule, Singularity};

/// Default number of collocation nodes per panel.
pub const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelMap {
    Affine,
    /// `x = a + (b - a) ((τ + 1)/2)^p`, singular point at `a`.
    GradedLeft(f64),
    /// `x = b - (b - a) ((1 - τ)/2)^p`, singular point at `b`.
    GradedRight(f64),
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub map: PanelMap,
    /// node positions
    pub x: Vec<f64>,
    /// `dx/dτ` at the nodes
    pub jac: Vec<f64>,
    /// quadrature weights in `x`
    pub q: Vec<f64>,
}

impl Panel {
    fn new(a: f64, b: f64, map: PanelMap, rule: &GaussRule) -> Self {
        let mut panel = Panel {
            a,
            b,
            map,
            x: Vec::with_capacity(rule.order()),
            jac: Vec::with_capacity(rule.order()),
            q: Vec::with_capacity(rule.order()),
        };
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (x, j) = panel.map_tau(t);
            panel.x.push(x);
            panel.jac.push(j);
            panel.q.push(w * j);
        }
        panel
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// `(x(τ), dx/dτ)`.
    pub fn map_tau(&self, t: f64) -> (f64, f64) {
        let len = self.b - self.a;
        match self.map {
            PanelMap::Affine => (self.a + 0.5 * len * (t + 1.0), 0.5 * len),
            PanelMap::GradedLeft(p) => {
                let s = 0.5 * (t + 1.0);
                (self.a + len * s.powf(p), 0.5 * len * p * s.powf(p - 1.0))
            }
            PanelMap::GradedRight(p) => {
                let s = 0.5 * (1.0 - t);
                (self.b - len * s.powf(p), 0.5 * len * p * s.powf(p - 1.0))
            }
        }
    }

    pub fn tau_of(&self, x: f64) -> f64 {
        let len = self.b - self.a;
        let t = match self.map {
            PanelMap::Affine => 2.0 * (x - self.a) / len - 1.0,
            PanelMap::GradedLeft(p) => 2.0 * ((x - self.a) / len).max(0.0).powf(1.0 / p) - 1.0,
            PanelMap::GradedRight(p) => 1.0 - 2.0 * ((self.b - x) / len).max(0.0).powf(1.0 / p),
        };
        t.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct PanelMesh {
    pub rule: Arc<GaussRule>,
    pub panels: Vec<Panel>,
}

impl PanelMesh {
    /// Builds a mesh over a sorted union of disjoint intervals. Every
    /// breakpoint and singular point becomes a panel edge; panels touching a
    /// singular point are graded. `split(a, b)` requests bisection of a
    /// candidate panel.
    pub fn build<S: Fn(f64, f64) -> bool>(
        intervals: &[(f64, f64)],
        breaks: &[f64],
        singular: &[Singularity],
        split: S,
        rule: Arc<GaussRule>,
    ) -> PanelMesh {
        let mut panels = Vec::new();
        for &(lo, hi) in intervals {
            assert!(lo < hi, "empty mesh interval [{lo}, {hi}]");
            let mut cuts = vec![lo, hi];
            cuts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
            cuts.extend(singular.iter().map(|s| s.at).filter(|&x| x > lo && x < hi));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let grading = |x: f64| {
                singular
                    .iter()
                    .find(|s| s.at == x && s.exponent > 0.0)
                    .map(|s| s.grading_power())
            };
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                match (grading(a), grading(b)) {
                    (Some(pl), Some(pr)) => {
                        let m = 0.5 * (a + b);
                        Self::refine(a, m, PanelMap::GradedLeft(pl), &split, &rule, &mut panels);
                        Self::refine(m, b, PanelMap::GradedRight(pr), &split, &rule, &mut panels);
                    }
                    (Some(pl), None) => Self::refine(a, b, PanelMap::GradedLeft(pl), &split, &rule, &mut panels),
                    (None, Some(pr)) => Self::refine(a, b, PanelMap::GradedRight(pr), &split, &rule, &mut panels),
                    (None, None) => Self::refine(a, b, PanelMap::Affine, &split, &rule, &mut panels),
                }
            }
        }
        PanelMesh { rule, panels }
    }

    fn refine<S: Fn(f64, f64) -> bool>(
        a: f64,
        b: f64,
        map: PanelMap,
        split: &S,
        rule: &GaussRule,
        out: &mut Vec<Panel>,
    ) {
        let m = 0.5 * (a + b);
        if split(a, b) && m > a && m < b && (b - a) > 1e-12 * (1.0 + a.abs().max(b.abs())) {
            let (left, right) = match map {
                PanelMap::Affine => (PanelMap::Affine, PanelMap::Affine),
                PanelMap::GradedLeft(_) => (map, PanelMap::Affine),
                PanelMap::GradedRight(_) => (PanelMap::Affine, map),
            };
            Self::refine(a, m, left, split, rule, out);
            Self::refine(m, b, right, split, rule, out);
        } else {
            out.push(Panel::new(a, b, map, rule));
        }
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn node_count(&self) -> usize {
        self.panels.len() * self.order()
    }

    pub fn lo(&self) -> f64 {
        self.panels.first().map(|p| p.a).unwrap_or(0.0)
    }

    pub fn hi(&self) -> f64 {
        self.panels.last().map(|p| p.b).unwrap_or(0.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.panels.iter().flat_map(|p| p.x.iter().copied()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.panels.iter().flat_map(|p| p.q.iter().copied()).collect()
    }

    /// Panel edges in increasing order (gaps between intervals included).
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.panels.iter().flat_map(|p| [p.a, p.b]).collect();
        e.dedup();
        e
    }

    /// Index of the panel containing `x`, if any.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let idx = self.panels.partition_point(|p| p.b < x);
        (idx < self.panels.len() && self.panels[idx].a <= x).then_some(idx)
    }

    pub fn integrate(&self, f: &[Complex64]) -> Complex64 {
        self.panels
            .iter()
            .enumerate()
            .flat_map(|(p, panel)| {
                let n = self.order();
                panel.q.iter().enumerate().map(move |(j, q)| *q * f[p * n + j])
            })
            .sum()
    }

    pub fn integrate_real(&self, f: &[f64]) -> f64 {
        self.weights().iter().zip(f).map(|(q, v)| q * v).sum()
    }

    /// `∫_{lo}^{x_i} f` at every node.
    pub fn cumulative_left(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.order();
        let s = &self.rule.integration;
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        let mut running = Complex64::new(0.0, 0.0);
        for (p, panel) in self.panels.iter().enumerate() {
            let fp = &f[p * n..(p + 1) * n];
            let scaled: Vec<Complex64> = fp.iter().zip(&panel.jac).map(|(v, j)| v * j).collect();
            for i in 0..n {
                let local: Complex64 = s[i].iter().zip(&scaled).map(|(a, v)| v * a).sum();
                out[p * n + i] = running + local;
            }
            running += fp.iter().zip(&panel.q).map(|(v, q)| v * q).sum::<Complex64>();
        }
        out
    }

    /// `∫_{x_i}^{hi} f` at every node.
    pub fn cumulative_right(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.order();
        let s = &self.rule.integration;
        let w = &self.rule.weights;
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        let mut running = Complex64::new(0.0, 0.0);
        for (p, panel) in self.panels.iter().enumerate().rev() {
            let fp = &f[p * n..(p + 1) * n];
            let scaled: Vec<Complex64> = fp.iter().zip(&panel.jac).map(|(v, j)| v * j).collect();
            for i in 0..n {
                let local: Complex64 = (0..n).map(|j| scaled[j] * (w[j] - s[i][j])).sum();
                out[p * n + i] = running + local;
            }
            running += fp.iter().zip(&panel.q).map(|(v, q)| v * q).sum::<Complex64>();
        }
        out
    }

    /// Transpose of [`cumulative_left`](Self::cumulative_left).
    pub fn cumulative_left_transpose(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.order();
        let s = &self.rule.integration;
        let mut out = vec![Complex64::new(0.0, 0.0); y.len()];
        let mut later = Complex64::new(0.0, 0.0);
        for (p, panel) in self.panels.iter().enumerate().rev() {
            let yp = &y[p * n..(p + 1) * n];
            for j in 0..n {
                let local: Complex64 = (0..n).map(|i| yp[i] * s[i][j]).sum();
                out[p * n + j] = later * panel.q[j] + local * panel.jac[j];
            }
            later += yp.iter().sum::<Complex64>();
        }
        out
    }

    /// Transpose of [`cumulative_right`](Self::cumulative_right).
    pub fn cumulative_right_transpose(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.order();
        let s = &self.rule.integration;
        let w = &self.rule.weights;
        let mut out = vec![Complex64::new(0.0, 0.0); y.len()];
        let mut earlier = Complex64::new(0.0, 0.0);
        for (p, panel) in self.panels.iter().enumerate() {
            let yp = &y[p * n..(p + 1) * n];
            for j in 0..n {
                let local: Complex64 = (0..n).map(|i| yp[i] * (w[j] - s[i][j])).sum();
                out[p * n + j] = earlier * panel.q[j] + local * panel.jac[j];
            }
            earlier += yp.iter().sum::<Complex64>();
        }
        out
    }

    /// Interpolates nodal values at an arbitrary point of panel `p`.
    pub fn interpolate(&self, p: usize, values: &[Complex64], x: f64) -> Complex64 {
        let n = self.order();
        let panel = &self.panels[p];
        let l = self.rule.lagrange_at(panel.tau_of(x));
        l.iter().zip(&values[p * n..(p + 1) * n]).map(|(a, v)| v * a).sum()
    }
}
