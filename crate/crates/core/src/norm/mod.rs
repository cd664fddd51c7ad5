//! Weighted resolvent norms `‖a (P - E - iε)^{-1} a‖` on `L²`.
//!
//! Two independent discretizations are provided: a Nyström discretization of
//! the Jost-solution kernel (compactly supported `V`, any `ε >= 0`) and a
//! second-order finite-difference matrix with Dirichlet truncation (`ε > 0`).

mod fd;
mod kernel_backend;
pub mod krylov;
mod rescale;
mod weight;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::Error;

pub use fd::{norm_via_matrix, FdOperator};
pub(crate) use kernel_backend::resolving_mesh as resolving_mesh_for;
pub use kernel_backend::{norm_via_kernel, KernelOperator};
pub use krylov::{dense_norm, operator_norm, seed_from, KrylovSettings, LinearMap, NormIteration};
pub use rescale::{check_rescaling_invariance, RescalingReport, RESCALING_TOLERANCE};
pub use weight::{NormWeight, WeightSupport};

/// Relative agreement required between the two finest refinements.
pub const REFINEMENT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    KernelNystrom,
    FdMatrix,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "kernel" | "kernel_nystrom" => Ok(Backend::KernelNystrom),
            "matrix" | "fd" | "fd_matrix" => Ok(Backend::FdMatrix),
            _ => Err(Error::InvalidArgument(format!(
                "unknown backend '{s}' (expected kernel or matrix)"
            ))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::KernelNystrom => "kernel",
            Backend::FdMatrix => "matrix",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Discretization {
    /// largest panel width (kernel) or finest grid spacing (matrix)
    pub grid_spacing: f64,
    /// the weight is truncated to `[-L, L]`
    pub truncation_radius: f64,
    pub points_per_wavelength: f64,
    /// unknowns in the finest discretization
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    /// best estimate of the operator norm
    pub value: f64,
    pub backend: Backend,
    pub discretization: Discretization,
    /// the two finest refinements agree within [`REFINEMENT_TOLERANCE`]
    pub convergence_flag: bool,
    /// relative change between the two finest refinements
    pub refinement_change: f64,
    pub weight_spec: String,
    /// norm of the finest truncated discretization
    pub truncated_value: f64,
    /// upper bound on the norm of the discarded exterior part (0 when
    /// nothing was truncated)
    pub tail_bound: f64,
    /// relative change when the Dirichlet boundary is moved twice as far
    /// out (matrix backend only)
    pub truncation_change: Option<f64>,
    /// Gram applications spent in the finest solve
    pub iterations: usize,
    /// dense SVD of the finest matrix, when requested and small enough
    pub dense_oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormOptions {
    pub krylov: KrylovSettings,
    /// points per wavelength `2πh/E^{1/2}` of the matrix grid
    pub points_per_wavelength: f64,
    /// fixed truncation radius instead of the automatic choice
    pub truncation: Option<f64>,
    /// compute the dense SVD oracle when the matrix has at most this many rows
    pub dense_oracle_limit: usize,
    /// relative size of the discarded tail at which truncation stops growing
    pub tail_tolerance: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            krylov: KrylovSettings::default(),
            points_per_wavelength: 20.0,
            truncation: None,
            dense_oracle_limit: 0,
            tail_tolerance: 1e-4,
        }
    }
}

impl NormOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.krylov.seed = seed;
        self
    }
}

/// Norm of a zero weight, for either backend.
fn zero_estimate(backend: Backend, a: &NormWeight) -> NormEstimate {
    NormEstimate {
        value: 0.0,
        backend,
        discretization: Discretization {
            grid_spacing: 0.0,
            truncation_radius: 0.0,
            points_per_wavelength: 0.0,
            nodes: 0,
        },
        convergence_flag: true,
        refinement_change: 0.0,
        weight_spec: a.description.clone(),
        truncated_value: 0.0,
        tail_bound: 0.0,
        truncation_change: None,
        iterations: 0,
        dense_oracle: None,
    }
}

fn relative_change(coarse: f64, fine: f64) -> f64 {
    if fine == 0.0 && coarse == 0.0 {
        0.0
    } else {
        (fine - coarse).abs() / fine.abs().max(coarse.abs())
    }
}

/// Bound on the part of `a (P - E - iε)^{-1} a` discarded by truncating `a`
/// to `[-L, L]`: `2 sup_{|x|>L} a · sup a / ε`, from
/// `‖(P - E - iε)^{-1}‖ <= 1/ε`, taking `a` nonincreasing in `|x|` beyond `L`.
fn dissipative_tail_bound(a: &NormWeight, l: f64, eps: f64) -> f64 {
    if a.tail_mass(l) == 0.0 {
        return 0.0;
    }
    let outer = a.a(l).max(a.a(-l));
    let inner = (0..=2000)
        .map(|k| -l + 2.0 * l * k as f64 / 2000.0)
        .map(|x| a.a(x))
        .fold(outer, f64::max);
    2.0 * outer * inner / eps
}

/// Linear extrapolation of truncated norms in the discarded mass `t(L)`,
/// clamped to `[N₂, N₂ + tail]`.
fn extrapolate_truncation(a: &NormWeight, (l1, n1): (f64, f64), (l2, n2): (f64, f64), tail: f64) -> f64 {
    let (t1, t2) = (a.tail_mass(l1), a.tail_mass(l2));
    if t1 > t2 && tail > 0.0 {
        (n2 + (n2 - n1) * t2 / (t1 - t2)).clamp(n2, n2 + tail)
    } else {
        n2
    }
}

/// Dispatches to the selected backend.
pub fn compute_norm(
    backend: Backend,
    v: &crate::potential::Potential,
    h: f64,
    energy: f64,
    eps: f64,
    a: &NormWeight,
    options: &NormOptions,
) -> crate::error::Result<NormEstimate> {
    match backend {
        Backend::KernelNystrom => norm_via_kernel(v, h, energy, eps, a, options),
        Backend::FdMatrix => norm_via_matrix(v, h, energy, eps, a, options),
    }
}

/// Matrix-backend norms over decreasing `ε`, for potentials without compact
/// support where the kernel route is unavailable.
#[derive(Debug, Clone, Serialize)]
pub struct EpsTrend {
    /// decreasing
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// linear extrapolation to `ε = 0` from the two smallest `ε`; reported
    /// as data, with no claim that the limit has been reached
    pub extrapolated: f64,
}

pub fn eps_trend(
    v: &crate::potential::Potential,
    h: f64,
    energy: f64,
    a: &NormWeight,
    eps: &[f64],
    options: &NormOptions,
) -> crate::error::Result<EpsTrend> {
    let mut eps = eps.to_vec();
    eps.sort_by(|x, y| y.total_cmp(x));
    eps.dedup();
    if eps.len() < 2 || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(crate::error::Error::InvalidArgument(
            "need at least two distinct positive eps values".into(),
        ));
    }
    let values = eps
        .iter()
        .map(|&e| norm_via_matrix(v, h, energy, e, a, options).map(|est| est.value))
        .collect::<crate::error::Result<Vec<_>>>()?;
    let n = eps.len();
    let (e1, e2) = (eps[n - 2], eps[n - 1]);
    let (n1, n2) = (values[n - 2], values[n - 1]);
    let extrapolated = n2 - e2 * (n1 - n2) / (e1 - e2);
    Ok(EpsTrend {
        eps,
        values,
        extrapolated,
    })
}
