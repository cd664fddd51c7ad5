//! The two rescalings that leave the weighted resolvent norm unchanged:
//! the unitary dilation `x = h y`, which turns `(V, h)` into `(V(h·), 1)`,
//! and the scalar identity `P - z = h²(-∂² + h^{-2}V - h^{-2}z)`.

use serde::Serialize;

use super::weight::NormWeight;
use super::{compute_norm, Backend, NormOptions};
use crate::error::Result;
use crate::jost::check_regime;
use crate::potential::Potential;

/// Both rescaled norms must agree with the original to this relative
/// tolerance.
pub const RESCALING_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct RescalingReport {
    pub backend: Backend,
    pub original: f64,
    /// norm for `(V(h·), 1, E, ε)` with weight `a(h·)`
    pub dilated: f64,
    /// `h^{-2}` times the norm for `(h^{-2}V, 1, h^{-2}E, h^{-2}ε)`
    pub energy_rescaled: f64,
    pub dilation_difference: f64,
    pub energy_difference: f64,
    pub dilation_pass: bool,
    pub energy_pass: bool,
}

pub fn check_rescaling_invariance(
    v: &Potential,
    h: f64,
    energy: f64,
    eps: f64,
    a: &NormWeight,
    backend: Backend,
    options: &NormOptions,
) -> Result<RescalingReport> {
    check_regime(h, energy, eps)?;
    let norm = |v: &Potential, h: f64, energy: f64, eps: f64, a: &NormWeight| {
        compute_norm(backend, v, h, energy, eps, a, options).map(|n| n.value)
    };
    let original = norm(v, h, energy, eps, a)?;
    let dilated = norm(&v.dilate(h), 1.0, energy, eps, &a.dilate(h))?;
    let s = h.powi(-2);
    let energy_rescaled = norm(&v.scaled(s), 1.0, s * energy, s * eps, a)? * s;
    let rel = |x: f64| {
        if x == original {
            0.0
        } else {
            (x - original).abs() / original.abs().max(x.abs())
        }
    };
    let (dd, de) = (rel(dilated), rel(energy_rescaled));
    Ok(RescalingReport {
        backend,
        original,
        dilated,
        energy_rescaled,
        dilation_difference: dd,
        energy_difference: de,
        dilation_pass: dd <= RESCALING_TOLERANCE,
        energy_pass: de <= RESCALING_TOLERANCE,
    })
}
