//! Numerical toolkit for one-dimensional semiclassical Schrödinger operators
//! `P = -h² d²/dx² + V` with integrable `V`: Jost solutions and scattering
//! coefficients, the outgoing resolvent kernel, explicit weight functions,
//! weighted resolvent norms computed by two independent backends, and an
//! audit of the energy identities behind the weighted resolvent bounds.

pub mod audit;
pub mod csv;
mod dd;
pub mod error;
pub mod jost;
pub mod kernel;
pub mod mesh;
pub mod norm;
pub mod potential;
pub mod quadrature;
pub mod sweep;
pub mod weights;

pub use error::{Error, Result};
