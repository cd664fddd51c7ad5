use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("invalid parameters for `{name}`: {reason}")]
    InvalidParameters { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:.3e}")]
    QuadratureNonConvergence { a: f64, b: f64, error: f64 },

    #[error("potential `{0}` has no compact support")]
    MissingSupport(String),

    #[error(
        "Picard iteration did not converge (contraction diagnostic (h^2|lambda|)^-1 * l1_norm = {diagnostic:.3e})"
    )]
    PicardNonConvergence { diagnostic: f64 },

    #[error("Wronskian |W| = {0:.3e} is below 1e-12")]
    DegenerateWronskian(f64),

    #[error("parameters outside the estimate regime: E = {energy}, eps = {eps} (need E >= 2 eps)")]
    OutOfRegime { energy: f64, eps: f64 },

    #[error("power iteration stagnated after {iterations} iterations (last relative change {change:.3e})")]
    PowerIterationStagnation { iterations: usize, change: f64 },

    #[error("norm did not converge under refinement: {0}")]
    RefinementNonConvergence(String),

    #[error("grid point ({0}, {1}) lies inside the support of V")]
    PointInsideSupport(f64, f64),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
