use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the solvers and the validation routines.
///
/// The variants mirror the failure modes the command line distinguishes by
/// exit code: degeneracy, non-contraction, wavebreaking and domain errors
/// are mathematical outcomes, the rest are usage errors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("query outside the computational domain: {0}")]
    Domain(String),
    #[error("state left the unit disk (|zeta| = {modulus}); energy budget violated")]
    StateEscape { modulus: f64 },
    #[error("order parameter degenerated: s = {s} at x = {x}")]
    Degeneracy { s: f64, x: f64 },
    #[error("fixed-point iteration did not contract after {} iterates", diff_norms.len())]
    NonContraction { diff_norms: Vec<f64> },
    #[error("wavebreaking detected at t = {time} (extrapolated t* = {t_star}, marker {marker})")]
    Wavebreaking { time: f64, t_star: f64, marker: usize },
    #[error("window collapsed at t = {time}: {reason}")]
    WindowCollapse { time: f64, reason: String },
    #[error("potential is not admissible: {0}")]
    InvalidPotential(String),
    #[error("invalid data: {0}")]
    Data(String),
}

pub(crate) fn config_err(msg: impl Into<String>) -> CoreError {
    CoreError::Config(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> CoreError {
    CoreError::Domain(msg.into())
}
