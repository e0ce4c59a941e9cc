//! Error taxonomy shared by every layer of the crate.

use thiserror::Error;

/// Everything that can go wrong, from state construction to CLI parsing.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state lost too much probability to the truncated Fock tail, either
    /// at construction time or during evolution.
    #[error("Fock truncation violated: tail mass {tail:.3e} exceeds {limit:.1e} ({context})")]
    Truncation {
        tail: f64,
        limit: f64,
        context: String,
    },

    /// Operator/state dimensions are incompatible.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// Off-resonant machinery called at (or numerically indistinguishable
    /// from) the resonant point, where the coupling ratio diverges.
    #[error("resonant coupling: drive detuning equals twice the dispersive shift; the coupling ratio is undefined")]
    ResonantCoupling,

    /// Off-resonant closed form evaluated outside its domain of validity.
    #[error("regime error: {0}")]
    Regime(String),

    /// The inverse-cosine argument for the squeeze-angle recovery left [-1, 1]
    /// by more than the numerical guard.
    #[error("branch error: |cos| argument {value:.6e} exceeds 1 + {guard:.1e}")]
    Branch { value: f64, guard: f64 },

    /// Transit-profile quantities requested but the parameter set carries no
    /// beam waist / atomic speed.
    #[error("profile missing: parameter set has no beam waist or transit speed")]
    ProfileMissing,

    /// Integrator step too coarse for the Hamiltonian's spectral bound.
    #[error("stability violation: dt*|H| = {product:.3e} exceeds {limit} (dt = {dt:.3e}, bound {bound:.3e})")]
    StabilityViolation {
        dt: f64,
        bound: f64,
        product: f64,
        limit: f64,
    },

    /// Parameter set rejected before any computation ran.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Config file could not be parsed; carries a 1-based line number.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// Filesystem failure while reading config or writing outputs.
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: &std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }
}
