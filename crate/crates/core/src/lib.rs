//! Simulation and analysis toolkit for squeezing a single cavity mode with a
//! driven three-level atom in ladder configuration.
//!
//! The crate is organized in layers:
//!
//! * [`hilbert`] — truncated Fock space, composite atom–field space, states,
//!   operators, and expectation values.
//! * [`model`] — physical parameter sets and the Hamiltonian builders (full
//!   three-level model, adiabatically reduced three-level model, and the
//!   single-mode parametric form), plus the Gaussian transit profile.
//! * [`dynamics`] — time-dependent Schrödinger integration (fixed-step RK4
//!   with renormalization audit) and the analytic squeeze transform.
//! * [`analysis`] — quadrature statistics, off-resonant squeeze factors,
//!   damped-cavity estimates, transit-profile integrals, and detuning sweeps.
//! * [`cli`] — the `squeeze-sim` command-line front end (CSV/JSON emitters,
//!   run manifests).
//!
//! All Hamiltonians are expressed in units of angular frequency (`hbar = 1`)
//! and all quadratures follow the convention `X_phi = (a e^{-i phi} +
//! a^† e^{i phi})/2`, so the vacuum variance is 1/4.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod hilbert;
pub mod model;
pub mod report;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
