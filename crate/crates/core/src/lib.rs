//! Frequency-domain simulator of displacement noise in a detuned
//! optomechanical cavity with squeezed-light injection.
//!
//! The model covers:
//! - detuned-cavity optical spring dynamics and the resulting effective
//!   mechanical susceptibility ([`cavity`]),
//! - Gaussian quadrature-covariance algebra for squeezed vacuum states
//!   propagated through loss chains ([`quantum`]),
//! - per-source displacement noise budgets (thermal, quantum radiation
//!   pressure, shot, dark, classical intensity) with squeeze-phase sweeps
//!   and SQL curves ([`budget`]),
//! - feedback-loop modelling, spectrum calibration, and Nyquist stability
//!   analysis ([`loopcal`]).
//!
//! Conventions: all spectral computations use angular frequency (rad/s)
//! internally; all I/O is in Hz. PSDs are single-sided, displacement in
//! m^2/Hz and force in N^2/Hz; emitted spectra are amplitude spectral
//! densities (sqrt of PSD). Quadrature covariances are vacuum-normalized
//! (vacuum = identity).

pub mod budget;
pub mod cavity;
pub mod cli;
pub mod config;
pub mod loopcal;
pub mod quantum;

/// Physical constants (SI, CODATA 2018).
pub mod constants {
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant, J/K.
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}

pub use config::{SystemConfig, ValidatedSystem};
