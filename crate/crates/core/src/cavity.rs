//! Detuned-cavity dynamics: linewidth, buildup, the frequency-dependent
//! complex optical-spring stiffness, the effective mechanical
//! susceptibility, and spring-resonance / instability diagnostics.
//!
//! The optical spring model is the two-pole response of a single-ended
//! detuned cavity:
//!
//! ```text
//! K(Omega) = K0 * (1 + delta^2) / ((1 + i*Omega/gamma)^2 + delta^2)
//! K0       = 16 * F * P_c * delta / (lambda * c * (1 + delta^2))
//! ```
//!
//! with `gamma` the HWHM in rad/s and `delta` the detuning in HWHM units.
//! Blue detuning (delta > 0) gives Re K > 0 (stiffening) and Im K < 0 at
//! Omega > 0 (anti-damping). The effective susceptibility combines the
//! spring with a structural-damping oscillator:
//!
//! ```text
//! chi_eff(Omega) = 1 / ( m*(Omega_m^2*(1 + i/Q) - Omega^2) + K(Omega) )
//! ```

use num_complex::Complex64;
use thiserror::Error;

use crate::config::ValidatedSystem;
use crate::constants::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum CavityError {
    #[error("finesse must be > 1, got {0}")]
    BadFinesse(f64),
    #[error("length must be > 0, got {0}")]
    BadLength(f64),
    #[error("no optical spring resonance: static stiffness {0} N/m is not positive")]
    NoSpringResonance(f64),
    #[error("spring resonance bisection failed to bracket a root")]
    BracketFailure,
}

/// Complex optical-spring stiffness at one sideband frequency, N/m.
/// Real part = spring, imaginary part = (anti-)damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexStiffness(pub Complex64);

/// Effective mechanical susceptibility at one sideband frequency, m/N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibility(pub Complex64);

/// HWHM linewidth 2*pi*c/(4*F*L), rad/s.
pub fn cavity_hwhm(finesse: f64, length: f64) -> Result<f64, CavityError> {
    if !(finesse > 1.0) {
        return Err(CavityError::BadFinesse(finesse));
    }
    if !(length > 0.0) {
        return Err(CavityError::BadLength(length));
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (4.0 * finesse * length))
}

/// Circulating-power ratio relative to resonance, 1/(1 + delta^2).
pub fn buildup_factor(detuning: f64) -> f64 {
    1.0 / (1.0 + detuning * detuning)
}

/// Static optical-spring stiffness K0, N/m. Odd in detuning.
pub fn static_stiffness(sys: &ValidatedSystem) -> f64 {
    let cav = sys.cavity();
    let delta = cav.detuning_hwhm;
    16.0 * cav.finesse * cav.circulating_power_w * delta
        / (cav.wavelength_m * SPEED_OF_LIGHT * (1.0 + delta * delta))
}

/// Frequency-dependent complex optical-spring stiffness K(Omega).
pub fn optical_spring_stiffness(sys: &ValidatedSystem, omega: f64) -> ComplexStiffness {
    let delta = sys.cavity().detuning_hwhm;
    let k0 = static_stiffness(sys);
    let gamma = sys.hwhm();
    let u = Complex64::new(1.0, omega / gamma);
    let denom = u * u + delta * delta;
    ComplexStiffness(Complex64::from(k0 * (1.0 + delta * delta)) / denom)
}

/// Inverse effective susceptibility, N/m. Kept separate so root-finding
/// and damping diagnostics avoid the reciprocal.
pub fn effective_stiffness(sys: &ValidatedSystem, omega: f64) -> Complex64 {
    let mech = sys.mech();
    let m = mech.mass_kg;
    let omega_m = mech.omega_m();
    let structural = Complex64::new(1.0, 1.0 / mech.q);
    m * (omega_m * omega_m * structural - omega * omega) + optical_spring_stiffness(sys, omega).0
}

/// Effective mechanical susceptibility chi_eff(Omega), m/N.
pub fn effective_susceptibility(sys: &ValidatedSystem, omega: f64) -> Susceptibility {
    Susceptibility(effective_stiffness(sys, omega).inv())
}

/// Optical-spring resonance: the root Omega* of Re[chi_eff^-1] = 0, rad/s.
///
/// Found by bracketing bisection over [Omega_m, 100*Omega_m*sqrt(1 + K0/(m*Omega_m^2))]
/// to 1e-6 relative tolerance. Errors when the spring is zero or negative.
pub fn optical_spring_resonance(sys: &ValidatedSystem) -> Result<f64, CavityError> {
    let k0 = static_stiffness(sys);
    if !(k0 > 0.0) {
        return Err(CavityError::NoSpringResonance(k0));
    }
    let mech = sys.mech();
    let omega_m = mech.omega_m();
    let mut lo = omega_m;
    let mut hi = 100.0 * omega_m * (1.0 + k0 / (mech.mass_kg * omega_m * omega_m)).sqrt();
    let f = |omega: f64| effective_stiffness(sys, omega).re;
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(CavityError::BracketFailure);
    }
    while (hi - lo) / hi > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Net damping rate Im[chi_eff^-1]/(2*m*Omega), 1/s. Negative signals
/// instability absent feedback.
pub fn antidamping_rate(sys: &ValidatedSystem, omega: f64) -> f64 {
    effective_stiffness(sys, omega).im / (2.0 * sys.mech().mass_kg * omega)
}
