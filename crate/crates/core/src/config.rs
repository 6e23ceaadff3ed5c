//! System configuration: parameter types, validation, and derived
//! quantities shared by every other module.
//!
//! Configuration files are JSON with Hz/SI units throughout (see
//! `data/paper.json` for the bundled reference set). Validation is
//! all-or-nothing: every violated invariant is reported, each naming the
//! offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity;
use crate::constants::SPEED_OF_LIGHT;

pub const DEFAULT_WAVELENGTH_M: f64 = 1064e-9;
pub const DEFAULT_TEMPERATURE_K: f64 = 295.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", violations.join("\n"))]
    Invalid { violations: Vec<String> },
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OpticalCavityParams {
    pub length_m: f64,
    pub finesse: f64,
    pub wavelength_m: f64,
    /// Transmission of the end (cantilever) mirror, in parts.
    pub end_mirror_transmission: f64,
    /// Detuning in units of the HWHM linewidth; positive = blue.
    pub detuning_hwhm: f64,
    pub circulating_power_w: f64,
    /// Measured HWHM linewidth in Hz; overrides the finesse/length formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_override_hz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MechanicalOscillatorParams {
    pub mass_kg: f64,
    /// Natural mechanical frequency in Hz.
    pub f_m_hz: f64,
    pub q: f64,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE_K
}

impl MechanicalOscillatorParams {
    /// Natural angular frequency, rad/s.
    pub fn omega_m(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_m_hz
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LaserParams {
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    /// Flat relative-intensity-noise level, 1/Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_rin: Option<f64>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

impl Default for LaserParams {
    fn default() -> Self {
        LaserParams {
            wavelength_m: DEFAULT_WAVELENGTH_M,
            classical_rin: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SqueezerParams {
    /// Squeeze factor r (dimensionless); generated quadrature variances
    /// are e^{-2r} and e^{+2r}.
    pub r: f64,
    /// Squeeze angle in radians; 0 = amplitude quadrature squeezed.
    pub angle_rad: f64,
    /// OPO escape efficiency, folded into the injection-side efficiency.
    pub escape_efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSide {
    /// Degrades the state before the cavity (affects back-action).
    Injection,
    /// Degrades only the measured quadrature (affects shot noise).
    Readout,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LossEntry {
    pub name: String,
    pub efficiency: f64,
    pub side: LossSide,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct LossChain {
    pub entries: Vec<LossEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ReadoutParams {
    /// Flat equivalent-displacement dark noise, m/sqrt(Hz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_noise_asd: Option<f64>,
    /// Dither-tone calibration line frequency, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_line_hz: Option<f64>,
    /// Calibration line displacement amplitude, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_line_m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllerParams {
    pub gain: f64,
    #[serde(default)]
    pub zeros_hz: Vec<f64>,
    #[serde(default)]
    pub poles_hz: Vec<f64>,
    #[serde(default)]
    pub delay_s: f64,
    /// Plant actuation scale, N per unit controller output.
    pub plant_scale: f64,
}

/// Optional user-supplied excess noise: narrow spectral lines added to the
/// total series (higher-order mechanical modes, thermoelastic excess).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ExcessNoiseParams {
    #[serde(default)]
    pub lines: Vec<SpectralLine>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SpectralLine {
    pub frequency_hz: f64,
    /// Line height as amplitude spectral density, m/sqrt(Hz).
    pub asd_m_rthz: f64,
}

/// Full physical parameter set. See module docs for the file schema.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemConfig {
    pub cavity: OpticalCavityParams,
    pub mech: MechanicalOscillatorParams,
    #[serde(default)]
    pub laser: LaserParams,
    pub squeezer: SqueezerParams,
    pub losses: LossChain,
    #[serde(default)]
    pub readout: ReadoutParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess: Option<ExcessNoiseParams>,
}

impl SystemConfig {
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&raw)?)
    }

    /// Collect every invariant violation, naming the offending field.
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let cav = &self.cavity;
        if !(cav.length_m > 0.0) {
            v.push(format!("cavity.length_m: must be > 0, got {}", cav.length_m));
        }
        if !(cav.finesse > 1.0) {
            v.push(format!("cavity.finesse: must be > 1, got {}", cav.finesse));
        }
        if !(cav.wavelength_m > 0.0) {
            v.push(format!(
                "cavity.wavelength_m: must be > 0, got {}",
                cav.wavelength_m
            ));
        }
        if !(cav.end_mirror_transmission > 0.0 && cav.end_mirror_transmission < 1.0) {
            v.push(format!(
                "cavity.end_mirror_transmission: must be in (0,1), got {}",
                cav.end_mirror_transmission
            ));
        }
        if !(cav.detuning_hwhm.abs() < 10.0) {
            v.push(format!(
                "cavity.detuning_hwhm: |detuning| must be < 10, got {}",
                cav.detuning_hwhm
            ));
        }
        if !(cav.circulating_power_w >= 0.0) {
            v.push(format!(
                "cavity.circulating_power_w: must be >= 0, got {}",
                cav.circulating_power_w
            ));
        }
        if let Some(lw) = cav.linewidth_override_hz {
            if !(lw > 0.0) {
                v.push(format!(
                    "cavity.linewidth_override_hz: must be > 0, got {lw}"
                ));
            }
        }
        let mech = &self.mech;
        if !(mech.mass_kg > 0.0) {
            v.push(format!("mech.mass_kg: must be > 0, got {}", mech.mass_kg));
        }
        if !(mech.f_m_hz > 0.0) {
            v.push(format!("mech.f_m_hz: must be > 0, got {}", mech.f_m_hz));
        }
        if !(mech.q > 1.0) {
            v.push(format!("mech.q: must be > 1, got {}", mech.q));
        }
        if !(mech.temperature_k > 0.0) {
            v.push(format!(
                "mech.temperature_k: must be > 0, got {}",
                mech.temperature_k
            ));
        }
        if !(self.laser.wavelength_m > 0.0) {
            v.push(format!(
                "laser.wavelength_m: must be > 0, got {}",
                self.laser.wavelength_m
            ));
        }
        if let Some(rin) = self.laser.classical_rin {
            if !(rin >= 0.0) {
                v.push(format!("laser.classical_rin: must be >= 0, got {rin}"));
            }
        }
        let sqz = &self.squeezer;
        if !(sqz.r >= 0.0) {
            v.push(format!("squeezer.r: must be >= 0, got {}", sqz.r));
        }
        if !(sqz.escape_efficiency > 0.0 && sqz.escape_efficiency <= 1.0) {
            v.push(format!(
                "squeezer.escape_efficiency: must be in (0,1], got {}",
                sqz.escape_efficiency
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.losses.entries {
            if !(e.efficiency > 0.0 && e.efficiency <= 1.0) {
                v.push(format!(
                    "losses.{}: efficiency must be in (0,1], got {}",
                    e.name, e.efficiency
                ));
            }
            if !seen.insert(e.name.as_str()) {
                v.push(format!("losses.{}: duplicate entry name", e.name));
            }
        }
        if let Some(dn) = self.readout.dark_noise_asd {
            if !(dn >= 0.0) {
                v.push(format!("readout.dark_noise_asd: must be >= 0, got {dn}"));
            }
        }
        if let Some(f) = self.readout.cal_line_hz {
            if !(f > 0.0) {
                v.push(format!("readout.cal_line_hz: must be > 0, got {f}"));
            }
        }
        if let Some(ctrl) = &self.controller {
            for z in &ctrl.zeros_hz {
                if !(*z > 0.0) {
                    v.push(format!("controller.zeros_hz: must be > 0, got {z}"));
                }
            }
            for p in &ctrl.poles_hz {
                if !(*p > 0.0) {
                    v.push(format!("controller.poles_hz: must be > 0, got {p}"));
                }
            }
            if !(ctrl.delay_s >= 0.0) {
                v.push(format!(
                    "controller.delay_s: must be >= 0, got {}",
                    ctrl.delay_s
                ));
            }
            if !(ctrl.plant_scale > 0.0) {
                v.push(format!(
                    "controller.plant_scale: must be > 0, got {}",
                    ctrl.plant_scale
                ));
            }
        }
        if let Some(ex) = &self.excess {
            for (i, line) in ex.lines.iter().enumerate() {
                if !(line.frequency_hz > 0.0) {
                    v.push(format!(
                        "excess.lines[{i}].frequency_hz: must be > 0, got {}",
                        line.frequency_hz
                    ));
                }
                if !(line.asd_m_rthz >= 0.0) {
                    v.push(format!(
                        "excess.lines[{i}].asd_m_rthz: must be >= 0, got {}",
                        line.asd_m_rthz
                    ));
                }
            }
        }
        v
    }
}

/// Validated immutable system description with derived quantities
/// precomputed. Safe to share across concurrent workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSystem {
    config: SystemConfig,
    hwhm: f64,
    omega_carrier: f64,
    eta_injection: f64,
    eta_readout: f64,
}

/// Validate a raw config; rejects any invariant violation, reporting one
/// error line per violated invariant.
pub fn validate_config(raw: SystemConfig) -> Result<ValidatedSystem, ConfigError> {
    let violations = raw.violations();
    if !violations.is_empty() {
        return Err(ConfigError::Invalid { violations });
    }
    let hwhm = match raw.cavity.linewidth_override_hz {
        Some(hz) => 2.0 * std::f64::consts::PI * hz,
        None => cavity::cavity_hwhm(raw.cavity.finesse, raw.cavity.length_m)
            .expect("finesse/length already validated"),
    };
    let omega_carrier = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / raw.cavity.wavelength_m;
    let eta_injection = raw.squeezer.escape_efficiency
        * crate::quantum::chain_efficiency(&raw.losses, crate::quantum::SideFilter::Injection);
    let eta_readout =
        crate::quantum::chain_efficiency(&raw.losses, crate::quantum::SideFilter::Readout);
    Ok(ValidatedSystem {
        config: raw,
        hwhm,
        omega_carrier,
        eta_injection,
        eta_readout,
    })
}

impl ValidatedSystem {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    /// Cavity HWHM linewidth, rad/s (override or finesse/length formula).
    pub fn hwhm(&self) -> f64 {
        self.hwhm
    }

    /// Carrier angular frequency 2*pi*c/lambda, rad/s.
    pub fn omega_carrier(&self) -> f64 {
        self.omega_carrier
    }

    /// Escape efficiency times all injection-side chain entries.
    pub fn eta_injection(&self) -> f64 {
        self.eta_injection
    }

    /// Product of readout-side chain entries.
    pub fn eta_readout(&self) -> f64 {
        self.eta_readout
    }

    pub fn cavity(&self) -> &OpticalCavityParams {
        &self.config.cavity
    }

    pub fn mech(&self) -> &MechanicalOscillatorParams {
        &self.config.mech
    }

    /// Re-validate with a different squeeze state (used by phase sweeps
    /// and the antisqueezing fit).
    pub fn with_squeeze(&self, r: f64, angle_rad: f64) -> ValidatedSystem {
        let mut cfg = self.config.clone();
        cfg.squeezer.r = r;
        cfg.squeezer.angle_rad = angle_rad;
        validate_config(cfg).expect("squeeze parameters validated by caller")
    }
}

/// Power ratio from decibels: 10^(db/10).
pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decibels from a power ratio; errors on non-positive ratio.
pub fn power_ratio_to_db(ratio: f64) -> Result<f64, ConfigError> {
    if !(ratio > 0.0) {
        return Err(ConfigError::NonPositiveRatio(ratio));
    }
    Ok(10.0 * ratio.log10())
}

#[cfg(test)]
pub(crate) fn paper_config() -> SystemConfig {
    let raw = include_str!("../data/paper.json");
    serde_json::from_str(raw).unwrap()
}
