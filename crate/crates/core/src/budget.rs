//! Per-source displacement noise composition: thermal, quantum radiation
//! pressure (squeezing-aware), shot, dark, and classical intensity noise,
//! plus SQL curves, calibration lines, and squeeze-phase sweep maps.
//!
//! Force-noise conventions (single-sided):
//!
//! ```text
//! S_F^th(Omega)   = 4 kB T m Omega_m^2 / (Q Omega)            (structural damping, FDT)
//! S_F^rp(Omega)   = 16 hbar w0 P_c F / (pi c^2)
//!                   * 1/(1 + (Omega/gamma)^2) * V_aa          (amplitude-quadrature drive)
//! S_x^shot(Omega) = hbar^2 / S_F^rp,coh(Omega) * V_read / eta_ro
//! S_x^SQL(Omega)  = 2 hbar |chi_eff(Omega)|
//! ```
//!
//! The radiation-pressure prefactor follows from input-output relations
//! for a single-ended cavity: N = 2F/pi round trips transfer 2 hbar k per
//! photon, so the force fluctuation is (4F/pi)*(hbar w0/c)*delta_a with
//! delta_a the amplitude-quadrature fluctuation of the input field; its
//! single-sided PSD at photon flux P_c*pi/(hbar w0*2F) referred to the
//! circulating power gives the stated prefactor, low-pass filtered by the
//! cavity pole. The shot term is pinned so that the coherent lossless
//! force-imprecision product equals hbar^2 at every frequency.

use serde::Serialize;
use thiserror::Error;

use crate::cavity;
use crate::config::{MechanicalOscillatorParams, SpectralLine, ValidatedSystem};
use crate::constants::{BOLTZMANN, HBAR, SPEED_OF_LIGHT};
use crate::quantum::{
    self, apply_loss, quadrature_variance, squeezed_covariance, QuadratureCovariance,
};

/// Homodyne angle of the displacement readout, radians. The reflection
/// readout of the detuned cavity senses the amplitude quadrature, so
/// amplitude squeezing improves back-action and imprecision together.
pub const READOUT_ANGLE: f64 = 0.0;

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error("frequency grid must be non-empty, strictly increasing, and positive")]
    BadGrid,
    #[error("log grid needs fmin < fmax and >= 1 point per decade, got [{fmin}, {fmax}] at {ppd}")]
    BadGridSpec { fmin: f64, fmax: f64, ppd: u32 },
    #[error("frequency {0} Hz outside grid range [{1}, {2}]")]
    FrequencyOutOfRange(f64, f64, f64),
    #[error(transparent)]
    Quantum(#[from] quantum::QuantumError),
}

/// Strictly increasing positive frequency grid, Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, BudgetError> {
        if points.is_empty() || points[0] <= 0.0 || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BudgetError::BadGrid);
        }
        Ok(FrequencyGrid { points })
    }

    /// Log-spaced grid with exactly `ppd` points per decade, from fmin up
    /// to and including the last point <= fmax.
    pub fn log_spaced(fmin: f64, fmax: f64, ppd: u32) -> Result<Self, BudgetError> {
        if !(fmin > 0.0 && fmin < fmax && ppd >= 1) {
            return Err(BudgetError::BadGridSpec { fmin, fmax, ppd });
        }
        let n = ((fmax / fmin).log10() * ppd as f64 + 1e-9).floor() as usize;
        let points = (0..=n)
            .map(|i| fmin * 10f64.powf(i as f64 / ppd as f64))
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the grid point closest to `f_hz`.
    pub fn nearest_index(&self, f_hz: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            let d = (p - f_hz).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    /// Local bin width around grid point `i`, Hz.
    pub fn bin_width(&self, i: usize) -> f64 {
        let p = &self.points;
        match (i, p.len()) {
            (_, 1) => p[0],
            (0, _) => p[1] - p[0],
            (i, n) if i == n - 1 => p[n - 1] - p[n - 2],
            (i, _) => 0.5 * (p[i + 1] - p[i - 1]),
        }
    }
}

/// Thermal force PSD from structural damping, N^2/Hz.
pub fn thermal_force_psd(mech: &MechanicalOscillatorParams, omega: f64) -> f64 {
    let omega_m = mech.omega_m();
    4.0 * BOLTZMANN * mech.temperature_k * mech.mass_kg * omega_m * omega_m / (mech.q * omega)
}

/// Radiation-pressure force PSD for an injected state with amplitude
/// variance V_aa (already injection-loss degraded), N^2/Hz.
pub fn qrpn_force_psd(sys: &ValidatedSystem, v_injected: &QuadratureCovariance, omega: f64) -> f64 {
    let cav = sys.cavity();
    let prefactor = 16.0 * HBAR * sys.omega_carrier() * cav.circulating_power_w * cav.finesse
        / (std::f64::consts::PI * SPEED_OF_LIGHT * SPEED_OF_LIGHT);
    let x = omega / sys.hwhm();
    prefactor / (1.0 + x * x) * quadrature_variance(v_injected, 0.0)
}

/// Shot-noise (imprecision) displacement PSD, m^2/Hz. Pinned so the
/// coherent lossless force-imprecision product is hbar^2, degraded by the
/// readout-side efficiency and the readout-quadrature variance.
pub fn shot_displacement_psd(
    sys: &ValidatedSystem,
    v_readout: &QuadratureCovariance,
    omega: f64,
) -> f64 {
    let coherent_rp = qrpn_force_psd(sys, &QuadratureCovariance::vacuum(), omega);
    if coherent_rp == 0.0 {
        // no circulating power, no optical readout
        return 0.0;
    }
    HBAR * HBAR / coherent_rp * quadrature_variance(v_readout, READOUT_ANGLE) / sys.eta_readout()
}

/// Standard quantum limit 2 hbar |chi_eff(Omega)|, m^2/Hz (symmetrized
/// convention, optical-spring-modified susceptibility).
pub fn sql_psd(sys: &ValidatedSystem, omega: f64) -> f64 {
    2.0 * HBAR * cavity::effective_susceptibility(sys, omega).0.norm()
}

/// Squeezed state after the injection-side loss chain.
pub fn injected_state(sys: &ValidatedSystem) -> QuadratureCovariance {
    let sqz = &sys.config().squeezer;
    let pure = squeezed_covariance(sqz.r, sqz.angle_rad).expect("r validated non-negative");
    apply_loss(&pure, sys.eta_injection()).expect("eta validated in (0,1]")
}

/// Injected state further degraded by the readout-side chain.
pub fn readout_state(sys: &ValidatedSystem) -> QuadratureCovariance {
    apply_loss(&injected_state(sys), sys.eta_readout()).expect("eta validated in (0,1]")
}

/// Frequency grid with per-source displacement PSD series, m^2/Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub grid: FrequencyGrid,
    pub thermal: Vec<f64>,
    pub qrpn: Vec<f64>,
    pub shot: Vec<f64>,
    pub dark: Vec<f64>,
    pub classical: Vec<f64>,
    pub total: Vec<f64>,
    pub sql: Vec<f64>,
    /// Squeeze state the budget was computed with.
    pub squeeze_r: f64,
    pub squeeze_angle: f64,
}

impl NoiseBudget {
    pub const SERIES_NAMES: [&'static str; 7] =
        ["thermal", "qrpn", "shot", "dark", "classical", "total", "sql"];

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        match name {
            "thermal" => Some(&self.thermal),
            "qrpn" => Some(&self.qrpn),
            "shot" => Some(&self.shot),
            "dark" => Some(&self.dark),
            "classical" => Some(&self.classical),
            "total" => Some(&self.total),
            "sql" => Some(&self.sql),
            _ => None,
        }
    }

    pub(crate) fn series_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.thermal,
            &mut self.qrpn,
            &mut self.shot,
            &mut self.dark,
            &mut self.classical,
            &mut self.total,
            &mut self.sql,
        ]
    }
}

/// Compose the full displacement noise budget over a grid.
pub fn displacement_budget(sys: &ValidatedSystem, grid: &FrequencyGrid) -> NoiseBudget {
    let v_inj = injected_state(sys);
    let v_ro = readout_state(sys);
    let mech = sys.mech();
    let cav = sys.cavity();
    let dark_psd = sys
        .config()
        .readout
        .dark_noise_asd
        .map_or(0.0, |asd| asd * asd);
    let rin = sys.config().laser.classical_rin.unwrap_or(0.0);
    let rp_dc = 2.0 * cav.circulating_power_w / SPEED_OF_LIGHT;

    let n = grid.len();
    let mut budget = NoiseBudget {
        grid: grid.clone(),
        thermal: Vec::with_capacity(n),
        qrpn: Vec::with_capacity(n),
        shot: Vec::with_capacity(n),
        dark: Vec::with_capacity(n),
        classical: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
        sql: Vec::with_capacity(n),
        squeeze_r: sys.config().squeezer.r,
        squeeze_angle: sys.config().squeezer.angle_rad,
    };
    for &f in grid.points() {
        let omega = 2.0 * std::f64::consts::PI * f;
        let chi2 = cavity::effective_susceptibility(sys, omega).0.norm_sqr();
        let thermal = chi2 * thermal_force_psd(mech, omega);
        let qrpn = chi2 * qrpn_force_psd(sys, &v_inj, omega);
        let shot = shot_displacement_psd(sys, &v_ro, omega);
        let classical = chi2 * rp_dc * rp_dc * rin;
        budget.thermal.push(thermal);
        budget.qrpn.push(qrpn);
        budget.shot.push(shot);
        budget.dark.push(dark_psd);
        budget.classical.push(classical);
        budget.total.push(thermal + qrpn + shot + dark_psd + classical);
        budget.sql.push(sql_psd(sys, omega));
    }
    budget
}

/// Total-noise increase (dB) at one frequency for squeeze factor r in the
/// antisqueezing orientation (phase quadrature), relative to r = 0.
/// This is the callback [`quantum::fit_r_to_antisqueezing`] bisects on.
pub fn antisqueezing_increase_db(sys: &ValidatedSystem, at_hz: f64, r: f64) -> f64 {
    let grid = FrequencyGrid::new(vec![at_hz]).expect("positive frequency");
    let reference = displacement_budget(&sys.with_squeeze(0.0, 0.0), &grid);
    let rotated = displacement_budget(&sys.with_squeeze(r, std::f64::consts::FRAC_PI_2), &grid);
    10.0 * (rotated.total[0] / reference.total[0]).log10()
}

/// Fit the generated squeeze factor to a target total-noise increase.
pub fn fit_r(sys: &ValidatedSystem, target_db: f64, at_hz: f64) -> Result<f64, BudgetError> {
    Ok(quantum::fit_r_to_antisqueezing(target_db, |r| {
        antisqueezing_increase_db(sys, at_hz, r)
    })?)
}

/// Squeeze-phase sweep of total-noise ratios relative to the r = 0
/// reference, in dB.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSweepMap {
    pub phases: Vec<f64>,
    pub grid: FrequencyGrid,
    /// ratio_db[phase index][frequency index]
    pub ratio_db: Vec<Vec<f64>>,
}

/// Recompute the budget with the squeeze ellipse rotated to each phase and
/// emit 10 log10(total(theta)/total_ref), reference at r = 0. Excess
/// spectral lines configured on the system are phase-independent and enter
/// both numerator and reference.
pub fn phase_sweep_map(
    sys: &ValidatedSystem,
    grid: &FrequencyGrid,
    phases: &[f64],
) -> PhaseSweepMap {
    let lines: Vec<SpectralLine> = sys
        .config()
        .excess
        .as_ref()
        .map_or_else(Vec::new, |e| e.lines.clone());
    let with_lines = |b: NoiseBudget| add_spectral_lines(b, &lines);

    let reference = with_lines(displacement_budget(&sys.with_squeeze(0.0, 0.0), grid));
    let r = sys.config().squeezer.r;
    let ratio_db = phases
        .iter()
        .map(|&theta| {
            let b = with_lines(displacement_budget(&sys.with_squeeze(r, theta), grid));
            b.total
                .iter()
                .zip(&reference.total)
                .map(|(t, t0)| 10.0 * (t / t0).log10())
                .collect()
        })
        .collect();
    PhaseSweepMap {
        phases: phases.to_vec(),
        grid: grid.clone(),
        ratio_db,
    }
}

/// Fold a dither calibration line of the given displacement amplitude into
/// the total series at the nearest grid bin (power = amplitude^2 / bin width).
pub fn inject_calibration_line(
    mut budget: NoiseBudget,
    frequency_hz: f64,
    displacement_m: f64,
) -> Result<NoiseBudget, BudgetError> {
    if frequency_hz < budget.grid.min() || frequency_hz > budget.grid.max() {
        return Err(BudgetError::FrequencyOutOfRange(
            frequency_hz,
            budget.grid.min(),
            budget.grid.max(),
        ));
    }
    let i = budget.grid.nearest_index(frequency_hz);
    budget.total[i] += displacement_m * displacement_m / budget.grid.bin_width(i);
    Ok(budget)
}

/// Add user-supplied flat-amplitude spectral lines (m/sqrt(Hz)) to the
/// total series; they are squeeze-phase independent. Lines outside the
/// grid range are ignored.
pub fn add_spectral_lines(mut budget: NoiseBudget, lines: &[SpectralLine]) -> NoiseBudget {
    for line in lines {
        if line.frequency_hz < budget.grid.min() || line.frequency_hz > budget.grid.max() {
            continue;
        }
        let i = budget.grid.nearest_index(line.frequency_hz);
        budget.total[i] += line.asd_m_rthz * line.asd_m_rthz;
    }
    budget
}
