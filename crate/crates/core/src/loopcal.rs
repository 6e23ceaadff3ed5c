//! Feedback-loop modelling and spectrum calibration: controller and
//! open-loop responses, closed-loop suppression, the calibration that
//! undoes loop and optical-spring effects, and sampled-Nyquist stability
//! analysis.
//!
//! The plant is the phase-modulation actuation path, proportional to the
//! effective susceptibility: plant(Omega) = plant_scale * chi_eff(Omega).
//! Stability is judged by the winding of 1 + G(Omega) over a sampled
//! frequency grid against the count of unstable plant poles (an
//! anti-damped optical spring contributes one unstable complex pair).

use num_complex::Complex64;
use thiserror::Error;

use crate::budget::{FrequencyGrid, NoiseBudget};
use crate::cavity;
use crate::config::{ControllerParams, ValidatedSystem};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("budget grid does not match the loop-gain grid")]
    GridMismatch,
    #[error("stability grid [{got_min}, {got_max}] Hz must span [{need_min}, {need_max}] Hz")]
    InsufficientGridCoverage {
        got_min: f64,
        got_max: f64,
        need_min: f64,
        need_max: f64,
    },
}

/// Controller plus plant; supplies open- and closed-loop gains.
#[derive(Debug, Clone)]
pub struct LoopModel<'a> {
    pub controller: ControllerParams,
    pub plant: &'a ValidatedSystem,
}

/// Rational controller response gain * prod(1 + i Omega/z) / prod(1 + i Omega/p)
/// * e^{-i Omega tau}, with zeros/poles configured in Hz.
pub fn controller_response(ctrl: &ControllerParams, omega: f64) -> Complex64 {
    let mut resp = Complex64::from(ctrl.gain) * Complex64::from_polar(1.0, -omega * ctrl.delay_s);
    for z in &ctrl.zeros_hz {
        resp *= Complex64::new(1.0, omega / (2.0 * std::f64::consts::PI * z));
    }
    for p in &ctrl.poles_hz {
        resp /= Complex64::new(1.0, omega / (2.0 * std::f64::consts::PI * p));
    }
    resp
}

/// Open-loop gain evaluated over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopGain {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

/// Verdict of the sampled-Nyquist stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// Minimum distance of the G locus from the critical point -1.
    pub margin: f64,
}

impl<'a> LoopModel<'a> {
    pub fn new(controller: ControllerParams, plant: &'a ValidatedSystem) -> Self {
        LoopModel { controller, plant }
    }

    /// G(Omega) = controller * plant_scale * chi_eff(Omega).
    pub fn open_loop_gain(&self, omega: f64) -> Complex64 {
        controller_response(&self.controller, omega)
            * self.controller.plant_scale
            * cavity::effective_susceptibility(self.plant, omega).0
    }

    pub fn gain_table(&self, grid: &FrequencyGrid) -> LoopGain {
        let values = grid
            .points()
            .iter()
            .map(|&f| self.open_loop_gain(2.0 * std::f64::consts::PI * f))
            .collect();
        LoopGain {
            grid: grid.clone(),
            values,
        }
    }

    /// Count of unstable open-loop plant poles: 2 for an anti-damped
    /// optical spring pair, otherwise 0.
    pub fn unstable_plant_poles(&self) -> u32 {
        match cavity::optical_spring_resonance(self.plant) {
            Ok(res) if cavity::antidamping_rate(self.plant, res) < 0.0 => 2,
            _ => 0,
        }
    }

    /// Sampled Nyquist criterion over the grid. The grid must span at
    /// least [f_ref/100, 100*f_ref] where f_ref is the spring resonance
    /// (or the bare mechanical frequency when there is no spring).
    pub fn is_stable(&self, grid: &FrequencyGrid) -> Result<StabilityReport, LoopError> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let f_ref = cavity::optical_spring_resonance(self.plant)
            .map(|omega| omega / two_pi)
            .unwrap_or_else(|_| self.plant.mech().f_m_hz);
        let (need_min, need_max) = (f_ref / 100.0, f_ref * 100.0);
        if grid.min() > need_min || grid.max() < need_max {
            return Err(LoopError::InsufficientGridCoverage {
                got_min: grid.min(),
                got_max: grid.max(),
                need_min,
                need_max,
            });
        }
        let gain = self.gain_table(grid);
        // winding of 1 + G over positive frequencies; conjugate symmetry
        // doubles it for the full Nyquist contour
        let mut winding = 0.0;
        let mut margin = f64::INFINITY;
        let mut prev = (Complex64::from(1.0) + gain.values[0]).arg();
        for g in &gain.values {
            let f_val = Complex64::from(1.0) + g;
            let arg = f_val.arg();
            let mut delta = arg - prev;
            while delta > std::f64::consts::PI {
                delta -= 2.0 * std::f64::consts::PI;
            }
            while delta < -std::f64::consts::PI {
                delta += 2.0 * std::f64::consts::PI;
            }
            winding += delta;
            prev = arg;
            margin = margin.min(f_val.norm());
        }
        let encirclements = (winding / std::f64::consts::PI).round() as i64;
        Ok(StabilityReport {
            stable: encirclements == self.unstable_plant_poles() as i64,
            margin,
        })
    }
}

fn scaled(budget: &NoiseBudget, factor: impl Fn(usize) -> f64) -> NoiseBudget {
    let mut out = budget.clone();
    for series in out.series_mut() {
        for (i, v) in series.iter_mut().enumerate() {
            *v *= factor(i);
        }
    }
    out
}

/// Multiply every displacement series by the closed-loop suppression
/// |1/(1 + G)|^2.
pub fn closed_loop_spectrum(open: &NoiseBudget, gain: &LoopGain) -> Result<NoiseBudget, LoopError> {
    if open.grid != gain.grid {
        return Err(LoopError::GridMismatch);
    }
    Ok(scaled(open, |i| {
        (Complex64::from(1.0) + gain.values[i]).norm_sqr().recip()
    }))
}

/// Undo the loop: multiply every series by |1 + G|^2. With
/// `refer_to_bare` set, additionally rescale by |chi_bare/chi_eff|^2 to
/// refer the spectrum to the bare mechanical response.
pub fn undo_loop(
    closed: &NoiseBudget,
    gain: &LoopGain,
    refer_to_bare: Option<&ValidatedSystem>,
) -> Result<NoiseBudget, LoopError> {
    if closed.grid != gain.grid {
        return Err(LoopError::GridMismatch);
    }
    let spring: Vec<f64> = match refer_to_bare {
        Some(sys) => gain
            .grid
            .points()
            .iter()
            .map(|&f| {
                let omega = 2.0 * std::f64::consts::PI * f;
                let eff_inv = cavity::effective_stiffness(sys, omega);
                let bare_inv = bare_stiffness(sys, omega);
                (eff_inv / bare_inv).norm_sqr()
            })
            .collect(),
        None => vec![1.0; gain.grid.len()],
    };
    Ok(scaled(closed, |i| {
        (Complex64::from(1.0) + gain.values[i]).norm_sqr() * spring[i]
    }))
}

/// Bare structural-damping oscillator inverse susceptibility, N/m.
fn bare_stiffness(sys: &ValidatedSystem, omega: f64) -> Complex64 {
    let mech = sys.mech();
    let om2 = mech.omega_m() * mech.omega_m();
    mech.mass_kg * (Complex64::new(om2, om2 / mech.q) - Complex64::from(omega * omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::displacement_budget;
    use crate::config::{paper_config, validate_config};
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    fn paper_sys() -> ValidatedSystem {
        validate_config(paper_config()).unwrap()
    }

    fn paper_controller() -> ControllerParams {
        paper_config().controller.unwrap()
    }

    fn flat(gain: f64) -> ControllerParams {
        ControllerParams {
            gain,
            zeros_hz: vec![],
            poles_hz: vec![],
            delay_s: 0.0,
            plant_scale: 50.0,
        }
    }

    #[test]
    fn unity_controller() {
        let ctrl = flat(1.0);
        for f in [1.0, 1e3, 1e6] {
            let r = controller_response(&ctrl, TWO_PI * f);
            assert!((r - Complex64::from(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn first_order_lead_at_corner() {
        let mut ctrl = flat(1.0);
        ctrl.zeros_hz = vec![5e3];
        let r = controller_response(&ctrl, TWO_PI * 5e3);
        assert!((r.norm() - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.arg() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn pure_delay() {
        let mut ctrl = flat(2.0);
        ctrl.delay_s = 1e-6;
        let omega = TWO_PI * 100e3;
        let r = controller_response(&ctrl, omega);
        assert!((r.norm() - 2.0).abs() < 1e-12);
        assert!((r.arg() + omega * 1e-6).abs() < 1e-12);
    }

    #[test]
    fn open_loop_gain_properties() {
        let sys = paper_sys();
        let zero = LoopModel::new(flat(0.0), &sys);
        let one = LoopModel::new(flat(1.0), &sys);
        let two = LoopModel::new(flat(2.0), &sys);
        let res = cavity::optical_spring_resonance(&sys).unwrap();
        for f in [1e3, 2e4, res / TWO_PI, 5e5] {
            let omega = TWO_PI * f;
            assert_eq!(zero.open_loop_gain(omega).norm(), 0.0);
            let g1 = one.open_loop_gain(omega);
            let g2 = two.open_loop_gain(omega);
            assert!((g2 - 2.0 * g1).norm() < 1e-12 * g1.norm());
        }
        // |G| peaks near the spring resonance for a flat controller
        let grid = FrequencyGrid::log_spaced(1e3, 1e6, 200).unwrap();
        let table = one.gain_table(&grid);
        let peak_idx = table
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        let peak_f = grid.points()[peak_idx];
        assert!((peak_f - res / TWO_PI).abs() / (res / TWO_PI) < 0.05);
    }

    #[test]
    fn closed_loop_round_trip() {
        let sys = paper_sys();
        let grid = FrequencyGrid::log_spaced(100.0, 1e6, 50).unwrap();
        let open = displacement_budget(&sys, &grid);
        let model = LoopModel::new(paper_controller(), &sys);
        let gain = model.gain_table(&grid);
        let closed = closed_loop_spectrum(&open, &gain).unwrap();
        let back = undo_loop(&closed, &gain, None).unwrap();
        for name in NoiseBudget::SERIES_NAMES {
            let a = open.series(name).unwrap();
            let b = back.series(name).unwrap();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12 * x.abs(), "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_gain_is_identity() {
        let sys = paper_sys();
        let grid = FrequencyGrid::log_spaced(100.0, 1e6, 20).unwrap();
        let open = displacement_budget(&sys, &grid);
        let gain = LoopModel::new(flat(0.0), &sys).gain_table(&grid);
        let closed = closed_loop_spectrum(&open, &gain).unwrap();
        assert_eq!(closed, open);
        let undone = undo_loop(&open, &gain, None).unwrap();
        assert_eq!(undone, open);
    }

    #[test]
    fn deep_inband_suppression() {
        // |1/(1+G)|^2 <= 1 wherever |G| >= 2
        let sys = paper_sys();
        let grid = FrequencyGrid::log_spaced(100.0, 1e7, 100).unwrap();
        let gain = LoopModel::new(paper_controller(), &sys).gain_table(&grid);
        for g in &gain.values {
            if g.norm() >= 2.0 {
                assert!((Complex64::from(1.0) + g).norm_sqr().recip() <= 1.0);
            }
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let sys = paper_sys();
        let grid_a = FrequencyGrid::log_spaced(100.0, 1e6, 20).unwrap();
        let grid_b = FrequencyGrid::log_spaced(100.0, 1e6, 25).unwrap();
        let open = displacement_budget(&sys, &grid_a);
        let gain = LoopModel::new(flat(1.0), &sys).gain_table(&grid_b);
        assert!(matches!(
            closed_loop_spectrum(&open, &gain),
            Err(LoopError::GridMismatch)
        ));
        assert!(matches!(
            undo_loop(&open, &gain, None),
            Err(LoopError::GridMismatch)
        ));
    }

    #[test]
    fn spring_removal_low_frequency_factor() {
        // frozen |m(Omega_m^2(1+i/Q) - Omega^2) + K(Omega)|^2 / |m(Omega_m^2(1+i/Q) - Omega^2)|^2
        // evaluated at 100 Hz: 1.79230e9
        let sys = paper_sys();
        let grid = FrequencyGrid::new(vec![100.0]).unwrap();
        let open = displacement_budget(&sys, &grid);
        let gain = LoopModel::new(flat(0.0), &sys).gain_table(&grid);
        let bare = undo_loop(&open, &gain, Some(&sys)).unwrap();
        let factor = bare.total[0] / open.total[0];
        assert!((factor - 1.792_297e9).abs() / factor < 1e-4, "factor {factor}");
    }

    #[test]
    fn stability_verdicts() {
        let sys = paper_sys();
        let grid = FrequencyGrid::log_spaced(100.0, 2e7, 64).unwrap();

        // blue-detuned, no feedback: unstable
        let report = LoopModel::new(flat(0.0), &sys).is_stable(&grid).unwrap();
        assert!(!report.stable);
        assert!((report.margin - 1.0).abs() < 1e-12);

        // bundled lead controller: stable
        let report = LoopModel::new(paper_controller(), &sys)
            .is_stable(&grid)
            .unwrap();
        assert!(report.stable, "margin {}", report.margin);

        // red detuning, no feedback: stable
        let mut cfg = paper_config();
        cfg.cavity.detuning_hwhm = -0.6;
        let red = validate_config(cfg).unwrap();
        let grid_red = FrequencyGrid::log_spaced(1.0, 1e5, 64).unwrap();
        let report = LoopModel::new(flat(0.0), &red).is_stable(&grid_red).unwrap();
        assert!(report.stable);
    }

    #[test]
    fn stability_invariant_under_refinement() {
        let sys = paper_sys();
        let coarse = FrequencyGrid::log_spaced(100.0, 2e7, 64).unwrap();
        let fine = FrequencyGrid::log_spaced(100.0, 2e7, 128).unwrap();
        for ctrl in [flat(0.0), paper_controller()] {
            let model = LoopModel::new(ctrl, &sys);
            let a = model.is_stable(&coarse).unwrap();
            let b = model.is_stable(&fine).unwrap();
            assert_eq!(a.stable, b.stable);
        }
    }

    #[test]
    fn stability_requires_grid_coverage() {
        let sys = paper_sys();
        let narrow = FrequencyGrid::log_spaced(1e4, 1e6, 64).unwrap();
        assert!(matches!(
            LoopModel::new(flat(0.0), &sys).is_stable(&narrow),
            Err(LoopError::InsufficientGridCoverage { .. })
        ));
    }
}
