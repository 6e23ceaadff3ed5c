//! Gaussian quadrature-covariance algebra: squeezed-state construction,
//! rotation, loss channels, efficiency chains, and calibration of the
//! generated squeeze factor from an observed antisqueezing level.
//!
//! Covariances are vacuum-normalized (vacuum = identity) in the
//! (amplitude, phase) basis, so variances read directly as power ratios
//! against shot noise.

use thiserror::Error;

use crate::config::{LossChain, LossSide};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("squeeze factor must be >= 0, got {0}")]
    NegativeSqueeze(f64),
    #[error("efficiency must be in [0,1], got {0}")]
    EfficiencyOutOfRange(f64),
    #[error("antisqueezing target must be > 0 dB, got {0}")]
    NonPositiveTarget(f64),
    #[error("antisqueezing target {target_db} dB unattainable below r = {r_max}")]
    TargetUnattainable { target_db: f64, r_max: f64 },
}

/// 2x2 real symmetric covariance matrix of a Gaussian optical state,
/// vacuum-normalized to the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureCovariance {
    pub aa: f64,
    pub ap: f64,
    pub pp: f64,
}

impl QuadratureCovariance {
    pub fn vacuum() -> Self {
        QuadratureCovariance {
            aa: 1.0,
            ap: 0.0,
            pp: 1.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.aa * self.pp - self.ap * self.ap
    }

    pub fn trace(&self) -> f64 {
        self.aa + self.pp
    }

    /// Positive definite and det >= 1 (uncertainty relation) within
    /// numerical slack.
    pub fn is_physical(&self) -> bool {
        self.aa > 0.0 && self.pp > 0.0 && self.det() >= 1.0 - 1e-9
    }
}

/// Pure squeezed state V = R(theta) diag(e^{-2r}, e^{2r}) R(theta)^T.
/// theta = 0 is amplitude-squeezed.
pub fn squeezed_covariance(r: f64, theta: f64) -> Result<QuadratureCovariance, QuantumError> {
    if !(r >= 0.0) {
        return Err(QuantumError::NegativeSqueeze(r));
    }
    let v = QuadratureCovariance {
        aa: (-2.0 * r).exp(),
        ap: 0.0,
        pp: (2.0 * r).exp(),
    };
    Ok(rotate(&v, theta))
}

/// Rotate a covariance by phi: R(phi) V R(phi)^T. Preserves trace and
/// determinant.
pub fn rotate(v: &QuadratureCovariance, phi: f64) -> QuadratureCovariance {
    let (s, c) = phi.sin_cos();
    let (c2, s2, cs) = (c * c, s * s, c * s);
    QuadratureCovariance {
        aa: c2 * v.aa - 2.0 * cs * v.ap + s2 * v.pp,
        ap: cs * (v.aa - v.pp) + (c2 - s2) * v.ap,
        pp: s2 * v.aa + 2.0 * cs * v.ap + c2 * v.pp,
    }
}

/// Beamsplitter loss channel: eta V + (1 - eta) I.
pub fn apply_loss(
    v: &QuadratureCovariance,
    eta: f64,
) -> Result<QuadratureCovariance, QuantumError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(QuantumError::EfficiencyOutOfRange(eta));
    }
    Ok(QuadratureCovariance {
        aa: eta * v.aa + (1.0 - eta),
        ap: eta * v.ap,
        pp: eta * v.pp + (1.0 - eta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideFilter {
    All,
    Injection,
    Readout,
}

/// Product of the selected entries' efficiencies; empty selection gives 1.
pub fn chain_efficiency(chain: &LossChain, filter: SideFilter) -> f64 {
    chain
        .entries
        .iter()
        .filter(|e| match filter {
            SideFilter::All => true,
            SideFilter::Injection => e.side == LossSide::Injection,
            SideFilter::Readout => e.side == LossSide::Readout,
        })
        .map(|e| e.efficiency)
        .product()
}

/// Variance of the quadrature at `angle`: u^T V u with u = (cos, sin).
pub fn quadrature_variance(v: &QuadratureCovariance, angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    c * c * v.aa + 2.0 * c * s * v.ap + s * s * v.pp
}

/// Maximum squeeze factor searched by [`fit_r_to_antisqueezing`].
pub const FIT_R_MAX: f64 = 5.0;

/// Infer the generated squeeze factor r from an observed total-noise
/// increase (in dB, relative to the r = 0 reference) at one frequency.
///
/// `total_increase_db` must return the increase for a candidate r with
/// the squeeze ellipse rotated to the phase quadrature; monotonicity of
/// the total in r there makes the bisection root unique. Tolerance is
/// 1e-4 dB.
pub fn fit_r_to_antisqueezing<F>(target_db: f64, total_increase_db: F) -> Result<f64, QuantumError>
where
    F: Fn(f64) -> f64,
{
    if target_db == 0.0 {
        return Ok(0.0);
    }
    if !(target_db > 0.0) {
        return Err(QuantumError::NonPositiveTarget(target_db));
    }
    let (mut lo, mut hi) = (0.0f64, FIT_R_MAX);
    if total_increase_db(hi) < target_db {
        return Err(QuantumError::TargetUnattainable {
            target_db,
            r_max: FIT_R_MAX,
        });
    }
    // bisect until the bracket's dB span is below tolerance
    loop {
        let mid = 0.5 * (lo + hi);
        let val = total_increase_db(mid);
        if (val - target_db).abs() < 1e-4 || (hi - lo) < 1e-12 {
            return Ok(mid);
        }
        if val < target_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
