//! All-pass micro-ring model with interferometer-tuned coupling.
//!
//! The chain is: heater phase -> power coupling K -> amplitude
//! self-coupling t -> transmission spectrum -> quality factors -> energy
//! decay rates. Decay rates follow the energy convention, so Q = omega/rate
//! holds exactly: the bus-coupling rate comes from -ln(t^2) per round trip
//! and the intrinsic rate from -ln(a^2).

use serde::{Deserialize, Serialize};

use crate::config::DeviceConfig;
use crate::error::{Error, Result};

/// Relative tolerance for deciding t == a (critical coupling).
const BRANCH_TOL: f64 = 1e-9;

/// Which side of critical coupling a resonance sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingBranch {
    /// t > a: bus coupling weaker than intrinsic loss.
    UnderCoupled,
    /// t = a within tolerance: extinction maximal.
    Critical,
    /// t < a: bus coupling dominates.
    OverCoupled,
}

impl std::fmt::Display for CouplingBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CouplingBranch::UnderCoupled => write!(f, "under-coupled"),
            CouplingBranch::Critical => write!(f, "critical"),
            CouplingBranch::OverCoupled => write!(f, "over-coupled"),
        }
    }
}

/// One fitted (or constructed) resonance dip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Dip center (m).
    pub center_wavelength_m: f64,
    /// Full width at half maximum of the loaded resonance (Hz).
    pub fwhm_hz: f64,
    /// Dip depth, -10 log10(T_min) (dB, >= 0).
    pub extinction_db: f64,
    /// Loaded quality factor omega / (Gamma + M).
    pub q_loaded: f64,
    /// Intrinsic quality factor omega / M.
    pub q_int: f64,
    /// Extrinsic (coupling) quality factor omega / Gamma.
    pub q_ext: f64,
    /// Bus coupling energy decay rate Gamma (rad/s).
    pub gamma_hz: f64,
    /// Intrinsic-loss energy decay rate M (rad/s).
    pub m_hz: f64,
    pub coupling_branch: CouplingBranch,
}

impl Resonance {
    /// Build a resonance from decay rates, keeping the Q relations exact
    /// by construction.
    pub fn from_rates(
        center_wavelength_m: f64,
        gamma_hz: f64,
        m_hz: f64,
        extinction_db: f64,
    ) -> Resonance {
        let omega = angular_frequency(center_wavelength_m);
        let kappa = gamma_hz + m_hz;
        let branch = if (gamma_hz - m_hz).abs() <= BRANCH_TOL * kappa {
            CouplingBranch::Critical
        } else if gamma_hz < m_hz {
            CouplingBranch::UnderCoupled
        } else {
            CouplingBranch::OverCoupled
        };
        Resonance {
            center_wavelength_m,
            fwhm_hz: kappa / (2.0 * std::f64::consts::PI),
            extinction_db,
            q_loaded: omega / kappa,
            q_int: omega / m_hz,
            q_ext: if gamma_hz > 0.0 { omega / gamma_hz } else { f64::INFINITY },
            gamma_hz,
            m_hz,
            coupling_branch: branch,
        }
    }

    /// Gamma / M, the coupling strength relative to intrinsic loss.
    pub fn gamma_over_m(&self) -> f64 {
        self.gamma_hz / self.m_hz
    }
}

/// Angular frequency 2 pi c / lambda (rad/s).
pub fn angular_frequency(wavelength_m: f64) -> f64 {
    2.0 * std::f64::consts::PI * crate::config::SPEED_OF_LIGHT / wavelength_m
}

/// Power coupling of a balanced interferometer coupler at phase `phi`:
/// K = sin^2(phi / 2). Periodic in 2 pi; any finite phase is accepted.
pub fn power_coupling_from_phase(phi: f64) -> f64 {
    let half = 0.5 * phi;
    let k = half.sin().powi(2);
    k.clamp(0.0, 1.0)
}

/// Amplitude self-coupling for power coupling `k`:
/// t = sqrt(1 - K) * 10^(-excess_dB / 20).
pub fn self_coupling_amplitude(k: f64, coupler_excess_loss_db: f64) -> f64 {
    (1.0 - k.clamp(0.0, 1.0)).sqrt() * 10f64.powf(-coupler_excess_loss_db / 20.0)
}

/// Intensity transmission of the all-pass ring at the given detunings from
/// resonance (Hz).
///
/// T(theta) = [(a - t)^2 + 4 t a sin^2(theta/2)] /
///            [(1 - t a)^2 + 4 t a sin^2(theta/2)],
/// with round-trip phase theta = 2 pi * detuning * T_rt.
///
/// Rejects the degenerate lossless uncoupled ring t = a = 1, whose
/// linewidth is undefined.
pub fn transmission_spectrum(
    t: f64,
    a: f64,
    detunings_hz: &[f64],
    config: &DeviceConfig,
) -> Result<Vec<f64>> {
    check_couplings(t, a)?;
    let t_rt = config.round_trip_time_s();
    let ta = t * a;
    let dip = (a - t).powi(2);
    let floor = (1.0 - ta).powi(2);
    Ok(detunings_hz
        .iter()
        .map(|df| {
            let theta = 2.0 * std::f64::consts::PI * df * t_rt;
            let s = 4.0 * ta * (0.5 * theta).sin().powi(2);
            (dip + s) / (floor + s)
        })
        .collect())
}

/// On-resonance transmission minimum ((t - a) / (1 - t a))^2.
pub fn on_resonance_transmission(t: f64, a: f64) -> Result<f64> {
    check_couplings(t, a)?;
    Ok(((t - a) / (1.0 - t * a)).powi(2))
}

fn check_couplings(t: f64, a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) || !t.is_finite() {
        return Err(Error::Domain(format!("self-coupling t = {t} must be in [0, 1]")));
    }
    if !(a > 0.0 && a <= 1.0) || !a.is_finite() {
        return Err(Error::Domain(format!("round-trip amplitude a = {a} must be in (0, 1]")));
    }
    if t == 1.0 && a == 1.0 {
        return Err(Error::Domain(
            "t = a = 1 is a lossless uncoupled ring with undefined linewidth".into(),
        ));
    }
    Ok(())
}

/// Intrinsic quality factor from the ring loss budget:
/// Q_int = omega * tau with energy decay time tau = T_rt / (-ln a^2).
pub fn q_int_from_loss(config: &DeviceConfig) -> Result<f64> {
    let a2 = config.round_trip_transmission;
    if a2 >= 1.0 {
        return Err(Error::Domain(format!(
            "round_trip_transmission = {a2} >= 1 has no intrinsic loss (infinite Q)"
        )));
    }
    if a2 <= 0.0 {
        return Err(Error::Domain(format!("round_trip_transmission = {a2} must be in (0, 1)")));
    }
    let tau = config.round_trip_time_s() / (-a2.ln());
    Ok(config.pump_angular_frequency() * tau)
}

/// Decay rates and loaded Q from the two quality factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    /// Bus coupling rate Gamma = omega / Q_ext (rad/s).
    pub gamma_hz: f64,
    /// Intrinsic loss rate M = omega / Q_int (rad/s).
    pub m_hz: f64,
    pub q_loaded: f64,
}

/// Gamma = omega/Q_ext, M = omega/Q_int, 1/Q_loaded = 1/Q_int + 1/Q_ext.
pub fn rates_from_q(q_int: f64, q_ext: f64, wavelength_m: f64) -> Result<DecayRates> {
    if !q_int.is_finite() || q_int <= 0.0 || !q_ext.is_finite() || q_ext <= 0.0 {
        return Err(Error::Domain(format!(
            "quality factors must be positive (q_int = {q_int}, q_ext = {q_ext})"
        )));
    }
    let omega = angular_frequency(wavelength_m);
    let gamma = omega / q_ext;
    let m = omega / q_int;
    Ok(DecayRates {
        gamma_hz: gamma,
        m_hz: m,
        q_loaded: omega / (gamma + m),
    })
}

/// Classify the coupling branch from the amplitude pair.
pub fn resolve_coupling_branch(t: f64, a: f64) -> CouplingBranch {
    let scale = t.abs().max(a.abs()).max(f64::MIN_POSITIVE);
    if (t - a).abs() <= BRANCH_TOL * scale {
        CouplingBranch::Critical
    } else if t > a {
        CouplingBranch::UnderCoupled
    } else {
        CouplingBranch::OverCoupled
    }
}

/// Decay rates implied by a (t, a) pair on a given ring:
/// Gamma = -ln(t^2)/T_rt, M = -ln(a^2)/T_rt.
pub fn rates_from_couplings(t: f64, a: f64, config: &DeviceConfig) -> Result<DecayRates> {
    check_couplings(t, a)?;
    if t == 0.0 {
        return Err(Error::Domain("t = 0 gives an unbounded coupling rate".into()));
    }
    let t_rt = config.round_trip_time_s();
    let gamma = -(t * t).ln() / t_rt;
    let m = -(a * a).ln() / t_rt;
    let omega = config.pump_angular_frequency();
    Ok(DecayRates {
        gamma_hz: gamma,
        m_hz: m,
        q_loaded: omega / (gamma + m),
    })
}
