//! Closed-form coupling-dependence predictions.
//!
//! Escape efficiency and normalized detected brightness as functions of the
//! bus-coupling to intrinsic-loss ratio Gamma/M. Two brightness variants
//! are exposed: the pulsed-pump form Gamma^4/(Gamma+M)^5, which peaks at
//! Gamma = 4M, and the continuous-wave form Gamma^4/(Gamma+M)^6, which
//! peaks at Gamma = 2M. The pulsed variant is the default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Resonance;
use crate::search::golden_section_maximize;

/// Brightness model variant, named by the Gamma/M ratio at its maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrightnessVariant {
    /// Pulsed pump: B = Gamma^4 / (Gamma + M)^5, maximum at Gamma = 4M.
    #[default]
    PulsedOptimum4M,
    /// Continuous-wave pump: B = Gamma^4 / (Gamma + M)^6, maximum at
    /// Gamma = 2M.
    CwOptimum2M,
}

impl BrightnessVariant {
    /// Gamma/M ratio of the analytic maximum.
    pub fn optimum_ratio(&self) -> f64 {
        match self {
            BrightnessVariant::PulsedOptimum4M => 4.0,
            BrightnessVariant::CwOptimum2M => 2.0,
        }
    }
}

impl std::fmt::Display for BrightnessVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BrightnessVariant::PulsedOptimum4M => write!(f, "pulsed"),
            BrightnessVariant::CwOptimum2M => write!(f, "cw"),
        }
    }
}

/// Coupling regime label used for plot shading. Thresholds are display
/// conventions: Gamma < M under-coupled, up to 8M moderately over-coupled,
/// beyond that strongly over-coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    UnderCoupled,
    Critical,
    ModeratelyOverCoupled,
    StronglyOverCoupled,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeLabel::UnderCoupled => write!(f, "under-coupled"),
            RegimeLabel::Critical => write!(f, "critical"),
            RegimeLabel::ModeratelyOverCoupled => write!(f, "moderately over-coupled"),
            RegimeLabel::StronglyOverCoupled => write!(f, "strongly over-coupled"),
        }
    }
}

const STRONG_COUPLING_RATIO: f64 = 8.0;
const CRITICAL_RATIO_TOL: f64 = 1e-9;

fn check_rates(gamma: f64, m: f64) -> Result<()> {
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::Domain(format!("intrinsic rate M = {m} must be > 0")));
    }
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::Domain(format!("coupling rate Gamma = {gamma} must be >= 0")));
    }
    Ok(())
}

/// Probability that a cavity photon exits into the bus waveguide:
/// Gamma / (Gamma + M).
pub fn escape_efficiency(gamma: f64, m: f64) -> Result<f64> {
    check_rates(gamma, m)?;
    Ok(gamma / (gamma + m))
}

/// Relative detected pair rate at the given decay rates.
///
/// Unnormalized: the pulsed form carries units of 1/M, the CW form 1/M^2.
/// Use [`normalized_brightness`] to compare against the curve maximum.
pub fn brightness_curve(gamma: f64, m: f64, variant: BrightnessVariant) -> Result<f64> {
    check_rates(gamma, m)?;
    let kappa = gamma + m;
    Ok(match variant {
        BrightnessVariant::PulsedOptimum4M => gamma.powi(4) / kappa.powi(5),
        BrightnessVariant::CwOptimum2M => gamma.powi(4) / kappa.powi(6),
    })
}

/// Brightness relative to the analytic curve maximum, in [0, 1].
pub fn normalized_brightness(gamma: f64, m: f64, variant: BrightnessVariant) -> Result<f64> {
    let peak = brightness_curve(variant.optimum_ratio() * m, m, variant)?;
    Ok(brightness_curve(gamma, m, variant)? / peak)
}

/// Invert the escape efficiency: Gamma/M = eta / (1 - eta).
pub fn gamma_ratio_from_heralding(eta_escape: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta_escape) {
        return Err(Error::Domain(format!(
            "escape efficiency {eta_escape} must be in [0, 1); 1 requires a lossless ring"
        )));
    }
    Ok(eta_escape / (1.0 - eta_escape))
}

/// Locate the brightness maximum over Gamma in (0, hi*M] by golden-section
/// search. Returns the Gamma/M ratio at the maximum.
pub fn brightness_argmax_ratio(variant: BrightnessVariant, hi_ratio: f64) -> f64 {
    let (ratio, _) = golden_section_maximize(
        |g| brightness_curve(g, 1.0, variant).expect("valid rates"),
        1e-9,
        hi_ratio,
        1e-12,
        300,
    );
    ratio
}

/// Theory evaluation at one measured resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub gamma_over_m: f64,
    pub escape_eff: f64,
    /// Brightness relative to the analytic maximum of the chosen variant.
    pub brightness_norm: f64,
    pub regime: RegimeLabel,
}

/// Evaluate escape efficiency and normalized brightness at a resonance's
/// Gamma/M, with the display regime label.
pub fn predict_operating_point(
    resonance: &Resonance,
    variant: BrightnessVariant,
) -> Result<OperatingPoint> {
    let gamma = resonance.gamma_hz;
    let m = resonance.m_hz;
    let ratio = gamma / m;
    let regime = if (ratio - 1.0).abs() <= CRITICAL_RATIO_TOL {
        RegimeLabel::Critical
    } else if ratio < 1.0 {
        RegimeLabel::UnderCoupled
    } else if ratio <= STRONG_COUPLING_RATIO {
        RegimeLabel::ModeratelyOverCoupled
    } else {
        RegimeLabel::StronglyOverCoupled
    };
    Ok(OperatingPoint {
        gamma_over_m: ratio,
        escape_eff: escape_efficiency(gamma, m)?,
        brightness_norm: normalized_brightness(gamma, m, variant)?,
        regime,
    })
}

/// Sampled prediction curve over a Gamma/M range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub model_variant: BrightnessVariant,
    /// Intrinsic rate used for the sampling (rad/s).
    pub m_hz: f64,
    /// Rows of (gamma_over_m, escape_eff, brightness_norm); brightness is
    /// normalized so its maximum over the sampled grid is 1.
    pub samples: Vec<(f64, f64, f64)>,
}

impl TheoryCurve {
    /// Sample `n` points with log spacing over `[lo, hi]` (Gamma/M).
    pub fn sample(
        variant: BrightnessVariant,
        m_hz: f64,
        lo: f64,
        hi: f64,
        n: usize,
    ) -> Result<TheoryCurve> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Invalid(format!(
                "curve range [{lo}, {hi}] must satisfy 0 < lo < hi"
            )));
        }
        if n < 2 {
            return Err(Error::Invalid("curve needs at least 2 samples".into()));
        }
        let log_lo = lo.ln();
        let log_hi = hi.ln();
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let ratio = (log_lo + (log_hi - log_lo) * i as f64 / (n - 1) as f64).exp();
            let b = brightness_curve(ratio * m_hz, m_hz, variant)?;
            let e = escape_efficiency(ratio * m_hz, m_hz)?;
            raw.push((ratio, e, b));
        }
        let peak = raw.iter().map(|r| r.2).fold(f64::MIN, f64::max);
        let samples = raw
            .into_iter()
            .map(|(g, e, b)| (g, e, b / peak))
            .collect();
        Ok(TheoryCurve {
            model_variant: variant,
            m_hz,
            samples,
        })
    }
}
