//! Device and test-bench constants.
//!
//! A [`DeviceConfig`] freezes everything about the chip and the measurement
//! chain that the models need: ring geometry, losses, pump parameters and
//! the thermal phase calibration of the coupling interferometer. Values are
//! immutable after validation; every model function takes the config by
//! reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Photon arm selector for per-channel efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Signal,
    Idler,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Signal => write!(f, "signal"),
            Arm::Idler => write!(f, "idler"),
        }
    }
}

/// Physical constants of the chip plus the test bench around it.
///
/// Units are SI as named in each field; efficiencies are intensity
/// fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    /// Ring circumference (m).
    pub ring_circumference_m: f64,
    /// Waveguide group index. Not a measured quantity for this device;
    /// defaults to 4.2, typical of a 450 x 250 nm silicon strip waveguide,
    /// and can be overridden in the config file.
    pub group_index: f64,
    /// Round-trip intensity transmission a^2 of the ring (0-1).
    pub round_trip_transmission: f64,
    /// Pump center wavelength (m).
    pub pump_wavelength_m: f64,
    /// Free spectral range (Hz); must agree with c/(n_g L) within 5%.
    pub fsr_hz: f64,
    /// Pump laser repetition rate (Hz).
    pub rep_rate_hz: f64,
    /// Pump spectral width (m).
    pub pump_spectral_width_m: f64,
    /// Grating coupler efficiency (fraction).
    pub eta_gc: f64,
    /// Detector efficiency (fraction).
    pub eta_det: f64,
    /// Signal-channel transmission from chip to detector (fraction).
    pub eta_channel_s: f64,
    /// Idler-channel transmission from chip to detector (fraction).
    pub eta_channel_i: f64,
    /// Excess intensity loss per directional coupler of the coupling
    /// interferometer (dB).
    pub coupler_excess_loss_db: f64,
    /// Thermal phase offset Phi_0 (rad) in Phi(V) = Phi_0 + k V^2.
    pub phase_offset_rad: f64,
    /// Thermo-optic coefficient k (rad/V^2) in Phi(V) = Phi_0 + k V^2.
    pub phase_per_volt_sq: f64,
    /// Scalar detuning applied to the resonance comb (m), standing in for
    /// the resonance-centering heater.
    pub resonance_detuning_m: f64,
    /// Relative 1-sigma uncertainty on the extrinsic loss budget, used to
    /// separate loss-calibration error from fit error in reports. Zero by
    /// default.
    #[serde(default)]
    pub loss_uncertainty_frac: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let mut cfg = DeviceConfig {
            ring_circumference_m: 699e-6,
            group_index: 4.2,
            round_trip_transmission: 0.944,
            pump_wavelength_m: 1550.12e-9,
            fsr_hz: 100e9,
            rep_rate_hz: 50e6,
            pump_spectral_width_m: 158e-12,
            eta_gc: 0.582,
            eta_det: 0.88,
            eta_channel_s: 0.357,
            eta_channel_i: 0.354,
            coupler_excess_loss_db: 0.05,
            phase_offset_rad: 0.0,
            phase_per_volt_sq: 0.0,
            resonance_detuning_m: 0.0,
            loss_uncertainty_frac: 0.0,
        };
        // Default thermal calibration puts critical coupling at 1.45 V.
        cfg.phase_per_volt_sq = cfg
            .calibrate_phase_per_volt_sq(1.45)
            .expect("default config calibrates");
        cfg
    }
}

impl DeviceConfig {
    /// Validate every invariant. Returns the config on success so it can
    /// be chained after construction or parsing.
    pub fn validated(self) -> Result<Self> {
        let frac = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} = {v} must be a fraction in [0, 1]")));
            }
            Ok(())
        };
        let pos = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Invalid(format!("{name} = {v} must be strictly positive")));
            }
            Ok(())
        };
        pos("ring_circumference_m", self.ring_circumference_m)?;
        pos("group_index", self.group_index)?;
        frac("round_trip_transmission", self.round_trip_transmission)?;
        pos("pump_wavelength_m", self.pump_wavelength_m)?;
        pos("fsr_hz", self.fsr_hz)?;
        pos("rep_rate_hz", self.rep_rate_hz)?;
        pos("pump_spectral_width_m", self.pump_spectral_width_m)?;
        frac("eta_gc", self.eta_gc)?;
        frac("eta_det", self.eta_det)?;
        frac("eta_channel_s", self.eta_channel_s)?;
        frac("eta_channel_i", self.eta_channel_i)?;
        if self.coupler_excess_loss_db < 0.0 || !self.coupler_excess_loss_db.is_finite() {
            return Err(Error::Invalid(format!(
                "coupler_excess_loss_db = {} must be >= 0",
                self.coupler_excess_loss_db
            )));
        }
        if self.loss_uncertainty_frac < 0.0 || !self.loss_uncertainty_frac.is_finite() {
            return Err(Error::Invalid(format!(
                "loss_uncertainty_frac = {} must be >= 0",
                self.loss_uncertainty_frac
            )));
        }
        if !self.phase_offset_rad.is_finite() || !self.phase_per_volt_sq.is_finite() {
            return Err(Error::Invalid("phase calibration must be finite".into()));
        }
        if !self.resonance_detuning_m.is_finite() {
            return Err(Error::Invalid("resonance_detuning_m must be finite".into()));
        }
        let fsr_geom = SPEED_OF_LIGHT / (self.group_index * self.ring_circumference_m);
        let rel = (self.fsr_hz - fsr_geom).abs() / fsr_geom;
        if rel > 0.05 {
            return Err(Error::Invalid(format!(
                "fsr_hz = {:.4e} differs from c/(n_g L) = {:.4e} by {:.1}% (> 5%)",
                self.fsr_hz,
                fsr_geom,
                rel * 100.0
            )));
        }
        Ok(self)
    }

    /// Ring round-trip time n_g L / c (s).
    pub fn round_trip_time_s(&self) -> f64 {
        self.group_index * self.ring_circumference_m / SPEED_OF_LIGHT
    }

    /// Round-trip amplitude transmission a = sqrt(a^2).
    pub fn round_trip_amplitude(&self) -> f64 {
        self.round_trip_transmission.sqrt()
    }

    /// Angular frequency of the pump mode (rad/s), including the comb
    /// detuning stand-in.
    pub fn pump_angular_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT
            / (self.pump_wavelength_m + self.resonance_detuning_m)
    }

    /// Amplitude transmission of one directional coupler,
    /// 10^(-excess_dB / 20).
    pub fn coupler_amplitude(&self) -> f64 {
        10f64.powf(-self.coupler_excess_loss_db / 20.0)
    }

    /// Interferometer phase at heater voltage V: Phi(V) = Phi_0 + k V^2.
    pub fn phase_at_voltage(&self, volts: f64) -> f64 {
        self.phase_offset_rad + self.phase_per_volt_sq * volts * volts
    }

    /// Thermo-optic coefficient k that places critical coupling (t = a) at
    /// `v_critical`, keeping the configured Phi_0.
    ///
    /// Errors if the ring loss exceeds what the coupler path can match
    /// (a > coupler amplitude), in which case t = a is unreachable.
    pub fn calibrate_phase_per_volt_sq(&self, v_critical: f64) -> Result<f64> {
        if !v_critical.is_finite() || v_critical <= 0.0 {
            return Err(Error::Invalid(format!("v_critical = {v_critical} must be > 0")));
        }
        let a = self.round_trip_amplitude();
        let lc = self.coupler_amplitude();
        if a > lc {
            return Err(Error::Domain(format!(
                "critical coupling unreachable: round-trip amplitude {a:.6} exceeds coupler amplitude {lc:.6}"
            )));
        }
        let phi_crit = 2.0 * (a / lc).acos();
        Ok((phi_crit - self.phase_offset_rad) / (v_critical * v_critical))
    }

    /// Extrinsic transmission budget for one arm:
    /// eta_gc * eta_channel(arm) * eta_det.
    pub fn loss_budget(&self, arm: Arm) -> f64 {
        let eta_channel = match arm {
            Arm::Signal => self.eta_channel_s,
            Arm::Idler => self.eta_channel_i,
        };
        self.eta_gc * eta_channel * self.eta_det
    }

    /// Parse a flat `key = value` config file. Unknown keys are rejected
    /// with their line number; missing keys fall back to defaults.
    pub fn from_key_value_str(text: &str, file: &str) -> Result<Self> {
        let mut cfg = DeviceConfig::default();
        let mut calibrated_explicitly = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx as u64 + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(file, Some(lineno), None, "expected `key = value`"));
            };
            let key = key.trim();
            let value = value.trim();
            let num: f64 = value.parse().map_err(|_| {
                Error::parse(file, Some(lineno), Some(key), format!("`{value}` is not a number"))
            })?;
            match key {
                "ring_circumference_m" => cfg.ring_circumference_m = num,
                "group_index" => cfg.group_index = num,
                "round_trip_transmission" => cfg.round_trip_transmission = num,
                "pump_wavelength_m" => cfg.pump_wavelength_m = num,
                "fsr_hz" => cfg.fsr_hz = num,
                "rep_rate_hz" => cfg.rep_rate_hz = num,
                "pump_spectral_width_m" => cfg.pump_spectral_width_m = num,
                "eta_gc" => cfg.eta_gc = num,
                "eta_det" => cfg.eta_det = num,
                "eta_channel_s" => cfg.eta_channel_s = num,
                "eta_channel_i" => cfg.eta_channel_i = num,
                "coupler_excess_loss_db" => cfg.coupler_excess_loss_db = num,
                "phase_offset_rad" => cfg.phase_offset_rad = num,
                "phase_per_volt_sq" => {
                    cfg.phase_per_volt_sq = num;
                    calibrated_explicitly = true;
                }
                "resonance_detuning_m" => cfg.resonance_detuning_m = num,
                "loss_uncertainty_frac" => cfg.loss_uncertainty_frac = num,
                other => {
                    return Err(Error::parse(
                        file,
                        Some(lineno),
                        Some(other),
                        "unknown config key",
                    ))
                }
            }
        }
        if !calibrated_explicitly {
            // Losses may have changed; re-anchor critical coupling at 1.45 V.
            cfg.phase_per_volt_sq = cfg.calibrate_phase_per_volt_sq(1.45)?;
        }
        cfg.validated()
    }

    /// Read a config file from disk (see [`Self::from_key_value_str`]).
    pub fn from_file(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(&name, None, None, e.to_string()))?;
        Self::from_key_value_str(&text, &name)
    }

    /// Apply `key=value` overrides on top of this config (CLI layer).
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut text = String::new();
        for ov in overrides {
            writeln!(text, "{ov}").expect("write to string");
        }
        // Reuse the file parser for identical validation and diagnostics.
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse("--set", Some(idx as u64 + 1), None, "expected KEY=VALUE"));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut serialized = String::new();
        for (k, v) in &map {
            writeln!(serialized, "{k} = {v}").expect("write to string");
        }
        if !map.is_empty() {
            let base = self.clone();
            let overridden = DeviceConfig::from_key_value_override(&serialized, base)?;
            self = overridden;
        }
        self.validated()
    }

    fn from_key_value_override(text: &str, base: DeviceConfig) -> Result<Self> {
        let mut cfg = base;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx as u64 + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').expect("pre-tokenized");
            let key = key.trim();
            let value = value.trim();
            let num: f64 = value.parse().map_err(|_| {
                Error::parse("--set", Some(lineno), Some(key), format!("`{value}` is not a number"))
            })?;
            match key {
                "ring_circumference_m" => cfg.ring_circumference_m = num,
                "group_index" => cfg.group_index = num,
                "round_trip_transmission" => cfg.round_trip_transmission = num,
                "pump_wavelength_m" => cfg.pump_wavelength_m = num,
                "fsr_hz" => cfg.fsr_hz = num,
                "rep_rate_hz" => cfg.rep_rate_hz = num,
                "pump_spectral_width_m" => cfg.pump_spectral_width_m = num,
                "eta_gc" => cfg.eta_gc = num,
                "eta_det" => cfg.eta_det = num,
                "eta_channel_s" => cfg.eta_channel_s = num,
                "eta_channel_i" => cfg.eta_channel_i = num,
                "coupler_excess_loss_db" => cfg.coupler_excess_loss_db = num,
                "phase_offset_rad" => cfg.phase_offset_rad = num,
                "phase_per_volt_sq" => cfg.phase_per_volt_sq = num,
                "resonance_detuning_m" => cfg.resonance_detuning_m = num,
                "loss_uncertainty_frac" => cfg.loss_uncertainty_frac = num,
                other => {
                    return Err(Error::parse("--set", Some(lineno), Some(other), "unknown config key"))
                }
            }
        }
        Ok(cfg)
    }

    /// Render as the canonical `key = value` text format.
    pub fn to_key_value_string(&self) -> String {
        let mut s = String::new();
        let mut w = |k: &str, v: f64| writeln!(s, "{k} = {v}").expect("write to string");
        w("ring_circumference_m", self.ring_circumference_m);
        w("group_index", self.group_index);
        w("round_trip_transmission", self.round_trip_transmission);
        w("pump_wavelength_m", self.pump_wavelength_m);
        w("fsr_hz", self.fsr_hz);
        w("rep_rate_hz", self.rep_rate_hz);
        w("pump_spectral_width_m", self.pump_spectral_width_m);
        w("eta_gc", self.eta_gc);
        w("eta_det", self.eta_det);
        w("eta_channel_s", self.eta_channel_s);
        w("eta_channel_i", self.eta_channel_i);
        w("coupler_excess_loss_db", self.coupler_excess_loss_db);
        w("phase_offset_rad", self.phase_offset_rad);
        w("phase_per_volt_sq", self.phase_per_volt_sq);
        w("resonance_detuning_m", self.resonance_detuning_m);
        w("loss_uncertainty_frac", self.loss_uncertainty_frac);
        s
    }
}
