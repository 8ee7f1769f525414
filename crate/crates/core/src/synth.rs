//! Ground-truth synthetic data generation.
//!
//! Forward-simulates resonance traces and Poisson-noisy count sweeps from
//! known parameters. Randomness is drawn from per-row ChaCha streams split
//! off a master seed, so output is byte-stable regardless of evaluation
//! order and identical specs always produce identical data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::DeviceConfig;
use crate::error::{Error, Result};
use crate::ring::{
    power_coupling_from_phase, rates_from_couplings, self_coupling_amplitude,
    transmission_spectrum, Resonance,
};
use crate::sfwm::{
    accidentals, coincidence_sfwm_term, singles_rate, Arm, CountRow, CountSweep, SfwmParams,
};
use crate::theory::escape_efficiency;

/// Everything needed to synthesize a dataset deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Ground-truth count-model parameters. In the coupling-sweep
    /// scenario, `gamma_eff` is the generation efficiency at critical
    /// coupling and `eta_s`/`eta_i` are ignored (derived from theory).
    pub params: SfwmParams,
    /// On-chip pump powers (mW), strictly increasing.
    #[serde(default = "default_power_grid")]
    pub power_grid_mw: Vec<f64>,
    /// Integration time per power point (s).
    #[serde(default = "default_integration")]
    pub integration_s: f64,
    /// Master seed; required so every dataset is reproducible.
    pub rng_seed: u64,
    /// Additive Gaussian noise on transmission traces (fraction of full
    /// scale).
    #[serde(default = "default_trace_noise")]
    pub trace_noise: f64,
    /// Heater voltages for the coupling sweep scenario.
    #[serde(default = "default_voltage_grid")]
    pub voltage_grid: Vec<f64>,
    /// Draw Poisson counting noise; false passes expectations through.
    #[serde(default = "default_true")]
    pub counting_noise: bool,
}

fn default_power_grid() -> Vec<f64> {
    (0..10).map(|i| 0.05 + 0.05 * i as f64).collect()
}

fn default_integration() -> f64 {
    10.0
}

fn default_trace_noise() -> f64 {
    0.005
}

fn default_voltage_grid() -> Vec<f64> {
    // 0.65 V up: weaker coupling leaves a sub-percent dip that carries no
    // usable resonance signal
    (0..17).map(|i| 0.65 + 0.2 * i as f64).collect()
}

fn default_true() -> bool {
    true
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.power_grid_mw.is_empty() {
            return Err(Error::Invalid("power grid is empty".into()));
        }
        for w in self.power_grid_mw.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Invalid("power grid must be strictly increasing".into()));
            }
        }
        if !self.integration_s.is_finite() || self.integration_s <= 0.0 {
            return Err(Error::Invalid("integration_s must be > 0".into()));
        }
        if self.trace_noise < 0.0 {
            return Err(Error::Invalid("trace_noise must be >= 0".into()));
        }
        let p_max = *self.power_grid_mw.last().expect("non-empty");
        if self.params.delta * p_max * p_max >= 1.0 {
            return Err(Error::ModelValidity {
                power_mw: p_max,
                delta: self.params.delta,
            });
        }
        Ok(())
    }
}

/// Deterministic per-row stream from the master seed.
fn row_rng(seed: u64, context: u64, row: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(context.wrapping_mul(1_000_003).wrapping_add(row + 1));
    rng
}

fn draw_poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng)
}

/// Synthesize a count sweep from ground-truth parameters.
///
/// Expected counts per row are rate * integration; observed counts are
/// Poisson draws converted back to rates, with coincidences clamped to the
/// smaller singles rate.
pub fn gen_count_sweep(spec: &SynthSpec) -> Result<CountSweep> {
    gen_count_sweep_at(spec, &spec.params, 0)
}

/// Count-sweep generation with an explicit parameter set and RNG context,
/// used by the coupling sweep where parameters vary per voltage.
pub fn gen_count_sweep_at(
    spec: &SynthSpec,
    params: &SfwmParams,
    context: u64,
) -> Result<CountSweep> {
    spec.validate()?;
    params.validate()?;
    // pulsed-pump accidentals at the repetition rate of the default bench
    let rep = crate::config::DeviceConfig::default().rep_rate_hz;
    gen_count_sweep_inner(spec, params, context, rep)
}

/// As [`gen_count_sweep_at`] with the repetition rate taken from a config.
pub fn gen_count_sweep_for_config(
    spec: &SynthSpec,
    params: &SfwmParams,
    context: u64,
    config: &DeviceConfig,
) -> Result<CountSweep> {
    spec.validate()?;
    params.validate()?;
    gen_count_sweep_inner(spec, params, context, config.rep_rate_hz)
}

fn gen_count_sweep_inner(
    spec: &SynthSpec,
    params: &SfwmParams,
    context: u64,
    rep_rate_hz: f64,
) -> Result<CountSweep> {
    let t = spec.integration_s;
    let mut rows = Vec::with_capacity(spec.power_grid_mw.len());
    for (i, &p) in spec.power_grid_mw.iter().enumerate() {
        let c_s = singles_rate(params, p, Arm::Signal)?;
        let c_i = singles_rate(params, p, Arm::Idler)?;
        let cc = coincidence_sfwm_term(params, p)? + accidentals(c_s, c_i, rep_rate_hz);
        let (c_s_obs, c_i_obs, cc_obs) = if spec.counting_noise {
            let mut rng = row_rng(spec.rng_seed, context, i as u64);
            let ns = draw_poisson(&mut rng, c_s * t) / t;
            let ni = draw_poisson(&mut rng, c_i * t) / t;
            let ncc = draw_poisson(&mut rng, cc * t) / t;
            (ns, ni, ncc.min(ns.min(ni)))
        } else {
            (c_s, c_i, cc.min(c_s.min(c_i)))
        };
        rows.push(CountRow {
            power_mw: p,
            integration_s: t,
            c_s: c_s_obs,
            c_i: c_i_obs,
            cc: cc_obs,
        });
    }
    CountSweep::new(rows)
}

/// Synthesize a transmission trace for one (t, a) pair.
///
/// The window spans six linewidths (capped at 80% of an FSR so adjacent
/// comb lines stay outside) with additive Gaussian noise of the given
/// amplitude; transmission is clamped to [0, 1.05] to allow measurement
/// ripple above unity.
pub fn gen_resonance_trace(
    t: f64,
    a: f64,
    config: &DeviceConfig,
    noise_amplitude: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    gen_resonance_trace_ctx(t, a, config, noise_amplitude, seed, 0, 801)
}

/// Trace generation with RNG context and point count control.
pub fn gen_resonance_trace_ctx(
    t: f64,
    a: f64,
    config: &DeviceConfig,
    noise_amplitude: f64,
    seed: u64,
    context: u64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if points < 16 {
        return Err(Error::Invalid("trace needs at least 16 points".into()));
    }
    let rates = rates_from_couplings(t, a, config)?;
    let fwhm_hz = (rates.gamma_hz + rates.m_hz) / (2.0 * std::f64::consts::PI);
    let span = (6.0 * fwhm_hz).min(0.8 * config.fsr_hz);
    let f0 = config.pump_angular_frequency() / (2.0 * std::f64::consts::PI);
    let detunings: Vec<f64> = (0..points)
        .map(|i| -span / 2.0 + span * i as f64 / (points - 1) as f64)
        .collect();
    let clean = transmission_spectrum(t, a, &detunings, config)?;
    let mut rng = row_rng(seed, context, 900_000);
    Ok(detunings
        .iter()
        .zip(clean)
        .map(|(df, tr)| {
            let noisy = if noise_amplitude > 0.0 {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                (tr + noise_amplitude * g).clamp(0.0, 1.05)
            } else {
                tr
            };
            (crate::config::SPEED_OF_LIGHT / (f0 + df), noisy)
        })
        .collect())
}

/// Ground truth attached to one voltage point of the coupling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageTruth {
    pub voltage: f64,
    pub self_coupling_t: f64,
    pub round_trip_a: f64,
    pub gamma_hz: f64,
    pub m_hz: f64,
    pub gamma_over_m: f64,
    pub escape_eff: f64,
    pub eta_s_extrinsic: f64,
    pub eta_i_extrinsic: f64,
    pub gamma_eff: f64,
    pub extinction_db: f64,
}

/// One voltage point: ground truth, resonance trace and count sweep.
#[derive(Debug, Clone)]
pub struct VoltagePoint {
    pub truth: VoltageTruth,
    pub resonance: Resonance,
    pub trace: Vec<(f64, f64)>,
    pub sweep: CountSweep,
}

/// Full synthetic coupling-variation scenario.
#[derive(Debug, Clone)]
pub struct Fig2Scenario {
    pub points: Vec<VoltagePoint>,
}

/// Synthesize the coupling sweep: for each voltage the heater phase sets
/// the coupling, the coupling sets the resonance and the theory curves set
/// the per-voltage generation efficiency and heralding efficiencies.
///
/// The generation efficiency scales with the field-enhancement factor
/// Gamma^2/(Gamma+M)^3 normalized to critical coupling; escape factors
/// enter through the extrinsic efficiencies.
pub fn gen_fig2_scenario(config: &DeviceConfig, spec: &SynthSpec) -> Result<Fig2Scenario> {
    spec.validate()?;
    if spec.voltage_grid.is_empty() {
        return Err(Error::Invalid("voltage grid is empty".into()));
    }
    let a = config.round_trip_amplitude();
    let mut points = Vec::with_capacity(spec.voltage_grid.len());
    for (v_idx, &volts) in spec.voltage_grid.iter().enumerate() {
        let phi = config.phase_at_voltage(volts);
        let k = power_coupling_from_phase(phi);
        let t = self_coupling_amplitude(k, config.coupler_excess_loss_db);
        let rates = rates_from_couplings(t, a, config)?;
        let (gamma, m) = (rates.gamma_hz, rates.m_hz);
        let escape = escape_efficiency(gamma, m)?;

        // field-enhancement part only, normalized to Gamma = M
        let gen_factor = gamma * gamma / (gamma + m).powi(3);
        let gen_at_critical = 1.0 / (8.0 * m);
        let gamma_eff = spec.params.gamma_eff * gen_factor / gen_at_critical;

        let eta_s = escape * config.loss_budget(Arm::Signal);
        let eta_i = escape * config.loss_budget(Arm::Idler);
        let params = SfwmParams {
            eta_s,
            eta_i,
            gamma_eff,
            ..spec.params
        };

        let tmin = crate::ring::on_resonance_transmission(t, a)?;
        let extinction_db = -10.0 * tmin.max(1e-12).log10();

        let trace = gen_resonance_trace_ctx(
            t,
            a,
            config,
            spec.trace_noise,
            spec.rng_seed,
            v_idx as u64 + 1,
            801,
        )?;
        let sweep = gen_count_sweep_for_config(spec, &params, v_idx as u64 + 1, config)?;

        points.push(VoltagePoint {
            truth: VoltageTruth {
                voltage: volts,
                self_coupling_t: t,
                round_trip_a: a,
                gamma_hz: gamma,
                m_hz: m,
                gamma_over_m: gamma / m,
                escape_eff: escape,
                eta_s_extrinsic: eta_s,
                eta_i_extrinsic: eta_i,
                gamma_eff,
                extinction_db,
            },
            resonance: Resonance::from_rates(
                config.pump_wavelength_m + config.resonance_detuning_m,
                gamma,
                m,
                extinction_db,
            ),
            trace,
            sweep,
        });
    }
    Ok(Fig2Scenario { points })
}

/// Device config used by the synthetic coupling sweep: same ring geometry
/// as the default bench, but a cleaner ring (round-trip transmission
/// 98.65%, lossless couplers) so that even strongly over-coupled
/// resonances stay well inside one FSR and the single-dip trace window
/// holds; critical coupling is calibrated to 1.45 V.
pub fn fig2_scenario_config() -> DeviceConfig {
    let mut cfg = DeviceConfig {
        round_trip_transmission: 0.9865,
        coupler_excess_loss_db: 0.0,
        ..DeviceConfig::default()
    };
    cfg.phase_per_volt_sq = cfg
        .calibrate_phase_per_volt_sq(1.45)
        .expect("scenario config calibrates");
    cfg.validated().expect("scenario config is valid")
}
