//! Forward count-rate models for the photon-pair source.
//!
//! Singles follow C(P) = eta (gamma_eff P^2 + beta P)(1 - delta P^2) + DC,
//! coincidences CC(P) = eta_s eta_i gamma_eff P^2 (1 - delta P^2) + ACC.
//! The generation efficiency gamma_eff is stored in pairs/s/mW^2; report
//! writers convert to Mpairs/s/mW^2.

use serde::{Deserialize, Serialize};

pub use crate::config::Arm;
use crate::config::DeviceConfig;
use crate::error::{Error, Result};

/// Extracted (or ground-truth) parameters of the count model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfwmParams {
    /// Extrinsic heralding efficiency, signal arm (fraction).
    pub eta_s: f64,
    /// Extrinsic heralding efficiency, idler arm (fraction).
    pub eta_i: f64,
    /// Pair generation efficiency (pairs/s/mW^2).
    pub gamma_eff: f64,
    /// Linear background, signal arm (counts/s/mW).
    pub beta_s: f64,
    /// Linear background, idler arm (counts/s/mW).
    pub beta_i: f64,
    /// Nonlinear depreciation coefficient (1/mW^2).
    pub delta: f64,
    /// Dark counts, signal arm (counts/s).
    pub dc_s: f64,
    /// Dark counts, idler arm (counts/s).
    pub dc_i: f64,
}

impl SfwmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_s", self.eta_s), ("eta_i", self.eta_i)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} = {v} must be in [0, 1]")));
            }
        }
        for (name, v) in [
            ("gamma_eff", self.gamma_eff),
            ("beta_s", self.beta_s),
            ("beta_i", self.beta_i),
            ("delta", self.delta),
            ("dc_s", self.dc_s),
            ("dc_i", self.dc_i),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    fn arm(&self, arm: Arm) -> (f64, f64, f64) {
        match arm {
            Arm::Signal => (self.eta_s, self.beta_s, self.dc_s),
            Arm::Idler => (self.eta_i, self.beta_i, self.dc_i),
        }
    }
}

fn check_validity(delta: f64, p_mw: f64) -> Result<()> {
    if p_mw < 0.0 || !p_mw.is_finite() {
        return Err(Error::Invalid(format!("power {p_mw} mW must be >= 0")));
    }
    if delta * p_mw * p_mw >= 1.0 {
        return Err(Error::ModelValidity {
            power_mw: p_mw,
            delta,
        });
    }
    Ok(())
}

/// Detected singles rate for one arm (counts/s).
pub fn singles_rate(params: &SfwmParams, p_mw: f64, arm: Arm) -> Result<f64> {
    check_validity(params.delta, p_mw)?;
    let (eta, beta, dc) = params.arm(arm);
    let depletion = 1.0 - params.delta * p_mw * p_mw;
    Ok(eta * (params.gamma_eff * p_mw * p_mw + beta * p_mw) * depletion + dc)
}

/// Pair (coincidence) term alone, without accidentals (counts/s).
pub fn coincidence_sfwm_term(params: &SfwmParams, p_mw: f64) -> Result<f64> {
    check_validity(params.delta, p_mw)?;
    let depletion = 1.0 - params.delta * p_mw * p_mw;
    Ok(params.eta_s * params.eta_i * params.gamma_eff * p_mw * p_mw * depletion)
}

/// Detected coincidence rate including accidentals estimated from the
/// model's own singles rates (counts/s).
pub fn coincidence_rate(params: &SfwmParams, p_mw: f64, rep_rate_hz: f64) -> Result<f64> {
    let c_s = singles_rate(params, p_mw, Arm::Signal)?;
    let c_i = singles_rate(params, p_mw, Arm::Idler)?;
    Ok(coincidence_sfwm_term(params, p_mw)? + accidentals(c_s, c_i, rep_rate_hz))
}

/// Accidental coincidence rate in pulsed operation: c_s * c_i / rep_rate.
pub fn accidentals(c_s: f64, c_i: f64, rep_rate_hz: f64) -> f64 {
    debug_assert!(rep_rate_hz > 0.0);
    c_s * c_i / rep_rate_hz
}

/// Accidental coincidence rate for a continuous-wave pump with coincidence
/// window `tau_window_s`: c_s * c_i * tau.
pub fn accidentals_cw(c_s: f64, c_i: f64, tau_window_s: f64) -> f64 {
    debug_assert!(tau_window_s > 0.0);
    c_s * c_i * tau_window_s
}

/// Total extrinsic transmission for one arm:
/// eta_gc * eta_channel(arm) * eta_det.
pub fn loss_budget(config: &DeviceConfig, arm: Arm) -> f64 {
    config.loss_budget(arm)
}

/// Invert the loss budget to the intrinsic (escape) heralding efficiency:
/// eta_intrinsic = eta_extrinsic / (eta_gc * eta_channel * eta_det).
///
/// The result may exceed 1 when the measured extrinsic efficiency sits
/// above the calibrated budget; callers flag that rather than clamping.
pub fn intrinsic_heralding(eta_extrinsic: f64, arm: Arm, config: &DeviceConfig) -> Result<f64> {
    let budget = config.loss_budget(arm);
    if budget <= 0.0 {
        return Err(Error::Domain(format!(
            "loss budget for {arm} arm is zero; check eta_gc/eta_channel/eta_det"
        )));
    }
    if eta_extrinsic < 0.0 || !eta_extrinsic.is_finite() {
        return Err(Error::Invalid(format!("eta_extrinsic = {eta_extrinsic} must be >= 0")));
    }
    Ok(eta_extrinsic / budget)
}

/// One row of a power sweep: detected rates at one on-chip pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    /// On-chip average pump power (mW).
    pub power_mw: f64,
    /// Integration time (s).
    pub integration_s: f64,
    /// Signal singles (counts/s).
    pub c_s: f64,
    /// Idler singles (counts/s).
    pub c_i: f64,
    /// Coincidences (counts/s).
    pub cc: f64,
}

/// A measured (or synthesized) power sweep, canonically ordered by power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSweep {
    rows: Vec<CountRow>,
}

impl CountSweep {
    /// Build a sweep from rows in any order. Rows are sorted by power;
    /// duplicate powers, negative values and cc > min(c_s, c_i) rows are
    /// rejected.
    pub fn new(mut rows: Vec<CountRow>) -> Result<CountSweep> {
        if rows.is_empty() {
            return Err(Error::Invalid("count sweep has no rows".into()));
        }
        rows.sort_by(|a, b| a.power_mw.total_cmp(&b.power_mw));
        for (i, r) in rows.iter().enumerate() {
            let row = i + 1;
            if r.power_mw < 0.0 || !r.power_mw.is_finite() {
                return Err(Error::Invalid(format!("row {row}: power {} must be >= 0", r.power_mw)));
            }
            if !r.integration_s.is_finite() || r.integration_s <= 0.0 {
                return Err(Error::Invalid(format!(
                    "row {row}: integration {} must be > 0",
                    r.integration_s
                )));
            }
            for (name, v) in [("c_s", r.c_s), ("c_i", r.c_i), ("cc", r.cc)] {
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::Invalid(format!("row {row}: {name} = {v} must be >= 0")));
                }
            }
            if r.cc > r.c_s.min(r.c_i) * (1.0 + 1e-12) {
                return Err(Error::Invalid(format!(
                    "row {row}: cc = {} exceeds min(c_s, c_i) = {}",
                    r.cc,
                    r.c_s.min(r.c_i)
                )));
            }
        }
        for w in rows.windows(2) {
            if w[1].power_mw <= w[0].power_mw {
                return Err(Error::Invalid(format!(
                    "duplicate power {} mW; powers must be strictly increasing",
                    w[1].power_mw
                )));
            }
        }
        Ok(CountSweep { rows })
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total detected counts across all rows and channels.
    pub fn total_counts(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.c_s + r.c_i + r.cc) * r.integration_s)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_params() -> SfwmParams {
        SfwmParams {
            eta_s: 1.0,
            eta_i: 1.0,
            gamma_eff: 1e6,
            beta_s: 0.0,
            beta_i: 0.0,
            delta: 0.0,
            dc_s: 0.0,
            dc_i: 0.0,
        }
    }

    #[test]
    fn zero_power_gives_dark_counts() {
        let p = SfwmParams {
            dc_s: 123.0,
            dc_i: 45.0,
            ..unit_params()
        };
        assert_abs_diff_eq!(singles_rate(&p, 0.0, Arm::Signal).unwrap(), 123.0);
        assert_abs_diff_eq!(singles_rate(&p, 0.0, Arm::Idler).unwrap(), 45.0);
    }

    #[test]
    fn unit_case_singles() {
        assert_relative_eq!(
            singles_rate(&unit_params(), 1.0, Arm::Signal).unwrap(),
            1e6,
            epsilon = 1e-9
        );
    }

    #[test]
    fn depreciation_scales_sfwm_term() {
        let p = SfwmParams {
            delta: 0.1,
            ..unit_params()
        };
        assert_relative_eq!(
            singles_rate(&p, 1.0, Arm::Signal).unwrap(),
            0.9e6,
            epsilon = 1e-9
        );
    }

    #[test]
    fn validity_window_enforced() {
        let p = SfwmParams {
            delta: 0.5,
            ..unit_params()
        };
        assert!(matches!(
            singles_rate(&p, 2.0, Arm::Signal),
            Err(Error::ModelValidity { .. })
        ));
    }

    #[test]
    fn coincidences_zero_at_zero_power() {
        assert_abs_diff_eq!(coincidence_rate(&unit_params(), 0.0, 5e7).unwrap(), 0.0);
    }

    #[test]
    fn coincidences_unit_case() {
        // eta = 1, ACC suppressed by an enormous rep rate
        let cc = coincidence_rate(&unit_params(), 1.0, 1e18).unwrap();
        assert_relative_eq!(cc, 1e6, max_relative = 1e-6);
    }

    #[test]
    fn coincidences_product_rule() {
        let p = SfwmParams {
            eta_s: 0.2,
            eta_i: 0.18,
            ..unit_params()
        };
        // product rule: 0.2 * 0.18 * 1e6 = 3.6e4
        assert_relative_eq!(coincidence_sfwm_term(&p, 1.0).unwrap(), 3.6e4, epsilon = 1e-9);
    }

    #[test]
    fn accidentals_reference_and_bilinearity() {
        assert_abs_diff_eq!(accidentals(0.0, 0.0, 5e7), 0.0);
        assert_relative_eq!(accidentals(1e5, 1e5, 5e7), 200.0, epsilon = 1e-12);
        let base = accidentals(3.0e4, 7.0e4, 5e7);
        assert_relative_eq!(accidentals(6.0e4, 14.0e4, 5e7), 4.0 * base, epsilon = 1e-12);
        // symmetric in the two arms
        assert_abs_diff_eq!(accidentals(3e4, 7e4, 5e7), accidentals(7e4, 3e4, 5e7));
    }

    #[test]
    fn cw_accidentals_window_form() {
        assert_relative_eq!(accidentals_cw(1e5, 1e5, 1e-9), 1e10 * 1e-9, epsilon = 1e-12);
    }

    #[test]
    fn loss_budget_reference_values() {
        let cfg = DeviceConfig::default();
        // oracle: straight product of the bench constants
        assert_relative_eq!(
            loss_budget(&cfg, Arm::Idler),
            0.582 * 0.354 * 0.88,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            loss_budget(&cfg, Arm::Signal),
            0.582 * 0.357 * 0.88,
            epsilon = 1e-15
        );
        let unity = DeviceConfig {
            eta_gc: 1.0,
            eta_det: 1.0,
            eta_channel_s: 1.0,
            eta_channel_i: 1.0,
            ..cfg
        };
        assert_abs_diff_eq!(loss_budget(&unity, Arm::Signal), 1.0);
    }

    #[test]
    fn intrinsic_heralding_identity_and_headline() {
        let cfg = DeviceConfig::default();
        let budget = loss_budget(&cfg, Arm::Idler);
        assert_relative_eq!(
            intrinsic_heralding(budget, Arm::Idler, &cfg).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // dividing 0.17736 by the idler budget: exact quotient is 0.978243
        let eta = intrinsic_heralding(0.17736, Arm::Idler, &cfg).unwrap();
        assert_relative_eq!(eta, 0.17736 / (0.582 * 0.354 * 0.88), epsilon = 1e-15);
        assert_relative_eq!(eta, 0.9782430, epsilon = 1e-6);
        // signal arm divides by the 35.7% channel instead
        let eta_s = intrinsic_heralding(0.17736, Arm::Signal, &cfg).unwrap();
        assert_relative_eq!(eta_s, 0.17736 / (0.582 * 0.357 * 0.88), epsilon = 1e-15);
    }

    #[test]
    fn intrinsic_heralding_zero_budget_rejected() {
        let cfg = DeviceConfig {
            eta_det: 0.0,
            ..DeviceConfig::default()
        };
        assert!(intrinsic_heralding(0.2, Arm::Idler, &cfg).is_err());
    }

    #[test]
    fn intrinsic_heralding_may_exceed_unity() {
        let cfg = DeviceConfig::default();
        let eta = intrinsic_heralding(0.25, Arm::Idler, &cfg).unwrap();
        assert!(eta > 1.0, "no clamping: {eta}");
    }

    #[test]
    fn budget_then_inversion_is_identity() {
        let cfg = DeviceConfig::default();
        for arm in [Arm::Signal, Arm::Idler] {
            for eta in [0.05, 0.3, 0.7, 0.9787, 1.2] {
                let ext = eta * loss_budget(&cfg, arm);
                let back = intrinsic_heralding(ext, arm, &cfg).unwrap();
                assert_relative_eq!(back, eta, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn turnover_power_matches_analytic() {
        // pure SFWM singles (beta = 0) peak at P* = sqrt(1/(2 delta))
        let p = SfwmParams {
            delta: 0.1,
            ..unit_params()
        };
        let analytic = (1.0 / (2.0 * p.delta)).sqrt();
        let (p_star, _) = crate::search::golden_section_maximize(
            |x| singles_rate(&p, x, Arm::Signal).unwrap(),
            0.0,
            (1.0 / p.delta).sqrt() * 0.999,
            1e-12,
            300,
        );
        assert_relative_eq!(p_star, analytic, max_relative = 1e-3);
    }

    #[test]
    fn monotone_below_turnover() {
        let p = SfwmParams {
            delta: 0.1,
            beta_s: 1e3,
            ..unit_params()
        };
        let p_star = (1.0 / (2.0 * p.delta)).sqrt();
        let mut prev = 0.0;
        for i in 1..=100 {
            let power = p_star * 0.99 * i as f64 / 100.0;
            let c = singles_rate(&p, power, Arm::Signal).unwrap();
            assert!(c > prev, "singles must increase below the turnover");
            prev = c;
        }
    }

    #[test]
    fn klyshko_consistency_of_the_model() {
        // delta = beta = DC = 0: CC * gamma P^2 == C_s * C_i exactly
        let p = SfwmParams {
            eta_s: 0.37,
            eta_i: 0.22,
            ..unit_params()
        };
        for power in [0.05, 0.2, 0.8] {
            let cs = singles_rate(&p, power, Arm::Signal).unwrap();
            let ci = singles_rate(&p, power, Arm::Idler).unwrap();
            let cc = coincidence_sfwm_term(&p, power).unwrap();
            let gp2 = p.gamma_eff * power * power;
            assert_relative_eq!(cc * gp2, cs * ci, epsilon = 1e-12);
        }
    }

    #[test]
    fn coincidences_bounded_by_singles() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let p = SfwmParams {
                eta_s: rng.gen_range(0.01..0.95),
                eta_i: rng.gen_range(0.01..0.95),
                gamma_eff: rng.gen_range(1e4..5e6),
                beta_s: rng.gen_range(0.0..1e4),
                beta_i: rng.gen_range(0.0..1e4),
                delta: rng.gen_range(0.0..0.5),
                dc_s: rng.gen_range(0.0..500.0),
                dc_i: rng.gen_range(0.0..500.0),
            };
            let power = rng.gen_range(0.01..1.0);
            let rep = 5e7;
            let cs = singles_rate(&p, power, Arm::Signal).unwrap();
            let ci = singles_rate(&p, power, Arm::Idler).unwrap();
            if cs.max(ci) > rep * (1.0 - p.eta_s.max(p.eta_i)) {
                continue; // accidental-dominated corner excluded by construction
            }
            let cc = coincidence_rate(&p, power, rep).unwrap();
            assert!(
                cc <= cs.min(ci) + 1e-9,
                "cc = {cc} exceeds min singles {}",
                cs.min(ci)
            );
        }
    }

    #[test]
    fn sweep_canonicalizes_row_order() {
        let rows = vec![
            CountRow { power_mw: 0.3, integration_s: 1.0, c_s: 30.0, c_i: 30.0, cc: 3.0 },
            CountRow { power_mw: 0.1, integration_s: 1.0, c_s: 10.0, c_i: 10.0, cc: 1.0 },
            CountRow { power_mw: 0.2, integration_s: 1.0, c_s: 20.0, c_i: 20.0, cc: 2.0 },
        ];
        let sweep = CountSweep::new(rows).unwrap();
        let powers: Vec<f64> = sweep.rows().iter().map(|r| r.power_mw).collect();
        assert_eq!(powers, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn sweep_rejects_bad_rows() {
        let base = CountRow { power_mw: 0.1, integration_s: 1.0, c_s: 10.0, c_i: 10.0, cc: 1.0 };
        // cc above both singles
        let err = CountSweep::new(vec![CountRow { cc: 20.0, ..base }]).unwrap_err();
        assert!(err.to_string().contains("cc"));
        // duplicate powers
        let err = CountSweep::new(vec![base, base]).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
        // negative counts
        assert!(CountSweep::new(vec![CountRow { c_s: -1.0, ..base }]).is_err());
    }
}
