//! Joint fitting of singles and coincidence power sweeps.
//!
//! All three curves share gamma_eff and delta; accidentals are computed
//! per row from the measured singles, so they enter the coincidence model
//! as fixed offsets. Residuals are taken in accumulated counts with
//! Poisson weights 1/max(counts, 1).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::DeviceConfig;
use crate::error::{Error, Result};
use crate::fit::lm::{least_squares, FitProblem, FitResult, ParamSpec};
use crate::sfwm::{accidentals, CountRow, CountSweep, SfwmParams};

/// Fitting strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// All eight parameters.
    #[default]
    Full,
    /// Restrict to rows below a power threshold and pin delta to zero.
    LowPowerLinearized,
    /// One shared linear background for both arms.
    SharedBeta,
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMode::Full => write!(f, "full"),
            FitMode::LowPowerLinearized => write!(f, "low-power"),
            FitMode::SharedBeta => write!(f, "shared-beta"),
        }
    }
}

/// Controls for [`fit_counts`].
#[derive(Debug, Clone, Copy)]
pub struct CountFitOptions {
    pub mode: FitMode,
    /// Rows above this power are dropped in low-power mode.
    pub low_power_max_mw: f64,
}

impl Default for CountFitOptions {
    fn default() -> Self {
        CountFitOptions {
            mode: FitMode::Full,
            low_power_max_mw: 0.05,
        }
    }
}

/// Per-parameter 1-sigma uncertainties, mirroring [`SfwmParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfwmSigmas {
    pub eta_s: f64,
    pub eta_i: f64,
    pub gamma_eff: f64,
    pub beta_s: f64,
    pub beta_i: f64,
    pub delta: f64,
    pub dc_s: f64,
    pub dc_i: f64,
}

/// Result of a count-model fit.
#[derive(Debug, Clone)]
pub struct SfwmFit {
    pub params: SfwmParams,
    pub sigmas: SfwmSigmas,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mode: FitMode,
    pub warnings: Vec<String>,
    pub fit: FitResult,
}

/// Data-driven initial guesses: dark counts from the lowest-power row,
/// eta*gamma and eta*beta products from a two-point quadratic on
/// background-subtracted counts, heralding ratios from the
/// coincidence-to-singles quotient at the highest power.
pub fn seed_estimates(sweep: &CountSweep, rep_rate_hz: f64) -> SfwmParams {
    let rows = sweep.rows();
    let n = rows.len();
    let first = &rows[0];
    let last = &rows[n - 1];
    let mid = &rows[n / 2];

    let dc_s = first.c_s;
    let dc_i = first.c_i;

    let quad = |y_mid: f64, y_hi: f64, p_mid: f64, p_hi: f64| -> (f64, f64) {
        let y1 = (y_mid).max(1e-9);
        let y2 = (y_hi).max(1e-9);
        let a = (y2 / p_hi - y1 / p_mid) / (p_hi - p_mid);
        let b = y1 / p_mid - a * p_mid;
        (a.max(1e-9), b.max(0.0))
    };
    let (a_s, b_s) = quad(mid.c_s - dc_s, last.c_s - dc_s, mid.power_mw, last.power_mw);
    let (a_i, b_i) = quad(mid.c_i - dc_i, last.c_i - dc_i, mid.power_mw, last.power_mw);

    let acc_last = accidentals(last.c_s, last.c_i, rep_rate_hz);
    let cc_corr = (last.cc - acc_last).max(0.0);
    let eta_i = (cc_corr / (last.c_s - dc_s).max(1.0)).clamp(1e-3, 1.45);
    let eta_s = (cc_corr / (last.c_i - dc_i).max(1.0)).clamp(1e-3, 1.45);

    // a_s = eta_s * gamma_eff; average the two arms' implied gamma
    let gamma = 0.5 * (a_s / eta_s + a_i / eta_i);

    SfwmParams {
        eta_s,
        eta_i,
        gamma_eff: gamma.max(1.0),
        beta_s: b_s / eta_s,
        beta_i: b_i / eta_i,
        delta: 0.0,
        dc_s,
        dc_i,
    }
}

/// The coincidence-to-corrected-singles quotient at the highest power --
/// the classic heralding estimator used to seed the idler efficiency.
pub fn klyshko_idler_efficiency(sweep: &CountSweep, rep_rate_hz: f64) -> f64 {
    let rows = sweep.rows();
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    let acc = accidentals(last.c_s, last.c_i, rep_rate_hz);
    ((last.cc - acc).max(0.0)) / (last.c_s - first.c_s).max(1.0)
}

struct ModelLayout {
    shared_beta: bool,
}

impl ModelLayout {
    fn unpack(&self, p: &[f64]) -> SfwmParams {
        if self.shared_beta {
            SfwmParams {
                eta_s: p[0],
                eta_i: p[1],
                gamma_eff: p[2],
                beta_s: p[3],
                beta_i: p[3],
                delta: p[4],
                dc_s: p[5],
                dc_i: p[6],
            }
        } else {
            SfwmParams {
                eta_s: p[0],
                eta_i: p[1],
                gamma_eff: p[2],
                beta_s: p[3],
                beta_i: p[4],
                delta: p[5],
                dc_s: p[6],
                dc_i: p[7],
            }
        }
    }
}

/// Fit the count model to a power sweep.
///
/// Full and shared-beta modes need at least 6 power points; low-power mode
/// needs 3. A sweep whose coincidence column is all zero cannot separate
/// the heralding efficiencies from gamma_eff and is rejected.
pub fn fit_counts(
    sweep: &CountSweep,
    config: &DeviceConfig,
    options: &CountFitOptions,
) -> Result<SfwmFit> {
    let mut warnings = Vec::new();

    let rows_all = sweep.rows();
    if rows_all.iter().all(|r| r.cc == 0.0) {
        return Err(Error::Identifiability(
            "coincidence column is all zero; eta and gamma_eff are degenerate from singles alone"
                .into(),
        ));
    }

    let rows: Vec<CountRow> = match options.mode {
        FitMode::LowPowerLinearized => {
            let kept: Vec<CountRow> = rows_all
                .iter()
                .copied()
                .filter(|r| r.power_mw <= options.low_power_max_mw)
                .collect();
            if kept.is_empty() {
                warnings.push(format!(
                    "no rows at or below {} mW; fitting all rows with delta pinned to 0",
                    options.low_power_max_mw
                ));
                rows_all.to_vec()
            } else {
                kept
            }
        }
        _ => rows_all.to_vec(),
    };

    let min_rows = match options.mode {
        FitMode::LowPowerLinearized => 3,
        _ => 6,
    };
    if rows.len() < min_rows {
        return Err(Error::Invalid(format!(
            "{} power points are too few for {} mode (need {min_rows})",
            rows.len(),
            options.mode
        )));
    }

    let subset = CountSweep::new(rows.clone())?;
    let seeds = seed_estimates(&subset, config.rep_rate_hz);

    let p_max = rows.last().expect("non-empty").power_mw;
    let delta_max = 0.999 / (p_max * p_max);

    let shared_beta = options.mode == FitMode::SharedBeta;
    let pin_delta = options.mode == FitMode::LowPowerLinearized;
    let layout = ModelLayout { shared_beta };

    let eta_hi = 1.5;
    let mut params = vec![
        ParamSpec::bounded("eta_s", seeds.eta_s.min(1.45), 0.0, eta_hi),
        ParamSpec::bounded("eta_i", seeds.eta_i.min(1.45), 0.0, eta_hi),
        ParamSpec::bounded("gamma_eff", seeds.gamma_eff, 0.0, f64::INFINITY),
    ];
    if shared_beta {
        params.push(ParamSpec::bounded(
            "beta",
            0.5 * (seeds.beta_s + seeds.beta_i),
            0.0,
            f64::INFINITY,
        ));
    } else {
        params.push(ParamSpec::bounded("beta_s", seeds.beta_s, 0.0, f64::INFINITY));
        params.push(ParamSpec::bounded("beta_i", seeds.beta_i, 0.0, f64::INFINITY));
    }
    if pin_delta {
        params.push(ParamSpec::fixed("delta", 0.0));
    } else {
        // seeded just inside the box so the bound transform can move it
        params.push(ParamSpec::bounded("delta", 1e-6 * delta_max, 0.0, delta_max));
    }
    params.push(ParamSpec::bounded("dc_s", seeds.dc_s, 0.0, f64::INFINITY));
    params.push(ParamSpec::bounded("dc_i", seeds.dc_i, 0.0, f64::INFINITY));

    // accidentals from the measured singles, fixed per row
    let accs: Vec<f64> = rows
        .iter()
        .map(|r| accidentals(r.c_s, r.c_i, config.rep_rate_hz))
        .collect();

    // residuals and weights in accumulated-count space, rows then channels:
    // [c_s rows..., c_i rows..., cc rows...]
    let n_rows = rows.len();
    let mut weights = Vec::with_capacity(3 * n_rows);
    for r in &rows {
        weights.push(1.0 / (r.c_s * r.integration_s).max(1.0));
    }
    for r in &rows {
        weights.push(1.0 / (r.c_i * r.integration_s).max(1.0));
    }
    for r in &rows {
        weights.push(1.0 / (r.cc * r.integration_s).max(1.0));
    }

    let rows_res = rows.clone();
    let accs_res = accs.clone();
    let residuals = move |p: &[f64]| -> Vec<f64> {
        let m = layout.unpack(p);
        let mut out = Vec::with_capacity(3 * n_rows);
        for r in &rows_res {
            let dep = 1.0 - m.delta * r.power_mw * r.power_mw;
            let model = m.eta_s * (m.gamma_eff * r.power_mw * r.power_mw + m.beta_s * r.power_mw) * dep
                + m.dc_s;
            out.push((r.c_s - model) * r.integration_s);
        }
        for r in &rows_res {
            let dep = 1.0 - m.delta * r.power_mw * r.power_mw;
            let model = m.eta_i * (m.gamma_eff * r.power_mw * r.power_mw + m.beta_i * r.power_mw) * dep
                + m.dc_i;
            out.push((r.c_i - model) * r.integration_s);
        }
        for (r, acc) in rows_res.iter().zip(&accs_res) {
            let dep = 1.0 - m.delta * r.power_mw * r.power_mw;
            let model = m.eta_s * m.eta_i * m.gamma_eff * r.power_mw * r.power_mw * dep + acc;
            out.push((r.cc - model) * r.integration_s);
        }
        out
    };

    let rows_jac = rows.clone();
    let layout_jac = ModelLayout { shared_beta };
    let n_par = params.len();
    let jacobian = move |p: &[f64]| -> DMatrix<f64> {
        let m = layout_jac.unpack(p);
        let mut jac = DMatrix::zeros(3 * n_rows, n_par);
        // column indices in the packed parameter vector
        let (i_bs, i_bi, i_d, i_dcs, i_dci) = if layout_jac.shared_beta {
            (3, 3, 4, 5, 6)
        } else {
            (3, 4, 5, 6, 7)
        };
        for (row, r) in rows_jac.iter().enumerate() {
            let p2 = r.power_mw * r.power_mw;
            let dep = 1.0 - m.delta * p2;
            let t = r.integration_s;
            // residual = (obs - model) * t  =>  d(residual)/dtheta = -d(model)/dtheta * t
            // signal singles
            let base_s = m.gamma_eff * p2 + m.beta_s * r.power_mw;
            jac[(row, 0)] = -(base_s * dep) * t;
            jac[(row, 2)] = -(m.eta_s * p2 * dep) * t;
            jac[(row, i_bs)] += -(m.eta_s * r.power_mw * dep) * t;
            jac[(row, i_d)] += (m.eta_s * base_s * p2) * t;
            jac[(row, i_dcs)] = -t;
            // idler singles
            let base_i = m.gamma_eff * p2 + m.beta_i * r.power_mw;
            let row_i = n_rows + row;
            jac[(row_i, 1)] = -(base_i * dep) * t;
            jac[(row_i, 2)] = -(m.eta_i * p2 * dep) * t;
            jac[(row_i, i_bi)] += -(m.eta_i * r.power_mw * dep) * t;
            jac[(row_i, i_d)] += (m.eta_i * base_i * p2) * t;
            jac[(row_i, i_dci)] = -t;
            // coincidences
            let row_c = 2 * n_rows + row;
            jac[(row_c, 0)] = -(m.eta_i * m.gamma_eff * p2 * dep) * t;
            jac[(row_c, 1)] = -(m.eta_s * m.gamma_eff * p2 * dep) * t;
            jac[(row_c, 2)] = -(m.eta_s * m.eta_i * p2 * dep) * t;
            jac[(row_c, i_d)] += (m.eta_s * m.eta_i * m.gamma_eff * p2 * p2) * t;
        }
        jac
    };

    let problem = FitProblem::new(params, weights, residuals).with_jacobian(jacobian);
    let fit = least_squares(&problem)?;

    if !fit.converged {
        warnings.push(format!("fit did not converge within {} iterations", fit.iterations));
    }

    let p = &fit.estimates;
    let s = &fit.sigmas;
    let (params_out, sigmas_out) = if shared_beta {
        (
            SfwmParams {
                eta_s: p[0],
                eta_i: p[1],
                gamma_eff: p[2],
                beta_s: p[3],
                beta_i: p[3],
                delta: p[4],
                dc_s: p[5],
                dc_i: p[6],
            },
            SfwmSigmas {
                eta_s: s[0],
                eta_i: s[1],
                gamma_eff: s[2],
                beta_s: s[3],
                beta_i: s[3],
                delta: s[4],
                dc_s: s[5],
                dc_i: s[6],
            },
        )
    } else {
        (
            SfwmParams {
                eta_s: p[0],
                eta_i: p[1],
                gamma_eff: p[2],
                beta_s: p[3],
                beta_i: p[4],
                delta: p[5],
                dc_s: p[6],
                dc_i: p[7],
            },
            SfwmSigmas {
                eta_s: s[0],
                eta_i: s[1],
                gamma_eff: s[2],
                beta_s: s[3],
                beta_i: s[4],
                delta: s[5],
                dc_s: s[6],
                dc_i: s[7],
            },
        )
    };

    if params_out.eta_s > 1.0 || params_out.eta_i > 1.0 {
        warnings.push(format!(
            "extrinsic efficiency above 1 (eta_s = {:.4}, eta_i = {:.4}); check the loss budget",
            params_out.eta_s, params_out.eta_i
        ));
    }

    Ok(SfwmFit {
        params: params_out,
        sigmas: sigmas_out,
        chi2_reduced: fit.chi2_reduced,
        converged: fit.converged,
        iterations: fit.iterations,
        mode: options.mode,
        warnings,
        fit,
    })
}

/// Intrinsic heralding efficiency for one arm with its uncertainty split
/// into the fit contribution and the loss-calibration contribution,
/// combined in quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicEfficiency {
    pub value: f64,
    pub sigma_fit: f64,
    pub sigma_loss: f64,
    pub sigma_total: f64,
    /// Set when the inversion lands above 1; the value is reported as-is.
    pub exceeds_unity: bool,
}

/// JSON report for a count fit: the extracted parameters, their
/// uncertainties, and the loss-budget inversion to intrinsic efficiencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SfwmReport {
    pub mode: FitMode,
    pub params: SfwmParams,
    pub sigmas: SfwmSigmas,
    /// Generation efficiency in the reporting unit (Mpairs/s/mW^2).
    pub gamma_eff_mpairs_per_s_mw2: f64,
    pub gamma_eff_sigma_mpairs_per_s_mw2: f64,
    pub eta_s_intrinsic: IntrinsicEfficiency,
    pub eta_i_intrinsic: IntrinsicEfficiency,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl SfwmReport {
    pub fn from_fit(fit: &SfwmFit, config: &DeviceConfig) -> Result<SfwmReport> {
        let mut warnings = fit.warnings.clone();
        let intrinsic = |eta: f64, sigma: f64, arm: crate::sfwm::Arm| -> Result<IntrinsicEfficiency> {
            let value = crate::sfwm::intrinsic_heralding(eta, arm, config)?;
            let budget = config.loss_budget(arm);
            let sigma_fit = sigma / budget;
            let sigma_loss = value * config.loss_uncertainty_frac;
            Ok(IntrinsicEfficiency {
                value,
                sigma_fit,
                sigma_loss,
                sigma_total: (sigma_fit * sigma_fit + sigma_loss * sigma_loss).sqrt(),
                exceeds_unity: value > 1.0,
            })
        };
        let eta_s_intrinsic = intrinsic(fit.params.eta_s, fit.sigmas.eta_s, crate::sfwm::Arm::Signal)?;
        let eta_i_intrinsic = intrinsic(fit.params.eta_i, fit.sigmas.eta_i, crate::sfwm::Arm::Idler)?;
        for (arm, e) in [("signal", &eta_s_intrinsic), ("idler", &eta_i_intrinsic)] {
            if e.exceeds_unity {
                warnings.push(format!(
                    "intrinsic {arm} heralding efficiency {:.4} exceeds 1; reported unclamped",
                    e.value
                ));
            }
        }
        Ok(SfwmReport {
            mode: fit.mode,
            params: fit.params,
            sigmas: fit.sigmas,
            gamma_eff_mpairs_per_s_mw2: fit.params.gamma_eff / 1e6,
            gamma_eff_sigma_mpairs_per_s_mw2: fit.sigmas.gamma_eff / 1e6,
            eta_s_intrinsic,
            eta_i_intrinsic,
            chi2_reduced: fit.chi2_reduced,
            converged: fit.converged,
            iterations: fit.iterations,
            warnings,
        })
    }
}
