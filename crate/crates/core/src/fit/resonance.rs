//! Lorentzian dip fitting for transmission traces.
//!
//! The model is T = 1 - (1 - T_min) (G/2)^2 / (df^2 + (G/2)^2) in optical
//! frequency, with parameters center frequency, linewidth G (FWHM) and dip
//! floor T_min. Internally the frequency axis is rescaled to the trace
//! span so every fit parameter is order one. The fitted loaded linewidth
//! is split into intrinsic and extrinsic rates using the dip depth; the
//! under/over-coupled sign ambiguity of that split is resolved by an
//! explicit branch hint (sweep continuity) or, absent one, by whichever
//! branch lands closer to the config's loss-derived intrinsic Q.

use nalgebra::DMatrix;

use crate::config::{DeviceConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::fit::lm::{least_squares, FitProblem, FitResult, ParamSpec};
use crate::ring::{q_int_from_loss, CouplingBranch, Resonance};

/// Controls for [`fit_resonance`].
#[derive(Debug, Clone, Copy)]
pub struct ResonanceFitOptions {
    /// Force the coupling branch instead of inferring it. Sweep
    /// orchestration uses this to keep the branch continuous in voltage.
    pub branch_hint: Option<CouplingBranch>,
    /// Extinction values are capped here when the fitted floor reaches
    /// zero (critical coupling against the measurement floor).
    pub extinction_cap_db: f64,
    /// Dips at least this deep are labeled critical when no hint is given;
    /// 30 dB puts the split ambiguity within ~6% of Gamma = M.
    pub critical_threshold_db: f64,
}

impl Default for ResonanceFitOptions {
    fn default() -> Self {
        ResonanceFitOptions {
            branch_hint: None,
            extinction_cap_db: 60.0,
            critical_threshold_db: 30.0,
        }
    }
}

/// A fitted resonance together with the raw fit diagnostics.
#[derive(Debug, Clone)]
pub struct ResonanceFitOutput {
    pub resonance: Resonance,
    pub fit: FitResult,
    /// 1-sigma uncertainty on q_loaded propagated from the linewidth.
    pub q_loaded_sigma: f64,
}

/// Threshold below which a trace is considered dipless.
const NO_DIP_FLOOR: f64 = 0.99;

/// Fit one Lorentzian dip in a `(wavelength_m, transmission)` trace.
///
/// Points may arrive in any order; they are sorted by wavelength. Traces
/// whose minimum stays above 0.99 raise [`Error::NoResonance`]; traces with
/// more than one dip raise [`Error::MultiDip`] and must be windowed by the
/// caller.
pub fn fit_resonance(
    trace: &[(f64, f64)],
    config: &DeviceConfig,
    options: &ResonanceFitOptions,
) -> Result<ResonanceFitOutput> {
    if trace.len() < 16 {
        return Err(Error::Invalid(format!(
            "trace has {} points; need at least 16 to fit a dip",
            trace.len()
        )));
    }
    let mut pts: Vec<(f64, f64)> = trace.to_vec();
    for (i, (wl, t)) in pts.iter().enumerate() {
        if !wl.is_finite() || *wl <= 0.0 || !t.is_finite() {
            return Err(Error::Invalid(format!("trace point {i} is not finite: ({wl}, {t})")));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    // work in optical frequency, rescaled to the trace span
    let freqs: Vec<f64> = pts.iter().map(|(wl, _)| SPEED_OF_LIGHT / wl).collect();
    let trans: Vec<f64> = pts.iter().map(|(_, t)| *t).collect();
    let f_lo = freqs.iter().copied().fold(f64::MAX, f64::min);
    let f_hi = freqs.iter().copied().fold(f64::MIN, f64::max);
    let span_hz = f_hi - f_lo;
    if !span_hz.is_finite() || span_hz <= 0.0 {
        return Err(Error::Invalid("trace covers zero frequency span".into()));
    }
    let f_ref = 0.5 * (f_lo + f_hi);
    let xs: Vec<f64> = freqs.iter().map(|f| (f - f_ref) / span_hz).collect();

    // detection and seeding run on a smoothed copy so point noise cannot
    // fake or hide dips; the fit itself uses the raw points
    let smooth = moving_average(&trans, (trans.len() / 80).max(3) | 1);
    let (min_idx, &t_floor) = smooth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty trace");
    if t_floor > NO_DIP_FLOOR {
        return Err(Error::NoResonance);
    }

    let dips = count_dips(&smooth, t_floor);
    if dips > 1 {
        return Err(Error::MultiDip { dips });
    }

    // seeds: center at the minimum, width from the half-depth crossing
    let half_level = 0.5 * (1.0 + t_floor);
    let below: Vec<usize> = (0..smooth.len()).filter(|&i| smooth[i] < half_level).collect();
    let resolution = 1.0 / (xs.len() - 1) as f64;
    let width_seed = if below.len() >= 2 {
        (xs[*below.last().unwrap()] - xs[below[0]]).abs().max(2.0 * resolution)
    } else {
        2.0 * resolution
    };

    let params = vec![
        ParamSpec::bounded("center", xs[min_idx], -0.6, 0.6),
        ParamSpec::bounded("width", width_seed, 0.1 * resolution, 10.0),
        ParamSpec::bounded("t_min", t_floor.clamp(0.0, 1.0), 0.0, 1.0),
    ];

    let xs_r = xs.clone();
    let trans_r = trans.clone();
    let problem = FitProblem::new(params, vec![1.0; trans.len()], move |p: &[f64]| {
        let (c, w, tm) = (p[0], p[1], p[2]);
        let h = 0.5 * w;
        xs_r.iter()
            .zip(&trans_r)
            .map(|(&x, &t)| {
                let d = x - c;
                t - (1.0 - (1.0 - tm) * h * h / (d * d + h * h))
            })
            .collect()
    })
    .with_jacobian({
        let xs_j = xs.clone();
        move |p: &[f64]| {
            let (c, w, tm) = (p[0], p[1], p[2]);
            let h = 0.5 * w;
            DMatrix::from_fn(xs_j.len(), 3, |i, j| {
                let d = xs_j[i] - c;
                let den = d * d + h * h;
                // residual = t - model, so d(residual)/dp = -d(model)/dp
                match j {
                    0 => (1.0 - tm) * 2.0 * d * h * h / (den * den),
                    1 => (1.0 - tm) * h * d * d / (den * den),
                    _ => -h * h / den,
                }
            })
        }
    });

    let fit = least_squares(&problem)?;
    let f0 = f_ref + fit.get("center").expect("param present") * span_hz;
    let fwhm = fit.get("width").expect("param present") * span_hz;
    let t_min = fit.get("t_min").expect("param present").clamp(0.0, 1.0);

    if span_hz < 2.999 * fwhm {
        return Err(Error::Invalid(format!(
            "trace spans {:.3} linewidths; need at least 3 around the dip",
            span_hz / fwhm
        )));
    }

    let center_wavelength_m = SPEED_OF_LIGHT / f0;
    let q_loaded = f0 / fwhm;
    let kappa = 2.0 * std::f64::consts::PI * fwhm; // Gamma + M (rad/s)

    let floor = 10f64.powf(-options.extinction_cap_db / 10.0);
    let extinction_db = -10.0 * t_min.max(floor).log10();

    // dip-depth split of kappa into (Gamma, M)
    let r = t_min.sqrt();
    let branch = match options.branch_hint {
        Some(b) => b,
        None => {
            if extinction_db >= options.critical_threshold_db {
                CouplingBranch::Critical
            } else {
                infer_branch(r, kappa, center_wavelength_m, config)
            }
        }
    };
    let (gamma, m) = split_rates(r, kappa, branch);
    let resonance = Resonance::from_rates(center_wavelength_m, gamma, m, extinction_db);

    let sigma_fwhm = fit.sigma("width").unwrap_or(0.0) * span_hz;
    let q_loaded_sigma = if fwhm > 0.0 { q_loaded * sigma_fwhm / fwhm } else { 0.0 };

    Ok(ResonanceFitOutput {
        resonance,
        fit,
        q_loaded_sigma,
    })
}

/// Split the loaded rate kappa into (Gamma, M) given the amplitude dip
/// ratio r = sqrt(T_min) and a branch choice.
fn split_rates(r: f64, kappa: f64, branch: CouplingBranch) -> (f64, f64) {
    match branch {
        CouplingBranch::Critical => (0.5 * kappa, 0.5 * kappa),
        CouplingBranch::UnderCoupled => (0.5 * kappa * (1.0 - r), 0.5 * kappa * (1.0 + r)),
        CouplingBranch::OverCoupled => (0.5 * kappa * (1.0 + r), 0.5 * kappa * (1.0 - r)),
    }
}

/// Pick the branch whose implied intrinsic Q lies closer (in log distance)
/// to the loss-budget value from the config.
fn infer_branch(r: f64, kappa: f64, wavelength_m: f64, config: &DeviceConfig) -> CouplingBranch {
    let Ok(q_int_cfg) = q_int_from_loss(config) else {
        return CouplingBranch::UnderCoupled;
    };
    let omega = crate::ring::angular_frequency(wavelength_m);
    let candidates = [CouplingBranch::UnderCoupled, CouplingBranch::OverCoupled];
    let mut best = CouplingBranch::UnderCoupled;
    let mut best_dist = f64::INFINITY;
    for b in candidates {
        let (_, m) = split_rates(r, kappa, b);
        if m <= 0.0 {
            continue;
        }
        let q_int = omega / m;
        let dist = (q_int / q_int_cfg).ln().abs();
        if dist < best_dist {
            best_dist = dist;
            best = b;
        }
    }
    best
}

/// Centered moving average with an odd window, shrinking at the edges.
fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Count well-separated dip candidates: maximal runs of at least two
/// consecutive points below the half-depth level, separated by more than
/// ten points.
fn count_dips(trans: &[f64], t_floor: f64) -> usize {
    let level = 0.5 * (1.0 + t_floor);
    let mut dips = 0;
    let mut run = 0usize;
    let mut gap = usize::MAX / 2;
    for &t in trans {
        if t < level {
            run += 1;
            if run == 2 {
                if gap > 10 {
                    dips += 1;
                }
                gap = 0;
            }
        } else {
            if run >= 2 {
                gap = 0;
            }
            gap = gap.saturating_add(1);
            run = 0;
        }
    }
    dips
}
