use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use ringpair::fit::counts::SfwmReport;
use ringpair::fit::resonance::{fit_resonance, ResonanceFitOptions};
use ringpair::fit::{fit_counts, CountFitOptions};
use ringpair::sfwm::coincidence_rate;
use ringpair::theory::{predict_operating_point, BrightnessVariant, RegimeLabel};
use ringpair::{CouplingBranch, DeviceConfig};

use crate::manifest::RunManifest;

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    voltage_v: f64,
    q_loaded: f64,
    q_loaded_sigma: f64,
    extinction_db: f64,
    gamma_over_m: f64,
    coupling_branch: CouplingBranch,
    /// Fitted detected coincidence rate at the sweep's top power.
    cc_per_s: f64,
    eta_s_intrinsic: f64,
    eta_s_sigma: f64,
    eta_i_intrinsic: f64,
    eta_i_sigma: f64,
    escape_eff_theory: f64,
    brightness_norm_theory: f64,
    regime: RegimeLabel,
}

#[derive(Serialize)]
struct SweepSummary {
    variant: BrightnessVariant,
    critical_voltage: f64,
    rows: Vec<SweepRow>,
    manifest: RunManifest,
}

pub fn run(
    dir: &Path,
    config_path: Option<&Path>,
    overrides: &[String],
    variant: BrightnessVariant,
    out: &Path,
    json: Option<&Path>,
) -> anyhow::Result<()> {
    let config = super::resolve_config(config_path, overrides)?;

    let mut points = discover_voltages(dir)?;
    if points.is_empty() {
        return Err(ringpair::Error::Invalid(format!(
            "no usable v_<voltage> subdirectories under {}",
            dir.display()
        ))
        .into());
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    // first pass: unhinted resonance fits to locate the extinction maximum
    let first: Vec<(f64, f64)> = points
        .par_iter()
        .map(|(volts, vdir)| {
            let trace = ringpair::io::read_trace_csv(&vdir.join("trace.csv"))?;
            let fit = fit_resonance(&trace, &config, &ResonanceFitOptions::default())?;
            Ok::<(f64, f64), anyhow::Error>((*volts, fit.resonance.extinction_db))
        })
        .collect::<Result<_, _>>()?;
    let critical_voltage = first
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(v, _)| *v)
        .expect("non-empty sweep");

    // second pass: branch continuity — the branch flips exactly once, at
    // the extinction maximum
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|(volts, vdir)| process_voltage(*volts, vdir, &config, variant, critical_voltage))
        .collect::<Result<Vec<Option<SweepRow>>, anyhow::Error>>()?
        .into_iter()
        .flatten()
        .collect();

    write_summary_csv(out, &rows)?;

    let mut manifest = RunManifest::new("sweep", &config);
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);
    println!(
        "sweep: {} voltage points, critical voltage {:.3} V, summary in {}",
        rows.len(),
        critical_voltage,
        out.display()
    );

    if let Some(json_path) = json {
        manifest.add_output(json_path);
        let summary = SweepSummary {
            variant,
            critical_voltage,
            rows,
            manifest,
        };
        super::write_json(json_path, &summary)?;
    }
    Ok(())
}

fn discover_voltages(dir: &Path) -> anyhow::Result<Vec<(f64, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| ringpair::Error::parse(&dir.display().to_string(), None, None, e.to_string()))?;
    for entry in entries {
        let entry = entry.with_context(|| format!("reading {}", dir.display()))?;
        if !entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_string();
        let Some(volt_str) = name.strip_prefix("v_") else {
            continue;
        };
        let Ok(volts) = volt_str.parse::<f64>() else {
            eprintln!("warning: skipping {name}: cannot parse voltage");
            continue;
        };
        let vdir = entry.path();
        if !vdir.join("trace.csv").exists() || !vdir.join("counts.csv").exists() {
            eprintln!("warning: skipping {name}: missing trace.csv or counts.csv");
            continue;
        }
        out.push((volts, vdir));
    }
    Ok(out)
}

fn process_voltage(
    volts: f64,
    vdir: &Path,
    config: &DeviceConfig,
    variant: BrightnessVariant,
    critical_voltage: f64,
) -> anyhow::Result<Option<SweepRow>> {
    let hint = if (volts - critical_voltage).abs() < 1e-9 {
        CouplingBranch::Critical
    } else if volts < critical_voltage {
        CouplingBranch::UnderCoupled
    } else {
        CouplingBranch::OverCoupled
    };

    let trace = ringpair::io::read_trace_csv(&vdir.join("trace.csv"))?;
    let res_fit = fit_resonance(
        &trace,
        config,
        &ResonanceFitOptions {
            branch_hint: Some(hint),
            ..ResonanceFitOptions::default()
        },
    )?;

    let sweep = ringpair::io::read_count_sweep_csv(&vdir.join("counts.csv"))?;
    let counts_fit = fit_counts(&sweep, config, &CountFitOptions::default())?;
    let report = SfwmReport::from_fit(&counts_fit, config)?;

    let p_ref = sweep.rows().last().expect("validated non-empty").power_mw;
    let cc_per_s = coincidence_rate(&counts_fit.params, p_ref, config.rep_rate_hz)?;

    let op = predict_operating_point(&res_fit.resonance, variant)?;

    Ok(Some(SweepRow {
        voltage_v: volts,
        q_loaded: res_fit.resonance.q_loaded,
        q_loaded_sigma: res_fit.q_loaded_sigma,
        extinction_db: res_fit.resonance.extinction_db,
        gamma_over_m: res_fit.resonance.gamma_over_m(),
        coupling_branch: res_fit.resonance.coupling_branch,
        cc_per_s,
        eta_s_intrinsic: report.eta_s_intrinsic.value,
        eta_s_sigma: report.eta_s_intrinsic.sigma_total,
        eta_i_intrinsic: report.eta_i_intrinsic.value,
        eta_i_sigma: report.eta_i_intrinsic.sigma_total,
        escape_eff_theory: op.escape_eff,
        brightness_norm_theory: op.brightness_norm,
        regime: op.regime,
    }))
}

fn write_summary_csv(path: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut out = String::from(
        "voltage_v,q_loaded,q_loaded_sigma,extinction_db,gamma_over_m,coupling_branch,\
         cc_per_s,eta_s_intrinsic,eta_s_sigma,eta_i_intrinsic,eta_i_sigma,\
         escape_eff_theory,brightness_norm_theory,regime\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.3},{:.6e},{:.3e},{:.4},{:.6},{},{:.4},{:.6},{:.2e},{:.6},{:.2e},{:.6},{:.6},{}\n",
            r.voltage_v,
            r.q_loaded,
            r.q_loaded_sigma,
            r.extinction_db,
            r.gamma_over_m,
            r.coupling_branch,
            r.cc_per_s,
            r.eta_s_intrinsic,
            r.eta_s_sigma,
            r.eta_i_intrinsic,
            r.eta_i_sigma,
            r.escape_eff_theory,
            r.brightness_norm_theory,
            r.regime
        ));
    }
    ringpair::io::write_atomic(path, out.as_bytes())?;
    Ok(())
}
