use std::path::Path;

use serde::Serialize;

use ringpair::fit::resonance::{fit_resonance, ResonanceFitOptions};
use ringpair::fit::FitResult;
use ringpair::ring::Resonance;
use ringpair::CouplingBranch;

use crate::manifest::RunManifest;

#[derive(Serialize)]
struct ResonanceReport {
    resonance: Resonance,
    q_loaded_sigma: f64,
    fit: FitResult,
    manifest: RunManifest,
}

pub fn run(
    trace_path: &Path,
    config_path: Option<&Path>,
    overrides: &[String],
    out: &Path,
    residuals: Option<&Path>,
    branch: Option<CouplingBranch>,
) -> anyhow::Result<()> {
    let config = super::resolve_config(config_path, overrides)?;
    let trace = ringpair::io::read_trace_csv(trace_path)?;

    let options = ResonanceFitOptions {
        branch_hint: branch,
        ..ResonanceFitOptions::default()
    };
    let output = fit_resonance(&trace, &config, &options)?;

    let mut manifest = RunManifest::new("fit-resonance", &config);
    manifest.add_input(trace_path)?;
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);

    if let Some(res_path) = residuals {
        write_residuals(res_path, &trace, &output.resonance)?;
        manifest.add_output(res_path);
    }

    let report = ResonanceReport {
        resonance: output.resonance,
        q_loaded_sigma: output.q_loaded_sigma,
        fit: output.fit,
        manifest,
    };
    super::write_json(out, &report)?;
    println!(
        "fit-resonance: q_loaded = {:.4e}, extinction = {:.2} dB, branch = {}",
        report.resonance.q_loaded, report.resonance.extinction_db, report.resonance.coupling_branch
    );
    Ok(())
}

/// Per-point observed/model/residual table for plotting.
fn write_residuals(path: &Path, trace: &[(f64, f64)], res: &Resonance) -> anyhow::Result<()> {
    let f0 = ringpair::config::SPEED_OF_LIGHT / res.center_wavelength_m;
    let h = 0.5 * res.fwhm_hz;
    let t_min = 10f64.powf(-res.extinction_db / 10.0);
    let mut out = String::from("wavelength_nm,observed,model,residual\n");
    let mut rows: Vec<(f64, f64)> = trace.to_vec();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (wl, t) in rows {
        let d = ringpair::config::SPEED_OF_LIGHT / wl - f0;
        let model = 1.0 - (1.0 - t_min) * h * h / (d * d + h * h);
        out.push_str(&format!(
            "{:.9},{:.8},{:.8},{:.8}\n",
            wl * 1e9,
            t,
            model,
            t - model
        ));
    }
    ringpair::io::write_atomic(path, out.as_bytes())?;
    Ok(())
}
