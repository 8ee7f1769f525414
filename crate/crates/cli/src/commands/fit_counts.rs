use std::path::Path;

use serde::Serialize;

use ringpair::fit::counts::SfwmReport;
use ringpair::fit::{fit_counts, CountFitOptions, FitMode};

use crate::manifest::RunManifest;

#[derive(Serialize)]
struct CountReport {
    #[serde(flatten)]
    report: SfwmReport,
    manifest: RunManifest,
}

pub fn run(
    sweep_path: &Path,
    config_path: Option<&Path>,
    overrides: &[String],
    mode: FitMode,
    low_power_max: f64,
    out: &Path,
) -> anyhow::Result<()> {
    let config = super::resolve_config(config_path, overrides)?;
    let sweep = ringpair::io::read_count_sweep_csv(sweep_path)?;

    let options = CountFitOptions {
        mode,
        low_power_max_mw: low_power_max,
    };
    let fit = fit_counts(&sweep, &config, &options)?;
    let report = SfwmReport::from_fit(&fit, &config)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    let mut manifest = RunManifest::new("fit-counts", &config);
    manifest.add_input(sweep_path)?;
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);

    println!(
        "fit-counts[{}]: gamma_eff = {:.4} Mpairs/s/mW^2, eta_i intrinsic = {:.4} +- {:.4}",
        report.mode,
        report.gamma_eff_mpairs_per_s_mw2,
        report.eta_i_intrinsic.value,
        report.eta_i_intrinsic.sigma_total
    );

    super::write_json(out, &CountReport { report, manifest })?;
    Ok(())
}
