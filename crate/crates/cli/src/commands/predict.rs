use std::path::Path;

use serde::Serialize;

use ringpair::search::golden_section_maximize;
use ringpair::theory::{brightness_curve, BrightnessVariant, TheoryCurve};

use crate::manifest::RunManifest;

#[derive(Serialize)]
struct PredictReport {
    variant: BrightnessVariant,
    range_lo: f64,
    range_hi: f64,
    points: usize,
    /// Gamma/M at the located brightness maximum.
    argmax_gamma_over_m: f64,
    /// Set when the maximum sits on a range edge, i.e. the true peak lies
    /// outside the requested window.
    argmax_at_boundary: bool,
    manifest: RunManifest,
}

pub fn run(
    config_path: Option<&Path>,
    overrides: &[String],
    variant: BrightnessVariant,
    range: &str,
    points: usize,
    out: &Path,
    json: Option<&Path>,
) -> anyhow::Result<()> {
    let config = super::resolve_config(config_path, overrides)?;
    let (lo, hi) = parse_range(range)?;

    let m_hz = ringpair::ring::q_int_from_loss(&config)
        .map(|q_int| config.pump_angular_frequency() / q_int)
        .unwrap_or(1.0);

    let curve = TheoryCurve::sample(variant, m_hz, lo, hi, points)?;
    ringpair::io::write_curve_csv(out, &curve)?;

    // locate the maximum over the requested window
    let (argmax, _) = golden_section_maximize(
        |g| brightness_curve(g, 1.0, variant).expect("valid ratio"),
        lo,
        hi,
        1e-12,
        300,
    );
    let edge = 1e-4 * (hi - lo);
    let at_boundary = (argmax - lo).abs() < edge || (hi - argmax).abs() < edge;

    let mut manifest = RunManifest::new("predict", &config);
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out);

    println!(
        "predict[{variant}]: brightness maximum at Gamma/M = {argmax:.4}{}",
        if at_boundary { " (range boundary)" } else { "" }
    );

    if let Some(json_path) = json {
        manifest.add_output(json_path);
        let report = PredictReport {
            variant,
            range_lo: lo,
            range_hi: hi,
            points,
            argmax_gamma_over_m: argmax,
            argmax_at_boundary: at_boundary,
            manifest,
        };
        super::write_json(json_path, &report)?;
    }
    Ok(())
}

fn parse_range(range: &str) -> anyhow::Result<(f64, f64)> {
    let err = || {
        anyhow::Error::new(ringpair::Error::Invalid(format!(
            "range `{range}` must be `LO:HI` with 0 < LO < HI"
        )))
    };
    let (lo, hi) = range.split_once(':').ok_or_else(err)?;
    let lo: f64 = lo.trim().parse().map_err(|_| err())?;
    let hi: f64 = hi.trim().parse().map_err(|_| err())?;
    if !(lo > 0.0 && hi > lo) {
        return Err(err());
    }
    Ok((lo, hi))
}
