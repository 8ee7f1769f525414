use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use ringpair::synth::{
    fig2_scenario_config, gen_count_sweep, gen_fig2_scenario, SynthSpec, VoltageTruth,
};

use crate::manifest::RunManifest;
use crate::SimKind;

#[derive(Serialize)]
struct BundleManifest {
    spec: SynthSpec,
    files: Vec<crate::manifest::InputDigest>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ground_truth: Vec<VoltageTruth>,
    manifest: RunManifest,
}

pub fn run(
    spec_path: &Path,
    config_path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    kind: SimKind,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| ringpair::Error::parse(&spec_path.display().to_string(), None, None, e.to_string()))?;
    let mut spec: SynthSpec = serde_json::from_str(&text).map_err(|e| {
        ringpair::Error::parse(
            &spec_path.display().to_string(),
            Some(e.line() as u64),
            None,
            e.to_string(),
        )
    })?;
    if let Some(s) = seed {
        spec.rng_seed = s;
    }
    spec.validate()?;

    // the coupling-sweep scenario defaults to the low-loss scenario ring so
    // strongly over-coupled resonances stay inside a single-dip window
    let config = match (config_path, kind) {
        (None, SimKind::Scenario) if overrides.is_empty() => fig2_scenario_config(),
        _ => super::resolve_config(config_path, overrides)?,
    };

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    let mut files: Vec<std::path::PathBuf> = Vec::new();
    let mut ground_truth = Vec::new();

    match kind {
        SimKind::Counts => {
            let sweep = gen_count_sweep(&spec)?;
            let path = out_dir.join("counts.csv");
            ringpair::io::write_count_sweep_csv(&path, &sweep)?;
            files.push(path);
        }
        SimKind::Scenario => {
            let scenario = gen_fig2_scenario(&config, &spec)?;
            for point in &scenario.points {
                let vdir = out_dir.join(format!("v_{:.3}", point.truth.voltage));
                std::fs::create_dir_all(&vdir)
                    .with_context(|| format!("cannot create {}", vdir.display()))?;
                let trace_path = vdir.join("trace.csv");
                ringpair::io::write_trace_csv(&trace_path, &point.trace)?;
                let counts_path = vdir.join("counts.csv");
                ringpair::io::write_count_sweep_csv(&counts_path, &point.sweep)?;
                files.push(trace_path);
                files.push(counts_path);
                ground_truth.push(point.truth.clone());
            }
        }
    }

    let mut manifest = RunManifest::new("simulate", &config).with_seed(spec.rng_seed);
    manifest.add_input(spec_path)?;
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    let manifest_path = out_dir.join("manifest.json");
    for f in &files {
        manifest.add_output(f);
    }
    manifest.add_output(&manifest_path);

    // digest every emitted file so the bundle is self-verifying
    let mut digests = Vec::new();
    for f in &files {
        let mut probe = RunManifest::new("digest", &config);
        probe.add_input(f)?;
        digests.extend(probe.inputs);
    }

    let bundle = BundleManifest {
        spec,
        files: digests,
        ground_truth,
        manifest,
    };
    super::write_json(&manifest_path, &bundle)?;
    println!(
        "simulate: wrote {} files under {}",
        files.len() + 1,
        out_dir.display()
    );
    Ok(())
}
