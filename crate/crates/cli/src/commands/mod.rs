pub mod fit_counts;
pub mod fit_resonance;
pub mod predict;
pub mod simulate;
pub mod sweep;

use std::path::Path;

use ringpair::DeviceConfig;

/// Resolve the effective config: built-in defaults, then the config file,
/// then `--set KEY=VALUE` overrides.
pub fn resolve_config(
    config_path: Option<&Path>,
    overrides: &[String],
) -> anyhow::Result<DeviceConfig> {
    let base = match config_path {
        Some(p) => DeviceConfig::from_file(p)?,
        None => DeviceConfig::default(),
    };
    let cfg = base.with_overrides(overrides.iter().map(String::as_str))?;
    Ok(cfg)
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    ringpair::io::write_atomic(path, text.as_bytes())?;
    Ok(())
}
