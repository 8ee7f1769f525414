//! CSV interchange formats.
//!
//! Three schemas move between the tools:
//! traces `wavelength_nm,transmission`, count sweeps
//! `power_mw,integration_s,c_s,c_i,cc`, and theory curves
//! `gamma_over_m,escape_eff,brightness_norm`. Readers reject malformed
//! files with the file, line and field spelled out; writers emit stable
//! formatting so identical data produces identical bytes.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sfwm::{CountRow, CountSweep};
use crate::theory::TheoryCurve;

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::parse(&path.display().to_string(), None, None, e.to_string())
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_headers(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    expected: &[&str],
) -> Result<()> {
    let name = path.display().to_string();
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(&name, Some(1), None, e.to_string()))?;
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if got.len() != expected.len() || got.iter().zip(expected).any(|(g, e)| g != e) {
        return Err(Error::parse(
            &name,
            Some(1),
            None,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn parse_field(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| {
        Error::parse(
            &path.display().to_string(),
            Some(line),
            Some(field),
            format!("`{raw}` is not a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::parse(
            &path.display().to_string(),
            Some(line),
            Some(field),
            format!("`{raw}` is not finite"),
        ));
    }
    Ok(v)
}

/// Read a resonance trace; wavelengths arrive in nm and are converted to
/// meters.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let name = path.display().to_string();
    let mut reader = open_reader(path)?;
    check_headers(&mut reader, path, &["wavelength_nm", "transmission"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(&name, None, None, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::parse(
                &name,
                Some(line),
                None,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let wl_nm = parse_field(path, line, "wavelength_nm", &record[0])?;
        let tr = parse_field(path, line, "transmission", &record[1])?;
        if wl_nm <= 0.0 {
            return Err(Error::parse(
                &name,
                Some(line),
                Some("wavelength_nm"),
                "wavelength must be positive",
            ));
        }
        out.push((wl_nm * 1e-9, tr));
    }
    if out.is_empty() {
        return Err(Error::parse(&name, None, None, "file contains no data rows"));
    }
    Ok(out)
}

/// Write a trace with wavelengths in nm.
pub fn write_trace_csv(path: &Path, trace: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("wavelength_nm,transmission\n");
    for (wl_m, tr) in trace {
        out.push_str(&format!("{:.9},{:.8}\n", wl_m * 1e9, tr));
    }
    write_atomic(path, out.as_bytes())
}

/// Read a count sweep. Powers must be strictly increasing in the file and
/// every coincidence rate bounded by min(c_s, c_i); violations are
/// reported with their line number.
pub fn read_count_sweep_csv(path: &Path) -> Result<CountSweep> {
    let name = path.display().to_string();
    let mut reader = open_reader(path)?;
    check_headers(
        &mut reader,
        path,
        &["power_mw", "integration_s", "c_s", "c_i", "cc"],
    )?;
    let mut rows = Vec::new();
    let mut prev_power: Option<(f64, u64)> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(&name, None, None, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 5 {
            return Err(Error::parse(
                &name,
                Some(line),
                None,
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        let power_mw = parse_field(path, line, "power_mw", &record[0])?;
        let integration_s = parse_field(path, line, "integration_s", &record[1])?;
        let c_s = parse_field(path, line, "c_s", &record[2])?;
        let c_i = parse_field(path, line, "c_i", &record[3])?;
        let cc = parse_field(path, line, "cc", &record[4])?;
        if let Some((prev, prev_line)) = prev_power {
            if power_mw <= prev {
                return Err(Error::parse(
                    &name,
                    Some(line),
                    Some("power_mw"),
                    format!(
                        "power {power_mw} must be strictly greater than {prev} on line {prev_line}"
                    ),
                ));
            }
        }
        if cc > c_s.min(c_i) * (1.0 + 1e-12) {
            return Err(Error::parse(
                &name,
                Some(line),
                Some("cc"),
                format!("cc = {cc} exceeds min(c_s, c_i) = {}", c_s.min(c_i)),
            ));
        }
        prev_power = Some((power_mw, line));
        rows.push(CountRow {
            power_mw,
            integration_s,
            c_s,
            c_i,
            cc,
        });
    }
    if rows.is_empty() {
        return Err(Error::parse(&name, None, None, "file contains no data rows"));
    }
    CountSweep::new(rows)
}

/// Write a count sweep in the canonical schema.
pub fn write_count_sweep_csv(path: &Path, sweep: &CountSweep) -> Result<()> {
    let mut out = String::from("power_mw,integration_s,c_s,c_i,cc\n");
    for r in sweep.rows() {
        out.push_str(&format!(
            "{:.6},{:.3},{:.6},{:.6},{:.6}\n",
            r.power_mw, r.integration_s, r.c_s, r.c_i, r.cc
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Write a theory curve as `gamma_over_m,escape_eff,brightness_norm`.
pub fn write_curve_csv(path: &Path, curve: &TheoryCurve) -> Result<()> {
    let mut out = String::from("gamma_over_m,escape_eff,brightness_norm\n");
    for (g, e, b) in &curve.samples {
        out.push_str(&format!("{g:.6},{e:.8},{b:.8}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Write bytes through a unique temp file then rename, so partially
/// written files never masquerade as outputs.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", dir.display())))?;
    }
    let tmp = path.with_extension(format!(
        "tmp.{}",
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", tmp.display())))?;
        f.write_all(bytes)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", tmp.display())))?;
    }
    std::fs::rename(&tmp, path)
        .map_err(|e| Error::Invalid(format!("cannot move output into {}: {e}", path.display())))?;
    Ok(())
}
