//! CSV trace ingestion and export.
//!
//! Schema (header required): `t,v_ego,dist_front,v_front,dist_tls` with
//! integer seconds and SI decimal fields (m/s, m, m/s, m). An empty
//! `dist_front`/`v_front` pair means no front vehicle in sensing range; an
//! empty `dist_tls` means no traffic light ahead. Both map to the sensing
//! caps, with the front-vehicle velocity falling back to the ego velocity
//! (free-flow assumption).

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::{SignalFrame, FRONT_DIST_CAP, TLS_DIST_CAP};

pub const TRACE_HEADER: [&str; 5] = ["t", "v_ego", "dist_front", "v_front", "dist_tls"];

fn parse_field(record_index: usize, name: &str, raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let value: f64 = raw.parse().map_err(|_| {
        Error::Schema(format!("row {record_index}: field {name} is not a number: {raw:?}"))
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Schema(format!(
            "row {record_index}: field {name} must be finite and non-negative, got {value}"
        )));
    }
    Ok(Some(value))
}

/// Reads a trace from CSV, applying the missing-signal mappings and sensing
/// caps, and validating the 1 Hz contiguity of the `t` column.
pub fn read_trace(path: &Path) -> Result<Vec<SignalFrame>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields != TRACE_HEADER {
        return Err(Error::Schema(format!(
            "bad header {:?}, expected {:?}",
            fields.join(","),
            TRACE_HEADER.join(",")
        )));
    }
    let mut frames = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 5 {
            return Err(Error::Schema(format!(
                "row {i}: expected 5 fields, got {}",
                record.len()
            )));
        }
        let t: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("row {i}: t is not an integer: {:?}", &record[0])))?;
        let v_ego = parse_field(i, "v_ego", &record[1])?
            .ok_or_else(|| Error::Schema(format!("row {i}: v_ego must not be empty")))?;
        let dist_front = parse_field(i, "dist_front", &record[2])?.unwrap_or(FRONT_DIST_CAP);
        let v_front = parse_field(i, "v_front", &record[3])?.unwrap_or(v_ego);
        let dist_tls = parse_field(i, "dist_tls", &record[4])?.unwrap_or(TLS_DIST_CAP);
        if let Some(prev) = frames.last() {
            let prev: &SignalFrame = prev;
            if t != prev.t + 1 {
                return Err(Error::Schema(format!(
                    "row {i}: t = {t} breaks 1 Hz contiguity (previous t = {})",
                    prev.t
                )));
            }
        }
        frames.push(SignalFrame {
            t,
            v_ego,
            dist_front: dist_front.min(FRONT_DIST_CAP),
            v_front,
            dist_tls: dist_tls.min(TLS_DIST_CAP),
        });
    }
    Ok(frames)
}

/// Writes a trace in the schema above. Decimal fields carry three fractional
/// digits, enough to round-trip 1 Hz telemetry for this toolkit's purposes.
pub fn write_trace(path: &Path, frames: &[SignalFrame]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(TRACE_HEADER)?;
    for f in frames {
        writer.write_record(&[
            f.t.to_string(),
            format!("{:.3}", f.v_ego),
            format!("{:.3}", f.dist_front),
            format!("{:.3}", f.v_front),
            format!("{:.3}", f.dist_tls),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
