use crate::error::{Error, Result};

use super::record::{EcgRecord, SourceFormat};

/// Parses `fs=<Hz>` (case-insensitive, optional spaces and `#`).
fn parse_rate_header(line: &str) -> Option<f64> {
    let l = line.trim().trim_start_matches('#').trim();
    let (key, value) = l.split_once('=')?;
    if key.trim().eq_ignore_ascii_case("fs") {
        value.trim().parse().ok()
    } else {
        None
    }
}

fn first_field(line: &str) -> &str {
    line.split(|c: char| c == '\t' || c == ',' || c.is_whitespace())
        .find(|f| !f.is_empty())
        .unwrap_or("")
}

/// One sample per line (first tab/comma/space separated column). An optional
/// `fs=<Hz>` line and a single non-numeric column-header line may precede the
/// data. `override_rate` wins over an embedded rate.
pub fn parse_txt(text: &str, override_rate: Option<f64>) -> Result<EcgRecord> {
    let mut embedded = None;
    let mut samples = Vec::new();
    let mut header_skipped = false;
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(fs) = parse_rate_header(trimmed) {
            embedded = Some(fs);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        match first_field(trimmed).parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if samples.is_empty() && !header_skipped => header_skipped = true,
            Err(_) => {
                return Err(Error::UnsupportedFormat(format!(
                    "line {}: `{}` is not a number",
                    n + 1,
                    trimmed
                )))
            }
        }
    }
    let sample_rate = override_rate.or(embedded).ok_or(Error::MissingSampleRate)?;
    if samples.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(EcgRecord::from_samples(samples, sample_rate, SourceFormat::Txt))
}

/// One R-R interval in seconds per line.
pub fn parse_rri_text(text: &str) -> Result<EcgRecord> {
    let mut intervals = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = first_field(trimmed).parse().map_err(|_| {
            Error::UnsupportedFormat(format!("line {}: `{}` is not an interval", n + 1, trimmed))
        })?;
        if !(v > 0.0) {
            return Err(Error::UnsupportedFormat(format!(
                "line {}: interval must be positive",
                n + 1
            )));
        }
        intervals.push(v);
    }
    if intervals.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(EcgRecord::from_intervals(intervals))
}
