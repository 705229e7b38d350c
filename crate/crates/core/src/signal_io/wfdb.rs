//! WFDB (PhysioNet) record headers and format 212 / 16 signal files.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::record::{EcgRecord, SourceFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbSignal {
    pub file_name: String,
    pub format: u16,
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub sample_rate: f64,
    pub num_samples: Option<usize>,
    pub signals: Vec<WfdbSignal>,
}

impl WfdbHeader {
    pub fn ecg_channel(&self) -> usize {
        self.signals
            .iter()
            .position(|s| {
                let d = s.description.to_ascii_uppercase();
                d.contains("ECG") || d.contains("EKG")
            })
            .unwrap_or(0)
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::UnreadableHeader(msg.into())
}

/// Parses the text of a `.hea` file.
pub fn parse_header(text: &str) -> Result<WfdbHeader> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let record_line = lines.next().ok_or_else(|| bad("empty header"))?;
    let mut fields = record_line.split_whitespace();
    let record_name = fields.next().ok_or_else(|| bad("missing record name"))?.to_string();
    if record_name.contains('/') {
        return Err(Error::UnsupportedFormat("multi-segment WFDB records".into()));
    }
    let nsig: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing signal count"))?;
    let sample_rate = match fields.next() {
        Some(f) => {
            let rate = f.split(['/', '(']).next().unwrap_or(f);
            rate.parse().map_err(|_| bad(format!("bad sampling frequency `{f}`")))?
        }
        None => 250.0,
    };
    let num_samples = fields.next().and_then(|s| s.parse().ok());

    let mut signals = Vec::with_capacity(nsig);
    for i in 0..nsig {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing signal line {i}")))?;
        let mut f = line.split_whitespace();
        let file_name = f.next().ok_or_else(|| bad("missing file name"))?.to_string();
        let fmt_field = f.next().ok_or_else(|| bad("missing format"))?;
        let format: u16 = fmt_field
            .split(['x', ':', '+'])
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad format `{fmt_field}`")))?;
        let (gain, explicit_baseline, units) = match f.next() {
            Some(g) => parse_gain(g)?,
            None => (200.0, None, "mV".to_string()),
        };
        let _adc_res = f.next();
        let adc_zero: i32 = f.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        let _init = f.next();
        let _checksum = f.next();
        let _block = f.next();
        let description = f.collect::<Vec<_>>().join(" ");
        signals.push(WfdbSignal {
            file_name,
            format,
            gain: if gain == 0.0 { 200.0 } else { gain },
            baseline: explicit_baseline.unwrap_or(adc_zero),
            units,
            description,
        });
    }
    Ok(WfdbHeader {
        record_name,
        sample_rate,
        num_samples,
        signals,
    })
}

/// `gain[(baseline)][/units]`
fn parse_gain(field: &str) -> Result<(f64, Option<i32>, String)> {
    let (head, units) = match field.split_once('/') {
        Some((h, u)) => (h, u.to_string()),
        None => (field, "mV".to_string()),
    };
    let (gain_s, baseline) = match head.split_once('(') {
        Some((g, rest)) => {
            let b = rest
                .trim_end_matches(')')
                .parse()
                .map_err(|_| bad(format!("bad baseline in `{field}`")))?;
            (g, Some(b))
        }
        None => (head, None),
    };
    let gain = gain_s
        .parse()
        .map_err(|_| bad(format!("bad gain `{field}`")))?;
    Ok((gain, baseline, units))
}

fn sign_extend_12(v: u16) -> i32 {
    let v = v as i32 & 0x0FFF;
    if v & 0x800 != 0 {
        v - 0x1000
    } else {
        v
    }
}

/// Decodes an interleaved format 212 byte stream.
pub fn decode_212(bytes: &[u8]) -> Vec<i32> {
    let mut out = Vec::with_capacity(bytes.len() * 2 / 3);
    for chunk in bytes.chunks(3) {
        match *chunk {
            [b0, b1, b2] => {
                out.push(sign_extend_12(b0 as u16 | ((b1 as u16 & 0x0F) << 8)));
                out.push(sign_extend_12(b2 as u16 | ((b1 as u16 & 0xF0) << 4)));
            }
            [b0, b1] => out.push(sign_extend_12(b0 as u16 | ((b1 as u16 & 0x0F) << 8))),
            _ => {}
        }
    }
    out
}

/// Encodes samples (already interleaved) as format 212; values are clamped
/// to the 12-bit range.
pub fn encode_212(samples: &[i32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 3 / 2 + 2);
    for pair in samples.chunks(2) {
        let a = (pair[0].clamp(-2048, 2047) & 0x0FFF) as u16;
        let b = pair.get(1).map(|v| (v.clamp(&-2048, &2047) & 0x0FFF) as u16).unwrap_or(0);
        out.push((a & 0xFF) as u8);
        out.push((((a >> 8) & 0x0F) | ((b >> 4) & 0xF0)) as u8);
        out.push((b & 0xFF) as u8);
    }
    out
}

fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hea")
}

/// Reads the ECG channel of a WFDB record. `path` may name the `.hea`
/// file, the `.dat` file, or the bare record.
pub fn read_wfdb_record(path: impl AsRef<Path>) -> Result<EcgRecord> {
    let hea = header_path(path.as_ref());
    let text = std::fs::read_to_string(&hea).map_err(|e| Error::read(&hea, e))?;
    let header = parse_header(&text)?;
    let dir = hea.parent().map(Path::to_path_buf).unwrap_or_default();
    let channel = header.ecg_channel();
    let sig = header
        .signals
        .get(channel)
        .ok_or_else(|| bad("header lists no signals"))?;
    // Signals sharing a file are frame-interleaved.
    let group: Vec<usize> = header
        .signals
        .iter()
        .enumerate()
        .filter(|(_, s)| s.file_name == sig.file_name)
        .map(|(i, _)| i)
        .collect();
    let stride = group.len();
    let pos = group.iter().position(|&i| i == channel).unwrap_or(0);
    let dat = dir.join(&sig.file_name);
    let bytes = std::fs::read(&dat).map_err(|e| Error::read(&dat, e))?;
    let raw: Vec<i32> = match sig.format {
        212 => decode_212(&bytes),
        16 => bytes
            .chunks_exact(2)
            .map(|w| i16::from_le_bytes([w[0], w[1]]) as i32)
            .collect(),
        80 => bytes.iter().map(|&b| b as i32 - 128).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "WFDB signal format {other}"
            )))
        }
    };
    let mut digital: Vec<i32> = raw.into_iter().skip(pos).step_by(stride).collect();
    if let Some(n) = header.num_samples {
        digital.truncate(n);
    }
    let samples: Vec<f64> = digital
        .into_iter()
        .map(|d| (d - sig.baseline) as f64 / sig.gain)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(EcgRecord::from_samples(samples, header.sample_rate, SourceFormat::Wfdb))
}

/// Writes a single-signal format 212 record (`<name>.hea` + `<name>.dat`)
/// into `dir`, with gain 200 adu/mV and baseline 0.
pub fn write_wfdb_record(dir: impl AsRef<Path>, name: &str, record: &EcgRecord) -> Result<()> {
    let dir = dir.as_ref();
    let gain = 200.0;
    let digital: Vec<i32> = record
        .samples
        .iter()
        .map(|v| (v * gain).round() as i32)
        .collect();
    let dat = dir.join(format!("{name}.dat"));
    std::fs::write(&dat, encode_212(&digital)).map_err(|e| Error::io(&dat, e))?;
    let hea = dir.join(format!("{name}.hea"));
    let text = format!(
        "{name} 1 {} {}\n{name}.dat 212 {gain}/mV 11 0 {} 0 0 ECG\n",
        record.sample_rate,
        record.samples.len(),
        digital.first().copied().unwrap_or(0)
    );
    std::fs::write(&hea, text).map_err(|e| Error::io(&hea, e))
}
