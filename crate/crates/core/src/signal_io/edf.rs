//! EDF (16-bit) and BioSemi BDF (24-bit) reading and writing.
//!
//! Only the first ECG-labelled channel is read (channel 0 when no label
//! mentions ECG/EKG). EDF+ annotation channels are skipped.

use std::path::Path;

use crate::error::{Error, Result};

use super::record::{EcgRecord, SourceFormat};

const FIXED_HEADER: usize = 256;
const PER_SIGNAL_HEADER: usize = 256;

/// One signal's header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub samples_per_record: usize,
}

impl SignalHeader {
    /// Linear digital-to-physical map.
    pub fn to_physical(&self, digital: i32) -> f64 {
        let span_d = (self.digital_max - self.digital_min) as f64;
        let span_p = self.physical_max - self.physical_min;
        self.physical_min + (digital - self.digital_min) as f64 * span_p / span_d
    }

    fn to_digital(&self, physical: f64) -> i32 {
        let span_d = (self.digital_max - self.digital_min) as f64;
        let span_p = self.physical_max - self.physical_min;
        let d = self.digital_min as f64 + (physical - self.physical_min) * span_d / span_p;
        (d.round() as i64).clamp(self.digital_min as i64, self.digital_max as i64) as i32
    }

    fn is_annotation(&self) -> bool {
        self.label.contains("Annotations")
    }

    fn is_ecg(&self) -> bool {
        let l = self.label.to_ascii_uppercase();
        l.contains("ECG") || l.contains("EKG")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub bdf: bool,
    pub header_bytes: usize,
    pub num_records: i64,
    pub record_duration: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    fn bytes_per_sample(&self) -> usize {
        if self.bdf {
            3
        } else {
            2
        }
    }

    fn record_bytes(&self) -> usize {
        self.signals
            .iter()
            .map(|s| s.samples_per_record * self.bytes_per_sample())
            .sum()
    }

    /// Index of the channel that will be read.
    pub fn ecg_channel(&self) -> Option<usize> {
        self.signals
            .iter()
            .position(|s| s.is_ecg() && !s.is_annotation())
            .or_else(|| self.signals.iter().position(|s| !s.is_annotation()))
    }
}

fn ascii_field(bytes: &[u8], what: &str) -> Result<String> {
    std::str::from_utf8(bytes)
        .map(|s| s.trim().to_string())
        .map_err(|_| Error::UnreadableHeader(format!("{what} is not ASCII")))
}

fn number<T: std::str::FromStr>(bytes: &[u8], what: &str) -> Result<T> {
    let s = ascii_field(bytes, what)?;
    s.parse()
        .map_err(|_| Error::UnreadableHeader(format!("{what}: cannot parse `{s}`")))
}

/// Parses the fixed and per-signal header blocks.
pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader> {
    if bytes.len() < FIXED_HEADER {
        return Err(Error::UnreadableHeader(format!(
            "file is {} bytes, shorter than the 256-byte fixed header",
            bytes.len()
        )));
    }
    let bdf = bytes[0] == 0xFF && &bytes[1..8] == b"BIOSEMI";
    if !bdf && ascii_field(&bytes[0..8], "version")? != "0" {
        return Err(Error::UnreadableHeader("version field must be `0`".into()));
    }
    let header_bytes: usize = number(&bytes[184..192], "header size")?;
    let num_records: i64 = number(&bytes[236..244], "record count")?;
    let record_duration: f64 = number(&bytes[244..252], "record duration")?;
    let ns: usize = number(&bytes[252..256], "signal count")?;
    if ns == 0 {
        return Err(Error::UnreadableHeader("no signals".into()));
    }
    if header_bytes != FIXED_HEADER + ns * PER_SIGNAL_HEADER {
        return Err(Error::UnreadableHeader(format!(
            "header size {header_bytes} inconsistent with {ns} signals"
        )));
    }
    if bytes.len() < header_bytes {
        return Err(Error::UnreadableHeader("truncated signal headers".into()));
    }
    if !(record_duration > 0.0) {
        return Err(Error::UnreadableHeader("record duration must be positive".into()));
    }
    // Field-major layout: all labels, then all transducers, ...
    let widths = [16usize, 80, 8, 8, 8, 8, 8, 80, 8, 32];
    let mut offsets = [0usize; 10];
    let mut acc = FIXED_HEADER;
    for (i, w) in widths.iter().enumerate() {
        offsets[i] = acc;
        acc += w * ns;
    }
    let field = |k: usize, s: usize| &bytes[offsets[k] + s * widths[k]..offsets[k] + (s + 1) * widths[k]];
    let mut signals = Vec::with_capacity(ns);
    for s in 0..ns {
        let sig = SignalHeader {
            label: ascii_field(field(0, s), "label")?,
            physical_dimension: ascii_field(field(2, s), "physical dimension")?,
            physical_min: number(field(3, s), "physical minimum")?,
            physical_max: number(field(4, s), "physical maximum")?,
            digital_min: number(field(5, s), "digital minimum")?,
            digital_max: number(field(6, s), "digital maximum")?,
            samples_per_record: number(field(8, s), "samples per record")?,
        };
        if sig.digital_max <= sig.digital_min {
            return Err(Error::UnreadableHeader(format!(
                "signal {s}: digital maximum must exceed digital minimum"
            )));
        }
        if sig.physical_max == sig.physical_min {
            return Err(Error::UnreadableHeader(format!(
                "signal {s}: physical range is empty"
            )));
        }
        signals.push(sig);
    }
    Ok(EdfHeader {
        bdf,
        header_bytes,
        num_records,
        record_duration,
        signals,
    })
}

/// Decodes an EDF/BDF file image into the ECG channel.
pub fn parse_edf(bytes: &[u8]) -> Result<EcgRecord> {
    let header = parse_header(bytes)?;
    let channel = header
        .ecg_channel()
        .ok_or_else(|| Error::UnreadableHeader("no signal channels".into()))?;
    let sig = &header.signals[channel];
    if sig.samples_per_record == 0 {
        return Err(Error::EmptyRecord);
    }
    let bps = header.bytes_per_sample();
    let record_bytes = header.record_bytes();
    let available = (bytes.len() - header.header_bytes) / record_bytes.max(1);
    let num_records = if header.num_records < 0 {
        available
    } else {
        (header.num_records as usize).min(available)
    };
    if num_records < header.num_records.max(0) as usize {
        log::warn!(
            "header declares {} data records but only {} are present",
            header.num_records,
            num_records
        );
    }
    let offset_in_record: usize = header.signals[..channel]
        .iter()
        .map(|s| s.samples_per_record * bps)
        .sum();
    let mut samples = Vec::with_capacity(num_records * sig.samples_per_record);
    for r in 0..num_records {
        let start = header.header_bytes + r * record_bytes + offset_in_record;
        let chunk = &bytes[start..start + sig.samples_per_record * bps];
        for word in chunk.chunks_exact(bps) {
            let d = if header.bdf {
                // 24-bit little-endian two's complement
                (i32::from_le_bytes([0, word[0], word[1], word[2]])) >> 8
            } else {
                i16::from_le_bytes([word[0], word[1]]) as i32
            };
            samples.push(sig.to_physical(d));
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let sample_rate = sig.samples_per_record as f64 / header.record_duration;
    let format = if header.bdf {
        SourceFormat::Bdf
    } else {
        SourceFormat::Edf
    };
    Ok(EcgRecord::from_samples(samples, sample_rate, format))
}

/// A channel to be written by [`write_edf`].
#[derive(Debug, Clone)]
pub struct EdfChannel {
    pub label: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    /// Samples per data record.
    pub samples_per_record: usize,
    /// Physical values.
    pub samples: Vec<f64>,
}

impl EdfChannel {
    /// A full-range ECG channel at `sample_rate` with 1 s data records.
    pub fn ecg(samples: Vec<f64>, sample_rate: usize, physical_range: (f64, f64), bdf: bool) -> Self {
        let (digital_min, digital_max) = if bdf {
            (-8_388_608, 8_388_607)
        } else {
            (-32768, 32767)
        };
        EdfChannel {
            label: "ECG".into(),
            physical_dimension: "mV".into(),
            physical_min: physical_range.0,
            physical_max: physical_range.1,
            digital_min,
            digital_max,
            samples_per_record: sample_rate,
            samples,
        }
    }
}

fn pad(out: &mut Vec<u8>, s: &str, width: usize) {
    let mut b: Vec<u8> = s.bytes().take(width).collect();
    b.resize(width, b' ');
    out.extend_from_slice(&b);
}

fn fmt_num(v: f64, width: usize) -> String {
    let s = format!("{v}");
    if s.len() <= width {
        return s;
    }
    for prec in (0..width).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= width {
            return s;
        }
    }
    s[..width].to_string()
}

/// Serializes channels into an EDF (or BDF) file image. Trailing samples
/// that do not fill a whole data record are zero padded.
pub fn encode_edf(channels: &[EdfChannel], record_duration: f64, bdf: bool) -> Vec<u8> {
    let ns = channels.len();
    let num_records = channels
        .iter()
        .map(|c| c.samples.len().div_ceil(c.samples_per_record.max(1)))
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    if bdf {
        out.push(0xFF);
        pad(&mut out, "BIOSEMI", 7);
    } else {
        pad(&mut out, "0", 8);
    }
    pad(&mut out, "X X X X", 80);
    pad(&mut out, "Startdate X X X X", 80);
    pad(&mut out, "01.01.00", 8);
    pad(&mut out, "00.00.00", 8);
    pad(&mut out, &(FIXED_HEADER + ns * PER_SIGNAL_HEADER).to_string(), 8);
    pad(&mut out, if bdf { "24BIT" } else { "" }, 44);
    pad(&mut out, &num_records.to_string(), 8);
    pad(&mut out, &fmt_num(record_duration, 8), 8);
    pad(&mut out, &ns.to_string(), 4);
    for c in channels {
        pad(&mut out, &c.label, 16);
    }
    for _ in channels {
        pad(&mut out, "", 80);
    }
    for c in channels {
        pad(&mut out, &c.physical_dimension, 8);
    }
    for c in channels {
        pad(&mut out, &fmt_num(c.physical_min, 8), 8);
    }
    for c in channels {
        pad(&mut out, &fmt_num(c.physical_max, 8), 8);
    }
    for c in channels {
        pad(&mut out, &c.digital_min.to_string(), 8);
    }
    for c in channels {
        pad(&mut out, &c.digital_max.to_string(), 8);
    }
    for _ in channels {
        pad(&mut out, "", 80);
    }
    for c in channels {
        pad(&mut out, &c.samples_per_record.to_string(), 8);
    }
    for _ in channels {
        pad(&mut out, "", 32);
    }
    // The header written out is what readers see, so quantize with the
    // parsed (possibly rounded) physical range.
    let parsed = parse_header(&out).expect("freshly written header parses");
    for r in 0..num_records {
        for (c, sig) in channels.iter().zip(&parsed.signals) {
            for k in 0..c.samples_per_record {
                let idx = r * c.samples_per_record + k;
                let d = c.samples.get(idx).map(|&v| sig.to_digital(v)).unwrap_or(0);
                if bdf {
                    let b = d.to_le_bytes();
                    out.extend_from_slice(&b[..3]);
                } else {
                    out.extend_from_slice(&(d as i16).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_edf(
    path: impl AsRef<Path>,
    channels: &[EdfChannel],
    record_duration: f64,
    bdf: bool,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_edf(channels, record_duration, bdf)).map_err(|e| Error::io(path, e))
}
