use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where an [`EcgRecord`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceFormat {
    Txt,
    Edf,
    Bdf,
    Wfdb,
    RriOnly,
}

/// Requested input format; `Auto` picks by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatHint {
    #[default]
    Auto,
    Txt,
    Edf,
    Bdf,
    Wfdb,
    Rri,
}

impl std::str::FromStr for FormatHint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(FormatHint::Auto),
            "txt" | "text" | "tsv" => Ok(FormatHint::Txt),
            "edf" => Ok(FormatHint::Edf),
            "bdf" => Ok(FormatHint::Bdf),
            "wfdb" | "mit" => Ok(FormatHint::Wfdb),
            "rri" | "rr" => Ok(FormatHint::Rri),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// A uniformly sampled single-lead ECG, or an RRI-only series.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    /// Millivolts, in acquisition order. Empty for [`SourceFormat::RriOnly`].
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub start_offset: f64,
    pub source_format: SourceFormat,
    pub inverted: bool,
    /// R-R intervals in seconds; only populated for RRI-only sources.
    pub intervals: Vec<f64>,
}

impl EcgRecord {
    pub fn from_samples(samples: Vec<f64>, sample_rate: f64, source_format: SourceFormat) -> Self {
        EcgRecord {
            samples,
            sample_rate,
            start_offset: 0.0,
            source_format,
            inverted: false,
            intervals: Vec::new(),
        }
    }

    /// Builds an RRI-only record. The first beat sits at t = 0.
    pub fn from_intervals(intervals: Vec<f64>) -> Self {
        EcgRecord {
            samples: Vec::new(),
            sample_rate: 1000.0,
            start_offset: 0.0,
            source_format: SourceFormat::RriOnly,
            inverted: false,
            intervals,
        }
    }

    pub fn has_waveform(&self) -> bool {
        !self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        if self.source_format == SourceFormat::RriOnly {
            self.intervals.iter().sum()
        } else {
            self.samples.len() as f64 / self.sample_rate
        }
    }

    /// Beat times implied by an RRI-only record.
    pub fn rri_beat_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        out.push(0.0);
        for d in &self.intervals {
            t += d;
            out.push(t);
        }
        out
    }

    /// Sub-record covering `[start, end)` seconds. Sample times keep their
    /// meaning relative to the original record via `start_offset`.
    pub fn slice(&self, start: f64, end: f64) -> EcgRecord {
        if self.source_format == SourceFormat::RriOnly {
            let times = self.rri_beat_times();
            let kept: Vec<f64> = times
                .into_iter()
                .filter(|t| *t >= start && *t <= end)
                .collect();
            let intervals = kept.windows(2).map(|w| w[1] - w[0]).collect();
            let mut rec = EcgRecord::from_intervals(intervals);
            rec.start_offset = self.start_offset + kept.first().copied().unwrap_or(start);
            return rec;
        }
        let a = ((start * self.sample_rate).round() as usize).min(self.samples.len());
        let b = ((end * self.sample_rate).round() as usize).clamp(a, self.samples.len());
        EcgRecord {
            samples: self.samples[a..b].to_vec(),
            sample_rate: self.sample_rate,
            start_offset: self.start_offset + a as f64 / self.sample_rate,
            source_format: self.source_format,
            inverted: self.inverted,
            intervals: Vec::new(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::UnreadableHeader(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        match self.source_format {
            SourceFormat::RriOnly if self.intervals.is_empty() => Err(Error::EmptyRecord),
            SourceFormat::RriOnly => Ok(()),
            _ if self.samples.is_empty() => Err(Error::EmptyRecord),
            _ => Ok(()),
        }
    }
}

/// Reads an ECG (or RRI) record from disk.
pub fn read_record(
    path: impl AsRef<Path>,
    format: FormatHint,
    sample_rate_override: Option<f64>,
) -> Result<EcgRecord> {
    let path = path.as_ref();
    let format = match format {
        FormatHint::Auto => guess_format(path)?,
        f => f,
    };
    let mut record = match format {
        FormatHint::Txt => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
            super::txt::parse_txt(&text, sample_rate_override)?
        }
        FormatHint::Rri => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
            super::txt::parse_rri_text(&text)?
        }
        FormatHint::Edf | FormatHint::Bdf => {
            let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
            super::edf::parse_edf(&bytes)?
        }
        FormatHint::Wfdb => super::wfdb::read_wfdb_record(path)?,
        FormatHint::Auto => unreachable!(),
    };
    if let (Some(fs), true) = (sample_rate_override, format != FormatHint::Txt) {
        if record.source_format != SourceFormat::RriOnly {
            log::warn!("overriding header sample rate {} Hz with {} Hz", record.sample_rate, fs);
            record.sample_rate = fs;
        }
    }
    record.validate()?;
    Ok(record)
}

fn guess_format(path: &Path) -> Result<FormatHint> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "txt" | "tsv" | "csv" => Ok(FormatHint::Txt),
        "edf" => Ok(FormatHint::Edf),
        "bdf" => Ok(FormatHint::Bdf),
        "hea" | "dat" => Ok(FormatHint::Wfdb),
        "rri" | "rr" => Ok(FormatHint::Rri),
        _ => Err(Error::UnsupportedFormat(format!(
            "cannot infer format from {}",
            path.display()
        ))),
    }
}
