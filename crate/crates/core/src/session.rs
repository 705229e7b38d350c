//! Portable session file: the full processing state of one record, in
//! versioned, pretty-printed JSON. The schema is documented in
//! `docs/session-schema.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beat_detection::{BeatClass, BeatMark, DetectorParams, Provenance};
use crate::correction::{mark_regions, merge_regions, CorrectionParams, Region, RegionReason};
use crate::error::{Error, Result};
use crate::irregularity::IrregularityParams;
use crate::signal_io::{format_bad_intervals, format_rtimes, SourceFormat};
use crate::validation::ValidationReport;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordInfo {
    /// Input path as given on the command line.
    #[serde(default)]
    pub path: Option<String>,
    pub source_format: SourceFormat,
    pub sample_rate: f64,
    /// Processed span, absolute seconds.
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub inverted: bool,
    /// Interval list for RRI-only inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rri: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub detector: DetectorParams,
    pub irregularity: IrregularityParams,
    pub correction: CorrectionParams,
    pub noise_window_ms: f64,
    #[serde(default)]
    pub test_duration: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            detector: DetectorParams::default(),
            irregularity: IrregularityParams::default(),
            correction: CorrectionParams::default(),
            noise_window_ms: crate::noise_profile::DEFAULT_WINDOW_MS,
            test_duration: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditKind {
    Delete,
    Add,
    Interpolate,
    Relocate,
    InvertSignal,
    RegionOverride,
}

/// One manual edit. Targets are indices into the session's beat or region
/// list at the time the edit is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditEntry {
    pub ordinal: u64,
    pub kind: EditKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beat: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<usize>,
    /// New beat time for ADD and RELOCATE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    /// Beats to insert for INTERPOLATE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// New region for REGION_OVERRIDE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl EditEntry {
    pub fn new(kind: EditKind) -> Self {
        EditEntry {
            ordinal: 0,
            kind,
            beat: None,
            region: None,
            time: None,
            count: None,
            span: None,
            timestamp: None,
        }
    }

    pub fn delete(beat: usize) -> Self {
        EditEntry {
            beat: Some(beat),
            ..EditEntry::new(EditKind::Delete)
        }
    }

    pub fn add(time: f64) -> Self {
        EditEntry {
            time: Some(time),
            ..EditEntry::new(EditKind::Add)
        }
    }

    pub fn interpolate(beat: usize, count: usize) -> Self {
        EditEntry {
            beat: Some(beat),
            count: Some(count),
            ..EditEntry::new(EditKind::Interpolate)
        }
    }

    pub fn relocate(beat: usize, time: f64) -> Self {
        EditEntry {
            beat: Some(beat),
            time: Some(time),
            ..EditEntry::new(EditKind::Relocate)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub format_version: u32,
    pub record: RecordInfo,
    pub parameters: Parameters,
    #[serde(default)]
    pub test_region: Option<Span>,
    pub beats: Vec<BeatMark>,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub edits: Vec<EditEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
}

impl Session {
    pub fn new(record: RecordInfo, parameters: Parameters) -> Self {
        Session {
            format_version: FORMAT_VERSION,
            record,
            parameters,
            test_region: None,
            beats: Vec::new(),
            regions: Vec::new(),
            edits: Vec::new(),
            validation: None,
        }
    }

    /// Serialised form, newline-terminated.
    pub fn to_json(&self) -> Result<String> {
        self.check()?;
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::CorruptSession(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptSession(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptSession("missing format_version".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found.min(u32::MAX as u64) as u32,
                expected: FORMAT_VERSION,
            });
        }
        let session: Session =
            serde_json::from_value(value).map_err(|e| Error::CorruptSession(e.to_string()))?;
        session.check()?;
        Ok(session)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        Session::from_json(&text)
    }

    /// Structural consistency: strictly increasing beat times, well-formed
    /// and non-overlapping regions.
    pub fn check(&self) -> Result<()> {
        if let Some(w) = self.beats.windows(2).find(|w| !(w[1].time > w[0].time)) {
            return Err(Error::CorruptSession(format!(
                "beat times not increasing at {:.6} s",
                w[1].time
            )));
        }
        if let Some(r) = self.regions.iter().find(|r| !(r.end > r.start)) {
            return Err(Error::CorruptSession(format!(
                "empty region [{:.6}, {:.6}]",
                r.start, r.end
            )));
        }
        if let Some(w) = self.regions.windows(2).find(|w| w[1].start < w[0].end) {
            return Err(Error::CorruptSession(format!(
                "regions out of order or overlapping at {:.6} s",
                w[1].start
            )));
        }
        Ok(())
    }

    /// `.rtimes` content for the current beats.
    pub fn rtimes(&self) -> String {
        format_rtimes(&self.beats)
    }

    /// `.bi` content for the current regions.
    pub fn bad_intervals(&self) -> Result<String> {
        format_bad_intervals(&self.regions)
    }

    /// Rebuilds the region list from beat classes, keeping MANUAL regions.
    pub fn refresh_regions(&mut self) {
        let manual: Vec<Region> = self
            .regions
            .iter()
            .filter(|r| r.reason == RegionReason::Manual)
            .copied()
            .collect();
        self.regions = mark_regions(&mut self.beats, self.record.start, self.record.end, &manual);
    }

    fn min_gap(&self) -> f64 {
        1.0 / self.record.sample_rate
    }

    fn beat_ref(&self, edit: &EditEntry) -> Result<usize> {
        edit.beat
            .filter(|&i| i < self.beats.len() && self.beats[i].class != BeatClass::Removed)
            .ok_or_else(|| Error::InvalidTarget(format!("beat {:?}", edit.beat)))
    }

    fn next_active(&self, i: usize) -> Option<usize> {
        (i + 1..self.beats.len()).find(|&j| self.beats[j].class != BeatClass::Removed)
    }

    /// Applies a manual edit and appends it to the log. On error the session
    /// is left unchanged.
    pub fn apply_edit(&mut self, mut edit: EditEntry) -> Result<()> {
        match edit.kind {
            EditKind::Delete => {
                let i = self.beat_ref(&edit)?;
                let b = &mut self.beats[i];
                b.class = BeatClass::Removed;
                b.beat_type = None;
                b.provenance = Provenance::Manual;
            }
            EditKind::Add => {
                let t = edit
                    .time
                    .filter(|t| *t >= self.record.start && *t <= self.record.end)
                    .ok_or_else(|| Error::InvalidTarget(format!("time {:?}", edit.time)))?;
                let pos = self.beats.partition_point(|b| b.time < t);
                let gap = self.min_gap();
                let clash = [pos.checked_sub(1), Some(pos)]
                    .into_iter()
                    .flatten()
                    .filter_map(|j| self.beats.get(j))
                    .any(|b| (b.time - t).abs() < gap);
                if clash {
                    return Err(Error::InvalidTarget(format!(
                        "a beat already exists within one sample of {t:.6} s"
                    )));
                }
                let mut beat = BeatMark::detected(t);
                beat.provenance = Provenance::Manual;
                self.beats.insert(pos, beat);
            }
            EditKind::Interpolate => {
                let i = self.beat_ref(&edit)?;
                let j = self
                    .next_active(i)
                    .ok_or_else(|| Error::InvalidTarget(format!("no interval after beat {i}")))?;
                let k = edit
                    .count
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::InvalidTarget("interpolation count".into()))?;
                let (a, b) = (self.beats[i].time, self.beats[j].time);
                let step = (b - a) / (k + 1) as f64;
                if step < self.min_gap() {
                    return Err(Error::InvalidTarget(format!("interval after beat {i} too short")));
                }
                // removed marks between i and j stay in place, so merge by time
                let times: Vec<f64> = (1..=k).map(|n| a + n as f64 * step).collect();
                let gap = self.min_gap();
                if let Some(t) = times
                    .iter()
                    .find(|&&t| self.beats[i + 1..j].iter().any(|b| (b.time - t).abs() < gap))
                {
                    return Err(Error::InvalidTarget(format!(
                        "a removed beat lies within one sample of {t:.6} s"
                    )));
                }
                for t in times {
                    let mut m = BeatMark::interpolated(t);
                    m.beat_type = None;
                    m.provenance = Provenance::Manual;
                    let pos = self.beats.partition_point(|b| b.time < t);
                    self.beats.insert(pos, m);
                }
            }
            EditKind::Relocate => {
                let i = self.beat_ref(&edit)?;
                let t = edit
                    .time
                    .ok_or_else(|| Error::InvalidTarget("relocation time".into()))?;
                let lo = i.checked_sub(1).map(|j| self.beats[j].time);
                let hi = self.beats.get(i + 1).map(|b| b.time);
                if lo.is_some_and(|l| t <= l) || hi.is_some_and(|h| t >= h) {
                    return Err(Error::NonMonotonicTime(t));
                }
                let b = &mut self.beats[i];
                b.time = t;
                b.class = BeatClass::Adjusted;
                b.provenance = Provenance::Manual;
            }
            EditKind::InvertSignal => {
                self.record.inverted = !self.record.inverted;
            }
            EditKind::RegionOverride => self.override_region(&edit)?,
        }
        edit.ordinal = self.edits.len() as u64 + 1;
        self.edits.push(edit);
        Ok(())
    }

    /// With `region`: accepts that region, re-including its excluded beats.
    /// With `span`: marks a MANUAL region and excludes the beats inside.
    fn override_region(&mut self, edit: &EditEntry) -> Result<()> {
        match (edit.region, edit.span) {
            (Some(r), None) if r < self.regions.len() => {
                let region = self.regions.remove(r);
                for b in self.beats.iter_mut() {
                    if b.class == BeatClass::Excluded && b.time >= region.start && b.time <= region.end {
                        b.class = BeatClass::Included;
                        b.provenance = Provenance::Manual;
                    }
                }
                Ok(())
            }
            (None, Some(span)) if span.end > span.start => {
                for b in self.beats.iter_mut() {
                    if b.class.is_valid() && b.time >= span.start && b.time <= span.end {
                        b.class = BeatClass::Excluded;
                        b.provenance = Provenance::Manual;
                    }
                }
                let mut regions = std::mem::take(&mut self.regions);
                regions.push(Region::new(span.start, span.end, RegionReason::Manual));
                self.regions = merge_regions(regions);
                Ok(())
            }
            _ => Err(Error::InvalidTarget(format!(
                "region override needs exactly one of an existing region index or a span (got {:?}, {:?})",
                edit.region, edit.span
            ))),
        }
    }

    /// Replays `edits` over a copy of `self`.
    pub fn replay(&self, edits: &[EditEntry]) -> Result<Session> {
        let mut s = self.clone();
        for e in edits {
            s.apply_edit(e.clone())?;
        }
        Ok(s)
    }

    pub fn valid_beat_count(&self) -> usize {
        self.beats.iter().filter(|b| b.class.is_valid()).count()
    }
}
