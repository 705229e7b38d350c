use std::fmt::Write as _;
use std::path::Path;

use crate::beat_detection::BeatMark;
use crate::correction::{Region, RegionReason};
use crate::error::{Error, Result};

/// `.rtimes` body: one included beat time per line, 6 decimals.
pub fn format_rtimes(beats: &[BeatMark]) -> String {
    let mut out = String::new();
    for b in beats.iter().filter(|b| b.class.is_valid()) {
        let _ = writeln!(out, "{:.6}", b.time);
    }
    out
}

pub fn write_rtimes(beats: &[BeatMark], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_rtimes(beats)).map_err(|e| Error::io(path, e))
}

/// `.bi` body: `start<TAB>end<TAB>REASON` per region. Refuses overlapping
/// or unsorted regions; touching regions are fine.
pub fn format_bad_intervals(regions: &[Region]) -> Result<String> {
    for w in regions.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::OverlappingRegions(w[0].start, w[0].end, w[1].start, w[1].end));
        }
    }
    let mut out = String::new();
    for r in regions {
        let _ = writeln!(out, "{:.6}\t{:.6}\t{}", r.start, r.end, r.reason.as_str());
    }
    Ok(out)
}

pub fn write_bad_intervals(regions: &[Region], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = format_bad_intervals(regions)?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_rtimes(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::UnsupportedFormat(format!("bad .rtimes line `{l}`")))
        })
        .collect()
}

pub fn read_bad_intervals(path: impl AsRef<Path>) -> Result<Vec<Region>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    let mut regions = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split('\t').collect();
        let bad = || Error::UnsupportedFormat(format!("bad .bi line `{line}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        regions.push(Region {
            start: parts[0].parse().map_err(|_| bad())?,
            end: parts[1].parse().map_err(|_| bad())?,
            reason: RegionReason::parse(parts[2]).ok_or_else(bad)?,
        });
    }
    Ok(regions)
}
