//! Correction of irregular beats (BT6 to BT8), the multi-loop driver,
//! region marking and spectral epoch counting.

mod epochs;
mod loops;
mod regions;

use serde::{Deserialize, Serialize};

use crate::beat_detection::{BeatClass, BeatMark, BeatType};
use crate::error::{Error, Result};
use crate::irregularity::ActiveView;

pub use epochs::{count_spectral_epochs, EPOCH_S};
pub use loops::{run_correction_loops, LoopReport};
pub use regions::{mark_regions, merge_regions, TRAINING_BEATS};

/// Runs longer than this many intervals are not searched for extra beats.
pub const MAX_REMOVAL_RUN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionReason {
    Noise,
    Irregular,
    Manual,
    Training,
}

impl RegionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionReason::Training => "TRAINING",
            RegionReason::Irregular => "IRREGULAR",
            RegionReason::Noise => "NOISE",
            RegionReason::Manual => "MANUAL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TRAINING" => Some(RegionReason::Training),
            "IRREGULAR" => Some(RegionReason::Irregular),
            "NOISE" => Some(RegionReason::Noise),
            "MANUAL" => Some(RegionReason::Manual),
            _ => None,
        }
    }
}

impl std::fmt::Display for RegionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A time span, in absolute seconds, excluded from spectral analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub start: f64,
    pub end: f64,
    pub reason: RegionReason,
}

impl Region {
    pub fn new(start: f64, end: f64, reason: RegionReason) -> Self {
        Region { start, end, reason }
    }

    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && self.end > start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionParams {
    pub loops: u32,
    pub analyze_pwaves: bool,
    /// Prominence threshold in noise standard deviations.
    pub pwave_sensitivity: f64,
}

impl Default for CorrectionParams {
    fn default() -> Self {
        CorrectionParams {
            loops: 2,
            analyze_pwaves: true,
            pwave_sensitivity: 2.0,
        }
    }
}

impl CorrectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.loops == 0 {
            return Err(Error::InvalidConfig("loops must be at least 1".into()));
        }
        if !(self.pwave_sensitivity > 0.0) {
            return Err(Error::InvalidConfig("pwave sensitivity must be positive".into()));
        }
        Ok(())
    }
}

/// Sum of squared successive differences.
pub fn successive_ssd(durations: &[f64]) -> f64 {
    durations.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Keep-mask over `times` (endpoints always kept) whose resulting intervals
/// minimise the summed squared deviation from `target`. Ties keep more
/// beats.
pub fn best_removal(times: &[f64], target: f64) -> Vec<bool> {
    let n = times.len();
    if n <= 2 {
        return vec![true; n];
    }
    let mut cost = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut kept = vec![0usize; n];
    cost[0] = 0.0;
    kept[0] = 1;
    for j in 1..n {
        for i in 0..j {
            let c = cost[i] + (times[j] - times[i] - target).powi(2);
            let k = kept[i] + 1;
            if c < cost[j] || (c == cost[j] && k > kept[j]) {
                cost[j] = c;
                from[j] = i;
                kept[j] = k;
            }
        }
    }
    let mut keep = vec![false; n];
    let mut j = n - 1;
    keep[j] = true;
    while j > 0 {
        j = from[j];
        keep[j] = true;
    }
    keep
}

/// Marks the beats at the given active positions as removed extra beats.
pub fn remove_extra_beats(beats: &mut [BeatMark], positions: &[usize]) -> usize {
    let view = ActiveView::new(beats);
    let mut n = 0;
    for &p in positions {
        if let Some(&b) = view.beat_index.get(p) {
            beats[b].class = BeatClass::Removed;
            beats[b].beat_type = Some(BeatType::Bt6);
            n += 1;
        }
    }
    n
}

/// Splits active interval `interval` into `n` equal parts by inserting
/// `n - 1` interpolated beats. Returns the beat-list index of the first
/// inserted beat.
pub fn interpolate_long(beats: &mut Vec<BeatMark>, interval: usize, n: usize) -> Result<usize> {
    let view = ActiveView::new(beats);
    if n < 2 || interval + 1 >= view.len() {
        return Err(Error::IneligibleInterval(interval));
    }
    let left = beats[view.beat_index[interval]].time;
    let right_idx = view.beat_index[interval + 1];
    let step = (beats[right_idx].time - left) / n as f64;
    let new: Vec<BeatMark> = (1..n)
        .map(|k| BeatMark::interpolated(left + k as f64 * step))
        .collect();
    beats.splice(right_idx..right_idx, new);
    Ok(right_idx)
}

/// Moves the beat at active position `position` to the midpoint of its
/// neighbours. Returns the signed shift in seconds.
pub fn adjust_short_long(beats: &mut [BeatMark], position: usize) -> Result<f64> {
    let view = ActiveView::new(beats);
    if position == 0 || position + 1 >= view.len() {
        return Err(Error::NotAPair(
            position.saturating_sub(1),
            position,
        ));
    }
    let t0 = beats[view.beat_index[position - 1]].time;
    let t1 = beats[view.beat_index[position + 1]].time;
    let b = &mut beats[view.beat_index[position]];
    let mid = t0 + 0.5 * (t1 - t0);
    let shift = mid - b.time;
    b.time = mid;
    b.class = BeatClass::Adjusted;
    b.beat_type = Some(BeatType::Bt8);
    Ok(shift)
}
