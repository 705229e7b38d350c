//! RRI series, regional statistics, outlier detection and P-wave based
//! beat typing.
//!
//! Positions: a series built from `m` beats has `m - 1` intervals; beat
//! position `p` terminates interval `p - 1` and starts interval `p`.

mod classify;
mod pwave;

use serde::{Deserialize, Serialize};

use crate::beat_detection::{BeatClass, BeatMark};
use crate::error::{Error, Result};

pub use classify::{classify_beats, ClassifyOptions, ClassifySummary};
pub use pwave::{detect_pwave, PWAVE_WINDOW_S};

/// Intervals on each side of a beat that enter the regional mean.
pub const REGIONAL_INTERVALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub duration: f64,
    /// Index into the beat list of the interval's first beat.
    pub left: usize,
    pub right: usize,
}

/// Ordered inter-beat intervals over the non-removed beats.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RriSeries {
    pub intervals: Vec<Interval>,
}

impl RriSeries {
    pub fn from_beats(beats: &[BeatMark]) -> Self {
        let active: Vec<usize> = beats
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class != BeatClass::Removed)
            .map(|(i, _)| i)
            .collect();
        let intervals = active
            .windows(2)
            .map(|w| Interval {
                duration: beats[w[1]].time - beats[w[0]].time,
                left: w[0],
                right: w[1],
            })
            .collect();
        RriSeries { intervals }
    }

    /// Series over consecutive synthetic beat indices.
    pub fn from_durations(durations: &[f64]) -> Self {
        RriSeries {
            intervals: durations
                .iter()
                .enumerate()
                .map(|(k, &duration)| Interval {
                    duration,
                    left: k,
                    right: k + 1,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.duration).collect()
    }

    /// Number of beat positions.
    pub fn beat_count(&self) -> usize {
        if self.intervals.is_empty() {
            0
        } else {
            self.intervals.len() + 1
        }
    }
}

/// Regional thresholds and physiological bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrregularityParams {
    pub rri_upper_frac: f64,
    pub rri_lower_frac: f64,
    /// Largest relative beat-to-beat increase treated as gradual.
    pub grad_inc_frac: f64,
    /// Largest relative beat-to-beat decrease treated as gradual.
    pub grad_dec_frac: f64,
    /// Seconds; longer intervals are sudden increases even with a P-wave.
    pub hard_upper_bound: f64,
    pub accept_min: f64,
    pub accept_max: f64,
}

impl Default for IrregularityParams {
    fn default() -> Self {
        IrregularityParams {
            rri_upper_frac: 1.20,
            rri_lower_frac: 0.80,
            grad_inc_frac: 0.10,
            grad_dec_frac: 0.10,
            hard_upper_bound: 1.5,
            accept_min: 0.3,
            accept_max: 1.8,
        }
    }
}

impl IrregularityParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rri_lower_frac > 0.0
            && self.rri_lower_frac < 1.0
            && self.rri_upper_frac > 1.0
            && self.grad_inc_frac > 0.0
            && self.grad_dec_frac > 0.0
            && self.accept_min > 0.0
            && self.accept_min < self.accept_max
            && self.hard_upper_bound > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "need 0 < lower < 1 < upper, positive gradual fractions and ordered bounds".into(),
            ))
        }
    }

    pub fn in_acceptance_window(&self, d: f64) -> bool {
        d >= self.accept_min && d <= self.accept_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionalStats {
    pub rri_mean: f64,
    /// Mean noise profile of neighbouring beats, when a profile was given.
    pub noise_mean: Option<f64>,
    pub lower_frac: f64,
    pub upper_frac: f64,
    /// Intervals that entered `rri_mean`.
    pub count: usize,
}

impl RegionalStats {
    pub fn in_band(&self, d: f64) -> bool {
        d >= self.lower_frac * self.rri_mean && d <= self.upper_frac * self.rri_mean
    }
}

/// Intervals `[p - 20, p + 20)` clipped to the series, skipping `skip`.
fn window_mean(durations: &[f64], position: usize, skip: std::ops::Range<usize>) -> (f64, usize) {
    let a = position.saturating_sub(REGIONAL_INTERVALS);
    let b = (position + REGIONAL_INTERVALS).min(durations.len());
    let mut sum = 0.0;
    let mut count = 0;
    for (k, d) in durations.iter().enumerate().take(b).skip(a) {
        if !skip.contains(&k) {
            sum += d;
            count += 1;
        }
    }
    (sum / count.max(1) as f64, count)
}

/// Regional mean of the up-to-20 intervals before and the up-to-20
/// intervals after beat position `position`.
pub fn regional_stats(
    rri: &RriSeries,
    noise: Option<&[f64]>,
    position: usize,
    params: &IrregularityParams,
) -> Result<RegionalStats> {
    regional_stats_excluding(rri, noise, position, 0..0, params)
}

/// As [`regional_stats`], leaving the intervals in `skip` out of the mean.
pub fn regional_stats_excluding(
    rri: &RriSeries,
    noise: Option<&[f64]>,
    position: usize,
    skip: std::ops::Range<usize>,
    params: &IrregularityParams,
) -> Result<RegionalStats> {
    let durations = rri.durations();
    stats_from_durations(&durations, noise, position, skip, params)
}

pub(crate) fn stats_from_durations(
    durations: &[f64],
    noise: Option<&[f64]>,
    position: usize,
    skip: std::ops::Range<usize>,
    params: &IrregularityParams,
) -> Result<RegionalStats> {
    let (rri_mean, count) = window_mean(durations, position, skip);
    if count < 2 {
        return Err(Error::EmptyWindow(position));
    }
    let noise_mean = noise.and_then(|v| {
        let a = position.saturating_sub(REGIONAL_INTERVALS);
        let b = (position + REGIONAL_INTERVALS + 1).min(v.len());
        let (s, c) = (a..b)
            .filter(|&j| j != position)
            .fold((0.0, 0usize), |(s, c), j| (s + v[j], c + 1));
        (c > 0).then(|| s / c as f64)
    });
    Ok(RegionalStats {
        rri_mean,
        noise_mean,
        lower_frac: params.rri_lower_frac,
        upper_frac: params.rri_upper_frac,
        count,
    })
}

/// Flags interval `k` when it falls strictly outside
/// `[lower * mean, upper * mean]` of the regional mean at its terminating
/// beat, or outside the absolute acceptance window.
pub fn detect_outliers(rri: &RriSeries, params: &IrregularityParams) -> Vec<bool> {
    outlier_flags(&rri.durations(), params)
}

pub(crate) fn outlier_flags(durations: &[f64], params: &IrregularityParams) -> Vec<bool> {
    let n = durations.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for d in durations {
        prefix.push(prefix.last().unwrap() + d);
    }
    (0..n)
        .map(|k| {
            let d = durations[k];
            if !params.in_acceptance_window(d) {
                return true;
            }
            let position = k + 1;
            let a = position.saturating_sub(REGIONAL_INTERVALS);
            let b = (position + REGIONAL_INTERVALS).min(n);
            if b - a < 2 {
                return false;
            }
            // direct sum keeps the result bit-identical to a plain loop
            let mean = durations[a..b].iter().sum::<f64>() / (b - a) as f64;
            d < params.rri_lower_frac * mean || d > params.rri_upper_frac * mean
        })
        .collect()
}

/// `S1..S4`: sums of the first 1..4 intervals starting at beat `position`
/// (fewer near the end of the series).
pub fn cumulative_sums(rri: &RriSeries, position: usize) -> Vec<f64> {
    let mut acc = 0.0;
    rri.intervals
        .iter()
        .skip(position)
        .take(4)
        .map(|i| {
            acc += i.duration;
            acc
        })
        .collect()
}

/// Number of leading intervals whose sum is closest to `mean`.
pub fn closest_sum_count(sums: &[f64], mean: f64) -> Option<usize> {
    sums.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - mean).abs().total_cmp(&(b.1 - mean).abs()))
        .map(|(k, _)| k + 1)
}

/// True when intervals `k` and `k + 1` add up to roughly two regional
/// intervals: `sum` within `[lower * 2m, upper * 2m]`.
pub fn pair_sum_check(rri: &RriSeries, interval_index: usize, stats: &RegionalStats) -> bool {
    match (
        rri.intervals.get(interval_index),
        rri.intervals.get(interval_index + 1),
    ) {
        (Some(a), Some(b)) => pair_sum_ok(a.duration, b.duration, stats),
        _ => false,
    }
}

pub(crate) fn pair_sum_ok(a: f64, b: f64, stats: &RegionalStats) -> bool {
    let sum = a + b;
    let two_m = 2.0 * stats.rri_mean;
    sum >= stats.lower_frac * two_m && sum <= stats.upper_frac * two_m
}

/// Number of equal sub-intervals a long interval can be split into, if the
/// resulting sub-intervals land inside the regional band.
pub fn split_eligibility(duration: f64, stats: &RegionalStats) -> Option<usize> {
    if !(stats.rri_mean > 0.0) {
        return None;
    }
    let n = (duration / stats.rri_mean).round();
    if n < 2.0 {
        return None;
    }
    let n = n as usize;
    let sub = duration / n as f64;
    stats.in_band(sub).then_some(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: f64) -> RegionalStats {
        RegionalStats {
            rri_mean: mean,
            noise_mean: None,
            lower_frac: 0.8,
            upper_frac: 1.2,
            count: 40,
        }
    }

    #[test]
    fn regional_mean_constant_and_ramp() {
        let p = IrregularityParams::default();
        let rri = RriSeries::from_durations(&[0.8; 40]);
        let s = regional_stats(&rri, None, 20, &p).unwrap();
        assert!((s.rri_mean - 0.8).abs() < 1e-12);
        assert_eq!(s.count, 40);

        let ramp: Vec<f64> = (0..40).map(|k| 0.75 + 0.1 * k as f64 / 39.0).collect();
        let direct = ramp.iter().sum::<f64>() / 40.0;
        let s = regional_stats(&RriSeries::from_durations(&ramp), None, 20, &p).unwrap();
        assert!((s.rri_mean - direct).abs() < 1e-15);
        assert!((s.rri_mean - 0.8).abs() < 1e-12);
    }

    #[test]
    fn regional_mean_truncates_at_start() {
        let p = IrregularityParams::default();
        let durations: Vec<f64> = (0..30).map(|k| 0.7 + 0.01 * k as f64).collect();
        let s = regional_stats(&RriSeries::from_durations(&durations), None, 0, &p).unwrap();
        let following = durations[..20].iter().sum::<f64>() / 20.0;
        assert_eq!(s.count, 20);
        assert!((s.rri_mean - following).abs() < 1e-15);
        assert!(matches!(
            regional_stats(&RriSeries::from_durations(&[0.8]), None, 0, &p),
            Err(Error::EmptyWindow(0))
        ));
    }

    #[test]
    fn noise_mean_uses_neighbour_beats() {
        let p = IrregularityParams::default();
        let rri = RriSeries::from_durations(&[0.8; 10]);
        let mut noise = vec![1.0; 11];
        noise[5] = 100.0;
        let s = regional_stats(&rri, Some(&noise), 5, &p).unwrap();
        assert_eq!(s.noise_mean, Some(1.0));
    }

    #[test]
    fn outliers_constant_long_and_huge() {
        let p = IrregularityParams::default();
        assert!(detect_outliers(&RriSeries::from_durations(&[0.8; 60]), &p)
            .iter()
            .all(|f| !f));
        let mut d = vec![0.8; 60];
        d[30] = 1.2;
        let flags = detect_outliers(&RriSeries::from_durations(&d), &p);
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[30]);
        d[30] = 2.0;
        let flags = detect_outliers(&RriSeries::from_durations(&d), &p);
        assert!(flags[30]);
        // relative rule alone would flag it too
        let mean = (39.0 * 0.8 + 2.0) / 40.0;
        assert!(2.0 > 1.2 * mean && 2.0 > p.accept_max);
    }

    #[test]
    fn cumulative_sums_cases() {
        let rri = RriSeries::from_durations(&[0.8, 0.4, 0.4, 0.8, 0.8, 0.8]);
        let s = cumulative_sums(&rri, 1);
        let expected = [0.4, 0.8, 1.6, 2.4];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(closest_sum_count(&s, 0.8), Some(2));
        assert_eq!(cumulative_sums(&rri, 4).len(), 2);
    }

    #[test]
    fn pair_sums() {
        let rri = RriSeries::from_durations(&[0.6, 1.0, 0.4, 0.5, 0.8, 0.8]);
        assert!(pair_sum_check(&rri, 0, &stats(0.8)));
        assert!(!pair_sum_check(&rri, 2, &stats(0.8)));
        assert!(pair_sum_check(&rri, 4, &stats(0.8)));
        assert!(!pair_sum_check(&rri, 5, &stats(0.8)));
    }

    #[test]
    fn split_cases() {
        assert_eq!(split_eligibility(2.4, &stats(0.8)), Some(3));
        assert_eq!(split_eligibility(1.0, &stats(0.8)), None);
        assert_eq!(split_eligibility(1.9, &stats(0.8)), Some(2));
    }

    #[test]
    fn series_skips_removed_beats() {
        let mut beats: Vec<BeatMark> = [0.0, 0.4, 0.8, 1.6].iter().map(|&t| BeatMark::detected(t)).collect();
        beats[1].class = BeatClass::Removed;
        let rri = RriSeries::from_beats(&beats);
        assert_eq!(rri.len(), 2);
        assert_eq!(rri.intervals[0].left, 0);
        assert_eq!(rri.intervals[0].right, 2);
        assert!((rri.intervals[0].duration - 0.8).abs() < 1e-12);
    }
}

/// Non-removed beats in time order with their intervals; the working view
/// shared by classification and correction.
#[derive(Debug, Clone)]
pub(crate) struct ActiveView {
    pub beat_index: Vec<usize>,
    pub durations: Vec<f64>,
}

impl ActiveView {
    pub fn new(beats: &[BeatMark]) -> Self {
        let beat_index: Vec<usize> = beats
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class != BeatClass::Removed)
            .map(|(i, _)| i)
            .collect();
        let durations = beat_index
            .windows(2)
            .map(|w| beats[w[1]].time - beats[w[0]].time)
            .collect();
        ActiveView {
            beat_index,
            durations,
        }
    }

    pub fn len(&self) -> usize {
        self.beat_index.len()
    }

    /// Positions outside the leading and trailing training stretches.
    pub fn body(&self, edge: usize) -> std::ops::Range<usize> {
        let m = self.len();
        if m <= 2 * edge {
            0..0
        } else {
            edge.max(1)..m - edge
        }
    }
}
