//! Per-beat noise profile: variance of the signal derivative in a window
//! around each beat, and the regional 120 % rule that flags noisy beats.

use std::collections::VecDeque;

use crate::beat_detection::BeatMark;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal_io::EcgRecord;

/// Default half-width of the window around each beat.
pub const DEFAULT_WINDOW_MS: f64 = 200.0;
/// Neighbours on each side used for the regional noise mean.
pub const REGIONAL_BEATS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    /// One value per beat, aligned with the beat list.
    pub per_beat: Vec<f64>,
    pub window_ms: f64,
}

/// Variance of `(x[i+1] - x[i]) * fs` over the samples within
/// `window_ms` of each beat (truncated at the record edges).
pub fn compute_noise_profile(
    record: &EcgRecord,
    beats: &[BeatMark],
    window_ms: f64,
) -> Result<NoiseProfile> {
    compute_noise_profile_with(record, beats, window_ms, Execution::default())
}

pub fn compute_noise_profile_with(
    record: &EcgRecord,
    beats: &[BeatMark],
    window_ms: f64,
    exec: Execution,
) -> Result<NoiseProfile> {
    if record.samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(window_ms > 0.0) {
        return Err(Error::InvalidConfig("noise window must be > 0 ms".into()));
    }
    let x = &record.samples;
    let fs = record.sample_rate;
    let w = window_ms / 1000.0;
    let last = x.len() - 1;
    let per_beat = exec.map_slice(beats, |b| {
        let t = b.time - record.start_offset;
        let lo = ((t - w) * fs).ceil().max(0.0) as usize;
        let hi = (((t + w) * fs).floor().max(0.0) as usize).min(last);
        derivative_variance(&x[lo.min(last)..=hi], fs)
    });
    Ok(NoiseProfile {
        per_beat,
        window_ms,
    })
}

fn derivative_variance(x: &[f64], fs: f64) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let m = (x.len() - 1) as f64;
    let mean = x.windows(2).map(|p| (p[1] - p[0]) * fs).sum::<f64>() / m;
    x.windows(2)
        .map(|p| {
            let d = (p[1] - p[0]) * fs - mean;
            d * d
        })
        .sum::<f64>()
        / m
}

/// Strict `value > upper_frac * regional_mean` test. Beats with no
/// regional reference (`NaN`) are never flagged. Low values are not
/// flagged.
pub fn classify_noise(profile: &NoiseProfile, regional_means: &[f64], upper_frac: f64) -> Vec<bool> {
    profile
        .per_beat
        .iter()
        .zip(regional_means)
        .map(|(&v, &m)| m.is_finite() && v > upper_frac * m)
        .collect()
}

/// Mean of up to [`REGIONAL_BEATS`] values on each side of every beat,
/// excluding the beat itself. `NaN` when there are no neighbours.
pub fn regional_noise_means(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(REGIONAL_BEATS);
            let b = (i + REGIONAL_BEATS + 1).min(n);
            let count = b - a - 1;
            if count == 0 {
                return f64::NAN;
            }
            let sum: f64 = values[a..b].iter().sum::<f64>() - values[i];
            sum / count as f64
        })
        .collect()
}

/// One directional sweep. The reference for each beat is the mean of the
/// last [`REGIONAL_BEATS`] unflagged beats behind it plus the next
/// [`REGIONAL_BEATS`] beats ahead of it, so a sustained noisy stretch keeps
/// being compared against the clean signal that preceded it.
fn sweep(values: &[f64], upper_frac: f64, order: &[usize]) -> Vec<bool> {
    let n = values.len();
    let mut flags = vec![false; n];
    let mut behind: VecDeque<f64> = VecDeque::with_capacity(REGIONAL_BEATS + 1);
    for (k, &i) in order.iter().enumerate() {
        let ahead = &order[k + 1..(k + 1 + REGIONAL_BEATS).min(n)];
        let count = behind.len() + ahead.len();
        if count > 0 {
            let sum = behind.iter().sum::<f64>() + ahead.iter().map(|&j| values[j]).sum::<f64>();
            flags[i] = values[i] > upper_frac * (sum / count as f64);
        }
        if !flags[i] {
            behind.push_back(values[i]);
            if behind.len() > REGIONAL_BEATS {
                behind.pop_front();
            }
        }
    }
    flags
}

/// Flags noisy beats. A beat is noisy when its profile exceeds
/// `upper_frac` times the regional mean in either a forward or a backward
/// sweep (the backward sweep catches noise at the very start of a record).
pub fn flag_noisy_beats(profile: &NoiseProfile, upper_frac: f64) -> Vec<bool> {
    let values = &profile.per_beat;
    let forward: Vec<usize> = (0..values.len()).collect();
    let backward: Vec<usize> = forward.iter().rev().copied().collect();
    let f = sweep(values, upper_frac, &forward);
    let b = sweep(values, upper_frac, &backward);
    f.iter().zip(&b).map(|(x, y)| *x || *y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::SourceFormat;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn beats_every(period: f64, n: usize, first: f64) -> Vec<BeatMark> {
        (0..n).map(|k| BeatMark::detected(first + period * k as f64)).collect()
    }

    #[test]
    fn constant_and_ramp_give_zero() {
        let beats = beats_every(0.8, 10, 0.5);
        let flat = EcgRecord::from_samples(vec![2.5; 3600], 360.0, SourceFormat::Txt);
        let p = compute_noise_profile(&flat, &beats, 200.0).unwrap();
        assert!(p.per_beat.iter().all(|&v| v == 0.0));
        // slope 1/256 per sample keeps every difference exact
        let ramp: Vec<f64> = (0..3600).map(|i| i as f64 / 256.0).collect();
        let ramp = EcgRecord::from_samples(ramp, 360.0, SourceFormat::Txt);
        let p = compute_noise_profile(&ramp, &beats, 200.0).unwrap();
        assert!(p.per_beat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iid_noise_matches_analytic_variance() {
        // Var[(x[i+1]-x[i]) fs] = 2 sigma^2 fs^2 for i.i.d. x
        let fs = 360.0;
        let sigma = 0.05;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..(fs as usize * 120)).map(|_| normal.sample(&mut rng)).collect();
        let rec = EcgRecord::from_samples(x, fs, SourceFormat::Txt);
        let beats = beats_every(0.8, 140, 1.0);
        let expected = 2.0 * sigma * sigma * fs * fs;
        for window in [200.0, 400.0] {
            let p = compute_noise_profile(&rec, &beats, window).unwrap();
            let mean = p.per_beat.iter().sum::<f64>() / p.per_beat.len() as f64;
            assert!((mean / expected - 1.0).abs() < 0.10, "window {window}: {mean} vs {expected}");
        }
    }

    #[test]
    fn edges_truncate_and_rri_only_errors() {
        let rec = EcgRecord::from_samples((0..100).map(|i| (i % 7) as f64).collect(), 100.0, SourceFormat::Txt);
        let beats = vec![BeatMark::detected(0.0), BeatMark::detected(0.99)];
        let p = compute_noise_profile(&rec, &beats, 200.0).unwrap();
        assert!(p.per_beat.iter().all(|v| *v > 0.0));
        let rri = EcgRecord::from_intervals(vec![0.8; 10]);
        assert!(matches!(compute_noise_profile(&rri, &beats, 200.0), Err(Error::NoSamples)));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let x: Vec<f64> = (0..36000).map(|i| ((i * 7919) % 113) as f64 * 0.01).collect();
        let rec = EcgRecord::from_samples(x, 360.0, SourceFormat::Txt);
        let beats = beats_every(0.8, 120, 0.3);
        let a = compute_noise_profile_with(&rec, &beats, 200.0, Execution::Sequential).unwrap();
        let b = compute_noise_profile_with(&rec, &beats, 200.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    fn profile(values: Vec<f64>) -> NoiseProfile {
        NoiseProfile {
            per_beat: values,
            window_ms: 200.0,
        }
    }

    #[test]
    fn uniform_profile_no_flags() {
        let p = profile(vec![3.0; 100]);
        assert!(classify_noise(&p, &regional_noise_means(&p.per_beat), 1.2).iter().all(|f| !f));
        assert!(flag_noisy_beats(&p, 1.2).iter().all(|f| !f));
    }

    #[test]
    fn doubled_value_flagged_against_brute_force_mean() {
        let mut v = vec![1.0; 60];
        v[30] = 2.0;
        // brute force: 20 neighbours each side, all 1.0
        let sum: f64 = (10..=50).filter(|&j| j != 30).map(|j| v[j]).sum();
        let mean = sum / 40.0;
        assert_eq!(mean, 1.0);
        let means = regional_noise_means(&v);
        assert_eq!(means[30], mean);
        let flags = classify_noise(&profile(v.clone()), &means, 1.2);
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[30]);
        assert!(flag_noisy_beats(&profile(v), 1.2)[30]);
    }

    #[test]
    fn exactly_at_threshold_not_flagged() {
        let mut v = vec![1.0; 60];
        v[30] = 1.2;
        let means = regional_noise_means(&v);
        assert!(!classify_noise(&profile(v), &means, 1.2)[30]);
    }

    #[test]
    fn sustained_noise_segment_is_flagged_throughout() {
        let mut v = vec![1.0; 300];
        for x in &mut v[100..200] {
            *x = 4.0;
        }
        let flags = flag_noisy_beats(&profile(v), 1.2);
        assert!(flags[100..200].iter().all(|f| *f));
        assert!(flags[..100].iter().chain(&flags[200..]).all(|f| !f));
        // a record that starts noisy is caught by the backward sweep
        let mut v = vec![1.0; 200];
        for x in &mut v[..50] {
            *x = 4.0;
        }
        let flags = flag_noisy_beats(&profile(v), 1.2);
        assert!(flags[..50].iter().all(|f| *f));
    }
}
