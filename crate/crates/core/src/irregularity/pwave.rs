//! P-wave presence test in the window preceding a QRS complex.

use crate::beat_detection::filter::centred_mean;
use crate::error::{Error, Result};
use crate::signal_io::EcgRecord;

/// Search window relative to the R peak, seconds: `[t - 0.25, t - 0.08]`.
pub const PWAVE_WINDOW_S: (f64, f64) = (0.25, 0.08);

/// The search window never starts earlier than this long after the
/// previous R peak, so the previous T-wave is not taken for a P-wave.
pub const T_WAVE_CLEARANCE_S: f64 = 0.36;
/// Narrower windows leave no room for a P-wave; the beat counts as having
/// none.
const MIN_WINDOW_S: f64 = 0.06;
const SMOOTH_S: f64 = 0.02;
const EDGE_S: f64 = 0.01;
/// Noise floor as a fraction of the R amplitude, so that clean synthetic
/// traces do not turn every ripple into a P-wave.
const R_FLOOR_FRAC: f64 = 0.005;

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean_i = (n - 1.0) / 2.0;
    let mean_x = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let di = i as f64 - mean_i;
        sxy += di * (v - mean_x);
        sxx += di * di;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, v)| v - mean_x - slope * (i as f64 - mean_i))
        .collect()
}

/// Reports whether a P-wave precedes the beat at `beat_time` (absolute
/// seconds). A wave is present when the smoothed, detrended window holds an
/// interior extremum whose prominence over the window median exceeds
/// `sensitivity` times the window noise level. Lower sensitivity values
/// accept smaller waves. `previous_beat` (absolute seconds) trims the window
/// start past the previous T-wave.
pub fn detect_pwave(
    record: &EcgRecord,
    beat_time: f64,
    previous_beat: Option<f64>,
    sensitivity: f64,
) -> Result<bool> {
    if !record.has_waveform() {
        return Err(Error::NoSamples);
    }
    let fs = record.sample_rate;
    let rel = beat_time - record.start_offset;
    let lo = rel - PWAVE_WINDOW_S.0;
    let hi = rel - PWAVE_WINDOW_S.1;
    let r_idx = (rel * fs).round();
    if lo < 0.0 || r_idx >= record.samples.len() as f64 {
        return Err(Error::WindowOutOfRange(beat_time));
    }
    let lo = match previous_beat {
        Some(p) => lo.max(p - record.start_offset + T_WAVE_CLEARANCE_S),
        None => lo,
    };
    if hi - lo < MIN_WINDOW_S {
        return Ok(false);
    }
    let i0 = (lo * fs).ceil() as usize;
    let i1 = ((hi * fs).floor() as usize).min(record.samples.len() - 1);
    if i1 < i0 + 4 {
        return Err(Error::WindowOutOfRange(beat_time));
    }
    let raw = &record.samples[i0..=i1];

    let mut diffs: Vec<f64> = raw.windows(2).map(|w| w[1] - w[0]).collect();
    let med_diff = median(&mut diffs.clone());
    for d in diffs.iter_mut() {
        *d = (*d - med_diff).abs();
    }
    let sigma = median(&mut diffs) / 0.6745 / std::f64::consts::SQRT_2;

    let mut sorted = raw.to_vec();
    let baseline = median(&mut sorted);
    let r_amp = (record.samples[r_idx as usize] - baseline).abs();
    let sigma = sigma.max(R_FLOOR_FRAC * r_amp);

    let width = ((SMOOTH_S * fs).round() as usize).max(1) | 1;
    let smooth = detrend(&centred_mean(raw, width));
    let centre = median(&mut smooth.clone());

    let edge = ((EDGE_S * fs).round() as usize).max(1);
    if smooth.len() <= 2 * edge {
        return Ok(false);
    }
    let prominence = (edge..smooth.len() - edge)
        .filter(|&j| {
            let (a, b, c) = (smooth[j - 1], smooth[j], smooth[j + 1]);
            (b >= a && b >= c) || (b <= a && b <= c)
        })
        .map(|j| (smooth[j] - centre).abs())
        .fold(0.0, f64::max);
    Ok(prominence > 0.0 && prominence > sensitivity * sigma)
}
