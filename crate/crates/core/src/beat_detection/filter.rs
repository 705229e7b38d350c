use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal_io::EcgRecord;

use super::DetectorParams;

const BAND_LOW_HZ: f64 = 5.0;
const BAND_HIGH_HZ: f64 = 15.0;
const INTEGRATION_S: f64 = 0.150;

/// Conditioned views of one record used by detection and post filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSignal {
    /// Amplified, optionally inverted, mean-removed samples.
    pub conditioned: Vec<f64>,
    /// Zero-phase 5-15 Hz band-pass of `conditioned`.
    pub bandpassed: Vec<f64>,
    /// Centred moving average of the squared derivative of `bandpassed`.
    pub energy: Vec<f64>,
    pub sample_rate: f64,
    /// Seconds added to sample times (non-zero for test sub-regions).
    pub start_offset: f64,
}

impl FilteredSignal {
    pub fn len(&self) -> usize {
        self.bandpassed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandpassed.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butterworth(cutoff: f64, fs: f64, highpass: bool) -> Self {
        let w0 = 2.0 * PI * cutoff.min(0.45 * fs) / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Forward-backward filtering with odd-extension padding at both ends.
fn filtfilt(stages: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let pad = pad.min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for k in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[k]);
    }
    ext.extend_from_slice(x);
    for k in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - k]);
    }
    for s in stages {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in stages {
        s.run(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Centred moving average with an odd window of `width` samples, truncated
/// at the edges.
pub(crate) fn centred_mean(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Amplifies, optionally inverts and band-passes the record.
pub fn preprocess(record: &EcgRecord, params: &DetectorParams) -> Result<FilteredSignal> {
    if record.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let fs = record.sample_rate;
    let gain = if params.invert {
        -params.amplifier
    } else {
        params.amplifier
    };
    let mut conditioned: Vec<f64> = record.samples.iter().map(|v| v * gain).collect();
    let mean = conditioned.iter().sum::<f64>() / conditioned.len() as f64;
    conditioned.iter_mut().for_each(|v| *v -= mean);

    let stages = [
        Biquad::butterworth(BAND_LOW_HZ, fs, true),
        Biquad::butterworth(BAND_HIGH_HZ, fs, false),
    ];
    let bandpassed = filtfilt(&stages, &conditioned, fs.round() as usize);

    let n = bandpassed.len();
    let slope_sq: Vec<f64> = (0..n)
        .map(|i| {
            let prev = bandpassed[i.saturating_sub(1)];
            let next = bandpassed[(i + 1).min(n - 1)];
            let d = (next - prev) * fs / 2.0;
            d * d
        })
        .collect();
    let width = ((INTEGRATION_S * fs).round() as usize) | 1;
    let energy = centred_mean(&slope_sq, width);

    Ok(FilteredSignal {
        conditioned,
        bandpassed,
        energy,
        sample_rate: fs,
        start_offset: record.start_offset,
    })
}
