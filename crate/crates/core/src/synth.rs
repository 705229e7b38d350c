//! Synthetic single-lead ECG with known beat times, for tests, benchmarks
//! and data-free checks of the pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::signal_io::{EcgRecord, ReferenceAnnotation, ReferenceAnnotations, SourceFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthBeatKind {
    Normal,
    /// Premature ventricular beat: early, wide, no P-wave, full
    /// compensatory pause.
    Pvc,
    /// Premature atrial beat: early, with P-wave, no compensatory pause.
    Pac,
}

impl SynthBeatKind {
    pub fn symbol(self) -> &'static str {
        match self {
            SynthBeatKind::Normal => "N",
            SynthBeatKind::Pvc => "V",
            SynthBeatKind::Pac => "A",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthBeat {
    /// R apex, seconds from record start.
    pub time: f64,
    pub kind: SynthBeatKind,
}

/// A span of heavy additive noise (muscle/electrode-motion like).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBurst {
    pub start: f64,
    pub end: f64,
    /// Standard deviation of the added noise, mV.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sample_rate: f64,
    pub duration: f64,
    pub mean_rr: f64,
    /// Standard deviation of beat-to-beat RR jitter, seconds.
    pub rr_jitter: f64,
    /// Relative amplitude of slow (0.1 Hz) RR modulation.
    pub rr_modulation: f64,
    pub r_amplitude: f64,
    pub p_amplitude: f64,
    pub t_amplitude: f64,
    /// White measurement noise, mV.
    pub noise_sd: f64,
    /// Amplitude of 0.3 Hz baseline wander, mV.
    pub baseline_wander: f64,
    pub pvc_probability: f64,
    pub pac_probability: f64,
    pub bursts: Vec<NoiseBurst>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate: 360.0,
            duration: 300.0,
            mean_rr: 0.8,
            rr_jitter: 0.01,
            rr_modulation: 0.03,
            r_amplitude: 1.0,
            p_amplitude: 0.12,
            t_amplitude: 0.25,
            noise_sd: 0.01,
            baseline_wander: 0.05,
            pvc_probability: 0.0,
            pac_probability: 0.0,
            bursts: Vec::new(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthEcg {
    pub record: EcgRecord,
    pub beats: Vec<SynthBeat>,
}

impl SynthEcg {
    pub fn beat_times(&self) -> Vec<f64> {
        self.beats.iter().map(|b| b.time).collect()
    }

    pub fn annotations(&self) -> ReferenceAnnotations {
        ReferenceAnnotations {
            entries: self
                .beats
                .iter()
                .map(|b| ReferenceAnnotation::new(b.time, b.kind.symbol()))
                .collect(),
        }
    }

    /// Whether each beat lies inside a noise burst.
    pub fn in_burst(&self, bursts: &[NoiseBurst]) -> Vec<bool> {
        self.beats
            .iter()
            .map(|b| bursts.iter().any(|n| b.time >= n.start && b.time < n.end))
            .collect()
    }
}

/// (offset from R, width, relative amplitude) of the Gaussian components.
fn components(kind: SynthBeatKind, cfg: &SynthConfig) -> Vec<(f64, f64, f64)> {
    let r = cfg.r_amplitude;
    match kind {
        SynthBeatKind::Normal | SynthBeatKind::Pac => vec![
            (-0.16, 0.025, cfg.p_amplitude),
            (-0.025, 0.008, -0.12 * r),
            (0.0, 0.010, r),
            (0.025, 0.008, -0.18 * r),
            (0.26, 0.045, cfg.t_amplitude),
        ],
        SynthBeatKind::Pvc => vec![
            (0.0, 0.028, 1.1 * r),
            (0.06, 0.03, -0.35 * r),
            (0.30, 0.06, -1.2 * cfg.t_amplitude),
        ],
    }
}

pub fn generate(cfg: &SynthConfig) -> SynthEcg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, cfg.rr_jitter.max(0.0)).expect("finite jitter");

    let limit = cfg.duration - 0.6;
    let mut t = 0.5 + 0.3 * rng.random::<f64>();
    let mut beats = vec![SynthBeat {
        time: t,
        kind: SynthBeatKind::Normal,
    }];
    loop {
        let base = cfg.mean_rr
            * (1.0 + cfg.rr_modulation * (std::f64::consts::TAU * 0.1 * t).sin());
        let rr = base + jitter.sample(&mut rng);
        let u = rng.random::<f64>();
        let (ectopic, next) = if u < cfg.pvc_probability {
            // full compensatory pause: the next sinus beat stays on schedule
            (Some((t + 0.62 * rr, SynthBeatKind::Pvc)), t + 2.0 * rr)
        } else if u < cfg.pvc_probability + cfg.pac_probability {
            // the atrial beat resets the sinus node
            (Some((t + 0.7 * rr, SynthBeatKind::Pac)), t + 1.7 * rr)
        } else {
            (None, t + rr)
        };
        if next >= limit {
            break;
        }
        if let Some((time, kind)) = ectopic {
            beats.push(SynthBeat { time, kind });
        }
        beats.push(SynthBeat {
            time: next,
            kind: SynthBeatKind::Normal,
        });
        t = next;
    }

    let fs = cfg.sample_rate;
    let n = (cfg.duration * fs).round() as usize;
    let mut x = vec![0.0; n];
    for b in &beats {
        for (off, width, amp) in components(b.kind, cfg) {
            let centre = b.time + off;
            let a = (((centre - 5.0 * width) * fs).floor().max(0.0)) as usize;
            let e = (((centre + 5.0 * width) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(e).skip(a) {
                let z = (i as f64 / fs - centre) / width;
                *v += amp * (-0.5 * z * z).exp();
            }
        }
    }
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += cfg.baseline_wander * (std::f64::consts::TAU * 0.3 * t + phase).sin();
        *v += cfg.noise_sd * white.sample(&mut rng);
    }
    for burst in &cfg.bursts {
        let a = ((burst.start * fs).round().max(0.0) as usize).min(n);
        let e = ((burst.end * fs).round().max(0.0) as usize).min(n);
        // band-limit white noise with a short moving average so it looks
        // like muscle artefact rather than quantisation noise
        let width = 5usize;
        let raw: Vec<f64> = (a..e + width).map(|_| white.sample(&mut rng)).collect();
        let scale = burst.sd * (width as f64).sqrt();
        for (k, v) in x[a..e].iter_mut().enumerate() {
            let m = raw[k..k + width].iter().sum::<f64>() / width as f64;
            *v += scale * m;
        }
    }

    SynthEcg {
        record: EcgRecord::from_samples(x, fs, SourceFormat::Txt),
        beats,
    }
}
