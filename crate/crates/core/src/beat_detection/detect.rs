use super::{BeatClass, BeatMark, DetectorParams, FilteredSignal};

/// Minimum spacing between detected beats, seconds.
pub const REFRACTORY_S: f64 = 0.200;
/// Half-width of the window used to refine a beat onto the raw extremum.
const REFINE_S: f64 = 0.050;
/// Beats closer than this to the previous one must be at least half as
/// energetic to be accepted (T-wave rejection).
const T_WAVE_S: f64 = 0.360;
const SEARCHBACK_FACTOR: f64 = 1.66;
const POST_MEDIAN_HALF: usize = 7;

#[derive(Debug, Clone, Copy)]
struct Peak {
    idx: usize,
    value: f64,
}

fn local_maxima(e: &[f64]) -> Vec<Peak> {
    let n = e.len();
    let mut out = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::NEG_INFINITY } else { e[i - 1] };
        let right = if i + 1 == n { f64::NEG_INFINITY } else { e[i + 1] };
        if e[i] > left && e[i] >= right && e[i] > 0.0 {
            out.push(Peak { idx: i, value: e[i] });
        }
    }
    out
}

/// Index of the largest |x - baseline| within `[centre - half, centre + half]`.
///
/// The baseline is the median over four times the search width, so a wide
/// complex does not drag it towards its own extremum.
fn refine(x: &[f64], centre: usize, half: usize) -> usize {
    let a = centre.saturating_sub(half);
    let b = (centre + half + 1).min(x.len());
    let ctx_a = centre.saturating_sub(4 * half);
    let ctx_b = (centre + 4 * half + 1).min(x.len());
    let mut ctx = x[ctx_a..ctx_b].to_vec();
    let mid = ctx.len() / 2;
    let (_, baseline, _) = ctx.select_nth_unstable_by(mid, f64::total_cmp);
    let baseline = *baseline;
    let mut best = centre;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in x[a..b].iter().enumerate() {
        let d = (v - baseline).abs();
        if d > best_v {
            best_v = d;
            best = a + i;
        }
    }
    best
}

/// Adaptive-threshold QRS detector over the energy envelope.
///
/// Signal and noise peak levels are tracked as exponential averages; a
/// candidate peak is a QRS when it exceeds
/// `noise + qrs_threshold * (signal - noise)`. A searchback pass recovers
/// peaks above half the threshold when no beat has been seen for 1.66 mean
/// RR intervals.
pub fn detect_qrs(filtered: &FilteredSignal, params: &DetectorParams) -> Vec<BeatMark> {
    let e = &filtered.energy;
    let fs = filtered.sample_rate;
    if e.len() < 3 {
        return Vec::new();
    }
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let t_wave = (T_WAVE_S * fs).round() as usize;

    let init = e.len().min((2.0 * fs) as usize).max(1);
    let init_max = e[..init].iter().cloned().fold(0.0, f64::max);
    if init_max <= 0.0 && e.iter().all(|v| *v <= 0.0) {
        return Vec::new();
    }
    let mut spk = 0.25 * init_max.max(e.iter().cloned().fold(0.0, f64::max) * 1e-3);
    let mut npk = 0.5 * e[..init].iter().sum::<f64>() / init as f64;

    let mut accepted: Vec<Peak> = Vec::new();
    let mut rejected: Vec<Peak> = Vec::new();

    for peak in local_maxima(e) {
        let threshold = npk + params.qrs_threshold * (spk - npk);

        if let Some(last) = accepted.last().copied() {
            if peak.idx - last.idx < refractory {
                if peak.value > last.value {
                    *accepted.last_mut().unwrap() = peak;
                }
                continue;
            }
            // Searchback for a missed beat.
            if accepted.len() >= 2 {
                let k = accepted.len().min(9);
                let span = accepted[accepted.len() - 1].idx - accepted[accepted.len() - k].idx;
                let rr_avg = span as f64 / (k - 1) as f64;
                if (peak.idx - last.idx) as f64 > SEARCHBACK_FACTOR * rr_avg {
                    let lo = last.idx + refractory;
                    let hi = peak.idx.saturating_sub(refractory);
                    let best = rejected
                        .iter()
                        .filter(|p| p.idx >= lo && p.idx <= hi && p.value > threshold / 2.0)
                        .max_by(|a, b| a.value.total_cmp(&b.value))
                        .copied();
                    if let Some(b) = best {
                        accepted.push(b);
                        spk = 0.25 * b.value + 0.75 * spk;
                    }
                }
            }
        }

        let last = accepted.last().copied();
        let is_t_wave = last
            .map(|l| peak.idx - l.idx < t_wave && peak.value < 0.5 * l.value)
            .unwrap_or(false);
        if peak.value > threshold && !is_t_wave {
            accepted.push(peak);
            spk = 0.125 * peak.value + 0.875 * spk;
        } else {
            npk = 0.125 * peak.value + 0.875 * npk;
            rejected.push(peak);
        }
    }

    // Refine onto the conditioned-signal extremum, then re-impose the
    // refractory period keeping the more energetic beat.
    let half = (REFINE_S * fs).round() as usize;
    let mut refined: Vec<Peak> = Vec::with_capacity(accepted.len());
    for p in accepted {
        let idx = refine(&filtered.conditioned, p.idx, half);
        match refined.last_mut() {
            Some(last) if idx <= last.idx || idx - last.idx < refractory => {
                if p.value > last.value {
                    *last = Peak { idx, value: p.value };
                }
            }
            _ => refined.push(Peak { idx, value: p.value }),
        }
    }
    refined
        .into_iter()
        .map(|p| BeatMark::detected(filtered.start_offset + p.idx as f64 / fs))
        .collect()
}

fn sample_index(filtered: &FilteredSignal, time: f64) -> usize {
    (((time - filtered.start_offset) * filtered.sample_rate).round().max(0.0) as usize)
        .min(filtered.len().saturating_sub(1))
}

/// Peak energy within the refinement window around each beat.
pub(crate) fn beat_scores(beats: &[BeatMark], filtered: &FilteredSignal) -> Vec<f64> {
    let half = (REFINE_S * filtered.sample_rate).round() as usize;
    beats
        .iter()
        .map(|b| {
            let i = sample_index(filtered, b.time);
            let a = i.saturating_sub(half);
            let z = (i + half + 1).min(filtered.len());
            filtered.energy[a..z].iter().cloned().fold(0.0, f64::max)
        })
        .collect()
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Demotes beats whose energy score is below `post_threshold` times the
/// running median (15 beats, centred) to [`BeatClass::Excluded`].
pub fn post_filter(
    beats: &[BeatMark],
    filtered: &FilteredSignal,
    params: &DetectorParams,
) -> Vec<BeatMark> {
    let mut out = beats.to_vec();
    if params.post_threshold <= 0.0 || beats.is_empty() || filtered.is_empty() {
        return out;
    }
    let scores = beat_scores(beats, filtered);
    for (i, beat) in out.iter_mut().enumerate() {
        let a = i.saturating_sub(POST_MEDIAN_HALF);
        let b = (i + POST_MEDIAN_HALF + 1).min(scores.len());
        let mut window = scores[a..b].to_vec();
        let m = median(&mut window);
        // Relative slack so numerically identical beats compare equal.
        if scores[i] < params.post_threshold * m * (1.0 - 1e-9) && beat.class == BeatClass::Included {
            beat.class = BeatClass::Excluded;
        }
    }
    out
}
