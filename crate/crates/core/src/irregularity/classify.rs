//! Beat typing of irregular beats (BT1 to BT5).

use super::{pair_sum_ok, stats_from_durations, ActiveView, IrregularityParams};
use crate::beat_detection::{BeatClass, BeatMark, BeatType, PWave};
use crate::correction::successive_ssd;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// When false, BT1 applies without its P-wave precondition and the
    /// P-wave dependent rules are skipped.
    pub pwave_enabled: bool,
    /// Beats at each end of the series left untouched.
    pub edge: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            pwave_enabled: true,
            edge: super::REGIONAL_INTERVALS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifySummary {
    pub bt1: usize,
    pub bt2: usize,
    pub bt3: usize,
    pub bt4: usize,
    pub bt5: usize,
}

fn is_candidate(b: &BeatMark) -> bool {
    b.class == BeatClass::Excluded && b.beat_type.is_none()
}

fn is_out(b: &BeatMark) -> bool {
    b.class == BeatClass::Excluded
}

fn gradual(prev: f64, d: f64, params: &IrregularityParams) -> Option<BeatType> {
    if !(prev > 0.0) {
        return None;
    }
    let change = (d - prev) / prev;
    if change >= 0.0 && change <= params.grad_inc_frac {
        Some(BeatType::Bt3)
    } else if change < 0.0 && -change <= params.grad_dec_frac {
        Some(BeatType::Bt5)
    } else {
        None
    }
}

/// Whether re-centring beat `p` lowers or keeps the successive squared
/// differences of intervals `p - 2 ..= p + 1`.
fn smooths(d: &[f64], p: usize) -> bool {
    let (a, b) = (d[p - 1], d[p]);
    let m = 0.5 * (a + b);
    let mut before = vec![d[p - 2], a, b];
    let mut after = vec![d[p - 2], m, m];
    if let Some(&x) = d.get(p + 1) {
        before.push(x);
        after.push(x);
    }
    successive_ssd(&after) <= successive_ssd(&before)
}

/// Assigns BT1 to BT5 to excluded, untyped beats. Expects `pwave` and
/// `noisy` to be filled in for those beats. Noisy beats keep their
/// exclusion and are left to the correction stage.
pub fn classify_beats(
    beats: &mut [BeatMark],
    params: &IrregularityParams,
    options: &ClassifyOptions,
) -> ClassifySummary {
    let mut view = ActiveView::new(beats);
    let mut summary = ClassifySummary::default();
    let m = view.len();
    let body = view.body(options.edge);
    let idx = view.beat_index.clone();

    // gradual multi-beat runs first, so their leading beat is not taken
    // for a premature pair
    if options.pwave_enabled {
        include_gradual_runs(beats, &view, body.clone(), params, &mut summary);
    }

    for p in body.clone() {
        let b = idx[p];
        if !is_candidate(&beats[b]) || beats[b].noisy {
            continue;
        }
        let pwave = beats[b].pwave;
        let d = &view.durations;
        let d_a = d[p - 1];
        let d_prev = (p >= 2).then(|| d[p - 2]);
        let d_next = (p + 1 < m).then(|| d[p]);
        let out = |q: usize, beats: &[BeatMark]| q < m && is_out(&beats[idx[q]]);
        let prev_valid = !out(p - 1, beats);
        let next_valid = p + 1 < m && !out(p + 1, beats);

        // BT1: premature beat without a P-wave followed by a compensatory pause
        let no_p = !options.pwave_enabled || pwave != PWave::Yes;
        if no_p {
            if let (Some(prev), Some(next)) = (d_prev, d_next) {
                let after_pair_valid = next_valid || (p + 2 < m && !out(p + 2, beats));
                let stats = stats_from_durations(d, None, p, p - 1..p + 1, params).ok();
                if d_a < prev
                    && next > d_a
                    && prev_valid
                    && after_pair_valid
                    && stats.is_some_and(|s| pair_sum_ok(d_a, next, &s))
                    && smooths(d, p)
                {
                    let t0 = beats[idx[p - 1]].time;
                    let t1 = beats[idx[p + 1]].time;
                    let mid = t0 + 0.5 * (t1 - t0);
                    beats[b].time = mid;
                    beats[b].class = BeatClass::Adjusted;
                    beats[b].beat_type = Some(BeatType::Bt1);
                    if is_candidate(&beats[idx[p + 1]]) {
                        beats[idx[p + 1]].class = BeatClass::Included;
                    }
                    view.durations[p - 1] = mid - t0;
                    view.durations[p] = t1 - mid;
                    summary.bt1 += 1;
                    continue;
                }
            }
        }
        if !options.pwave_enabled || pwave != PWave::Yes {
            continue;
        }
        // BT2: consecutive irregular beats with a P-wave
        if out(p + 1, beats) {
            beats[b].beat_type = Some(BeatType::Bt2);
            let nb = idx[p + 1];
            if body.contains(&(p + 1)) && is_candidate(&beats[nb]) {
                beats[nb].beat_type = Some(BeatType::Bt2);
                summary.bt2 += 1;
            }
            summary.bt2 += 1;
            continue;
        }
        // BT4 before BT3 so that an isolated jump past the hard bound is
        // never rescued as gradual
        if d_a > params.hard_upper_bound {
            beats[b].beat_type = Some(BeatType::Bt4);
            summary.bt4 += 1;
            continue;
        }
        if !(prev_valid && next_valid) {
            continue;
        }
        if let Some(ty) = d_prev.and_then(|prev| gradual(prev, d_a, params)) {
            beats[b].class = BeatClass::Included;
            beats[b].beat_type = Some(ty);
            match ty {
                BeatType::Bt3 => summary.bt3 += 1,
                _ => summary.bt5 += 1,
            }
        }
    }

    summary
}

/// Multi-beat runs of untyped exclusions whose every step, including the
/// step out of the run, is a gradual change with P-waves present.
fn include_gradual_runs(
    beats: &mut [BeatMark],
    view: &ActiveView,
    body: std::ops::Range<usize>,
    params: &IrregularityParams,
    summary: &mut ClassifySummary,
) {
    let idx = &view.beat_index;
    let d = &view.durations;
    let mut p = body.start;
    while p < body.end {
        if !is_candidate(&beats[idx[p]]) {
            p += 1;
            continue;
        }
        let s = p;
        while p < body.end && is_candidate(&beats[idx[p]]) {
            p += 1;
        }
        let e = p - 1;
        if e == s || s < 2 || e + 1 >= view.len() {
            continue;
        }
        let clean = (s..=e).all(|q| {
            let b = &beats[idx[q]];
            b.pwave == PWave::Yes && !b.noisy
        });
        let steps: Option<Vec<BeatType>> = (s - 1..=e)
            .map(|k| {
                let dk = d[k];
                if !params.in_acceptance_window(dk) || dk > params.hard_upper_bound {
                    return None;
                }
                gradual(d[k - 1], dk, params)
            })
            .collect();
        if let (true, Some(steps)) = (clean, steps) {
            for (q, ty) in (s..=e).zip(steps) {
                let b = &mut beats[idx[q]];
                b.class = BeatClass::Included;
                b.beat_type = Some(ty);
                match ty {
                    BeatType::Bt3 => summary.bt3 += 1,
                    _ => summary.bt5 += 1,
                }
            }
        }
    }
}
