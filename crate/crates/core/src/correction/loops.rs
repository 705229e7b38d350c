use serde::{Deserialize, Serialize};

use super::{best_removal, successive_ssd, CorrectionParams, MAX_REMOVAL_RUN};
use crate::beat_detection::{BeatClass, BeatMark, BeatType, PWave};
use crate::exec::Execution;
use crate::irregularity::{
    classify_beats, closest_sum_count, detect_pwave, outlier_flags, pair_sum_ok,
    split_eligibility, stats_from_durations, ActiveView, ClassifyOptions, IrregularityParams,
    RegionalStats, REGIONAL_INTERVALS,
};
use crate::signal_io::EcgRecord;

/// Per-loop bookkeeping of the correction stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    /// Excluded beats remaining after each loop.
    pub excluded_after_loop: Vec<usize>,
    pub bt1: usize,
    pub bt2: usize,
    pub bt3: usize,
    pub bt4: usize,
    pub bt5: usize,
    pub bt6: usize,
    pub bt7: usize,
    pub bt8: usize,
    pub rescued: usize,
}

fn is_candidate(b: &BeatMark) -> bool {
    b.class == BeatClass::Excluded && b.beat_type.is_none()
}

/// Runs the irregularity typing and correction passes `params.loops` times.
///
/// Expects identification to have marked irregular beats as excluded.
/// Later loops only reconsider beats that are still excluded; a beat that
/// was included is never excluded again.
pub fn run_correction_loops(
    beats: &mut Vec<BeatMark>,
    record: Option<&EcgRecord>,
    irregularity: &IrregularityParams,
    params: &CorrectionParams,
    exec: Execution,
) -> LoopReport {
    let mut report = LoopReport::default();
    let waveform = record.filter(|r| r.has_waveform());
    let pwave_enabled = params.analyze_pwaves && waveform.is_some();
    let options = ClassifyOptions {
        pwave_enabled,
        ..ClassifyOptions::default()
    };
    for _ in 0..params.loops {
        if let (true, Some(rec)) = (pwave_enabled, waveform) {
            evaluate_pwaves(beats, rec, params.pwave_sensitivity, exec);
        }
        let s = classify_beats(beats, irregularity, &options);
        report.bt1 += s.bt1;
        report.bt2 += s.bt2;
        report.bt3 += s.bt3;
        report.bt4 += s.bt4;
        report.bt5 += s.bt5;
        report.bt6 += removal_pass(beats, irregularity);
        report.bt7 += interpolation_pass(beats, irregularity);
        report.bt8 += adjustment_pass(beats, irregularity);
        report.rescued += rescue_pass(beats, irregularity);
        let excluded = beats
            .iter()
            .filter(|b| b.class == BeatClass::Excluded)
            .count();
        log::debug!("correction loop: {excluded} beats still excluded");
        report.excluded_after_loop.push(excluded);
    }
    report
}

fn evaluate_pwaves(beats: &mut [BeatMark], record: &EcgRecord, sensitivity: f64, exec: Execution) {
    let todo: Vec<usize> = beats
        .iter()
        .enumerate()
        .filter(|(_, b)| is_candidate(b) && b.pwave == PWave::Unevaluated)
        .map(|(i, _)| i)
        .collect();
    let queries: Vec<(f64, Option<f64>)> = todo
        .iter()
        .map(|&i| {
            let prev = beats[..i]
                .iter()
                .rev()
                .find(|b| b.class != BeatClass::Removed)
                .map(|b| b.time);
            (beats[i].time, prev)
        })
        .collect();
    let found = exec.map_slice(&queries, |&(t, prev)| {
        // a window that runs off the record counts as no P-wave
        detect_pwave(record, t, prev, sensitivity).unwrap_or(false)
    });
    for (i, yes) in todo.into_iter().zip(found) {
        beats[i].pwave = if yes { PWave::Yes } else { PWave::No };
    }
}

/// Runs of candidate positions inside the body.
fn candidate_runs(beats: &[BeatMark], view: &ActiveView) -> Vec<(usize, usize)> {
    let body = view.body(REGIONAL_INTERVALS);
    let mut runs = Vec::new();
    let mut p = body.start;
    while p < body.end {
        if is_candidate(&beats[view.beat_index[p]]) {
            let s = p;
            while p < body.end && is_candidate(&beats[view.beat_index[p]]) {
                p += 1;
            }
            runs.push((s, p - 1));
        } else {
            p += 1;
        }
    }
    runs
}

fn with_context(d: &[f64], a: usize, b: usize, middle: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(middle.len() + 2);
    if a > 0 {
        v.push(d[a - 1]);
    }
    v.extend_from_slice(middle);
    if let Some(&x) = d.get(b) {
        v.push(x);
    }
    v
}

fn acceptable(d: f64, stats: &RegionalStats, params: &IrregularityParams) -> bool {
    stats.in_band(d) && params.in_acceptance_window(d)
}

/// BT6: drops extra beats from runs that start with intervals which only
/// add up to a regular interval together.
fn removal_pass(beats: &mut [BeatMark], params: &IrregularityParams) -> usize {
    let view = ActiveView::new(beats);
    let d = &view.durations;
    let mut removed = 0;
    for (s, e) in candidate_runs(beats, &view) {
        let (l, r) = (s - 1, e + 1);
        if r - l > MAX_REMOVAL_RUN {
            continue;
        }
        let Ok(stats) = stats_from_durations(d, None, s, l..r, params) else {
            continue;
        };
        let sums: Vec<f64> = d[l..]
            .iter()
            .take(4)
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        if closest_sum_count(&sums, stats.rri_mean).unwrap_or(1) < 2 {
            continue;
        }
        let times: Vec<f64> = (l..=r).map(|q| beats[view.beat_index[q]].time).collect();
        let keep = best_removal(&times, stats.rri_mean);
        if keep.iter().all(|k| *k) {
            continue;
        }
        let kept: Vec<f64> = times
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| *t)
            .collect();
        let new: Vec<f64> = kept.windows(2).map(|w| w[1] - w[0]).collect();
        if !new.iter().all(|&x| acceptable(x, &stats, params)) {
            continue;
        }
        let before = with_context(d, l, r, &d[l..r]);
        let after = with_context(d, l, r, &new);
        if successive_ssd(&after) > successive_ssd(&before) {
            continue;
        }
        for (q, k) in (l..=r).zip(&keep) {
            let b = &mut beats[view.beat_index[q]];
            if !k {
                b.class = BeatClass::Removed;
                b.beat_type = Some(BeatType::Bt6);
                removed += 1;
            } else if is_candidate(b) {
                b.class = BeatClass::Included;
            }
        }
    }
    removed
}

/// BT7: splits long intervals ending at a candidate beat into equal parts.
fn interpolation_pass(beats: &mut Vec<BeatMark>, params: &IrregularityParams) -> usize {
    let view = ActiveView::new(beats);
    let d = &view.durations;
    let body = view.body(REGIONAL_INTERVALS);
    let mut inserted = 0;
    for p in body.rev() {
        let b = view.beat_index[p];
        if !is_candidate(&beats[b]) {
            continue;
        }
        let Ok(stats) = stats_from_durations(d, None, p, p - 1..p, params) else {
            continue;
        };
        let long = d[p - 1];
        if long <= stats.upper_frac * stats.rri_mean {
            continue;
        }
        let Some(n) = split_eligibility(long, &stats) else {
            continue;
        };
        let parts = vec![long / n as f64; n];
        let before = with_context(d, p - 1, p, &[long]);
        let after = with_context(d, p - 1, p, &parts);
        if successive_ssd(&after) > successive_ssd(&before) {
            continue;
        }
        let left = beats[view.beat_index[p - 1]].time;
        let step = (beats[b].time - left) / n as f64;
        let new: Vec<BeatMark> = (1..n)
            .map(|k| BeatMark::interpolated(left + k as f64 * step))
            .collect();
        beats[b].class = BeatClass::Included;
        beats.splice(b..b, new);
        inserted += n - 1;
    }
    inserted
}

/// BT8: re-centres a candidate beat between a short and a long interval
/// when the pair adds up to two regular intervals.
fn adjustment_pass(beats: &mut [BeatMark], params: &IrregularityParams) -> usize {
    let mut view = ActiveView::new(beats);
    let body = view.body(REGIONAL_INTERVALS);
    let m = view.len();
    let mut adjusted = 0;
    for p in body {
        let b = view.beat_index[p];
        // short-long smoothing is for premature beats without a P-wave
        if !is_candidate(&beats[b]) || p + 1 >= m || beats[b].pwave == PWave::Yes {
            continue;
        }
        let d = &view.durations;
        let (short, long) = (d[p - 1], d[p]);
        if short >= long {
            continue;
        }
        let Ok(stats) = stats_from_durations(d, None, p, p - 1..p + 1, params) else {
            continue;
        };
        let irregular = !stats.in_band(short) || !stats.in_band(long);
        if !irregular || !pair_sum_ok(short, long, &stats) {
            continue;
        }
        let t0 = beats[view.beat_index[p - 1]].time;
        let t1 = beats[view.beat_index[p + 1]].time;
        let mid = t0 + 0.5 * (t1 - t0);
        let (n0, n1) = (mid - t0, t1 - mid);
        if !acceptable(n0, &stats, params) {
            continue;
        }
        let before = with_context(d, p - 1, p + 1, &[short, long]);
        let after = with_context(d, p - 1, p + 1, &[n0, n1]);
        if successive_ssd(&after) > successive_ssd(&before) {
            continue;
        }
        beats[b].time = mid;
        beats[b].class = BeatClass::Adjusted;
        beats[b].beat_type = Some(BeatType::Bt8);
        let nb = view.beat_index[p + 1];
        if is_candidate(&beats[nb]) {
            beats[nb].class = BeatClass::Included;
        }
        view.durations[p - 1] = n0;
        view.durations[p] = n1;
        adjusted += 1;
    }
    adjusted
}

/// Re-runs outlier detection and includes untyped, quiet excluded beats
/// whose surrounding intervals are now regular.
fn rescue_pass(beats: &mut [BeatMark], params: &IrregularityParams) -> usize {
    let view = ActiveView::new(beats);
    let d = &view.durations;
    let flags = outlier_flags(d, params);
    let ok = |k: usize| !flags[k] && d[k] <= params.hard_upper_bound;
    let mut rescued = 0;
    for p in view.body(REGIONAL_INTERVALS) {
        let b = &mut beats[view.beat_index[p]];
        if !is_candidate(b) || b.noisy {
            continue;
        }
        if ok(p - 1) && (p >= d.len() || ok(p)) {
            b.class = BeatClass::Included;
            rescued += 1;
        }
    }
    rescued
}
