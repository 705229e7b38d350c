//! Scoring against reference annotations: one-to-one beat matching,
//! class-conditional proportions and noise-classification accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beat_detection::{BeatClass, BeatMark};
use crate::signal_io::{AnnotationLabel, ReferenceAnnotations};

/// Default matching tolerance, seconds.
pub const MATCH_TOLERANCE_S: f64 = 0.150;

/// Pairs of (detected index, reference index), plus the leftovers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_detected: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
}

/// Greedy one-to-one matching: candidate pairs within `tolerance` seconds
/// are taken in order of increasing distance. Inputs need not be sorted.
pub fn match_beats(detected: &[f64], reference: &[f64], tolerance: f64) -> Matching {
    let mut ref_order: Vec<usize> = (0..reference.len()).collect();
    ref_order.sort_by(|&a, &b| reference[a].total_cmp(&reference[b]));
    let sorted_ref: Vec<f64> = ref_order.iter().map(|&i| reference[i]).collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &t) in detected.iter().enumerate() {
        let lo = sorted_ref.partition_point(|&r| r < t - tolerance);
        for (k, &r) in sorted_ref.iter().enumerate().skip(lo) {
            if r > t + tolerance {
                break;
            }
            candidates.push(((t - r).abs(), i, ref_order[k]));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; detected.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !det_used[i] && !ref_used[j] {
            det_used[i] = true;
            ref_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    Matching {
        pairs,
        unmatched_detected: (0..detected.len()).filter(|&i| !det_used[i]).collect(),
        unmatched_reference: (0..reference.len()).filter(|&j| !ref_used[j]).collect(),
    }
}

/// How reference beats of one label fared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub total: usize,
    /// Matched to a beat that ends up in the output series.
    pub valid: usize,
    /// Matched to a beat that was excluded (or reserved for training).
    pub irregular: usize,
    pub not_present: usize,
}

/// Metrics for one pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub reference_beats: usize,
    pub detected_beats: usize,
    pub matched: usize,
    /// matched / reference.
    pub accuracy: f64,
    /// detected / reference: a count ratio, not classical precision.
    pub precision: f64,
    /// Classical positive predictive value: matched / detected.
    pub ppv: f64,
    pub proportion_normal: f64,
    pub pvc_found_prop: f64,
    pub pac_found_prop: f64,
    pub pvc_included_prop: f64,
    pub pac_excluded_prop: f64,
    pub valid_prop: f64,
    pub irregular_prop: f64,
    pub not_present_prop: f64,
    /// Detections with no reference beat nearby.
    pub not_identified: usize,
    pub by_label: BTreeMap<AnnotationLabel, LabelTally>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub post_identification: StageMetrics,
    pub post_correction: StageMetrics,
    pub epochs_pre: usize,
    pub epochs_post: usize,
    #[serde(default)]
    pub noise_accuracy_by_record: BTreeMap<String, f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn is_pvc(l: AnnotationLabel) -> bool {
    l == AnnotationLabel::PrematureVentricular
}

fn is_pac(l: AnnotationLabel) -> bool {
    l == AnnotationLabel::AtrialPremature
}

/// Scores the non-removed beats of `beats` against the reference beat
/// annotations.
pub fn compute_metrics(
    beats: &[BeatMark],
    reference: &ReferenceAnnotations,
    tolerance: f64,
) -> StageMetrics {
    let detected: Vec<&BeatMark> = beats
        .iter()
        .filter(|b| b.class != BeatClass::Removed)
        .collect();
    let det_times: Vec<f64> = detected.iter().map(|b| b.time).collect();
    let ref_beats = reference.beats();
    let ref_times: Vec<f64> = ref_beats.iter().map(|a| a.time).collect();
    let matching = match_beats(&det_times, &ref_times, tolerance);

    let mut partner: Vec<Option<usize>> = vec![None; ref_beats.len()];
    for &(i, j) in &matching.pairs {
        partner[j] = Some(i);
    }
    let mut by_label: BTreeMap<AnnotationLabel, LabelTally> = BTreeMap::new();
    for (j, a) in ref_beats.iter().enumerate() {
        let t = by_label.entry(a.label).or_default();
        t.total += 1;
        match partner[j] {
            Some(i) if detected[i].class.is_valid() => t.valid += 1,
            Some(_) => t.irregular += 1,
            None => t.not_present += 1,
        }
    }
    let sum = |pred: &dyn Fn(AnnotationLabel) -> bool| -> LabelTally {
        by_label
            .iter()
            .filter(|(l, _)| pred(**l))
            .fold(LabelTally::default(), |acc, (_, t)| LabelTally {
                total: acc.total + t.total,
                valid: acc.valid + t.valid,
                irregular: acc.irregular + t.irregular,
                not_present: acc.not_present + t.not_present,
            })
    };
    let all = sum(&|_| true);
    let normal = sum(&|l| l == AnnotationLabel::Normal);
    let pvc = sum(&is_pvc);
    let pac = sum(&is_pac);

    let n_ref = ref_beats.len();
    StageMetrics {
        reference_beats: n_ref,
        detected_beats: detected.len(),
        matched: matching.pairs.len(),
        accuracy: ratio(matching.pairs.len(), n_ref),
        precision: ratio(detected.len(), n_ref),
        ppv: ratio(matching.pairs.len(), detected.len()),
        proportion_normal: ratio(normal.valid, normal.total),
        pvc_found_prop: ratio(pvc.valid + pvc.irregular, pvc.total),
        pac_found_prop: ratio(pac.valid + pac.irregular, pac.total),
        pvc_included_prop: ratio(pvc.valid, pvc.total),
        pac_excluded_prop: ratio(pac.irregular, pac.total),
        valid_prop: ratio(all.valid, n_ref),
        irregular_prop: ratio(all.irregular, n_ref),
        not_present_prop: ratio(all.not_present, n_ref),
        not_identified: matching.unmatched_detected.len(),
        by_label,
    }
}

/// Noise segments of a noise stress test record: two-minute noisy stretches
/// alternating with two-minute clean ones, starting five minutes in.
pub fn nst_noise_segments(duration: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = 300.0;
    while a < duration {
        out.push((a, (a + 120.0).min(duration)));
        a += 240.0;
    }
    out
}

/// Fraction of beats whose noisy flag agrees with whether the beat lies in
/// a reference noise segment.
pub fn noise_accuracy(times: &[f64], noisy: &[bool], segments: &[(f64, f64)]) -> f64 {
    let agree = times
        .iter()
        .zip(noisy)
        .filter(|(t, flag)| {
            let inside = segments.iter().any(|&(a, b)| **t >= a && **t < b);
            inside == **flag
        })
        .count();
    ratio(agree, times.len().min(noisy.len()))
}
