use super::{Region, RegionReason};
use crate::beat_detection::{BeatClass, BeatMark};
use crate::irregularity::ActiveView;

/// Beats at each end of the series reserved for estimating regional means.
pub const TRAINING_BEATS: usize = 20;

fn midpoint(a: f64, b: f64) -> f64 {
    a + 0.5 * (b - a)
}

/// Marks the leading and trailing training beats and builds the region
/// list for a record spanning `[start, end]`. Runs of excluded beats become
/// IRREGULAR regions (NOISE when every beat in the run is noisy). `manual`
/// regions are carried over. Touching or overlapping regions are merged.
pub fn mark_regions(beats: &mut [BeatMark], start: f64, end: f64, manual: &[Region]) -> Vec<Region> {
    let view = ActiveView::new(beats);
    let m = view.len();
    let time = |beats: &[BeatMark], p: usize| beats[view.beat_index[p]].time;
    let mut regions: Vec<Region> = manual
        .iter()
        .filter(|r| r.reason == RegionReason::Manual)
        .copied()
        .collect();

    if m <= 2 * TRAINING_BEATS {
        for &b in &view.beat_index {
            beats[b].class = BeatClass::Training;
        }
        regions.push(Region::new(start, end, RegionReason::Training));
        return merge_regions(regions);
    }

    let head_end = midpoint(time(beats, TRAINING_BEATS - 1), time(beats, TRAINING_BEATS));
    let tail_start = midpoint(
        time(beats, m - TRAINING_BEATS - 1),
        time(beats, m - TRAINING_BEATS),
    );
    regions.push(Region::new(start, head_end, RegionReason::Training));
    regions.push(Region::new(tail_start, end, RegionReason::Training));

    let mut p = TRAINING_BEATS;
    while p < m - TRAINING_BEATS {
        if beats[view.beat_index[p]].class != BeatClass::Excluded {
            p += 1;
            continue;
        }
        let s = p;
        let mut all_noisy = true;
        while p < m - TRAINING_BEATS && beats[view.beat_index[p]].class == BeatClass::Excluded {
            all_noisy &= beats[view.beat_index[p]].noisy;
            p += 1;
        }
        let e = p - 1;
        let a = midpoint(time(beats, s - 1), time(beats, s));
        let b = midpoint(time(beats, e), time(beats, e + 1));
        let reason = if all_noisy {
            RegionReason::Noise
        } else {
            RegionReason::Irregular
        };
        regions.push(Region::new(a, b, reason));
    }

    for &b in view
        .beat_index
        .iter()
        .take(TRAINING_BEATS)
        .chain(view.beat_index.iter().skip(m - TRAINING_BEATS))
    {
        beats[b].class = BeatClass::Training;
    }
    merge_regions(regions)
}

/// Sorts regions and merges touching or overlapping ones; the merged
/// region keeps the highest-precedence reason
/// (TRAINING > MANUAL > IRREGULAR > NOISE).
pub fn merge_regions(mut regions: Vec<Region>) -> Vec<Region> {
    regions.retain(|r| r.end > r.start);
    regions.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let mut out: Vec<Region> = Vec::with_capacity(regions.len());
    for r in regions {
        match out.last_mut() {
            Some(last) if r.start <= last.end => {
                last.end = last.end.max(r.end);
                last.reason = last.reason.max(r.reason);
            }
            _ => out.push(r),
        }
    }
    out
}
