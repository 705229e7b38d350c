use super::{Region, RegionReason};
use crate::beat_detection::{BeatClass, BeatMark};
use crate::irregularity::IrregularityParams;

/// Length of one spectral analysis epoch, seconds.
pub const EPOCH_S: f64 = 300.0;

/// Counts back-to-back 300 s epochs that fit inside `[start, end]`, tiled
/// from the end of the leading training region. An epoch qualifies when it
/// overlaps no IRREGULAR, NOISE or MANUAL region, lies within the span of
/// the beats, and no interval touching it falls outside the acceptance
/// window.
pub fn count_spectral_epochs(
    beats: &[BeatMark],
    regions: &[Region],
    start: f64,
    end: f64,
    params: &IrregularityParams,
) -> usize {
    let times: Vec<f64> = beats
        .iter()
        .filter(|b| b.class != BeatClass::Removed)
        .map(|b| b.time)
        .collect();
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return 0;
    };
    let anchor = regions
        .iter()
        .find(|r| r.reason == RegionReason::Training && r.start <= start)
        .map_or(start, |r| r.end);
    let blocking: Vec<&Region> = regions
        .iter()
        .filter(|r| r.reason != RegionReason::Training)
        .collect();
    let bad_intervals: Vec<(f64, f64)> = times
        .windows(2)
        .filter(|w| !params.in_acceptance_window(w[1] - w[0]))
        .map(|w| (w[0], w[1]))
        .collect();

    let mut count = 0;
    let mut a = anchor;
    // tolerance for accumulated tiling error
    while a + EPOCH_S <= end + 1e-9 {
        let b = a + EPOCH_S;
        let covered = first <= a && last >= b - params.accept_max;
        let clean = !blocking.iter().any(|r| r.overlaps(a, b))
            && !bad_intervals.iter().any(|&(x, y)| x < b && y > a);
        if covered && clean {
            count += 1;
        }
        a = b;
    }
    count
}
