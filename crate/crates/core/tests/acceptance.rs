//! Acceptance suite. `acceptance_summary` prints one line per criterion and
//! fails if any runnable criterion fails. Criteria 1 to 3 need the MIT-BIH
//! Arrhythmia and Noise Stress Test databases; point `MITDB_DIR` and
//! `NSTDB_DIR` at local copies and run
//! `cargo test --test acceptance -- --ignored` to score them. Without the data
//! they report NOT RUN and are backed by labelled synthetic surrogates.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use rrimark::beat_detection::{detect_qrs, post_filter, preprocess};
use rrimark::correction::{adjust_short_long, best_removal, interpolate_long, remove_extra_beats, successive_ssd};
use rrimark::irregularity::{detect_outliers, regional_stats_excluding, REGIONAL_INTERVALS};
use rrimark::noise_profile::compute_noise_profile;
use rrimark::pipeline::{analyze, validate_analysis, Analysis};
use rrimark::session::Parameters;
use rrimark::signal_io::{read_record, read_reference_annotations_with_rate, FormatHint};
use rrimark::synth::{generate, NoiseBurst, SynthConfig};
use rrimark::validation::{compute_metrics, noise_accuracy, nst_noise_segments, MATCH_TOLERANCE_S};
use rrimark::{
    BeatClass, BeatMark, BeatType, DetectorParams, EcgRecord, Execution, IrregularityParams, PipelineConfig,
    RriSeries,
};

/// Randomised cases per property.
const CASES: u32 = 10_000;
const SENSITIVITY_MIN: f64 = 0.95;
const NOISE_ACCURACY_MIN: f64 = 0.75;
/// Absolute tolerance for means recomputed in a different order.
const MEAN_TOL: f64 = 1e-12;
/// Relative tolerance for the c² scaling of noise profiles.
const SCALE_TOL: f64 = 1e-9;
/// Slack for float round-off when comparing squared-difference sums.
const SSD_TOL: f64 = 1e-12;
const MITDB_DETECTION_RECORDS: [&str; 3] = ["100", "103", "119"];
const NSTDB_RECORDS: [&str; 4] = ["118e06", "118e00", "118e_6", "119e_6"];

#[derive(Debug, Clone, PartialEq)]
enum Status {
    Pass,
    Fail,
    NotRun,
}

struct Outcome {
    label: String,
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            label: label.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn from_result(label: impl Into<String>, r: Result<String, String>) -> Self {
        match r {
            Ok(d) => Outcome::check(label, true, d),
            Err(d) => Outcome::check(label, false, d),
        }
    }

    fn not_run(label: impl Into<String>, why: impl Into<String>) -> Self {
        Outcome {
            label: label.into(),
            status: Status::NotRun,
            detail: why.into(),
        }
    }

    fn line(&self) -> String {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotRun => "NOT RUN (data unavailable)",
        };
        format!("{:<58} {s}  {}", self.label, self.detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<String, String> {
    runner(cases)
        .run(&strategy, test)
        .map(|()| format!("{cases} cases"))
        .map_err(|e| e.to_string())
}

fn beats_at(times: &[f64]) -> Vec<BeatMark> {
    times.iter().map(|&t| BeatMark::detected(t)).collect()
}

fn times_from(start: f64, durations: &[f64]) -> Vec<f64> {
    let mut t = start;
    let mut out = vec![t];
    for d in durations {
        t += d;
        out.push(t);
    }
    out
}

fn active_durations(beats: &[BeatMark]) -> Vec<f64> {
    let t: Vec<f64> = beats.iter().filter(|b| b.class != BeatClass::Removed).map(|b| b.time).collect();
    t.windows(2).map(|w| w[1] - w[0]).collect()
}

fn excluded(beats: &[BeatMark]) -> usize {
    beats.iter().filter(|b| b.class == BeatClass::Excluded).count()
}

fn rri_params() -> Parameters {
    Parameters::default()
}

/// Mostly regular intervals with occasional arbitrary ones.
fn rough_series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![8 => 0.7f64..0.9, 1 => 0.2f64..2.2], 2..=max_len)
}

#[derive(Debug, Clone, Copy)]
enum Artifact {
    Regular(f64),
    Extra(f64, f64),
    Missed(f64),
    Premature(f64, f64),
}

/// Regular rhythm with extra beats, missed beats and premature pairs.
fn artifact_series() -> impl Strategy<Value = Vec<f64>> {
    let piece = prop_oneof![
        12 => (0.72f64..0.88).prop_map(Artifact::Regular),
        1 => (0.72f64..0.88, 0.2f64..0.8).prop_map(|(d, f)| Artifact::Extra(d, f)),
        1 => (0.72f64..0.88).prop_map(Artifact::Missed),
        1 => (0.72f64..0.88, 0.1f64..0.3).prop_map(|(d, f)| Artifact::Premature(d, f)),
    ];
    prop::collection::vec(piece, 180..300).prop_map(|pieces| {
        let mut d = Vec::new();
        for p in pieces {
            match p {
                Artifact::Regular(x) => d.push(x),
                Artifact::Extra(x, f) => {
                    d.push(x * f);
                    d.push(x * (1.0 - f));
                }
                Artifact::Missed(x) => d.push(2.0 * x),
                Artifact::Premature(x, f) => {
                    d.push(x * (1.0 - f));
                    d.push(x * (1.0 + f));
                }
            }
        }
        d
    })
}

// ---------------------------------------------------------------------------
// brute-force oracles

fn oracle_outliers(d: &[f64], p: &IrregularityParams) -> Vec<bool> {
    let n = d.len() as isize;
    let w = REGIONAL_INTERVALS as isize;
    let mut flags = Vec::new();
    for k in 0..n {
        let x = d[k as usize];
        if x < p.accept_min || x > p.accept_max {
            flags.push(true);
            continue;
        }
        let pos = k + 1;
        let mut sum = 0.0;
        let mut count = 0;
        for j in (pos - w)..(pos + w) {
            if j >= 0 && j < n {
                sum += d[j as usize];
                count += 1;
            }
        }
        if count < 2 {
            flags.push(false);
            continue;
        }
        let mean = sum / count as f64;
        flags.push(x < p.rri_lower_frac * mean || x > p.rri_upper_frac * mean);
    }
    flags
}

fn oracle_mean(d: &[f64], position: usize, skip: std::ops::Range<usize>) -> Option<f64> {
    let vals: Vec<f64> = (0..d.len())
        .filter(|&j| j + REGIONAL_INTERVALS >= position && j < position + REGIONAL_INTERVALS)
        .filter(|j| !skip.contains(j))
        .map(|j| d[j])
        .collect();
    (vals.len() >= 2).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn oracle_noise_mean(v: &[f64], position: usize) -> Option<f64> {
    let vals: Vec<f64> = (0..v.len())
        .filter(|&j| j != position && j + REGIONAL_INTERVALS >= position && j <= position + REGIONAL_INTERVALS)
        .map(|j| v[j])
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Smallest summed squared deviation from `target` over every subset of
/// inner beats kept.
fn oracle_removal_cost(times: &[f64], target: f64) -> f64 {
    let inner = times.len() - 2;
    (0..1u32 << inner)
        .map(|mask| {
            let kept: Vec<f64> = times
                .iter()
                .enumerate()
                .filter(|(k, _)| *k == 0 || *k == times.len() - 1 || mask & (1 << (k - 1)) != 0)
                .map(|(_, t)| *t)
                .collect();
            kept.windows(2).map(|w| (w[1] - w[0] - target).powi(2)).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn removal_cost(times: &[f64], keep: &[bool], target: f64) -> f64 {
    let kept: Vec<f64> = times.iter().zip(keep).filter(|(_, k)| **k).map(|(t, _)| *t).collect();
    kept.windows(2).map(|w| (w[1] - w[0] - target).powi(2)).sum()
}

// ---------------------------------------------------------------------------
// criteria 1 to 3: reference databases and synthetic surrogates

fn data_dir(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.is_dir())
}

fn load_mit(dir: &Path, name: &str) -> Result<(EcgRecord, rrimark::signal_io::ReferenceAnnotations), String> {
    let record = read_record(dir.join(format!("{name}.hea")), FormatHint::Wfdb, None).map_err(|e| e.to_string())?;
    let reference = read_reference_annotations_with_rate(dir.join(format!("{name}.atr")), record.sample_rate)
        .map_err(|e| e.to_string())?;
    Ok((record, reference))
}

fn mitdb_sensitivity(dir: &Path) -> Result<String, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in MITDB_DETECTION_RECORDS {
        let (record, reference) = load_mit(dir, name)?;
        let a = analyze(&record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        let m = validate_analysis(&a, &reference).post_identification;
        ok &= m.accuracy >= SENSITIVITY_MIN;
        parts.push(format!("{name}={:.4}", m.accuracy));
    }
    let detail = format!("sensitivity {} (min {SENSITIVITY_MIN})", parts.join(" "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn nstdb_noise_accuracy(dir: &Path) -> Result<String, String> {
    let mut accs = Vec::new();
    for name in NSTDB_RECORDS {
        let record = read_record(dir.join(format!("{name}.hea")), FormatHint::Wfdb, None).map_err(|e| e.to_string())?;
        let a = analyze(&record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        accs.push((name, beat_noise_accuracy(&a, record.duration())));
    }
    let mean = accs.iter().map(|(_, a)| a).sum::<f64>() / accs.len() as f64;
    let detail = format!(
        "mean {mean:.4} ({}) min {NOISE_ACCURACY_MIN}",
        accs.iter().map(|(n, a)| format!("{n}={a:.3}")).collect::<Vec<_>>().join(" ")
    );
    if mean >= NOISE_ACCURACY_MIN {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn correction_direction(records: &[(String, Analysis, rrimark::signal_io::ReferenceAnnotations)]) -> Result<String, String> {
    let mut failures = Vec::new();
    let (mut pre, mut post, mut e_pre, mut e_post) = (0.0, 0.0, 0, 0);
    for (name, a, reference) in records {
        let v = validate_analysis(a, reference);
        pre += v.post_identification.valid_prop;
        post += v.post_correction.valid_prop;
        e_pre += v.epochs_pre;
        e_post += v.epochs_post;
        if v.post_correction.valid_prop < v.post_identification.valid_prop || v.epochs_post < v.epochs_pre {
            failures.push(format!(
                "{name}: valid {:.4}->{:.4} epochs {}->{}",
                v.post_identification.valid_prop, v.post_correction.valid_prop, v.epochs_pre, v.epochs_post
            ));
        }
    }
    let n = records.len() as f64;
    let detail = format!(
        "{} records, mean valid {:.4}->{:.4}, epochs {e_pre}->{e_post}",
        records.len(),
        pre / n,
        post / n
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; regressions: {}", failures.join(", ")))
    }
}

fn mitdb_correction(dir: &Path) -> Result<String, String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension()? == "atr").then(|| p.file_stem()?.to_str().map(String::from))?
        })
        .filter(|n| dir.join(format!("{n}.hea")).exists())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(format!("no annotated records in {}", dir.display()));
    }
    let mut records = Vec::new();
    for name in names {
        let (record, reference) = load_mit(dir, &name)?;
        let a = analyze(&record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        records.push((name, a, reference));
    }
    correction_direction(&records)
}

fn beat_noise_accuracy(a: &Analysis, duration: f64) -> f64 {
    let kept: Vec<&BeatMark> = a.identification.iter().filter(|b| b.class != BeatClass::Removed).collect();
    let times: Vec<f64> = kept.iter().map(|b| b.time).collect();
    let noisy: Vec<bool> = kept.iter().map(|b| b.noisy).collect();
    noise_accuracy(&times, &noisy, &nst_noise_segments(duration))
}

fn synth_with(seed: u64, duration: f64, pvc: f64, pac: f64, noise_sd: f64) -> SynthConfig {
    SynthConfig {
        duration,
        seed,
        pvc_probability: pvc,
        pac_probability: pac,
        noise_sd,
        ..SynthConfig::default()
    }
}

fn surrogate_sensitivity() -> Result<String, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (seed, pvc, pac, noise) in [(100, 0.01, 0.0, 0.01), (103, 0.0, 0.01, 0.02), (119, 0.15, 0.0, 0.01)] {
        let s = generate(&synth_with(seed, 1800.0, pvc, pac, noise));
        let a = analyze(&s.record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        let m = compute_metrics(&a.identification, &s.annotations(), MATCH_TOLERANCE_S);
        ok &= m.accuracy >= SENSITIVITY_MIN;
        parts.push(format!("s{seed}={:.4}", m.accuracy));
    }
    let detail = format!("sensitivity {} (min {SENSITIVITY_MIN})", parts.join(" "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Bursts of white noise on the noise stress test schedule. The standard
/// deviations give roughly 6, 0 and -6 dB against the unit R wave.
fn surrogate_noise_accuracy() -> Result<String, String> {
    let duration = 1800.0;
    let mut accs = Vec::new();
    for (seed, sd) in [(1, 0.25), (2, 0.5), (3, 1.0), (4, 1.0)] {
        let bursts = nst_noise_segments(duration)
            .into_iter()
            .map(|(start, end)| NoiseBurst { start, end, sd })
            .collect();
        let cfg = SynthConfig {
            bursts,
            ..synth_with(seed, duration, 0.01, 0.01, 0.01)
        };
        let s = generate(&cfg);
        let a = analyze(&s.record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        accs.push(beat_noise_accuracy(&a, duration));
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let detail = format!(
        "mean {mean:.4} ({}) min {NOISE_ACCURACY_MIN}",
        accs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
    );
    if mean >= NOISE_ACCURACY_MIN {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn surrogate_correction() -> Result<String, String> {
    let mut records = Vec::new();
    for (seed, pvc, pac, noise) in [
        (10, 0.03, 0.0, 0.01),
        (11, 0.08, 0.02, 0.01),
        (12, 0.02, 0.02, 0.05),
        (13, 0.0, 0.0, 0.01),
        (14, 0.05, 0.05, 0.02),
    ] {
        let s = generate(&synth_with(seed, 1800.0, pvc, pac, noise));
        let a = analyze(&s.record, &rri_params(), Execution::Parallel).map_err(|e| e.to_string())?;
        records.push((format!("s{seed}"), a, s.annotations()));
    }
    correction_direction(&records)
}

// ---------------------------------------------------------------------------
// criterion 4: oracle equivalence

fn c4_outliers() -> Result<String, String> {
    let params = IrregularityParams::default();
    run_property(CASES, rough_series(200), |d| {
        let got = detect_outliers(&RriSeries::from_durations(&d), &params);
        prop_assert_eq!(got, oracle_outliers(&d, &params));
        Ok(())
    })
}

fn c4_regional_stats() -> Result<String, String> {
    let params = IrregularityParams::default();
    let strategy = rough_series(200).prop_flat_map(|d| {
        let n = d.len();
        let noise = prop::collection::vec(0.0f64..5.0, n + 1);
        (Just(d), noise, 0..=n, 0..=n, 0usize..4)
    });
    run_property(CASES, strategy, |(d, noise, position, skip_at, skip_len)| {
        let skip = skip_at..(skip_at + skip_len).min(d.len());
        let rri = RriSeries::from_durations(&d);
        let got = regional_stats_excluding(&rri, Some(&noise), position, skip.clone(), &params);
        match (got, oracle_mean(&d, position, skip)) {
            (Ok(s), Some(m)) => {
                prop_assert!((s.rri_mean - m).abs() <= MEAN_TOL, "{} vs {}", s.rri_mean, m);
                let nm = oracle_noise_mean(&noise, position).unwrap();
                prop_assert!((s.noise_mean.unwrap() - nm).abs() <= MEAN_TOL);
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
        Ok(())
    })
}

fn c4_removal() -> Result<String, String> {
    let strategy = (prop::collection::vec(0.05f64..1.2, 1..=5), 0.5f64..1.2);
    let oracle = run_property(CASES, strategy, |(gaps, target)| {
        let times = times_from(0.0, &gaps);
        let keep = best_removal(&times, target);
        prop_assert!(keep[0] && keep[times.len() - 1]);
        let got = removal_cost(&times, &keep, target);
        let want = oracle_removal_cost(&times, target);
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
        Ok(())
    })?;

    // 0.27, 0.27, 0.26 inside a 0.8 s rhythm: both inner beats go.
    let mut d = vec![0.8; 200];
    d.splice(100..101, [0.27, 0.27, 0.26]);
    let a = analyze(&EcgRecord::from_intervals(d), &rri_params(), Execution::Sequential).map_err(|e| e.to_string())?;
    let removed: Vec<usize> = (0..a.beats.len()).filter(|&i| a.beats[i].class == BeatClass::Removed).collect();
    let regular = active_durations(&a.beats).iter().all(|x| (x - 0.8).abs() < 1e-9);
    let detail = format!("{oracle}; 0.27/0.27/0.26 run removed beats {removed:?}");
    if removed == [101, 102] && regular {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// criterion 5: conservation

fn c5_adjustment() -> Result<String, String> {
    let strategy = (prop::collection::vec(0.3f64..1.8, 3..60), any::<prop::sample::Index>(), 0.0f64..1e4);
    run_property(CASES, strategy, |(d, at, offset)| {
        let times = times_from(offset, &d);
        let mut beats = beats_at(&times);
        let p = 1 + at.index(times.len() - 2);
        let shift = adjust_short_long(&mut beats, p).unwrap();
        for (k, (b, t)) in beats.iter().zip(&times).enumerate() {
            if k != p {
                prop_assert_eq!(b.time.to_bits(), t.to_bits());
            }
        }
        let (t0, t1) = (times[p - 1], times[p + 1]);
        let (n0, n1) = (beats[p].time - t0, t1 - beats[p].time);
        let ulp = f64::EPSILON * t1.abs().max(1.0);
        prop_assert!((n0 + n1 - (t1 - t0)).abs() <= 2.0 * ulp);
        prop_assert!((n0 - n1).abs() <= 4.0 * ulp);
        prop_assert!((times[p] + shift - beats[p].time).abs() <= 2.0 * ulp);
        prop_assert_eq!(beats[p].class, BeatClass::Adjusted);
        Ok(())
    })
}

fn c5_round_trip() -> Result<String, String> {
    let strategy = (prop::collection::vec(0.3f64..3.0, 2..80), any::<prop::sample::Index>(), 2usize..6);
    run_property(CASES, strategy, |(d, at, n)| {
        let times = times_from(3.0, &d);
        let mut beats = beats_at(&times);
        let k = at.index(d.len());
        let first = interpolate_long(&mut beats, k, n).unwrap();
        prop_assert_eq!(beats.len(), times.len() + n - 1);
        let dur = times[k + 1] - times[k];
        for j in 0..n - 1 {
            let b = &beats[first + j];
            prop_assert_eq!(b.class, BeatClass::Interpolated);
            prop_assert_eq!(b.time, times[k] + (j + 1) as f64 * (dur / n as f64));
        }
        let positions: Vec<usize> = (k + 1..k + n).collect();
        remove_extra_beats(&mut beats, &positions);
        let restored: Vec<f64> = beats.iter().filter(|b| b.class != BeatClass::Removed).map(|b| b.time).collect();
        prop_assert_eq!(restored, times);
        Ok(())
    })
}

fn c5_duration() -> Result<String, String> {
    run_property(CASES, artifact_series(), |d| {
        let rec = EcgRecord::from_intervals(d.clone());
        let a = analyze(&rec, &rri_params(), Execution::Sequential).unwrap();
        let total: f64 = d.iter().sum();
        prop_assert_eq!(a.start, 0.0);
        prop_assert_eq!(a.end, rec.duration());
        let active: Vec<&BeatMark> = a.beats.iter().filter(|b| b.class != BeatClass::Removed).collect();
        prop_assert_eq!(active[0].time, 0.0);
        prop_assert_eq!(active.last().unwrap().time, *rec.rri_beat_times().last().unwrap());
        prop_assert!((active.last().unwrap().time - total).abs() < 1e-9);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// criterion 6: invariance

fn c6_relative_flags() -> Result<String, String> {
    let params = IrregularityParams {
        accept_min: 0.0,
        accept_max: f64::INFINITY,
        ..IrregularityParams::default()
    };
    let strategy = (rough_series(200), 0.25f64..4.0);
    run_property(CASES, strategy, |(d, c)| {
        // skip near-ties, where rounding alone decides the comparison
        let means: Vec<Option<f64>> = (0..d.len()).map(|k| oracle_mean(&d, k + 1, 0..0)).collect();
        let tie = d.iter().zip(&means).any(|(x, m)| {
            m.is_some_and(|m| {
                (x - params.rri_lower_frac * m).abs() < 1e-9 || (x - params.rri_upper_frac * m).abs() < 1e-9
            })
        });
        prop_assume!(!tie);
        let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
        let a = detect_outliers(&RriSeries::from_durations(&d), &params);
        let b = detect_outliers(&RriSeries::from_durations(&scaled), &params);
        prop_assert_eq!(a, b);
        Ok(())
    })?;
    // the absolute window is not scale free
    let defaults = IrregularityParams::default();
    let d = vec![1.0; 50];
    let doubled = vec![2.0; 50];
    let plain = detect_outliers(&RriSeries::from_durations(&d), &defaults);
    let scaled = detect_outliers(&RriSeries::from_durations(&doubled), &defaults);
    if plain.iter().any(|f| *f) || !scaled.iter().all(|f| *f) {
        return Err("absolute acceptance window behaved as scale free".into());
    }
    Ok(format!("{CASES} cases; absolute bounds not invariant, as expected"))
}

fn detector_times(record: &EcgRecord) -> Vec<f64> {
    let params = DetectorParams::default();
    let f = preprocess(record, &params).unwrap();
    let beats = detect_qrs(&f, &params);
    post_filter(&beats, &f, &params)
        .iter()
        .filter(|b| b.class != BeatClass::Excluded)
        .map(|b| b.time)
        .collect()
}

fn c6_detector_amplitude() -> Result<String, String> {
    let base = generate(&synth_with(6, 60.0, 0.05, 0.03, 0.02)).record;
    let reference = detector_times(&base);
    let one_sample = 1.0 / base.sample_rate;
    run_property(CASES, -3.0f64..3.0, |e| {
        let c = 10f64.powf(e);
        let mut scaled = base.clone();
        scaled.samples.iter_mut().for_each(|x| *x *= c);
        let got = detector_times(&scaled);
        prop_assert_eq!(got.len(), reference.len(), "c = {}", c);
        for (a, b) in got.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= one_sample + 1e-12, "c = {}: {} vs {}", c, a, b);
        }
        Ok(())
    })
}

fn c6_noise_scaling() -> Result<String, String> {
    let s = generate(&synth_with(7, 30.0, 0.0, 0.0, 0.05));
    let beats = beats_at(&s.beat_times());
    let base = compute_noise_profile(&s.record, &beats, 200.0).unwrap();
    run_property(CASES, -3.0f64..3.0, |e| {
        let c = 10f64.powf(e);
        let mut rec = s.record.clone();
        rec.samples.iter_mut().for_each(|x| *x *= c);
        let p = compute_noise_profile(&rec, &beats, 200.0).unwrap();
        for (a, b) in p.per_beat.iter().zip(&base.per_beat) {
            prop_assert!((a - c * c * b).abs() <= SCALE_TOL * c * c * b.abs(), "c = {}", c);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// criterion 7: smoothing and loop monotonicity

fn c7_smoothing() -> Result<String, String> {
    run_property(CASES, artifact_series(), |d| {
        let rec = EcgRecord::from_intervals(d);
        let mut params = rri_params();
        params.correction.loops = 3;
        let a = analyze(&rec, &params, Execution::Sequential).unwrap();
        let before = successive_ssd(&active_durations(&a.identification));
        let after = successive_ssd(&active_durations(&a.beats));
        prop_assert!(after <= before + SSD_TOL, "{} -> {}", before, after);
        let mut last = excluded(&a.identification);
        for &n in &a.loops.excluded_after_loop {
            prop_assert!(n <= last, "{:?}", a.loops.excluded_after_loop);
            last = n;
        }
        Ok(())
    })
}

/// A stretch of fifteen missed beats, every third interval. Their sheer
/// number inflates the regional mean so that in the first loop only the
/// outermost ones can be split; the second loop sees a normalised mean and
/// finishes the job.
fn c7_second_loop_fixture() -> Result<String, String> {
    let mut d = vec![0.8; 200];
    for k in 0..15 {
        d[60 + 3 * k] = 1.6;
    }
    let rec = EcgRecord::from_intervals(d);
    let mut params = rri_params();
    params.correction.loops = 3;
    let a = analyze(&rec, &params, Execution::Sequential).map_err(|e| e.to_string())?;
    let counts = &a.loops.excluded_after_loop;
    let regular = active_durations(&a.beats)
        .iter()
        .all(|x| (x - 0.8).abs() < 1e-9);
    let interpolated = a.beats.iter().filter(|b| b.beat_type == Some(BeatType::Bt7)).count();
    let detail = format!(
        "excluded {} -> {:?}, {interpolated} interpolated",
        excluded(&a.identification),
        counts
    );
    if counts[1] < counts[0] && counts[2] == 0 && regular && interpolated == 15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// criterion 8: determinism

fn c8_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = generate(&synth_with(8, 400.0, 0.04, 0.02, 0.03));
    let mut body = format!("fs={}\n", s.record.sample_rate);
    for x in &s.record.samples {
        body.push_str(&format!("{x:.6}\n"));
    }
    let input = tmp.path().join("rec.txt");
    std::fs::write(&input, body).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (run, exec) in [Execution::Sequential, Execution::Parallel, Execution::Parallel].into_iter().enumerate() {
        let mut cfg = PipelineConfig::new(&input, tmp.path().join(format!("run{run}")));
        cfg.parameters.test_duration = Some(300.0);
        cfg.parameters.seed = Some(42);
        cfg.exec = exec;
        let out = rrimark::run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let files = [&out.rtimes_path, &out.bi_path, &out.session_path, &out.report_path]
            .map(|p| std::fs::read(p).unwrap_or_default());
        outputs.push(files);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let detail = "rtimes, bi, session, report identical across 3 runs (sequential and parallel)";
    if same && outputs[0].iter().all(|f| !f.is_empty()) {
        Ok(detail.into())
    } else {
        Err("outputs differ between runs".into())
    }
}

// ---------------------------------------------------------------------------
// criterion 9: worked example

fn c9_worked_example() -> Result<String, String> {
    let mut beats = beats_at(&[0.0, 0.6, 1.6]);
    let shift = adjust_short_long(&mut beats, 1).map_err(|e| e.to_string())?;
    let (a, b) = (beats[1].time - beats[0].time, beats[2].time - beats[1].time);
    let direct = a == 0.8 && b == 0.8 && (shift - 0.2).abs() < 1e-12;

    // the same pair inside a regular rhythm, through the full pipeline
    let mut d = vec![0.8; 200];
    d[100] = 0.6;
    d[101] = 1.0;
    let a_run = analyze(&EcgRecord::from_intervals(d), &rri_params(), Execution::Sequential).map_err(|e| e.to_string())?;
    let moved = &a_run.beats[101];
    let pipeline = (moved.time - 101.0 * 0.8).abs() < 1e-9
        && matches!(moved.beat_type, Some(BeatType::Bt1) | Some(BeatType::Bt8))
        && active_durations(&a_run.beats).iter().all(|x| (x - 0.8).abs() < 1e-9);
    let detail = format!("0.6/1.0 -> {a}/{b}, beat moved {shift:+.3} s; pipeline typed {:?}", moved.beat_type);
    if direct && pipeline {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_summary() {
    let mut outcomes = Vec::new();

    match data_dir("MITDB_DIR") {
        Some(dir) => outcomes.push(Outcome::from_result("1  MIT-BIH 100/103/119 sensitivity", mitdb_sensitivity(&dir))),
        None => outcomes.push(Outcome::not_run("1  MIT-BIH 100/103/119 sensitivity", "set MITDB_DIR")),
    }
    outcomes.push(Outcome::from_result("1s synthetic surrogate: detection sensitivity", surrogate_sensitivity()));
    match data_dir("NSTDB_DIR") {
        Some(dir) => outcomes.push(Outcome::from_result("2  NST noise classification accuracy", nstdb_noise_accuracy(&dir))),
        None => outcomes.push(Outcome::not_run("2  NST noise classification accuracy", "set NSTDB_DIR")),
    }
    outcomes.push(Outcome::from_result("2s synthetic surrogate: noise classification", surrogate_noise_accuracy()));
    match data_dir("MITDB_DIR") {
        Some(dir) => outcomes.push(Outcome::from_result("3  MIT-BIH correction direction", mitdb_correction(&dir))),
        None => outcomes.push(Outcome::not_run("3  MIT-BIH correction direction", "set MITDB_DIR")),
    }
    outcomes.push(Outcome::from_result("3s synthetic surrogate: correction direction", surrogate_correction()));

    outcomes.push(Outcome::from_result("4a oracle: detect_outliers", c4_outliers()));
    outcomes.push(Outcome::from_result("4b oracle: regional_stats", c4_regional_stats()));
    outcomes.push(Outcome::from_result("4c oracle: extra-beat removal (runs <= 6)", c4_removal()));
    outcomes.push(Outcome::from_result("5a conservation: adjust_short_long pair sum", c5_adjustment()));
    outcomes.push(Outcome::from_result("5b conservation: interpolate/remove round trip", c5_round_trip()));
    outcomes.push(Outcome::from_result("5c conservation: record duration", c5_duration()));
    outcomes.push(Outcome::from_result("6a invariance: relative flags under RRI scaling", c6_relative_flags()));
    outcomes.push(Outcome::from_result("6b invariance: detector under amplitude scaling", c6_detector_amplitude()));
    outcomes.push(Outcome::from_result("6c invariance: noise profile scales as c^2", c6_noise_scaling()));
    outcomes.push(Outcome::from_result("7a smoothing and loop monotonicity", c7_smoothing()));
    outcomes.push(Outcome::from_result("7b second loop rescues more beats", c7_second_loop_fixture()));
    outcomes.push(Outcome::from_result("8  determinism", c8_determinism()));
    outcomes.push(Outcome::from_result("9  worked example 0.6/1.0 -> 0.8/0.8", c9_worked_example()));

    // straight to the stderr handle: libtest only captures the print macros,
    // and the summary should show up in a plain `cargo test` run
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for o in &outcomes {
        let _ = writeln!(err, "{}", o.line());
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.status == Status::Fail).map(|o| o.label.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

fn require(var: &str) -> PathBuf {
    data_dir(var).unwrap_or_else(|| panic!("{var} must point at a directory with the database records"))
}

#[test]
#[ignore = "needs the MIT-BIH Arrhythmia Database in MITDB_DIR"]
fn mitdb_detection_sensitivity() {
    let dir = require("MITDB_DIR");
    let r = mitdb_sensitivity(&dir);
    println!("{r:?}");
    r.unwrap();
}

#[test]
#[ignore = "needs the MIT-BIH Noise Stress Test Database in NSTDB_DIR"]
fn nstdb_noise_classification() {
    let dir = require("NSTDB_DIR");
    let r = nstdb_noise_accuracy(&dir);
    println!("{r:?}");
    r.unwrap();
}

#[test]
#[ignore = "needs the MIT-BIH Arrhythmia Database in MITDB_DIR"]
fn mitdb_correction_direction() {
    let dir = require("MITDB_DIR");
    let r = mitdb_correction(&dir);
    println!("{r:?}");
    r.unwrap();
}
