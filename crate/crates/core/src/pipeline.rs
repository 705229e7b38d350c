//! End-to-end processing of one record: identification, irregularity
//! detection, correction, region marking and artifact output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beat_detection::{detect_qrs, post_filter, preprocess, BeatClass, BeatMark};
use crate::correction::{count_spectral_epochs, mark_regions, run_correction_loops, LoopReport, Region, RegionReason};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::irregularity::{outlier_flags, ActiveView, REGIONAL_INTERVALS};
use crate::noise_profile::{compute_noise_profile_with, flag_noisy_beats};
use crate::session::{Parameters, RecordInfo, Session, Span};
use crate::signal_io::{
    read_record, read_reference_annotations_with_rate, EcgRecord, FormatHint, ReferenceAnnotations,
    SourceFormat,
};
use crate::validation::{compute_metrics, ValidationReport, MATCH_TOLERANCE_S};

/// Shortest record the pipeline accepts, seconds.
pub const MIN_DURATION_S: f64 = 120.0;

/// How the analysed span is chosen when a test duration is set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TestRegionMode {
    /// Uniformly placed span drawn from the seeded generator.
    #[default]
    Random,
    /// A span saved by an earlier run.
    Reuse(Option<Span>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: FormatHint,
    pub sample_rate: Option<f64>,
    pub parameters: Parameters,
    pub test_region: TestRegionMode,
    pub out_dir: PathBuf,
    /// Report path; defaults to `<out_dir>/<stem>.report.txt`.
    pub report: Option<PathBuf>,
    /// Reference annotations to score against.
    pub reference: Option<PathBuf>,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            format: FormatHint::Auto,
            sample_rate: None,
            parameters: Parameters::default(),
            test_region: TestRegionMode::Random,
            out_dir: out_dir.into(),
            report: None,
            reference: None,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.parameters;
        p.detector.validate()?;
        p.irregularity.validate()?;
        p.correction.validate()?;
        if !(p.noise_window_ms > 0.0) {
            return Err(Error::InvalidConfig("noise window must be > 0 ms".into()));
        }
        if let Some(d) = p.test_duration {
            if !(d >= MIN_DURATION_S) {
                return Err(Error::MinimumDuration {
                    seconds: d,
                    minimum: MIN_DURATION_S,
                });
            }
        }
        if let Some(fs) = self.sample_rate {
            if !(fs > 0.0) {
                return Err(Error::InvalidConfig("sample rate must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub rtimes_path: PathBuf,
    pub bi_path: PathBuf,
    pub session_path: PathBuf,
    pub report_path: PathBuf,
    pub session: Session,
    pub summary: RunSummary,
    pub report: String,
}

/// Result of the processing stages, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub start: f64,
    pub end: f64,
    pub beats: Vec<BeatMark>,
    pub regions: Vec<Region>,
    /// Beats right after identification (outliers excluded, training
    /// beats marked), before any correction.
    pub identification: Vec<BeatMark>,
    pub identification_regions: Vec<Region>,
    pub loops: LoopReport,
    pub epochs_pre: usize,
    pub epochs_post: usize,
}

/// Picks the analysed span inside `[start, start + available]`.
pub fn select_test_region(
    start: f64,
    available: f64,
    duration: f64,
    mode: TestRegionMode,
    seed: u64,
) -> Result<Span> {
    if duration < MIN_DURATION_S {
        return Err(Error::MinimumDuration {
            seconds: duration,
            minimum: MIN_DURATION_S,
        });
    }
    if duration > available {
        return Err(Error::DurationTooLong {
            requested: duration,
            available,
        });
    }
    match mode {
        TestRegionMode::Random => {
            let slack = available - duration;
            let offset = if slack > 0.0 {
                ChaCha8Rng::seed_from_u64(seed).random_range(0.0..=slack)
            } else {
                0.0
            };
            Ok(Span {
                start: start + offset,
                end: start + offset + duration,
            })
        }
        TestRegionMode::Reuse(None) => Err(Error::NoSavedRegion),
        TestRegionMode::Reuse(Some(span)) => {
            if span.start < start || span.end > start + available + 1e-9 || span.end <= span.start {
                return Err(Error::DurationTooLong {
                    requested: span.end - start,
                    available,
                });
            }
            Ok(span)
        }
    }
}

fn detect_beats(record: &EcgRecord, params: &Parameters, exec: Execution) -> Result<Vec<BeatMark>> {
    if !record.has_waveform() {
        return Ok(record
            .rri_beat_times()
            .into_iter()
            .map(|t| BeatMark::detected(record.start_offset + t))
            .collect());
    }
    let filtered = preprocess(record, &params.detector)?;
    let beats = detect_qrs(&filtered, &params.detector);
    let mut beats = post_filter(&beats, &filtered, &params.detector);
    let profile = compute_noise_profile_with(record, &beats, params.noise_window_ms, exec)?;
    let noisy = flag_noisy_beats(&profile, params.irregularity.rri_upper_frac);
    for ((b, v), n) in beats.iter_mut().zip(&profile.per_beat).zip(noisy) {
        b.noise = *v;
        b.noisy = n;
    }
    Ok(beats)
}

/// Excludes the beats terminating flagged intervals (outside the training
/// stretches).
fn identify_outliers(beats: &mut [BeatMark], params: &Parameters) {
    let view = ActiveView::new(beats);
    let flags = outlier_flags(&view.durations, &params.irregularity);
    for p in view.body(REGIONAL_INTERVALS) {
        if flags[p - 1] {
            beats[view.beat_index[p]].class = BeatClass::Excluded;
        }
    }
}

/// Runs every processing stage on an in-memory record.
pub fn analyze(record: &EcgRecord, params: &Parameters, exec: Execution) -> Result<Analysis> {
    let duration = record.duration();
    if duration < MIN_DURATION_S {
        return Err(Error::MinimumDuration {
            seconds: duration,
            minimum: MIN_DURATION_S,
        });
    }
    let start = record.start_offset;
    let end = start + duration;
    let mut beats = detect_beats(record, params, exec)?;
    identify_outliers(&mut beats, params);

    let mut identification = beats.clone();
    let identification_regions = mark_regions(&mut identification, start, end, &[]);
    let epochs_pre = count_spectral_epochs(
        &identification,
        &identification_regions,
        start,
        end,
        &params.irregularity,
    );

    let loops = run_correction_loops(
        &mut beats,
        Some(record),
        &params.irregularity,
        &params.correction,
        exec,
    );
    let regions = mark_regions(&mut beats, start, end, &[]);
    let epochs_post = count_spectral_epochs(&beats, &regions, start, end, &params.irregularity);
    Ok(Analysis {
        start,
        end,
        beats,
        regions,
        identification,
        identification_regions,
        loops,
        epochs_pre,
        epochs_post,
    })
}

/// Per-record figures shown in the report and the stdout table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub duration: f64,
    pub beats: usize,
    pub valid: usize,
    pub excluded: usize,
    pub adjusted: usize,
    pub interpolated: usize,
    pub removed: usize,
    pub training: usize,
    pub noisy: usize,
    pub irregular_regions: usize,
    pub noise_regions: usize,
    pub epochs_pre: usize,
    pub epochs_post: usize,
}

impl RunSummary {
    fn new(name: &str, analysis: &Analysis) -> Self {
        let count = |c: BeatClass| analysis.beats.iter().filter(|b| b.class == c).count();
        let regions = |r: RegionReason| analysis.regions.iter().filter(|x| x.reason == r).count();
        RunSummary {
            name: name.to_string(),
            duration: analysis.end - analysis.start,
            beats: analysis.beats.len(),
            valid: analysis.beats.iter().filter(|b| b.class.is_valid()).count(),
            excluded: count(BeatClass::Excluded),
            adjusted: count(BeatClass::Adjusted),
            interpolated: count(BeatClass::Interpolated),
            removed: count(BeatClass::Removed),
            training: count(BeatClass::Training),
            noisy: analysis.beats.iter().filter(|b| b.noisy).count(),
            irregular_regions: regions(RegionReason::Irregular),
            noise_regions: regions(RegionReason::Noise),
            epochs_pre: analysis.epochs_pre,
            epochs_post: analysis.epochs_post,
        }
    }
}

/// Fixed-width table, one row per record.
pub fn summary_table(rows: &[RunSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
        "record", "seconds", "beats", "valid", "excl", "adj", "interp", "removed", "noisy", "epochs"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<24} {:>9.1} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
            r.name,
            r.duration,
            r.beats,
            r.valid,
            r.excluded,
            r.adjusted,
            r.interpolated,
            r.removed,
            r.noisy,
            format!("{}->{}", r.epochs_pre, r.epochs_post)
        );
    }
    out
}

fn format_report(summary: &RunSummary, analysis: &Analysis, session: &Session) -> String {
    let mut out = String::new();
    let l = &analysis.loops;
    let _ = writeln!(out, "record: {}", summary.name);
    if let Some(p) = &session.record.path {
        let _ = writeln!(out, "input: {p}");
    }
    let _ = writeln!(out, "span: {:.6} {:.6}", analysis.start, analysis.end);
    let _ = writeln!(out, "beats: {}", summary.beats);
    let _ = writeln!(out, "valid: {}", summary.valid);
    let _ = writeln!(out, "excluded: {}", summary.excluded);
    let _ = writeln!(out, "adjusted: {}", summary.adjusted);
    let _ = writeln!(out, "interpolated: {}", summary.interpolated);
    let _ = writeln!(out, "removed: {}", summary.removed);
    let _ = writeln!(out, "training: {}", summary.training);
    let _ = writeln!(out, "noisy: {}", summary.noisy);
    let _ = writeln!(
        out,
        "beat_types: BT1={} BT2={} BT3={} BT4={} BT5={} BT6={} BT7={} BT8={}",
        l.bt1, l.bt2, l.bt3, l.bt4, l.bt5, l.bt6, l.bt7, l.bt8
    );
    let loops: Vec<String> = l.excluded_after_loop.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "excluded_after_loop: {}", loops.join(" "));
    let _ = writeln!(
        out,
        "regions: irregular={} noise={} total={}",
        summary.irregular_regions,
        summary.noise_regions,
        analysis.regions.len()
    );
    let _ = writeln!(out, "spectral_epochs_pre: {}", summary.epochs_pre);
    let _ = writeln!(out, "spectral_epochs_post: {}", summary.epochs_post);
    if let Some(v) = &session.validation {
        for (stage, m) in [
            ("identification", &v.post_identification),
            ("correction", &v.post_correction),
        ] {
            let _ = writeln!(out, "[{stage}]");
            let _ = writeln!(out, "reference_beats: {}", m.reference_beats);
            let _ = writeln!(out, "detected_beats: {}", m.detected_beats);
            let _ = writeln!(out, "matched: {}", m.matched);
            let _ = writeln!(out, "accuracy: {:.4}", m.accuracy);
            let _ = writeln!(out, "precision (detected/reference): {:.4}", m.precision);
            let _ = writeln!(out, "ppv (matched/detected): {:.4}", m.ppv);
            let _ = writeln!(out, "proportion_normal: {:.4}", m.proportion_normal);
            let _ = writeln!(out, "pvc_found: {:.4}", m.pvc_found_prop);
            let _ = writeln!(out, "pac_found: {:.4}", m.pac_found_prop);
            let _ = writeln!(out, "pvc_included: {:.4}", m.pvc_included_prop);
            let _ = writeln!(out, "pac_excluded: {:.4}", m.pac_excluded_prop);
            let _ = writeln!(out, "valid: {:.4}", m.valid_prop);
            let _ = writeln!(out, "irregular: {:.4}", m.irregular_prop);
            let _ = writeln!(out, "not_present: {:.4}", m.not_present_prop);
            let _ = writeln!(out, "not_identified: {}", m.not_identified);
        }
        let pre = &v.post_identification.by_label;
        let _ = writeln!(out, "[valid proportion change after identification, by label]");
        for (label, post) in &v.post_correction.by_label {
            let before = pre.get(label).map_or(0.0, |t| t.valid as f64 / t.total.max(1) as f64);
            let after = post.valid as f64 / post.total.max(1) as f64;
            let _ = writeln!(out, "{label:?}: {:+.4} (n={})", after - before, post.total);
        }
    }
    out
}

/// Scores an analysis against reference annotations restricted to the
/// analysed span.
pub fn validate_analysis(analysis: &Analysis, reference: &ReferenceAnnotations) -> ValidationReport {
    let within = ReferenceAnnotations {
        entries: reference
            .entries
            .iter()
            .filter(|a| a.time >= analysis.start && a.time <= analysis.end)
            .cloned()
            .collect(),
    };
    ValidationReport {
        post_identification: compute_metrics(&analysis.identification, &within, MATCH_TOLERANCE_S),
        post_correction: compute_metrics(&analysis.beats, &within, MATCH_TOLERANCE_S),
        epochs_pre: analysis.epochs_pre,
        epochs_post: analysis.epochs_post,
        noise_accuracy_by_record: Default::default(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("record")
        .to_string()
}

/// Reads, processes and writes `.rtimes`, `.bi`, session and report files.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let params = &config.parameters;
    let full = read_record(&config.input, config.format, config.sample_rate)?;
    let available = full.duration();
    let full_rate = full.sample_rate;
    if available < MIN_DURATION_S {
        return Err(Error::MinimumDuration {
            seconds: available,
            minimum: MIN_DURATION_S,
        });
    }

    let mut test_region = None;
    let record = match (params.test_duration, config.test_region) {
        (Some(d), mode) => {
            let span = select_test_region(full.start_offset, available, d, mode, params.seed.unwrap_or(0))?;
            test_region = Some(span);
            full.slice(span.start - full.start_offset, span.end - full.start_offset)
        }
        (None, TestRegionMode::Reuse(Some(span))) => {
            let span = select_test_region(full.start_offset, available, span.duration(), config.test_region, 0)?;
            test_region = Some(span);
            full.slice(span.start - full.start_offset, span.end - full.start_offset)
        }
        (None, TestRegionMode::Reuse(None)) => return Err(Error::NoSavedRegion),
        (None, TestRegionMode::Random) => full,
    };
    log::info!(
        "processing {} ({:.1} s at {} Hz)",
        config.input.display(),
        record.duration(),
        record.sample_rate
    );

    let analysis = analyze(&record, params, config.exec)?;
    let name = stem(&config.input);

    let mut session = Session::new(
        RecordInfo {
            path: Some(config.input.display().to_string()),
            source_format: record.source_format,
            sample_rate: record.sample_rate,
            start: analysis.start,
            end: analysis.end,
            inverted: params.detector.invert,
            rri: (record.source_format == SourceFormat::RriOnly).then(|| record.intervals.clone()),
        },
        params.clone(),
    );
    session.test_region = test_region;
    session.beats = analysis.beats.clone();
    session.regions = analysis.regions.clone();
    if let Some(path) = &config.reference {
        let reference = read_reference_annotations_with_rate(path, full_rate)?;
        session.validation = Some(validate_analysis(&analysis, &reference));
    }

    let summary = RunSummary::new(&name, &analysis);
    let report = format_report(&summary, &analysis, &session);
    write_outputs(config, &name, &session, &report, summary)
}

fn write_outputs(
    config: &PipelineConfig,
    name: &str,
    session: &Session,
    report: &str,
    summary: RunSummary,
) -> Result<PipelineOutput> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let rtimes_path = config.out_dir.join(format!("{name}.rtimes"));
    let bi_path = config.out_dir.join(format!("{name}.bi"));
    let session_path = config.out_dir.join(format!("{name}.session.json"));
    let report_path = config
        .report
        .clone()
        .unwrap_or_else(|| config.out_dir.join(format!("{name}.report.txt")));
    let bi = session.bad_intervals()?;
    std::fs::write(&rtimes_path, session.rtimes()).map_err(|e| Error::io(&rtimes_path, e))?;
    std::fs::write(&bi_path, bi).map_err(|e| Error::io(&bi_path, e))?;
    session.export(&session_path)?;
    std::fs::write(&report_path, report).map_err(|e| Error::io(&report_path, e))?;
    Ok(PipelineOutput {
        rtimes_path,
        bi_path,
        session_path,
        report_path,
        session: session.clone(),
        summary,
        report: report.to_string(),
    })
}

/// Paths written by [`regenerate`].
#[derive(Debug, Clone)]
pub struct RegeneratedOutputs {
    pub rtimes_path: PathBuf,
    pub bi_path: PathBuf,
    pub session: Session,
}

/// Re-imports an (edited) session, rebuilds its regions from the beat
/// classes and writes fresh `.rtimes` / `.bi` files next to `out_dir`.
pub fn regenerate(session_path: &Path, out_dir: &Path) -> Result<RegeneratedOutputs> {
    let mut session = Session::import(session_path)?;
    session.refresh_regions();
    let name = session_path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.trim_end_matches(".json").trim_end_matches(".session").to_string())
        .unwrap_or_else(|| "record".into());
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rtimes_path = out_dir.join(format!("{name}.rtimes"));
    let bi_path = out_dir.join(format!("{name}.bi"));
    let bi = session.bad_intervals()?;
    std::fs::write(&rtimes_path, session.rtimes()).map_err(|e| Error::io(&rtimes_path, e))?;
    std::fs::write(&bi_path, bi).map_err(|e| Error::io(&bi_path, e))?;
    Ok(RegeneratedOutputs {
        rtimes_path,
        bi_path,
        session,
    })
}
