use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::{error, info};

use rrimark::pipeline::{regenerate, summary_table, TestRegionMode};
use rrimark::session::Parameters;
use rrimark::signal_io::edf::{write_edf, EdfChannel};
use rrimark::signal_io::wfdb::read_wfdb_record;
use rrimark::signal_io::FormatHint;
use rrimark::{
    run_pipeline, CorrectionParams, DetectorParams, Error, Execution, IrregularityParams,
    PipelineConfig, PipelineOutput, Session,
};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  unexpected failure
  2  invalid command line
  3  unreadable or unsupported input
  4  record or test duration too short / too long
  5  invalid configuration (including --reuse-region without a saved region)
  6  output could not be written
  7  invalid session file or edit
  8  processing failure";

/// Marks heartbeats in single-lead ECG (or RR-interval lists), corrects
/// RR-interval artifacts and writes `.rtimes`, `.bi`, session and report files.
#[derive(Debug, Parser)]
#[command(name = "rrimark", version, after_help = EXIT_CODES)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite `.rtimes` and `.bi` from an edited session file.
    Regen {
        /// Session JSON written by a previous run or the review tool.
        session: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Convert a WFDB record (header path) to EDF.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Input record(s): .txt, .edf, .bdf, WFDB .hea, or .rri.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,

    /// Input format: auto, txt, edf, bdf, wfdb, rri.
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    format: FormatHint,

    /// Sample rate in Hz for text inputs without an `fs=` header.
    #[arg(long)]
    sample_rate: Option<f64>,

    #[arg(long, default_value_t = DetectorParams::default().qrs_threshold)]
    qrs_threshold: f64,

    /// Post-filter energy threshold; 0 disables the post filter.
    #[arg(long, default_value_t = DetectorParams::default().post_threshold)]
    post_threshold: f64,

    /// Signal gain applied before detection.
    #[arg(long, default_value_t = DetectorParams::default().amplifier)]
    amplify: f64,

    /// Negate the signal before detection.
    #[arg(long)]
    invert: bool,

    /// Upper regional RRI bound as a fraction of the regional mean.
    #[arg(long, default_value_t = IrregularityParams::default().rri_upper_frac)]
    rri_upper: f64,

    /// Lower regional RRI bound as a fraction of the regional mean.
    #[arg(long, default_value_t = IrregularityParams::default().rri_lower_frac)]
    rri_lower: f64,

    /// Largest beat-to-beat increase treated as gradual (fraction).
    #[arg(long, default_value_t = IrregularityParams::default().grad_inc_frac)]
    grad_inc: f64,

    /// Largest beat-to-beat decrease treated as gradual (fraction).
    #[arg(long, default_value_t = IrregularityParams::default().grad_dec_frac)]
    grad_dec: f64,

    /// Noise-profile window in milliseconds.
    #[arg(long, default_value_t = rrimark::noise_profile::DEFAULT_WINDOW_MS)]
    noise_window_ms: f64,

    /// Number of correction loops.
    #[arg(long, default_value_t = CorrectionParams::default().loops)]
    loops: u32,

    /// Evaluate P-waves when typing irregular beats.
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    pwave: bool,

    /// P-wave prominence threshold in noise standard deviations.
    #[arg(long, default_value_t = CorrectionParams::default().pwave_sensitivity)]
    pwave_sensitivity: f64,

    /// Analyse only a span of this many seconds (at least 120).
    #[arg(long)]
    test_duration: Option<f64>,

    /// Seed for random test-region placement.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Reuse the test region saved in this session file.
    #[arg(long, value_name = "SESSION")]
    reuse_region: Option<PathBuf>,

    /// Reference annotations to score against (one per input, in order).
    #[arg(long, num_args = 1..)]
    reference: Vec<PathBuf>,

    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Report path. With several inputs the reports are concatenated here.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Records processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_format(s: &str) -> Result<FormatHint, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    fn parameters(&self) -> Parameters {
        Parameters {
            detector: DetectorParams {
                qrs_threshold: self.qrs_threshold,
                post_threshold: self.post_threshold,
                amplifier: self.amplify,
                invert: self.invert,
            },
            irregularity: IrregularityParams {
                rri_upper_frac: self.rri_upper,
                rri_lower_frac: self.rri_lower,
                grad_inc_frac: self.grad_inc,
                grad_dec_frac: self.grad_dec,
                ..IrregularityParams::default()
            },
            correction: CorrectionParams {
                loops: self.loops,
                analyze_pwaves: self.pwave,
                pwave_sensitivity: self.pwave_sensitivity,
            },
            noise_window_ms: self.noise_window_ms,
            test_duration: self.test_duration,
            seed: Some(self.seed),
        }
    }

    fn configs(&self) -> Result<Vec<PipelineConfig>, Error> {
        if !self.reference.is_empty() && self.reference.len() != self.input.len() {
            return Err(Error::InvalidConfig(format!(
                "{} reference files given for {} inputs",
                self.reference.len(),
                self.input.len()
            )));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        let test_region = match &self.reuse_region {
            Some(path) => {
                let saved = Session::import(path)?;
                TestRegionMode::Reuse(Some(saved.test_region.ok_or(Error::NoSavedRegion)?))
            }
            None => TestRegionMode::Random,
        };
        let single = self.input.len() == 1;
        let parameters = self.parameters();
        Ok(self
            .input
            .iter()
            .enumerate()
            .map(|(i, input)| PipelineConfig {
                format: self.format,
                sample_rate: self.sample_rate,
                parameters: parameters.clone(),
                test_region,
                report: if single { self.report.clone() } else { None },
                reference: self.reference.get(i).cloned(),
                exec: Execution::Parallel,
                ..PipelineConfig::new(input, &self.out_dir)
            })
            .collect())
    }
}

fn fail(err: &Error) -> ExitCode {
    let family = err.family();
    error!("{family:?}: {err}");
    eprintln!("rrimark: {} error: {err}", format!("{family:?}").to_lowercase());
    ExitCode::from(family.exit_code() as u8)
}

#[cfg(feature = "parallel")]
fn run_all(configs: &[PipelineConfig], jobs: usize) -> Vec<Result<PipelineOutput, Error>> {
    use rayon::prelude::*;
    if jobs <= 1 || configs.len() <= 1 {
        return configs.iter().map(run_pipeline).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| configs.par_iter().map(run_pipeline).collect()),
        Err(e) => {
            log::warn!("cannot start {jobs} workers ({e}); running sequentially");
            configs.iter().map(run_pipeline).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(configs: &[PipelineConfig], _jobs: usize) -> Vec<Result<PipelineOutput, Error>> {
    configs.iter().map(run_pipeline).collect()
}

fn run(args: &RunArgs) -> ExitCode {
    let configs = match args.configs() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let results = run_all(&configs, args.jobs);

    let mut rows = Vec::new();
    let mut reports = String::new();
    let mut first_error = None;
    for (config, result) in configs.iter().zip(results) {
        match result {
            Ok(out) => {
                info!("wrote {}", out.session_path.display());
                reports.push_str(&out.report);
                rows.push(out.summary);
            }
            Err(e) => {
                eprintln!("rrimark: {}:", config.input.display());
                let code = fail(&e);
                first_error.get_or_insert(code);
            }
        }
    }
    if !rows.is_empty() {
        print!("{}", summary_table(&rows));
    }
    if configs.len() > 1 {
        if let Some(path) = &args.report {
            if let Err(e) = std::fs::write(path, &reports) {
                return fail(&Error::Io {
                    path: path.clone(),
                    source: e,
                });
            }
        }
    }
    first_error.unwrap_or(ExitCode::SUCCESS)
}

fn convert(input: &Path, output: &Path) -> Result<(), Error> {
    let record = read_wfdb_record(input)?;
    let fs = record.sample_rate;
    if fs.fract() != 0.0 || fs < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "EDF needs an integer sample rate, record has {fs} Hz"
        )));
    }
    let (lo, hi) = record
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let pad = ((hi - lo) * 0.01).max(1e-3);
    let channel = EdfChannel::ecg(record.samples, fs as usize, (lo - pad, hi + pad), false);
    write_edf(output, &[channel], 1.0, false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match &cli.command {
        Some(Command::Regen { session, out_dir }) => match regenerate(session, out_dir) {
            Ok(out) => {
                println!(
                    "{}: {} valid beats, wrote {} and {}",
                    session.display(),
                    out.session.valid_beat_count(),
                    out.rtimes_path.display(),
                    out.bi_path.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Some(Command::Convert { input, output }) => match convert(input, output) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        None => run(&cli.run),
    }
}
