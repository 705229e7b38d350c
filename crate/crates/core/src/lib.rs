//! Heartbeat marking and RR-interval artifact correction for single-lead
//! ambulatory ECG.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Beat identification** ([`beat_detection`]): band-pass conditioning,
//!    an adaptive-threshold QRS detector and an energy-based post filter.
//! 2. **Irregularity detection** ([`noise_profile`], [`irregularity`]):
//!    per-beat derivative-variance noise profiles, regional RRI statistics,
//!    outlier flags and P-wave based beat typing (BT1 to BT5).
//! 3. **Correction** ([`correction`]): extra-beat removal (BT6), interpolation
//!    of long intervals (BT7), short-long smoothing (BT8), correction loops,
//!    excluded-region marking and spectral-epoch counting.
//!
//! [`pipeline`] strings the stages together, [`signal_io`] reads records and
//! writes the `.rtimes` / `.bi` / session artifacts, and [`validation`] scores
//! results against reference annotations.
//!
//! Per-beat work inside a record (noise profiles, P-wave searches) runs on
//! rayon when the `parallel` feature is enabled; see [`exec::Execution`].

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beat_detection;
pub mod correction;
pub mod error;
pub mod exec;
pub mod irregularity;
pub mod noise_profile;
pub mod pipeline;
pub mod session;
pub mod signal_io;
pub mod synth;
pub mod validation;

pub use beat_detection::{BeatClass, BeatMark, BeatType, DetectorParams, PWave, Provenance};
pub use correction::{CorrectionParams, Region, RegionReason};
pub use error::{Error, Result};
pub use exec::Execution;
pub use irregularity::{IrregularityParams, RriSeries};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use session::Session;
pub use signal_io::{EcgRecord, SourceFormat};
