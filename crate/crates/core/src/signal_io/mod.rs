//! Input parsing (text, EDF, BDF, WFDB, RRI lists, reference annotations)
//! and output serialization (`.rtimes`, `.bi`).
//!
//! All times crossing this boundary are seconds from record start as `f64`.
//! Sample indices never appear in outputs.

mod annotations;
pub mod edf;
mod outputs;
mod record;
mod txt;
pub mod wfdb;

pub use annotations::{
    read_reference_annotations, read_reference_annotations_with_rate, AnnotationLabel,
    ReferenceAnnotation, ReferenceAnnotations,
};
pub use outputs::{
    format_bad_intervals, format_rtimes, read_bad_intervals, read_rtimes, write_bad_intervals,
    write_rtimes,
};
pub use record::{read_record, EcgRecord, FormatHint, SourceFormat};
pub use txt::{parse_rri_text, parse_txt};
