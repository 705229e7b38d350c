use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed label vocabulary for reference annotations: the irregularity
/// categories the marker is evaluated against, plus normal beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnotationLabel {
    Normal,
    ExtraBeat,
    MissedBeat,
    MisplacedBeat,
    NoisyBeat,
    VentricularFlutterWave,
    EndVentricularFlutter,
    IsolatedQrsArtifact,
    SignalQualityChange,
    RhythmChange,
    NonConductedPWave,
    PacedBeat,
    AtrialPremature,
    VentricularEscape,
    FusionPacedNormal,
    NodalPremature,
    LeftBundleBranchBlock,
    Unclassifiable,
    RightBundleBranchBlock,
    SupraventricularPremature,
    PrematureVentricular,
    UnidentifiedComplex,
}

impl AnnotationLabel {
    /// Maps an MIT-BIH annotation symbol. Symbols outside the vocabulary
    /// return `None`.
    pub fn from_mit_symbol(symbol: &str) -> Option<Self> {
        use AnnotationLabel::*;
        Some(match symbol {
            "N" => Normal,
            "L" => LeftBundleBranchBlock,
            "R" => RightBundleBranchBlock,
            "A" => AtrialPremature,
            "J" => NodalPremature,
            "S" => SupraventricularPremature,
            "V" => PrematureVentricular,
            "E" => VentricularEscape,
            "/" => PacedBeat,
            "f" => FusionPacedNormal,
            "Q" => Unclassifiable,
            "!" => VentricularFlutterWave,
            "]" => EndVentricularFlutter,
            "|" => IsolatedQrsArtifact,
            "~" => SignalQualityChange,
            "+" => RhythmChange,
            "x" => NonConductedPWave,
            "?" => UnidentifiedComplex,
            _ => return None,
        })
    }
}

/// MIT-format annotation type codes, indexed by code.
const MIT_CODES: [&str; 42] = [
    "", "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "", "|", "", "s",
    "T", "*", "D", "\"", "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]", "e", "n", "@",
    "x", "f", "(", ")", "r",
];

/// Symbols that denote a QRS complex.
const BEAT_SYMBOLS: &[&str] = &[
    "N", "L", "R", "B", "A", "a", "J", "S", "V", "r", "F", "e", "j", "n", "E", "/", "f", "Q", "?",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAnnotation {
    pub time: f64,
    pub label: AnnotationLabel,
    /// Original annotation symbol as found in the file.
    pub symbol: String,
}

impl ReferenceAnnotation {
    pub fn new(time: f64, symbol: &str) -> Self {
        let label = AnnotationLabel::from_mit_symbol(symbol).unwrap_or_else(|| {
            log::warn!("unknown annotation label `{symbol}` at {time:.3} s, using Unclassifiable");
            AnnotationLabel::Unclassifiable
        });
        ReferenceAnnotation {
            time,
            label,
            symbol: symbol.to_string(),
        }
    }

    pub fn is_beat(&self) -> bool {
        BEAT_SYMBOLS.contains(&self.symbol.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAnnotations {
    pub entries: Vec<ReferenceAnnotation>,
}

impl ReferenceAnnotations {
    /// Beat annotations only, in time order.
    pub fn beats(&self) -> Vec<&ReferenceAnnotation> {
        self.entries.iter().filter(|a| a.is_beat()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses a two-column `time label` text export.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut entries: Vec<ReferenceAnnotation> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut f = line.split_whitespace();
            let (Some(t), Some(label)) = (f.next(), f.next()) else {
                return Err(Error::MalformedAnnotation(format!(
                    "line {}: expected `time label`",
                    n + 1
                )));
            };
            let time: f64 = t.parse().map_err(|_| {
                Error::MalformedAnnotation(format!("line {}: bad time `{t}`", n + 1))
            })?;
            if let Some(prev) = entries.last() {
                if time < prev.time {
                    return Err(Error::MalformedAnnotation(format!(
                        "line {}: time {time} precedes {}",
                        n + 1,
                        prev.time
                    )));
                }
            }
            entries.push(ReferenceAnnotation::new(time, label));
        }
        Ok(ReferenceAnnotations { entries })
    }

    /// Decodes an MIT-format binary annotation file.
    pub fn parse_mit(bytes: &[u8], sample_rate: f64) -> Result<Self> {
        let mut entries = Vec::new();
        let mut sample: i64 = 0;
        let mut pos = 0usize;
        let word = |p: usize| -> Result<u16> {
            bytes
                .get(p..p + 2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .ok_or_else(|| Error::MalformedAnnotation(format!("truncated at byte {p}")))
        };
        while pos + 1 < bytes.len() {
            let w = word(pos)?;
            pos += 2;
            let code = (w >> 10) as usize;
            let value = (w & 0x3FF) as i64;
            match code {
                0 if value == 0 => break,
                59 => {
                    let hi = word(pos)? as i64;
                    let lo = word(pos + 2)? as i64;
                    pos += 4;
                    let skip = ((hi << 16) | lo) as i32 as i64;
                    sample += skip;
                }
                60..=62 => {}
                63 => {
                    pos += (value as usize).div_ceil(2) * 2;
                }
                _ => {
                    sample += value;
                    let symbol = MIT_CODES.get(code).copied().unwrap_or("");
                    if symbol.is_empty() {
                        return Err(Error::MalformedAnnotation(format!(
                            "unknown annotation code {code} at sample {sample}"
                        )));
                    }
                    entries.push(ReferenceAnnotation::new(sample as f64 / sample_rate, symbol));
                }
            }
        }
        Ok(ReferenceAnnotations { entries })
    }

    /// Encodes `(sample, symbol)` pairs in MIT format. Used to build fixtures.
    pub fn encode_mit(annotations: &[(u64, &str)]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut last = 0u64;
        for &(sample, symbol) in annotations {
            let code = MIT_CODES
                .iter()
                .position(|s| !s.is_empty() && *s == symbol)
                .unwrap_or(13) as u16;
            let delta = sample - last;
            if delta > 1023 {
                out.extend_from_slice(&((59u16) << 10).to_le_bytes());
                out.extend_from_slice(&(((delta >> 16) & 0xFFFF) as u16).to_le_bytes());
                out.extend_from_slice(&((delta & 0xFFFF) as u16).to_le_bytes());
                out.extend_from_slice(&(code << 10).to_le_bytes());
            } else {
                out.extend_from_slice(&((code << 10) | delta as u16).to_le_bytes());
            }
            last = sample;
        }
        out.extend_from_slice(&[0, 0]);
        out
    }
}

fn looks_binary(bytes: &[u8]) -> bool {
    bytes
        .iter()
        .take(512)
        .any(|&b| b == 0 || (b < 0x20 && !matches!(b, b'\n' | b'\r' | b'\t')))
}

/// Reads a reference annotation file: either a text `time label` export or
/// a binary MIT annotation file whose sample rate is taken from the
/// sibling `<record>.hea`.
pub fn read_reference_annotations(path: impl AsRef<Path>) -> Result<ReferenceAnnotations> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    if bytes.is_empty() {
        return Ok(ReferenceAnnotations::default());
    }
    if !looks_binary(&bytes) {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::MalformedAnnotation("text export is not UTF-8".into()))?;
        return ReferenceAnnotations::parse_text(&text);
    }
    let hea = path.with_extension("hea");
    let header_text = std::fs::read_to_string(&hea).map_err(|_| {
        Error::MalformedAnnotation(format!(
            "binary annotations need {} for the sample rate",
            hea.display()
        ))
    })?;
    let header = super::wfdb::parse_header(&header_text)?;
    ReferenceAnnotations::parse_mit(&bytes, header.sample_rate)
}

/// Like [`read_reference_annotations`] for binary files with a known rate.
pub fn read_reference_annotations_with_rate(
    path: impl AsRef<Path>,
    sample_rate: f64,
) -> Result<ReferenceAnnotations> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    if bytes.is_empty() {
        return Ok(ReferenceAnnotations::default());
    }
    if looks_binary(&bytes) {
        ReferenceAnnotations::parse_mit(&bytes, sample_rate)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::MalformedAnnotation("text export is not UTF-8".into()))?;
        ReferenceAnnotations::parse_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_export() {
        let a = ReferenceAnnotations::parse_text("0.214 N\n1.028 N").unwrap();
        assert_eq!(a.len(), 2);
        assert!(a.entries.iter().all(|e| e.label == AnnotationLabel::Normal));
        assert_eq!(a.entries[1].time, 1.028);
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.txt");
        std::fs::write(&p, "").unwrap();
        assert!(read_reference_annotations(&p).unwrap().is_empty());
    }

    #[test]
    fn unknown_label_becomes_unclassifiable() {
        let a = ReferenceAnnotations::parse_text("1.0 j\n2.0 zz\n").unwrap();
        assert_eq!(a.entries[0].label, AnnotationLabel::Unclassifiable);
        assert!(a.entries[0].is_beat());
        assert_eq!(a.entries[1].label, AnnotationLabel::Unclassifiable);
        assert!(!a.entries[1].is_beat());
    }

    #[test]
    fn decreasing_times_rejected() {
        assert!(matches!(
            ReferenceAnnotations::parse_text("2.0 N\n1.0 N\n"),
            Err(Error::MalformedAnnotation(_))
        ));
        assert!(ReferenceAnnotations::parse_text("2.0\n").is_err());
    }

    #[test]
    fn mit_binary_round_trip_with_skip_and_aux() {
        let anns = [(18u64, "+"), (77, "N"), (370, "N"), (5000, "V"), (5300, "A"), (70000, "~")];
        let mut bytes = ReferenceAnnotations::encode_mit(&anns);
        // splice an AUX record ("(N", 3 bytes padded to 4) after the first annotation
        let aux = [(63u16 << 10 | 3).to_le_bytes().to_vec(), b"(N\0".to_vec(), vec![0]].concat();
        bytes.splice(2..2, aux);
        let parsed = ReferenceAnnotations::parse_mit(&bytes, 360.0).unwrap();
        assert_eq!(parsed.len(), anns.len());
        for (e, (s, sym)) in parsed.entries.iter().zip(anns.iter()) {
            assert_eq!(e.symbol, *sym);
            assert!((e.time - *s as f64 / 360.0).abs() < 1e-12);
        }
        assert_eq!(parsed.beats().len(), 4);
        assert_eq!(parsed.entries[3].label, AnnotationLabel::PrematureVentricular);
    }

    #[test]
    fn binary_file_needs_header() {
        let dir = tempfile::tempdir().unwrap();
        let atr = dir.path().join("100.atr");
        std::fs::write(&atr, ReferenceAnnotations::encode_mit(&[(360, "N")])).unwrap();
        assert!(read_reference_annotations(&atr).is_err());
        std::fs::write(dir.path().join("100.hea"), "100 1 360 1000\n100.dat 212 200 11 1024 0 0 0 MLII\n").unwrap();
        let a = read_reference_annotations(&atr).unwrap();
        assert_eq!(a.entries[0].time, 1.0);
        let b = read_reference_annotations_with_rate(&atr, 180.0).unwrap();
        assert_eq!(b.entries[0].time, 2.0);
    }
}
