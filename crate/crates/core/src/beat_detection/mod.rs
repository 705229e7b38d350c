//! Beat identification: signal conditioning, QRS detection and the
//! energy-based post filter.

mod detect;
pub(crate) mod filter;

use serde::{Deserialize, Serialize};

pub use detect::{detect_qrs, post_filter, REFRACTORY_S};
pub use filter::{preprocess, FilteredSignal};

/// Display/processing state of a beat mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BeatClass {
    Included,
    Excluded,
    Adjusted,
    Interpolated,
    Removed,
    Training,
}

impl BeatClass {
    /// Beats that make it into the output RRI series.
    pub fn is_valid(self) -> bool {
        matches!(
            self,
            BeatClass::Included | BeatClass::Adjusted | BeatClass::Interpolated
        )
    }
}

/// Beat typing outcome (the BT1 to BT8 taxonomy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeatType {
    /// Short-long pair without a P-wave; adjusted.
    #[serde(rename = "BT1")]
    Bt1,
    /// PAC-like pattern with a P-wave; excluded.
    #[serde(rename = "BT2")]
    Bt2,
    /// Gradual increase with a P-wave; included.
    #[serde(rename = "BT3")]
    Bt3,
    /// Sudden increase past the physiological bound; excluded.
    #[serde(rename = "BT4")]
    Bt4,
    /// Gradual decrease with a P-wave; included.
    #[serde(rename = "BT5")]
    Bt5,
    /// Extra beat; removed.
    #[serde(rename = "BT6")]
    Bt6,
    /// Long interval split evenly; interpolated.
    #[serde(rename = "BT7")]
    Bt7,
    /// Short-long pair smoothed in the correction stage; adjusted.
    #[serde(rename = "BT8")]
    Bt8,
}

impl BeatType {
    /// The class a beat of this type ends up with.
    pub fn result_class(self) -> BeatClass {
        use BeatType::*;
        match self {
            Bt1 | Bt8 => BeatClass::Adjusted,
            Bt2 | Bt4 => BeatClass::Excluded,
            Bt3 | Bt5 => BeatClass::Included,
            Bt6 => BeatClass::Removed,
            Bt7 => BeatClass::Interpolated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Detector,
    Correction,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PWave {
    Yes,
    No,
    #[default]
    Unevaluated,
}

/// One QRS event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatMark {
    /// Seconds from record start.
    pub time: f64,
    pub class: BeatClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beat_type: Option<BeatType>,
    pub provenance: Provenance,
    #[serde(default)]
    pub pwave: PWave,
    /// Noise profile value (derivative variance around the beat).
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub noisy: bool,
}

impl BeatMark {
    pub fn detected(time: f64) -> Self {
        BeatMark {
            time,
            class: BeatClass::Included,
            beat_type: None,
            provenance: Provenance::Detector,
            pwave: PWave::Unevaluated,
            noise: 0.0,
            noisy: false,
        }
    }

    pub fn interpolated(time: f64) -> Self {
        BeatMark {
            class: BeatClass::Interpolated,
            beat_type: Some(BeatType::Bt7),
            provenance: Provenance::Correction,
            ..BeatMark::detected(time)
        }
    }
}

/// Detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Fraction of the way from the noise level to the signal level at which
    /// an energy peak counts as a QRS.
    pub qrs_threshold: f64,
    /// Beats scoring below this fraction of the running median energy are
    /// demoted by the post filter. 0 disables it.
    pub post_threshold: f64,
    pub amplifier: f64,
    pub invert: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            qrs_threshold: 0.25,
            post_threshold: 0.2,
            amplifier: 1.0,
            invert: false,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.amplifier > 0.0) {
            return Err(crate::Error::InvalidConfig("amplifier must be > 0".into()));
        }
        if !(self.qrs_threshold >= 0.0) || !(self.post_threshold >= 0.0) {
            return Err(crate::Error::InvalidConfig("thresholds must be >= 0".into()));
        }
        Ok(())
    }
}
