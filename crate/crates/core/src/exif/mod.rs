//! Exif capture metadata: parsing, fixture emission and corpus scanning.

mod emit;
mod parse;
mod scan;

use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::ExifRational;

pub use emit::{emit_exif, emit_tiff, EmitError};
pub use parse::{parse_exif, Malformed, Parsed};
pub use scan::{read_manifest, scan_corpus, ManifestRow, ScanError, ScanItem, ScanOutput, ScanSource};
pub(crate) use scan::{record_from_bytes, resolve_local_row};

pub const TAG_MAKE: u16 = 0x010F;
pub const TAG_MODEL: u16 = 0x0110;
pub const TAG_EXPOSURE_TIME: u16 = 0x829A;
pub const TAG_F_NUMBER: u16 = 0x829D;
pub const TAG_EXIF_IFD: u16 = 0x8769;
pub const TAG_EXPOSURE_PROGRAM: u16 = 0x8822;
pub const TAG_ISO_SPEED_RATINGS: u16 = 0x8827;
pub const TAG_PHOTOGRAPHIC_SENSITIVITY: u16 = 0x8832;
pub const TAG_DATETIME_ORIGINAL: u16 = 0x9003;
pub const TAG_EXPOSURE_MODE: u16 = 0xA402;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Big,
    Little,
}

/// Capture metadata for one image.
///
/// Text fields are stored trimmed and non-empty; numeric fields are strictly
/// positive. A record with `has_exif == false` carries no optional fields.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExifRecord {
    pub exposure_time: Option<ExifRational>,
    pub f_number: Option<ExifRational>,
    pub iso: Option<u32>,
    pub exposure_program: Option<String>,
    #[serde(with = "datetime_text")]
    pub capture_datetime: Option<NaiveDateTime>,
    pub make: Option<String>,
    pub model: Option<String>,
    pub byte_order: Option<ByteOrder>,
    pub has_exif: bool,
}

impl ExifRecord {
    pub fn empty() -> Self {
        Self::default()
    }

    /// True when shutter, aperture and ISO are all present.
    pub fn has_settings(&self) -> bool {
        self.exposure_time.is_some() && self.f_number.is_some() && self.iso.is_some()
    }

    pub fn mode(&self) -> ExposureMode {
        classify_exposure_mode(self.exposure_program.as_deref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExposureMode {
    Auto,
    Manual,
    Unknown,
}

impl fmt::Display for ExposureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExposureMode::Auto => "Auto",
            ExposureMode::Manual => "Manual",
            ExposureMode::Unknown => "Unknown",
        })
    }
}

const AUTO_PROGRAMS: &[&str] = &[
    "Auto",
    "Auto exposure",
    "Aperture-priority AE",
    "Auto bracket",
    "Creative (Slow speed)",
    "Shutter speed priority AE",
    "Landscape",
    "Portrait",
    "Action (High speed)",
    "Normal program",
];

const MANUAL_PROGRAMS: &[&str] = &["Manual", "Manual exposure"];

/// Maps an exposure-program tag value onto the auto/manual taxonomy.
/// Matching is case-sensitive on the trimmed text.
pub fn classify_exposure_mode(program: Option<&str>) -> ExposureMode {
    let Some(text) = program.map(str::trim) else {
        return ExposureMode::Unknown;
    };
    if AUTO_PROGRAMS.contains(&text) {
        ExposureMode::Auto
    } else if MANUAL_PROGRAMS.contains(&text) {
        ExposureMode::Manual
    } else {
        ExposureMode::Unknown
    }
}

/// Text for the numeric ExposureProgram (0x8822) values.
pub fn exposure_program_text(code: u16) -> Option<&'static str> {
    Some(match code {
        0 => "Not defined",
        1 => "Manual",
        2 => "Normal program",
        3 => "Aperture-priority AE",
        4 => "Shutter speed priority AE",
        5 => "Creative (Slow speed)",
        6 => "Action (High speed)",
        7 => "Portrait",
        8 => "Landscape",
        9 => "Bulb",
        _ => return None,
    })
}

pub fn exposure_program_code(text: &str) -> Option<u16> {
    (0..=9).find(|&c| exposure_program_text(c) == Some(text))
}

/// Text for the numeric ExposureMode (0xA402) values.
pub fn exposure_mode_text(code: u16) -> Option<&'static str> {
    Some(match code {
        0 => "Auto",
        1 => "Manual",
        2 => "Auto bracket",
        _ => return None,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("not a JPEG or TIFF stream")]
pub struct NotAnImage;

/// Accepts `YYYY:MM:DD HH:MM:SS` and ISO-like `YYYY-MM-DD...` forms.
pub fn parse_capture_datetime(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim().trim_end_matches('\0').trim();
    if let Ok(dt) = NaiveDateTime::parse_from_str(text, "%Y:%m:%d %H:%M:%S") {
        return Some(dt);
    }
    let head = text.get(..10)?;
    if head.as_bytes().get(4) != Some(&b'-') {
        return None;
    }
    let date = NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()?;
    let rest = &text[10..];
    if let Some(time) = rest.strip_prefix(['T', ' ']) {
        let time = time.get(..8).unwrap_or(time);
        if let Ok(t) = chrono::NaiveTime::parse_from_str(time, "%H:%M:%S") {
            return Some(date.and_time(t));
        }
    }
    date.and_hms_opt(0, 0, 0)
}

pub fn format_capture_datetime(dt: &NaiveDateTime) -> String {
    dt.format("%Y:%m:%d %H:%M:%S").to_string()
}

mod datetime_text {
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<NaiveDateTime>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(dt) => s.serialize_str(&super::format_capture_datetime(dt)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDateTime>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        Ok(text.as_deref().and_then(super::parse_capture_datetime))
    }
}
