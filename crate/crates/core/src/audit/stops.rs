use std::fmt;

use serde::{Deserialize, Serialize};

pub const OTHER: &str = "other";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingParam {
    ExposureTime,
    FNumber,
    Iso,
}

impl SettingParam {
    pub const ALL: [SettingParam; 3] = [
        SettingParam::ExposureTime,
        SettingParam::FNumber,
        SettingParam::Iso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SettingParam::ExposureTime => "exposure_time",
            SettingParam::FNumber => "f_number",
            SettingParam::Iso => "iso",
        }
    }

    fn stops(self) -> &'static [(&'static str, f64)] {
        match self {
            SettingParam::ExposureTime => SHUTTER_STOPS,
            SettingParam::FNumber => F_STOPS,
            SettingParam::Iso => ISO_STOPS,
        }
    }
}

impl fmt::Display for SettingParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SHUTTER_STOPS: &[(&str, f64)] = &[
    ("1/8000", 1.0 / 8000.0),
    ("1/4000", 1.0 / 4000.0),
    ("1/2000", 1.0 / 2000.0),
    ("1/1000", 1.0 / 1000.0),
    ("1/500", 1.0 / 500.0),
    ("1/250", 1.0 / 250.0),
    ("1/125", 1.0 / 125.0),
    ("1/60", 1.0 / 60.0),
    ("1/30", 1.0 / 30.0),
    ("1/15", 1.0 / 15.0),
    ("1/8", 1.0 / 8.0),
    ("1/4", 1.0 / 4.0),
    ("1/2", 0.5),
    ("1", 1.0),
    ("2", 2.0),
    ("4", 4.0),
    ("8", 8.0),
    ("15", 15.0),
    ("30", 30.0),
];

const F_STOPS: &[(&str, f64)] = &[
    ("1", 1.0),
    ("1.4", 1.4),
    ("2", 2.0),
    ("2.8", 2.8),
    ("4", 4.0),
    ("5.6", 5.6),
    ("8", 8.0),
    ("11", 11.0),
    ("16", 16.0),
    ("22", 22.0),
    ("32", 32.0),
    ("45", 45.0),
    ("64", 64.0),
];

const ISO_STOPS: &[(&str, f64)] = &[
    ("25", 25.0),
    ("50", 50.0),
    ("100", 100.0),
    ("200", 200.0),
    ("400", 400.0),
    ("800", 800.0),
    ("1600", 1600.0),
    ("3200", 3200.0),
    ("6400", 6400.0),
    ("12800", 12800.0),
    ("25600", 25600.0),
    ("51200", 51200.0),
    ("102400", 102400.0),
];

/// Light-ratio distance in stops between two values of a parameter.
fn stop_distance(param: SettingParam, a: f64, b: f64) -> f64 {
    let d = (a / b).log2().abs();
    match param {
        // f-number enters exposure squared.
        SettingParam::FNumber => 2.0 * d,
        _ => d,
    }
}

/// Snaps a raw value to the nearest full-stop label, or [`OTHER`] when it
/// lies more than half a stop outside the table.
pub fn stop_label(param: SettingParam, value: f64) -> String {
    let stops = param.stops();
    if !(value > 0.0 && value.is_finite()) {
        return OTHER.to_string();
    }
    let (label, nominal) = stops
        .iter()
        .min_by(|a, b| {
            stop_distance(param, value, a.1).total_cmp(&stop_distance(param, value, b.1))
        })
        .expect("stop tables are non-empty");
    if stop_distance(param, value, *nominal) > 0.5 {
        OTHER.to_string()
    } else {
        label.to_string()
    }
}

pub fn shutter_label(seconds: f64) -> String {
    stop_label(SettingParam::ExposureTime, seconds)
}

pub fn f_number_label(f: f64) -> String {
    stop_label(SettingParam::FNumber, f)
}

pub fn iso_label(iso: f64) -> String {
    stop_label(SettingParam::Iso, iso)
}

/// Sort key placing labels in ascending stop order and `other` last.
pub fn stop_rank(param: SettingParam, label: &str) -> usize {
    param
        .stops()
        .iter()
        .position(|(l, _)| *l == label)
        .unwrap_or(usize::MAX)
}
