//! Exposure-value arithmetic and sweep grids.
//!
//! EV here follows the ISO-100 referenced definition
//! `log2(N^2 / t) - log2(S / 100)`: a larger EV means less light reaches the
//! sensor for a given scene. Per-lux anchors turn quantized EVs into
//! offsets where 0 is the well-exposed bin, negative is under-exposed and
//! positive is over-exposed.

use std::collections::{BTreeMap, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_decimal, ExifRational};

#[derive(Debug, Error, PartialEq)]
pub enum ExposureError {
    #[error("no EV anchor configured for {0} lux")]
    UnknownLux(f64),
    #[error("duplicate value {value} in {list} list")]
    DuplicateValue { list: &'static str, value: String },
    #[error("{0} list is empty")]
    EmptyList(&'static str),
    #[error("{list} list is not in ascending order at {value}")]
    NotOrdered { list: &'static str, value: String },
    #[error("invalid camera setting: {0}")]
    InvalidSetting(&'static str),
    #[error("invalid grid file: {0}")]
    GridFile(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CameraSettings {
    pub exposure_time: ExifRational,
    pub f_number: ExifRational,
    pub iso: u32,
}

impl CameraSettings {
    pub fn new(
        exposure_time: ExifRational,
        f_number: ExifRational,
        iso: u32,
    ) -> Result<Self, ExposureError> {
        if !exposure_time.is_positive() {
            return Err(ExposureError::InvalidSetting("exposure time must be positive"));
        }
        if !f_number.is_positive() {
            return Err(ExposureError::InvalidSetting("f-number must be positive"));
        }
        if iso == 0 {
            return Err(ExposureError::InvalidSetting("iso must be positive"));
        }
        Ok(Self {
            exposure_time,
            f_number,
            iso,
        })
    }

    /// Parses camera-style strings, e.g. `("1/125", "5.6", 200)`.
    pub fn parse(shutter: &str, f_number: &str, iso: u32) -> Result<Self, ExposureError> {
        let t = shutter
            .parse()
            .map_err(|_| ExposureError::InvalidSetting("unparseable shutter speed"))?;
        let f = f_number
            .parse()
            .map_err(|_| ExposureError::InvalidSetting("unparseable f-number"))?;
        Self::new(t, f, iso)
    }
}

/// EV from plain numeric values.
pub fn ev_from_values(exposure_time_s: f64, f_number: f64, iso: f64) -> f64 {
    (f_number * f_number / exposure_time_s).log2() - (iso / 100.0).log2()
}

pub fn compute_ev(s: &CameraSettings) -> f64 {
    ev_from_values(s.exposure_time.value(), s.f_number.value(), s.iso as f64)
}

/// Nearest integer, ties away from zero.
pub fn quantize_ev(ev: f64) -> i32 {
    ev.round() as i32
}

/// Per-illuminance EV anchors: the EV bin that counts as well exposed.
#[derive(Clone, Debug, PartialEq)]
pub struct LuxAnchors {
    anchors: Vec<(f64, i32)>,
}

impl Default for LuxAnchors {
    /// 1000 lux anchors at EV 11, 10 lux at EV 5.
    fn default() -> Self {
        Self {
            anchors: vec![(10.0, 5), (1000.0, 11)],
        }
    }
}

impl LuxAnchors {
    pub fn empty() -> Self {
        Self {
            anchors: Vec::new(),
        }
    }

    pub fn insert(&mut self, lux: f64, anchor_ev: i32) {
        match self.position(lux) {
            Some(i) => self.anchors[i].1 = anchor_ev,
            None => {
                self.anchors.push((lux, anchor_ev));
                self.anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
    }

    /// Anchors a lux level on the frame the camera picked in auto mode.
    pub fn insert_from_auto(&mut self, lux: f64, auto_frame: &CameraSettings) {
        self.insert(lux, quantize_ev(compute_ev(auto_frame)));
    }

    fn position(&self, lux: f64) -> Option<usize> {
        self.anchors
            .iter()
            .position(|(l, _)| (l - lux).abs() <= 1e-9 * l.abs().max(1.0))
    }

    pub fn anchor(&self, lux: f64) -> Option<i32> {
        self.position(lux).map(|i| self.anchors[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, i32)> + '_ {
        self.anchors.iter().copied()
    }

    pub fn to_map(&self) -> BTreeMap<String, i32> {
        self.anchors
            .iter()
            .map(|&(lux, ev)| (format_decimal(lux), ev))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, i32>) -> Result<Self, ExposureError> {
        let mut anchors = Self::empty();
        for (lux, ev) in map {
            let value: f64 = lux
                .trim()
                .parse()
                .map_err(|_| ExposureError::GridFile(format!("bad lux key {lux:?}")))?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExposureError::GridFile(format!("lux {lux} must be positive")));
            }
            anchors.insert(value, *ev);
        }
        Ok(anchors)
    }
}

/// Re-indexes an EV bin against the anchor for `lux`.
pub fn ev_offset(ev_bin: i32, lux: f64, anchors: &LuxAnchors) -> Result<i32, ExposureError> {
    anchors
        .anchor(lux)
        .map(|anchor| anchor - ev_bin)
        .ok_or(ExposureError::UnknownLux(lux))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExposureBin {
    pub lux: f64,
    pub ev: f64,
    pub ev_bin: i32,
    pub ev_offset: i32,
}

impl ExposureBin {
    pub fn of(s: &CameraSettings, lux: f64, anchors: &LuxAnchors) -> Result<Self, ExposureError> {
        let ev = compute_ev(s);
        let ev_bin = quantize_ev(ev);
        Ok(Self {
            lux,
            ev,
            ev_bin,
            ev_offset: ev_offset(ev_bin, lux, anchors)?,
        })
    }
}

/// Settings sharing a key received the same exposure under the same light.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EquivalenceKey {
    pub lux: f64,
    pub ev_offset: i32,
}

impl PartialEq for EquivalenceKey {
    fn eq(&self, other: &Self) -> bool {
        self.lux.to_bits() == other.lux.to_bits() && self.ev_offset == other.ev_offset
    }
}

impl Eq for EquivalenceKey {}

impl Hash for EquivalenceKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.lux.to_bits().hash(state);
        self.ev_offset.hash(state);
    }
}

pub fn equivalence_key(
    s: &CameraSettings,
    lux: f64,
    anchors: &LuxAnchors,
) -> Result<EquivalenceKey, ExposureError> {
    let bin = ExposureBin::of(s, lux, anchors)?;
    Ok(EquivalenceKey {
        lux,
        ev_offset: bin.ev_offset,
    })
}

/// Full-factorial camera grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub shutter: Vec<ExifRational>,
    pub iso: Vec<u32>,
    pub f_number: Vec<ExifRational>,
    pub combos: Vec<CameraSettings>,
}

fn check_list<T: Copy + Eq + Hash + ToString>(
    name: &'static str,
    values: &[T],
    key: impl Fn(&T) -> f64,
) -> Result<(), ExposureError> {
    if values.is_empty() {
        return Err(ExposureError::EmptyList(name));
    }
    let mut seen = HashSet::new();
    for v in values {
        if !seen.insert(*v) {
            return Err(ExposureError::DuplicateValue {
                list: name,
                value: v.to_string(),
            });
        }
    }
    for w in values.windows(2) {
        let (a, b) = (key(&w[0]), key(&w[1]));
        if a == b {
            return Err(ExposureError::DuplicateValue {
                list: name,
                value: w[1].to_string(),
            });
        }
        if a > b {
            return Err(ExposureError::NotOrdered {
                list: name,
                value: w[1].to_string(),
            });
        }
    }
    Ok(())
}

impl SweepGrid {
    /// Cartesian product, shutter-major, then ISO, then f-number.
    pub fn build(
        shutter: Vec<ExifRational>,
        iso: Vec<u32>,
        f_number: Vec<ExifRational>,
    ) -> Result<Self, ExposureError> {
        check_list("shutter", &shutter, ExifRational::value)?;
        check_list("iso", &iso, |&i| i as f64)?;
        check_list("fnumber", &f_number, ExifRational::value)?;
        let mut combos = Vec::with_capacity(shutter.len() * iso.len() * f_number.len());
        for &t in &shutter {
            for &i in &iso {
                for &f in &f_number {
                    combos.push(CameraSettings::new(t, f, i)?);
                }
            }
        }
        Ok(Self {
            shutter,
            iso,
            f_number,
            combos,
        })
    }

    /// The 18 x 7 x 5 one-stop grid of the SNAP capture rig.
    pub fn snap() -> Self {
        let file = GridFile::snap();
        file.grid().expect("built-in grid is valid")
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }
}

/// On-disk grid definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub shutter: Vec<ExifRational>,
    pub iso: Vec<u32>,
    pub fnumber: Vec<ExifRational>,
    #[serde(default)]
    pub lux_anchors: BTreeMap<String, i32>,
}

impl GridFile {
    pub fn snap() -> Self {
        let shutter = [
            "1/4000", "1/2000", "1/1000", "1/500", "1/250", "1/125", "1/60", "1/30", "1/15",
            "1/8", "1/4", "0.5", "1", "2", "4", "8", "15", "30",
        ];
        let fnumber = ["5.6", "8", "11", "16", "22"];
        Self {
            shutter: shutter.iter().map(|s| s.parse().unwrap()).collect(),
            iso: vec![100, 200, 400, 800, 1600, 3200, 6400],
            fnumber: fnumber.iter().map(|s| s.parse().unwrap()).collect(),
            lux_anchors: LuxAnchors::default().to_map(),
        }
    }

    pub fn grid(&self) -> Result<SweepGrid, ExposureError> {
        SweepGrid::build(self.shutter.clone(), self.iso.clone(), self.fnumber.clone())
    }

    /// Configured anchors, or the defaults when the file has none.
    pub fn anchors(&self) -> Result<LuxAnchors, ExposureError> {
        if self.lux_anchors.is_empty() {
            Ok(LuxAnchors::default())
        } else {
            LuxAnchors::from_map(&self.lux_anchors)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExposureError> {
        serde_json::from_str(text).map_err(|e| ExposureError::GridFile(e.to_string()))
    }
}
