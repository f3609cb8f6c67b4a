//! Corpus capture-bias audits: ingestion, histogram aggregation, rendering.

mod fetch;
mod ingest;
mod render;
mod stops;

use std::collections::BTreeMap;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exif::{ExifRecord, ExposureMode};
use crate::exposure::{compute_ev, quantize_ev, CameraSettings};

pub use fetch::{fetch_remote, FetchConfig, FetchError, Fetched};
pub use ingest::{ingest, DatasetDescriptor, IngestError, IngestOutput, SourceDescriptor, SourceKind};
pub use render::{render_report, ReportFormat, ReportSummary};
pub use stops::{f_number_label, iso_label, shutter_label, stop_rank, SettingParam, OTHER};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub dataset: String,
    pub image_id: String,
    pub exif: ExifRecord,
    /// Present iff shutter, f-number and ISO are all present.
    pub ev_bin: Option<i32>,
    pub mode: ExposureMode,
    pub year: Option<i32>,
    /// False when the image or its metadata could not be obtained.
    pub fetched: bool,
}

impl AuditRecord {
    pub fn new(dataset: &str, image_id: &str, exif: ExifRecord, fetched: bool) -> Self {
        let ev_bin = match (exif.exposure_time, exif.f_number, exif.iso) {
            (Some(t), Some(f), Some(iso)) => CameraSettings::new(t, f, iso)
                .ok()
                .map(|s| quantize_ev(compute_ev(&s))),
            _ => None,
        };
        Self {
            dataset: dataset.to_string(),
            image_id: image_id.to_string(),
            mode: exif.mode(),
            year: exif.capture_datetime.map(|d| d.year()),
            ev_bin,
            exif,
            fetched,
        }
    }
}

/// Mergeable capture-bias statistics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total: u64,
    pub downloaded: u64,
    /// Records with all three of shutter, f-number and ISO.
    pub with_exif: u64,
    pub setting_histograms: BTreeMap<SettingParam, BTreeMap<String, u64>>,
    pub ev_histogram: BTreeMap<i32, u64>,
    pub year_histogram: BTreeMap<i32, u64>,
    pub mode_histogram: BTreeMap<ExposureMode, u64>,
}

impl Default for AuditReport {
    fn default() -> Self {
        Self {
            total: 0,
            downloaded: 0,
            with_exif: 0,
            setting_histograms: SettingParam::ALL
                .iter()
                .map(|&p| (p, BTreeMap::new()))
                .collect(),
            ev_histogram: BTreeMap::new(),
            year_histogram: BTreeMap::new(),
            mode_histogram: BTreeMap::new(),
        }
    }
}

fn bump<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, by: u64) {
    *map.entry(key).or_insert(0) += by;
}

fn merge_counts<K: Ord + Clone>(into: &mut BTreeMap<K, u64>, from: &BTreeMap<K, u64>) {
    for (k, v) in from {
        bump(into, k.clone(), *v);
    }
}

impl AuditReport {
    pub fn add(&mut self, r: &AuditRecord) {
        self.total += 1;
        self.downloaded += u64::from(r.fetched);
        if r.exif.has_settings() {
            self.with_exif += 1;
        }
        let hist = &mut self.setting_histograms;
        if let Some(t) = r.exif.exposure_time {
            bump(hist.get_mut(&SettingParam::ExposureTime).unwrap(), shutter_label(t.value()), 1);
        }
        if let Some(f) = r.exif.f_number {
            bump(hist.get_mut(&SettingParam::FNumber).unwrap(), f_number_label(f.value()), 1);
        }
        if let Some(iso) = r.exif.iso {
            bump(hist.get_mut(&SettingParam::Iso).unwrap(), iso_label(iso as f64), 1);
        }
        if let Some(bin) = r.ev_bin {
            bump(&mut self.ev_histogram, bin, 1);
        }
        if let Some(year) = r.year {
            bump(&mut self.year_histogram, year, 1);
        }
        bump(&mut self.mode_histogram, r.mode, 1);
    }

    pub fn merge(mut self, other: &AuditReport) -> AuditReport {
        self.total += other.total;
        self.downloaded += other.downloaded;
        self.with_exif += other.with_exif;
        for (param, counts) in &other.setting_histograms {
            merge_counts(self.setting_histograms.entry(*param).or_default(), counts);
        }
        merge_counts(&mut self.ev_histogram, &other.ev_histogram);
        merge_counts(&mut self.year_histogram, &other.year_histogram);
        merge_counts(&mut self.mode_histogram, &other.mode_histogram);
        self
    }

    pub fn mode_fraction(&self, mode: ExposureMode) -> f64 {
        let n: u64 = self.mode_histogram.values().sum();
        if n == 0 {
            0.0
        } else {
            self.mode_histogram.get(&mode).copied().unwrap_or(0) as f64 / n as f64
        }
    }
}

/// Counts divided by their population; empty when the population is zero.
pub fn normalized<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let n: u64 = counts.values().sum();
    if n == 0 {
        return BTreeMap::new();
    }
    counts
        .iter()
        .map(|(k, &v)| (k.clone(), v as f64 / n as f64))
        .collect()
}

/// Single-pass aggregation.
pub fn aggregate<'a>(records: impl IntoIterator<Item = &'a AuditRecord>) -> AuditReport {
    let mut report = AuditReport::default();
    for r in records {
        report.add(r);
    }
    report
}

/// Per-worker partial reports merged at the end.
pub fn aggregate_parallel(records: &[AuditRecord]) -> AuditReport {
    records
        .par_iter()
        .fold(AuditReport::default, |mut acc, r| {
            acc.add(r);
            acc
        })
        .reduce(AuditReport::default, |a, b| a.merge(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ExifRational;
    use proptest::prelude::*;

    fn rec(iso: Option<u32>, program: Option<&str>, complete: bool) -> AuditRecord {
        let exif = ExifRecord {
            exposure_time: complete.then(|| ExifRational::new(1, 125).unwrap()),
            f_number: complete.then(|| ExifRational::integer(8)),
            iso,
            exposure_program: program.map(str::to_string),
            has_exif: true,
            ..ExifRecord::default()
        };
        AuditRecord::new("d", "i", exif, true)
    }

    #[test]
    fn iso_histogram() {
        let records: Vec<_> = (0..4).map(|_| rec(Some(100), None, false)).collect();
        let report = aggregate(&records);
        let iso = &report.setting_histograms[&SettingParam::Iso];
        assert_eq!(iso, &BTreeMap::from([("100".to_string(), 4)]));
        assert_eq!(normalized(iso), BTreeMap::from([("100".to_string(), 1.0)]));
        assert_eq!(report.with_exif, 0);
        assert!(report.ev_histogram.is_empty());
    }

    #[test]
    fn ev_bins_need_all_three_settings() {
        assert_eq!(rec(Some(100), None, true).ev_bin, Some(13));
        assert_eq!(rec(None, None, true).ev_bin, None);
    }

    #[test]
    fn ev_histogram_counts() {
        let mut records = Vec::new();
        for (t, iso) in [("1/250", 400), ("1/125", 400), ("1/250", 800), ("1/125", 200)] {
            let exif = ExifRecord {
                exposure_time: Some(t.parse().unwrap()),
                f_number: Some(ExifRational::integer(8)),
                iso: Some(iso),
                has_exif: true,
                ..ExifRecord::default()
            };
            records.push(AuditRecord::new("d", t, exif, true));
        }
        // 1/250 f8 400 -> 11.97; 1/125 f8 400 -> 10.97; 1/250 f8 800 -> 10.97; 1/125 f8 200 -> 11.97
        let bins: Vec<_> = records.iter().map(|r| r.ev_bin.unwrap()).collect();
        assert_eq!(bins, vec![12, 11, 11, 12]);
        let report = aggregate(&records);
        assert_eq!(report.ev_histogram, BTreeMap::from([(11, 2), (12, 2)]));
    }

    #[test]
    fn mode_fractions() {
        let mut records = Vec::new();
        records.extend((0..72).map(|_| rec(None, Some("Aperture-priority AE"), false)));
        records.extend((0..26).map(|_| rec(None, Some("Manual"), false)));
        records.extend((0..2).map(|_| rec(None, None, false)));
        let report = aggregate(&records);
        assert_eq!(report.mode_fraction(ExposureMode::Auto), 0.72);
        assert_eq!(report.mode_fraction(ExposureMode::Manual), 0.26);
        assert_eq!(report.mode_fraction(ExposureMode::Unknown), 0.02);
    }

    #[test]
    fn years_skip_missing_dates() {
        let mut with_date = rec(None, None, false);
        with_date.exif.capture_datetime = crate::exif::parse_capture_datetime("2007:05:05 10:00:00");
        let with_date = AuditRecord::new("d", "x", with_date.exif, true);
        let report = aggregate(&[with_date, rec(None, None, false)]);
        assert_eq!(report.year_histogram, BTreeMap::from([(2007, 1)]));
    }

    fn arb_record() -> impl Strategy<Value = AuditRecord> {
        (
            prop::option::of(prop::sample::select(vec!["1/60", "1/125", "1/2000", "4"])),
            prop::option::of(prop::sample::select(vec!["2.8", "5.6", "11"])),
            prop::option::of(prop::sample::select(vec![100u32, 400, 3200])),
            prop::option::of(prop::sample::select(vec!["Manual", "Portrait", "Bulb"])),
            prop::option::of(2000i32..2024),
            any::<bool>(),
        )
            .prop_map(|(t, f, iso, program, year, fetched)| {
                let exif = ExifRecord {
                    exposure_time: t.map(|t| t.parse().unwrap()),
                    f_number: f.map(|f| f.parse().unwrap()),
                    iso,
                    exposure_program: program.map(str::to_string),
                    capture_datetime: year.and_then(|y| {
                        chrono::NaiveDate::from_ymd_opt(y, 1, 1)?.and_hms_opt(0, 0, 0)
                    }),
                    has_exif: true,
                    ..ExifRecord::default()
                };
                // Failed fetches never carry metadata.
                let exif = if fetched { exif } else { ExifRecord::empty() };
                AuditRecord::new("d", "i", exif, fetched)
            })
    }

    proptest! {
        #[test]
        fn merge_law(records in prop::collection::vec(arb_record(), 0..40), split in 0usize..40) {
            let split = split.min(records.len());
            let (a, b) = records.split_at(split);
            let merged = aggregate(a).merge(&aggregate(b));
            prop_assert_eq!(&merged, &aggregate(&records));
            prop_assert_eq!(&aggregate(b).merge(&aggregate(a)), &merged);
            prop_assert_eq!(&aggregate_parallel(&records), &merged);
        }

        #[test]
        fn conservation(records in prop::collection::vec(arb_record(), 1..40)) {
            let report = aggregate(&records);
            prop_assert_eq!(report.mode_histogram.values().sum::<u64>(), records.len() as u64);
            prop_assert!(report.with_exif <= report.downloaded);
            prop_assert!(report.downloaded <= report.total);
            prop_assert_eq!(report.ev_histogram.values().sum::<u64>(), report.with_exif);
            for counts in report.setting_histograms.values() {
                let n = normalized(counts);
                if !n.is_empty() {
                    prop_assert!((n.values().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
            }
        }
    }
}
