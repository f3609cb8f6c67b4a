use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stops::{stop_rank, SettingParam};
use super::{normalized, AuditReport};
use crate::exif::ExposureMode;
use crate::svg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histograms<C> {
    pub exposure_time: BTreeMap<String, C>,
    pub f_number: BTreeMap<String, C>,
    pub iso: BTreeMap<String, C>,
    pub ev: BTreeMap<i32, C>,
    pub year: BTreeMap<i32, C>,
    pub mode: BTreeMap<ExposureMode, C>,
}

/// Availability table plus all histograms, as written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub dataset: String,
    pub total: u64,
    pub downloaded: u64,
    pub with_exif: u64,
    pub downloaded_pct: f64,
    pub with_exif_pct: f64,
    pub histograms: Histograms<u64>,
    pub normalized: Histograms<f64>,
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl ReportSummary {
    pub fn new(dataset: &str, r: &AuditReport) -> Self {
        let setting = |p: SettingParam| r.setting_histograms.get(&p).cloned().unwrap_or_default();
        let histograms = Histograms {
            exposure_time: setting(SettingParam::ExposureTime),
            f_number: setting(SettingParam::FNumber),
            iso: setting(SettingParam::Iso),
            ev: r.ev_histogram.clone(),
            year: r.year_histogram.clone(),
            mode: r.mode_histogram.clone(),
        };
        let normalized = Histograms {
            exposure_time: normalized(&histograms.exposure_time),
            f_number: normalized(&histograms.f_number),
            iso: normalized(&histograms.iso),
            ev: normalized(&histograms.ev),
            year: normalized(&histograms.year),
            mode: normalized(&histograms.mode),
        };
        Self {
            dataset: dataset.to_string(),
            total: r.total,
            downloaded: r.downloaded,
            with_exif: r.with_exif,
            downloaded_pct: pct(r.downloaded, r.total),
            with_exif_pct: pct(r.with_exif, r.total),
            histograms,
            normalized,
        }
    }

    pub fn to_report(&self) -> AuditReport {
        let h = &self.histograms;
        AuditReport {
            total: self.total,
            downloaded: self.downloaded,
            with_exif: self.with_exif,
            setting_histograms: BTreeMap::from([
                (SettingParam::ExposureTime, h.exposure_time.clone()),
                (SettingParam::FNumber, h.f_number.clone()),
                (SettingParam::Iso, h.iso.clone()),
            ]),
            ev_histogram: h.ev.clone(),
            year_histogram: h.year.clone(),
            mode_histogram: h.mode.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

fn csv_rows<K: ToString>(header: &str, rows: impl IntoIterator<Item = (K, u64, f64)>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([header, "count", "fraction"])?;
    for (k, count, frac) in rows {
        w.write_record([k.to_string(), count.to_string(), frac.to_string()])?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

fn ordered_setting(param: SettingParam, counts: &BTreeMap<String, u64>) -> Vec<(String, u64, f64)> {
    let fractions = normalized(counts);
    let mut rows: Vec<_> = counts
        .iter()
        .map(|(k, &v)| (k.clone(), v, fractions[k]))
        .collect();
    rows.sort_by_key(|(k, _, _)| (stop_rank(param, k), k.clone()));
    rows
}

fn keyed<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> Vec<(K, u64, f64)> {
    let fractions = normalized(counts);
    counts
        .iter()
        .map(|(k, &v)| (k.clone(), v, fractions[k]))
        .collect()
}

/// Writes the requested artifacts into `out_dir` and returns their paths.
pub fn render_report(
    report: &AuditReport,
    dataset: &str,
    formats: &[ReportFormat],
    out_dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let summary = ReportSummary::new(dataset, report);
    let mut written = Vec::new();
    let mut write = |name: &str, bytes: &[u8]| -> io::Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };

    if formats.contains(&ReportFormat::Json) {
        write("report.json", summary.to_json().as_bytes())?;
    }

    let settings: Vec<(SettingParam, Vec<(String, u64, f64)>)> = SettingParam::ALL
        .iter()
        .map(|&p| {
            let counts = report.setting_histograms.get(&p).cloned().unwrap_or_default();
            (p, ordered_setting(p, &counts))
        })
        .collect();

    if formats.contains(&ReportFormat::Csv) {
        for (param, rows) in &settings {
            write(&format!("hist_{param}.csv"), &csv_rows("value", rows.clone())?)?;
        }
        write("ev_hist.csv", &csv_rows("ev_bin", keyed(&report.ev_histogram))?)?;
        write("modes.csv", &csv_rows("mode", keyed(&report.mode_histogram))?)?;
        write("years.csv", &csv_rows("year", keyed(&report.year_histogram))?)?;
    }

    if formats.contains(&ReportFormat::Svg) {
        for (param, rows) in &settings {
            let bars: Vec<(String, f64)> = rows.iter().map(|(k, _, f)| (k.clone(), *f)).collect();
            let chart = svg::bar_chart(
                &format!("{dataset}: {param}"),
                &format!("{param} (full stops, log2 axis)"),
                "fraction of images",
                &bars,
            );
            write(&format!("hist_{param}.svg"), chart.as_bytes())?;
        }
        let bars = |rows: Vec<(String, u64, f64)>| -> Vec<(String, f64)> {
            rows.into_iter().map(|(k, _, f)| (k, f)).collect()
        };
        let ev = keyed(&report.ev_histogram)
            .into_iter()
            .map(|(k, c, f)| (k.to_string(), c, f))
            .collect();
        write(
            "ev_hist.svg",
            svg::bar_chart(&format!("{dataset}: EV"), "EV bin", "fraction of images", &bars(ev)).as_bytes(),
        )?;
        let modes = keyed(&report.mode_histogram)
            .into_iter()
            .map(|(k, c, f)| (k.to_string(), c, f))
            .collect();
        write(
            "modes.svg",
            svg::bar_chart(&format!("{dataset}: exposure mode"), "mode", "fraction of images", &bars(modes))
                .as_bytes(),
        )?;
        let years = keyed(&report.year_histogram)
            .into_iter()
            .map(|(k, c, f)| (k.to_string(), c, f))
            .collect();
        write(
            "years.svg",
            svg::bar_chart(&format!("{dataset}: capture year"), "year", "fraction of images", &bars(years))
                .as_bytes(),
        )?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg];

    #[test]
    fn percentages() {
        let report = AuditReport {
            total: 10,
            downloaded: 8,
            with_exif: 3,
            ..AuditReport::default()
        };
        let s = ReportSummary::new("x", &report);
        assert_eq!(s.with_exif_pct, 30.0);
        assert_eq!(s.downloaded_pct, 80.0);
        assert!(s.to_json().contains("\"with_exif_pct\": 30.0"));
        assert_eq!(s.to_report(), report);
    }

    #[test]
    fn empty_report_renders() {
        let dir = tempfile::tempdir().unwrap();
        let files = render_report(&AuditReport::default(), "empty", &ALL, dir.path()).unwrap();
        assert_eq!(files.len(), 1 + 6 + 6);
        let json = fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: ReportSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.total, 0);
        assert_eq!(back.with_exif_pct, 0.0);
        let csv = fs::read_to_string(dir.path().join("ev_hist.csv")).unwrap();
        assert_eq!(csv, "ev_bin,count,fraction\n");
        for name in ["hist_exposure_time.svg", "modes.svg", "years.svg", "ev_hist.svg"] {
            assert!(fs::read_to_string(dir.path().join(name)).unwrap().contains("</svg>"));
        }
    }

    #[test]
    fn setting_csv_follows_stop_order() {
        let mut report = AuditReport::default();
        let iso = report.setting_histograms.get_mut(&SettingParam::Iso).unwrap();
        iso.insert("1600".into(), 1);
        iso.insert("200".into(), 3);
        iso.insert("other".into(), 1);
        let dir = tempfile::tempdir().unwrap();
        render_report(&report, "x", &[ReportFormat::Csv], dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("hist_iso.csv")).unwrap();
        let keys: Vec<_> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(keys, vec!["200", "1600", "other"]);
    }
}
