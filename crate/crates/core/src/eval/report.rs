use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    grouped, offset_curves, parameter_sensitivity, response_length_stats, DetectionResult, ImageScore,
    OlrpResult, PsResult, QuestionId, Task, Top1Result, VqaResult,
};
use crate::svg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub mean: f64,
    pub n: usize,
}

/// Mean over all images; min and max over the per-offset bin means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Summary {
    fn of(values: &[f64], bins: &BTreeMap<i32, BinStat>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let means = bins.values().map(|b| b.mean);
        Some(Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: means.clone().fold(f64::INFINITY, f64::min),
            max: means.fold(f64::NEG_INFINITY, f64::max),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub top1: Summary,
    pub by_offset: BTreeMap<i32, BinStat>,
    pub ps: PsResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlrpBin {
    #[serde(flatten)]
    pub olrp: OlrpResult,
    pub n_images: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(flatten)]
    pub overall: OlrpResult,
    pub ap: Option<f64>,
    pub by_offset: BTreeMap<i32, OlrpBin>,
    /// Over per-image oLRP.
    pub ps: PsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqaQuestionReport {
    pub soft: Summary,
    pub hard: Summary,
    pub soft_by_offset: BTreeMap<i32, BinStat>,
    pub hard_by_offset: BTreeMap<i32, BinStat>,
    pub ps_soft: PsResult,
    pub ps_hard: PsResult,
    pub unfaithful: usize,
    pub needs_review: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqaReport {
    pub questions: BTreeMap<QuestionId, VqaQuestionReport>,
    pub response_length: BTreeMap<i32, BinStat>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub missing_predictions: usize,
    pub unknown_images: usize,
    pub duplicate_predictions: usize,
    pub rejected_lines: usize,
    pub empty_scenes: usize,
    pub needs_review: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    /// Whether lux was part of the sensitivity grouping key.
    pub group_by_lux: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub classification: BTreeMap<String, ClassificationReport>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detection: BTreeMap<String, DetectionReport>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vqa: BTreeMap<String, VqaReport>,
    pub diagnostics: Diagnostics,
}

fn values_of<'a>(scores: &'a [ImageScore], model: &'a str) -> Vec<f64> {
    scores.iter().filter(|s| s.model == model).map(|s| s.value).collect()
}

impl MetricReport {
    fn empty(task: Task, group_by_lux: bool) -> Self {
        MetricReport {
            task,
            group_by_lux,
            classification: BTreeMap::new(),
            detection: BTreeMap::new(),
            vqa: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn from_top1(r: &Top1Result, group_by_lux: bool) -> Self {
        let mut out = Self::empty(Task::Classification, group_by_lux);
        for (model, bins) in &r.curves {
            let values = values_of(&r.per_image, model);
            let Some(top1) = Summary::of(&values, bins) else { continue };
            out.classification.insert(
                model.clone(),
                ClassificationReport {
                    top1,
                    by_offset: bins.clone(),
                    ps: parameter_sensitivity(&grouped(&r.per_image, model, group_by_lux)),
                },
            );
        }
        out.diagnostics.missing_predictions = r.missing.len();
        out.diagnostics.unknown_images = r.unknown_images;
        out.diagnostics.duplicate_predictions = r.duplicates;
        out
    }

    pub fn from_detection(r: &DetectionResult, group_by_lux: bool) -> Self {
        let mut out = Self::empty(Task::Detection, group_by_lux);
        for (model, overall) in &r.overall {
            let by_offset = r.by_offset[model]
                .iter()
                .map(|(o, (olrp, n))| (*o, OlrpBin { olrp: *olrp, n_images: *n }))
                .collect();
            out.detection.insert(
                model.clone(),
                DetectionReport {
                    overall: *overall,
                    ap: r.ap.get(model).copied().flatten(),
                    by_offset,
                    ps: parameter_sensitivity(&grouped(&r.per_image, model, group_by_lux)),
                },
            );
        }
        out.diagnostics.missing_predictions = r.missing.len();
        out.diagnostics.unknown_images = r.unknown_images;
        out.diagnostics.empty_scenes = r.empty_scenes;
        out
    }

    pub fn from_vqa(r: &VqaResult, group_by_lux: bool) -> Self {
        let mut out = Self::empty(Task::Vqa, group_by_lux);
        let lengths = response_length_stats(&r.scores);
        let mut by_model: BTreeMap<&str, BTreeMap<QuestionId, Vec<&super::VqaScore>>> = BTreeMap::new();
        for s in &r.scores {
            by_model.entry(&s.model).or_default().entry(s.question).or_default().push(s);
        }
        for (model, questions) in by_model {
            let mut report = VqaReport {
                questions: BTreeMap::new(),
                response_length: lengths.get(model).cloned().unwrap_or_default(),
            };
            for (q, scores) in questions {
                let soft: Vec<ImageScore> = scores.iter().map(|s| s.image_score(false)).collect();
                let hard: Vec<ImageScore> = scores.iter().map(|s| s.image_score(true)).collect();
                let soft_bins = offset_curves(&soft).remove(model).unwrap_or_default();
                let hard_bins = offset_curves(&hard).remove(model).unwrap_or_default();
                let sv: Vec<f64> = soft.iter().map(|s| s.value).collect();
                let hv: Vec<f64> = hard.iter().map(|s| s.value).collect();
                let (Some(soft_sum), Some(hard_sum)) = (Summary::of(&sv, &soft_bins), Summary::of(&hv, &hard_bins))
                else {
                    continue;
                };
                report.questions.insert(
                    q,
                    VqaQuestionReport {
                        soft: soft_sum,
                        hard: hard_sum,
                        soft_by_offset: soft_bins,
                        hard_by_offset: hard_bins,
                        ps_soft: parameter_sensitivity(&grouped(&soft, model, group_by_lux)),
                        ps_hard: parameter_sensitivity(&grouped(&hard, model, group_by_lux)),
                        unfaithful: scores.iter().filter(|s| s.unfaithful.is_some()).count(),
                        needs_review: scores.iter().filter(|s| s.needs_review).count(),
                    },
                );
            }
            out.vqa.insert(model.to_string(), report);
        }
        out.diagnostics.missing_predictions = r.missing;
        out.diagnostics.unknown_images = r.unknown_images;
        out.diagnostics.needs_review = r.needs_review().count();
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

fn ps_row(model: &str, metric: &str, ps: &PsResult) -> Vec<String> {
    vec![
        model.to_string(),
        metric.to_string(),
        opt(ps.percent),
        ps.groups.to_string(),
        ps.sensitive.to_string(),
        ps.degenerate.to_string(),
    ]
}

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn series<'a, I, V>(items: I, f: impl Fn(&V) -> f64) -> Series
where
    I: IntoIterator<Item = (String, &'a BTreeMap<i32, V>)>,
    V: 'a,
{
    items
        .into_iter()
        .map(|(name, bins)| (name, bins.iter().map(|(o, v)| (f64::from(*o), f(v))).collect()))
        .collect()
}

/// Writes `metrics.json`, the per-figure CSVs for the report's task and,
/// when `svg` is set, matching line charts. Returns the written paths.
pub fn write_metric_artifacts(report: &MetricReport, out_dir: &Path, svg: bool) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut write = |name: &str, bytes: &[u8]| -> io::Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    write("metrics.json", report.to_json().as_bytes())?;
    let ps_header = ["model", "metric", "percent", "groups", "sensitive", "degenerate"];
    let mut ps_rows = Vec::new();

    match report.task {
        Task::Classification => {
            let mut rows = Vec::new();
            for (m, r) in &report.classification {
                for (o, b) in &r.by_offset {
                    rows.push(vec![m.clone(), o.to_string(), b.mean.to_string(), b.n.to_string()]);
                }
                ps_rows.push(ps_row(m, "top1", &r.ps));
            }
            write("top1_by_offset.csv", &csv_bytes(&["model", "ev_offset", "top1", "n"], rows)?)?;
            if svg {
                let s = series(report.classification.iter().map(|(m, r)| (m.clone(), &r.by_offset)), |b| b.mean);
                write(
                    "top1_by_offset.svg",
                    svg::line_chart("Top-1 accuracy by EV offset", "EV offset", "top-1 accuracy", &s).as_bytes(),
                )?;
            }
        }
        Task::Detection => {
            let mut rows = Vec::new();
            for (m, r) in &report.detection {
                for (o, b) in &r.by_offset {
                    let c = b.olrp.components;
                    rows.push(vec![
                        m.clone(),
                        o.to_string(),
                        c.lrp.to_string(),
                        c.loc.to_string(),
                        c.fp.to_string(),
                        c.fn_.to_string(),
                        b.n_images.to_string(),
                    ]);
                }
                ps_rows.push(ps_row(m, "olrp", &r.ps));
            }
            write(
                "olrp_components.csv",
                &csv_bytes(&["model", "ev_offset", "olrp", "loc", "fp", "fn", "n_images"], rows)?,
            )?;
            if svg {
                let s = series(report.detection.iter().map(|(m, r)| (m.clone(), &r.by_offset)), |b| {
                    b.olrp.components.lrp
                });
                write(
                    "olrp_by_offset.svg",
                    svg::line_chart("oLRP by EV offset", "EV offset", "oLRP (lower is better)", &s).as_bytes(),
                )?;
            }
        }
        Task::Vqa => {
            let mut rows = Vec::new();
            let mut len_rows = Vec::new();
            for (m, r) in &report.vqa {
                for (q, qr) in &r.questions {
                    for (o, soft) in &qr.soft_by_offset {
                        let hard = qr.hard_by_offset.get(o).map(|b| b.mean).unwrap_or(0.0);
                        rows.push(vec![
                            m.clone(),
                            q.to_string(),
                            o.to_string(),
                            soft.mean.to_string(),
                            hard.to_string(),
                            soft.n.to_string(),
                        ]);
                    }
                    ps_rows.push(ps_row(m, &format!("{q}_soft"), &qr.ps_soft));
                    ps_rows.push(ps_row(m, &format!("{q}_hard"), &qr.ps_hard));
                }
                for (o, b) in &r.response_length {
                    len_rows.push(vec![m.clone(), o.to_string(), b.mean.to_string(), b.n.to_string()]);
                }
            }
            write(
                "vqa_acc.csv",
                &csv_bytes(&["model", "question", "ev_offset", "soft", "hard", "n"], rows)?,
            )?;
            write("resp_len.csv", &csv_bytes(&["model", "ev_offset", "mean_chars", "n"], len_rows)?)?;
            if svg {
                let s = series(
                    report.vqa.iter().flat_map(|(m, r)| {
                        r.questions.iter().map(move |(q, qr)| (format!("{m} {q}"), &qr.soft_by_offset))
                    }),
                    |b| b.mean,
                );
                write(
                    "vqa_soft_by_offset.svg",
                    svg::line_chart("VQA soft accuracy by EV offset", "EV offset", "soft accuracy", &s).as_bytes(),
                )?;
                let s = series(report.vqa.iter().map(|(m, r)| (m.clone(), &r.response_length)), |b| b.mean);
                write(
                    "resp_len.svg",
                    svg::line_chart("Mean response length", "EV offset", "characters", &s).as_bytes(),
                )?;
            }
        }
    }
    write("ps.csv", &csv_bytes(&ps_header, ps_rows)?)?;
    Ok(written)
}
