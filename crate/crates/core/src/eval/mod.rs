//! Scoring of prediction logs against sweep ground truth.

mod baseline;
mod classification;
mod detection;
mod records;
mod report;
mod sensitivity;
mod vqa;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rational::format_decimal;
use crate::sweep::GroundTruth;

pub use baseline::{BoxProposer, LuminanceClassifier, UNKNOWN_LABEL};
pub use classification::{score_top1, Top1Result};
pub use detection::{
    ap_coco, iou, lrp, match_detections, olrp, score_detection, DetectionResult, GtBox, LrpComponents,
    MatchConfig, MatchResult, OlrpResult, SceneDetections,
};
pub use records::{
    index_truth, read_ground_truth, read_human_answers, read_predictions, valid_box, Detection, Payload,
    PredictionLog, PredictionRecord, PredictionRow, QuestionId, SynonymTable, Task,
};
pub use report::{
    write_metric_artifacts, BinStat, ClassificationReport, DetectionReport, Diagnostics, MetricReport, OlrpBin,
    Summary, VqaQuestionReport, VqaReport,
};
pub use sensitivity::{parameter_sensitivity, population_stats, PsResult, SensitivityStat};
pub use vqa::{
    faithfulness_check, normalize_answer, read_overrides, response_length_stats, score_vqa, CleanupFlags,
    Faithfulness, Normalized, OverrideKey, Overrides, Unfaithful, VqaConfig, VqaResult, VqaScore,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Input(String),
    #[error("scene has neither ground truth nor detections")]
    EmptyScene,
    #[error("invalid match config: iou threshold {0} outside (0, 1)")]
    Threshold(f64),
}

/// Exposure-equivalence group: same scene, same EV offset. Lux joins the key
/// only when requested.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub scene_id: String,
    pub ev_offset: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lux: Option<String>,
}

impl GroupKey {
    pub fn of(gt: &GroundTruth, with_lux: bool) -> Self {
        GroupKey {
            scene_id: gt.scene_id.clone(),
            ev_offset: gt.ev_offset,
            lux: with_lux.then(|| format_decimal(gt.lux)),
        }
    }
}

/// Per-image metric value with enough context to bin and group it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub model: String,
    pub image_id: String,
    pub scene_id: String,
    pub lux: f64,
    pub ev_offset: i32,
    pub value: f64,
}

impl ImageScore {
    pub fn new(model: &str, gt: &GroundTruth, value: f64) -> Self {
        ImageScore {
            model: model.to_string(),
            image_id: gt.image_id.clone(),
            scene_id: gt.scene_id.clone(),
            lux: gt.lux,
            ev_offset: gt.ev_offset,
            value,
        }
    }

    pub fn group(&self, with_lux: bool) -> GroupKey {
        GroupKey {
            scene_id: self.scene_id.clone(),
            ev_offset: self.ev_offset,
            lux: with_lux.then(|| format_decimal(self.lux)),
        }
    }
}

/// Mean per (model, ev_offset). Bins only exist when populated.
pub fn offset_curves(scores: &[ImageScore]) -> BTreeMap<String, BTreeMap<i32, BinStat>> {
    let mut acc: BTreeMap<String, BTreeMap<i32, (f64, usize)>> = BTreeMap::new();
    for s in scores {
        let e = acc.entry(s.model.clone()).or_default().entry(s.ev_offset).or_default();
        e.0 += s.value;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(m, bins)| {
            let bins = bins
                .into_iter()
                .map(|(o, (sum, n))| (o, BinStat { mean: sum / n as f64, n }))
                .collect();
            (m, bins)
        })
        .collect()
}

/// PS inputs for one model: per-image values keyed by group.
pub fn grouped(scores: &[ImageScore], model: &str, with_lux: bool) -> Vec<(GroupKey, f64)> {
    scores
        .iter()
        .filter(|s| s.model == model)
        .map(|s| (s.group(with_lux), s.value))
        .collect()
}
