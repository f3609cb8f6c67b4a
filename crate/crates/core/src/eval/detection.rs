use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Detection, EvalError, ImageScore, Payload, PredictionRecord};
use crate::sweep::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { iou_threshold: 0.5 }
    }
}

impl MatchConfig {
    pub fn new(iou_threshold: f64) -> Result<Self, EvalError> {
        if iou_threshold > 0.0 && iou_threshold < 1.0 {
            Ok(MatchConfig { iou_threshold })
        } else {
            Err(EvalError::Threshold(iou_threshold))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub bbox: [f64; 4],
    pub label: String,
}

/// Detections and ground truth of one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneDetections {
    pub detections: Vec<Detection>,
    pub truth: Vec<GtBox>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchResult {
    pub tp_ious: Vec<f64>,
    pub n_fp: usize,
    pub n_fn: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrpComponents {
    pub lrp: f64,
    pub loc: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlrpResult {
    #[serde(flatten)]
    pub components: LrpComponents,
    /// Score cut at which the minimum is attained.
    pub cut: f64,
}

pub fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Descending score; equal scores fall back to box coordinates, then label.
fn rank(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| {
            a.bbox
                .iter()
                .zip(&b.bbox)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.label.cmp(&b.label))
}

/// Best unmatched same-class GT with IoU ≥ `tau`; ties keep the lower index.
fn best_match(det: &Detection, truth: &[GtBox], taken: &[bool], tau: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, g) in truth.iter().enumerate() {
        if taken[j] || g.label != det.label {
            continue;
        }
        let v = iou(&det.bbox, &g.bbox);
        if v >= tau && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best
}

pub fn match_detections(dets: &[Detection], truth: &[GtBox], cfg: &MatchConfig, score_cut: f64) -> MatchResult {
    let mut order: Vec<&Detection> = dets.iter().filter(|d| d.score >= score_cut).collect();
    order.sort_by(|a, b| rank(a, b));
    let mut taken = vec![false; truth.len()];
    let mut out = MatchResult::default();
    for d in order {
        match best_match(d, truth, &taken, cfg.iou_threshold) {
            Some((j, v)) => {
                taken[j] = true;
                out.tp_ious.push(v);
            }
            None => out.n_fp += 1,
        }
    }
    out.n_fn = taken.iter().filter(|t| !**t).count();
    out
}

fn components(loc_sum: f64, n_tp: usize, n_fp: usize, n_fn: usize) -> Result<LrpComponents, EvalError> {
    let total = n_tp + n_fp + n_fn;
    if total == 0 {
        return Err(EvalError::EmptyScene);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(LrpComponents {
        lrp: (loc_sum + n_fp as f64 + n_fn as f64) / total as f64,
        loc: if n_tp == 0 { 0.0 } else { loc_sum / n_tp as f64 },
        fp: ratio(n_fp, n_tp + n_fp),
        fn_: ratio(n_fn, n_tp + n_fn),
    })
}

pub fn lrp(m: &MatchResult, tau: f64) -> Result<LrpComponents, EvalError> {
    let loc_sum: f64 = m.tp_ious.iter().map(|v| (1.0 - v) / (1.0 - tau)).sum();
    components(loc_sum, m.tp_ious.len(), m.n_fp, m.n_fn)
}

/// Optimal LRP over the cuts {distinct detection scores} ∪ {0}, pooled over
/// all scenes. Since greedy matching visits detections in score order, the
/// matching at each cut is a prefix of a single pass.
pub fn olrp(scenes: &[SceneDetections], cfg: &MatchConfig) -> Result<OlrpResult, EvalError> {
    let tau = cfg.iou_threshold;
    let n_gt: usize = scenes.iter().map(|s| s.truth.len()).sum();
    let mut order: Vec<(usize, &Detection)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.detections.iter().map(move |d| (i, d)))
        .collect();
    if n_gt == 0 && order.is_empty() {
        return Err(EvalError::EmptyScene);
    }
    order.sort_by(|a, b| rank(a.1, b.1).then(a.0.cmp(&b.0)));
    let mut taken: Vec<Vec<bool>> = scenes.iter().map(|s| vec![false; s.truth.len()]).collect();
    let (mut loc_sum, mut n_tp, mut n_fp) = (0.0, 0usize, 0usize);
    let mut best: Option<OlrpResult> = None;
    let mut consider = |cut: f64, loc_sum: f64, n_tp: usize, n_fp: usize| -> Result<(), EvalError> {
        let c = components(loc_sum, n_tp, n_fp, n_gt - n_tp)?;
        if best.is_none_or(|b| c.lrp < b.components.lrp) {
            best = Some(OlrpResult { components: c, cut });
        }
        Ok(())
    };
    let mut i = 0;
    while i < order.len() {
        let cut = order[i].1.score;
        while i < order.len() && order[i].1.score == cut {
            let (s, d) = order[i];
            match best_match(d, &scenes[s].truth, &taken[s], tau) {
                Some((j, v)) => {
                    taken[s][j] = true;
                    loc_sum += (1.0 - v) / (1.0 - tau);
                    n_tp += 1;
                }
                None => n_fp += 1,
            }
            i += 1;
        }
        consider(cut, loc_sum, n_tp, n_fp)?;
    }
    consider(0.0, loc_sum, n_tp, n_fp)?;
    Ok(best.expect("at least one cut evaluated"))
}

/// COCO-style AP@[0.5:0.95] with 101-point interpolation, averaged over the
/// classes that have ground truth.
pub fn ap_coco(scenes: &[SceneDetections]) -> Result<f64, EvalError> {
    let classes: BTreeSet<&str> = scenes
        .iter()
        .flat_map(|s| s.truth.iter().map(|g| g.label.as_str()))
        .collect();
    if classes.is_empty() {
        return Err(EvalError::EmptyScene);
    }
    let mut total = 0.0;
    for class in &classes {
        let n_gt = scenes
            .iter()
            .map(|s| s.truth.iter().filter(|g| g.label == *class).count())
            .sum::<usize>();
        let mut dets: Vec<(usize, &Detection)> = scenes
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.detections.iter().filter(|d| d.label == *class).map(move |d| (i, d)))
            .collect();
        dets.sort_by(|a, b| rank(a.1, b.1).then(a.0.cmp(&b.0)));
        for t in 0..10 {
            let tau = f64::from(50 + 5 * t) / 100.0;
            let mut taken: Vec<Vec<bool>> = scenes.iter().map(|s| vec![false; s.truth.len()]).collect();
            let mut tp = 0usize;
            let mut recall = Vec::with_capacity(dets.len());
            let mut precision = Vec::with_capacity(dets.len());
            for (k, (s, d)) in dets.iter().enumerate() {
                if let Some((j, _)) = best_match(d, &scenes[*s].truth, &taken[*s], tau) {
                    taken[*s][j] = true;
                    tp += 1;
                }
                recall.push(tp as f64 / n_gt as f64);
                precision.push(tp as f64 / (k + 1) as f64);
            }
            for k in (1..precision.len()).rev() {
                precision[k - 1] = precision[k - 1].max(precision[k]);
            }
            let mut sum = 0.0;
            for r in 0..=100 {
                let r = f64::from(r) / 100.0;
                let idx = recall.partition_point(|&v| v < r);
                sum += precision.get(idx).copied().unwrap_or(0.0);
            }
            total += sum / 101.0;
        }
    }
    Ok(total / (10 * classes.len()) as f64)
}

#[derive(Clone, Debug, Default)]
pub struct DetectionResult {
    /// Per-image oLRP (lower is better); images that are empty scenes are absent.
    pub per_image: Vec<ImageScore>,
    pub overall: BTreeMap<String, OlrpResult>,
    pub ap: BTreeMap<String, Option<f64>>,
    pub by_offset: BTreeMap<String, BTreeMap<i32, (OlrpResult, usize)>>,
    pub missing: Vec<(String, String)>,
    pub empty_scenes: usize,
    pub unknown_images: usize,
}

/// Scores every detection model in `preds` against all ground-truth images.
/// A missing prediction counts as an image with no detections.
pub fn score_detection(preds: &[PredictionRecord], gts: &[GroundTruth], cfg: &MatchConfig) -> DetectionResult {
    let known: BTreeSet<&str> = gts.iter().map(|g| g.image_id.as_str()).collect();
    let mut by_model: BTreeMap<&str, HashMap<&str, &[Detection]>> = BTreeMap::new();
    let mut result = DetectionResult::default();
    for p in preds {
        let Payload::Detections(d) = &p.payload else { continue };
        if !known.contains(p.image_id.as_str()) {
            result.unknown_images += 1;
            continue;
        }
        by_model
            .entry(p.model.as_str())
            .or_default()
            .entry(p.image_id.as_str())
            .or_insert(d.as_slice());
    }
    let per_model: Vec<_> = by_model
        .par_iter()
        .map(|(model, dets)| {
            let scenes: Vec<SceneDetections> = gts
                .iter()
                .map(|g| SceneDetections {
                    detections: dets.get(g.image_id.as_str()).map(|d| d.to_vec()).unwrap_or_default(),
                    truth: g
                        .boxes
                        .iter()
                        .map(|b| GtBox {
                            bbox: *b,
                            label: g.class.clone(),
                        })
                        .collect(),
                })
                .collect();
            let missing: Vec<(String, String)> = gts
                .iter()
                .filter(|g| !dets.contains_key(g.image_id.as_str()))
                .map(|g| (model.to_string(), g.image_id.clone()))
                .collect();
            let mut per_image = Vec::new();
            let mut empty = 0;
            for (g, s) in gts.iter().zip(&scenes) {
                match olrp(std::slice::from_ref(s), cfg) {
                    Ok(r) => per_image.push(ImageScore::new(model, g, r.components.lrp)),
                    Err(_) => empty += 1,
                }
            }
            let mut bins: BTreeMap<i32, Vec<SceneDetections>> = BTreeMap::new();
            for (g, s) in gts.iter().zip(&scenes) {
                bins.entry(g.ev_offset).or_default().push(s.clone());
            }
            let by_offset: BTreeMap<i32, (OlrpResult, usize)> = bins
                .into_iter()
                .filter_map(|(o, s)| olrp(&s, cfg).ok().map(|r| (o, (r, s.len()))))
                .collect();
            let overall = olrp(&scenes, cfg).ok();
            let ap = ap_coco(&scenes).ok();
            (model.to_string(), overall, ap, by_offset, per_image, missing, empty)
        })
        .collect();
    for (model, overall, ap, by_offset, per_image, missing, empty) in per_model {
        if let Some(o) = overall {
            result.overall.insert(model.clone(), o);
        }
        result.ap.insert(model.clone(), ap);
        result.by_offset.insert(model, by_offset);
        result.per_image.extend(per_image);
        result.missing.extend(missing);
        result.empty_scenes += empty;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: [f64; 4], score: f64) -> Detection {
        Detection {
            bbox: b,
            score,
            label: "cup".into(),
        }
    }

    fn gt(b: [f64; 4]) -> GtBox {
        GtBox {
            bbox: b,
            label: "cup".into(),
        }
    }

    const CFG: MatchConfig = MatchConfig { iou_threshold: 0.5 };

    #[test]
    fn iou_basics() {
        assert_eq!(iou(&[0.0, 0.0, 10.0, 10.0], &[0.0, 0.0, 10.0, 10.0]), 1.0);
        assert_eq!(iou(&[0.0, 0.0, 10.0, 10.0], &[0.0, 0.0, 10.0, 7.5]), 0.75);
        assert_eq!(iou(&[0.0, 0.0, 1.0, 1.0], &[2.0, 2.0, 3.0, 3.0]), 0.0);
    }

    #[test]
    fn matching_cases() {
        let g = [gt([0.0, 0.0, 10.0, 10.0])];
        let m = match_detections(&[det([0.0, 0.0, 10.0, 7.5], 0.9)], &g, &CFG, 0.0);
        assert_eq!((m.tp_ious.clone(), m.n_fp, m.n_fn), (vec![0.75], 0, 0));

        let two = [det([0.0, 0.0, 10.0, 9.0], 0.6), det([0.0, 0.0, 10.0, 7.5], 0.9)];
        let m = match_detections(&two, &g, &CFG, 0.0);
        assert_eq!((m.tp_ious, m.n_fp, m.n_fn), (vec![0.75], 1, 0));

        let m = match_detections(&[det([0.0, 0.0, 10.0, 4.0], 0.9)], &g, &CFG, 0.0);
        assert_eq!((m.tp_ious.len(), m.n_fp, m.n_fn), (0, 1, 1));

        let wrong = Detection {
            label: "mug".into(),
            ..det([0.0, 0.0, 10.0, 10.0], 0.9)
        };
        let m = match_detections(&[wrong], &g, &CFG, 0.0);
        assert_eq!((m.n_fp, m.n_fn), (1, 1));
    }

    #[test]
    fn lrp_hand_case() {
        let g = [gt([0.0, 0.0, 10.0, 10.0])];
        let m = match_detections(&[det([0.0, 0.0, 10.0, 7.5], 0.9)], &g, &CFG, 0.0);
        let c = lrp(&m, 0.5).unwrap();
        assert_eq!(
            c,
            LrpComponents {
                lrp: 0.5,
                loc: 0.5,
                fp: 0.0,
                fn_: 0.0
            }
        );
        let none = match_detections(&[], &g, &CFG, 0.0);
        assert_eq!(lrp(&none, 0.5).unwrap().lrp, 1.0);
        assert!(matches!(lrp(&MatchResult::default(), 0.5), Err(EvalError::EmptyScene)));
    }

    #[test]
    fn olrp_drops_spurious_low_score() {
        let s = SceneDetections {
            detections: vec![det([0.0, 0.0, 10.0, 10.0], 0.9), det([50.0, 50.0, 60.0, 60.0], 0.1)],
            truth: vec![gt([0.0, 0.0, 10.0, 10.0])],
        };
        let r = olrp(&[s], &CFG).unwrap();
        assert_eq!(r.components.lrp, 0.0);
        assert_eq!(r.cut, 0.9);
    }

    #[test]
    fn olrp_empty_detector_and_scene() {
        let s = SceneDetections {
            detections: vec![],
            truth: vec![gt([0.0, 0.0, 10.0, 10.0])],
        };
        assert_eq!(olrp(&[s], &CFG).unwrap().components.lrp, 1.0);
        assert!(matches!(olrp(&[SceneDetections::default()], &CFG), Err(EvalError::EmptyScene)));
    }

    #[test]
    fn ap_cases() {
        let g = vec![gt([0.0, 0.0, 10.0, 10.0])];
        let perfect = SceneDetections {
            detections: vec![det([0.0, 0.0, 10.0, 10.0], 0.8)],
            truth: g.clone(),
        };
        assert_eq!(ap_coco(&[perfect]).unwrap(), 1.0);
        let none = SceneDetections {
            detections: vec![],
            truth: g.clone(),
        };
        assert_eq!(ap_coco(&[none]).unwrap(), 0.0);
        let partial = SceneDetections {
            detections: vec![det([0.0, 0.0, 10.0, 6.0], 0.8)],
            truth: g,
        };
        assert!((ap_coco(&[partial]).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_validation() {
        assert!(MatchConfig::new(0.5).is_ok());
        assert!(MatchConfig::new(0.0).is_err());
        assert!(MatchConfig::new(1.0).is_err());
    }
}
