use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{offset_curves, BinStat, ImageScore, Payload, PredictionRecord, SynonymTable};
use crate::sweep::GroundTruth;

#[derive(Clone, Debug, Default)]
pub struct Top1Result {
    pub per_image: Vec<ImageScore>,
    pub curves: BTreeMap<String, BTreeMap<i32, BinStat>>,
    /// (model, image_id) pairs with no prediction; scored 0.
    pub missing: Vec<(String, String)>,
    /// Predictions whose image is not in the ground truth.
    pub unknown_images: usize,
    /// Extra predictions for an already-scored image; the first one wins.
    pub duplicates: usize,
}

/// Top-1 accuracy for every model appearing in `preds` over every image in `gts`.
pub fn score_top1(preds: &[PredictionRecord], gts: &[GroundTruth], synonyms: &SynonymTable) -> Top1Result {
    let mut by_model: BTreeMap<&str, HashMap<&str, &str>> = BTreeMap::new();
    let known: BTreeSet<&str> = gts.iter().map(|g| g.image_id.as_str()).collect();
    let mut result = Top1Result::default();
    for p in preds {
        let Payload::Label(label) = &p.payload else { continue };
        if !known.contains(p.image_id.as_str()) {
            result.unknown_images += 1;
            continue;
        }
        let slot = by_model.entry(p.model.as_str()).or_default();
        if slot.contains_key(p.image_id.as_str()) {
            result.duplicates += 1;
        } else {
            slot.insert(p.image_id.as_str(), label.as_str());
        }
    }
    for (model, labels) in &by_model {
        for gt in gts {
            let value = match labels.get(gt.image_id.as_str()) {
                Some(label) => f64::from(u8::from(synonyms.matches(label, &gt.class))),
                None => {
                    result.missing.push((model.to_string(), gt.image_id.clone()));
                    0.0
                }
            };
            result.per_image.push(ImageScore::new(model, gt, value));
        }
    }
    result.curves = offset_curves(&result.per_image);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::CameraSettings;

    pub(crate) fn gt(id: &str, offset: i32, class: &str) -> GroundTruth {
        GroundTruth {
            image_id: id.into(),
            scene_id: "s".into(),
            lux: 1000.0,
            settings: CameraSettings::parse("1/125", "8", 100).unwrap(),
            ev_offset: offset,
            class: class.into(),
            boxes: vec![],
            count: 0,
        }
    }

    fn label(model: &str, id: &str, l: &str) -> PredictionRecord {
        PredictionRecord {
            model: model.into(),
            image_id: id.into(),
            payload: Payload::Label(l.into()),
        }
    }

    #[test]
    fn bin_accuracy_and_missing() {
        let gts: Vec<_> = (0..4).map(|i| gt(&format!("i{i}"), 0, "cup")).chain([gt("x", 2, "cup")]).collect();
        let syn = SynonymTable::from_json(r#"{"cup":["mug"]}"#).unwrap();
        let preds = vec![
            label("m", "i0", "cup"),
            label("m", "i1", "Mug"),
            label("m", "i2", "cup"),
            label("m", "i3", "bowl"),
            label("m", "i3", "cup"),
            label("m", "nope", "cup"),
        ];
        let r = score_top1(&preds, &gts, &syn);
        assert_eq!(r.curves["m"][&0], BinStat { mean: 0.75, n: 4 });
        assert_eq!(r.curves["m"][&2], BinStat { mean: 0.0, n: 1 });
        assert_eq!(r.missing, vec![("m".to_string(), "x".to_string())]);
        assert_eq!((r.duplicates, r.unknown_images), (1, 1));
    }
}
