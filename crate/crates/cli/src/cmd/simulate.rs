use std::path::PathBuf;

use capbias_core::eval::{BoxProposer, LuminanceClassifier, Payload, PredictionRecord, PredictionRow};
use capbias_core::sweep::{simulate_sweep, GammaModel, SceneConfig, SimConfig, SweepSpec};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{jsonl, load_grid, parse_anchor, write_file};
use crate::config::{config_error, Common, Outcome};
use crate::Run;

fn parse_gamma(text: &str) -> Result<GammaModel, String> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| format!("unknown transfer curve {text:?} (expected srgb or gamma22)"))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Illuminance levels (repeatable); defaults to 1000 and 10.
    #[arg(long)]
    pub lux: Vec<f64>,
    #[arg(long)]
    pub anchor: Vec<String>,
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Keep every N-th grid combination per scene.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Noise standard deviation in linear light per ISO-100 multiple.
    #[arg(long)]
    pub noise_k: Option<f64>,
    /// Transfer curve: srgb or gamma22.
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: Option<GammaModel>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Skip writing the simulated images.
    #[arg(long)]
    pub no_images: bool,
    /// Also run the built-in reference predictors and write their predictions.
    #[arg(long)]
    pub baselines: bool,
}

impl Run for SimulateArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {
        if self.lux.is_empty() {
            self.lux = vec![1000.0, 10.0];
        }
        let scene = SceneConfig::default();
        self.scenes.get_or_insert(10);
        self.subsample.get_or_insert(1);
        self.noise_k.get_or_insert(0.0);
        self.gamma.get_or_insert(GammaModel::Srgb);
        self.width.get_or_insert(scene.width);
        self.height.get_or_insert(scene.height);
    }

    fn run(&self) -> anyhow::Result<Outcome> {
        let file = load_grid(self.grid.as_deref())?;
        let mut anchors = file.anchors().map_err(|e| config_error(format!("anchors: {e}")))?;
        for a in &self.anchor {
            let (l, e) = parse_anchor(a)?;
            anchors.insert(l, e);
        }
        let noise_k = self.noise_k.unwrap_or(0.0);
        if !(noise_k >= 0.0 && noise_k.is_finite()) {
            return Err(config_error("noise_k: must be a non-negative number"));
        }
        let scene = SceneConfig::default();
        let spec = SweepSpec {
            grid: file.grid().map_err(|e| config_error(format!("grid: {e}")))?,
            anchors,
            lux_levels: self.lux.clone(),
            n_scenes: self.scenes.unwrap_or(10),
            subsample: self.subsample.unwrap_or(1),
            scene: SceneConfig {
                width: self.width.unwrap_or(scene.width),
                height: self.height.unwrap_or(scene.height),
                ..scene
            },
            sim: SimConfig {
                gamma: self.gamma.unwrap_or(GammaModel::Srgb),
                noise_k,
                seed: self.common.seed.unwrap_or(0),
            },
        };
        let sweep = simulate_sweep(&spec).map_err(|e| config_error(e.to_string()))?;
        let out = self.common.out();
        let mut outcome = Outcome::default();
        write_file(
            out.join("ground_truth.jsonl"),
            &jsonl(sweep.kept.iter().map(|k| &k.truth))?,
            &mut outcome.outputs,
        )?;
        write_file(out.join("discarded.jsonl"), &jsonl(&sweep.discarded)?, &mut outcome.outputs)?;
        if !self.no_images {
            for img in &sweep.kept {
                let path = out.join("images").join(format!("{}.pnm", img.truth.image_id));
                write_file(path, &img.raster.to_pnm(), &mut outcome.outputs)?;
            }
        }
        if self.baselines {
            let classifier = LuminanceClassifier::default();
            let proposer = BoxProposer::default();
            let rows: Vec<[PredictionRow; 2]> = sweep
                .kept
                .par_iter()
                .map(|k| {
                    let label = PredictionRecord {
                        model: "luminance-threshold".into(),
                        image_id: k.truth.image_id.clone(),
                        payload: Payload::Label(classifier.classify(&k.raster).into()),
                    };
                    let boxes = PredictionRecord {
                        model: "box-proposal".into(),
                        image_id: k.truth.image_id.clone(),
                        payload: Payload::Detections(proposer.detect(&k.raster)),
                    };
                    [PredictionRow::from(&label), PredictionRow::from(&boxes)]
                })
                .collect();
            write_file(out.join("baseline_preds.jsonl"), &jsonl(rows.iter().flatten())?, &mut outcome.outputs)?;
        }
        outcome.summary.insert("planned".into(), json!(sweep.planned));
        outcome.summary.insert("kept".into(), json!(sweep.kept.len()));
        outcome.summary.insert("discarded".into(), json!(sweep.discarded.len()));
        println!(
            "{} planned, {} kept, {} discarded",
            sweep.planned,
            sweep.kept.len(),
            sweep.discarded.len()
        );
        Ok(outcome)
    }
}
