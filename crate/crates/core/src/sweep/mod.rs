//! Capture planning and radiometric sweep simulation.

mod plan;
mod raster;
mod scene;
mod simulate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exposure::{CameraSettings, ExposureError, LuxAnchors, SweepGrid};
use crate::rational::format_decimal;

pub use plan::{emit_tether_script, plan_sweep, CapturePlan, PlanStep};
pub use raster::{ImageRaster, RasterError};
pub use scene::{synth_scene, SceneConfig, SceneError, SyntheticScene, BACKGROUND, SCENE_CLASSES};
pub use simulate::{derive_seed, discard_check, simulate_exposure, GammaModel, SimConfig};

/// One ground-truth row per simulated image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub scene_id: String,
    pub lux: f64,
    pub settings: CameraSettings,
    pub ev_offset: i32,
    pub class: String,
    pub boxes: Vec<[f64; 4]>,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub grid: SweepGrid,
    pub anchors: LuxAnchors,
    pub lux_levels: Vec<f64>,
    pub n_scenes: usize,
    /// Keep every `subsample`-th grid combination (1 keeps all).
    pub subsample: usize,
    pub scene: SceneConfig,
    pub sim: SimConfig,
}

#[derive(Clone, Debug)]
pub struct SimulatedImage {
    pub truth: GroundTruth,
    pub raster: ImageRaster,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub kept: Vec<SimulatedImage>,
    pub discarded: Vec<GroundTruth>,
    pub planned: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Exposure(#[from] ExposureError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("subsample factor must be at least 1")]
    Subsample,
}

/// Synthesizes `n_scenes` desk scenes and simulates every planned capture,
/// applying the discard rule. Scene `k` uses a layout seeded from
/// `(sim.seed, k)`; each capture's noise is seeded from its global step
/// index, so the result does not depend on worker scheduling.
pub fn simulate_sweep(spec: &SweepSpec) -> Result<SweepOutput, SweepError> {
    if spec.subsample == 0 {
        return Err(SweepError::Subsample);
    }
    let combos = spec.grid.combos.len();
    let per_scene = spec.lux_levels.len() * combos;
    let mut jobs = Vec::new();
    let mut scenes = Vec::with_capacity(spec.n_scenes);
    for k in 0..spec.n_scenes {
        let scene_seed = derive_seed(spec.sim.seed, k as u64);
        let n_objects = 2 + (scene_seed % 4) as usize;
        let scene = synth_scene(scene_seed, n_objects, &spec.scene)?;
        let scene_id = format!("scene{k:03}");
        let plans = plan_sweep(&spec.grid, &scene_id, &spec.lux_levels, &spec.anchors)?;
        for (l, plan) in plans.iter().enumerate() {
            for step in &plan.steps {
                if (step.index + k) % spec.subsample != 0 {
                    continue;
                }
                let global = (k * per_scene + l * combos + step.index) as u64;
                let truth = GroundTruth {
                    image_id: format!("{scene_id}_{}_{}", format_decimal(plan.lux), step.index),
                    scene_id: scene_id.clone(),
                    lux: plan.lux,
                    settings: step.settings,
                    ev_offset: step.exposure.ev_offset,
                    class: scene.class.clone(),
                    boxes: scene.boxes.clone(),
                    count: scene.count,
                };
                jobs.push((k, global, truth));
            }
        }
        scenes.push(scene);
    }

    let planned = jobs.len();
    let results: Vec<(bool, SimulatedImage)> = jobs
        .into_par_iter()
        .map(|(k, global, truth)| {
            let cfg = spec.sim.for_step(global);
            let raster = simulate_exposure(
                &scenes[k].raster,
                truth.ev_offset,
                truth.settings.iso,
                &cfg,
            );
            (discard_check(&raster), SimulatedImage { truth, raster })
        })
        .collect();

    let mut out = SweepOutput {
        planned,
        ..SweepOutput::default()
    };
    for (discard, image) in results {
        if discard {
            out.discarded.push(image.truth);
        } else {
            out.kept.push(image);
        }
    }
    Ok(out)
}
