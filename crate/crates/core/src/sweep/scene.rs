use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ImageRaster;

/// Synthetic object classes: light objects and dark objects on mid gray.
pub const SCENE_CLASSES: [&str; 2] = ["light-block", "dark-block"];

pub const BACKGROUND: u8 = 128;
const LIGHT_BASE: u8 = 205;
const DARK_BASE: u8 = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SceneError {
    #[error("object count {0} outside 2..=5")]
    ObjectCount(usize),
    #[error("raster {0}x{1} is too small to place the objects")]
    TooSmall(u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 64,
            channels: 3,
        }
    }
}

/// A well-exposed rendering of a desk scene and its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub raster: ImageRaster,
    pub class: String,
    /// Axis-aligned `[x1, y1, x2, y2]` in pixel-edge coordinates.
    pub boxes: Vec<[f64; 4]>,
    pub count: usize,
}

/// Renders `n_objects` non-overlapping blocks of a single class.
pub fn synth_scene(seed: u64, n_objects: usize, cfg: &SceneConfig) -> Result<SyntheticScene, SceneError> {
    if !(2..=5).contains(&n_objects) {
        return Err(SceneError::ObjectCount(n_objects));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = rng.gen_range(0..SCENE_CLASSES.len());
    let base = if class == 0 { LIGHT_BASE } else { DARK_BASE };

    let (w, h) = (cfg.width, cfg.height);
    let min_side = (w.min(h) / 6).max(3);
    let max_side = (w.min(h) / 3).max(min_side + 1);
    let mut boxes: Vec<[u32; 4]> = Vec::with_capacity(n_objects);
    let mut attempts = 0;
    while boxes.len() < n_objects {
        attempts += 1;
        if attempts > 10_000 || w < max_side + 2 || h < max_side + 2 {
            return Err(SceneError::TooSmall(w, h));
        }
        let bw = rng.gen_range(min_side..=max_side);
        let bh = rng.gen_range(min_side..=max_side);
        let x = rng.gen_range(1..w - bw);
        let y = rng.gen_range(1..h - bh);
        let candidate = [x, y, x + bw, y + bh];
        // Keep a two-pixel gap so blobs never touch.
        let clear = boxes.iter().all(|b| {
            candidate[0] >= b[2] + 2
                || b[0] >= candidate[2] + 2
                || candidate[1] >= b[3] + 2
                || b[1] >= candidate[3] + 2
        });
        if clear {
            boxes.push(candidate);
        }
    }

    let channels = cfg.channels;
    let mut raster = ImageRaster::filled(w, h, channels, BACKGROUND).expect("valid shape");
    let stride = w as usize * channels as usize;
    let pixels = raster.pixels_mut();
    for b in &boxes {
        let jitter: i16 = rng.gen_range(-12..=12);
        let tone = (base as i16 + jitter).clamp(0, 255) as u8;
        for y in b[1]..b[3] {
            for x in b[0]..b[2] {
                let i = y as usize * stride + x as usize * channels as usize;
                pixels[i..i + channels as usize].fill(tone);
            }
        }
    }

    Ok(SyntheticScene {
        raster,
        class: SCENE_CLASSES[class].to_string(),
        boxes: boxes
            .iter()
            .map(|b| [b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64])
            .collect(),
        count: n_objects,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::hash::{DefaultHasher, Hash, Hasher};

    use super::*;

    #[test]
    fn seed_seven_three_objects() {
        let scene = synth_scene(7, 3, &SceneConfig::default()).unwrap();
        assert_eq!(scene.boxes.len(), 3);
        assert_eq!(scene.count, 3);
        assert!(SCENE_CLASSES.contains(&scene.class.as_str()));
        for b in &scene.boxes {
            assert!(b[0] >= 0.0 && b[1] >= 0.0 && b[2] <= 96.0 && b[3] <= 64.0);
            assert!(b[0] < b[2] && b[1] < b[3]);
        }
        assert_eq!(scene, synth_scene(7, 3, &SceneConfig::default()).unwrap());
    }

    #[test]
    fn object_count_is_validated() {
        assert_eq!(
            synth_scene(0, 1, &SceneConfig::default()).unwrap_err(),
            SceneError::ObjectCount(1)
        );
        assert_eq!(
            synth_scene(0, 6, &SceneConfig::default()).unwrap_err(),
            SceneError::ObjectCount(6)
        );
        let tiny = SceneConfig {
            width: 8,
            height: 8,
            channels: 1,
        };
        assert!(synth_scene(0, 5, &tiny).is_err());
    }

    #[test]
    fn seeds_give_distinct_layouts() {
        let hashes: HashSet<u64> = (0..100)
            .map(|seed| {
                let scene = synth_scene(seed, 2 + (seed as usize % 4), &SceneConfig::default()).unwrap();
                let mut h = DefaultHasher::new();
                scene.raster.pixels().hash(&mut h);
                h.finish()
            })
            .collect();
        assert_eq!(hashes.len(), 100);
    }
}
