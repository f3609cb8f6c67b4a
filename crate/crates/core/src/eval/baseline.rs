//! Reference predictors for the synthetic desk scenes: a luminance-threshold
//! classifier and a connected-component box proposer.

use std::collections::VecDeque;

use super::Detection;
use crate::sweep::{ImageRaster, SCENE_CLASSES};

pub const UNKNOWN_LABEL: &str = "unknown";

/// 3×3 box-filtered luma and its median.
fn smoothed_luma(img: &ImageRaster) -> (Vec<f64>, f64) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = img.luma();
    let mut out = vec![0.0; luma.len()];
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut n) = (0.0, 0.0);
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    sum += luma[yy * w + xx];
                    n += 1.0;
                }
            }
            out[y * w + x] = sum / n;
        }
    }
    let mut sorted = out.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    (out, median)
}

/// Segments pixels that deviate from the background (the median luma), then
/// names the dominant side by its absolute brightness: light blocks must read
/// at least `light_min`, dark blocks at most `dark_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LuminanceClassifier {
    /// Minimum deviation from the median, in 8-bit code values.
    pub contrast: f64,
    /// Minimum fraction of deviating pixels for a decision.
    pub min_fraction: f64,
    pub light_min: f64,
    pub dark_max: f64,
}

impl Default for LuminanceClassifier {
    fn default() -> Self {
        LuminanceClassifier {
            contrast: 28.0,
            min_fraction: 0.01,
            light_min: 140.0,
            dark_max: 110.0,
        }
    }
}

impl LuminanceClassifier {
    pub fn classify(&self, img: &ImageRaster) -> &'static str {
        let (luma, median) = smoothed_luma(img);
        let (mut bright, mut dark) = ((0usize, 0.0), (0usize, 0.0));
        for &v in &luma {
            if v > median + self.contrast {
                bright = (bright.0 + 1, bright.1 + v);
            } else if v < median - self.contrast {
                dark = (dark.0 + 1, dark.1 + v);
            }
        }
        let need = ((self.min_fraction * luma.len() as f64).ceil() as usize).max(1);
        if bright.0.max(dark.0) < need || bright.0 == dark.0 {
            UNKNOWN_LABEL
        } else if bright.0 > dark.0 {
            if bright.1 / bright.0 as f64 >= self.light_min {
                SCENE_CLASSES[0]
            } else {
                UNKNOWN_LABEL
            }
        } else if dark.1 / dark.0 as f64 <= self.dark_max {
            SCENE_CLASSES[1]
        } else {
            UNKNOWN_LABEL
        }
    }
}

/// Proposes one box per 4-connected region deviating from the background,
/// labelled with the same brightness bands as [`LuminanceClassifier`];
/// regions outside both bands are dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxProposer {
    pub contrast: f64,
    pub min_area: usize,
    pub light_min: f64,
    pub dark_max: f64,
}

impl Default for BoxProposer {
    fn default() -> Self {
        let c = LuminanceClassifier::default();
        BoxProposer {
            contrast: c.contrast,
            min_area: 40,
            light_min: c.light_min,
            dark_max: c.dark_max,
        }
    }
}

impl BoxProposer {
    pub fn detect(&self, img: &ImageRaster) -> Vec<Detection> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let (luma, median) = smoothed_luma(img);
        let dev: Vec<f64> = luma.iter().map(|v| v - median).collect();
        let sign = |i: usize| {
            if dev[i] > self.contrast {
                1i8
            } else if dev[i] < -self.contrast {
                -1
            } else {
                0
            }
        };
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            let s = sign(start);
            if seen[start] || s == 0 {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
            let (mut area, mut strength, mut level) = (0usize, 0.0, 0.0);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                area += 1;
                strength += dev[i].abs();
                level += luma[i];
                let mut push = |j: usize| {
                    if !seen[j] && sign(j) == s {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    push(i - 1);
                }
                if x + 1 < w {
                    push(i + 1);
                }
                if y > 0 {
                    push(i - w);
                }
                if y + 1 < h {
                    push(i + w);
                }
            }
            let level = level / area as f64;
            let label = match s {
                1 if level >= self.light_min => SCENE_CLASSES[0],
                -1 if level <= self.dark_max => SCENE_CLASSES[1],
                _ => continue,
            };
            if area < self.min_area {
                continue;
            }
            let fill = area as f64 / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
            out.push(Detection {
                bbox: [x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64],
                score: (strength / area as f64 / 128.0).min(1.0) * fill,
                label: label.to_string(),
            });
        }
        out
    }
}
