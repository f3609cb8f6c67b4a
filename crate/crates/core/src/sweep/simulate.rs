use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ImageRaster;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaModel {
    /// Piecewise sRGB transfer curve.
    #[default]
    Srgb,
    /// Pure power law with exponent 2.2.
    #[serde(rename = "gamma22")]
    Gamma22,
}

impl GammaModel {
    pub fn decode(self, encoded: f64) -> f64 {
        match self {
            GammaModel::Srgb => {
                if encoded <= 0.04045 {
                    encoded / 12.92
                } else {
                    ((encoded + 0.055) / 1.055).powf(2.4)
                }
            }
            GammaModel::Gamma22 => encoded.powf(2.2),
        }
    }

    pub fn encode(self, linear: f64) -> f64 {
        match self {
            GammaModel::Srgb => {
                if linear <= 0.003_130_8 {
                    linear * 12.92
                } else {
                    1.055 * linear.powf(1.0 / 2.4) - 0.055
                }
            }
            GammaModel::Gamma22 => linear.powf(1.0 / 2.2),
        }
    }

    fn decode_table(self) -> [f64; 256] {
        let mut lut = [0.0; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = self.decode(v as f64 / 255.0);
        }
        lut
    }
}

/// Exposure simulation parameters. Output samples are always clipped to
/// `[0, 255]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma: GammaModel,
    /// Noise standard deviation in linear units per ISO-100 multiple.
    pub noise_k: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gamma: GammaModel::Srgb,
            noise_k: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Configuration for the `index`-th step of a sweep; the noise stream
    /// depends only on `(seed, index)`.
    pub fn for_step(&self, index: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, index),
            ..*self
        }
    }
}

/// SplitMix64 mix of a base seed and a stream index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Truncating 8-bit quantizer. Light below one code value reads as 0; the
/// epsilon absorbs float error from the transfer-curve round trip.
fn quantize(encoded: f64) -> u8 {
    (encoded * 255.0 + 1e-6).floor().clamp(0.0, 255.0) as u8
}

/// Re-renders a well-exposed raster `offset` stops brighter (positive) or
/// darker (negative), adding ISO-scaled Gaussian noise in linear light.
pub fn simulate_exposure(base: &ImageRaster, offset: i32, iso: u32, cfg: &SimConfig) -> ImageRaster {
    let lut = cfg.gamma.decode_table();
    let gain = 2f64.powi(offset);
    let sigma = cfg.noise_k.max(0.0) * iso as f64 / 100.0;
    let mut out = base.clone();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
        for v in out.pixels_mut() {
            let linear = (lut[*v as usize] * gain + normal.sample(&mut rng)).clamp(0.0, 1.0);
            *v = quantize(cfg.gamma.encode(linear));
        }
    } else {
        let mut table = [0u8; 256];
        for (v, slot) in table.iter_mut().enumerate() {
            *slot = quantize(cfg.gamma.encode((lut[v] * gain).clamp(0.0, 1.0)));
        }
        for v in out.pixels_mut() {
            *v = table[*v as usize];
        }
    }
    out
}

/// True when more than 95% of samples are pure black, or more than 95% are
/// pure white. Channels are counted as separate samples.
pub fn discard_check(img: &ImageRaster) -> bool {
    let n = img.pixels().len();
    if n == 0 {
        return false;
    }
    let (black, white) = img.pixels().iter().fold((0usize, 0usize), |(b, w), &v| {
        (b + usize::from(v == 0), w + usize::from(v == 255))
    });
    black * 20 > n * 19 || white * 20 > n * 19
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(value: u8) -> ImageRaster {
        ImageRaster::filled(32, 16, 3, value).unwrap()
    }

    fn ramp() -> ImageRaster {
        ImageRaster::new(16, 16, 1, (0..=255).collect()).unwrap()
    }

    #[test]
    fn identity_round_trip() {
        for gamma in [GammaModel::Srgb, GammaModel::Gamma22] {
            let cfg = SimConfig {
                gamma,
                ..SimConfig::default()
            };
            let out = simulate_exposure(&ramp(), 0, 100, &cfg);
            for (a, b) in out.pixels().iter().zip(ramp().pixels()) {
                assert!((*a as i32 - *b as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn ten_stops_under_is_black() {
        let out = simulate_exposure(&gray(128), -10, 100, &SimConfig::default());
        let zeros = out.pixels().iter().filter(|&&v| v == 0).count();
        assert!(zeros as f64 >= 0.95 * out.pixels().len() as f64);
        // One stop less dark still leaves a code value above zero.
        let out = simulate_exposure(&gray(128), -9, 100, &SimConfig::default());
        assert!(out.pixels().iter().all(|&v| v == 1));
    }

    #[test]
    fn brightness_is_monotone_in_offset() {
        for noise_k in [0.0, 0.002] {
            let cfg = SimConfig {
                noise_k,
                seed: 3,
                ..SimConfig::default()
            };
            let means: Vec<f64> = (-10..=10)
                .map(|o| simulate_exposure(&ramp(), o, 800, &cfg).mean_luma())
                .collect();
            assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let cfg = SimConfig {
            noise_k: 0.01,
            seed: 11,
            ..SimConfig::default()
        };
        let a = simulate_exposure(&gray(100), -1, 3200, &cfg);
        let b = simulate_exposure(&gray(100), -1, 3200, &cfg);
        assert_eq!(a, b);
        let c = simulate_exposure(&gray(100), -1, 3200, &cfg.for_step(1));
        assert_ne!(a, c);
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
    }

    #[test]
    fn discard_boundaries() {
        assert!(discard_check(&gray(0)));
        assert!(discard_check(&gray(255)));
        assert!(!discard_check(&gray(128)));
        // 1000 samples, exactly 950 black: kept.
        let mut px = vec![0u8; 1000];
        px[950..].fill(40);
        let img = ImageRaster::new(1000, 1, 1, px.clone()).unwrap();
        assert!(!discard_check(&img));
        px[950] = 0;
        let img = ImageRaster::new(1000, 1, 1, px).unwrap();
        assert!(discard_check(&img));
    }

    #[test]
    fn discard_counts_channels_as_samples() {
        // 20 RGB pixels; 19 fully black and one pixel black in two channels:
        // 59/60 samples are 0.
        let mut px = vec![0u8; 60];
        px[59] = 200;
        assert!(discard_check(&ImageRaster::new(20, 1, 3, px).unwrap()));
    }
}
