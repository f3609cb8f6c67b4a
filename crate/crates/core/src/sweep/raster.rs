use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("pixel buffer has {actual} samples, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("unsupported channel count {0}")]
    Channels(u8),
    #[error("invalid PNM data: {0}")]
    Pnm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// 8-bit row-major raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRaster {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl ImageRaster {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::Channels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(RasterError::SizeMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, RasterError> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Samples of the pixel at `(x, y)`.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.pixels[i..i + c]
    }

    /// Per-pixel luma (Rec. 709 weights on the encoded values).
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.pixels.iter().map(|&v| v as f64).collect(),
            _ => self
                .pixels
                .chunks_exact(3)
                .map(|p| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64)
                .collect(),
        }
    }

    pub fn mean_luma(&self) -> f64 {
        let luma = self.luma();
        if luma.is_empty() {
            0.0
        } else {
            luma.iter().sum::<f64>() / luma.len() as f64
        }
    }

    /// Binary PGM (P5) for gray, PPM (P6) for RGB.
    pub fn write_pnm<W: Write>(&self, mut w: W) -> io::Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn to_pnm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 20);
        self.write_pnm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_pnm<R: BufRead>(mut r: R) -> Result<Self, RasterError> {
        let magic = next_token(&mut r)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(RasterError::Pnm(format!("unsupported magic {other:?}"))),
        };
        let mut number = |what: &str| -> Result<u32, RasterError> {
            next_token(&mut r)?
                .parse()
                .map_err(|_| RasterError::Pnm(format!("bad {what}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval != 255 {
            return Err(RasterError::Pnm(format!("maxval {maxval} is not 255")));
        }
        let mut pixels = vec![0u8; width as usize * height as usize * channels as usize];
        r.read_exact(&mut pixels)?;
        Self::new(width, height, channels, pixels)
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments. The
/// single whitespace byte after the token is consumed.
fn next_token<R: BufRead>(r: &mut R) -> Result<String, RasterError> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return if token.is_empty() {
                Err(RasterError::Pnm("unexpected end of header".into()))
            } else {
                Ok(token)
            };
        }
        let b = byte[0];
        if b == b'#' && token.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
        } else if b.is_ascii_whitespace() {
            if !token.is_empty() {
                return Ok(token);
            }
        } else {
            token.push(b as char);
        }
    }
}
