//! Rendered images and the "FIMG" float image format: magic, `u32` LE width,
//! height, channels, then `f32` LE values, row-major with channels innermost.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::field::sigmoid;

use super::composite::alpha_over;
use super::RenderError;

pub const FIMG_MAGIC: &[u8; 4] = b"FIMG";

/// Dense float image, row-major, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn pixel(&self, i: usize, j: usize) -> &[f32] {
        let o = (j * self.width + i) * self.channels;
        &self.data[o..o + self.channels]
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), RenderError> {
        w.write_all(FIMG_MAGIC)?;
        for v in [self.width, self.height, self.channels] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, RenderError> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)
            .map_err(|_| RenderError::Format("truncated FIMG header".into()))?;
        if &head[..4] != FIMG_MAGIC {
            return Err(RenderError::Format("bad FIMG magic".into()));
        }
        let dim = |k: usize| u32::from_le_bytes(head[4 * k..4 * k + 4].try_into().unwrap()) as usize;
        let (width, height, channels) = (dim(1), dim(2), dim(3));
        let n = width * height * channels;
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| RenderError::Format(format!("truncated FIMG data, expected {n} floats")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self { width, height, channels, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), RenderError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, RenderError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

/// Output of [`render_image`](super::render_image).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    /// `H x W x C_out` composited features.
    pub features: FloatImage,
    /// `H x W` accumulated opacity.
    pub alpha: Vec<f32>,
    /// `H x W x 3` color in `[0, 1]` after blending over the background.
    pub rgb: Vec<f32>,
}

impl RenderedImage {
    /// 8-bit RGB, row-major.
    pub fn rgb_u8(&self) -> Vec<u8> {
        self.rgb.iter().map(|v| to_u8(*v)).collect()
    }

    pub fn alpha_u8(&self) -> Vec<u8> {
        self.alpha.iter().map(|v| to_u8(*v)).collect()
    }
}

/// Color of a composited pixel: sigmoid of the first three feature channels
/// blended over `background`.
#[inline]
pub fn pixel_rgb(features: &[f64], alpha: f64, background: [f64; 3]) -> [f64; 3] {
    let fg = [0, 1, 2].map(|k| features.get(k).map_or(0.0, |f| sigmoid(*f)));
    alpha_over(fg, alpha, background)
}

#[inline]
pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
