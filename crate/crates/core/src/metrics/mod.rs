//! Masked image metrics and the deformation benchmark.

mod bench;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::FloatImage;

pub use bench::{bench_deformers, bench_points, write_bench_csv, BenchResult};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: usize, height: usize, window: usize },
}

/// Peak signal-to-noise ratio, or `Identical` when the masked pixels agree
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Identical,
}

impl Psnr {
    /// Decibels, with `Identical` as `+inf`.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Identical => f64::INFINITY,
        }
    }
}

fn check_pair(pred: &FloatImage, gt: &FloatImage, mask: Option<&[bool]>) -> Result<(), MetricError> {
    if (pred.width, pred.height, pred.channels) != (gt.width, gt.height, gt.channels) {
        return Err(MetricError::Shape(format!(
            "{}x{}x{} vs {}x{}x{}",
            pred.width, pred.height, pred.channels, gt.width, gt.height, gt.channels
        )));
    }
    if pred.data.len() != pred.width * pred.height * pred.channels || gt.data.len() != pred.data.len() {
        return Err(MetricError::Shape("data length does not match dimensions".into()));
    }
    if mask.is_some_and(|m| m.len() != pred.width * pred.height) {
        return Err(MetricError::Shape("mask size does not match image".into()));
    }
    Ok(())
}

/// PSNR with peak 1 over pixels where `mask` is true (all pixels without a
/// mask).
pub fn psnr(pred: &FloatImage, gt: &FloatImage, mask: Option<&[bool]>) -> Result<Psnr, MetricError> {
    check_pair(pred, gt, mask)?;
    let c = pred.channels;
    let (mut sum, mut n) = (0.0f64, 0usize);
    for px in 0..pred.width * pred.height {
        if mask.is_some_and(|m| !m[px]) {
            continue;
        }
        for k in px * c..(px + 1) * c {
            sum += (pred.data[k] as f64 - gt.data[k] as f64).powi(2);
        }
        n += c;
    }
    if n == 0 {
        return Err(MetricError::EmptyMask);
    }
    if sum == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(10.0 * (n as f64 / sum).log10()))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-0.5 * x * x / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter evaluated only at window centers whose window
/// lies inside the image.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity (Gaussian 11x11 window, sigma 1.5, data range
/// 1) over all fully interior windows, averaged across channels. Background
/// pixels (`mask` false) are set to zero in both images first.
pub fn ssim(pred: &FloatImage, gt: &FloatImage, mask: Option<&[bool]>) -> Result<f64, MetricError> {
    check_pair(pred, gt, mask)?;
    let (w, h, c) = (pred.width, pred.height, pred.channels);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall { width: w, height: h, window: SSIM_WINDOW });
    }
    let k = gaussian_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let plane = |img: &FloatImage, ch: usize| -> Vec<f64> {
        (0..w * h)
            .map(|px| if mask.is_some_and(|m| !m[px]) { 0.0 } else { img.data[px * c + ch] as f64 })
            .collect()
    };
    let mut total = 0.0;
    for ch in 0..c {
        let x = plane(pred, ch);
        let y = plane(gt, ch);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let [mx, my, mxx, myy, mxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &k));
        let n = mx.len();
        let mut sum = 0.0;
        for i in 0..n {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let vxy = mxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / n as f64;
    }
    Ok(total / c as f64)
}

/// Metrics for one predicted/ground-truth pair. `psnr` is `None` exactly
/// when `identical` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: Option<f64>,
    pub identical: bool,
    pub ssim: f64,
    pub n_pixels_evaluated: usize,
}

impl MetricReport {
    pub fn compute(pred: &FloatImage, gt: &FloatImage, mask: Option<&[bool]>) -> Result<Self, MetricError> {
        let p = psnr(pred, gt, mask)?;
        let s = ssim(pred, gt, mask)?;
        let n = mask.map_or(pred.width * pred.height, |m| m.iter().filter(|v| **v).count());
        Ok(Self {
            psnr: match p {
                Psnr::Db(v) => Some(v),
                Psnr::Identical => None,
            },
            identical: p == Psnr::Identical,
            ssim: s,
            n_pixels_evaluated: n,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
