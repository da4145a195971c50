//! File helpers: images, point lists and JSON.

use std::path::Path;

use anyhow::{bail, Context, Result};
use planewarp::geom::Vec3;
use planewarp::render::{to_u8, FloatImage};

fn is_fimg(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("fimg"))
}

/// Loads an RGB image as floats in `[0, 1]`, from PNG or a 3-channel FIMG.
pub fn read_rgb(path: &Path) -> Result<FloatImage> {
    if is_fimg(path) {
        let img = FloatImage::read(path).with_context(|| format!("image {}", path.display()))?;
        if img.channels != 3 {
            bail!("image {}: expected 3 channels, found {}", path.display(), img.channels);
        }
        return Ok(img);
    }
    let img = image::open(path).with_context(|| format!("image {}", path.display()))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(FloatImage {
        width: w as usize,
        height: h as usize,
        channels: 3,
        data: img.as_raw().iter().map(|v| *v as f32 / 255.0).collect(),
    })
}

/// Non-zero pixels of a mask image.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let img = image::open(path).with_context(|| format!("mask {}", path.display()))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.as_raw().iter().map(|v| *v > 0).collect()))
}

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = rgb.iter().map(|v| to_u8(*v)).collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, image::ExtendedColorType::Rgb8)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let bytes: Vec<u8> = mask.iter().map(|m| if *m { 255 } else { 0 }).collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, image::ExtendedColorType::L8)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_points(path: &Path) -> Result<Vec<Vec3>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("points {}", path.display()))?;
    let raw: Vec<[f64; 3]> = serde_json::from_str(&text).with_context(|| format!("points {}", path.display()))?;
    Ok(raw.into_iter().map(Vec3::from).collect())
}

pub fn write_points(path: &Path, points: &[Vec3]) -> Result<()> {
    let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    write_json(path, &raw)
}

pub fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn is_fimg_path(path: &Path) -> bool {
    is_fimg(path)
}
