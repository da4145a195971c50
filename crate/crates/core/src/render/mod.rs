//! Camera rays, hull-bounded sampling and volumetric quadrature.

mod camera;
mod composite;
mod image;
mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::Bvh;
use crate::deform::{DeformError, DeformerHandle};
use crate::field::{FieldError, Normalization, RadianceField};
use crate::geom::Vec3;
use crate::mesh::TriMesh;

pub use camera::{Camera, CameraFile, Ray};
pub use composite::{alpha_over, composite, composite_backward, composite_weights, Composite, Weights};
pub use image::{pixel_rgb, to_u8, FloatImage, RenderedImage, FIMG_MAGIC};
pub use sampling::{bin_edges, importance_samples, merge_sorted, ray_mesh_bounds, stratified_samples, RAY_EPS};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("sample depths not strictly increasing at index {0}")]
    NonMonotone(usize),
    #[error("camera: {0}")]
    Camera(String),
    #[error("image: {0}")]
    Format(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Default growth offset of the sampling hull.
pub const DEFAULT_GROWTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub jitter: bool,
    pub growth: f64,
    pub background: [f64; 3],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_coarse: 64,
            n_fine: 64,
            jitter: false,
            growth: DEFAULT_GROWTH,
            background: [0.0; 3],
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.n_coarse == 0 {
            return Err(RenderError::Camera("n_coarse must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything pose-specific needed to evaluate the field along target-space
/// rays: the deformer, the expanded hull bounding the samples and the
/// canonical-to-cube normalization.
#[derive(Debug, Clone)]
pub struct Frame {
    pub deformer: DeformerHandle,
    pub hull: Bvh,
    pub normalization: Normalization,
}

impl Frame {
    /// `expanded` is the deformed mesh pushed out by the growth offset.
    pub fn new(deformer: DeformerHandle, expanded: &TriMesh, normalization: Normalization) -> Self {
        Self {
            deformer,
            hull: Bvh::build(expanded),
            normalization,
        }
    }

    /// Cube-space canonical point for a target-space point.
    #[inline]
    pub fn canonical(&self, x: &Vec3) -> Result<Vec3, DeformError> {
        Ok(self.normalization.apply(&self.deformer.deform(x)?))
    }
}

/// Composited values for one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayOutput {
    pub features: Vec<f64>,
    pub alpha: f64,
    pub depth: f64,
    pub hit: bool,
}

fn evaluate(field: &RadianceField, frame: &Frame, ray: &Ray, depths: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RenderError> {
    let c = field.decoder.output_features();
    let mut sigmas = Vec::with_capacity(depths.len());
    let mut feats = Vec::with_capacity(depths.len() * c);
    for t in depths {
        let (s, f) = field.eval(&frame.canonical(&ray.at(*t))?);
        sigmas.push(s);
        feats.extend_from_slice(&f);
    }
    Ok((sigmas, feats))
}

/// Coarse pass, importance pass over the coarse weights, then one
/// composite over the merged samples.
pub fn render_ray(field: &RadianceField, frame: &Frame, ray: &Ray, cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> Result<RayOutput, RenderError> {
    let c = field.decoder.output_features();
    let mut hits = Vec::new();
    let Some((tn, tf)) = ray_mesh_bounds(ray, &frame.hull, &mut hits) else {
        return Ok(RayOutput {
            features: vec![0.0; c],
            alpha: 0.0,
            depth: 0.0,
            hit: false,
        });
    };
    let coarse = stratified_samples(tn, tf, cfg.n_coarse, cfg.jitter, rng);
    let (sigmas, feats) = evaluate(field, frame, ray, &coarse)?;
    if cfg.n_fine == 0 {
        let out = composite(&coarse, &sigmas, &feats, c)?;
        return Ok(RayOutput { features: out.features, alpha: out.alpha, depth: out.depth, hit: true });
    }
    let w = composite_weights(&coarse, &sigmas)?;
    let fine = importance_samples(&bin_edges(tn, tf, cfg.n_coarse), &w.weights, cfg.n_fine, cfg.jitter, rng);
    let fine: Vec<f64> = fine.into_iter().filter(|t| coarse.binary_search_by(|c| c.total_cmp(t)).is_err()).collect();
    let (fs, ff) = evaluate(field, frame, ray, &fine)?;
    // merge the two sorted sample sets, reusing coarse evaluations
    let n = coarse.len() + fine.len();
    let (mut depths, mut all_s, mut all_f) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n * c));
    let (mut a, mut b) = (0, 0);
    while a < coarse.len() || b < fine.len() {
        let take_coarse = b >= fine.len() || (a < coarse.len() && coarse[a] < fine[b]);
        if take_coarse {
            depths.push(coarse[a]);
            all_s.push(sigmas[a]);
            all_f.extend_from_slice(&feats[a * c..(a + 1) * c]);
            a += 1;
        } else {
            if depths.last() != Some(&fine[b]) {
                depths.push(fine[b]);
                all_s.push(fs[b]);
                all_f.extend_from_slice(&ff[b * c..(b + 1) * c]);
            }
            b += 1;
        }
    }
    let out = composite(&depths, &all_s, &all_f, c)?;
    Ok(RayOutput { features: out.features, alpha: out.alpha, depth: out.depth, hit: true })
}

/// RNG stream of one pixel.
pub fn pixel_rng(seed: u64, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel as u64);
    rng
}

/// Renders every pixel of `camera`. Each pixel draws from its own RNG
/// stream, so the result does not depend on scheduling.
pub fn render_image(field: &RadianceField, frame: &Frame, camera: &Camera, cfg: &SamplingConfig, seed: u64) -> Result<RenderedImage, RenderError> {
    cfg.validate()?;
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let c = field.decoder.output_features();
    let render_row = |j: usize| -> Result<Vec<RayOutput>, RenderError> {
        (0..w)
            .map(|i| render_ray(field, frame, &camera.ray(i, j), cfg, &mut pixel_rng(seed, j * w + i)))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<RayOutput>> = {
        use rayon::prelude::*;
        (0..h).into_par_iter().map(render_row).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<RayOutput>> = (0..h).map(render_row).collect::<Result<_, _>>()?;
    let mut img = RenderedImage {
        width: w,
        height: h,
        features: FloatImage::new(w, h, c),
        alpha: Vec::with_capacity(w * h),
        rgb: Vec::with_capacity(w * h * 3),
    };
    for (p, out) in rows.iter().flatten().enumerate() {
        for (k, f) in out.features.iter().enumerate() {
            img.features.data[p * c + k] = *f as f32;
        }
        img.alpha.push(out.alpha as f32);
        img.rgb.extend(pixel_rgb(&out.features, out.alpha, cfg.background).map(|v| v as f32));
    }
    Ok(img)
}
