//! Overfitting a radiance field to posed images.

mod adam;
mod checkpoint;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{sigmoid, DecoderGrad, FieldError, FieldGrad, FieldShape, PointTrace, RadianceField, Taps};
use crate::geom::Vec3;
use crate::render::{composite_backward, composite_weights, pixel_rgb, ray_mesh_bounds, stratified_samples, Camera, Frame, RenderError};

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, ADAM_MAGIC};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no supervised rays")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_rays: usize,
    pub steps: usize,
    pub seed: u64,
    /// Samples per ray; fitting uses a single stratified pass.
    pub samples_per_ray: usize,
    pub jitter: bool,
    pub background: [f64; 3],
    pub shape: FieldShape,
    /// Half-width of the uniform initial plane values.
    pub plane_init: f32,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step_size: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_rays: 1024,
            steps: 2000,
            seed: 0,
            samples_per_ray: 128,
            jitter: false,
            background: [0.0; 3],
            shape: FieldShape::default(),
            plane_init: 0.1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.step_size > 0.0) {
            return Err(FitError::Config("step_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(FitError::Config("betas must lie in [0, 1)".into()));
        }
        if self.batch_rays == 0 || self.samples_per_ray == 0 {
            return Err(FitError::Config("batch_rays and samples_per_ray must be positive".into()));
        }
        Ok(())
    }
}

/// One supervised view: camera, the frame (pose) it was taken in, the
/// `H x W x 3` target colors and an optional mask of pixels to supervise.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub camera: Camera,
    pub frame: Frame,
    pub image: Vec<f32>,
    pub mask: Option<Vec<bool>>,
}

impl TrainSample {
    pub fn new(camera: Camera, frame: Frame, image: Vec<f32>, mask: Option<Vec<bool>>) -> Result<Self, FitError> {
        let n = camera.width * camera.height;
        if image.len() != n * 3 {
            return Err(FitError::Shape(format!("image has {} values, camera needs {}", image.len(), n * 3)));
        }
        if mask.as_ref().is_some_and(|m| m.len() != n) {
            return Err(FitError::Shape("mask size does not match camera".into()));
        }
        Ok(Self { camera, frame, image, mask })
    }
}

/// Mean squared error over the kept rays (`mask[i] == true`, or all rays
/// without a mask) and the three color channels.
pub fn l2_loss(pred: &[[f64; 3]], target: &[[f64; 3]], mask: Option<&[bool]>) -> Result<f64, FitError> {
    if pred.len() != target.len() || mask.is_some_and(|m| m.len() != pred.len()) {
        return Err(FitError::Shape("prediction, target and mask lengths differ".into()));
    }
    let (mut sum, mut kept) = (0.0, 0usize);
    for (i, (p, t)) in pred.iter().zip(target).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        sum += (0..3).map(|k| (p[k] - t[k]).powi(2)).sum::<f64>();
        kept += 1;
    }
    if kept == 0 {
        return Err(FitError::Empty);
    }
    Ok(sum / (3 * kept) as f64)
}

/// A supervised ray with its bounds and, for deterministic sampling, the
/// cached cube-space canonical sample points.
#[derive(Debug, Clone)]
struct PreparedRay {
    sample: usize,
    pixel: usize,
    target: [f64; 3],
    bounds: Option<(f64, f64)>,
    depths: Vec<f64>,
    points: Vec<Vec3>,
}

/// All supervised rays of a set of samples, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct TrainSet<'a> {
    samples: &'a [TrainSample],
    rays: Vec<PreparedRay>,
    samples_per_ray: usize,
    jitter: bool,
    background: [f64; 3],
}

/// Per-chunk output of the forward/backward pass.
struct ChunkGrad {
    loss: f64,
    decoder: Option<DecoderGrad>,
    taps: Vec<[Taps; 3]>,
    d_feature: Vec<f64>,
}

/// Rays per unit of parallel work; fixed so results do not depend on the
/// thread count.
const CHUNK_RAYS: usize = 32;

impl<'a> TrainSet<'a> {
    pub fn prepare(samples: &'a [TrainSample], cfg: &FitConfig) -> Result<Self, FitError> {
        let mut rays = Vec::new();
        let mut hits = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (s, sample) in samples.iter().enumerate() {
            let cam = &sample.camera;
            for pixel in 0..cam.width * cam.height {
                if sample.mask.as_ref().is_some_and(|m| !m[pixel]) {
                    continue;
                }
                let ray = cam.ray(pixel % cam.width, pixel / cam.width);
                let bounds = ray_mesh_bounds(&ray, &sample.frame.hull, &mut hits);
                let (mut depths, mut points) = (Vec::new(), Vec::new());
                if let (Some((tn, tf)), false) = (bounds, cfg.jitter) {
                    depths = stratified_samples(tn, tf, cfg.samples_per_ray, false, &mut rng);
                    points = depths
                        .iter()
                        .map(|t| sample.frame.canonical(&ray.at(*t)))
                        .collect::<Result<_, _>>()
                        .map_err(RenderError::from)?;
                }
                let t = &sample.image[pixel * 3..pixel * 3 + 3];
                rays.push(PreparedRay {
                    sample: s,
                    pixel,
                    target: [t[0] as f64, t[1] as f64, t[2] as f64],
                    bounds,
                    depths,
                    points,
                });
            }
        }
        if rays.is_empty() {
            return Err(FitError::Empty);
        }
        Ok(Self {
            samples,
            rays,
            samples_per_ray: cfg.samples_per_ray,
            jitter: cfg.jitter,
            background: cfg.background,
        })
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Indices of rays that cross the sampling hull.
    pub fn hit_rays(&self) -> Vec<usize> {
        (0..self.rays.len()).filter(|&i| self.rays[i].bounds.is_some()).collect()
    }

    /// Source sample and pixel of ray `i`.
    pub fn ray_origin(&self, i: usize) -> (usize, usize) {
        (self.rays[i].sample, self.rays[i].pixel)
    }

    fn ray_points(&self, i: usize, step: u64, seed: u64) -> Result<(Vec<f64>, Vec<Vec3>), FitError> {
        let r = &self.rays[i];
        let Some((tn, tf)) = r.bounds else {
            return Ok((Vec::new(), Vec::new()));
        };
        if !self.jitter {
            return Ok((r.depths.clone(), r.points.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(i as u64);
        let sample = &self.samples[r.sample];
        let ray = sample.camera.ray(r.pixel % sample.camera.width, r.pixel / sample.camera.width);
        let depths = stratified_samples(tn, tf, self.samples_per_ray, true, &mut rng);
        let points = depths
            .iter()
            .map(|t| sample.frame.canonical(&ray.at(*t)))
            .collect::<Result<_, _>>()
            .map_err(RenderError::from)?;
        Ok((depths, points))
    }

    /// Predicted color of every ray.
    pub fn predict(&self, field: &RadianceField) -> Result<Vec<[f64; 3]>, FitError> {
        let mut out = Vec::with_capacity(self.rays.len());
        let mut traces = Vec::new();
        for i in 0..self.rays.len() {
            let (depths, points) = self.ray_points(i, 0, 0)?;
            out.push(self.forward_ray(field, &depths, &points, &mut traces)?.0);
        }
        Ok(out)
    }

    pub fn targets(&self) -> Vec<[f64; 3]> {
        self.rays.iter().map(|r| r.target).collect()
    }

    /// Returns the color and, for hit rays, the composited features and alpha.
    fn forward_ray(
        &self,
        field: &RadianceField,
        depths: &[f64],
        points: &[Vec3],
        traces: &mut Vec<PointTrace>,
    ) -> Result<([f64; 3], Vec<f64>, f64), FitError> {
        let c = field.decoder.output_features();
        if depths.is_empty() {
            return Ok((self.background, vec![0.0; c], 0.0));
        }
        traces.resize_with(points.len(), PointTrace::default);
        for (t, p) in traces.iter_mut().zip(points) {
            field.eval_traced(p, t);
        }
        let sigmas: Vec<f64> = traces.iter().map(PointTrace::density).collect();
        let w = composite_weights(depths, &sigmas)?;
        let mut feats = vec![0.0; c];
        for (wi, t) in w.weights.iter().zip(traces.iter()) {
            for (f, v) in feats.iter_mut().zip(t.features()) {
                *f += wi * v;
            }
        }
        let alpha = w.alpha();
        Ok((pixel_rgb(&feats, alpha, self.background), feats, alpha))
    }

    fn chunk(&self, field: &RadianceField, rays: &[usize], scale: f64, step: u64, seed: u64, want_grad: bool) -> Result<ChunkGrad, FitError> {
        let c = field.decoder.output_features();
        let mut out = ChunkGrad {
            loss: 0.0,
            decoder: want_grad.then(|| DecoderGrad::zeros_like(&field.decoder)),
            taps: Vec::new(),
            d_feature: Vec::new(),
        };
        let mut traces = Vec::new();
        for &i in rays {
            let (depths, points) = self.ray_points(i, step, seed)?;
            let (rgb, feats, alpha) = self.forward_ray(field, &depths, &points, &mut traces)?;
            let target = self.rays[i].target;
            let err: [f64; 3] = [0, 1, 2].map(|k| rgb[k] - target[k]);
            out.loss += err.iter().map(|e| e * e).sum::<f64>();
            let Some(dec_grad) = out.decoder.as_mut() else { continue };
            if depths.is_empty() {
                continue;
            }
            // rgb_k = sigmoid(F_k) alpha + bg_k (1 - alpha)
            let mut d_f = vec![0.0; c];
            let mut d_alpha = 0.0;
            for k in 0..3.min(c) {
                let g = 2.0 * err[k] * scale;
                let s = sigmoid(feats[k]);
                d_f[k] = g * alpha * s * (1.0 - s);
                d_alpha += g * (s - self.background[k]);
            }
            let n = depths.len();
            let flat: Vec<f64> = traces[..n].iter().flat_map(|t| t.features().iter().copied()).collect();
            let sigmas: Vec<f64> = traces[..n].iter().map(PointTrace::density).collect();
            let w = composite_weights(&depths, &sigmas)?;
            let (mut d_sigma, mut d_feats) = (vec![0.0; n], vec![0.0; n * c]);
            composite_backward(&depths, &flat, c, &w, &d_f, d_alpha, &mut d_sigma, &mut d_feats);
            let ch = field.planes.channels();
            for (j, t) in traces[..n].iter().enumerate() {
                let base = out.d_feature.len();
                out.d_feature.resize(base + ch, 0.0);
                field.backward_decoder(t, d_sigma[j], &d_feats[j * c..(j + 1) * c], dec_grad, &mut out.d_feature[base..]);
                out.taps.push(t.taps.expect("traced point has taps"));
            }
        }
        Ok(out)
    }

    /// Loss over `rays` and, if requested, its gradient. Results are
    /// independent of the order of `rays` and of the thread count.
    pub fn loss_and_grad(
        &self,
        field: &RadianceField,
        rays: &[usize],
        want_grad: bool,
        step: u64,
        seed: u64,
    ) -> Result<(f64, Option<FieldGrad>), FitError> {
        if rays.is_empty() {
            return Err(FitError::Empty);
        }
        let mut sorted = rays.to_vec();
        sorted.sort_unstable();
        let scale = 1.0 / (3 * sorted.len()) as f64;
        let run = |chunk: &[usize]| self.chunk(field, chunk, scale, step, seed, want_grad);
        #[cfg(feature = "parallel")]
        let parts: Vec<ChunkGrad> = {
            use rayon::prelude::*;
            sorted.par_chunks(CHUNK_RAYS).map(run).collect::<Result<_, _>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<ChunkGrad> = sorted.chunks(CHUNK_RAYS).map(run).collect::<Result<_, _>>()?;
        let mut loss = 0.0;
        let mut grad = want_grad.then(|| FieldGrad::zeros_like(field));
        let ch = field.planes.channels();
        for part in parts {
            loss += part.loss;
            if let (Some(g), Some(d)) = (grad.as_mut(), part.decoder) {
                for (a, b) in g.decoder.w1.iter_mut().zip(&d.w1) {
                    *a += b;
                }
                for (a, b) in g.decoder.b1.iter_mut().zip(&d.b1) {
                    *a += b;
                }
                for (a, b) in g.decoder.w2.iter_mut().zip(&d.w2) {
                    *a += b;
                }
                for (a, b) in g.decoder.b2.iter_mut().zip(&d.b2) {
                    *a += b;
                }
                for (k, taps) in part.taps.iter().enumerate() {
                    crate::field::scatter(taps, &part.d_feature[k * ch..(k + 1) * ch], &mut g.planes);
                }
            }
        }
        Ok((loss * scale, grad))
    }
}

/// Parameters after fitting, the optimizer state and the per-step batch loss.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub field: RadianceField,
    pub adam: AdamState,
    pub losses: Vec<f64>,
}

/// Fits a freshly initialized field (seeded by `cfg.seed`).
pub fn fit_scene(samples: &[TrainSample], cfg: &FitConfig) -> Result<FitResult, FitError> {
    let field = RadianceField::init(cfg.shape, cfg.plane_init, cfg.seed);
    let adam = AdamState::new(field.parameter_count());
    fit_from(field, adam, samples, cfg)
}

/// Continues fitting from given parameters and optimizer state.
pub fn fit_from(mut field: RadianceField, mut adam: AdamState, samples: &[TrainSample], cfg: &FitConfig) -> Result<FitResult, FitError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(FitError::Empty);
    }
    let set = TrainSet::prepare(samples, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = cfg.batch_rays.min(set.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let rays = index::sample(&mut rng, set.len(), batch).into_vec();
        let (loss, grad) = set.loss_and_grad(&field, &rays, true, adam.step, cfg.seed)?;
        adam_step(&mut field, &grad.expect("gradient requested"), &mut adam, cfg);
        log::debug!("step {} loss {loss:.6e}", adam.step);
        losses.push(loss);
    }
    Ok(FitResult { field, adam, losses })
}
