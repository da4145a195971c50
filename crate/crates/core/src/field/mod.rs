//! Tri-plane features, the density/feature decoder and the composed field.

mod decoder;
mod io;
mod triplane;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deform::{DeformError, DeformerHandle};
use crate::geom::{Aabb, Vec3};

pub use decoder::{sigmoid, softplus, Decoder, DecoderGrad};
pub use io::{read_field, read_field_from, write_field, write_field_to, TPLF_MAGIC};
pub use triplane::{scatter, texel_center, Plane, Taps, TriPlane};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

/// Tri-plane and decoder sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub resolution: usize,
    pub channels: usize,
    pub hidden: usize,
    pub out_features: usize,
}

impl Default for FieldShape {
    fn default() -> Self {
        Self {
            resolution: 128,
            channels: 32,
            hidden: 64,
            out_features: 32,
        }
    }
}

/// Similarity map from world space into the `[-1, 1]^3` field cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 3],
    pub scale: f64,
}

/// Half-width of the cube region the fitted box is mapped to.
pub const CUBE_FILL: f64 = 0.9;

impl Normalization {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    /// Centers `bbox` and scales its largest half-extent to [`CUBE_FILL`].
    pub fn fit(bbox: &Aabb) -> Self {
        let half = bbox.extent().max() * 0.5;
        let scale = if half > 0.0 { CUBE_FILL / half } else { 1.0 };
        Self {
            center: bbox.center().into(),
            scale,
        }
    }

    #[inline]
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        (x - Vec3::from(self.center)) * self.scale
    }

    #[inline]
    pub fn invert(&self, y: &Vec3) -> Vec3 {
        y / self.scale + Vec3::from(self.center)
    }
}

/// Learnable radiance field: tri-plane features plus decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceField {
    pub planes: TriPlane,
    pub decoder: Decoder,
}

/// Gradient buffers shaped like a [`RadianceField`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrad {
    pub planes: Vec<f64>,
    pub decoder: DecoderGrad,
}

/// Forward values at one canonical point kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct PointTrace {
    pub taps: Option<[Taps; 3]>,
    pub feature: Vec<f64>,
    pub hidden: Vec<f64>,
    pub raw: Vec<f64>,
}

impl PointTrace {
    pub fn density(&self) -> f64 {
        softplus(self.raw[0])
    }

    pub fn features(&self) -> &[f64] {
        &self.raw[1..]
    }
}

impl RadianceField {
    pub fn new(planes: TriPlane, decoder: Decoder) -> Result<Self, FieldError> {
        if decoder.input_dim() != planes.channels() {
            return Err(FieldError::Dimension(format!(
                "decoder input {} does not match plane channels {}",
                decoder.input_dim(),
                planes.channels()
            )));
        }
        Ok(Self { planes, decoder })
    }

    /// Seeded initial field: planes uniform in `[-plane_scale, plane_scale]`,
    /// decoder uniform by fan-in.
    pub fn init(shape: FieldShape, plane_scale: f32, seed: u64) -> Self {
        Self {
            planes: TriPlane::random(shape.resolution, shape.channels, plane_scale, seed),
            decoder: Decoder::init(shape.channels, shape.hidden, shape.out_features, seed ^ 0x9e37_79b9_7f4a_7c15),
        }
    }

    pub fn shape(&self) -> FieldShape {
        FieldShape {
            resolution: self.planes.resolution(),
            channels: self.planes.channels(),
            hidden: self.decoder.hidden_dim(),
            out_features: self.decoder.output_features(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        let d = &self.decoder;
        self.planes.data().len() + d.w1.len() + d.b1.len() + d.w2.len() + d.b2.len()
    }

    /// All parameter buffers in file order.
    pub fn buffers_mut(&mut self) -> [&mut [f32]; 5] {
        let d = &mut self.decoder;
        [self.planes.data_mut(), &mut d.w1, &mut d.b1, &mut d.w2, &mut d.b2]
    }

    pub fn buffers(&self) -> [&[f32]; 5] {
        let d = &self.decoder;
        [self.planes.data(), &d.w1, &d.b1, &d.w2, &d.b2]
    }

    /// Density and features at a cube-space canonical point.
    pub fn eval(&self, xc: &Vec3) -> (f64, Vec<f64>) {
        let mut t = PointTrace::default();
        self.eval_traced(xc, &mut t);
        (t.density(), t.features().to_vec())
    }

    pub fn eval_traced(&self, xc: &Vec3, trace: &mut PointTrace) {
        let shape = self.shape();
        trace.feature.resize(shape.channels, 0.0);
        trace.hidden.resize(shape.hidden, 0.0);
        trace.raw.resize(1 + shape.out_features, 0.0);
        let taps = self.planes.point_taps(xc);
        trace.feature.iter_mut().for_each(|f| *f = 0.0);
        for t in &taps {
            self.planes.gather(t, &mut trace.feature);
        }
        trace.taps = Some(taps);
        self.decoder.forward(&trace.feature, &mut trace.hidden, &mut trace.raw);
    }

    /// Accumulates gradients for one traced point given `dL/dsigma` and
    /// `dL/dfeatures`.
    pub fn backward_point(&self, trace: &PointTrace, d_sigma: f64, d_features: &[f64], grad: &mut FieldGrad) {
        let mut d_feature = vec![0.0; trace.feature.len()];
        self.backward_decoder(trace, d_sigma, d_features, &mut grad.decoder, &mut d_feature);
        if let Some(taps) = &trace.taps {
            scatter(taps, &d_feature, &mut grad.planes);
        }
    }

    /// Decoder part of [`backward_point`](Self::backward_point); writes the
    /// gradient with respect to the aggregated plane feature into `d_feature`
    /// for the caller to scatter.
    pub fn backward_decoder(
        &self,
        trace: &PointTrace,
        d_sigma: f64,
        d_features: &[f64],
        grad: &mut DecoderGrad,
        d_feature: &mut [f64],
    ) {
        let no = trace.raw.len();
        let mut stack = [0.0f64; 129];
        let mut heap;
        let d_raw: &mut [f64] = if no <= stack.len() {
            &mut stack[..no]
        } else {
            heap = vec![0.0; no];
            &mut heap
        };
        d_raw[0] = d_sigma * sigmoid(trace.raw[0]);
        d_raw[1..].copy_from_slice(d_features);
        d_feature.iter_mut().for_each(|d| *d = 0.0);
        self.decoder.backward(&trace.feature, &trace.hidden, d_raw, grad, d_feature);
    }
}

impl FieldGrad {
    pub fn zeros_like(f: &RadianceField) -> Self {
        Self {
            planes: vec![0.0; f.planes.data().len()],
            decoder: DecoderGrad::zeros_like(&f.decoder),
        }
    }

    pub fn buffers(&self) -> [&[f64]; 5] {
        let d = &self.decoder;
        [&self.planes, &d.w1, &d.b1, &d.w2, &d.b2]
    }

    pub fn buffers_mut(&mut self) -> [&mut [f64]; 5] {
        let d = &mut self.decoder;
        [&mut self.planes, &mut d.w1, &mut d.b1, &mut d.w2, &mut d.b2]
    }

    pub fn add_assign(&mut self, other: &FieldGrad) {
        for (a, b) in self.buffers_mut().into_iter().zip(other.buffers()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.buffers_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn clear(&mut self) {
        for a in self.buffers_mut() {
            a.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Field value at a target-space point: the deformer takes it to the
/// canonical pose, `norm` into the field cube.
pub fn field_at(
    x_target: &Vec3,
    field: &RadianceField,
    deformer: &DeformerHandle,
    norm: &Normalization,
) -> Result<(f64, Vec<f64>), FieldError> {
    let xc = norm.apply(&deformer.deform(x_target)?);
    Ok(field.eval(&xc))
}
