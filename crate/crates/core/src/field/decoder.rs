use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FieldError;

/// One-hidden-layer MLP mapping a `C` feature to a raw density and `C_out`
/// features. Weights are row-major with the input index as the row:
/// `w1[i * H + h]`, `w2[h * (1 + C_out) + o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    c_in: usize,
    hidden: usize,
    c_out: usize,
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
}

/// Gradient buffers shaped like a [`Decoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Decoder {
    pub fn zeros(c_in: usize, hidden: usize, c_out: usize) -> Self {
        Self {
            c_in,
            hidden,
            c_out,
            w1: vec![0.0; c_in * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * (1 + c_out)],
            b2: vec![0.0; 1 + c_out],
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(c_in: usize, hidden: usize, c_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Self::zeros(c_in, hidden, c_out);
        let a1 = 1.0 / (c_in as f32).sqrt();
        let a2 = 1.0 / (hidden as f32).sqrt();
        for v in d.w1.iter_mut().chain(d.b1.iter_mut()) {
            *v = rng.gen_range(-a1..=a1);
        }
        for v in d.w2.iter_mut().chain(d.b2.iter_mut()) {
            *v = rng.gen_range(-a2..=a2);
        }
        d
    }

    pub fn from_parts(
        c_in: usize,
        hidden: usize,
        c_out: usize,
        w1: Vec<f32>,
        b1: Vec<f32>,
        w2: Vec<f32>,
        b2: Vec<f32>,
    ) -> Result<Self, FieldError> {
        let d = Self { c_in, hidden, c_out, w1, b1, w2, b2 };
        let z = Self::zeros(c_in, hidden, c_out);
        if d.w1.len() != z.w1.len() || d.b1.len() != z.b1.len() || d.w2.len() != z.w2.len() || d.b2.len() != z.b2.len() {
            return Err(FieldError::Dimension("decoder weight shapes".into()));
        }
        d.check_finite()?;
        Ok(d)
    }

    pub fn input_dim(&self) -> usize {
        self.c_in
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_features(&self) -> usize {
        self.c_out
    }

    pub fn check_finite(&self) -> Result<(), FieldError> {
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        match all.clone().position(|v| !v.is_finite()) {
            Some(i) => Err(FieldError::NonFinite(format!("decoder parameter {i}"))),
            None => Ok(()),
        }
    }

    /// Forward pass writing the post-ReLU hidden layer and the raw outputs
    /// (`1 + C_out`, channel 0 is the density pre-activation).
    #[inline]
    pub fn forward(&self, feature: &[f64], hidden: &mut [f64], raw: &mut [f64]) {
        let h = self.hidden;
        let no = 1 + self.c_out;
        for (k, hk) in hidden.iter_mut().enumerate() {
            *hk = self.b1[k] as f64;
        }
        for (i, f) in feature.iter().enumerate() {
            let row = &self.w1[i * h..(i + 1) * h];
            for (hk, w) in hidden.iter_mut().zip(row) {
                *hk += *w as f64 * f;
            }
        }
        for hk in hidden.iter_mut() {
            *hk = hk.max(0.0);
        }
        for (o, r) in raw.iter_mut().enumerate() {
            *r = self.b2[o] as f64;
        }
        for (k, hk) in hidden.iter().enumerate() {
            if *hk == 0.0 {
                continue;
            }
            let row = &self.w2[k * no..(k + 1) * no];
            for (r, w) in raw.iter_mut().zip(row) {
                *r += *w as f64 * hk;
            }
        }
    }

    /// Density and output features for one input feature.
    pub fn decode(&self, feature: &[f64]) -> Result<(f64, Vec<f64>), FieldError> {
        if feature.len() != self.c_in {
            return Err(FieldError::Dimension(format!(
                "decoder expects {} input channels, got {}",
                self.c_in,
                feature.len()
            )));
        }
        let mut hidden = vec![0.0; self.hidden];
        let mut raw = vec![0.0; 1 + self.c_out];
        self.forward(feature, &mut hidden, &mut raw);
        Ok((softplus(raw[0]), raw[1..].to_vec()))
    }

    /// Accumulates parameter gradients given the forward values and
    /// `d_raw = dL/d raw`; adds `dL/d feature` into `d_feature`.
    #[inline]
    pub fn backward(
        &self,
        feature: &[f64],
        hidden: &[f64],
        d_raw: &[f64],
        grad: &mut DecoderGrad,
        d_feature: &mut [f64],
    ) {
        let h = self.hidden;
        let no = 1 + self.c_out;
        for (g, d) in grad.b2.iter_mut().zip(d_raw) {
            *g += d;
        }
        let mut stack = [0.0f64; 256];
        let mut heap;
        let d_hidden: &mut [f64] = if h <= stack.len() {
            &mut stack[..h]
        } else {
            heap = vec![0.0; h];
            &mut heap
        };
        for k in 0..h {
            if hidden[k] <= 0.0 {
                d_hidden[k] = 0.0;
                continue;
            }
            let row = &self.w2[k * no..(k + 1) * no];
            let grow = &mut grad.w2[k * no..(k + 1) * no];
            let mut acc = 0.0;
            for o in 0..no {
                grow[o] += hidden[k] * d_raw[o];
                acc += row[o] as f64 * d_raw[o];
            }
            d_hidden[k] = acc;
        }
        for (g, d) in grad.b1.iter_mut().zip(d_hidden.iter()) {
            *g += d;
        }
        for (i, f) in feature.iter().enumerate() {
            let row = &self.w1[i * h..(i + 1) * h];
            let grow = &mut grad.w1[i * h..(i + 1) * h];
            let mut acc = 0.0;
            for k in 0..h {
                grow[k] += f * d_hidden[k];
                acc += row[k] as f64 * d_hidden[k];
            }
            d_feature[i] += acc;
        }
    }
}

impl DecoderGrad {
    pub fn zeros_like(d: &Decoder) -> Self {
        Self {
            w1: vec![0.0; d.w1.len()],
            b1: vec![0.0; d.b1.len()],
            w2: vec![0.0; d.w2.len()],
            b2: vec![0.0; d.b2.len()],
        }
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
