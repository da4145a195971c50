use super::RenderError;

/// Result of volumetric quadrature along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub features: Vec<f64>,
    pub alpha: f64,
    pub depth: f64,
}

/// Compositing weights `T_i * alpha_i` and transmittances `T_0..=T_n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Weights {
    pub weights: Vec<f64>,
    pub transmittance: Vec<f64>,
}

impl Weights {
    pub fn alpha(&self) -> f64 {
        1.0 - self.transmittance.last().copied().unwrap_or(1.0)
    }
}

fn check_depths(depths: &[f64]) -> Result<(), RenderError> {
    match depths.windows(2).position(|p| !(p[1] > p[0])) {
        Some(i) => Err(RenderError::NonMonotone(i + 1)),
        None => Ok(()),
    }
}

#[inline]
fn interval(depths: &[f64], i: usize) -> f64 {
    if i + 1 < depths.len() {
        depths[i + 1] - depths[i]
    } else {
        0.0
    }
}

/// Quadrature weights. The last sample's interval is zero.
pub fn composite_weights(depths: &[f64], sigmas: &[f64]) -> Result<Weights, RenderError> {
    check_depths(depths)?;
    let n = depths.len();
    let mut w = Weights {
        weights: Vec::with_capacity(n),
        transmittance: Vec::with_capacity(n + 1),
    };
    let mut t = 1.0;
    let mut optical = 0.0;
    w.transmittance.push(t);
    for i in 0..n {
        optical += sigmas[i] * interval(depths, i);
        let next = (-optical).exp();
        w.weights.push(t - next);
        t = next;
        w.transmittance.push(t);
    }
    Ok(w)
}

/// Composites `features` (`n x c`, sample-major) with densities `sigmas`.
pub fn composite(depths: &[f64], sigmas: &[f64], features: &[f64], c: usize) -> Result<Composite, RenderError> {
    let w = composite_weights(depths, sigmas)?;
    let mut out = vec![0.0; c];
    let mut depth = 0.0;
    for (i, wi) in w.weights.iter().enumerate() {
        for (o, f) in out.iter_mut().zip(&features[i * c..(i + 1) * c]) {
            *o += wi * f;
        }
        depth += wi * depths[i];
    }
    let alpha = w.alpha();
    Ok(Composite {
        features: out,
        alpha,
        depth: depth / alpha.max(1e-10),
    })
}

/// Reverse pass of [`composite`] for the features and alpha outputs.
/// Writes `dL/dsigma` per sample and `dL/dfeature` (`n x c`).
#[allow(clippy::too_many_arguments)]
pub fn composite_backward(
    depths: &[f64],
    features: &[f64],
    c: usize,
    w: &Weights,
    d_out: &[f64],
    d_alpha: f64,
    d_sigma: &mut [f64],
    d_features: &mut [f64],
) {
    let n = depths.len();
    let t_end = w.transmittance[n];
    // g_i = d_out . f_i; suffix holds sum_{i > k} w_i g_i
    let mut suffix = 0.0;
    for k in (0..n).rev() {
        let g: f64 = d_out.iter().zip(&features[k * c..(k + 1) * c]).map(|(a, b)| a * b).sum();
        let ds = w.transmittance[k + 1] * g - suffix + d_alpha * t_end;
        d_sigma[k] = ds * interval(depths, k);
        suffix += w.weights[k] * g;
        for (df, d) in d_features[k * c..(k + 1) * c].iter_mut().zip(d_out) {
            *df = w.weights[k] * d;
        }
    }
}

/// `fg * alpha + bg * (1 - alpha)`.
#[inline]
pub fn alpha_over(fg: [f64; 3], alpha: f64, bg: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|k| fg[k] * alpha + bg[k] * (1.0 - alpha))
}
