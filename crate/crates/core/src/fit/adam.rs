use crate::field::{FieldGrad, RadianceField};

use super::FitConfig;

/// First and second moment estimates over all parameters in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update. Parameters are stored as `f32`; the
/// update is computed in `f64`.
pub fn adam_step(field: &mut RadianceField, grad: &FieldGrad, state: &mut AdamState, cfg: &FitConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut k = 0;
    for (params, grads) in field.buffers_mut().into_iter().zip(grad.buffers()) {
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut state.m[k];
            let v = &mut state.v[k];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let update = cfg.step_size * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            *p = (*p as f64 - update) as f32;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Decoder, TriPlane};

    fn scalar_field(x: f32) -> RadianceField {
        let mut planes = TriPlane::zeros(1, 1);
        planes.data_mut().iter_mut().for_each(|v| *v = x);
        RadianceField::new(planes, Decoder::zeros(1, 1, 0)).unwrap()
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut f = scalar_field(0.5);
        let before = f.clone();
        let mut st = AdamState::new(f.parameter_count());
        st.m[0] = 1.0;
        st.v[0] = 1.0;
        let g = FieldGrad::zeros_like(&f);
        let cfg = FitConfig::default();
        let mut st0 = AdamState::new(f.parameter_count());
        adam_step(&mut f, &g, &mut st0, &cfg);
        assert_eq!(f, before);
        let mut f2 = scalar_field(0.5);
        adam_step(&mut f2, &g, &mut st, &cfg);
        assert_eq!(st.m[0], 0.9);
        assert!((st.v[0] - 0.999).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_sign_scaled() {
        let mut f = scalar_field(0.5);
        let mut g = FieldGrad::zeros_like(&f);
        g.planes[0] = 3.0;
        g.planes[1] = -0.01;
        let cfg = FitConfig::default();
        let mut st = AdamState::new(f.parameter_count());
        adam_step(&mut f, &g, &mut st, &cfg);
        assert!((f.planes.data()[0] as f64 - (0.5 - 0.002)).abs() < 1e-7);
        assert!((f.planes.data()[1] as f64 - (0.5 + 0.002)).abs() < 1e-7);
        assert_eq!(f.planes.data()[2], 0.5);
    }

    #[test]
    fn descends_a_parabola() {
        let mut f = scalar_field(1.0);
        let cfg = FitConfig { step_size: 0.1, ..Default::default() };
        let mut st = AdamState::new(f.parameter_count());
        for _ in 0..10 {
            let mut g = FieldGrad::zeros_like(&f);
            g.planes[0] = 2.0 * f.planes.data()[0] as f64;
            adam_step(&mut f, &g, &mut st, &cfg);
        }
        assert!(f.planes.data()[0].abs() < 0.5);
    }
}
