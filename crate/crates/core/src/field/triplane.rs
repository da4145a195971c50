use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Vec3;

use super::FieldError;

/// Plane order in storage and in the file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Xy = 0,
    Yz = 1,
    Xz = 2,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Xy, Plane::Yz, Plane::Xz];

    /// Projection of a cube-space point onto this plane's `(u, v)`.
    #[inline]
    pub fn project(self, x: &Vec3) -> (f64, f64) {
        match self {
            Plane::Xy => (x.x, x.y),
            Plane::Yz => (x.y, x.z),
            Plane::Xz => (x.x, x.z),
        }
    }
}

/// Four texel offsets (into the whole tri-plane buffer) and bilinear weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taps {
    pub offset: [usize; 4],
    pub weight: [f64; 4],
}

/// Three `N x N x C` feature planes over `[-1, 1]^3`. Storage is one buffer:
/// planes in [`Plane`] order, each row-major with the `v` texel as the row,
/// channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct TriPlane {
    n: usize,
    c: usize,
    data: Vec<f32>,
}

impl TriPlane {
    pub fn zeros(n: usize, c: usize) -> Self {
        assert!(n >= 1 && c >= 1);
        Self {
            n,
            c,
            data: vec![0.0; 3 * n * n * c],
        }
    }

    pub fn from_data(n: usize, c: usize, data: Vec<f32>) -> Result<Self, FieldError> {
        if n == 0 || c == 0 || data.len() != 3 * n * n * c {
            return Err(FieldError::Dimension(format!(
                "tri-plane buffer of {} values does not match N={n}, C={c}",
                data.len()
            )));
        }
        let t = Self { n, c, data };
        t.check_finite()?;
        Ok(t)
    }

    /// Uniform values in `[-scale, scale]` from a seeded stream.
    pub fn random(n: usize, c: usize, scale: f32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Self::zeros(n, c);
        for v in &mut t.data {
            *v = rng.gen_range(-scale..=scale);
        }
        t
    }

    /// Fills every texel of every plane from `f(plane, u_center, v_center, channel)`.
    pub fn from_fn(n: usize, c: usize, f: impl Fn(Plane, f64, f64, usize) -> f32) -> Self {
        let mut t = Self::zeros(n, c);
        for p in Plane::ALL {
            for j in 0..n {
                for i in 0..n {
                    for ch in 0..c {
                        let idx = t.index(p, i, j, ch);
                        t.data[idx] = f(p, texel_center(i, n), texel_center(j, n), ch);
                    }
                }
            }
        }
        t
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, plane: Plane, i: usize, j: usize, ch: usize) -> usize {
        ((plane as usize * self.n + j) * self.n + i) * self.c + ch
    }

    pub fn texel(&self, plane: Plane, i: usize, j: usize) -> &[f32] {
        let o = self.index(plane, i, j, 0);
        &self.data[o..o + self.c]
    }

    pub fn check_finite(&self) -> Result<(), FieldError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(FieldError::NonFinite(format!("tri-plane value {i}"))),
            None => Ok(()),
        }
    }

    /// Bilinear taps for `(u, v)` on `plane`; coordinates clamp to `[-1, 1]`.
    #[inline]
    pub fn taps(&self, plane: Plane, u: f64, v: f64) -> Taps {
        let (i0, i1, tx) = axis(u, self.n);
        let (j0, j1, ty) = axis(v, self.n);
        Taps {
            offset: [
                self.index(plane, i0, j0, 0),
                self.index(plane, i1, j0, 0),
                self.index(plane, i0, j1, 0),
                self.index(plane, i1, j1, 0),
            ],
            weight: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        }
    }

    /// Taps of the three plane projections of `x`.
    #[inline]
    pub fn point_taps(&self, x: &Vec3) -> [Taps; 3] {
        Plane::ALL.map(|p| {
            let (u, v) = p.project(x);
            self.taps(p, u, v)
        })
    }

    /// Adds the weighted texels of `taps` to `out` (length `C`).
    #[inline]
    pub fn gather(&self, taps: &Taps, out: &mut [f64]) {
        for k in 0..4 {
            let w = taps.weight[k];
            if w == 0.0 {
                continue;
            }
            let texel = &self.data[taps.offset[k]..taps.offset[k] + self.c];
            for (o, t) in out.iter_mut().zip(texel) {
                *o += w * *t as f64;
            }
        }
    }

    /// Bilinear sample of one plane.
    pub fn sample_plane(&self, plane: Plane, u: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        self.gather(&self.taps(plane, u, v), &mut out);
        out
    }

    /// Sum of the three plane samples at `x`.
    pub fn aggregate(&self, x: &Vec3) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        self.aggregate_into(x, &mut out);
        out
    }

    pub fn aggregate_into(&self, x: &Vec3, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.point_taps(x) {
            self.gather(t, out);
        }
    }
}

/// Scatters `d_feature` back through `taps` into a gradient buffer laid out
/// like the tri-plane data.
#[inline]
pub fn scatter(taps: &[Taps; 3], d_feature: &[f64], grad: &mut [f64]) {
    let c = d_feature.len();
    for t in taps {
        for k in 0..4 {
            let w = t.weight[k];
            if w == 0.0 {
                continue;
            }
            for (g, d) in grad[t.offset[k]..t.offset[k] + c].iter_mut().zip(d_feature) {
                *g += w * d;
            }
        }
    }
}

/// Center of texel `i` along one axis.
#[inline]
pub fn texel_center(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}

#[inline]
fn axis(u: f64, n: usize) -> (usize, usize, f64) {
    let u = u.clamp(-1.0, 1.0);
    let last = (n - 1) as f64;
    let f = ((u + 1.0) * 0.5 * n as f64 - 0.5).clamp(0.0, last);
    let i0 = (f.floor() as usize).min(n.saturating_sub(2));
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, f - i0 as f64)
}
