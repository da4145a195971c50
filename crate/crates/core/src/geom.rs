//! Small geometric kernels shared by the mesh, deformation and rendering code.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    pub fn surface_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let e = self.extent();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test. Returns the parametric interval of the ray inside the box.
    #[inline]
    pub fn ray_interval(&self, origin: &Vec3, inv_dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                // parallel to this slab: inside it or never
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Rigid transform `p -> rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Rigid {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Self::new(Mat3::identity(), t)
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn compose(&self, inner: &Rigid) -> Rigid {
        Rigid::new(
            self.rotation * inner.rotation,
            self.rotation * inner.translation + self.translation,
        )
    }

    /// True when the rotation is orthonormal with determinant +1 (within `tol`).
    pub fn is_proper(&self, tol: f64) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Mat3::identity()).abs().max() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
    }

    pub fn from_row_major(rows: [[f64; 3]; 3], translation: [f64; 3]) -> Self {
        Self::new(
            Mat3::new(
                rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
                rows[2][1], rows[2][2],
            ),
            Vec3::from(translation),
        )
    }

    pub fn to_row_major(&self) -> ([[f64; 3]; 3], [f64; 3]) {
        let r = &self.rotation;
        (
            [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            [self.translation.x, self.translation.y, self.translation.z],
        )
    }
}

/// Rotation about the y axis by `angle` radians.
pub fn rotation_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the z axis by `angle` radians.
pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Closest point on triangle `(a, b, c)` to `p`, with the barycentric
/// coordinates `[u, v, w]` of that point (`u*a + v*b + w*c`), each in `[0, 1]`.
#[inline]
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Barycentric coordinates of the orthogonal projection of `p` onto the
/// plane of triangle `(a, b, c)`. Coordinates may leave `[0, 1]`.
#[inline]
pub fn plane_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

/// Moller-Trumbore ray/triangle test. Returns the ray parameter of the hit.
#[inline]
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv_det)
}

/// Squared distance from `p` to segment `[a, b]`.
#[inline]
pub fn point_segment_distance_squared(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm_squared()
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (Vec3, Vec3, Vec3) {
        (
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = tri();
        let (p, bc) = closest_point_on_triangle(&Vec3::new(0.25, 0.25, 1.0), &a, &b, &c);
        assert!((p - Vec3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
        assert!((bc[0] - 0.5).abs() < 1e-15);
        let (p, bc) = closest_point_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(p, a);
        assert_eq!(bc, [1.0, 0.0, 0.0]);
        let (p, bc) = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((p - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        assert!((bc[1] - 0.5).abs() < 1e-15 && (bc[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plane_projection_matches_interior_closest_point() {
        let (a, b, c) = tri();
        let p = Vec3::new(0.2, 0.3, -0.7);
        let (_, clamped) = closest_point_on_triangle(&p, &a, &b, &c);
        let plane = plane_barycentric(&p, &a, &b, &c);
        for k in 0..3 {
            assert!((clamped[k] - plane[k]).abs() < 1e-14);
        }
        let outside = plane_barycentric(&Vec3::new(2.0, 0.0, 0.0), &a, &b, &c);
        assert!((outside[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ray_hits_and_misses() {
        let (a, b, c) = tri();
        let o = Vec3::new(0.2, 0.2, 3.0);
        let d = Vec3::new(0.0, 0.0, -1.0);
        assert!((ray_triangle(&o, &d, &a, &b, &c).unwrap() - 3.0).abs() < 1e-14);
        assert!(ray_triangle(&Vec3::new(2.0, 2.0, 3.0), &d, &a, &b, &c).is_none());
    }

    #[test]
    fn rigid_inverse_roundtrip() {
        let r = Rigid::new(rotation_y(0.7) * rotation_z(-0.3), Vec3::new(1.0, -2.0, 0.5));
        assert!(r.is_proper(1e-12));
        let p = Vec3::new(0.3, 0.1, -4.0);
        assert!((r.inverse().apply(&r.apply(&p)) - p).norm() < 1e-14);
    }

    #[test]
    fn aabb_ray_interval() {
        let b = Aabb {
            min: Vec3::repeat(-1.0),
            max: Vec3::repeat(1.0),
        };
        let o = Vec3::new(0.0, 0.0, -5.0);
        let d = Vec3::new(0.0, 0.0, 1.0);
        let inv = d.map(|x| 1.0 / x);
        let (t0, t1) = b.ray_interval(&o, &inv).unwrap();
        assert_eq!((t0, t1), (4.0, 6.0));
        assert_eq!(b.distance_squared(&Vec3::new(3.0, 0.0, 0.0)), 4.0);
    }
}
