//! Mean value coordinates for closed triangle meshes, the full per-point
//! deformation and its trilinear grid approximation.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::geom::{closest_point_on_triangle, Aabb, Vec3};
use crate::mesh::{PosedPair, TriMesh};

/// Distance below which the query is treated as sitting on a vertex.
pub const VERTEX_EPS: f64 = 1e-12;
/// Points this close to the surface are moved off it before evaluation.
pub const SURFACE_EPS: f64 = 1e-9;
/// Length of that move, along the outward normal of the nearest face.
pub const SURFACE_NUDGE: f64 = 1e-7;
const ON_TRIANGLE_EPS: f64 = 1e-12;
const COPLANAR_EPS: f64 = 1e-8;

/// Per-query scratch reused across evaluations.
#[derive(Debug, Default, Clone)]
pub struct MvcScratch {
    unit: Vec<Vec3>,
    dist: Vec<f64>,
    /// per edge: subtended angle, its sine and cosine
    angle: Vec<[f64; 3]>,
}

/// A closed mesh with the edge table and normals MVC evaluation needs.
#[derive(Debug, Clone)]
pub struct MvcCage {
    mesh: TriMesh,
    face_normals: Vec<Vec3>,
    edges: Vec<[usize; 2]>,
    /// `face_edges[f][i]` is the edge opposite corner `i` of face `f`
    face_edges: Vec<[usize; 3]>,
}

impl MvcCage {
    pub fn new(mesh: TriMesh) -> Self {
        let face_normals = mesh.face_normals().normals;
        let mut index = std::collections::HashMap::new();
        let mut edges = Vec::new();
        let face_edges = mesh
            .faces
            .iter()
            .map(|f| {
                [0, 1, 2].map(|i| {
                    let (a, b) = (f[(i + 1) % 3], f[(i + 2) % 3]);
                    *index.entry((a.min(b), a.max(b))).or_insert_with(|| {
                        edges.push([a.min(b), a.max(b)]);
                        edges.len() - 1
                    })
                })
            })
            .collect();
        Self {
            mesh,
            face_normals,
            edges,
            face_edges,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }
}

/// Receives the per-triangle weight contributions.
trait Accumulate {
    fn add(&mut self, vertex: usize, weight: f64);
}

struct PerVertex<'a>(&'a mut [f64]);

impl Accumulate for PerVertex<'_> {
    #[inline]
    fn add(&mut self, vertex: usize, weight: f64) {
        self.0[vertex] += weight;
    }
}

/// Accumulates `sum w_i * target_i` and `sum w_i` directly.
struct Combine<'a> {
    target: &'a [Vec3],
    sum: Vec3,
    total: f64,
}

impl Accumulate for Combine<'_> {
    #[inline]
    fn add(&mut self, vertex: usize, weight: f64) {
        self.sum += self.target[vertex] * weight;
        self.total += weight;
    }
}

enum Outcome {
    Done,
    Vertex(usize),
    /// Lies on triangle with the given planar weights.
    OnTriangle([usize; 3], [f64; 3]),
}

fn near_surface_normal(x: &Vec3, cage: &MvcCage) -> Option<Vec3> {
    let mesh = &cage.mesh;
    let mut best: Option<(f64, usize)> = None;
    for (f, n) in cage.face_normals.iter().enumerate() {
        let a = mesh.vertices[mesh.faces[f][0]];
        // cheap slab rejection before the exact distance
        if (x - a).dot(n).abs() > SURFACE_EPS && *n != Vec3::zeros() {
            continue;
        }
        let [a, b, c] = mesh.triangle(f);
        let (q, _) = closest_point_on_triangle(x, &a, &b, &c);
        let d = (x - q).norm();
        if d <= SURFACE_EPS && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, f));
        }
    }
    best.map(|(_, f)| cage.face_normals[f])
}

fn evaluate(x: &Vec3, cage: &MvcCage, scratch: &mut MvcScratch, acc: &mut impl Accumulate) -> Outcome {
    let mesh = &cage.mesh;
    let n = mesh.vertices.len();
    scratch.unit.resize(n, Vec3::zeros());
    scratch.dist.resize(n, 0.0);
    scratch.angle.resize(cage.edges.len(), [0.0; 3]);
    for (j, p) in mesh.vertices.iter().enumerate() {
        let v = p - x;
        let d = v.norm();
        if d < VERTEX_EPS {
            return Outcome::Vertex(j);
        }
        scratch.dist[j] = d;
        scratch.unit[j] = v / d;
    }
    let (u, dist) = (&scratch.unit, &scratch.dist);
    // half-angle forms stay accurate for nearly opposite directions
    for (e, [a, b]) in scratch.angle.iter_mut().zip(&cage.edges) {
        let p = (u[*a] - u[*b]).norm();
        let q = (u[*a] + u[*b]).norm();
        *e = [2.0 * p.atan2(q), 0.5 * p * q, 0.25 * (q * q - p * p)];
    }
    let angle = &scratch.angle;
    for (f, fe) in mesh.faces.iter().zip(&cage.face_edges) {
        let [i0, i1, i2] = *f;
        let [a0, a1, a2] = fe.map(|e| angle[e]);
        let theta = [a0[0], a1[0], a2[0]];
        let sin_t = [a0[1], a1[1], a2[1]];
        let cos_t = [a0[2], a1[2], a2[2]];
        let h = 0.5 * (theta[0] + theta[1] + theta[2]);
        let d = [dist[i0], dist[i1], dist[i2]];
        if PI - h < ON_TRIANGLE_EPS {
            let w = [
                sin_t[0] * d[2] * d[1],
                sin_t[1] * d[0] * d[2],
                sin_t[2] * d[1] * d[0],
            ];
            return Outcome::OnTriangle(*f, w);
        }
        let (sh, ch) = h.sin_cos();
        let sin_h_minus = |i: usize| sh * cos_t[i] - ch * sin_t[i];
        let c = [
            2.0 * sh * sin_h_minus(0) / (sin_t[1] * sin_t[2]) - 1.0,
            2.0 * sh * sin_h_minus(1) / (sin_t[2] * sin_t[0]) - 1.0,
            2.0 * sh * sin_h_minus(2) / (sin_t[0] * sin_t[1]) - 1.0,
        ];
        let sign = u[i0].dot(&u[i1].cross(&u[i2])).signum();
        let s = c.map(|ci| sign * (1.0 - ci * ci).max(0.0).sqrt());
        if s.iter().any(|si| si.abs() <= COPLANAR_EPS) {
            continue;
        }
        let w0 = (theta[0] - c[1] * theta[2] - c[2] * theta[1]) / (d[0] * sin_t[1] * s[2]);
        let w1 = (theta[1] - c[2] * theta[0] - c[0] * theta[2]) / (d[1] * sin_t[2] * s[0]);
        let w2 = (theta[2] - c[0] * theta[1] - c[1] * theta[0]) / (d[2] * sin_t[0] * s[1]);
        acc.add(i0, w0);
        acc.add(i1, w1);
        acc.add(i2, w2);
    }
    Outcome::Done
}

/// Moves `x` off the surface when it lies within [`SURFACE_EPS`] of it.
/// Vertex queries are left in place so they hit the indicator branch.
fn off_surface(x: &Vec3, cage: &MvcCage) -> Vec3 {
    if cage.mesh.vertices.iter().any(|v| (v - x).norm() < VERTEX_EPS) {
        return *x;
    }
    match near_surface_normal(x, cage) {
        Some(n) => x + n * SURFACE_NUDGE,
        None => *x,
    }
}

/// Mean value coordinates of `x` with respect to the vertices of a closed mesh.
/// Weights sum to one. A query on a vertex returns that vertex's indicator.
pub fn mvc_weights(x: &Vec3, mesh: &TriMesh) -> Vec<f64> {
    mvc_weights_with(x, &MvcCage::new(mesh.clone()), &mut MvcScratch::default())
}

pub fn mvc_weights_with(x: &Vec3, cage: &MvcCage, scratch: &mut MvcScratch) -> Vec<f64> {
    let mut w = vec![0.0; cage.mesh.vertices.len()];
    let xq = off_surface(x, cage);
    match evaluate(&xq, cage, scratch, &mut PerVertex(&mut w)) {
        Outcome::Vertex(j) => {
            w.iter_mut().for_each(|v| *v = 0.0);
            w[j] = 1.0;
        }
        Outcome::OnTriangle(f, tw) => {
            w.iter_mut().for_each(|v| *v = 0.0);
            let total: f64 = tw.iter().sum();
            for k in 0..3 {
                w[f[k]] = tw[k] / total;
            }
        }
        Outcome::Done => {
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
        }
    }
    w
}

/// Full mean-value-coordinate deformation: weights against the deformed mesh,
/// applied to the canonical vertices.
#[derive(Debug, Clone)]
pub struct MvcDeformer {
    pair: PosedPair,
    cage: MvcCage,
}

impl MvcDeformer {
    pub fn new(pair: PosedPair) -> Self {
        let cage = MvcCage::new(pair.deformed.clone());
        Self { pair, cage }
    }

    pub fn pair(&self) -> &PosedPair {
        &self.pair
    }

    pub fn deform(&self, x: &Vec3) -> Vec3 {
        self.deform_with(x, &mut MvcScratch::default())
    }

    pub fn deform_with(&self, x: &Vec3, scratch: &mut MvcScratch) -> Vec3 {
        let target = &self.pair.canonical.vertices;
        let xq = off_surface(x, &self.cage);
        let mut acc = Combine {
            target,
            sum: Vec3::zeros(),
            total: 0.0,
        };
        match evaluate(&xq, &self.cage, scratch, &mut acc) {
            Outcome::Vertex(j) => target[j],
            Outcome::OnTriangle(f, w) => {
                (target[f[0]] * w[0] + target[f[1]] * w[1] + target[f[2]] * w[2])
                    / (w[0] + w[1] + w[2])
            }
            Outcome::Done => acc.sum / acc.total,
        }
    }
}

/// Full MVC deformation precomputed on a regular lattice and read back with
/// trilinear interpolation.
#[derive(Debug)]
pub struct MvcGrid {
    resolution: usize,
    bounds: Aabb,
    samples: Vec<Vec3>,
    warned: AtomicBool,
}

impl Clone for MvcGrid {
    fn clone(&self) -> Self {
        Self {
            resolution: self.resolution,
            bounds: self.bounds,
            samples: self.samples.clone(),
            warned: AtomicBool::new(self.warned.load(Ordering::Relaxed)),
        }
    }
}

/// Bounds padding: each half-extent of the deformed bounding box grows by 10%.
pub const GRID_MARGIN: f64 = 0.1;

impl MvcGrid {
    pub fn build(pair: &PosedPair, resolution: usize) -> Self {
        assert!(resolution >= 2, "grid resolution must be at least 2");
        let bbox = pair.deformed.bbox();
        let half = bbox.extent() * (0.5 * (1.0 + GRID_MARGIN));
        // flat boxes still need a non-zero cell size
        let pad = 1e-6 * (1.0 + bbox.diagonal());
        let half = half.map(|h| h.max(pad));
        let center = bbox.center();
        let bounds = Aabb {
            min: center - half,
            max: center + half,
        };
        let deformer = MvcDeformer::new(pair.clone());
        let mut scratch = MvcScratch::default();
        let mut samples = Vec::with_capacity(resolution.pow(3));
        let grid = Self {
            resolution,
            bounds,
            samples: Vec::new(),
            warned: AtomicBool::new(false),
        };
        for k in 0..resolution {
            for j in 0..resolution {
                for i in 0..resolution {
                    let x = grid.node(i, j, k);
                    samples.push(deformer.deform_with(&x, &mut scratch));
                }
            }
        }
        Self { samples, ..grid }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn samples(&self) -> &[Vec3] {
        &self.samples
    }

    /// Lattice position of node `(i, j, k)`.
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let step = self.bounds.extent() / (self.resolution - 1) as f64;
        self.bounds.min + Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z)
    }

    pub fn sample(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.samples[(k * self.resolution + j) * self.resolution + i]
    }

    pub fn deform(&self, x: &Vec3) -> Vec3 {
        let r = self.resolution;
        let last = (r - 1) as f64;
        let ext = self.bounds.extent();
        if !self.bounds.contains(x) && !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("mvc grid query outside bounds; clamping");
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let mut f = ((x[a] - self.bounds.min[a]) / ext[a] * last).clamp(0.0, last);
            let rounded = f.round();
            if (f - rounded).abs() < 1e-9 {
                f = rounded;
            }
            let c = (f.floor() as usize).min(r - 2);
            cell[a] = c;
            frac[a] = f - c as f64;
        }
        let [i, j, k] = cell;
        let [tx, ty, tz] = frac;
        let lerp = |a: Vec3, b: Vec3, t: f64| a * (1.0 - t) + b * t;
        let c00 = lerp(self.sample(i, j, k), self.sample(i + 1, j, k), tx);
        let c10 = lerp(self.sample(i, j + 1, k), self.sample(i + 1, j + 1, k), tx);
        let c01 = lerp(self.sample(i, j, k + 1), self.sample(i + 1, j, k + 1), tx);
        let c11 = lerp(self.sample(i, j + 1, k + 1), self.sample(i + 1, j + 1, k + 1), tx);
        lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz)
    }
}
