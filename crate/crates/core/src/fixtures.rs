//! Deterministic synthetic scenes: sphere and arm mesh pairs, skeletons and
//! a small radiance scene rendered from a known field.

use crate::deform::{Bone, DeformerHandle, Method, Skeleton};
use crate::field::{FieldShape, Normalization, RadianceField};
use crate::geom::{rotation_y, Rigid, Vec3};
use crate::mesh::{decimate_pair, shapes, MeshError, PosedPair, TriMesh};
use crate::render::{render_image, Camera, Frame, RenderError, RenderedImage, SamplingConfig, DEFAULT_GROWTH};

pub const SPHERE_RADII: [f64; 2] = [0.5, 0.6];
pub const SPHERE_LEVEL: u32 = 3;

pub const ARM_RADIUS: f64 = 0.15;
pub const ARM_LENGTH: f64 = 1.7;
/// Ring and segment counts giving 13,776 faces.
pub const ARM_FINE: (usize, usize) = (123, 56);
pub const ARM_DECIMATED_FACES: usize = 1376;
pub const ARM_BEND: f64 = std::f64::consts::FRAC_PI_4;
/// Half-length of the bent region around z = 0.
pub const ARM_BEND_HALF: f64 = 0.25;

/// Canonical sphere of radius 0.5 and the same mesh scaled to 0.6.
pub fn sphere_pair() -> PosedPair {
    let c = shapes::icosphere(SPHERE_RADII[0], SPHERE_LEVEL);
    let s = SPHERE_RADII[1] / SPHERE_RADII[0];
    let d = c.transformed(|v| v * s);
    PosedPair::new(c, d).expect("scaled copy shares faces")
}

fn bend_radius() -> f64 {
    2.0 * ARM_BEND_HALF / ARM_BEND
}

/// Centerline point and bend angle at canonical height `z`.
fn bend_frame(z: f64) -> (Vec3, f64) {
    let (b, r) = (ARM_BEND_HALF, bend_radius());
    if z <= -b {
        return (Vec3::new(0.0, 0.0, z), 0.0);
    }
    let phi = ((z + b) / r).min(ARM_BEND);
    let arc = Vec3::new(r * (1.0 - phi.cos()), 0.0, -b + r * phi.sin());
    let beyond = (z - b).max(0.0);
    (arc + Vec3::new(phi.sin(), 0.0, phi.cos()) * beyond, phi)
}

/// Bends a straight arm along z by 45 degrees towards +x over
/// `|z| < ARM_BEND_HALF`, keeping cross-sections rigid.
pub fn bend(p: &Vec3) -> Vec3 {
    let (c, phi) = bend_frame(p.z);
    c + rotation_y(phi) * Vec3::new(p.x, p.y, 0.0)
}

/// Straight canonical arm and its bent pose, both with `rings x segments`
/// capsule topology.
pub fn arm_pair_with(rings: usize, segments: usize) -> PosedPair {
    let c = shapes::capsule(rings, segments, ARM_RADIUS, ARM_LENGTH);
    let d = c.transformed(bend);
    PosedPair::new(c, d).expect("bent copy shares faces")
}

/// The 13,776-face arm pair.
pub fn arm_pair_fine() -> PosedPair {
    arm_pair_with(ARM_FINE.0, ARM_FINE.1)
}

/// The fine arm pair decimated to 1,376 faces.
pub fn arm_pair_decimated() -> Result<PosedPair, MeshError> {
    Ok(decimate_pair(&arm_pair_fine(), ARM_DECIMATED_FACES)?.0)
}

/// `count` bones evenly splitting the arm centerline; each maps its bent
/// segment back rigidly using the pose at the segment midpoint. Two bones
/// give the usual upper/lower arm pair.
pub fn arm_skeleton(count: usize) -> Skeleton {
    assert!(count >= 1);
    let top = ARM_LENGTH / 2.0 + ARM_RADIUS;
    let z = |i: usize| -top + 2.0 * top * i as f64 / count as f64;
    let bones = (0..count)
        .map(|i| {
            let (z0, z1) = (z(i), z(i + 1));
            let zm = 0.5 * (z0 + z1);
            let (c, phi) = bend_frame(zm);
            // bent = c + R (q - zm e_z)  =>  q = R^T (bent - c) + zm e_z
            let rt = rotation_y(phi).transpose();
            let to_canonical = Rigid::new(rt, Vec3::new(0.0, 0.0, zm) - rt * c);
            Bone {
                head: bend_frame(z0).0,
                tail: bend_frame(z1).0,
                to_canonical,
            }
        })
        .collect();
    Skeleton::new(bones).expect("bones are rigid and non-degenerate")
}

/// Looks at the origin from `distance` at the given azimuth and elevation
/// (radians), y up.
pub fn orbit_camera(azimuth: f64, elevation: f64, distance: f64, size: usize) -> Camera {
    let eye = Vec3::new(
        distance * elevation.cos() * azimuth.sin(),
        distance * elevation.sin(),
        distance * elevation.cos() * azimuth.cos(),
    );
    Camera::look_at(eye, Vec3::zeros(), Vec3::y(), TOY_FOV, size, size).expect("camera is valid")
}

pub const TOY_FOV: f64 = 0.7;
pub const TOY_DISTANCE: f64 = 2.5;
pub const TOY_SHAPE: FieldShape = FieldShape {
    resolution: 16,
    channels: 8,
    hidden: 16,
    out_features: 3,
};
/// Raw density bias of the ground-truth field, making the sphere nearly
/// opaque.
pub const TOY_DENSITY_BIAS: f32 = 4.0;
pub const TOY_SAMPLES: usize = 128;

/// A known field observed in several poses from several cameras.
#[derive(Debug, Clone)]
pub struct ToyScene {
    pub field: RadianceField,
    pub poses: Vec<PosedPair>,
    pub normalization: Normalization,
    pub cameras: Vec<Camera>,
    pub held_out: Camera,
    pub sampling: SamplingConfig,
}

impl ToyScene {
    /// Ground-truth field seeded by `seed`, the sphere in its two poses,
    /// four training cameras and one held-out camera at `size x size`.
    pub fn new(seed: u64, size: usize) -> Self {
        let mut field = RadianceField::init(TOY_SHAPE, 1.0, seed);
        field.decoder.b2[0] += TOY_DENSITY_BIAS;
        let pair = sphere_pair();
        let normalization = Normalization::fit(&pair.canonical.expand(DEFAULT_GROWTH).bbox());
        let poses = vec![PosedPair::identity(pair.canonical.clone()), pair];
        let cameras = (0..4)
            .map(|i| orbit_camera(std::f64::consts::FRAC_PI_2 * i as f64, 0.3, TOY_DISTANCE, size))
            .collect();
        let held_out = orbit_camera(std::f64::consts::FRAC_PI_4, -0.4, TOY_DISTANCE, size);
        Self {
            field,
            poses,
            normalization,
            cameras,
            held_out,
            sampling: SamplingConfig {
                n_coarse: TOY_SAMPLES,
                n_fine: 0,
                ..SamplingConfig::default()
            },
        }
    }

    /// Surface-field frame of pose `i`.
    pub fn frame(&self, pose: usize) -> Frame {
        let pair = &self.poses[pose];
        let deformer = DeformerHandle::build(Method::SurfaceField, pair, None, 0).expect("surface field needs no skeleton");
        Frame::new(deformer, &pair.deformed.expand(self.sampling.growth), self.normalization)
    }

    pub fn render(&self, field: &RadianceField, pose: usize, camera: &Camera) -> Result<RenderedImage, RenderError> {
        render_image(field, &self.frame(pose), camera, &self.sampling, 0)
    }

    /// Ground-truth images ordered pose-major.
    pub fn views(&self) -> Result<Vec<(usize, usize, RenderedImage)>, RenderError> {
        let mut out = Vec::new();
        for p in 0..self.poses.len() {
            for (c, cam) in self.cameras.iter().enumerate() {
                out.push((p, c, self.render(&self.field, p, cam)?));
            }
        }
        Ok(out)
    }
}

/// Closed mesh of exactly 13,776 faces for the decimation benchmark.
pub fn decimation_mesh() -> TriMesh {
    arm_pair_fine().canonical
}
