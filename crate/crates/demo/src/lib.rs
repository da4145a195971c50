//! Browser bindings: render the toy scene from any orbit, visualize how each
//! deformer warps a slice of space, and compare on-surface errors.

use planewarp::deform::{DeformerHandle, Method, Skeleton};
use planewarp::fixtures::{arm_pair_decimated, arm_skeleton, orbit_camera, ToyScene, TOY_DISTANCE};
use planewarp::geom::Vec3;
use planewarp::mesh::PosedPair;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    scene: ToyScene,
    arm: PosedPair,
    skeleton: Skeleton,
}

fn method(name: &str) -> Result<Method, JsError> {
    name.parse().map_err(|e| JsError::new(&format!("{e}")))
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Demo, JsError> {
        Ok(Demo {
            scene: ToyScene::new(seed, 8),
            arm: arm_pair_decimated().map_err(|e| JsError::new(&e.to_string()))?,
            skeleton: arm_skeleton(24),
        })
    }

    /// RGBA pixels of the toy sphere in `pose` (0 rest, 1 inflated) seen
    /// from the given orbit angles in radians.
    pub fn render(&self, pose: usize, azimuth: f64, elevation: f64, size: usize) -> Result<Vec<u8>, JsError> {
        if pose >= self.scene.poses.len() {
            return Err(JsError::new("pose must be 0 or 1"));
        }
        let cam = orbit_camera(azimuth, elevation.clamp(-1.5, 1.5), TOY_DISTANCE, size.clamp(8, 256));
        let img = self.scene.render(&self.scene.field, pose, &cam).map_err(|e| JsError::new(&e.to_string()))?;
        let mut out = Vec::with_capacity(img.width * img.height * 4);
        for (px, a) in img.rgb.chunks_exact(3).zip(&img.alpha) {
            out.extend(px.iter().map(|v| planewarp::render::to_u8(*v)));
            out.push(planewarp::render::to_u8(a.max(0.15)));
        }
        Ok(out)
    }

    /// RGBA slice through the bent arm at y = 0: each pixel of the
    /// `[-1.2, 1.2]^2` xz window is mapped to the canonical pose and colored
    /// by its canonical coordinates (stripes along z, shading by |x|).
    pub fn warp_slice(&self, method_name: &str, size: usize, grid_res: usize) -> Result<Vec<u8>, JsError> {
        let m = method(method_name)?;
        let handle = DeformerHandle::build(m, &self.arm, Some(&self.skeleton), grid_res.clamp(2, 32)).map_err(|e| JsError::new(&e.to_string()))?;
        let size = size.clamp(8, 256);
        let mut out = Vec::with_capacity(size * size * 4);
        for j in 0..size {
            for i in 0..size {
                let x = -1.2 + 2.4 * (i as f64 + 0.5) / size as f64;
                let z = 1.2 - 2.4 * (j as f64 + 0.5) / size as f64;
                let q = handle.deform(&Vec3::new(x, 0.0, z)).map_err(|e| JsError::new(&e.to_string()))?;
                let stripe = ((q.z * 10.0).floor() as i64).rem_euclid(2) as f64;
                let inside = (q.x * q.x + q.y * q.y).sqrt() < planewarp::fixtures::ARM_RADIUS && q.z.abs() < 1.0;
                let shade = (1.0 - q.x.abs().min(1.0)) * 255.0;
                let (r, g, b) = if inside { (shade, 80.0 + 120.0 * stripe, 60.0) } else { (40.0 + 40.0 * stripe, 40.0, shade * 0.6) };
                out.extend([r as u8, g as u8, b as u8, 255]);
            }
        }
        Ok(out)
    }

    /// Maximum distance from the canonical surface after deforming `count`
    /// deterministic points on the bent arm surface.
    pub fn surface_error(&self, method_name: &str, count: usize, grid_res: usize) -> Result<f64, JsError> {
        let m = method(method_name)?;
        let handle = DeformerHandle::build(m, &self.arm, Some(&self.skeleton), grid_res.clamp(2, 32)).map_err(|e| JsError::new(&e.to_string()))?;
        let faces = &self.arm.deformed.faces;
        let mut worst = 0.0f64;
        for k in 0..count.min(5000) {
            let f = (k * 7919) % faces.len();
            // low-discrepancy barycentrics
            let u = (k as f64 * 0.618_033_988_75).fract();
            let v = (k as f64 * 0.414_213_562_37).fract();
            let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
            let bary = [1.0 - u - v, u, v];
            let [a, b, c] = self.arm.deformed.triangle(f);
            let [ca, cb, cc] = self.arm.canonical.triangle(f);
            let x = a * bary[0] + b * bary[1] + c * bary[2];
            let want = ca * bary[0] + cb * bary[1] + cc * bary[2];
            let got = handle.deform(&x).map_err(|e| JsError::new(&e.to_string()))?;
            worst = worst.max((got - want).norm());
        }
        Ok(worst)
    }
}
