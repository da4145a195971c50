use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deform::Rotation;
use crate::geom::{Mat3, Rigid, Vec3};

use super::RenderError;

/// Pinhole camera. Camera frame: +z forward, x right, y down; pixel `(i, j)`
/// is centered at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_from_camera: Rigid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// JSON camera record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize, world_from_camera: Rigid) -> Result<Self, RenderError> {
        let c = Self { fx, fy, cx, cy, width, height, world_from_camera };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(RenderError::Camera("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Camera("image must be at least 1x1".into()));
        }
        if !self.world_from_camera.is_proper(1e-6) {
            return Err(RenderError::Camera("rotation is not a proper rotation".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`; `up` fixes the roll (image y
    /// points away from it).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_y: f64, width: usize, height: usize) -> Result<Self, RenderError> {
        let z = (target - eye).normalize();
        let x = (-up).cross(&z);
        if x.norm() < 1e-12 {
            return Err(RenderError::Camera("up vector parallel to view direction".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rot = Mat3::from_columns(&[x, y, z]);
        let f = 0.5 * height as f64 / (0.5 * fov_y).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height, Rigid::new(rot, eye))
    }

    pub fn origin(&self) -> Vec3 {
        self.world_from_camera.translation
    }

    pub fn forward(&self) -> Vec3 {
        self.world_from_camera.rotation.column(2).into()
    }

    /// Ray through the center of pixel `(i, j)`.
    #[inline]
    pub fn ray(&self, i: usize, j: usize) -> Ray {
        let d = Vec3::new(
            (i as f64 + 0.5 - self.cx) / self.fx,
            (j as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        );
        Ray {
            origin: self.world_from_camera.translation,
            dir: self.world_from_camera.apply_vector(&d).normalize(),
        }
    }

    /// One ray per pixel, row-major.
    pub fn generate_rays(&self) -> Vec<Ray> {
        (0..self.height)
            .flat_map(|j| (0..self.width).map(move |i| (i, j)))
            .map(|(i, j)| self.ray(i, j))
            .collect()
    }

    /// Pixel coordinates of a world point, if in front of the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let q = self.world_from_camera.inverse().apply(p);
        (q.z > 0.0).then(|| (self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy))
    }

    pub fn to_file(&self) -> CameraFile {
        let (rows, t) = self.world_from_camera.to_row_major();
        CameraFile {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            rotation: Rotation::Rows(rows),
            translation: t,
        }
    }

    pub fn from_file(f: &CameraFile) -> Result<Self, RenderError> {
        Self::new(f.fx, f.fy, f.cx, f.cy, f.width, f.height, Rigid::from_row_major(f.rotation.rows(), f.translation))
    }

    pub fn read(path: &Path) -> Result<Self, RenderError> {
        let text = std::fs::read_to_string(path)?;
        let f: CameraFile = serde_json::from_str(&text)
            .map_err(|e| RenderError::Camera(format!("{}: {e}", path.display())))?;
        Self::from_file(&f)
    }

    pub fn write(&self, path: &Path) -> Result<(), RenderError> {
        let text = serde_json::to_string_pretty(&self.to_file()).map_err(|e| RenderError::Camera(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
