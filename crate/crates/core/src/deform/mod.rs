//! Volume deformations mapping target-space points to the canonical pose.

mod mvc;
mod pose;
mod skinning;
mod surface;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::{MeshError, PosedPair};

pub use mvc::{
    mvc_weights, mvc_weights_with, MvcCage, MvcDeformer, MvcGrid, MvcScratch, GRID_MARGIN, SURFACE_EPS,
    SURFACE_NUDGE, VERTEX_EPS,
};
pub use pose::{BoneRecord, PoseFile, Rotation};
pub use skinning::{Bone, Skeleton};
pub use surface::{Projection, SurfaceFieldDeformer};

/// Default lattice size of the MVC grid approximation.
pub const DEFAULT_GRID_RES: usize = 16;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("deformed mesh has no non-degenerate faces")]
    EmptyMesh,
    #[error("skeleton has no bones")]
    EmptySkeleton,
    #[error("bone {index}: {reason}")]
    InvalidBone { index: usize, reason: String },
    #[error("pose file: {0}")]
    Pose(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Deformation backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    SurfaceField,
    Skinning,
    Mvc,
    MvcGrid,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SurfaceField, Method::Skinning, Method::Mvc, Method::MvcGrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::SurfaceField => "sf",
            Method::Skinning => "skin",
            Method::Mvc => "mvc",
            Method::MvcGrid => "mvc-grid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown deformation method `{s}` (expected sf, skin, mvc or mvc-grid)"))
    }
}

/// A built deformer of any backend.
#[derive(Debug, Clone)]
pub enum DeformerHandle {
    SurfaceField(SurfaceFieldDeformer),
    Skinning(Skeleton),
    Mvc(MvcDeformer),
    MvcGrid(MvcGrid),
}

impl DeformerHandle {
    /// Builds the mesh-driven backends from a pair; skinning needs a skeleton.
    pub fn build(
        method: Method,
        pair: &PosedPair,
        skeleton: Option<&Skeleton>,
        grid_res: usize,
    ) -> Result<Self, DeformError> {
        Ok(match method {
            Method::SurfaceField => Self::SurfaceField(SurfaceFieldDeformer::new(pair.clone())),
            Method::Skinning => Self::Skinning(skeleton.cloned().ok_or(DeformError::EmptySkeleton)?),
            Method::Mvc => Self::Mvc(MvcDeformer::new(pair.clone())),
            Method::MvcGrid => Self::MvcGrid(MvcGrid::build(pair, grid_res)),
        })
    }

    /// The identity map.
    pub fn identity() -> Self {
        Self::Skinning(Skeleton::identity())
    }

    pub fn method(&self) -> Method {
        match self {
            Self::SurfaceField(_) => Method::SurfaceField,
            Self::Skinning(_) => Method::Skinning,
            Self::Mvc(_) => Method::Mvc,
            Self::MvcGrid(_) => Method::MvcGrid,
        }
    }

    pub fn deform(&self, x: &Vec3) -> Result<Vec3, DeformError> {
        match self {
            Self::SurfaceField(d) => d.deform(x),
            Self::Skinning(s) => Ok(s.deform(x)),
            Self::Mvc(d) => Ok(d.deform(x)),
            Self::MvcGrid(g) => Ok(g.deform(x)),
        }
    }
}

const BATCH_CHUNK: usize = 4096;

fn deform_chunk(points: &[Vec3], d: &DeformerHandle, out: &mut [Vec3]) -> Result<(), DeformError> {
    match d {
        DeformerHandle::Mvc(m) => {
            let mut scratch = MvcScratch::default();
            for (o, p) in out.iter_mut().zip(points) {
                *o = m.deform_with(p, &mut scratch);
            }
        }
        _ => {
            for (o, p) in out.iter_mut().zip(points) {
                *o = d.deform(p)?;
            }
        }
    }
    Ok(())
}

/// Deforms every point. Output order matches input; each element equals the
/// scalar result bit for bit, whether or not the work runs in parallel.
pub fn deform_batch(points: &[Vec3], d: &DeformerHandle) -> Result<Vec<Vec3>, DeformError> {
    let mut out = vec![Vec3::zeros(); points.len()];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(BATCH_CHUNK)
            .zip(points.par_chunks(BATCH_CHUNK))
            .try_for_each(|(o, p)| deform_chunk(p, d, o))?;
    }
    #[cfg(not(feature = "parallel"))]
    for (o, p) in out.chunks_mut(BATCH_CHUNK).zip(points.chunks(BATCH_CHUNK)) {
        deform_chunk(p, d, o)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lbs".parse::<Method>().is_err());
    }

    #[test]
    fn batch_matches_scalar() {
        let c = shapes::icosphere(1.0, 1);
        let d = c.transformed(|v| Vec3::new(v.x, v.y * 1.1, v.z + 0.2 * v.x));
        let pair = PosedPair::new(c, d).unwrap();
        let pts: Vec<Vec3> = (0..10_000)
            .map(|i| {
                let t = i as f64 * 0.37;
                Vec3::new(t.sin(), (1.3 * t).cos(), (0.7 * t).sin()) * 0.8
            })
            .collect();
        for m in [Method::SurfaceField, Method::Mvc, Method::MvcGrid] {
            let h = DeformerHandle::build(m, &pair, None, 4).unwrap();
            let batch = deform_batch(&pts, &h).unwrap();
            for i in (0..pts.len()).step_by(97) {
                assert_eq!(batch[i], h.deform(&pts[i]).unwrap());
            }
        }
        assert!(deform_batch(&[], &DeformerHandle::identity()).unwrap().is_empty());
    }

    #[test]
    fn errors_propagate() {
        let h = DeformerHandle::SurfaceField(SurfaceFieldDeformer::new(PosedPair::identity(Default::default())));
        assert!(deform_batch(&[Vec3::zeros()], &h).is_err());
        let pair = PosedPair::identity(shapes::cube(1.0));
        assert!(DeformerHandle::build(Method::Skinning, &pair, None, 16).is_err());
    }
}
