use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geom::{Rigid, Vec3};
use crate::mesh::{load_obj, PosedPair};

use super::{Bone, DeformError, Skeleton};

/// 3x3 rotation, row-major; nested rows or a flat list of nine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rotation {
    Rows([[f64; 3]; 3]),
    Flat([f64; 9]),
}

impl Rotation {
    pub fn rows(&self) -> [[f64; 3]; 3] {
        match *self {
            Rotation::Rows(r) => r,
            Rotation::Flat(f) => [[f[0], f[1], f[2]], [f[3], f[4], f[5]], [f[6], f[7], f[8]]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoneRecord {
    pub head: [f64; 3],
    pub tail: [f64; 3],
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl BoneRecord {
    pub fn from_bone(b: &Bone) -> Self {
        let (rows, t) = b.to_canonical.to_row_major();
        Self {
            head: b.head.into(),
            tail: b.tail.into(),
            rotation: Rotation::Rows(rows),
            translation: t,
        }
    }

    pub fn to_bone(&self) -> Bone {
        Bone {
            head: Vec3::from(self.head),
            tail: Vec3::from(self.tail),
            to_canonical: Rigid::from_row_major(self.rotation.rows(), self.translation),
        }
    }
}

/// JSON pose description. Mesh paths are relative to the pose file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub canonical_obj: PathBuf,
    pub deformed_obj: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bones: Option<Vec<BoneRecord>>,
}

impl PoseFile {
    pub fn read(path: &Path) -> Result<Self, DeformError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeformError::Pose(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DeformError::Pose(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), DeformError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| DeformError::Pose(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| DeformError::Pose(format!("{}: {e}", path.display())))
    }

    /// Loads the mesh pair, resolving paths against `base`.
    pub fn load_pair(&self, base: &Path) -> Result<PosedPair, DeformError> {
        let canonical = load_obj(&base.join(&self.canonical_obj))?;
        let deformed = load_obj(&base.join(&self.deformed_obj))?;
        Ok(PosedPair::new(canonical, deformed)?)
    }

    pub fn skeleton(&self) -> Result<Option<Skeleton>, DeformError> {
        self.bones
            .as_ref()
            .map(|b| Skeleton::new(b.iter().map(BoneRecord::to_bone).collect()))
            .transpose()
    }
}
