use crate::geom::{point_segment_distance_squared, Rigid, Vec3};

use super::DeformError;

/// A bone segment in target space and the rigid map taking points near it
/// back to the canonical pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Bone {
    pub head: Vec3,
    pub tail: Vec3,
    pub to_canonical: Rigid,
}

/// Closest-bone rigid skinning: no blending across bones.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    bones: Vec<Bone>,
}

impl Skeleton {
    pub fn new(bones: Vec<Bone>) -> Result<Self, DeformError> {
        if bones.is_empty() {
            return Err(DeformError::EmptySkeleton);
        }
        for (i, b) in bones.iter().enumerate() {
            if b.head == b.tail {
                return Err(DeformError::InvalidBone {
                    index: i,
                    reason: "head equals tail".into(),
                });
            }
            if !b.to_canonical.is_proper(1e-6) {
                return Err(DeformError::InvalidBone {
                    index: i,
                    reason: "rotation is not orthonormal with det +1".into(),
                });
            }
        }
        Ok(Self { bones })
    }

    /// One bone covering all of space with the identity transform.
    pub fn identity() -> Self {
        Self {
            bones: vec![Bone {
                head: Vec3::zeros(),
                tail: Vec3::new(0.0, 0.0, 1.0),
                to_canonical: Rigid::identity(),
            }],
        }
    }

    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    /// Index of the bone segment nearest to `x`; ties go to the lowest index.
    #[inline]
    pub fn closest_bone(&self, x: &Vec3) -> usize {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, b) in self.bones.iter().enumerate() {
            let d2 = point_segment_distance_squared(x, &b.head, &b.tail);
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        best
    }

    #[inline]
    pub fn deform(&self, x: &Vec3) -> Vec3 {
        self.bones[self.closest_bone(x)].to_canonical.apply(x)
    }
}
