use crate::bvh::{Bvh, ClosestHit};
use crate::geom::{plane_barycentric, Vec3};
use crate::mesh::PosedPair;

use super::DeformError;

/// How the query point is located on its nearest deformed triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Orthogonal projection onto the triangle's plane. Barycentrics may
    /// leave `[0, 1]` when the projection falls outside the triangle; the
    /// residual is then exactly along the normal, so identical meshes give
    /// the identity map.
    #[default]
    Plane,
    /// Closest point on the triangle (barycentrics clamped to `[0, 1]`); only
    /// the normal component of the residual is transferred.
    Clamped,
}

/// Surface-field deformation: each target-space point is attached to its
/// nearest deformed triangle and carried to the corresponding canonical
/// triangle together with its signed normal offset.
#[derive(Debug, Clone)]
pub struct SurfaceFieldDeformer {
    pair: PosedPair,
    bvh: Bvh,
    canonical_normals: Vec<Vec3>,
    deformed_normals: Vec<Vec3>,
    projection: Projection,
}

impl SurfaceFieldDeformer {
    pub fn new(pair: PosedPair) -> Self {
        Self::with_projection(pair, Projection::default())
    }

    pub fn with_projection(pair: PosedPair, projection: Projection) -> Self {
        let bvh = Bvh::build(&pair.deformed);
        let canonical_normals = pair.canonical.face_normals().normals;
        let deformed_normals = pair.deformed.face_normals().normals;
        Self {
            pair,
            bvh,
            canonical_normals,
            deformed_normals,
            projection,
        }
    }

    pub fn pair(&self) -> &PosedPair {
        &self.pair
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    /// Nearest non-degenerate deformed triangle, closest point and its
    /// clamped barycentrics. Ties go to the lowest face index.
    pub fn closest_triangle(&self, x: &Vec3) -> Result<ClosestHit, DeformError> {
        self.bvh.closest(x).ok_or(DeformError::EmptyMesh)
    }

    pub fn deform(&self, x: &Vec3) -> Result<Vec3, DeformError> {
        let hit = self.closest_triangle(x)?;
        Ok(self.transfer(x, &hit))
    }

    /// Maps `x` through the triangle chosen by `hit`.
    pub fn transfer(&self, x: &Vec3, hit: &ClosestHit) -> Vec3 {
        let f = hit.face;
        let [a, b, c] = self.pair.deformed.triangle(f);
        let bary = match self.projection {
            Projection::Plane => plane_barycentric(x, &a, &b, &c),
            Projection::Clamped => hit.bary,
        };
        let on_deformed = a * bary[0] + b * bary[1] + c * bary[2];
        let [ca, cb, cc] = self.pair.canonical.triangle(f);
        let on_canonical = ca * bary[0] + cb * bary[1] + cc * bary[2];
        let offset = (x - on_deformed).dot(&self.deformed_normals[f]);
        on_canonical + self.canonical_normals[f] * offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rotation_z, Rigid};
    use crate::mesh::{shapes, TriMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_triangle() -> TriMesh {
        TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn vertex_query_has_unit_coordinate() {
        let m = shapes::icosphere(1.0, 2);
        let d = SurfaceFieldDeformer::new(PosedPair::identity(m.clone()));
        let v = m.vertices[17];
        let hit = d.closest_triangle(&v).unwrap();
        assert!(m.faces[hit.face].contains(&17));
        assert!(hit.bary.iter().any(|&b| b == 1.0));
        // lowest incident face wins the tie
        let lowest = (0..m.faces.len()).find(|&f| m.faces[f].contains(&17)).unwrap();
        assert_eq!(hit.face, lowest);
    }

    #[test]
    fn above_centroid() {
        let d = SurfaceFieldDeformer::new(PosedPair::identity(unit_triangle()));
        let x = Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.1);
        let hit = d.closest_triangle(&x).unwrap();
        assert_eq!(hit.face, 0);
        for b in hit.bary {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_pair_is_identity() {
        let m = shapes::capsule(10, 12, 0.3, 1.0);
        let d = SurfaceFieldDeformer::new(PosedPair::identity(m));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
            );
            assert!((d.deform(&x).unwrap() - x).norm() < 1e-9);
        }
    }

    #[test]
    fn vertices_map_exactly() {
        let c = shapes::icosphere(1.0, 2);
        let r = Rigid::new(rotation_z(0.4), Vec3::new(0.1, 0.2, 0.3));
        let dm = c.transformed(|v| r.apply(&Vec3::new(v.x * 1.3, v.y, v.z)));
        let d = SurfaceFieldDeformer::new(PosedPair::new(c.clone(), dm.clone()).unwrap());
        for (vd, vc) in dm.vertices.iter().zip(&c.vertices) {
            assert!((d.deform(vd).unwrap() - vc).norm() < 1e-9);
        }
    }

    #[test]
    fn centroid_offset_by_hand() {
        let c = unit_triangle();
        let dm = TriMesh::new(
            vec![
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(1.0, 3.0, 1.0),
                Vec3::new(1.0, 1.0, 2.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        // deformed normal: (0,2,0) x (0,0,1) = (2,0,0) -> +x; canonical normal +z
        let d = SurfaceFieldDeformer::new(PosedPair::new(c, dm).unwrap());
        let x = Vec3::new(1.0, 5.0 / 3.0, 4.0 / 3.0) + Vec3::new(0.07, 0.0, 0.0);
        let y = d.deform(&x).unwrap();
        let expect = Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.07);
        assert!((y - expect).norm() < 1e-9, "{y:?}");
    }

    #[test]
    fn clamped_mode_keeps_only_normal_offset() {
        let d = SurfaceFieldDeformer::with_projection(
            PosedPair::identity(unit_triangle()),
            Projection::Clamped,
        );
        let x = Vec3::new(2.0, 0.0, 0.5);
        // closest point (1,0,0), offset 0.5 along +z
        assert!((d.deform(&x).unwrap() - Vec3::new(1.0, 0.0, 0.5)).norm() < 1e-15);
        let plane = SurfaceFieldDeformer::new(PosedPair::identity(unit_triangle()));
        assert!((plane.deform(&x).unwrap() - x).norm() < 1e-15);
    }

    #[test]
    fn empty_mesh_errors() {
        let d = SurfaceFieldDeformer::new(PosedPair::identity(TriMesh::default()));
        assert!(matches!(d.deform(&Vec3::zeros()), Err(DeformError::EmptyMesh)));
    }
}
