use planewarp::bvh::{closest_brute_force, Bvh};
use planewarp::deform::{mvc_weights, Bone, DeformerHandle, Method, MvcDeformer, MvcGrid, Skeleton, SurfaceFieldDeformer};
use planewarp::fixtures::arm_pair_with;
use planewarp::geom::{point_segment_distance_squared, rotation_y, rotation_z, Rigid, Vec3};
use planewarp::mesh::{shapes, PosedPair, TriMesh};
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn warped(m: &TriMesh, a: f64, b: f64) -> TriMesh {
    m.transformed(|v| Vec3::new(v.x + a * v.z * v.z, v.y * (1.0 + b * v.x), v.z + 0.1 * a * v.y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bvh_matches_brute_force(p in vec3(2.0), rings in 3usize..10, segs in 3usize..12) {
        let m = shapes::capsule(rings, segs, 0.4, 1.0);
        let bvh = Bvh::build(&m);
        let a = bvh.closest(&p).unwrap();
        let b = closest_brute_force(&m, &p).unwrap();
        prop_assert_eq!(a.face, b.face);
        prop_assert_eq!(a.distance_squared, b.distance_squared);
    }

    #[test]
    fn sf_identity(p in vec3(1.5), level in 0u32..3) {
        let d = SurfaceFieldDeformer::new(PosedPair::identity(shapes::icosphere(0.8, level)));
        prop_assert!((d.deform(&p).unwrap() - p).norm() < 1e-9);
    }

    #[test]
    fn sf_surface_exact(a in -0.4f64..0.4, b in -0.3f64..0.3, face in 0usize..320, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let c = shapes::icosphere(1.0, 2);
        let pair = PosedPair::new(c.clone(), warped(&c, a, b)).unwrap();
        let d = SurfaceFieldDeformer::new(pair.clone());
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        let w = [1.0 - u - v, u, v];
        let [x0, x1, x2] = pair.deformed.triangle(face);
        let [c0, c1, c2] = pair.canonical.triangle(face);
        let x = x0 * w[0] + x1 * w[1] + x2 * w[2];
        let want = c0 * w[0] + c1 * w[1] + c2 * w[2];
        prop_assert!((d.deform(&x).unwrap() - want).norm() <= 1e-6 * pair.deformed.bbox().diagonal());
    }

    #[test]
    fn mvc_partition_and_linear_precision(dir in vec3(1.0), r in 0.0f64..0.95, level in 0u32..2) {
        prop_assume!(dir.norm() > 1e-3);
        let m = shapes::icosphere(1.0, level);
        // inside the inscribed sphere of the cage
        let inner = if level == 0 { 0.79 } else { 0.93 };
        let x = dir.normalize() * r * inner;
        let w = mvc_weights(&x, &m);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let y = w.iter().zip(&m.vertices).fold(Vec3::zeros(), |acc, (wi, v)| acc + v * *wi);
        prop_assert!((y - x).norm() < 1e-6);
    }

    #[test]
    fn closest_bone_is_argmin(p in vec3(3.0), n in 1usize..8, seed in 0u64..100) {
        let bones: Vec<Bone> = (0..n)
            .map(|i| {
                let t = (i as f64 + seed as f64) * 1.7;
                let head = Vec3::new(t.sin(), t.cos(), (t * 0.3).sin()) * 2.0;
                Bone { head, tail: head + Vec3::new(0.3, 0.1 * t.cos(), 0.2), to_canonical: Rigid::new(rotation_z(t), Vec3::new(0.0, t, 0.0)) }
            })
            .collect();
        let s = Skeleton::new(bones).unwrap();
        let k = s.closest_bone(&p);
        let d: Vec<f64> = s.bones().iter().map(|b| point_segment_distance_squared(&p, &b.head, &b.tail)).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d[k], min);
        prop_assert!(d[..k].iter().all(|x| *x > min));
        // rigid within the cell: distances are preserved
        let q = p + Vec3::new(1e-7, 0.0, 0.0);
        if s.closest_bone(&q) == k {
            prop_assert!(((s.deform(&q) - s.deform(&p)).norm() - 1e-7).abs() < 1e-12);
        }
    }

    #[test]
    fn deformers_are_pure(p in vec3(1.2), method in 0usize..4) {
        let c = shapes::icosphere(1.0, 1);
        let pair = PosedPair::new(c.clone(), warped(&c, 0.2, 0.1)).unwrap();
        let skel = Skeleton::new(vec![Bone { head: Vec3::zeros(), tail: Vec3::x(), to_canonical: Rigid::new(rotation_y(0.3), Vec3::zeros()) }]).unwrap();
        let h = DeformerHandle::build(Method::ALL[method], &pair, Some(&skel), 6).unwrap();
        let a = h.deform(&p).unwrap();
        let b = h.deform(&p).unwrap();
        prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }
}

#[test]
fn grid_error_dominates_full_mvc_on_bent_arm() {
    let pair = arm_pair_with(24, 12);
    let mvc = MvcDeformer::new(pair.clone());
    let grid = MvcGrid::build(&pair, 16);
    let (mut e_mvc, mut e_grid) = (0.0f64, 0.0f64);
    for f in (0..pair.deformed.faces.len()).step_by(3) {
        let [a, b, c] = pair.deformed.triangle(f);
        let [ca, cb, cc] = pair.canonical.triangle(f);
        let x = (a + b + c) / 3.0;
        let want = (ca + cb + cc) / 3.0;
        e_mvc = e_mvc.max((mvc.deform(&x) - want).norm());
        e_grid = e_grid.max((grid.deform(&x) - want).norm());
    }
    assert!(e_grid >= e_mvc, "grid {e_grid} vs mvc {e_mvc}");
}
