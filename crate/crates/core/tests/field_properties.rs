use planewarp::field::{Decoder, Plane, TriPlane};
use planewarp::geom::Vec3;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bilinear_linear_precision(n in 2usize..12, a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        // f32 storage: keep coefficients exactly representable
        let (a, b, c) = ((a * 64.0).round() / 64.0, (b * 64.0).round() / 64.0, (c * 64.0).round() / 64.0);
        let planes = TriPlane::from_fn(n, 1, |_, u, v, _| (a * u + b * v + c) as f32);
        let lo = -1.0 + 1.0 / n as f64;
        let (u, v) = (lo + s * (-2.0 * lo), lo + t * (-2.0 * lo));
        for p in Plane::ALL {
            let got = planes.sample_plane(p, u, v)[0];
            let tol = 1e-6 * (1.0 + a.abs() + b.abs() + c.abs());
            prop_assert!((got - (a * u + b * v + c)).abs() < tol, "{got} vs {}", a * u + b * v + c);
        }
    }

    #[test]
    fn aggregate_is_additive(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let pa = TriPlane::random(5, 3, 1.0, seed);
        let pb = TriPlane::random(5, 3, 1.0, seed + 1);
        let sum: Vec<f32> = pa.data().iter().zip(pb.data()).map(|(a, b)| a + b).collect();
        let pab = TriPlane::from_data(5, 3, sum).unwrap();
        let p = Vec3::new(x, y, z);
        let (fa, fb, fab) = (pa.aggregate(&p), pb.aggregate(&p), pab.aggregate(&p));
        for k in 0..3 {
            prop_assert!((fab[k] - fa[k] - fb[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn density_is_non_negative(seed in 0u64..1000, feature in proptest::collection::vec(-50.0f64..50.0, 4)) {
        let mut d = Decoder::init(4, 8, 3, seed);
        d.b2[0] -= 30.0;
        let (sigma, feats) = d.decode(&feature).unwrap();
        prop_assert!(sigma >= 0.0 && sigma.is_finite());
        prop_assert_eq!(feats.len(), 3);
    }
}
