use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deform::{deform_batch, DeformError, DeformerHandle, Method, Skeleton};
use crate::geom::Vec3;
use crate::mesh::PosedPair;

/// Timing of one deformer; `wall_ms` is the median over `repeats` runs of
/// `deform_batch`, construction time is reported separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    pub points: usize,
    pub wall_ms: f64,
    pub repeats: usize,
    pub build_ms: f64,
    pub timings_ms: Vec<f64>,
}

/// `count` seeded points uniform in the bounding box of the deformed mesh
/// expanded by `growth`.
pub fn bench_points(pair: &PosedPair, growth: f64, count: usize, seed: u64) -> Vec<Vec3> {
    let b = pair.deformed.expand(growth).bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Vec3::from_fn(|i, _| rng.gen_range(b.min[i]..=b.max[i])))
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Times each method on the same point set, one method at a time.
pub fn bench_deformers(
    pair: &PosedPair,
    skeleton: Option<&Skeleton>,
    methods: &[Method],
    points: &[Vec3],
    repeats: usize,
    grid_res: usize,
) -> Result<Vec<BenchResult>, DeformError> {
    let repeats = repeats.max(1);
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let t0 = Instant::now();
        let handle = DeformerHandle::build(m, pair, skeleton, grid_res)?;
        let build_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut timings_ms = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t = Instant::now();
            let res = deform_batch(points, &handle)?;
            timings_ms.push((t.elapsed().as_secs_f64() * 1e3).max(f64::MIN_POSITIVE));
            std::hint::black_box(res);
        }
        log::info!("bench {m}: median {:.3} ms over {repeats}", median(&timings_ms));
        out.push(BenchResult {
            method: m.name().to_string(),
            points: points.len(),
            wall_ms: median(&timings_ms),
            repeats,
            build_ms,
            timings_ms,
        });
    }
    Ok(out)
}

/// CSV with header `method,points,wall_ms_median,repeats`.
pub fn write_bench_csv(results: &[BenchResult], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "method,points,wall_ms_median,repeats")?;
    for r in results {
        writeln!(w, "{},{},{},{}", r.method, r.points, r.wall_ms, r.repeats)?;
    }
    Ok(())
}
