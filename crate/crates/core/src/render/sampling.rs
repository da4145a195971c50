use rand::Rng;

use crate::bvh::Bvh;

use super::camera::Ray;

/// Hits closer than this are ignored to avoid self-intersection.
pub const RAY_EPS: f64 = 1e-4;

/// First and last intersection of `ray` with the sampling hull, or `None`
/// when fewer than two intersections exist.
pub fn ray_mesh_bounds(ray: &Ray, hull: &Bvh, hits: &mut Vec<f64>) -> Option<(f64, f64)> {
    hits.clear();
    hull.ray_hits(&ray.origin, &ray.dir, RAY_EPS, hits);
    if hits.len() < 2 {
        return None;
    }
    let tn = hits.iter().copied().fold(f64::INFINITY, f64::min);
    let tf = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (tf - tn > 1e-9).then_some((tn, tf))
}

/// `n` depths in equal bins over `[tn, tf]`: bin centers, or uniform within
/// each bin when `jitter` is set.
pub fn stratified_samples(tn: f64, tf: f64, n: usize, jitter: bool, rng: &mut impl Rng) -> Vec<f64> {
    let step = (tf - tn) / n as f64;
    (0..n)
        .map(|i| {
            let u = if jitter { rng.gen::<f64>() } else { 0.5 };
            tn + (i as f64 + u) * step
        })
        .collect()
}

/// Bin edges matching [`stratified_samples`] over `[tn, tf]`.
pub fn bin_edges(tn: f64, tf: f64, n: usize) -> Vec<f64> {
    let step = (tf - tn) / n as f64;
    (0..=n).map(|i| if i == n { tf } else { tn + i as f64 * step }).collect()
}

/// Inverse-CDF samples of the piecewise-constant density with `weights[b]`
/// on `[edges[b], edges[b + 1]]`. Without jitter the CDF is read at
/// `(k + 0.5) / n`. All-zero weights fall back to stratified sampling.
/// Output is sorted.
pub fn importance_samples(edges: &[f64], weights: &[f64], n: usize, jitter: bool, rng: &mut impl Rng) -> Vec<f64> {
    assert_eq!(edges.len(), weights.len() + 1);
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    if !(total > 0.0) || n == 0 {
        return stratified_samples(lo, hi, n, jitter, rng);
    }
    let mut cdf = Vec::with_capacity(weights.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in weights {
        acc += w.max(0.0) / total;
        cdf.push(acc);
    }
    let mut us: Vec<f64> = (0..n)
        .map(|k| if jitter { rng.gen::<f64>() } else { (k as f64 + 0.5) / n as f64 })
        .collect();
    us.sort_by(f64::total_cmp);
    // rounding can leave cdf.last() a hair under 1; never land past this bin
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    let mut out = Vec::with_capacity(n);
    let mut b = 0;
    for u in us {
        // first bin whose upper cdf exceeds u; zero-width bins are skipped
        while b < last && (cdf[b + 1] <= u || weights[b] <= 0.0) {
            b += 1;
        }
        let width = cdf[b + 1] - cdf[b];
        let f = if width > 0.0 { ((u - cdf[b]) / width).clamp(0.0, 1.0) } else { 0.5 };
        out.push(edges[b] + f * (edges[b + 1] - edges[b]));
    }
    out
}

/// Sorted union of two sorted depth lists with exact duplicates removed.
pub fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
