//! Lloyd's algorithm with k-means++ seeding. Restarts draw from a single
//! seeded RNG stream and the best run wins by (inertia, restart index),
//! so results are identical across runs and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::KMeansConfig;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

pub fn run_kmeans(points: &[EmbeddingVector], k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = points.len();
    assert!(n > 0, "kmeans needs at least one point");
    for p in points {
        if p.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
    }
    let k = k.clamp(1, n);
    let data: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.values.iter().map(|v| f64::from(*v)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _restart in 0..cfg.n_init.max(1) {
        let run = lloyd_once(&data, k, cfg, &mut rng);
        let better = match &best {
            None => true,
            Some(b) => run.inertia < b.inertia,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd_once(data: &[Vec<f64>], k: usize, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> KMeansResult {
    let mut centroids = plus_plus_init(data, k, rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut prev_inertia = f64::INFINITY;

    for _iter in 0..cfg.max_iters.max(1) {
        let (new_assignment, counts, inertia) = assign_and_fix(data, &mut centroids, k);
        let changed = new_assignment != assignment;
        assignment = new_assignment;

        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12,
            "inertia increased: {prev_inertia} -> {inertia}"
        );

        // Update step: means of the assigned points.
        let dim = data[0].len();
        let mut sums = vec![vec![0.0f64; dim]; k];
        for (i, point) in data.iter().enumerate() {
            for (s, v) in sums[assignment[i]].iter_mut().zip(point) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            }
        }

        let converged = !changed
            || (prev_inertia.is_finite() && (prev_inertia - inertia).abs() <= cfg.tol * prev_inertia.max(1e-12));
        prev_inertia = inertia;
        if converged {
            break;
        }
    }

    // Final assignment against the final centroids, with the same
    // empty-cluster fix so every returned cluster is populated.
    let (assignment, _, inertia) = assign_and_fix(data, &mut centroids, k);
    KMeansResult {
        assignment,
        centroids,
        inertia,
    }
}

/// Assign each point to its nearest centroid, then repair empty clusters
/// by re-seeding each one from the farthest point of a multi-member
/// cluster. Moving that point onto its own centroid (distance zero) never
/// raises inertia, so Lloyd monotonicity is preserved.
fn assign_and_fix(data: &[Vec<f64>], centroids: &mut [Vec<f64>], k: usize) -> (Vec<usize>, Vec<usize>, f64) {
    let mut assignment = Vec::with_capacity(data.len());
    let mut inertia = 0.0f64;
    let mut counts = vec![0usize; k];
    for point in data {
        let (c, d2) = nearest(point, centroids);
        assignment.push(c);
        counts[c] += 1;
        inertia += d2;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        if let Some(i) = farthest_movable_point(data, centroids, &assignment, &counts) {
            inertia -= dist2(&data[i], &centroids[assignment[i]]);
            counts[assignment[i]] -= 1;
            centroids[c] = data[i].clone();
            assignment[i] = c;
            counts[c] = 1;
        }
    }
    (assignment, counts, inertia)
}

fn plus_plus_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];

    let first = rng.random_range(0..n);
    centroids.push(data[first].clone());
    chosen[first] = true;

    let mut d2: Vec<f64> = data.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if r < w {
                    pick = Some(i);
                    break;
                }
                r -= w;
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass exists"))
        } else {
            // All remaining points coincide with a centroid; pick the first
            // unchosen index so duplicates cannot stall initialization.
            match chosen.iter().position(|&c| !c) {
                Some(i) => i,
                None => rng.random_range(0..n),
            }
        };
        chosen[next] = true;
        centroids.push(data[next].clone());
        let latest = centroids.last().expect("just pushed");
        for (i, p) in data.iter().enumerate() {
            let d = dist2(p, latest);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Farthest point whose source cluster keeps at least one member after
/// the move. With k <= n such a point always exists when a cluster is
/// empty. Ties resolve to the lowest index.
fn farthest_movable_point(
    data: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    counts: &[usize],
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, point) in data.iter().enumerate() {
        if counts[assignment[i]] <= 1 {
            continue;
        }
        let d = dist2(point, &centroids[assignment[i]]);
        match best {
            Some((_, bd)) if d <= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
