//! Flat and hierarchical clustering over cosine geometry.
//!
//! Points are compared by cosine distance `1 - cos`. The k-means family works
//! on unit-normalized copies of the input (where squared euclidean distance
//! is twice the cosine distance, so assignments agree); X-means grows the
//! cluster count by BIC-scored binary splits under a spherical gaussian model
//! with a shared variance. Agglomerative clustering uses group-average
//! linkage and stops once the best merge would exceed a distance threshold.
//!
//! Returned centroids are always arithmetic means of the original member
//! vectors.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hashing::derive_seed;
use crate::vecmath::{dot, mean_of, norm, normalize, squared_distance};

/// Assignments plus per-cluster centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Point index -> cluster id in `0..n_clusters`.
    pub assignment: Vec<usize>,
    /// Cluster id -> arithmetic mean of its members.
    pub centroids: Vec<Vec<f64>>,
    pub n_clusters: usize,
}

impl ClusteringResult {
    /// Member indices per cluster, in input order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    fn from_assignment(points: &[Vec<f64>], assignment: Vec<usize>) -> Self {
        let n_clusters = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); n_clusters];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        let centroids = members.iter().map(|m| mean_of(points, m)).collect();
        ClusteringResult { assignment, centroids, n_clusters }
    }
}

/// Cosine distance with zero vectors pinned to the neutral distance 1.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    1.0 - (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

fn unit_rows(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let mut q = p.clone();
            normalize(&mut q);
            q
        })
        .collect()
}

/// Lloyd's algorithm with k-means++ seeding on the given rows.
///
/// Works in whatever space the rows live in; callers wanting cosine geometry
/// pass unit-normalized rows. Returns `(assignment, centroids-in-that-space)`.
fn lloyd(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    init: Option<Vec<Vec<f64>>>,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = rows.len();
    let k = k.min(n).max(1);
    let mut centroids = match init {
        Some(c) if c.len() == k => c,
        _ => plus_plus_seeding(rows, k, seed),
    };
    let mut assignment = vec![0usize; n];
    let max_iter = 300;
    let tol = 1e-6;
    for _ in 0..max_iter {
        // Assign.
        for (i, row) in rows.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = squared_distance(row, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            assignment[i] = best.0;
        }
        // Refill empty clusters with the point farthest from its centroid.
        loop {
            let mut counts = vec![0usize; k];
            for &c in &assignment {
                counts[c] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let (far, _) = assignment
                .iter()
                .enumerate()
                .map(|(i, &c)| (i, squared_distance(&rows[i], &centroids[c])))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("nonempty rows");
            assignment[far] = empty;
            centroids[empty] = rows[far].clone();
        }
        // Update.
        let mut movement = 0.0f64;
        let mut sums = vec![vec![0.0; rows[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (row, &c) in rows.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
            movement = movement.max(squared_distance(&sums[c], &centroids[c]).sqrt());
            centroids[c] = std::mem::take(&mut sums[c]);
        }
        if movement < tol {
            break;
        }
    }
    // Final assignment against the converged centroids.
    for (i, row) in rows.iter().enumerate() {
        let mut best = (0usize, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared_distance(row, centroid);
            if d < best.1 {
                best = (c, d);
            }
        }
        assignment[i] = best.0;
    }
    (assignment, centroids)
}

fn plus_plus_seeding(rows: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![rows[rng.random_range(0..rows.len())].clone()];
    let mut dist: Vec<f64> =
        rows.iter().map(|r| squared_distance(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..rows.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = rows.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(rows[next].clone());
        for (d, r) in dist.iter_mut().zip(rows) {
            *d = d.min(squared_distance(r, centroids.last().unwrap()));
        }
    }
    centroids
}

/// K-means over cosine geometry: assignments computed on unit-normalized
/// rows, centroids reported as arithmetic means of the original points.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> ClusteringResult {
    assert!(!points.is_empty(), "kmeans needs at least one point");
    let rows = unit_rows(points);
    let (assignment, _) = lloyd(&rows, k, derive_seed(seed, "kmeans"), None);
    ClusteringResult::from_assignment(points, compact_labels(assignment))
}

/// Relabel cluster ids to `0..n` in order of first appearance.
fn compact_labels(assignment: Vec<usize>) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    assignment
        .into_iter()
        .map(|c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

const DEGENERATE_VARIANCE: f64 = 1e-12;

fn cluster_sse(rows: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter().zip(assignment).map(|(r, &c)| squared_distance(r, &centroids[c])).sum()
}

/// BIC of a fitted k-cluster model on `rows` under identical spherical
/// gaussians with a pooled variance. Larger is better. `None` when the model
/// is degenerate (variance ~ 0 or too few points).
fn bic(rows: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>], k: usize) -> Option<f64> {
    let n = rows.len();
    let d = rows[0].len();
    if n <= k {
        return None;
    }
    let variance = cluster_sse(rows, assignment, centroids) / (n - k) as f64;
    if variance <= DEGENERATE_VARIANCE {
        return None;
    }
    let mut counts = vec![0usize; k];
    for &c in assignment {
        counts[c] += 1;
    }
    let n_f = n as f64;
    let mut loglik = -(n_f * d as f64 / 2.0) * (std::f64::consts::TAU * variance).ln()
        - (n - k) as f64 / 2.0
        - n_f * n_f.ln();
    for &c in &counts {
        if c > 0 {
            loglik += c as f64 * (c as f64).ln();
        }
    }
    let params = (k - 1) + k * d + 1;
    Some(loglik - params as f64 / 2.0 * n_f.ln())
}

/// X-means: start from `kmin` clusters and repeatedly attempt BIC-scored
/// binary splits of each cluster until no split improves BIC or `kmax` is
/// reached. Deterministic given the seed.
pub fn xmeans_cluster(points: &[Vec<f64>], kmin: usize, kmax: usize, seed: u64) -> ClusteringResult {
    assert!(!points.is_empty(), "xmeans needs at least one point");
    assert!(kmin >= 1 && kmin <= kmax, "need 1 <= kmin <= kmax");
    let rows = unit_rows(points);
    let n = rows.len();
    let kmin = kmin.min(n);
    let kmax = kmax.min(n);

    let (mut assignment, mut centroids) = lloyd(&rows, kmin, derive_seed(seed, "xmeans-init"), None);
    let mut k = centroids.len();

    for round in 0..kmax {
        if k >= kmax {
            break;
        }
        let mut members = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        let mut next_centroids: Vec<Vec<f64>> = Vec::with_capacity(kmax);
        let mut split_any = false;
        for (c, member) in members.iter().enumerate() {
            if member.is_empty() {
                continue;
            }
            // A split needs a meaningful variance estimate on both sides of
            // the comparison and room under the ceiling.
            if member.len() < 3 || k >= kmax {
                next_centroids.push(centroids[c].clone());
                continue;
            }
            let sub: Vec<Vec<f64>> = member.iter().map(|&i| rows[i].clone()).collect();
            let all: Vec<usize> = (0..sub.len()).collect();
            let parent_centroid = mean_of(&sub, &all);
            let parent_var =
                cluster_sse(&sub, &vec![0; sub.len()], std::slice::from_ref(&parent_centroid))
                    / (sub.len() - 1) as f64;
            if parent_var <= DEGENERATE_VARIANCE {
                // Uniform cluster: nothing to explain by splitting.
                next_centroids.push(centroids[c].clone());
                continue;
            }
            let child_seed = derive_seed(seed, &format!("xmeans-split:{round}:{c}"));
            let (child_assign, child_centroids) = lloyd(&sub, 2, child_seed, None);
            let child_k = child_assign.iter().copied().max().unwrap_or(0) + 1;
            let accept = if child_k != 2 {
                false
            } else {
                let child_var = cluster_sse(&sub, &child_assign, &child_centroids)
                    / (sub.len() - 2) as f64;
                if child_var <= DEGENERATE_VARIANCE {
                    // Children explain the spread exactly; the gaussian BIC
                    // degenerates but the split is unambiguous.
                    true
                } else {
                    matches!(
                        (
                            bic(&sub, &vec![0; sub.len()], std::slice::from_ref(&parent_centroid), 1),
                            bic(&sub, &child_assign, &child_centroids, 2),
                        ),
                        (Some(p), Some(ch)) if ch > p
                    )
                }
            };
            if accept {
                next_centroids.push(child_centroids[0].clone());
                next_centroids.push(child_centroids[1].clone());
                split_any = true;
                k += 1;
            } else {
                next_centroids.push(centroids[c].clone());
            }
        }
        if !split_any {
            break;
        }
        // Refine globally from the accepted centroid set.
        let (a, c) = lloyd(&rows, next_centroids.len(), 0, Some(next_centroids));
        assignment = a;
        centroids = c;
        k = centroids.len();
    }
    ClusteringResult::from_assignment(points, compact_labels(assignment))
}

/// Group-average agglomerative clustering over cosine distance.
///
/// Merging continues while the best candidate merge's linkage distance stays
/// at or below `termination_threshold`; ties break toward the lowest pair of
/// cluster indices, which makes the result deterministic and independent of
/// input order for tie-free data.
pub fn agglomerative_cluster(points: &[Vec<f64>], termination_threshold: f64) -> ClusteringResult {
    let n = points.len();
    assert!(n >= 1, "agglomerative clustering needs at least one point");
    // Flat upper-triangle distance matrix between live clusters.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut alive = vec![true; n];
    let mut size = vec![1usize; n];
    let mut label: Vec<usize> = (0..n).collect();

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let d = dist[i * n + j];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, d)) = best else {
            break;
        };
        if d > termination_threshold {
            break;
        }
        // Merge j into i with the group-average update.
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for m in 0..n {
            if !alive[m] || m == i || m == j {
                continue;
            }
            let merged = (si * dist[i * n + m] + sj * dist[j * n + m]) / (si + sj);
            dist[i * n + m] = merged;
            dist[m * n + i] = merged;
        }
        size[i] += size[j];
        alive[j] = false;
        for l in label.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
    }
    ClusteringResult::from_assignment(points, compact_labels(label))
}
