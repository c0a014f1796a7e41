//! k-means and the X-means wrapper that chooses the number of clusters.
//!
//! X-means starts from two clusters and alternates two steps:
//! *improve-params* (Lloyd iterations over all points) and
//! *improve-structure* (try splitting every cluster in two and keep the
//! split when the local BIC of the pair beats that of the parent).
//!
//! The BIC uses the identical-variance spherical Gaussian model with
//! `k (d + 1)` free parameters; higher is better.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::linalg::Matrix;

pub const DEFAULT_MAX_ITER: usize = 300;

/// Clusters smaller than this are never split.
const MIN_SPLIT_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub bic: f64,
    /// Inertia after every assignment step of the final Lloyd run.
    pub inertia_history: Vec<f64>,
}

/// JSON form of a model; labels are exported separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub k: usize,
    pub centroids: Matrix,
    pub inertia: f64,
    pub bic: f64,
}

impl ClusterModel {
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            k: self.k,
            centroids: self.centroids.clone(),
            inertia: self.inertia,
            bic: self.bic,
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row indices belonging to each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        members_of(&self.labels, self.k)
    }
}

pub(crate) fn members_of(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        m[l].push(i);
    }
    m
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
#[inline]
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.row_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn validate_points(points: &Matrix) -> Result<()> {
    ensure!(points.rows() >= 1, Validation, "no points to cluster");
    ensure!(points.is_finite(), Validation, "points contain non-finite values");
    Ok(())
}

/// k-means++ seeding.
fn seed_centroids(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let l = points.rows();
    let mut chosen = vec![rng.random_range(0..l)];
    let mut d2: Vec<f64> = points
        .row_iter()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = l - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 {
                    if target < *d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
            }
            // rounding can leave `target` unconsumed; fall back to the last positive weight
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|d| *d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..l)
        };
        chosen.push(next);
        let c = points.row(next).to_vec();
        for (i, p) in points.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
    }
    points.select_rows(&chosen)
}

struct LloydResult {
    centroids: Matrix,
    labels: Vec<usize>,
    inertia: f64,
    history: Vec<f64>,
}

fn assign(points: &Matrix, centroids: &Matrix) -> Vec<(usize, f64)> {
    (0..points.rows())
        .into_par_iter()
        .map(|i| nearest(points.row(i), centroids))
        .collect()
}

fn means(points: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (p, &l) in points.row_iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(p) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let inv = 1.0 / c as f64;
            sums.row_mut(j).iter_mut().for_each(|v| *v *= inv);
        }
    }
    sums
}

fn inertia_of(points: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    points
        .row_iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or `max_iter` assignment steps have run.
fn lloyd(points: &Matrix, mut centroids: Matrix, max_iter: usize) -> LloydResult {
    let k = centroids.rows();
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let assigned = assign(points, &centroids);
        let mut next: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();

        // Empty clusters take over the point farthest from its centroid.
        let mut counts = vec![0usize; k];
        for &l in &next {
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut far: Option<usize> = None;
            for i in 0..next.len() {
                if counts[next[i]] > 1 && far.is_none_or(|f| dist[i] > dist[f]) {
                    far = Some(i);
                }
            }
            if let Some(i) = far {
                counts[next[i]] -= 1;
                counts[j] = 1;
                next[i] = j;
                dist[i] = 0.0;
                centroids.row_mut(j).copy_from_slice(points.row(i));
            }
        }

        history.push(dist.iter().sum());
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
        centroids = means(points, &labels, k);
    }
    if history.len() == max_iter {
        // stopped on the iteration cap: make centroids the means of the final labels
        centroids = means(points, &labels, k);
        let inertia = inertia_of(points, &centroids, &labels);
        history.push(inertia);
    }
    LloydResult {
        inertia: *history.last().expect("max_iter >= 1"),
        centroids,
        labels,
        history,
    }
}

fn model_from(points: &Matrix, run: LloydResult) -> ClusterModel {
    let k = run.centroids.rows();
    let sizes = {
        let mut s = vec![0; k];
        run.labels.iter().for_each(|&l| s[l] += 1);
        s
    };
    let bic = bic_from_stats(&sizes, run.inertia, points.cols());
    ClusterModel {
        k,
        centroids: run.centroids,
        labels: run.labels,
        inertia: run.inertia,
        bic,
        inertia_history: run.history,
    }
}

/// Lloyd's algorithm from k-means++ seeding; identical inputs and seed give
/// identical models.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    validate_points(points)?;
    ensure!(k >= 1, Validation, "k must be at least 1");
    ensure!(
        k <= points.rows(),
        Validation,
        "k = {k} exceeds the number of points ({})",
        points.rows()
    );
    ensure!(max_iter >= 1, Validation, "max_iter must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centroids(points, k, &mut rng);
    Ok(model_from(points, lloyd(points, init, max_iter)))
}

/// Lloyd's algorithm from explicit initial centroids.
pub fn kmeans_from(points: &Matrix, centroids: Matrix, max_iter: usize) -> Result<ClusterModel> {
    validate_points(points)?;
    ensure!(
        centroids.cols() == points.cols(),
        Dimension,
        "centroids have {} columns, points {}",
        centroids.cols(),
        points.cols()
    );
    ensure!(
        centroids.rows() >= 1 && centroids.rows() <= points.rows(),
        Validation,
        "need between 1 and {} centroids",
        points.rows()
    );
    ensure!(max_iter >= 1, Validation, "max_iter must be at least 1");
    Ok(model_from(points, lloyd(points, centroids, max_iter)))
}

/// BIC of a hard partition with `sizes[j]` points per cluster and total
/// squared error `sse` in `dim` dimensions.
///
/// The shared per-dimension variance is `sse / (dim (R - K))`; an exact fit
/// is floored at the smallest positive normal so the score stays finite.
pub fn bic_from_stats(sizes: &[usize], sse: f64, dim: usize) -> f64 {
    let r: usize = sizes.iter().sum();
    let k = sizes.len();
    let rf = r as f64;
    let d = dim as f64;
    let dof = (r.saturating_sub(k)) as f64 * d;
    let var = if dof > 0.0 { sse / dof } else { 0.0 }.max(f64::MIN_POSITIVE);
    let mut ll = 0.0;
    for &n in sizes {
        if n > 0 {
            let nf = n as f64;
            ll += nf * (nf / rf).ln();
        }
    }
    ll -= 0.5 * rf * d * (2.0 * std::f64::consts::PI * var).ln();
    ll -= 0.5 * dof;
    let params = (k * (dim + 1)) as f64;
    ll - 0.5 * params * rf.ln()
}

/// BIC of `model` evaluated on `points`.
pub fn bic_score(model: &ClusterModel, points: &Matrix) -> Result<f64> {
    ensure!(
        points.rows() >= model.k,
        Validation,
        "{} points cannot support {} clusters",
        points.rows(),
        model.k
    );
    ensure!(
        model.labels.len() == points.rows(),
        Dimension,
        "model has {} labels for {} points",
        model.labels.len(),
        points.rows()
    );
    ensure!(
        model.centroids.cols() == points.cols(),
        Dimension,
        "centroid dimension {} vs point dimension {}",
        model.centroids.cols(),
        points.cols()
    );
    ensure!(
        model.labels.iter().all(|&l| l < model.k),
        Validation,
        "label out of range"
    );
    let sse = inertia_of(points, &model.centroids, &model.labels);
    Ok(bic_from_stats(&model.cluster_sizes(), sse, points.cols()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XMeansParams {
    pub k_max: usize,
    /// Upper bound on improve-structure rounds.
    pub max_improve_iters: usize,
    pub seed: u64,
    /// Lloyd iteration cap for every k-means run.
    pub max_iter: usize,
}

impl Default for XMeansParams {
    fn default() -> Self {
        Self {
            k_max: 100,
            max_improve_iters: 5,
            seed: 42,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

pub fn xmeans(points: &Matrix, k_max: usize, max_improve_iters: usize, seed: u64) -> Result<ClusterModel> {
    xmeans_with(
        points,
        &XMeansParams {
            k_max,
            max_improve_iters,
            seed,
            max_iter: DEFAULT_MAX_ITER,
        },
    )
}

/// X-means from k = 2, bounded by `k_max` clusters.
pub fn xmeans_with(points: &Matrix, params: &XMeansParams) -> Result<ClusterModel> {
    validate_points(points)?;
    ensure!(params.k_max >= 2, Validation, "k_max must be at least 2");
    ensure!(points.rows() >= 2, Validation, "X-means needs at least two points");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = kmeans(points, 2, rng.next_u64(), params.max_iter)?;

    for round in 0..params.max_improve_iters {
        if model.k >= params.k_max {
            break;
        }
        let mut accepted: Vec<(f64, usize, Matrix)> = Vec::new();
        for (j, members) in model.members().into_iter().enumerate() {
            let split_seed = rng.next_u64();
            if members.len() < MIN_SPLIT_SIZE {
                continue;
            }
            let region = points.select_rows(&members);
            let parent_sse = inertia_of(&region, &model.centroids.select_rows(&[j]), &vec![0; members.len()]);
            let parent_bic = bic_from_stats(&[members.len()], parent_sse, points.cols());
            let child = kmeans(&region, 2, split_seed, params.max_iter)?;
            if child.bic > parent_bic {
                accepted.push((child.bic - parent_bic, j, child.centroids));
            }
        }
        if accepted.is_empty() {
            log::debug!("x-means: round {round} accepted no splits at k = {}", model.k);
            break;
        }
        let budget = params.k_max - model.k;
        accepted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        accepted.truncate(budget);
        accepted.sort_by_key(|a| a.1);

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(model.k + accepted.len());
        let mut next = accepted.iter().peekable();
        for j in 0..model.k {
            match next.peek() {
                Some((_, split, children)) if *split == j => {
                    rows.push(children.row(0).to_vec());
                    rows.push(children.row(1).to_vec());
                    next.next();
                }
                _ => rows.push(model.centroids.row(j).to_vec()),
            }
        }
        log::debug!(
            "x-means: round {round} split {} of {} clusters",
            accepted.len(),
            model.k
        );
        model = kmeans_from(points, Matrix::from_rows(&rows)?, params.max_iter)?;
    }
    Ok(model)
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
