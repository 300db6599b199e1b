//! Affinity-to-labels step for subspace clustering and the clustering error
//! metric.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FoaError, Result};
use crate::linalg::DenseMatrix;

const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 200;

/// Connected components of the graph with an edge wherever `a_ij > 0`.
/// Labels are numbered in order of first appearance.
pub fn connected_components(affinity: &DenseMatrix) -> Vec<usize> {
    let n = affinity.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if labels[j] == usize::MAX && (affinity[(i, j)] > 0.0 || affinity[(j, i)] > 0.0) {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    labels
}

fn validate_affinity(a: &DenseMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(FoaError::ShapeMismatch {
            context: "affinity",
            expected: (a.nrows(), a.nrows()),
            got: a.shape(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(FoaError::NonFinite("affinity"));
    }
    if a.iter().any(|&v| v < 0.0) {
        return Err(FoaError::InvalidParameter("affinity must be nonnegative".into()));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() > 1e-10 * scale {
        return Err(FoaError::InvalidParameter("affinity must be symmetric".into()));
    }
    Ok(())
}

/// Relabel so that labels appear in increasing order of first occurrence.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Spectral clustering into `c` groups: the top `c` eigenvectors of
/// `D^{-1/2} W D^{-1/2}`, row-normalized, then k-means with 20 seeded
/// k-means++ restarts. When the zero pattern already splits the graph into
/// exactly `c` components those are returned directly.
pub fn spectral_cluster(affinity: &DenseMatrix, c: usize, seed: u64) -> Result<Vec<usize>> {
    validate_affinity(affinity)?;
    let n = affinity.nrows();
    if c == 0 || c > n {
        return Err(FoaError::InvalidParameter(format!(
            "cluster count {c} must be in 1..={n}"
        )));
    }
    if c == 1 {
        return Ok(vec![0; n]);
    }
    let components = connected_components(affinity);
    if components.iter().max().map_or(0, |&m| m + 1) == c {
        return Ok(components);
    }

    let inv_sqrt: Vec<f64> = affinity
        .row_iter()
        .map(|row| {
            let d = row.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| affinity[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(normalized);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut embedding = DMatrix::from_fn(n, c, |i, j| eig.eigenvectors[(i, order[j])]);
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(canonical(&kmeans(&embedding, c, seed)))
}

fn sq_dist(points: &DenseMatrix, i: usize, centers: &DenseMatrix, j: usize) -> f64 {
    (points.row(i) - centers.row(j)).norm_squared()
}

fn kmeans_pp(points: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = points.nrows();
    let mut centers = DMatrix::zeros(k, points.ncols());
    centers.set_row(0, &points.row(rng.random_range(0..n)));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(c, &points.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(points, i, &centers, c));
        }
    }
    centers
}

fn lloyd(points: &DenseMatrix, mut centers: DenseMatrix) -> (Vec<usize>, f64) {
    let (n, k) = (points.nrows(), centers.nrows());
    let mut labels = vec![0; n];
    let mut inertia = f64::INFINITY;
    for iter in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (best, d) = (0..k)
                .map(|j| (j, sq_dist(points, i, &centers, j)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("k >= 1");
            if best != *label || iter == 0 {
                changed |= best != *label;
                *label = best;
            }
            inertia += d;
        }
        if iter > 0 && !changed {
            break;
        }
        for j in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = DVector::zeros(points.ncols()).transpose();
            for &i in &members {
                mean += points.row(i);
            }
            centers.set_row(j, &(mean / members.len() as f64));
        }
    }
    (labels, inertia)
}

/// Lloyd's k-means, best of 20 k-means++ restarts drawn from one seeded stream.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let centers = kmeans_pp(points, k, &mut rng);
        let (labels, inertia) = lloyd(points, centers);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    best.expect("at least one restart").0
}

/// Minimum misclassification rate over all matchings of predicted to true
/// labels, in percent.
pub fn clustering_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(FoaError::ShapeMismatch {
            context: "clustering labels",
            expected: (truth.len(), 1),
            got: (pred.len(), 1),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let p = canonical(pred);
    let t = canonical(truth);
    let k = p.iter().chain(&t).max().copied().unwrap_or(0) + 1;
    let mut counts = Matrix::new(k, k, 0i64);
    for (&a, &b) in p.iter().zip(&t) {
        counts[(a, b)] += 1;
    }
    let (matched, _) = kuhn_munkres(&counts);
    let n = pred.len() as f64;
    Ok(100.0 * (n - matched as f64) / n)
}
