//! Concrete problems: matrix completion on the fixed-rank manifold, lasso
//! and convex quadratics on Euclidean space, and synthetic data generators.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FoaError, Result};
use crate::fixed_rank::{tangent_from_products, FactoredPoint, FactoredTangent, FixedRank};
use crate::linalg::{orthonormalize, thin_svd, DenseMatrix};
use crate::manifold::Euclidean;
use crate::prox::{l1_norm, soft_threshold_matrix, ShrinkThreshold};
use crate::solver::CompositeProblem;

/// Observed entries `A|_Omega` of an `m x n` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub rows: usize,
    pub cols: usize,
    pub indices: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(rows: usize, cols: usize, indices: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(FoaError::InvalidParameter("observation set is empty".into()));
        }
        if indices.len() != values.len() {
            return Err(FoaError::InvalidParameter(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FoaError::NonFinite("observed values"));
        }
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        for &(i, j) in &indices {
            if i >= rows || j >= cols {
                return Err(FoaError::InvalidParameter(format!(
                    "index ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(FoaError::InvalidParameter(format!("duplicate index ({i}, {j})")));
            }
        }
        Ok(ObservationSet {
            rows,
            cols,
            indices,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `P_Omega(A)` as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (&(i, j), v) in self.indices.iter().zip(&self.values) {
            out[(i, j)] = *v;
        }
        out
    }

    /// `|P_Omega(A)|_F`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Residuals `X_ij - A_ij` over `Omega`.
    pub fn residuals(&self, x: &FactoredPoint) -> Vec<f64> {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), a)| x.entry(i, j) - a)
            .collect()
    }

    /// `|P_Omega(X - A)|_F / |P_Omega(A)|_F`.
    pub fn relative_residual(&self, x: &FactoredPoint) -> f64 {
        let r: f64 = self.residuals(x).iter().map(|v| v * v).sum::<f64>().sqrt();
        r / self.norm()
    }
}

/// `F(X) = 1/2 |P_Omega(X - A)|_F^2`.
pub fn mc_objective(x: &FactoredPoint, obs: &ObservationSet) -> f64 {
    0.5 * obs.residuals(x).iter().map(|v| v * v).sum::<f64>()
}

pub fn mc_objective_dense(x: &DenseMatrix, obs: &ObservationSet) -> f64 {
    0.5 * obs
        .indices
        .iter()
        .zip(&obs.values)
        .map(|(&(i, j), a)| (x[(i, j)] - a).powi(2))
        .sum::<f64>()
}

/// Ambient gradient `P_Omega(X - A)`, zero outside `Omega`.
pub fn mc_grad(x: &FactoredPoint, obs: &ObservationSet) -> DenseMatrix {
    let mut g = DMatrix::zeros(obs.rows, obs.cols);
    for (&(i, j), r) in obs.indices.iter().zip(obs.residuals(x)) {
        g[(i, j)] = r;
    }
    g
}

/// A matrix-completion instance; ground truth is kept for synthetic data.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletionInstance {
    pub ground_truth: Option<DenseMatrix>,
    pub observations: ObservationSet,
    pub rank: usize,
    pub oversampling: f64,
}

/// Largest `m * n` for which the dense ground truth is retained.
pub const DENSE_TRUTH_LIMIT: usize = 1_000_000;

/// `round(os * r * (m + n - r))`.
pub fn sample_size(m: usize, n: usize, r: usize, os: f64) -> usize {
    (os * (r * (m + n - r)) as f64).round() as usize
}

/// Random rank-`r` matrix `A = L R` with standard normal factors, observed on
/// `round(os * r (m + n - r))` entries drawn uniformly without replacement.
pub fn generate_completion(m: usize, n: usize, r: usize, os: f64, seed: u64) -> Result<CompletionInstance> {
    if m == 0 || n == 0 || r == 0 || r > m.min(n) {
        return Err(FoaError::Infeasible(format!(
            "need 1 <= r <= min(m, n), got m={m} n={n} r={r}"
        )));
    }
    if !(os > 2.0 && os.is_finite()) {
        return Err(FoaError::Infeasible(format!("oversampling must exceed 2, got {os}")));
    }
    let k = sample_size(m, n, r, os);
    if k > m * n {
        return Err(FoaError::Infeasible(format!(
            "{k} samples requested from a {m}x{n} matrix"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
    let rt = DMatrix::from_fn(r, n, |_, _| StandardNormal.sample(&mut rng));
    let mut picked = sample(&mut rng, m * n, k).into_vec();
    picked.sort_unstable();
    let indices: Vec<(usize, usize)> = picked.iter().map(|&p| (p / n, p % n)).collect();
    let values = indices
        .iter()
        .map(|&(i, j)| l.row(i).dot(&rt.column(j).transpose()))
        .collect();
    let observations = ObservationSet::new(m, n, indices, values)?;
    let ground_truth = (m * n <= DENSE_TRUTH_LIMIT).then(|| &l * &rt);
    Ok(CompletionInstance {
        ground_truth,
        observations,
        rank: r,
        oversampling: os,
    })
}

impl CompletionInstance {
    /// Rank-`r` truncation of the rescaled observations `mn/|Omega| P_Omega(A)`.
    pub fn spectral_start(&self) -> Result<FactoredPoint> {
        let obs = &self.observations;
        let scale = (obs.rows * obs.cols) as f64 / obs.len() as f64;
        FactoredPoint::from_dense(&(obs.to_dense() * scale), self.rank)
    }
}

/// Matrix completion `1/2 |P_Omega(X - A)|^2` over `M_r`.
#[derive(Clone, Debug)]
pub struct CompletionProblem {
    pub space: FixedRank,
    pub observations: ObservationSet,
}

impl CompletionProblem {
    pub fn new(observations: ObservationSet, rank: usize) -> Result<Self> {
        let space = FixedRank::new(observations.rows, observations.cols, rank)?;
        Ok(CompletionProblem { space, observations })
    }
}

impl CompositeProblem for CompletionProblem {
    type Space = FixedRank;

    fn manifold(&self) -> &FixedRank {
        &self.space
    }

    fn smooth_value(&self, x: &FactoredPoint) -> f64 {
        mc_objective(x, &self.observations)
    }

    fn euclidean_gradient(&self, x: &FactoredPoint) -> DenseMatrix {
        mc_grad(x, &self.observations)
    }

    /// Projects the sparse gradient without densifying it.
    fn riemannian_gradient(&self, x: &FactoredPoint) -> FactoredTangent {
        let k = x.rank();
        let mut zv = DMatrix::zeros(x.nrows(), k);
        let mut ztu = DMatrix::zeros(x.ncols(), k);
        for (&(i, j), r) in self.observations.indices.iter().zip(self.observations.residuals(x)) {
            for c in 0..k {
                zv[(i, c)] += r * x.v[(j, c)];
                ztu[(j, c)] += r * x.u[(i, c)];
            }
        }
        tangent_from_products(x, zv, ztu)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(x) = 1/2 |A x - b|^2`, `g(x) = lambda |x|_1` on `R^n`.
#[derive(Clone, Debug)]
pub struct LassoProblem {
    pub a: DenseMatrix,
    pub b: DVector<f64>,
    pub lambda: f64,
    space: Euclidean,
    lipschitz: f64,
}

pub fn lasso_problem(a: DenseMatrix, b: DVector<f64>, lambda: f64) -> Result<LassoProblem> {
    if a.nrows() != b.len() {
        return Err(FoaError::ShapeMismatch {
            context: "lasso",
            expected: (a.nrows(), 1),
            got: (b.len(), 1),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FoaError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let smax = thin_svd(&a)?.sigma.get(0).copied().unwrap_or(0.0);
    Ok(LassoProblem {
        space: Euclidean::vector(a.ncols()),
        lipschitz: smax * smax,
        a,
        b,
        lambda,
    })
}

impl LassoProblem {
    /// Smallest `lambda` for which `x = 0` is optimal: `|A^T b|_inf`.
    pub fn lambda_max(&self) -> f64 {
        (self.a.transpose() * &self.b).amax()
    }
}

impl CompositeProblem for LassoProblem {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn smooth_value(&self, x: &DenseMatrix) -> f64 {
        let r = &self.a * x.column(0) - &self.b;
        0.5 * r.norm_squared()
    }

    fn euclidean_gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let r = &self.a * x.column(0) - &self.b;
        let g = self.a.transpose() * r;
        DMatrix::from_column_slice(g.len(), 1, g.as_slice())
    }

    fn nonsmooth_value(&self, x: &DenseMatrix) -> f64 {
        self.lambda * l1_norm(x)
    }

    fn has_nonsmooth(&self) -> bool {
        self.lambda > 0.0
    }

    fn prox_step(&self, y: &DenseMatrix, grad: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
        let tau = ShrinkThreshold::new(self.lambda / alpha)?;
        Ok(soft_threshold_matrix(&(y - grad / alpha), tau))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Random lasso instance: standard normal `A` (`rows x cols`) and `b`, with
/// `lambda = lambda_frac * |A^T b|_inf`.
pub fn generate_lasso(rows: usize, cols: usize, lambda_frac: f64, seed: u64) -> Result<LassoProblem> {
    if rows == 0 || cols == 0 {
        return Err(FoaError::Infeasible("lasso dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let b = DVector::from_fn(rows, |_, _| StandardNormal.sample(&mut rng));
    let mut p = lasso_problem(a, b, 0.0)?;
    p.lambda = lambda_frac * p.lambda_max();
    if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
        return Err(FoaError::InvalidParameter(format!(
            "lambda fraction must be >= 0, got {lambda_frac}"
        )));
    }
    Ok(p)
}

/// `f(x) = 1/2 x^T H x - c^T x` with symmetric positive definite `H`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    pub h: DenseMatrix,
    pub c: DVector<f64>,
    space: Euclidean,
    lipschitz: f64,
}

impl QuadraticProblem {
    pub fn new(h: DenseMatrix, c: DVector<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() || h.nrows() != c.len() {
            return Err(FoaError::ShapeMismatch {
                context: "quadratic",
                expected: (c.len(), c.len()),
                got: h.shape(),
            });
        }
        let eig = h.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(FoaError::InvalidParameter("H must be positive definite".into()));
        }
        Ok(QuadraticProblem {
            space: Euclidean::vector(c.len()),
            lipschitz: lmax,
            h,
            c,
        })
    }

    /// `H^{-1} c`.
    pub fn minimizer(&self) -> DVector<f64> {
        self.h
            .clone()
            .cholesky()
            .expect("H is positive definite")
            .solve(&self.c)
    }
}

impl CompositeProblem for QuadraticProblem {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn smooth_value(&self, x: &DenseMatrix) -> f64 {
        let x = x.column(0);
        0.5 * x.dot(&(&self.h * x)) - self.c.dot(&x)
    }

    fn euclidean_gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let g = &self.h * x.column(0) - &self.c;
        DMatrix::from_column_slice(g.len(), 1, g.as_slice())
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

fn normalize(v: &mut DVector<f64>) {
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
}

/// Columns drawn from a union of `clusters` mutually orthogonal subspaces
/// of dimension `dim` in `R^ambient`. Each clean sample is scaled to unit
/// length, then Gaussian noise is added and the column normalized again.
/// Columns are grouped by cluster.
pub fn generate_union_subspaces(
    clusters: usize,
    dim: usize,
    per_cluster: usize,
    ambient: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    if clusters == 0 || dim == 0 || per_cluster == 0 {
        return Err(FoaError::Infeasible(
            "clusters, dim and per_cluster must be positive".into(),
        ));
    }
    if clusters * dim > ambient {
        return Err(FoaError::Infeasible(format!(
            "{clusters} subspaces of dimension {dim} do not fit in R^{ambient}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(FoaError::InvalidParameter(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(ambient, clusters * dim, |_, _| StandardNormal.sample(&mut rng));
    let basis = orthonormalize(&g);
    let noise = Normal::new(0.0, noise_sigma).expect("sigma checked above");
    let total = clusters * per_cluster;
    let mut d = DMatrix::zeros(ambient, total);
    let mut labels = Vec::with_capacity(total);
    for c in 0..clusters {
        let b = basis.columns(c * dim, dim);
        for s in 0..per_cluster {
            let coeff = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let mut col = b * coeff;
            normalize(&mut col);
            if noise_sigma > 0.0 {
                col += DVector::from_fn(ambient, |_, _| noise.sample(&mut rng));
                normalize(&mut col);
            }
            d.set_column(c * per_cluster + s, &col);
            labels.push(c);
        }
    }
    Ok((d, labels))
}
