//! Test fixtures and independent oracles. Nothing here calls into the solver
//! code it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riemfoa::FactoredPoint;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `m x k` via Gram–Schmidt on a Gaussian matrix.
pub fn stiefel(m: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut q = gaussian(m, k, rng);
    for j in 0..k {
        for i in 0..j {
            let p = q.column(i).dot(&q.column(j));
            let qi = q.column(i).clone_owned();
            q.column_mut(j).axpy(-p, &qi, 1.0);
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

/// Random rank-`r` point with singular values in `[1, 4]`.
pub fn random_point(m: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> FactoredPoint {
    let mut s: Vec<f64> = (0..r).map(|_| rng.random_range(1.0..4.0)).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    FactoredPoint::new(stiefel(m, r, rng), DVector::from_vec(s), stiefel(n, r, rng)).unwrap()
}

/// Random matrix of rank at most `r`.
pub fn random_low_rank(m: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian(m, r, rng) * gaussian(r, n, rng)
}

/// Best rank-`r` approximation through nalgebra's SVD, sorted explicitly.
pub fn dense_truncate(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for &i in order.iter().take(r) {
        out += svd.singular_values[i] * u.column(i) * vt.row(i);
    }
    out
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// `P_U Z + Z P_V - P_U Z P_V`.
pub fn dense_tangent_projection(u: &DMatrix<f64>, v: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let pu = u * u.transpose();
    let pv = v * v.transpose();
    &pu * z + z * &pv - &pu * z * &pv
}

/// `(I - P_U) Z (I - P_V)`.
pub fn dense_normal_part(u: &DMatrix<f64>, v: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let pu = DMatrix::identity(u.nrows(), u.nrows()) - u * u.transpose();
    let pv = DMatrix::identity(v.nrows(), v.nrows()) - v * v.transpose();
    pu * z * pv
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    let mut xp = x.clone();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let orig = xp[(i, j)];
            xp[(i, j)] = orig + h;
            let fp = f(&xp);
            xp[(i, j)] = orig - h;
            let fm = f(&xp);
            xp[(i, j)] = orig;
            g[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Lasso data as plain row-major slices.
pub struct PlainLasso {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda: f64,
}

impl PlainLasso {
    pub fn from_matrix(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Self {
        let mut flat = Vec::with_capacity(a.len());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                flat.push(a[(i, j)]);
            }
        }
        PlainLasso {
            rows: a.nrows(),
            cols: a.ncols(),
            a: flat,
            b: b.iter().copied().collect(),
            lambda,
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b[i]
            })
            .collect()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).iter().map(|r| r * r).sum::<f64>()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.residual(x);
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.a[i * self.cols + j] * r[i]).sum())
            .collect()
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Textbook FISTA with backtracking (Beck–Teboulle), written against plain
/// slices. `slack` is the relative tolerance of the sufficient-decrease test.
/// Returns `x_0, x_1, ..., x_iters`.
pub fn fista_oracle(p: &PlainLasso, l0: f64, eta: f64, iters: usize, slack: f64) -> Vec<Vec<f64>> {
    let mut x = vec![0.0; p.cols];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut l = l0;
    let mut out = vec![x.clone()];
    for _ in 0..iters {
        let gy = p.grad(&y);
        let fy = p.f(&y);
        let x_new = loop {
            let z: Vec<f64> = y
                .iter()
                .zip(&gy)
                .map(|(yi, gi)| {
                    let v = yi - gi / l;
                    v.signum() * (v.abs() - p.lambda / l).max(0.0)
                })
                .collect();
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..p.cols {
                let d = z[i] - y[i];
                lin += d * gy[i];
                sq += d * d;
            }
            let q = fy + lin + 0.5 * l * sq + p.g(&z);
            let val = p.f(&z) + p.g(&z);
            if val <= q + slack * (val.abs() + fy.abs()) {
                break z;
            }
            l *= eta;
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = (0..p.cols)
            .map(|i| x_new[i] + (t - 1.0) / t_next * (x_new[i] - x[i]))
            .collect();
        t = t_next;
        x = x_new;
        out.push(x.clone());
    }
    out
}

/// Random SPD matrix `Q diag(lambda) Q^T` with eigenvalues in `[lo, hi]`.
pub fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = stiefel(n, n, rng);
    let d = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

/// Labels must agree up to a renaming of clusters.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
