//! Closed-form shrinkage operators: singular value thresholding (nuclear
//! norm), column shrinkage (l2,1 norm) and soft thresholding (l1 norm).

use crate::error::{FoaError, Result};
use crate::linalg::{DenseMatrix, ThinSvd};

/// A nonnegative, finite shrinkage threshold.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ShrinkThreshold(f64);

impl ShrinkThreshold {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(ShrinkThreshold(tau))
        } else {
            Err(FoaError::InvalidParameter(format!(
                "shrink threshold must be finite and >= 0, got {tau}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Shrinks every singular value by `tau`, dropping those that reach zero.
pub fn svt(s: &ThinSvd, tau: ShrinkThreshold) -> ThinSvd {
    let tau = tau.value();
    // sigma is descending, so the survivors form a prefix
    let keep = s.sigma.iter().take_while(|&&x| x - tau > 0.0).count();
    let mut out = s.truncated(keep);
    out.sigma.apply(|x| *x -= tau);
    out
}

/// Column `i` becomes `max(|w_i| - tau, 0) / |w_i| * w_i`; zero columns stay zero.
pub fn shrink_columns(w: &DenseMatrix, tau: ShrinkThreshold) -> DenseMatrix {
    let tau = tau.value();
    let mut out = w.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        let factor = if norm > tau { (norm - tau) / norm } else { 0.0 };
        col.scale_mut(factor);
    }
    out
}

/// Componentwise `sign(w_i) * max(|w_i| - tau, 0)`.
pub fn soft_threshold(w: &[f64], tau: ShrinkThreshold) -> Vec<f64> {
    w.iter().map(|&x| soft_scalar(x, tau.value())).collect()
}

pub fn soft_threshold_matrix(w: &DenseMatrix, tau: ShrinkThreshold) -> DenseMatrix {
    w.map(|x| soft_scalar(x, tau.value()))
}

fn soft_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `sum_i |w_i|_2` over columns.
pub fn l21_norm(w: &DenseMatrix) -> f64 {
    w.column_iter().map(|c| c.norm()).sum()
}

pub fn l1_norm(w: &DenseMatrix) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}
