mod common;

use nalgebra::DMatrix;
use riemfoa::cluster::{clustering_error, spectral_cluster};
use riemfoa::linalg::matrix_rank;
use riemfoa::lrr::{
    affinity, alm_objective, grad_x_smooth, sp_rprg_alm, update_e, update_multiplier, AlmConfig, AlmState, LrrProblem,
    RankStop,
};
use riemfoa::problems::generate_union_subspaces;
use riemfoa::FactoredPoint;

use common::*;

fn problem(d: DMatrix<f64>, lambda: f64) -> LrrProblem {
    LrrProblem::new(d, lambda, 0.01, 1.1, 1).unwrap()
}

fn nuclear(x: &DMatrix<f64>) -> f64 {
    singular_values(x).iter().sum()
}

fn l21(x: &DMatrix<f64>) -> f64 {
    x.column_iter().map(|c| c.norm()).sum()
}

/// A state with random `X`, `E`, `U` for the closed-form update checks.
fn random_state(p: &LrrProblem, seed: u64) -> AlmState {
    let mut g = rng(seed);
    let n = p.samples();
    AlmState {
        x: random_point(n, n, 2, &mut g),
        e: gaussian(p.d.nrows(), n, &mut g) * 0.1,
        u: gaussian(p.d.nrows(), n, &mut g),
        rho: 0.7,
        r: 2,
    }
}

#[test]
fn rejects_bad_parameters() {
    let d = DMatrix::identity(3, 3);
    assert!(LrrProblem::new(d.clone(), 0.0, 1.0, 2.0, 1).is_err());
    assert!(LrrProblem::new(d.clone(), 1.0, -1.0, 2.0, 1).is_err());
    assert!(LrrProblem::new(d.clone(), 1.0, 1.0, 1.0, 1).is_err());
    assert!(LrrProblem::new(d.clone(), 1.0, 1.0, 2.0, 0).is_err());
    let mut bad = d;
    bad[(0, 1)] = f64::NAN;
    assert!(LrrProblem::new(bad, 1.0, 1.0, 2.0, 1).is_err());
}

#[test]
fn objective_matches_term_by_term_evaluation() {
    let mut g = rng(31);
    let p = problem(gaussian(5, 7, &mut g), 0.4);
    let s = random_state(&p, 32);
    let x = s.x.to_dense();
    let resid = &p.d - &p.d * &x - &s.e;
    let want = nuclear(&x) + 0.4 * l21(&s.e) + s.u.dot(&resid) + 0.5 * s.rho * resid.norm_squared();
    assert!((alm_objective(&s, &p) - want).abs() <= 1e-10 * want.abs());
}

#[test]
fn smooth_gradient_matches_finite_differences() {
    let mut g = rng(33);
    let p = problem(gaussian(4, 5, &mut g), 0.4);
    let s = random_state(&p, 34);
    let smooth = |x: &DMatrix<f64>| {
        let r = &p.d - &p.d * x - &s.e;
        s.u.dot(&r) + 0.5 * s.rho * r.norm_squared()
    };
    let fd = fd_gradient(smooth, &s.x.to_dense(), 1e-6);
    assert!(rel_err(&grad_x_smooth(&s, &p), &fd) < 1e-6);
}

#[test]
fn e_update_is_column_shrinkage_of_the_shifted_residual() {
    let mut g = rng(35);
    let p = problem(gaussian(6, 8, &mut g), 0.5);
    let s = random_state(&p, 36);
    let w = &p.d - &p.d * s.x.to_dense() + &s.u / s.rho;
    let tau = p.lambda / s.rho;
    let e = update_e(&s, &p).unwrap();
    for j in 0..8 {
        let wn = w.column(j).norm();
        let want = w.column(j) * (1.0 - tau / wn).max(0.0);
        assert!((e.column(j) - want).norm() < 1e-12);
    }
    // the result minimizes tau |E|_{2,1} + 1/2 |E - W|^2 over a grid of perturbations
    let obj = |m: &DMatrix<f64>| tau * l21(m) + 0.5 * (m - &w).norm_squared();
    let base = obj(&e);
    for step in [1e-1, 1e-2, 1e-3, 1e-4] {
        for _ in 0..50 {
            assert!(obj(&(&e + gaussian(6, 8, &mut g) * step)) >= base - 1e-12);
        }
    }
}

#[test]
fn multiplier_update_formulas() {
    let mut g = rng(37);
    let mut p = problem(gaussian(4, 6, &mut g), 0.5);
    p.beta = 3.0;
    let mut s = random_state(&p, 38);
    let resid = &p.d - &p.d * s.x.to_dense() - &s.e;
    let (u, rho) = update_multiplier(&s, &p);
    assert!((u - (&s.u + resid * s.rho)).norm() < 1e-12);
    assert_eq!(rho, 3.0 * 0.7);
    s.rho = 5e4;
    assert_eq!(update_multiplier(&s, &p).1, p.rho_cap);
}

#[test]
fn zero_data_stops_immediately() {
    let out = sp_rprg_alm(&problem(DMatrix::zeros(4, 6), 0.3), &AlmConfig::default()).unwrap();
    assert_eq!(out.rank_stop, RankStop::ZeroData);
    assert_eq!(out.state.x.rank(), 0);
    assert!(out.trace.is_empty());
}

#[test]
fn rank_one_data_converges_at_first_budget() {
    // one direction repeated with different weights, plus a zero column
    let dir = [1.0, -2.0, 0.5, 1.5];
    let w = [1.0, 0.5, -2.0, 0.0, 3.0];
    let d = DMatrix::from_fn(4, 5, |i, j| dir[i] * w[j]);
    let p = problem(d, 0.3);
    let out = sp_rprg_alm(&p, &AlmConfig::default()).unwrap();
    assert_eq!(out.data_rank, 1);
    assert_eq!(out.ranks.len(), 1);
    assert_eq!(out.ranks[0].r, 1);
    assert_eq!(out.rank_stop, RankStop::RankLimit);
    assert!(out.residual_norm(&p) <= 1e-4 * p.d.norm());
    assert!(out.state.x.rank() <= 1);
}

#[test]
fn orthogonal_subspaces_give_block_diagonal_representation() {
    let (d, truth) = generate_union_subspaces(2, 2, 6, 8, 0.0, 3).unwrap();
    let p = problem(d, 0.3);
    let out = sp_rprg_alm(&p, &AlmConfig::default()).unwrap();
    assert!(out.residual_norm(&p) <= 1e-4 * p.d.norm());
    let x = out.state.x.to_dense();
    let off: f64 = (0..12)
        .flat_map(|i| (0..12).map(move |j| (i, j)))
        .filter(|&(i, j)| truth[i] != truth[j])
        .map(|(i, j)| x[(i, j)] * x[(i, j)])
        .sum::<f64>()
        .sqrt();
    assert!(off <= 1e-6 * x.norm().max(1.0), "off-block mass {off}");
    let labels = spectral_cluster(&affinity(&out.state.x), 2, 0).unwrap();
    assert_eq!(clustering_error(&labels, &truth).unwrap(), 0.0);
}

#[test]
fn rank_schedule_respects_budget_and_warm_starts() {
    let (d, _) = generate_union_subspaces(3, 2, 5, 10, 0.05, 4).unwrap();
    let p = problem(d, 0.3);
    let cfg = AlmConfig {
        max_rank: Some(3),
        ..AlmConfig::default()
    };
    let out = sp_rprg_alm(&p, &cfg).unwrap();
    assert!(out.ranks.iter().all(|s| s.r <= 3));
    assert!(out.state.x.rank() <= 3);
    assert!(out.ranks.windows(2).all(|w| w[1].r == w[0].r + 1));
    for w in out.ranks.windows(2) {
        assert_eq!(w[1].first_objective, w[0].final_objective);
    }
    assert!(matches!(
        out.rank_stop,
        RankStop::BudgetExhausted | RankStop::Stationary
    ));
}

#[test]
fn huge_lambda_keeps_error_term_at_zero() {
    let mut g = rng(39);
    let d = random_low_rank(6, 8, 2, &mut g);
    let p = problem(d, 1e8);
    let out = sp_rprg_alm(&p, &AlmConfig::default()).unwrap();
    assert_eq!(out.state.e.norm(), 0.0);
    assert!(out.residual_norm(&p) <= 1e-4 * p.d.norm());
    assert_eq!(matrix_rank(&p.d).unwrap(), 2);
}

#[test]
fn affinity_is_symmetric_and_nonnegative() {
    let mut g = rng(40);
    let x = random_point(7, 7, 3, &mut g);
    let a = affinity(&x);
    assert_eq!(a, a.transpose());
    assert!(a.iter().all(|v| *v >= 0.0));
    assert_eq!(affinity(&FactoredPoint::zero(3, 3)), DMatrix::zeros(3, 3));
}
