mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use riemfoa::manifold::{Euclidean, Manifold};
use riemfoa::problems::{mc_grad, mc_objective, ObservationSet};
use riemfoa::variety::{grad_variety, lift_variety, project_cone, retract_variety};
use riemfoa::{FactoredPoint, FactoredTangent, FixedRank, LowRankVariety};

use common::*;

fn diag(m: usize, n: usize, d: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, n);
    for (i, v) in d.iter().enumerate() {
        a[(i, i)] = *v;
    }
    a
}

#[test]
fn euclidean_is_flat() {
    let e = Euclidean::new(3, 2);
    let mut g = rng(1);
    let x = gaussian(3, 2, &mut g);
    let y = gaussian(3, 2, &mut g);
    let xi = gaussian(3, 2, &mut g);
    assert_eq!(e.project_tangent(&x, &xi), xi);
    assert_eq!(e.retract(&x, &xi), &x + &xi);
    assert_eq!(e.lift(&x, &y), &y - &x);
    assert_eq!(e.transport(&x, &y, &xi), xi);
}

#[test]
fn projection_at_rank_one_corner() {
    let x = FactoredPoint::from_dense(&diag(2, 2, &[1.0]), 1).unwrap();
    let space = FixedRank::new(2, 2, 1).unwrap();
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let p = space.project_tangent(&x, &z).to_dense(&x);
    assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 0.0])).norm() < 1e-14);
}

#[test]
fn retraction_examples() {
    let space = FixedRank::new(2, 2, 1).unwrap();
    let x = FactoredPoint::from_dense(&diag(2, 2, &[1.0]), 1).unwrap();
    assert_eq!(space.retract(&x, &FactoredTangent::zero(&x)).to_dense(), x.to_dense());
    // X + xi = diag(1, 0.5): the normal direction is dropped
    let xi = space.project_tangent(&x, &diag(2, 2, &[0.0, 0.5]));
    assert!(space
        .retract(&x, &xi)
        .to_dense()
        .relative_eq(&diag(2, 2, &[1.0]), 1e-14, 1e-14));
    let target = diag(2, 2, &[1.0, 0.5]);
    let r = FactoredPoint::from_dense(&target, 1).unwrap();
    assert!((r.to_dense() - diag(2, 2, &[1.0])).norm() < 1e-14);
}

#[test]
fn rank_deficient_retraction_is_flagged() {
    let space = FixedRank::new(4, 3, 2).unwrap();
    let mut g = rng(2);
    let x = random_point(4, 3, 2, &mut g);
    // step to a rank-1 matrix along the tangent direction -sigma_2 u_2 v_2^T
    let mut drop = DMatrix::zeros(4, 3);
    drop += -x.sigma[1] * x.u.column(1) * x.v.column(1).transpose();
    let xi = space.project_tangent(&x, &drop);
    let out = space.retract_flagged(&x, &xi).unwrap();
    assert!(out.rank_deficient);
    assert_eq!(out.point.rank(), 1);
}

#[test]
fn retraction_is_second_order() {
    let space = FixedRank::new(12, 9, 3).unwrap();
    let mut g = rng(3);
    let x = random_point(12, 9, 3, &mut g);
    let xi = space.project_tangent(&x, &gaussian(12, 9, &mut g));
    let err = |t: f64| (space.retract(&x, &xi.scaled(t)).to_dense() - x.to_dense() - xi.to_dense(&x) * t).norm();
    let mut t = 0.1;
    for _ in 0..3 {
        let ratio = err(t) / err(t / 2.0);
        assert!(ratio >= 3.5, "t={t}: ratio {ratio}");
        t /= 2.0;
    }
}

#[test]
fn lift_agrees_with_difference_to_first_order() {
    let space = FixedRank::new(10, 8, 2).unwrap();
    let mut g = rng(4);
    let x = random_point(10, 8, 2, &mut g);
    let x_norm = x.to_dense().norm();
    for _ in 0..10 {
        let dir = gaussian(10, 8, &mut g);
        let y = FactoredPoint::from_dense(&(x.to_dense() + dir.clone() * (1e-3 * x_norm / dir.norm())), 2).unwrap();
        let lifted = space.lift(&x, &y).to_dense(&x).norm();
        let diff = (y.to_dense() - x.to_dense()).norm();
        assert!((lifted - diff).abs() <= 0.1 * diff, "{lifted} vs {diff}");
    }
    assert_eq!(space.lift(&x, &x).to_dense(&x).norm(), 0.0);
}

#[test]
fn completion_gradient_matches_directional_derivatives() {
    let (m, n, r) = (15, 12, 3);
    let space = FixedRank::new(m, n, r).unwrap();
    let mut g = rng(5);
    let x = random_point(m, n, r, &mut g);
    let idx: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| (i * 7 + j * 3) % 4 == 0)
        .collect();
    let vals = idx.iter().map(|&(i, j)| (i as f64 - j as f64) * 0.1).collect();
    let obs = ObservationSet::new(m, n, idx, vals).unwrap();
    let grad = space.riemannian_grad(&x, &mc_grad(&x, &obs));
    for _ in 0..10 {
        let xi = space.project_tangent(&x, &gaussian(m, n, &mut g));
        let h = 1e-5;
        let fp = mc_objective(&space.retract(&x, &xi.scaled(h)), &obs);
        let fm = mc_objective(&space.retract(&x, &xi.scaled(-h)), &obs);
        let fd = (fp - fm) / (2.0 * h);
        let exact = grad.inner(&xi);
        assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1e-8), "{fd} vs {exact}");
    }
    assert_eq!(
        space.riemannian_grad(&x, &DMatrix::zeros(m, n)).to_dense(&x).norm(),
        0.0
    );
}

#[test]
fn transport_lands_in_target_tangent_space() {
    let space = FixedRank::new(9, 7, 2).unwrap();
    let mut g = rng(6);
    let x = random_point(9, 7, 2, &mut g);
    let y = random_point(9, 7, 2, &mut g);
    let xi = space.project_tangent(&x, &gaussian(9, 7, &mut g));
    let moved = space.transport(&x, &y, &xi);
    let d = moved.to_dense(&y);
    assert!((space.project_tangent(&y, &d).to_dense(&y) - &d).norm() < 1e-12);
    assert!(dense_normal_part(&y.u, &y.v, &d).norm() < 1e-12);
    assert!(moved.gauge_violation(&y) < 1e-12);
    assert!((space.transport(&x, &x, &xi).to_dense(&x) - xi.to_dense(&x)).norm() < 1e-12);
}

#[test]
fn cone_examples() {
    // s = r: no rank-increase part
    let mut g = rng(7);
    let x = random_point(8, 6, 2, &mut g);
    let eta = gaussian(8, 6, &mut g);
    let c = project_cone(&x, &eta, 2).unwrap();
    assert!(c.xi.is_empty());
    let fixed = FixedRank::new(8, 6, 2).unwrap().project_tangent(&x, &eta).to_dense(&x);
    assert!((c.to_dense(&x) - fixed).norm() < 1e-12);

    // at zero the cone is the variety itself
    let zero = FactoredPoint::zero(2, 2);
    let c = project_cone(&zero, &diag(2, 2, &[3.0, 1.0]), 1).unwrap();
    assert!((c.to_dense(&zero) - diag(2, 2, &[3.0])).norm() < 1e-14);
    assert_eq!(c.smooth.to_dense(&zero).norm(), 0.0);

    let c = project_cone(&zero, &diag(2, 2, &[3.0, 1.0]), 2).unwrap();
    let moved = retract_variety(&zero, &c, 2).unwrap();
    assert!((moved.to_dense() - diag(2, 2, &[3.0, 1.0])).norm() < 1e-14);
}

#[test]
fn rank_increase_part_only_adds_energy() {
    let mut g = rng(8);
    for _ in 0..10 {
        let x = random_point(10, 9, 2, &mut g);
        let eg = gaussian(10, 9, &mut g);
        let cone = grad_variety(&x, &eg, 4).unwrap();
        let smooth = dense_tangent_projection(&x.u, &x.v, &eg);
        assert!(cone.inner(&cone) >= smooth.norm_squared() - 1e-12);
        assert!(cone.membership_violation(&x) < 1e-9);
        assert!(cone.xi.len() <= 2);
    }
    let x = random_point(5, 5, 2, &mut g);
    assert_eq!(
        grad_variety(&x, &DMatrix::zeros(5, 5), 3).unwrap().to_dense(&x).norm(),
        0.0
    );
}

#[test]
fn variety_lift_examples() {
    let mut g = rng(9);
    let x = random_point(7, 6, 2, &mut g);
    assert_eq!(lift_variety(&x, &x, 3).unwrap().to_dense(&x).norm(), 0.0);
    let zero = FactoredPoint::zero(7, 6);
    let y = random_point(7, 6, 3, &mut g);
    let lifted = lift_variety(&zero, &y, 2).unwrap().to_dense(&zero);
    assert!((lifted - dense_truncate(&y.to_dense(), 2)).norm() < 1e-10);
}

#[test]
fn variety_lift_then_retract_is_second_order() {
    let mut g = rng(10);
    let x = random_point(9, 8, 2, &mut g);
    let dir = random_low_rank(9, 8, 2, &mut g);
    let dir = dir.clone() / dir.norm();
    let err = |t: f64| {
        let y = FactoredPoint::from_dense(&(x.to_dense() + &dir * t), 3).unwrap();
        let back = retract_variety(&x, &lift_variety(&x, &y, 3).unwrap(), 3).unwrap();
        (back.to_dense() - y.to_dense()).norm()
    };
    let mut t = 0.05;
    for _ in 0..3 {
        let ratio = err(t) / err(t / 2.0);
        assert!(ratio >= 3.5, "t={t}: ratio {ratio}");
        t /= 2.0;
    }
}

#[test]
fn variety_rejects_degenerate_shapes() {
    assert!(LowRankVariety::new(0, 3, 1).is_err());
    assert!(FixedRank::new(3, 3, 4).is_err());
    assert_eq!(LowRankVariety::new(3, 5, 9).unwrap().r, 3);
    assert_eq!(FixedRank::new(20, 15, 4).unwrap().dimension(), (20 + 15 - 4) * 4);
}

#[test]
fn factored_point_validates_input() {
    let u = DMatrix::identity(3, 2);
    assert!(FactoredPoint::new(u.clone(), DVector::from_vec(vec![1.0, 2.0]), DMatrix::identity(3, 2)).is_err());
    assert!(FactoredPoint::new(u.clone(), DVector::from_vec(vec![2.0, -1.0]), DMatrix::identity(3, 2)).is_err());
    assert!(FactoredPoint::new(u * 2.0, DVector::from_vec(vec![2.0, 1.0]), DMatrix::identity(3, 2)).is_err());
    assert!(FactoredPoint::new(
        DMatrix::identity(3, 2),
        DVector::from_vec(vec![2.0, 1.0]),
        DMatrix::identity(3, 2)
    )
    .is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in any::<u64>(), r in 1usize..5) {
        let mut g = rng(seed);
        let space = FixedRank::new(11, 8, r).unwrap();
        let x = random_point(11, 8, r, &mut g);
        let z = gaussian(11, 8, &mut g);
        let p = space.project_tangent(&x, &z);
        let pd = p.to_dense(&x);
        prop_assert!((space.project_tangent(&x, &pd).to_dense(&x) - &pd).norm() <= 1e-10 * z.norm());
        prop_assert!(p.gauge_violation(&x) <= 1e-10 * z.norm());
        let other = space.project_tangent(&x, &gaussian(11, 8, &mut g)).to_dense(&x);
        prop_assert!((&z - &pd).dot(&other).abs() <= 1e-9 * z.norm() * other.norm());
    }

    #[test]
    fn retraction_at_zero_step_is_identity(seed in any::<u64>(), r in 1usize..4) {
        let mut g = rng(seed);
        let x = random_point(7, 9, r, &mut g);
        let space = FixedRank::new(7, 9, r).unwrap();
        let back = space.retract(&x, &FactoredTangent::zero(&x));
        prop_assert!((back.to_dense() - x.to_dense()).norm() <= 1e-12 * x.to_dense().norm());
        let variety = LowRankVariety::new(7, 9, r + 1).unwrap();
        let back = variety.retract(&x, &variety.zero_tangent(&x));
        prop_assert!((back.to_dense() - x.to_dense()).norm() <= 1e-12 * x.to_dense().norm());
    }

    #[test]
    fn cone_projection_is_in_the_cone(seed in any::<u64>(), s in 1usize..3, extra in 0usize..3) {
        let mut g = rng(seed);
        let x = random_point(9, 7, s, &mut g);
        let c = project_cone(&x, &gaussian(9, 7, &mut g), s + extra).unwrap();
        prop_assert!(c.membership_violation(&x) <= 1e-9);
        prop_assert!(c.xi.len() <= extra);
    }
}
