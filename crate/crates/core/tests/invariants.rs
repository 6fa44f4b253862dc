use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use roughbill::billiard::{collide, stream_rng, tangent_involution};
use roughbill::contact::{random_body, verify_strict};
use roughbill::lie::{se_exp, wedge};
use roughbill::mechanics::free_flight;
use roughbill::{AlgebraVector, Ball, ContactConfiguration, ContactGeometry, EuclideanElement, SkewMatrix};

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, n).prop_map(DVector::from_vec)
}

fn algebra(n: usize) -> impl Strategy<Value = AlgebraVector> {
    (prop::collection::vec(-3.0..3.0f64, n * (n - 1) / 2), vector(n)).prop_map(move |(c, z)| {
        AlgebraVector::new(SkewMatrix::from_coords(n, &c).unwrap(), z).unwrap()
    })
}

/// Dimension, ball radius, velocity, contact direction and rough directions.
fn impact() -> impl Strategy<Value = (Ball, AlgebraVector, DVector<f64>, DMatrix<f64>)> {
    (2usize..=4).prop_flat_map(|n| {
        (0.1..2.0f64, algebra(n), vector(n), prop::collection::vec(vector(n), 0..n)).prop_filter_map(
            "degenerate contact direction",
            move |(r, xi, dir, raw)| {
                if dir.norm() < 1e-3 {
                    return None;
                }
                let nu = dir.normalize();
                let proj = DMatrix::identity(n, n) - &nu * nu.transpose();
                let dirs: Vec<DVector<f64>> =
                    raw.iter().map(|d| &proj * d).filter(|d: &DVector<f64>| d.norm() > 1e-3).collect();
                let t = tangent_involution(&dirs, n).ok()?;
                Some((Ball::uniform(r, n), xi, nu * r, t))
            },
        )
    })
}

fn energy(ball: &Ball, xi: &AlgebraVector) -> f64 {
    ball.energy(xi)
}

proptest! {
    #[test]
    fn collision_conserves_energy((ball, xi, b, t) in impact()) {
        let out = collide(&xi, &b, &t, &ball).unwrap();
        let e = energy(&ball, &xi);
        prop_assert!((energy(&ball, &out) - e).abs() <= 1e-12 * e.max(1e-12));
    }

    #[test]
    fn collision_is_an_involution((ball, xi, b, t) in impact()) {
        let twice = collide(&collide(&xi, &b, &t, &ball).unwrap(), &b, &t, &ball).unwrap();
        prop_assert!((&twice + &xi.scale(-1.0)).max_abs() < 1e-11);
    }

    #[test]
    fn collision_reverses_normal_velocity((ball, xi, b, t) in impact()) {
        let out = collide(&xi, &b, &t, &ball).unwrap();
        let nu = b.normalize();
        let before = xi.angular.apply(&b) + &xi.linear;
        let after = out.angular.apply(&b) + &out.linear;
        prop_assert!((before.dot(&nu) + after.dot(&nu)).abs() < 1e-11);
    }

    #[test]
    fn strict_maps_pass_verification(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = stream_rng(seed, 0);
        let b1 = random_body(n, &mut rng);
        let b2 = random_body(n, &mut rng);
        let q = ContactConfiguration::random(n, &mut rng).unwrap();
        let geom = ContactGeometry::new(q, [&b1, &b2]).unwrap();
        let k = (seed % n as u64) as usize;
        let map = geom.random_map(k, &mut rng).unwrap();
        let report = verify_strict(&map, &geom, [&b1, &b2], 3, &mut rng).unwrap();
        prop_assert!(report.passes(), "{report:?}");
    }

    #[test]
    fn one_parameter_subgroup(xi in algebra(3), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let a = se_exp(&xi.angular, &xi.linear, s).unwrap();
        let b = se_exp(&xi.angular, &xi.linear, t).unwrap();
        let ab = se_exp(&xi.angular, &xi.linear, s + t).unwrap();
        prop_assert!(a.compose(&b).distance(&ab) < 1e-11);
    }

    #[test]
    fn wedge_is_antisymmetric(a in vector(4), b in vector(4)) {
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        prop_assert!((ab.as_matrix() + ba.as_matrix()).amax() == 0.0);
        prop_assert!(wedge(&a, &a).unwrap().as_matrix().amax() == 0.0);
    }

    #[test]
    fn free_flight_keeps_energy(xi in algebra(3), tau in 0.0..5.0f64) {
        let ball = Ball::uniform(0.5, 3);
        let (g, after) = free_flight(&EuclideanElement::identity(3), &xi, tau).unwrap();
        let e = energy(&ball, &xi);
        prop_assert!((energy(&ball, &after) - e).abs() <= 1e-12 * e.max(1e-12));
        prop_assert!(g.orthogonality_defect() < 1e-12);
    }
}
