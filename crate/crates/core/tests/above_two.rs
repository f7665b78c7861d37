//! Coverage of the p > 2 regime (reversed ladder orientation): optimizers,
//! moments and candidate ordering.

use bmo_bellman::bellman::{eval_b1, eval_b2, fan_left_point, fan_right_point};
use bmo_bellman::domain::{classify_b2, Params, Point3, SubdomainB2};
use bmo_bellman::gamma::gamma;
use bmo_bellman::optimizer::{bmo_norm, moments, optimizer_for};
use bmo_bellman::special::wl_scaled;

#[test]
fn optimizers_work_above_two() {
    let pr = Params::with_defaults(2.5, 4.0, 1.0).unwrap();
    let f0_point = {
        let xi = 2.0;
        let x2 = 0.9;
        let m0 = gamma(pr.p + 1.0);
        let x3 = (m0 + wl_scaled(1.0, xi, pr.p, 1.0, &pr.ctx).unwrap()) * x2 / 2.0;
        Point3::new(0.15, x2, x3)
    };
    assert_eq!(classify_b2(&f0_point, &pr).unwrap(), SubdomainB2::F0);
    let pts = [
        fan_left_point(1.4, 2.0, 0.5, &pr).unwrap(),
        fan_right_point(2.5, 1.8, 0.5, &pr).unwrap(),
        fan_right_point(2.0, 0.6, 0.4, &pr).unwrap(),
        Point3::new(1.5, 2.5, 0.5 * (2f64.powf(2.5) + 1.0)),
        Point3::new(0.3, 0.8, 1.1f64.powf(0.5) * 0.8),
        f0_point,
    ];
    for x in &pts {
        let phi = optimizer_for(x, &pr).unwrap();
        let (m1, m2, mp, mr) = moments(&phi, &pr).unwrap();
        let b = eval_b2(x, &pr).unwrap();
        for (got, want) in [(m1, x.x1), (m2, x.x2), (mp, x.x3), (mr, b)] {
            assert!(
                (got - want).abs() < 1e-7 * (1.0 + want.abs()),
                "{got} vs {want} at {x:?}"
            );
        }
        let n = bmo_norm(&phi, 1500, &pr.ctx).unwrap();
        assert!(n <= 1.0 + 1e-4, "bmo {n} at {x:?}");
    }
}

#[test]
fn candidate_ordering_above_two() {
    // p, r > 2 with r > p gives (r-2)(r-p) > 0: B1 is the max
    let pr = Params::with_defaults(2.5, 4.0, 1.0).unwrap();
    for &(x1, x2, f) in &[(0.4, 0.9, 0.3), (1.2, 2.2, 0.6), (2.0, 4.3, 0.5)] {
        let (lo, hi) =
            bmo_bellman::x3_bounds(bmo_bellman::domain::Point2::new(x1, x2), &pr).unwrap();
        let x = Point3::new(x1, x2, lo + f * (hi - lo));
        let b1 = eval_b1(&x, &pr).unwrap();
        let b2 = eval_b2(&x, &pr).unwrap();
        assert!(b1 >= b2 - 1e-9, "B1 {b1} < B2 {b2} at {x:?}");
    }
}
