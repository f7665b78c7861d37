//! ε-scaling law: rescaling a test function by ε maps the problem at BMO
//! bound ε to the problem at bound 1, so
//! `B_{p,r;ε}(x₁, x₂, x₃) = ε^r · B_{p,r;1}(x₁/ε, x₂/ε², x₃/ε^p)`.
//! This exercises every ε in the evaluation pipeline, which the ε = 1 runs
//! cannot see.

use bmo_bellman::bellman::{eval_b1, eval_b2};
use bmo_bellman::domain::{Params, Point2, Point3};
use bmo_bellman::optimizer::{bmo_norm, moments, optimizer_for};
use bmo_bellman::x3_bounds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn bellman_scaling_law() {
    let (p, r) = (1.3, 1.7);
    let base = Params::with_defaults(p, r, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
    for &eps in &[0.25, 0.7, 3.0] {
        let scaled = Params::with_defaults(p, r, eps).unwrap();
        for _ in 0..40 {
            let y1: f64 = rng.gen_range(-2.5..2.5);
            let y2 = y1 * y1 + rng.gen_range(0.05..0.95);
            let (lo, hi) = x3_bounds(Point2::new(y1, y2), &base).unwrap();
            let y3 = lo + (hi - lo) * rng.gen_range(0.05..0.95);

            let x = Point3::new(eps * y1, eps * eps * y2, eps.powf(p) * y3);
            let y = Point3::new(y1, y2, y3);

            let b2_eps = eval_b2(&x, &scaled).unwrap();
            let b2_one = eval_b2(&y, &base).unwrap();
            assert!(
                close(b2_eps, eps.powf(r) * b2_one, 1e-9),
                "B2 scaling at eps={eps}, y={y:?}: {b2_eps} vs {}",
                eps.powf(r) * b2_one
            );

            let b1_eps = eval_b1(&x, &scaled).unwrap();
            let b1_one = eval_b1(&y, &base).unwrap();
            assert!(
                close(b1_eps, eps.powf(r) * b1_one, 1e-9),
                "B1 scaling at eps={eps}, y={y:?}: {b1_eps} vs {}",
                eps.powf(r) * b1_one
            );
        }
    }
}

#[test]
fn optimizer_scaling_law() {
    // optimizers built at general ε reproduce their target moments and keep
    // the BMO norm within ε
    let (p, r) = (1.3, 1.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0e5);
    for &eps in &[0.25, 3.0] {
        let prm = Params::with_defaults(p, r, eps).unwrap();
        for _ in 0..25 {
            let y1: f64 = rng.gen_range(-2.2..2.2);
            let x1 = eps * y1;
            let x2 = x1 * x1 + eps * eps * rng.gen_range(0.05..0.95);
            let (lo, hi) = x3_bounds(Point2::new(x1, x2), &prm).unwrap();
            let x3 = lo + (hi - lo) * rng.gen_range(0.05..0.95);
            let x = Point3::new(x1, x2, x3);
            let phi = optimizer_for(&x, &prm).unwrap();
            let (m1, m2, mp, mr) = moments(&phi, &prm).unwrap();
            let b = eval_b2(&x, &prm).unwrap();
            for (got, want) in [(m1, x.x1), (m2, x.x2), (mp, x.x3), (mr, b)] {
                assert!(
                    close(got, want, 1e-7),
                    "moment at eps={eps}, x={x:?}: {got} vs {want}"
                );
            }
            let norm = bmo_norm(&phi, 1000, &prm.ctx).unwrap();
            assert!(norm <= eps * (1.0 + 1e-4), "bmo {norm} > eps {eps} at {x:?}");
        }
    }
}
