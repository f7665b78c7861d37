//! Evaluation of the Bellman candidates `B₁` and `B₂`: per-leaf coordinate
//! solvers, the max/min dispatcher, and analytic first derivatives.

use crate::domain::{
    check_in_domain, classify_b1, classify_b2, geometry, ladder, Params, Point2, Point3,
    SubdomainB1, SubdomainB2,
};
use crate::error::{Error, Result};
use crate::quad::QuadCtx;
use crate::scalar::{cst, Real};
use crate::special::{
    cap_a, invert_monotone, k_s, k_s_deriv, m_s, m_s_deriv, wl_scaled, wr_scaled,
};

/// Foliation leaf through a point, with its internal coordinates.
///
/// For fan leaves `h` is the endpoint offset linked to `ξ` by
/// `h = e^{±u/ε} w(ξ; p, ε)`; `ξ = +∞` marks the degenerate outermost leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafCoords<T: Real> {
    FanLeft { u: T, v: T, xi: T, h: T },
    FanRight { u: T, v: T, xi: T, h: T },
    Chord { a: T, b: T },
    RLeaf { v: T },
    F0Leaf { xi: T, h: T },
    B1Trapezoid { v: T },
    B1Triangle { v: T },
}

/// Value tolerance used when clamping leaf solutions to bracket endpoints.
fn tol_val<T: Real>(scale: T) -> T {
    cst::<T>(1e-9) * (T::one() + scale.abs())
}

/// Solve `g(ξ) = 0` on `[lo, hi]`, clamping to an endpoint when its residual
/// is below `tol` (boundary leaves), erroring on an un-bracketed sign.
fn solve_leaf<T: Real, F: Fn(T) -> Result<T>>(
    g: F,
    lo: T,
    hi: T,
    tol: T,
    ctx: &QuadCtx<T>,
) -> Result<T> {
    let glo = g(lo)?;
    let ghi = g(hi)?;
    if glo * ghi <= T::zero() {
        return invert_monotone(g, lo, hi, ctx);
    }
    if glo.abs() <= ghi.abs() && glo.abs() <= tol {
        return Ok(lo);
    }
    if ghi.abs() <= tol {
        return Ok(hi);
    }
    Err(Error::Internal(format!(
        "leaf residual does not bracket a root: g({lo}) = {glo}, g({hi}) = {ghi}"
    )))
}

/// Solve a fan equation on `[xi0, ∞)`: expand the bracket geometrically and
/// treat "no sign change up to the cap" as the `ξ = +∞` leaf.
fn solve_fan_unbounded<T: Real, F: Fn(T) -> Result<T>>(
    g: F,
    xi0: T,
    eps: T,
    tol: T,
    ctx: &QuadCtx<T>,
) -> Result<T> {
    let cap = xi0 + cst::<T>(60.0) * eps;
    let g0 = g(xi0)?;
    if g0 == T::zero() {
        return Ok(xi0);
    }
    let mut a = xi0;
    let mut fa = g0;
    let mut step = eps;
    loop {
        let b = (a + step).min(cap);
        let fb = g(b)?;
        if fa * fb <= T::zero() {
            return invert_monotone(&g, a, b, ctx);
        }
        if b >= cap {
            // residual never changed sign: either the outermost leaf or a
            // point on the wrong side of the fan by more than the tolerance
            let gcap = fb;
            if gcap.abs() <= tol || g0.abs() <= tol {
                return Ok(if g0.abs() < gcap.abs() {
                    xi0
                } else {
                    T::infinity()
                });
            }
            return Ok(T::infinity());
        }
        a = b;
        fa = fb;
        step = step + step;
    }
}

/// Linear combination `((x1-a) b^s + (b-x1) a^s) / (b-a)` along a chord.
fn chord_value<T: Real>(a: T, b: T, x1: T, s: T) -> T {
    if b - a <= T::zero() {
        return a.powf(s);
    }
    ((x1 - a) * b.powf(s) + (b - x1) * a.powf(s)) / (b - a)
}

/// Leaf of the `B₂` foliation through `x` (mirrored to `x₁ ≥ 0`).
pub fn leaf_coords_b2<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<LeafCoords<T>> {
    let label = classify_b2(x, prm)?;
    leaf_for_label(x, label, prm)
}

fn leaf_for_label<T: Real>(
    x: &Point3<T>,
    label: SubdomainB2,
    prm: &Params<T>,
) -> Result<LeafCoords<T>> {
    let eps = prm.eps;
    let p = prm.p;
    let ctx = &prm.ctx;
    let a = x.x1.abs();
    let x2 = x.x2;
    let x3 = x.x3;
    let g = geometry(Point2::new(a, x2), eps)?;
    let tol = tol_val(x3);

    match label.mirror_to_plus() {
        SubdomainB2::XiLPlus => {
            let dm = g.delta_minus;
            let v = a - dm;
            let u = v + eps;
            if dm <= prm.tol_geom(x2) {
                // degenerate skeleton leaf
                return Ok(LeafCoords::Chord { a, b: a });
            }
            let mp = m_s(p, v, eps, ctx)?;
            let resid = |xi: T| -> Result<T> {
                Ok(v.powf(p) + (mp + wl_scaled(u, xi, p, eps, ctx)? / eps) * dm - x3)
            };
            let xi = solve_fan_unbounded(resid, u, eps, tol, ctx)?;
            let h = if xi.is_infinite() {
                T::zero()
            } else {
                wl_scaled(u, xi, p, eps, ctx)?
            };
            Ok(LeafCoords::FanLeft { u, v, xi, h })
        }
        SubdomainB2::XiRPlus => {
            let dm = g.delta_minus;
            let v = a + dm;
            let u = (a - g.d).max(T::zero());
            if dm <= prm.tol_geom(x2) {
                return Ok(LeafCoords::Chord { a, b: a });
            }
            let kp = k_s(p, v, eps, ctx)?;
            let resid = |xi: T| -> Result<T> {
                Ok(v.powf(p) - (kp - wr_scaled(u, xi, p, eps, ctx)? / eps) * dm - x3)
            };
            let xi = solve_leaf(resid, T::zero(), u, tol, ctx)?;
            let h = wr_scaled(u, xi, p, eps, ctx)?;
            Ok(LeafCoords::FanRight { u, v, xi, h })
        }
        SubdomainB2::XiChPlus => {
            if x2 - a * a <= prm.tol_geom(x2) {
                return Ok(LeafCoords::Chord { a, b: a });
            }
            let lo = (a - g.delta_plus).max(T::zero());
            let hi = a - g.delta_minus;
            let b_of = |ca: T| (x2 - ca * a) / (a - ca);
            let resid = |ca: T| -> Result<T> { Ok(chord_value(ca, b_of(ca), a, p) - x3) };
            let ca = solve_leaf(resid, lo, hi, tol, ctx)?;
            Ok(LeafCoords::Chord { a: ca, b: b_of(ca) })
        }
        SubdomainB2::R => {
            if x2 <= prm.tol_geom(x2) {
                return Ok(LeafCoords::RLeaf { v: T::zero() });
            }
            let two = cst::<T>(2.0);
            let v = (x3 / x2).powf(T::one() / (p - two));
            Ok(LeafCoords::RLeaf { v })
        }
        SubdomainB2::F0 => {
            let two = cst::<T>(2.0);
            let m0 = m_s(p, T::zero(), eps, ctx)?;
            let resid = |xi: T| -> Result<T> {
                Ok((m0 + wl_scaled(eps, xi, p, eps, ctx)? / eps) * x2 / (two * eps) - x3)
            };
            let xi = solve_fan_unbounded(resid, eps, eps, tol, ctx)?;
            let h = if xi.is_infinite() {
                T::zero()
            } else {
                wl_scaled(eps, xi, p, eps, ctx)?
            };
            Ok(LeafCoords::F0Leaf { xi, h })
        }
        _ => unreachable!("mirror_to_plus removes minus labels"),
    }
}

impl SubdomainB2 {
    fn mirror_to_plus(self) -> Self {
        use SubdomainB2::*;
        match self {
            XiRMinus => XiLPlus,
            XiLMinus => XiRPlus,
            XiChMinus => XiChPlus,
            other => other,
        }
    }
}

/// Evaluation record: the candidate value together with its classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalB2<T: Real> {
    pub value: T,
    pub label: SubdomainB2,
    pub leaf: LeafCoords<T>,
}

/// The candidate `B₂` at `x`, with label and leaf coordinates.
pub fn eval_b2_full<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<EvalB2<T>> {
    let label = classify_b2(x, prm)?;
    let leaf = leaf_for_label(x, label, prm)?;
    let value = b2_from_leaf(x, &leaf, prm)?;
    Ok(EvalB2 { value, label, leaf })
}

/// The candidate `B₂` at `x` (even in `x₁` by construction).
pub fn eval_b2<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<T> {
    Ok(eval_b2_full(x, prm)?.value)
}

pub(crate) fn b2_from_leaf<T: Real>(
    x: &Point3<T>,
    leaf: &LeafCoords<T>,
    prm: &Params<T>,
) -> Result<T> {
    let eps = prm.eps;
    let r = prm.r;
    let ctx = &prm.ctx;
    let a = x.x1.abs();
    let two = cst::<T>(2.0);
    match *leaf {
        LeafCoords::FanLeft { u, v, xi, .. } => {
            let dm = a - v;
            let wl = if xi.is_infinite() {
                T::zero()
            } else {
                wl_scaled(u, xi, r, eps, ctx)?
            };
            Ok(v.powf(r) + (m_s(r, v, eps, ctx)? + wl / eps) * dm)
        }
        LeafCoords::FanRight { u, v, xi, .. } => {
            let dm = v - a;
            let wr = wr_scaled(u, xi, r, eps, ctx)?;
            Ok(v.powf(r) - (k_s(r, v, eps, ctx)? - wr / eps) * dm)
        }
        LeafCoords::Chord { a: ca, b } => Ok(chord_value(ca, b, a, r)),
        LeafCoords::RLeaf { v } => {
            if v <= T::zero() {
                Ok(T::zero())
            } else {
                Ok(v.powf(r - two) * x.x2)
            }
        }
        LeafCoords::F0Leaf { xi, .. } => {
            let wl = if xi.is_infinite() {
                T::zero()
            } else {
                wl_scaled(eps, xi, r, eps, ctx)?
            };
            Ok((m_s(r, T::zero(), eps, ctx)? + wl / eps) * x.x2 / (two * eps))
        }
        LeafCoords::B1Trapezoid { .. } | LeafCoords::B1Triangle { .. } => {
            Err(Error::Internal("B1 leaf passed to the B2 evaluator".into()))
        }
    }
}

/// The fan profile `w₁(ξ; s, ε, x₁, x₂)` of the `B₁` foliation: trapezoid
/// branch below ε, triangle branch above.
pub fn w1<T: Real>(xi: T, s: T, eps: T, x1: T, x2: T, ctx: &QuadCtx<T>) -> Result<T> {
    let two = cst::<T>(2.0);
    let four = cst::<T>(4.0);
    if xi < eps {
        let m = m_s(s, xi, eps, ctx)?;
        Ok(xi.powf(s) + m / (two * (xi + eps)) * (x2 - xi * xi))
    } else {
        let m = m_s(s, xi, eps, ctx)?;
        let k = k_s(s, xi, eps, ctx)?;
        Ok(xi.powf(s)
            + (m - k) / (four * eps) * (x2 - two * xi * x1 + xi * xi)
            + (m + k) / two * (x1 - xi))
    }
}

/// Leaf parameter of the `B₁` foliation through `x`.
pub fn leaf_coords_b1<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<LeafCoords<T>> {
    let eps = prm.eps;
    let p = prm.p;
    let ctx = &prm.ctx;
    let a = x.x1.abs();
    let tol = tol_val(x.x3);
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return Ok(if a < eps {
            LeafCoords::B1Trapezoid { v: a }
        } else {
            LeafCoords::B1Triangle { v: a }
        });
    }
    let label = classify_b1(x, prm)?;
    let g = geometry(Point2::new(a, x.x2), eps)?;
    match label {
        SubdomainB1::Xi0 => {
            let lo = g.u_plus.max(T::zero());
            let resid = |v: T| -> Result<T> { Ok(w1(v, p, eps, a, x.x2, ctx)? - x.x3) };
            let v = solve_leaf(resid, lo, eps, tol, ctx)?;
            Ok(LeafCoords::B1Trapezoid { v })
        }
        _ => {
            let lo = g.u_plus.max(eps);
            let hi = g.u_minus.max(eps);
            let resid = |v: T| -> Result<T> { Ok(w1(v, p, eps, a, x.x2, ctx)? - x.x3) };
            let v = solve_leaf(resid, lo, hi, tol, ctx)?;
            Ok(LeafCoords::B1Triangle { v })
        }
    }
}

/// The candidate `B₁` at `x`: `w₁` re-evaluated at the leaf parameter with
/// exponent `r`.
pub fn eval_b1<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<T> {
    check_in_domain(x, prm)?;
    let a = x.x1.abs();
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return Ok(a.powf(prm.r));
    }
    let leaf = leaf_coords_b1(x, prm)?;
    let v = match leaf {
        LeafCoords::B1Trapezoid { v } | LeafCoords::B1Triangle { v } => v,
        _ => unreachable!(),
    };
    w1(v, prm.r, prm.eps, a, x.x2, &prm.ctx)
}

/// Which extremal Bellman function is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Max,
    Min,
}

/// The Bellman function `B±` at `x`: dispatches to `B₁`/`B₂` by the sign of
/// `(r-2)(r-p)`.
pub fn eval_bellman<T: Real>(x: &Point3<T>, prm: &Params<T>, which: Which) -> Result<T> {
    let two = cst::<T>(2.0);
    let disc = (prm.r - two) * (prm.r - prm.p);
    if disc == T::zero() {
        return Err(Error::Parameter(
            "degenerate parameters: (r-2)(r-p) = 0".into(),
        ));
    }
    let b1_is_max = disc > T::zero();
    match (which, b1_is_max) {
        (Which::Max, true) | (Which::Min, false) => eval_b1(x, prm),
        (Which::Max, false) | (Which::Min, true) => eval_b2(x, prm),
    }
}

/// Gradient of `B₂` in the `(x₂, x₃)` directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradB2<T: Real> {
    pub d_dx2: T,
    pub d_dx3: T,
}

/// Analytic `(∂B₂/∂x₂, ∂B₂/∂x₃)`; falls back to centered differences within
/// `10·tol` of a separating surface, where the closed forms degenerate.
pub fn grad_b2<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<GradB2<T>> {
    let eps = prm.eps;
    let p = prm.p;
    let r = prm.r;
    let ctx = &prm.ctx;
    let two = cst::<T>(2.0);

    if near_separating_surface(x, prm)? {
        return grad_b2_fd(x, prm);
    }

    let full = eval_b2_full(x, prm)?;
    match full.leaf {
        LeafCoords::FanLeft { u, v, xi, .. } if !xi.is_infinite() => {
            let ratio = cap_a(xi, eps, r)? / cap_a(xi, eps, p)?;
            let wlr = wl_scaled(u, xi, r, eps, ctx)?;
            let wlp = wl_scaled(u, xi, p, eps, ctx)?;
            let mrp = m_s_deriv(r, v, eps, 1, ctx)?;
            let mpp = m_s_deriv(p, v, eps, 1, ctx)?;
            let d_dx2 = ((wlr - wlp * ratio) / eps + eps * (mrp - mpp * ratio)) / (two * eps);
            Ok(GradB2 {
                d_dx2,
                d_dx3: ratio,
            })
        }
        LeafCoords::F0Leaf { xi, .. } if !xi.is_infinite() => {
            // B is 1-homogeneous in (x₂, x₃) at fixed leaf
            let ratio = cap_a(xi, eps, r)? / cap_a(xi, eps, p)?;
            let d_dx2 = (full.value - x.x3 * ratio) / x.x2;
            Ok(GradB2 {
                d_dx2,
                d_dx3: ratio,
            })
        }
        LeafCoords::FanRight { u, v, xi, .. } => {
            let ratio = if xi >= eps {
                cap_a(xi, eps, r)? / cap_a(xi, eps, p)?
            } else {
                (r - two) / (p - two) * (xi + eps).powf(r - p)
            };
            let wrr = wr_scaled(u, xi, r, eps, ctx)?;
            let wrp = wr_scaled(u, xi, p, eps, ctx)?;
            let krp = k_s_deriv(r, v, eps, 1, ctx)?;
            let kpp = k_s_deriv(p, v, eps, 1, ctx)?;
            let d_dx2 = ((eps * krp + wrr / eps) - (eps * kpp + wrp / eps) * ratio) / (two * eps);
            Ok(GradB2 {
                d_dx2,
                d_dx3: ratio,
            })
        }
        LeafCoords::Chord { a: ca, b } if b > ca => {
            let half = cst::<T>(0.5);
            let alpha = half * (b + ca);
            let beta = half * (b - ca);
            let ratio = cap_a(alpha, beta, r)? / cap_a(alpha, beta, p)?;
            let dslope =
                |s: T| half * s * (b.powf(s - T::one()) - ca.powf(s - T::one())) / (b - ca);
            let d_dx2 = dslope(r) - dslope(p) * ratio;
            Ok(GradB2 {
                d_dx2,
                d_dx3: ratio,
            })
        }
        LeafCoords::RLeaf { v } if v > T::zero() => {
            let q = x.x3 / x.x2;
            let d_dx3 = (r - two) / (p - two) * q.powf((r - p) / (p - two));
            let d_dx2 = (p - r) / (p - two) * q.powf((r - two) / (p - two));
            Ok(GradB2 { d_dx2, d_dx3 })
        }
        _ => grad_b2_fd(x, prm),
    }
}

/// True when `x₃` is within `10 · tol` of one of the ladder cuts over `x`.
fn near_separating_surface<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<bool> {
    let a = x.x1.abs();
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return Ok(true);
    }
    let ten = cst::<T>(10.0);
    let tol = ten * tol_val(x.x3);
    let (_, cuts) = ladder(a, x.x2, prm)?;
    Ok(cuts.iter().any(|c| (x.x3 - *c).abs() < tol))
}

/// Finite differences of `B₂` in `(x₂, x₃)`: centered where both stepped
/// points stay admissible, one-sided against a domain boundary.
pub fn grad_b2_fd<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<GradB2<T>> {
    let h = cst::<T>(1e-6) * (T::one() + x.x3.abs());
    let diff = |plus: Point3<T>, minus: Point3<T>| -> Result<T> {
        let ok_p = check_in_domain(&plus, prm).is_ok();
        let ok_m = check_in_domain(&minus, prm).is_ok();
        match (ok_p, ok_m) {
            (true, true) => Ok((eval_b2(&plus, prm)? - eval_b2(&minus, prm)?) / (h + h)),
            (true, false) => Ok((eval_b2(&plus, prm)? - eval_b2(x, prm)?) / h),
            (false, true) => Ok((eval_b2(x, prm)? - eval_b2(&minus, prm)?) / h),
            (false, false) => Err(Error::Domain(
                "no admissible finite-difference step at this point".into(),
            )),
        }
    };
    let d_dx3 = diff(
        Point3::new(x.x1, x.x2, x.x3 + h),
        Point3::new(x.x1, x.x2, x.x3 - h),
    )?;
    let d_dx2 = diff(
        Point3::new(x.x1, x.x2 + h, x.x3),
        Point3::new(x.x1, x.x2 - h, x.x3),
    )?;
    Ok(GradB2 { d_dx2, d_dx3 })
}

/// Point on the left-fan extremal of `F_L(u)` at parameter `ξ`, at fraction
/// `t ∈ [0, 1]` from the skeleton endpoint (forward construction).
pub fn fan_left_point<T: Real>(u: T, xi: T, t: T, prm: &Params<T>) -> Result<Point3<T>> {
    let eps = prm.eps;
    let v = u - eps;
    let h = wl_scaled(u, xi, prm.p, eps, &prm.ctx)?;
    let x1 = v + t * eps;
    let x2 = v * v + t * (u * u + eps * eps - v * v);
    let x3 = v.powf(prm.p) + t * (eps * m_s(prm.p, v, eps, &prm.ctx)? + h);
    Ok(Point3::new(x1, x2, x3))
}

/// Point on the right-fan extremal of `F_R(u)` at parameter `ξ`, at fraction
/// `t ∈ [0, 1]` from the skeleton endpoint.
pub fn fan_right_point<T: Real>(u: T, xi: T, t: T, prm: &Params<T>) -> Result<Point3<T>> {
    let eps = prm.eps;
    let v = u + eps;
    let h = wr_scaled(u, xi, prm.p, eps, &prm.ctx)?;
    let x1 = v - t * eps;
    let x2 = v * v + t * (u * u + eps * eps - v * v);
    let x3 = v.powf(prm.p) + t * (h - eps * k_s(prm.p, v, eps, &prm.ctx)?);
    Ok(Point3::new(x1, x2, x3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::x3_bounds;

    fn prm(p: f64, r: f64, eps: f64) -> Params<f64> {
        Params::with_defaults(p, r, eps).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn skeleton_boundary_condition() {
        for &(p, r) in &[(1.3, 1.7), (1.5, 3.0), (2.5, 4.0)] {
            let pr = prm(p, r, 1.0);
            for i in 0..200 {
                let t = -3.0 + 6.0 * (i as f64) / 199.0;
                let x = Point3::new(t, t * t, t.abs().powf(p));
                let b2 = eval_b2(&x, &pr).unwrap();
                assert!((b2 - t.abs().powf(r)).abs() < 1e-8, "B2 at t={t}: {b2}");
                let b1 = eval_b1(&x, &pr).unwrap();
                assert!((b1 - t.abs().powf(r)).abs() < 1e-8, "B1 at t={t}: {b1}");
            }
        }
    }

    #[test]
    fn r_leaf_closed_form() {
        // x = (0, 1, 2^{-1/2}) at (p, r) = (1.5, 1.8) sits on the R side:
        // B₂ = x₃^{(r-2)/(p-2)} x₂^{(p-r)/(p-2)} = 2^{-0.2}
        let pr = prm(1.5, 1.8, 1.0);
        let x = Point3::new(0.0, 1.0, 2f64.powf(-0.5));
        let b = eval_b2(&x, &pr).unwrap();
        assert!(close(b, 2f64.powf(-0.2), 1e-10), "{b}");
    }

    #[test]
    fn chord_closed_form_and_round_trip() {
        let pr = prm(1.3, 1.7, 1.0);
        // chord [U(1), U(2)] at x1 = 1.5: x2 = 2.5, x3 = (2^p + 1)/2
        let x = Point3::new(1.5, 2.5, 0.5 * (2f64.powf(1.3) + 1.0));
        let full = eval_b2_full(&x, &pr).unwrap();
        assert_eq!(full.label, SubdomainB2::XiChPlus);
        match full.leaf {
            LeafCoords::Chord { a, b } => {
                assert!(close(a, 1.0, 1e-8) && close(b, 2.0, 1e-8), "({a}, {b})");
            }
            other => panic!("expected chord leaf, got {other:?}"),
        }
        assert!(close(full.value, 0.5 * (2f64.powf(1.7) + 1.0), 1e-9));
    }

    #[test]
    fn fan_left_forward_inverse() {
        let pr = prm(1.3, 1.7, 1.0);
        for &u in &[1.3, 1.6, 2.5] {
            for &xi in &[1.2 * u, 2.0 * u, u + 4.0] {
                for &t in &[0.2, 0.6, 0.95] {
                    let x = fan_left_point(u, xi, t, &pr).unwrap();
                    let full = eval_b2_full(&x, &pr).unwrap();
                    match full.leaf {
                        LeafCoords::FanLeft { u: uu, xi: xx, .. } => {
                            assert!(close(uu, u, 1e-9), "u: {uu} vs {u}");
                            assert!((xx - xi).abs() < 1e-7, "xi: {xx} vs {xi} (u={u}, t={t})");
                        }
                        other => panic!("expected FanLeft at u={u} xi={xi} t={t}, got {other:?}"),
                    }
                    // value must be linear along the extremal: B(x(t)) is the
                    // convex combination of the endpoint values
                    let x0 = fan_left_point(u, xi, 0.0, &pr).unwrap();
                    let x1p = fan_left_point(u, xi, 1.0, &pr).unwrap();
                    let b0 = eval_b2(&x0, &pr).unwrap();
                    let b1 = eval_b2(&x1p, &pr).unwrap();
                    assert!(
                        close(full.value, (1.0 - t) * b0 + t * b1, 1e-7),
                        "linearity at u={u} xi={xi} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn fan_right_forward_inverse_both_branches() {
        let pr = prm(1.3, 1.7, 1.0);
        // ξ ≥ ε branch needs u ≥ ξ ≥ ε; ξ < ε pairs with any u ≥ ξ
        for &(u, xi) in &[(2.0, 1.5), (3.0, 2.9), (1.5, 0.4), (0.8, 0.3), (2.0, 0.9)] {
            for &t in &[0.25, 0.7] {
                let x = fan_right_point(u, xi, t, &pr).unwrap();
                let full = eval_b2_full(&x, &pr).unwrap();
                match full.leaf {
                    LeafCoords::FanRight { u: uu, xi: xx, .. } => {
                        assert!(close(uu, u, 1e-9), "u: {uu} vs {u}");
                        assert!((xx - xi).abs() < 1e-7, "xi: {xx} vs {xi} (u={u}, t={t})");
                    }
                    other => panic!("expected FanRight at u={u} xi={xi} t={t}, got {other:?}"),
                }
            }
        }
    }

    #[test]
    fn f0_leaf_solved() {
        let pr = prm(1.3, 1.7, 1.0);
        // forward-construct a point of F(0) from its leaf equation
        let xi0 = 2.3;
        let x2 = 0.9;
        let m0 = m_s(1.3, 0.0, 1.0, &pr.ctx).unwrap();
        let x3 = (m0 + wl_scaled(1.0, xi0, 1.3, 1.0, &pr.ctx).unwrap()) * x2 / 2.0;
        let x = Point3::new(0.2, x2, x3);
        let full = eval_b2_full(&x, &pr).unwrap();
        assert_eq!(full.label, SubdomainB2::F0);
        match full.leaf {
            LeafCoords::F0Leaf { xi, .. } => assert!((xi - xi0).abs() < 1e-8, "{xi}"),
            other => panic!("expected F0 leaf, got {other:?}"),
        }
        // B does not depend on x1 inside F(0)
        let x_shift = Point3::new(-0.35, x2, x3);
        let b_shift = eval_b2(&x_shift, &pr).unwrap();
        assert!(close(full.value, b_shift, 1e-10));
    }

    #[test]
    fn mirror_symmetry_exact() {
        let pr = prm(1.3, 1.7, 1.0);
        for &(x1, x2) in &[(0.8, 0.9), (1.7, 3.1), (0.3, 0.4)] {
            let (lo, hi) = x3_bounds(Point2::new(x1, x2), &pr).unwrap();
            for &f in &[0.2, 0.5, 0.8] {
                let x3 = lo + f * (hi - lo);
                let x = Point3::new(x1, x2, x3);
                let b = eval_b2(&x, &pr).unwrap();
                let bm = eval_b2(&x.mirror(), &pr).unwrap();
                assert_eq!(b, bm);
            }
        }
    }

    #[test]
    fn b1_trapezoid_leaf_formulas() {
        // on the trapezoid leaf v: x₃ = v^p + m_p(v)(x₂-v²)/(2(v+ε)) and
        // B₁ has the same expression with exponent r
        let pr = prm(1.5, 1.8, 1.0);
        for &v in &[0.2, 0.5, 0.9] {
            for &x1 in &[0.0, 0.3] {
                let x2 = v * v + 0.8 * 1.0; // inside the strip above the leaf foot
                let mp = m_s(1.5, v, 1.0, &pr.ctx).unwrap();
                let x3 = v.powf(1.5) + mp / (2.0 * (v + 1.0)) * (x2 - v * v);
                let x = Point3::new(x1, x2, x3);
                if check_in_domain(&x, &pr).is_err() {
                    continue;
                }
                if classify_b1(&x, &pr).unwrap() != SubdomainB1::Xi0 {
                    continue;
                }
                let mr = m_s(1.8, v, 1.0, &pr.ctx).unwrap();
                let expect = v.powf(1.8) + mr / (2.0 * (v + 1.0)) * (x2 - v * v);
                let b = eval_b1(&x, &pr).unwrap();
                assert!(close(b, expect, 1e-8), "v={v} x1={x1}: {b} vs {expect}");
            }
        }
    }

    #[test]
    fn b1_triangle_forward_inverse() {
        let pr = prm(1.5, 3.0, 1.0);
        for &v in &[1.2, 2.0, 2.8] {
            for &(x1off, x2off) in &[(0.1, 0.3), (-0.4, 0.6), (0.3, 0.9)] {
                let x1: f64 = v + x1off;
                let x2 = x1 * x1 + x2off;
                let x3 = w1(v, 1.5, 1.0, x1.abs(), x2, &pr.ctx).unwrap();
                let x = Point3::new(x1, x2, x3);
                if check_in_domain(&x, &pr).is_err() {
                    continue;
                }
                let expect = w1(v, 3.0, 1.0, x1.abs(), x2, &pr.ctx).unwrap();
                let b = eval_b1(&x, &pr).unwrap();
                assert!(
                    close(b, expect, 1e-9),
                    "v={v} x=({x1}, {x2}): {b} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn dispatch_sign_rule() {
        // (1.3, 1.7): (r-2)(r-p) < 0 so max = B₂; (1.5, 3): positive so max = B₁
        let pr_a = prm(1.3, 1.7, 1.0);
        let (lo, hi) = x3_bounds(Point2::new(0.4, 0.9), &pr_a).unwrap();
        let x = Point3::new(0.4, 0.9, 0.5 * (lo + hi));
        assert_eq!(
            eval_bellman(&x, &pr_a, Which::Max).unwrap(),
            eval_b2(&x, &pr_a).unwrap()
        );
        assert_eq!(
            eval_bellman(&x, &pr_a, Which::Min).unwrap(),
            eval_b1(&x, &pr_a).unwrap()
        );
        let pr_b = prm(1.5, 3.0, 1.0);
        let (lo, hi) = x3_bounds(Point2::new(0.4, 0.9), &pr_b).unwrap();
        let x = Point3::new(0.4, 0.9, 0.5 * (lo + hi));
        assert_eq!(
            eval_bellman(&x, &pr_b, Which::Max).unwrap(),
            eval_b1(&x, &pr_b).unwrap()
        );
        // degenerate r = 2 rejected
        let pr_c = prm(1.5, 2.0, 1.0);
        assert!(eval_bellman(&x, &pr_c, Which::Max).is_err());
    }

    #[test]
    fn grad_on_r_leaf_closed_form() {
        let pr = prm(1.5, 1.8, 1.0);
        let x = Point3::new(0.0, 0.9, 0.85);
        assert_eq!(classify_b2(&x, &pr).unwrap(), SubdomainB2::R);
        let g = grad_b2(&x, &pr).unwrap();
        let q = x.x3 / x.x2;
        let expect3 = (1.8 - 2.0) / (1.5 - 2.0) * q.powf((1.8 - 1.5) / (1.5 - 2.0));
        let expect2 = (1.5 - 1.8) / (1.5 - 2.0) * q.powf((1.8 - 2.0) / (1.5 - 2.0));
        assert!(close(g.d_dx3, expect3, 1e-10));
        assert!(close(g.d_dx2, expect2, 1e-10));
    }

    #[test]
    fn grad_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let pr = prm(1.3, 1.7, 1.0);
        let mut checked = 0;
        while checked < 100 {
            let x1: f64 = rng.gen_range(-2.5..2.5);
            let x2 = x1 * x1 + rng.gen_range(0.05..0.95);
            let (lo, hi) = x3_bounds(Point2::new(x1, x2), &pr).unwrap();
            let x3 = lo + (hi - lo) * rng.gen_range(0.05..0.95);
            let x = Point3::new(x1, x2, x3);
            if near_separating_surface(&x, &pr).unwrap() {
                continue;
            }
            let g = grad_b2(&x, &pr).unwrap();
            let fd = grad_b2_fd(&x, &pr).unwrap();
            assert!(
                (g.d_dx3 - fd.d_dx3).abs() <= 1e-5 * (1.0 + g.d_dx3.abs()),
                "d3 at {x:?}: {} vs {}",
                g.d_dx3,
                fd.d_dx3
            );
            assert!(
                (g.d_dx2 - fd.d_dx2).abs() <= 1e-5 * (1.0 + g.d_dx2.abs()),
                "d2 at {x:?}: {} vs {}",
                g.d_dx2,
                fd.d_dx2
            );
            checked += 1;
        }
    }

    #[test]
    fn grad_f0_leaf_homogeneity() {
        // along a fixed-ξ leaf of F(0) the value is linear in x₂, so
        // ∂B/∂x₂ + (x₃/x₂) ∂B/∂x₃ = B/x₂
        let pr = prm(1.3, 1.7, 1.0);
        let x2 = 0.8;
        let m0 = m_s(1.3, 0.0, 1.0, &pr.ctx).unwrap();
        let x3 = (m0 + wl_scaled(1.0, 2.0, 1.3, 1.0, &pr.ctx).unwrap()) * x2 / 2.0;
        let x = Point3::new(0.1, x2, x3);
        let full = eval_b2_full(&x, &pr).unwrap();
        assert_eq!(full.label, SubdomainB2::F0);
        let g = grad_b2(&x, &pr).unwrap();
        let lhs = g.d_dx2 + x3 / x2 * g.d_dx3;
        assert!(
            close(lhs, full.value / x2, 1e-8),
            "{lhs} vs {}",
            full.value / x2
        );
    }

    #[test]
    fn leaf_linearity_midpoints() {
        // sample two points on one leaf for each type; B is affine on leaves
        let pr = prm(1.3, 1.7, 1.0);
        let pairs: Vec<(Point3<f64>, Point3<f64>)> = vec![
            (
                fan_left_point(1.5, 2.1, 0.3, &pr).unwrap(),
                fan_left_point(1.5, 2.1, 0.9, &pr).unwrap(),
            ),
            (
                fan_right_point(2.0, 1.2, 0.2, &pr).unwrap(),
                fan_right_point(2.0, 1.2, 0.8, &pr).unwrap(),
            ),
        ];
        for (y, z) in pairs {
            let mid = Point3::new(
                0.5 * (y.x1 + z.x1),
                0.5 * (y.x2 + z.x2),
                0.5 * (y.x3 + z.x3),
            );
            let by = eval_b2(&y, &pr).unwrap();
            let bz = eval_b2(&z, &pr).unwrap();
            let bm = eval_b2(&mid, &pr).unwrap();
            assert!(
                (bm - 0.5 * (by + bz)).abs() < 1e-9 * (1.0 + bm.abs()),
                "defect {}",
                bm - 0.5 * (by + bz)
            );
        }
    }
}
