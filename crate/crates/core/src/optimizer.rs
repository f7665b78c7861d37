//! Explicit extremal test functions for `B₂`, with exact moment evaluation,
//! a grid BMO-norm evaluator and delivery curves.

use crate::bellman::{eval_b2_full, LeafCoords};
use crate::domain::{Params, Point2, Point3, SubdomainB2};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadCtx};
use crate::scalar::{cst, Real};
use serde::Serialize;

/// Shape of one segment of a test function.
///
/// A log segment takes the value `sign · ε · ln y` with
/// `y = (τ - pivot)/scale` (forward) or `y = (pivot - τ)/scale` (backward);
/// the plain ramps of the fan optimizers have `pivot = 0`, `scale = 1`, and
/// the reparametrized forms appear in the glued `F(0)` optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind<T: Real> {
    Const(T),
    Log {
        sign: i8,
        scale: T,
        pivot: T,
        backward: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T: Real> {
    pub t_start: T,
    pub t_end: T,
    pub kind: SegmentKind<T>,
}

/// Piecewise test function on `[0, l]` made of constant plateaus and
/// logarithmic ramps.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T: Real> {
    pub eps: T,
    pub total_length: T,
    pub segments: Vec<Segment<T>>,
}

impl<T: Real> TestFunction<T> {
    /// Build from contiguous pieces, dropping empty ones.
    pub fn new(eps: T, pieces: Vec<(T, T, SegmentKind<T>)>) -> Result<Self> {
        let mut segments = Vec::new();
        let mut cursor = T::zero();
        let tol = cst::<T>(1e-14);
        for (t0, t1, kind) in pieces {
            if t1 - t0 <= tol * (T::one() + t1.abs()) {
                continue;
            }
            if (t0 - cursor).abs() > cst::<T>(1e-9) * (T::one() + cursor.abs()) {
                return Err(Error::Internal(format!(
                    "segments not contiguous: expected start {cursor}, got {t0}"
                )));
            }
            segments.push(Segment {
                t_start: t0,
                t_end: t1,
                kind,
            });
            cursor = t1;
        }
        if segments.is_empty() || !(cursor > T::zero()) {
            return Err(Error::Internal("test function has no extent".into()));
        }
        Ok(Self {
            eps,
            total_length: cursor,
            segments,
        })
    }

    /// Flip the sign of every value (the mirror construction).
    pub fn negate(mut self) -> Self {
        for seg in &mut self.segments {
            seg.kind = match seg.kind {
                SegmentKind::Const(c) => SegmentKind::Const(-c),
                SegmentKind::Log {
                    sign,
                    scale,
                    pivot,
                    backward,
                } => SegmentKind::Log {
                    sign: -sign,
                    scale,
                    pivot,
                    backward,
                },
            };
        }
        self
    }

    /// Pointwise value (segments are half-open on the right).
    pub fn value_at(&self, tau: T) -> T {
        for seg in &self.segments {
            if tau < seg.t_end || seg.t_end == self.total_length {
                return seg_value(seg, self.eps, tau);
            }
        }
        T::zero()
    }

    /// Breakpoints, including 0 and `l`.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut ts = vec![T::zero()];
        for seg in &self.segments {
            ts.push(seg.t_end);
        }
        ts
    }

    /// Serializable description (the structured-text interface).
    pub fn document(&self) -> TestFunctionDoc {
        TestFunctionDoc {
            l: self.total_length.to_f64().unwrap_or(f64::NAN),
            eps: self.eps.to_f64().unwrap_or(f64::NAN),
            segments: self
                .segments
                .iter()
                .map(|seg| {
                    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
                    match seg.kind {
                        SegmentKind::Const(c) => SegmentDoc {
                            start: f(seg.t_start),
                            end: f(seg.t_end),
                            kind: "const",
                            value: Some(f(c)),
                            sign: None,
                            scale: None,
                            pivot: None,
                            reversed: None,
                        },
                        SegmentKind::Log {
                            sign,
                            scale,
                            pivot,
                            backward,
                        } => SegmentDoc {
                            start: f(seg.t_start),
                            end: f(seg.t_end),
                            kind: "log",
                            value: None,
                            sign: Some(sign),
                            scale: Some(f(scale)),
                            pivot: Some(f(pivot)),
                            reversed: Some(backward),
                        },
                    }
                })
                .collect(),
        }
    }
}

/// Serialized form of a test function.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionDoc {
    pub l: f64,
    pub eps: f64,
    pub segments: Vec<SegmentDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentDoc {
    pub start: f64,
    pub end: f64,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversed: Option<bool>,
}

fn seg_value<T: Real>(seg: &Segment<T>, eps: T, tau: T) -> T {
    match seg.kind {
        SegmentKind::Const(c) => c,
        SegmentKind::Log {
            sign,
            scale,
            pivot,
            backward,
        } => {
            let y = if backward {
                (pivot - tau) / scale
            } else {
                (tau - pivot) / scale
            };
            cst::<T>(sign as f64) * eps * y.ln()
        }
    }
}

/// y-interval of a log segment restricted to `[a, b] ⊆ [t_start, t_end]`,
/// together with the `dτ = scale · dy` factor.
fn log_y_range<T: Real>(seg: &Segment<T>, a: T, b: T) -> (T, T, T) {
    match seg.kind {
        SegmentKind::Log {
            scale,
            pivot,
            backward,
            ..
        } => {
            let (ya, yb) = if backward {
                ((pivot - b) / scale, (pivot - a) / scale)
            } else {
                ((a - pivot) / scale, (b - pivot) / scale)
            };
            (ya.max(T::zero()), yb, scale)
        }
        _ => unreachable!(),
    }
}

/// `∫ ln y dy = y ln y - y` (0 at y = 0 by continuity).
fn int_ln<T: Real>(y: T) -> T {
    if y == T::zero() {
        T::zero()
    } else {
        y * y.ln() - y
    }
}

/// `∫ (ln y)² dy = y ((ln y)² - 2 ln y + 2)`.
fn int_ln2<T: Real>(y: T) -> T {
    if y == T::zero() {
        T::zero()
    } else {
        let l = y.ln();
        y * (l * l - cst::<T>(2.0) * l + cst::<T>(2.0))
    }
}

/// Signed `∫_a^b φ dτ` over one segment (exact).
fn seg_signed<T: Real>(seg: &Segment<T>, eps: T, a: T, b: T) -> T {
    match seg.kind {
        SegmentKind::Const(c) => c * (b - a),
        SegmentKind::Log { sign, .. } => {
            let (ya, yb, scale) = log_y_range(seg, a, b);
            cst::<T>(sign as f64) * eps * scale * (int_ln(yb) - int_ln(ya))
        }
    }
}

/// `∫_a^b φ² dτ` over one segment (exact).
fn seg_square<T: Real>(seg: &Segment<T>, eps: T, a: T, b: T) -> T {
    match seg.kind {
        SegmentKind::Const(c) => c * c * (b - a),
        SegmentKind::Log { .. } => {
            let (ya, yb, scale) = log_y_range(seg, a, b);
            eps * eps * scale * (int_ln2(yb) - int_ln2(ya))
        }
    }
}

/// `∫ |ε ln y|^s dy` over `[ya, yb] ⊆ (0, 1]` via the substitution
/// `w = -ε ln y`, which turns the integrand into a decaying exponential.
fn abs_pow_below_one<T: Real>(ya: T, yb: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    let w_lo = -eps * yb.ln();
    let w_hi = if ya == T::zero() {
        T::infinity()
    } else {
        -eps * ya.ln()
    };
    let span = ((w_hi - w_lo) / eps).min(cst(60.0));
    let v = integrate(
        |t: T| (w_lo + eps * t).powf(s) * (-t).exp(),
        T::zero(),
        span,
        ctx,
    )?;
    Ok((-w_lo / eps).exp() * v)
}

/// `∫ (ε ln y)^s dy` over `[ya, yb] ⊆ [1, ∞)` via `w = ε ln y` (the weight
/// grows toward `yb`, so the integral is anchored there).
fn abs_pow_above_one<T: Real>(ya: T, yb: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    let w_lo = eps * ya.ln();
    let w_hi = eps * yb.ln();
    let span = ((w_hi - w_lo) / eps).min(cst(60.0));
    let v = integrate(
        |t: T| (w_hi - eps * t).powf(s).max(T::zero()) * (-t).exp(),
        T::zero(),
        span,
        ctx,
    )?;
    Ok((w_hi / eps).exp() * v)
}

/// `∫_a^b |φ|^s dτ` over one segment; exact for s ∈ {1, 2}, quadrature via
/// the exponential substitution otherwise.
fn seg_abs_pow<T: Real>(seg: &Segment<T>, eps: T, a: T, b: T, s: T, ctx: &QuadCtx<T>) -> Result<T> {
    let one = T::one();
    let two = cst::<T>(2.0);
    match seg.kind {
        SegmentKind::Const(c) => Ok(c.abs().powf(s) * (b - a)),
        SegmentKind::Log { .. } => {
            let (ya, yb, scale) = log_y_range(seg, a, b);
            // |ln| changes analytic form at y = 1
            let mut total = T::zero();
            let mut pieces: Vec<(T, T, bool)> = Vec::new();
            if yb <= one {
                pieces.push((ya, yb, true));
            } else if ya >= one {
                pieces.push((ya, yb, false));
            } else {
                pieces.push((ya, one, true));
                pieces.push((one, yb, false));
            }
            for (lo, hi, below) in pieces {
                if hi <= lo {
                    continue;
                }
                let part = if s == one {
                    let v = eps * (int_ln(hi) - int_ln(lo));
                    v.abs()
                } else if s == two {
                    eps * eps * (int_ln2(hi) - int_ln2(lo))
                } else if below {
                    abs_pow_below_one(lo, hi, s, eps, ctx)?
                } else {
                    abs_pow_above_one(lo, hi, s, eps, ctx)?
                };
                total = total + part;
            }
            Ok(total * scale)
        }
    }
}

/// Average `⟨|φ|^s⟩` over `[0, l]` (or the signed average `⟨φ⟩` for s = 1).
pub fn moment<T: Real>(phi: &TestFunction<T>, s: T, signed: bool, ctx: &QuadCtx<T>) -> Result<T> {
    if s < T::one() {
        return Err(Error::Domain(format!("moment requires s >= 1 (got {s})")));
    }
    if signed && s != T::one() {
        return Err(Error::Parameter(
            "signed moments are only defined for s = 1".into(),
        ));
    }
    let mut total = T::zero();
    for seg in &phi.segments {
        total = total
            + if signed {
                seg_signed(seg, phi.eps, seg.t_start, seg.t_end)
            } else {
                seg_abs_pow(seg, phi.eps, seg.t_start, seg.t_end, s, ctx)?
            };
    }
    Ok(total / phi.total_length)
}

/// Grid used by the BMO norm and the delivery curve: segment breakpoints
/// merged with an equispaced `n`-point mesh.
fn tau_grid<T: Real>(phi: &TestFunction<T>, n: usize) -> Vec<T> {
    let l = phi.total_length;
    let mut ts = phi.breakpoints();
    for i in 0..=n {
        ts.push(l * cst::<T>(i as f64) / cst::<T>(n as f64));
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup_by(|x, y| (*x - *y).abs() <= cst::<T>(1e-15) * (T::one() + l));
    ts
}

/// Prefix integrals of `φ` and `φ²` at the grid points.
fn prefix_sums<T: Real>(phi: &TestFunction<T>, ts: &[T]) -> (Vec<T>, Vec<T>) {
    let mut p1 = Vec::with_capacity(ts.len());
    let mut p2 = Vec::with_capacity(ts.len());
    let mut acc1 = T::zero();
    let mut acc2 = T::zero();
    let mut seg_idx = 0usize;
    p1.push(acc1);
    p2.push(acc2);
    for w in ts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // advance to the segment containing [a, b]
        while seg_idx + 1 < phi.segments.len() && phi.segments[seg_idx].t_end <= a {
            seg_idx += 1;
        }
        let seg = &phi.segments[seg_idx];
        acc1 = acc1 + seg_signed(seg, phi.eps, a, b);
        acc2 = acc2 + seg_square(seg, phi.eps, a, b);
        p1.push(acc1);
        p2.push(acc2);
    }
    (p1, p2)
}

/// Grid lower bound for the BMO norm
/// `sup_J (⟨φ²⟩_J - ⟨φ⟩_J²)^{1/2}`, with candidate subintervals running
/// between grid points (breakpoints always included).
pub fn bmo_norm<T: Real>(phi: &TestFunction<T>, n_grid: usize, _ctx: &QuadCtx<T>) -> Result<T> {
    if n_grid < 2 {
        return Err(Error::Parameter("bmo_norm requires n_grid >= 2".into()));
    }
    let ts = tau_grid(phi, n_grid);
    let (p1, p2) = prefix_sums(phi, &ts);
    let mut worst = T::zero();
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            let len = ts[j] - ts[i];
            if !(len > T::zero()) {
                continue;
            }
            let mean = (p1[j] - p1[i]) / len;
            let var = (p2[j] - p2[i]) / len - mean * mean;
            if var > worst {
                worst = var;
            }
        }
    }
    Ok(worst.max(T::zero()).sqrt())
}

/// The delivery curve `τ ↦ (⟨φ⟩_{[0,τ]}, ⟨φ²⟩_{[0,τ]})` sampled on the grid.
pub fn delivery_curve<T: Real>(phi: &TestFunction<T>, n: usize) -> Result<Vec<Point2<T>>> {
    if n < 2 {
        return Err(Error::Parameter("delivery_curve requires n >= 2".into()));
    }
    let ts = tau_grid(phi, n);
    let (p1, p2) = prefix_sums(phi, &ts);
    let mut pts = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        if !(t > T::zero()) {
            continue;
        }
        pts.push(Point2::new(p1[i] / t, p2[i] / t));
    }
    Ok(pts)
}

fn expect_label<T: Real>(
    x: &Point3<T>,
    prm: &Params<T>,
    want: &[SubdomainB2],
) -> Result<crate::bellman::EvalB2<T>> {
    let full = eval_b2_full(x, prm)?;
    if !want.contains(&full.label) {
        return Err(Error::Domain(format!(
            "optimizer precondition: point is in {}, expected one of {:?}",
            full.label.as_str(),
            want.iter().map(|l| l.as_str()).collect::<Vec<_>>()
        )));
    }
    Ok(full)
}

fn skeleton_constant<T: Real>(t: T) -> Result<TestFunction<T>> {
    TestFunction::new(T::one(), vec![(T::zero(), T::one(), SegmentKind::Const(t))])
}

/// Optimizer for a point of `Ξ_L±` (four pieces; mirror by negation).
pub fn optimizer_xi_l<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    let eps = prm.eps;
    let a = x.x1.abs();
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return skeleton_constant(x.x1);
    }
    let full = expect_label(x, prm, &[SubdomainB2::XiLPlus, SubdomainB2::XiRMinus])?;
    let (v, xi) = match full.leaf {
        LeafCoords::FanLeft { v, xi, .. } => (v, xi),
        other => {
            return Err(Error::Internal(format!(
                "expected a left-fan leaf, got {other:?}"
            )))
        }
    };
    let dm = a - v;
    let l = eps / dm * (-v / eps).exp();
    let (tau1, tau2) = if xi.is_infinite() {
        (T::zero(), T::zero())
    } else {
        let e = (-(xi - eps) / eps).exp();
        (cst::<T>(0.5) * e, e)
    };
    let tau3 = (-v / eps).exp();
    let mut phi = TestFunction::new(
        eps,
        vec![
            (T::zero(), tau1, SegmentKind::Const(xi + eps)),
            (tau1, tau2, SegmentKind::Const(xi - eps)),
            (
                tau2,
                tau3,
                SegmentKind::Log {
                    sign: -1,
                    scale: T::one(),
                    pivot: T::zero(),
                    backward: false,
                },
            ),
            (tau3, l, SegmentKind::Const(v)),
        ],
    )?;
    if x.x1 < T::zero() {
        phi = phi.negate();
    }
    Ok(phi)
}

/// Optimizer for a point of `Ξ_R±`: four pieces for ξ ≥ ε, five pieces with
/// a zero plateau and a negative block for 0 ≤ ξ ≤ ε.
pub fn optimizer_xi_r<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    let eps = prm.eps;
    let a = x.x1.abs();
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return skeleton_constant(x.x1);
    }
    let full = expect_label(x, prm, &[SubdomainB2::XiRPlus, SubdomainB2::XiLMinus])?;
    let (v, xi) = match full.leaf {
        LeafCoords::FanRight { v, xi, .. } => (v, xi),
        other => {
            return Err(Error::Internal(format!(
                "expected a right-fan leaf, got {other:?}"
            )))
        }
    };
    let dm = v - a;
    let l = eps / dm * (v / eps).exp();
    let tau_ramp_end = (v / eps).exp();
    let e_xi = ((xi + eps) / eps).exp();
    let ramp = SegmentKind::Log {
        sign: 1,
        scale: T::one(),
        pivot: T::zero(),
        backward: false,
    };
    let mut phi = if xi >= eps {
        TestFunction::new(
            eps,
            vec![
                (
                    T::zero(),
                    cst::<T>(0.5) * e_xi,
                    SegmentKind::Const(xi - eps),
                ),
                (cst::<T>(0.5) * e_xi, e_xi, SegmentKind::Const(xi + eps)),
                (e_xi, tau_ramp_end, ramp),
                (tau_ramp_end, l, SegmentKind::Const(v)),
            ],
        )?
    } else {
        let denom = cst::<T>(2.0) * (xi + eps) * (xi + eps);
        let alpha_m = (eps * eps - eps * xi) / denom;
        let alpha_p = (eps * eps + eps * xi + cst::<T>(2.0) * xi * xi) / denom;
        TestFunction::new(
            eps,
            vec![
                (T::zero(), alpha_m * e_xi, SegmentKind::Const(-(xi + eps))),
                (
                    alpha_m * e_xi,
                    (T::one() - alpha_p) * e_xi,
                    SegmentKind::Const(T::zero()),
                ),
                (
                    (T::one() - alpha_p) * e_xi,
                    e_xi,
                    SegmentKind::Const(xi + eps),
                ),
                (e_xi, tau_ramp_end, ramp),
                (tau_ramp_end, l, SegmentKind::Const(v)),
            ],
        )?
    };
    if x.x1 < T::zero() {
        phi = phi.negate();
    }
    Ok(phi)
}

/// Optimizer for a chord point: the two-valued function on `[0, b-a]`.
pub fn optimizer_chord<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    let a1 = x.x1.abs();
    if x.x2 - a1 * a1 <= prm.tol_geom(x.x2) {
        return skeleton_constant(x.x1);
    }
    let full = expect_label(x, prm, &[SubdomainB2::XiChPlus, SubdomainB2::XiChMinus])?;
    let (ca, cb) = match full.leaf {
        LeafCoords::Chord { a, b } => (a, b),
        other => {
            return Err(Error::Internal(format!(
                "expected a chord leaf, got {other:?}"
            )))
        }
    };
    if cb - ca <= cst::<T>(1e-12) {
        return skeleton_constant(x.x1);
    }
    let split = a1 - ca;
    let mut phi = TestFunction::new(
        prm.eps,
        vec![
            (T::zero(), split, SegmentKind::Const(cb)),
            (split, cb - ca, SegmentKind::Const(ca)),
        ],
    )?;
    if x.x1 < T::zero() {
        phi = phi.negate();
    }
    Ok(phi)
}

/// Optimizer for a point of `R`: the three-valued function on `[0, 1]`.
pub fn optimizer_r<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    if x.x2 <= prm.tol_geom(x.x2) {
        // the origin: the zero function
        return skeleton_constant(T::zero());
    }
    let full = expect_label(x, prm, &[SubdomainB2::R])?;
    let v = match full.leaf {
        LeafCoords::RLeaf { v } => v,
        other => {
            return Err(Error::Internal(format!(
                "expected an R leaf, got {other:?}"
            )))
        }
    };
    let two = cst::<T>(2.0);
    let alpha_m = (x.x2 - v * x.x1) / (two * v * v);
    let alpha_p = (x.x2 + v * x.x1) / (two * v * v);
    TestFunction::new(
        prm.eps,
        vec![
            (T::zero(), alpha_m, SegmentKind::Const(-v)),
            (alpha_m, T::one() - alpha_p, SegmentKind::Const(T::zero())),
            (T::one() - alpha_p, T::one(), SegmentKind::Const(v)),
        ],
    )
}

/// Optimizer for a point of `F(0)`: the two fan-endpoint optimizers glued
/// around a zero plateau in monotone arrangement.
pub fn optimizer_f0<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    let eps = prm.eps;
    if x.x2 <= prm.tol_geom(x.x2) {
        return skeleton_constant(T::zero());
    }
    let full = expect_label(x, prm, &[SubdomainB2::F0])?;
    let xi = match full.leaf {
        LeafCoords::F0Leaf { xi, .. } => xi,
        other => {
            return Err(Error::Internal(format!(
                "expected an F(0) leaf, got {other:?}"
            )))
        }
    };
    let four = cst::<T>(4.0);
    let two = cst::<T>(2.0);
    let e2 = eps * eps;
    let alpha_m = (x.x2 - two * eps * x.x1) / (four * e2);
    let alpha_p = (x.x2 + two * eps * x.x1) / (four * e2);
    let alpha_0 = T::one() - x.x2 / (two * e2);
    // breakpoints of the unit-length fan-endpoint optimizer (v = 0, l = 1)
    let (tau1, tau2) = if xi.is_infinite() {
        (T::zero(), T::zero())
    } else {
        let e = (-(xi - eps) / eps).exp();
        (cst::<T>(0.5) * e, e)
    };
    let one = T::one();
    TestFunction::new(
        eps,
        vec![
            (T::zero(), alpha_m * tau1, SegmentKind::Const(-(xi + eps))),
            (
                alpha_m * tau1,
                alpha_m * tau2,
                SegmentKind::Const(-(xi - eps)),
            ),
            (
                alpha_m * tau2,
                alpha_m,
                SegmentKind::Log {
                    sign: 1,
                    scale: alpha_m,
                    pivot: T::zero(),
                    backward: false,
                },
            ),
            (alpha_m, alpha_m + alpha_0, SegmentKind::Const(T::zero())),
            (
                one - alpha_p,
                one - alpha_p * tau2,
                SegmentKind::Log {
                    sign: -1,
                    scale: alpha_p,
                    pivot: one,
                    backward: true,
                },
            ),
            (
                one - alpha_p * tau2,
                one - alpha_p * tau1,
                SegmentKind::Const(xi - eps),
            ),
            (one - alpha_p * tau1, one, SegmentKind::Const(xi + eps)),
        ],
    )
}

/// Construct the optimizer appropriate for the subdomain of `x`.
pub fn optimizer_for<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<TestFunction<T>> {
    let a = x.x1.abs();
    if x.x2 - a * a <= prm.tol_geom(x.x2) {
        return skeleton_constant(x.x1);
    }
    use SubdomainB2::*;
    match crate::domain::classify_b2(x, prm)? {
        XiLPlus | XiRMinus => optimizer_xi_l(x, prm),
        XiRPlus | XiLMinus => optimizer_xi_r(x, prm),
        XiChPlus | XiChMinus => optimizer_chord(x, prm),
        R => optimizer_r(x, prm),
        F0 => optimizer_f0(x, prm),
    }
}

/// The four moments `(⟨φ⟩, ⟨φ²⟩, ⟨|φ|^p⟩, ⟨|φ|^r⟩)`.
pub fn moments<T: Real>(phi: &TestFunction<T>, prm: &Params<T>) -> Result<(T, T, T, T)> {
    let m1 = moment(phi, T::one(), true, &prm.ctx)?;
    let m2 = moment(phi, cst(2.0), false, &prm.ctx)?;
    let mp = moment(phi, prm.p, false, &prm.ctx)?;
    let mr = moment(phi, prm.r, false, &prm.ctx)?;
    Ok((m1, m2, mp, mr))
}
