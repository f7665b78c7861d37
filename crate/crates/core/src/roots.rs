//! Bracketing root-finders for monotone functions.

use crate::error::{Error, Result};
use crate::quad::QuadCtx;
use crate::scalar::{cst, Real};

/// Root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` have opposite
/// (weak) signs. Bisection refined by secant steps; stops when the bracket
/// width drops below `ctx.abs_tol` (absolute, on the abscissa) or the residual
/// underflows.
pub fn solve_bracketed<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    lo: T,
    hi: T,
    ctx: &QuadCtx<T>,
) -> Result<T> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa * fb > T::zero() {
        return Err(Error::Numerical {
            what: "root bracketing (no sign change)",
            residual: fa.abs().min(fb.abs()).to_f64().unwrap_or(f64::NAN),
        });
    }

    let half = cst::<T>(0.5);
    let iters = ctx.max_subdiv.max(200);
    for k in 0..iters {
        if (b - a).abs() <= ctx.abs_tol {
            break;
        }
        // secant candidate every other step, accepted only comfortably inside
        let mid = half * (a + b);
        let mut x = mid;
        if k % 2 == 1 && fb != fa {
            let sec = b - fb * (b - a) / (fb - fa);
            let margin = cst::<T>(0.01) * (b - a).abs();
            if (sec - a).abs() > margin && (b - sec).abs() > margin {
                x = sec;
            }
        }
        let fx = f(x)?;
        if fx == T::zero() {
            return Ok(x);
        }
        if fa * fx < T::zero() {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
    }
    // return the endpoint with the smaller residual
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Expand `[x0, x0 + step]` by doubling `step` until `f` changes sign, then
/// solve. `cap` bounds the right endpoint.
pub fn expand_and_solve<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    x0: T,
    step0: T,
    cap: T,
    ctx: &QuadCtx<T>,
) -> Result<T> {
    let f0 = f(x0)?;
    if f0 == T::zero() {
        return Ok(x0);
    }
    let mut step = step0;
    let mut a = x0;
    let mut fa = f0;
    loop {
        let b = (a + step).min(cap);
        let fb = f(b)?;
        if fa * fb <= T::zero() {
            return solve_bracketed(&f, a, b, ctx);
        }
        if b >= cap {
            return Err(Error::Numerical {
                what: "bracket expansion (no sign change up to cap)",
                residual: fb.to_f64().unwrap_or(f64::NAN),
            });
        }
        a = b;
        fa = fb;
        step = step + step;
    }
}
