//! The auxiliary special functions: exponentially weighted power averages
//! `m_s`, `k_s`, their derivatives, the sign kernel `A(α, β, s)` and the
//! tangent-fan profile functions `w_L`, `w_R` with their monotone inverses.

use crate::error::{Error, Result};
use crate::gamma::gamma_upper_scaled;
use crate::quad::{integrate, QuadCtx};
use crate::roots::{expand_and_solve, solve_bracketed};
use crate::scalar::{cst, Real};

/// Exponential tail cutoff: e^{-60} is far below every tolerance in use.
const TAIL: f64 = 60.0;

/// Direct/stable switch point for the `w` brackets, in units of ε.
const BRACKET_SWITCH: f64 = 6.0;

fn check_s<T: Real>(s: T) -> Result<()> {
    if s < T::one() {
        return Err(Error::Domain(format!("exponent s must be >= 1 (got {s})")));
    }
    Ok(())
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero()) {
        return Err(Error::Domain(format!("eps must be > 0 (got {eps})")));
    }
    Ok(())
}

/// `m_s(u) = (s/ε) ∫_u^∞ e^{(u-t)/ε} t^{s-1} dt`, u ≥ 0.
///
/// Evaluated through the upper incomplete gamma reduction
/// `s e^{u/ε} ε^{s-1} Γ(s, u/ε)` in scaled form.
pub fn m_s<T: Real>(s: T, u: T, eps: T, _ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if u < T::zero() {
        return Err(Error::Domain(format!("m_s requires u >= 0 (got {u})")));
    }
    Ok(s * eps.powf(s - T::one()) * gamma_upper_scaled(s, u / eps)?)
}

/// `k_s(u) = (s/ε) ∫_ε^u e^{(t-u)/ε} t^{s-1} dt`, u ≥ ε.
pub fn k_s<T: Real>(s: T, u: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if u < eps {
        return Err(Error::Domain(format!(
            "k_s requires u >= eps (got u = {u}, eps = {eps})"
        )));
    }
    // τ = (u - t)/ε turns the integral into s ∫ e^{-τ} (u - ετ)^{s-1} dτ
    let span = ((u - eps) / eps).min(cst(TAIL));
    let one = T::one();
    let v = integrate(
        |tau: T| (-tau).exp() * (u - eps * tau).powf(s - one),
        T::zero(),
        span,
        ctx,
    )?;
    Ok(s * v)
}

/// First or second derivative of `m_s`.
///
/// Order 1 uses the algebraic identity `-ε m' + m = s u^{s-1}`; order 2 uses
/// the integral form `m'' = s(s-1)(s-2)/ε ∫_u^∞ e^{(u-t)/ε} t^{s-3} dt`.
pub fn m_s_deriv<T: Real>(s: T, u: T, eps: T, order: u8, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    let one = T::one();
    match order {
        1 => {
            let m = m_s(s, u, eps, ctx)?;
            Ok((m - s * u.powf(s - one)) / eps)
        }
        2 => {
            let two = cst::<T>(2.0);
            if u <= T::zero() && s <= two {
                return Err(Error::Domain("m_s'' diverges at u = 0 for s <= 2".into()));
            }
            let three = cst::<T>(3.0);
            let span = cst::<T>(TAIL);
            let v = integrate(
                |tau: T| (-tau).exp() * (u + eps * tau).powf(s - three),
                T::zero(),
                span,
                ctx,
            )?;
            Ok(s * (s - one) * (s - two) * v)
        }
        _ => Err(Error::Parameter(format!(
            "derivative order must be 1 or 2 (got {order})"
        ))),
    }
}

/// First or second derivative of `k_s` (identities `ε k' + k = s u^{s-1}` and
/// the integral form of `k''`).
pub fn k_s_deriv<T: Real>(s: T, u: T, eps: T, order: u8, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if u < eps {
        return Err(Error::Domain(format!(
            "k_s requires u >= eps (got u = {u}, eps = {eps})"
        )));
    }
    let one = T::one();
    match order {
        1 => {
            let k = k_s(s, u, eps, ctx)?;
            Ok((s * u.powf(s - one) - k) / eps)
        }
        2 => {
            let two = cst::<T>(2.0);
            let three = cst::<T>(3.0);
            let span = ((u - eps) / eps).min(cst(TAIL));
            let v = integrate(
                |tau: T| (-tau).exp() * (u - eps * tau).powf(s - three),
                T::zero(),
                span,
                ctx,
            )?;
            Ok(
                s * (s - two) * eps.powf(s - three) * ((eps - u) / eps).exp()
                    + s * (s - one) * (s - two) * v,
            )
        }
        _ => Err(Error::Parameter(format!(
            "derivative order must be 1 or 2 (got {order})"
        ))),
    }
}

/// `A(α, β, s) = 2((α-β)^s - (α+β)^s + sβ(α+β)^{s-1} + sβ(α-β)^{s-1})`.
///
/// Carries the sign of `s - 2`; equals
/// `s(s-1)(s-2) ∫_{-β}^{β} (β² - λ²)(λ + α)^{s-3} dλ`.
pub fn cap_a<T: Real>(alpha: T, beta: T, s: T) -> Result<T> {
    if !(beta > T::zero()) {
        return Err(Error::Domain(format!(
            "cap_a requires beta > 0 (got {beta})"
        )));
    }
    if alpha < beta {
        return Err(Error::Domain(format!(
            "cap_a requires alpha >= beta (got alpha = {alpha}, beta = {beta})"
        )));
    }
    let one = T::one();
    let two = cst::<T>(2.0);
    let d = alpha - beta;
    let p = alpha + beta;
    Ok(two * (d.powf(s) - p.powf(s) + s * beta * p.powf(s - one) + s * beta * d.powf(s - one)))
}

/// `∫_{-ε}^{ε} (ε ∓ μ)² (μ + ξ)^{s-3} dμ`; the minus sign pairs with `w_L`,
/// the plus sign with `w_R`.
fn j_kernel<T: Real>(xi: T, s: T, eps: T, minus: bool, ctx: &QuadCtx<T>) -> Result<T> {
    let three = cst::<T>(3.0);
    integrate(
        |mu: T| {
            let w = if minus { eps - mu } else { eps + mu };
            w * w * (mu + xi).powf(s - three)
        },
        -eps,
        eps,
        ctx,
    )
}

/// `e^{ξ/ε} w_L(ξ; s, ε)`: the polynomially bounded part of `w_L`.
///
/// Direct formula near ξ = ε; for large ξ the identity
/// `w_L + e^{-ξ/ε} ε³ m_s''(ξ-ε) = ¼ s(s-1)(s-2) e^{-ξ/ε} ∫ (ε-μ)²(μ+ξ)^{s-3} dμ`
/// avoids the catastrophic cancellation of the direct form.
pub fn wl_bracket<T: Real>(xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    if xi < eps {
        return Err(Error::Domain(format!(
            "w_L requires xi >= eps (got xi = {xi}, eps = {eps})"
        )));
    }
    let one = T::one();
    let two = cst::<T>(2.0);
    let half = cst::<T>(0.5);
    if xi <= cst::<T>(BRACKET_SWITCH) * eps {
        let m = m_s(s, xi - eps, eps, ctx)?;
        Ok(half * ((xi + eps).powf(s) - (xi - eps).powf(s)) - eps * m)
    } else {
        let j = j_kernel(xi, s, eps, true, ctx)?;
        let mpp = m_s_deriv(s, xi - eps, eps, 2, ctx)?;
        Ok(cst::<T>(0.25) * s * (s - one) * (s - two) * j - eps.powi(3) * mpp)
    }
}

/// `e^{-ξ/ε} w_R(ξ; s, ε)` with the same direct/stable split.
pub fn wr_bracket<T: Real>(xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    if xi < T::zero() {
        return Err(Error::Domain(format!("w_R requires xi >= 0 (got {xi})")));
    }
    let one = T::one();
    let two = cst::<T>(2.0);
    let half = cst::<T>(0.5);
    if xi <= eps {
        let k = k_s(s, xi + eps, eps, ctx)?;
        Ok(eps * (k - two * xi * (xi + eps).powf(s - two)))
    } else if xi <= cst::<T>(BRACKET_SWITCH) * eps {
        let k = k_s(s, xi + eps, eps, ctx)?;
        Ok(half * ((xi - eps).powf(s) - (xi + eps).powf(s)) + eps * k)
    } else {
        let j = j_kernel(xi, s, eps, false, ctx)?;
        let kpp = k_s_deriv(s, xi + eps, eps, 2, ctx)?;
        Ok(eps.powi(3) * kpp - cst::<T>(0.25) * s * (s - one) * (s - two) * j)
    }
}

/// `w_L(ξ; s, ε) = e^{-ξ/ε} [½((ξ+ε)^s - (ξ-ε)^s) - ε m_s(ξ-ε)]`, ξ ∈ [ε, +∞].
///
/// `ξ = +∞` is a legal input and maps to 0.
pub fn w_left<T: Real>(xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if xi == T::infinity() {
        return Ok(T::zero());
    }
    Ok((-xi / eps).exp() * wl_bracket(xi, s, eps, ctx)?)
}

/// `w_L'(ξ; s, ε) = (1/4ε) e^{-ξ/ε} A(ξ, ε, s)`; sign equals sign(s-2).
pub fn w_left_deriv<T: Real>(xi: T, s: T, eps: T) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if xi == T::infinity() {
        return Ok(T::zero());
    }
    Ok(cst::<T>(0.25) / eps * (-xi / eps).exp() * cap_a(xi, eps, s)?)
}

/// `w_R(ξ; s, ε)`, ξ ≥ 0, with the branch change at ξ = ε.
pub fn w_right<T: Real>(xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    Ok((xi / eps).exp() * wr_bracket(xi, s, eps, ctx)?)
}

/// `w_R'(ξ; s, ε)`; sign equals sign(s-2) and joins `e^{2ξ/ε} w_L'` at ξ ≥ ε.
pub fn w_right_deriv<T: Real>(xi: T, s: T, eps: T) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    if xi < T::zero() {
        return Err(Error::Domain(format!("w_R requires xi >= 0 (got {xi})")));
    }
    let one = T::one();
    let two = cst::<T>(2.0);
    let three = cst::<T>(3.0);
    let e = (xi / eps).exp();
    if xi <= eps {
        Ok(e * (s - two) * (xi * xi + eps * eps) * (xi + eps).powf(s - three))
    } else {
        let half = cst::<T>(0.5);
        Ok(half / eps
            * e
            * (s * eps * (xi - eps).powf(s - one)
                + s * eps * (xi + eps).powf(s - one)
                + (xi - eps).powf(s)
                - (xi + eps).powf(s)))
    }
}

fn check_invertible<T: Real>(s: T) -> Result<()> {
    if (s - cst::<T>(2.0)).abs() < cst::<T>(1e-9) {
        return Err(Error::Parameter(
            "w inverses are undefined at s = 2 (function degenerates)".into(),
        ));
    }
    Ok(())
}

/// Inverse of `ξ ↦ w_L(ξ; s, ε)` on [ε, +∞]; `y = 0` maps to the +∞ sentinel.
pub fn w_left_inv<T: Real>(y: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    check_invertible(s)?;
    if y == T::zero() {
        return Ok(T::infinity());
    }
    let w0 = w_left(eps, s, eps, ctx)?;
    // monotone from w0 at ξ = ε toward 0 at ξ = +∞
    let lo = w0.min(T::zero()).to_f64().unwrap_or(f64::NAN);
    let hi = w0.max(T::zero()).to_f64().unwrap_or(f64::NAN);
    if y < w0.min(T::zero()) || y > w0.max(T::zero()) {
        return Err(Error::Range {
            what: "w_left_inv target",
            value: y.to_f64().unwrap_or(f64::NAN),
            lo,
            hi,
        });
    }
    expand_and_solve(
        |xi| Ok(w_left(xi, s, eps, ctx)? - y),
        eps,
        eps,
        eps * cst::<T>(1000.0),
        ctx,
    )
}

/// Inverse of `ξ ↦ w_R(ξ; s, ε)` on [0, ∞).
pub fn w_right_inv<T: Real>(y: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    check_s(s)?;
    check_eps(eps)?;
    check_invertible(s)?;
    if y == T::zero() {
        return Ok(T::zero());
    }
    // w_R(0) = 0 and w_R is monotone with sign(w_R') = sign(s-2)
    let increasing = s > cst::<T>(2.0);
    if (increasing && y < T::zero()) || (!increasing && y > T::zero()) {
        let (lo, hi) = if increasing {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        return Err(Error::Range {
            what: "w_right_inv target",
            value: y.to_f64().unwrap_or(f64::NAN),
            lo,
            hi,
        });
    }
    expand_and_solve(
        |xi| Ok(w_right(xi, s, eps, ctx)? - y),
        T::zero(),
        eps,
        eps * cst::<T>(1000.0),
        ctx,
    )
}

/// `e^{c/ε} w_L(ξ; s, ε)` evaluated without overflow, for c ≤ ξ.
pub fn wl_scaled<T: Real>(c: T, xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    if xi == T::infinity() {
        return Ok(T::zero());
    }
    Ok(((c - xi) / eps).exp() * wl_bracket(xi, s, eps, ctx)?)
}

/// `e^{-c/ε} w_R(ξ; s, ε)` evaluated without overflow, for ξ ≤ c.
pub fn wr_scaled<T: Real>(c: T, xi: T, s: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    Ok(((xi - c) / eps).exp() * wr_bracket(xi, s, eps, ctx)?)
}

/// Root of a monotone function given a bracket, re-exported for the leaf
/// solvers in the Bellman module.
pub(crate) fn invert_monotone<T: Real, F: Fn(T) -> Result<T>>(
    f: F,
    lo: T,
    hi: T,
    ctx: &QuadCtx<T>,
) -> Result<T> {
    solve_bracketed(f, lo, hi, ctx)
}
