//! Geometry of the parabolic strip Ω² and the Bellman domain Ω³: boundary
//! envelopes, tangent parameters and the foliation-subdomain classification.

use crate::error::{Error, Result};
use crate::quad::QuadCtx;
use crate::scalar::{cst, Real};
use crate::special::{k_s, m_s};

/// Problem parameters: Lebesgue exponents `1 ≤ p < r`, oscillation bound
/// `ε > 0` and the shared numeric tolerances.
#[derive(Debug, Clone, Copy)]
pub struct Params<T: Real> {
    pub p: T,
    pub r: T,
    pub eps: T,
    pub ctx: QuadCtx<T>,
}

impl<T: Real> Params<T> {
    pub fn new(p: T, r: T, eps: T, ctx: QuadCtx<T>) -> Result<Self> {
        if !(p >= T::one()) {
            return Err(Error::Parameter(format!("p must be >= 1 (got {p})")));
        }
        if !(r > p) {
            return Err(Error::Parameter(format!(
                "r must be > p (got p = {p}, r = {r})"
            )));
        }
        if !(eps > T::zero()) {
            return Err(Error::Parameter(format!("eps must be > 0 (got {eps})")));
        }
        Ok(Self { p, r, eps, ctx })
    }

    /// Convenience constructor with default tolerances.
    pub fn with_defaults(p: T, r: T, eps: T) -> Result<Self> {
        Self::new(p, r, eps, QuadCtx::default())
    }

    /// The candidate `B₂` is only defined away from the degenerate exponents.
    pub fn require_b2(&self) -> Result<()> {
        let two = cst::<T>(2.0);
        if (self.p - two).abs() < cst(1e-9) || (self.r - two).abs() < cst(1e-9) {
            return Err(Error::Parameter("B2 requires p != 2 and r != 2".into()));
        }
        Ok(())
    }

    /// Relative slack admitting boundary points of Ω².
    pub(crate) fn tol_geom(&self, x2: T) -> T {
        cst::<T>(1e-12) * (T::one() + x2.abs())
    }
}

/// Point of the strip Ω² = {x₁² ≤ x₂ ≤ x₁² + ε²}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<T: Real> {
    pub x1: T,
    pub x2: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x1: T, x2: T) -> Self {
        Self { x1, x2 }
    }

    /// Signed violation of strip membership: positive means outside.
    pub fn strip_violation(&self, eps: T) -> T {
        let below = self.x1 * self.x1 - self.x2;
        let above = self.x2 - self.x1 * self.x1 - eps * eps;
        below.max(above)
    }

    pub fn check_in_strip(&self, eps: T, tol: T) -> Result<()> {
        let v = self.strip_violation(eps);
        if v > tol {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside the strip by {v}",
                self.x1, self.x2
            )));
        }
        Ok(())
    }
}

/// Point of the Bellman domain Ω³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<T: Real> {
    pub x1: T,
    pub x2: T,
    pub x3: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x1: T, x2: T, x3: T) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn proj(&self) -> Point2<T> {
        Point2::new(self.x1, self.x2)
    }

    pub fn mirror(&self) -> Self {
        Self::new(-self.x1, self.x2, self.x3)
    }
}

/// Derived tangent geometry at a strip point:
/// `d = √(x₁² + ε² − x₂)`, `Δ∓ = ε ∓ d`, tangent feet `u_± = x₁ ∓ Δ₋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<T: Real> {
    pub d: T,
    pub delta_minus: T,
    pub delta_plus: T,
    pub u_plus: T,
    pub u_minus: T,
}

/// Tangent geometry at `pt`; errors if `pt` leaves the strip.
pub fn geometry<T: Real>(pt: Point2<T>, eps: T) -> Result<Geometry<T>> {
    pt.check_in_strip(eps, cst::<T>(1e-12) * (T::one() + pt.x2.abs()))?;
    let d2 = pt.x1 * pt.x1 + eps * eps - pt.x2;
    let d = d2.max(T::zero()).sqrt().min(eps);
    let delta_minus = eps - d;
    let delta_plus = eps + d;
    Ok(Geometry {
        d,
        delta_minus,
        delta_plus,
        u_plus: pt.x1 - delta_minus,
        u_minus: pt.x1 + delta_minus,
    })
}

/// Upper-envelope component `A^m_p`: tangent-fan extension of `|t|^p` by the
/// weight `m_p`, with the angular sector over `{|x₁| ≤ ε, 2ε|x₁| ≤ x₂}`.
pub fn am<T: Real>(pt: Point2<T>, p: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    let a = pt.x1.abs();
    let mirrored = Point2::new(a, pt.x2);
    let g = geometry(mirrored, eps)?;
    if a <= eps && pt.x2 >= cst::<T>(2.0) * eps * a {
        // angular sector: linear in x₂
        let m0 = m_s(p, T::zero(), eps, ctx)?;
        Ok(m0 * pt.x2 / (cst::<T>(2.0) * eps))
    } else {
        let u = g.u_plus.max(T::zero());
        Ok(u.powf(p) + m_s(p, u, eps, ctx)? * (a - u))
    }
}

/// Envelope component `A^k_p`: the cup `x₂^{p/2}` below `x₂ = ε²`, tangent
/// extension by the weight `k_p` elsewhere.
pub fn ak<T: Real>(pt: Point2<T>, p: T, eps: T, ctx: &QuadCtx<T>) -> Result<T> {
    let a = pt.x1.abs();
    let mirrored = Point2::new(a, pt.x2);
    let g = geometry(mirrored, eps)?;
    if pt.x2 <= eps * eps {
        Ok(pt.x2.powf(p / cst::<T>(2.0)))
    } else {
        let u = g.u_minus.max(eps);
        Ok(u.powf(p) - k_s(p, u, eps, ctx)? * g.delta_minus)
    }
}

/// The admissible `x₃` interval over `pt`: the sorted pair `{A^m, A^k}`.
pub fn x3_bounds<T: Real>(pt: Point2<T>, prm: &Params<T>) -> Result<(T, T)> {
    let vm = am(pt, prm.p, prm.eps, &prm.ctx)?;
    let vk = ak(pt, prm.p, prm.eps, &prm.ctx)?;
    Ok((vm.min(vk), vm.max(vk)))
}

/// Membership in Ω³ with the standard relative slack.
pub fn check_in_domain<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<()> {
    let tol = prm.tol_geom(x.x2);
    x.proj().check_in_strip(prm.eps, tol)?;
    let (lo, hi) = x3_bounds(x.proj(), prm)?;
    if x.x3 < lo - tol || x.x3 > hi + tol {
        return Err(Error::Domain(format!(
            "x3 = {} outside [{lo}, {hi}] over ({}, {})",
            x.x3, x.x1, x.x2
        )));
    }
    Ok(())
}

/// ω-sector of the strip (indices −4 … 4, mirror sectors negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmegaLabel {
    pub index: i8,
}

/// Classify a point into its ω-sector by the sector inequalities; ties go to
/// the lower |index|. Strip membership is the caller's concern.
pub fn classify_omega2<T: Real>(pt: Point2<T>, eps: T) -> Result<OmegaLabel> {
    let a = pt.x1.abs();
    let x2 = pt.x2;
    let e2 = eps * eps;
    let two_eps_a = cst::<T>(2.0) * eps * a;
    let idx: i8 = if two_eps_a <= x2 && x2 <= e2 {
        0
    } else if x2 >= e2 && x2 >= two_eps_a && a <= eps {
        1
    } else if x2 <= e2 && x2 <= two_eps_a {
        2
    } else if e2 <= x2 && x2 <= two_eps_a {
        3
    } else {
        4
    };
    let signed = if pt.x1 < T::zero() { -idx } else { idx };
    Ok(OmegaLabel { index: signed })
}

/// Foliation subdomain of the candidate `B₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainB2 {
    XiLPlus,
    XiLMinus,
    XiRPlus,
    XiRMinus,
    XiChPlus,
    XiChMinus,
    F0,
    R,
}

impl SubdomainB2 {
    /// Mirror image under x₁ ↦ −x₁ (left fans become right fans).
    pub fn mirror(self) -> Self {
        use SubdomainB2::*;
        match self {
            XiLPlus => XiRMinus,
            XiRMinus => XiLPlus,
            XiRPlus => XiLMinus,
            XiLMinus => XiRPlus,
            XiChPlus => XiChMinus,
            XiChMinus => XiChPlus,
            F0 => F0,
            R => R,
        }
    }

    pub fn as_str(self) -> &'static str {
        use SubdomainB2::*;
        match self {
            XiLPlus => "XiL+",
            XiLMinus => "XiL-",
            XiRPlus => "XiR+",
            XiRMinus => "XiR-",
            XiChPlus => "XiCh+",
            XiChMinus => "XiCh-",
            F0 => "F0",
            R => "R",
        }
    }
}

/// Foliation subdomain of the candidate `B₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainB1 {
    Xi0,
    XiPlus,
    XiMinus,
}

impl SubdomainB1 {
    pub fn as_str(self) -> &'static str {
        match self {
            SubdomainB1::Xi0 => "Xi0",
            SubdomainB1::XiPlus => "Xi+",
            SubdomainB1::XiMinus => "Xi-",
        }
    }
}

/// The vertical ladder of separating surfaces over a strip point, for the
/// mirrored coordinates `a = |x₁| ≥ 0`. Regions are listed from the `A^k`
/// side (the written order of the ladder), together with the `x₃` cut
/// between consecutive regions.
pub(crate) fn ladder<T: Real>(a: T, x2: T, prm: &Params<T>) -> Result<(Vec<SubdomainB2>, Vec<T>)> {
    use SubdomainB2::*;
    let eps = prm.eps;
    let p = prm.p;
    let two = cst::<T>(2.0);
    let g = geometry(Point2::new(a, x2), eps)?;
    let omega = classify_omega2(Point2::new(a, x2), eps)?.index.abs();

    let t_f0 = (two * eps).powf(p - two) * x2;
    let t_fan_r = (a + g.delta_minus).powf(p - two) * x2;
    // a ≥ Δ₋ wherever the chord surfaces appear (ω₂, ω₃, ω₄), so the bases
    // below are nonnegative there
    let chord_up = || {
        (g.delta_minus * (a + g.delta_plus).powf(p) + g.delta_plus * (a - g.delta_minus).powf(p))
            / (two * eps)
    };

    Ok(match omega {
        0 => (vec![R, F0], vec![t_f0]),
        1 => (vec![XiRPlus, R, F0], vec![t_fan_r, t_f0]),
        2 => {
            let t_ch = x2.powf(p - T::one()) * a.powf(two - p);
            (vec![R, XiChPlus, XiLPlus], vec![t_ch, chord_up()])
        }
        3 => {
            let t_ch = x2.powf(p - T::one()) * a.powf(two - p);
            (
                vec![XiRPlus, R, XiChPlus, XiLPlus],
                vec![t_fan_r, t_ch, chord_up()],
            )
        }
        _ => {
            let chord_low = (g.delta_minus * (a - g.delta_plus).powf(p)
                + g.delta_plus * (a + g.delta_minus).powf(p))
                / (two * eps);
            (vec![XiRPlus, XiChPlus, XiLPlus], vec![chord_low, chord_up()])
        }
    })
}

/// Classify a point of Ω³ into its `B₂` foliation subdomain.
///
/// Ties on separating surfaces resolve to the domain written first in the
/// ladder (the `A^k` side); skeleton points collapse to a degenerate chord.
pub fn classify_b2<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<SubdomainB2> {
    prm.require_b2()?;
    check_in_domain(x, prm)?;
    let a = x.x1.abs();
    let tol = prm.tol_geom(x.x2);

    // skeleton: the whole ladder collapses to the single value |x₁|^p
    if x.x2 - a * a <= tol {
        return Ok(if a <= tol {
            SubdomainB2::R
        } else if x.x1 < T::zero() {
            SubdomainB2::XiChMinus
        } else {
            SubdomainB2::XiChPlus
        });
    }

    let (regions, cuts) = ladder(a, x.x2, prm)?;
    let below_two = prm.p < cst::<T>(2.0);
    let mut label = *regions.last().unwrap();
    for (i, cut) in cuts.iter().enumerate() {
        // for p < 2 the written ladder runs from large x₃ downward
        let on_first_side = if below_two {
            x.x3 >= *cut
        } else {
            x.x3 <= *cut
        };
        if on_first_side {
            label = regions[i];
            break;
        }
    }
    Ok(if x.x1 < T::zero() {
        label.mirror()
    } else {
        label
    })
}

/// Classify a point of Ω³ into its `B₁` foliation subdomain.
pub fn classify_b1<T: Real>(x: &Point3<T>, prm: &Params<T>) -> Result<SubdomainB1> {
    check_in_domain(x, prm)?;
    let eps = prm.eps;
    let p = prm.p;
    let two = cst::<T>(2.0);
    let four = cst::<T>(4.0);
    let a = x.x1.abs();
    let tol = prm.tol_geom(x.x2) + prm.tol_geom(x.x3.abs());

    let in_xi0 = a <= two * eps && x.x2 >= four * eps * a - cst::<T>(3.0) * eps * eps && {
        let plane = eps.powf(p) + (x.x2 - eps * eps) / (four * eps) * m_s(p, eps, eps, &prm.ctx)?;
        (p - two) * (x.x3 - plane) >= -tol
    };
    Ok(if in_xi0 {
        SubdomainB1::Xi0
    } else if x.x1 < T::zero() {
        SubdomainB1::XiMinus
    } else {
        SubdomainB1::XiPlus
    })
}
