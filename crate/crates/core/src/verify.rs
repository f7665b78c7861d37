//! Independent numerical oracles: concavity and smoothness probes, a 2-D
//! concave-envelope DP oracle for the auxiliary Bellman functions, and
//! Monte-Carlo stress tests of the inequality itself.

use crate::bellman::{eval_b1, eval_b2, Which};
use crate::constant::constant;
use crate::domain::{check_in_domain, ladder, x3_bounds, Params, Point2, Point3};
use crate::error::{Error, Result};
use crate::optimizer::{bmo_norm, moment, optimizer_f0, SegmentKind, TestFunction};
use crate::quad::QuadCtx;
use crate::scalar::{cst, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of a numerical probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub name: String,
    pub n_samples: usize,
    pub worst_violation: f64,
    pub worst_point: Vec<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl ProbeReport {
    fn new(name: &str, n: usize, worst: f64, point: Vec<f64>, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            n_samples: n,
            worst_violation: worst,
            worst_point: point,
            threshold,
            passed: worst < threshold,
        }
    }
}

/// Draw an admissible point with `|x₁| ≤ w·ε`, biased away from the domain
/// edges by the fraction `inset`.
fn sample_point<T: Real, R: Rng>(
    rng: &mut R,
    prm: &Params<T>,
    w: f64,
    inset: f64,
) -> Result<Point3<T>> {
    let eps = prm.eps;
    let x1 = eps * cst::<T>(rng.gen_range(-w..w));
    let sigma = cst::<T>(rng.gen_range(inset..(1.0 - inset)));
    let x2 = x1 * x1 + sigma * eps * eps;
    let (lo, hi) = x3_bounds(Point2::new(x1, x2), prm)?;
    let f = cst::<T>(rng.gen_range(inset..(1.0 - inset)));
    Ok(Point3::new(x1, x2, lo + f * (hi - lo)))
}

/// Midpoint concavity/convexity probe for `B₂` along random segments.
///
/// Records the worst sign-corrected midpoint defect
/// `∓(B(mid) - (B(y)+B(z))/2)`; the expected sign comes from
/// `sign (r-2)(r-p)` (negative ⇒ concave).
pub fn concavity_probe<T: Real>(
    prm: &Params<T>,
    n_segments: usize,
    seed: u64,
) -> Result<ProbeReport> {
    prm.require_b2()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = cst::<T>(2.0);
    let concave = (prm.r - two) * (prm.r - prm.p) < T::zero();
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    let mut done = 0usize;
    while done < n_segments {
        let c = sample_point(&mut rng, prm, 2.8, 0.02)?;
        let (lo, hi) = x3_bounds(c.proj(), prm)?;
        let d1 = prm.eps * cst::<T>(rng.gen_range(-0.35..0.35));
        let d2 = prm.eps * prm.eps * cst::<T>(rng.gen_range(-0.35..0.35));
        let d3 = (hi - lo) * cst::<T>(rng.gen_range(-0.35..0.35));
        let y = Point3::new(c.x1 - d1, c.x2 - d2, c.x3 - d3);
        let z = Point3::new(c.x1 + d1, c.x2 + d2, c.x3 + d3);
        if check_in_domain(&y, prm).is_err() || check_in_domain(&z, prm).is_err() {
            continue;
        }
        let defect = eval_b2(&c, prm)? - cst::<T>(0.5) * (eval_b2(&y, prm)? + eval_b2(&z, prm)?);
        // concave: defect should be >= 0; convex: <= 0
        let viol = if concave { -defect } else { defect };
        let viol = viol.to_f64().unwrap_or(f64::NAN);
        if viol > worst {
            worst = viol;
            worst_pt = vec![
                c.x1.to_f64().unwrap_or(f64::NAN),
                c.x2.to_f64().unwrap_or(f64::NAN),
                c.x3.to_f64().unwrap_or(f64::NAN),
            ];
        }
        done += 1;
    }
    Ok(ProbeReport::new(
        "concavity",
        n_segments,
        worst,
        worst_pt,
        1e-9,
    ))
}

/// Second-difference sign probe: `sign B_{x₃x₃} = sign (r-2)(r-p)` at random
/// interior points (violations measured against a relative noise floor).
pub fn second_difference_sign_probe<T: Real>(
    prm: &Params<T>,
    n_points: usize,
    seed: u64,
) -> Result<ProbeReport> {
    prm.require_b2()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = cst::<T>(2.0);
    let expect_positive = (prm.r - two) * (prm.r - prm.p) > T::zero();
    let h = cst::<T>(1e-3);
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    let mut done = 0usize;
    while done < n_points {
        let c = sample_point(&mut rng, prm, 2.8, 0.05)?;
        let step = h * (T::one() + c.x3.abs());
        let up = Point3::new(c.x1, c.x2, c.x3 + step);
        let dn = Point3::new(c.x1, c.x2, c.x3 - step);
        if check_in_domain(&up, prm).is_err() || check_in_domain(&dn, prm).is_err() {
            continue;
        }
        let d2 = eval_b2(&up, prm)? - two * eval_b2(&c, prm)? + eval_b2(&dn, prm)?;
        let viol = if expect_positive { -d2 } else { d2 };
        let viol = viol.to_f64().unwrap_or(f64::NAN);
        if viol > worst {
            worst = viol;
            worst_pt = vec![
                c.x1.to_f64().unwrap_or(f64::NAN),
                c.x2.to_f64().unwrap_or(f64::NAN),
                c.x3.to_f64().unwrap_or(f64::NAN),
            ];
        }
        done += 1;
    }
    Ok(ProbeReport::new(
        "second_difference_sign",
        n_points,
        worst,
        worst_pt,
        1e-9,
    ))
}

/// One-sided second-order stencil for `∂₃B₂` from above (+1) or below (-1).
fn one_sided_d3<T: Real>(x: &Point3<T>, side: T, h: T, prm: &Params<T>) -> Result<T> {
    let three = cst::<T>(3.0);
    let four = cst::<T>(4.0);
    let b0 = eval_b2(x, prm)?;
    let b1 = eval_b2(&Point3::new(x.x1, x.x2, x.x3 + side * h), prm)?;
    let b2 = eval_b2(&Point3::new(x.x1, x.x2, x.x3 + side * (h + h)), prm)?;
    Ok(side * (-three * b0 + four * b1 - b2) / (h + h))
}

fn one_sided_d1<T: Real>(x: &Point3<T>, side: T, h: T, prm: &Params<T>) -> Result<T> {
    let three = cst::<T>(3.0);
    let four = cst::<T>(4.0);
    let b0 = eval_b2(x, prm)?;
    let b1 = eval_b2(&Point3::new(x.x1 + side * h, x.x2, x.x3), prm)?;
    let b2 = eval_b2(&Point3::new(x.x1 + side * (h + h), x.x2, x.x3), prm)?;
    Ok(side * (-three * b0 + four * b1 - b2) / (h + h))
}

/// Which gluing surface of the vertical ladder a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceKind {
    /// `x₃ = (2ε)^{p-2} x₂` between `F(0)` and `R` (fan parameter degenerates).
    F0R,
    /// `x₃ = (x₁+Δ₋)^{p-2} x₂` between `Ξ_R` and `R`.
    FanR,
    /// `x₃ = x₂^{p-1} x₁^{2-p}` between `R` and the chords (chord foot at 0).
    RChord,
    /// the upper long-chord surface between the chords and `Ξ_L`.
    ChordUpper,
    /// the lower long-chord surface between `Ξ_R` and the chords (ω₄ only).
    ChordLower,
}

impl SurfaceKind {
    /// On these surfaces the touching leaf parameter degenerates and the
    /// normal derivative has only the Hölder modulus `|δ|^{p-1}` for p < 2,
    /// so fixed-step jumps shrink like `h^{p-1}` instead of `h²`.
    pub fn cusped_below_two(self) -> bool {
        matches!(self, SurfaceKind::F0R | SurfaceKind::RChord)
    }
}

/// One surface sample of the C¹-gluing probe.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSample {
    pub kind: SurfaceKind,
    pub point: [f64; 3],
    /// relative jump of the one-sided second-order FD `∂₃` at the base step
    pub jump: f64,
    /// same jump with the step refined 10×
    pub jump_refined: f64,
}

/// C¹-gluing samples: one-sided `∂₃B₂` from both sides of every separating
/// surface of the vertical ladder, at `step` and `step/10`.
pub fn smoothness_samples<T: Real>(
    prm: &Params<T>,
    n_per_surface: usize,
    step: f64,
) -> Result<Vec<SurfaceSample>> {
    prm.require_b2()?;
    let eps = prm.eps;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5b07);
    let mut out: Vec<SurfaceSample> = Vec::new();
    let quota = |out: &Vec<SurfaceSample>, k: SurfaceKind| {
        out.iter().filter(|s| s.kind == k).count() >= n_per_surface
    };
    use SurfaceKind::*;
    let all = [F0R, FanR, RChord, ChordUpper, ChordLower];
    let mut attempts = 0usize;
    while all.iter().any(|&k| !quota(&out, k)) && attempts < 400_000 {
        attempts += 1;
        let x1 = eps * cst::<T>(rng.gen_range(-2.8..2.8));
        let sigma = cst::<T>(rng.gen_range(0.03..0.97));
        let x2 = x1 * x1 + sigma * eps * eps;
        let a = x1.abs();
        let omega = crate::domain::classify_omega2(Point2::new(a, x2), eps)?
            .index
            .unsigned_abs();
        let (_, cuts) = ladder(a, x2, prm)?;
        // surface kinds per ω-sector, in ladder order
        let kinds: &[SurfaceKind] = match omega {
            0 => &[F0R],
            1 => &[FanR, F0R],
            2 => &[RChord, ChordUpper],
            3 => &[FanR, RChord, ChordUpper],
            _ => &[ChordLower, ChordUpper],
        };
        let (lo, hi) = x3_bounds(Point2::new(x1, x2), prm)?;
        for (kind, cut) in kinds.iter().zip(cuts.iter()) {
            if quota(&out, *kind) {
                continue;
            }
            let cut = *cut;
            let h = cst::<T>(step) * (T::one() + cut.abs());
            let room = cst::<T>(4.0) * h;
            if cut - room <= lo || cut + room >= hi {
                continue;
            }
            let x = Point3::new(x1, x2, cut);
            let jump = d3_jump(&x, h, prm)?;
            let jump_refined = d3_jump(&x, h / cst::<T>(10.0), prm)?;
            out.push(SurfaceSample {
                kind: *kind,
                point: [
                    x1.to_f64().unwrap_or(f64::NAN),
                    x2.to_f64().unwrap_or(f64::NAN),
                    cut.to_f64().unwrap_or(f64::NAN),
                ],
                jump,
                jump_refined,
            });
        }
    }
    Ok(out)
}

fn d3_jump<T: Real>(x: &Point3<T>, h: T, prm: &Params<T>) -> Result<f64> {
    let up = one_sided_d3(x, T::one(), h, prm)?;
    let dn = one_sided_d3(x, -T::one(), h, prm)?;
    let denom = 1.0 + 0.5 * (up + dn).to_f64().unwrap_or(f64::NAN).abs();
    Ok((up - dn).to_f64().unwrap_or(f64::NAN).abs() / denom)
}

/// C¹-gluing probe across the ladder surfaces: the worst relative one-sided
/// `∂₃` jump at step 1e-5.
///
/// For p < 2 the surfaces flagged by [`SurfaceKind::cusped_below_two`] carry
/// a `|δ|^{p-1}` gradient modulus, so their fixed-step jumps are of size
/// `h^{p-1}` however accurate the evaluation; `passed` for those surfaces is
/// judged by the refinement decay toward equal one-sided limits instead of
/// the fixed threshold.
pub fn smoothness_probe<T: Real>(prm: &Params<T>, n_per_boundary: usize) -> Result<ProbeReport> {
    let two = cst::<T>(2.0);
    let samples = smoothness_samples(prm, n_per_boundary, 1e-5)?;
    let p64 = prm.p.to_f64().unwrap_or(f64::NAN);
    let cusped_regime = prm.p < two;
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    let mut passed = true;
    for s in &samples {
        if cusped_regime && s.kind.cusped_below_two() {
            // Hölder decay law: jump(h/10) ≈ 10^{-(p-1)} jump(h)
            let expect = 10f64.powf(-(p64 - 1.0));
            let ok = s.jump_refined <= s.jump * expect * 1.6 + 1e-7;
            if !ok {
                passed = false;
                worst_pt = s.point.to_vec();
            }
        } else {
            if s.jump > worst {
                worst = s.jump;
                worst_pt = s.point.to_vec();
            }
        }
    }
    let mut rep = ProbeReport::new("smoothness", samples.len(), worst, worst_pt, 1e-4);
    rep.passed = rep.passed && passed;
    Ok(rep)
}

/// Gluing probe for the vertical fan border `x₂ = 2εx₁` between `Ξ_L±` and
/// `F(0)`. `∂₁B₂` vanishes on the border but only with the modulus
/// `|δ|^{p-1}`, so instead of a fixed-step jump the probe checks that the
/// one-sided derivative decays as the step shrinks.
pub fn fan_border_probe<T: Real>(prm: &Params<T>, n_points: usize) -> Result<ProbeReport> {
    prm.require_b2()?;
    let eps = prm.eps;
    let mut rng = ChaCha8Rng::seed_from_u64(0xfa2b);
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    let mut done = 0usize;
    while done < n_points {
        let x1 = eps * cst::<T>(rng.gen_range(0.08..0.92));
        let x2 = cst::<T>(2.0) * eps * x1;
        if Point2::new(x1, x2).strip_violation(eps) > T::zero() {
            continue;
        }
        // the fan border bounds F(0) between the A^m envelope and the plane
        // x3 = (2ε)^{p-2} x2 (order depends on sign(p-2))
        let (lo, hi) = x3_bounds(Point2::new(x1, x2), prm)?;
        let am_side = crate::domain::am(Point2::new(x1, x2), prm.p, eps, &prm.ctx)?;
        let top = x1 * (cst::<T>(2.0) * eps).powf(prm.p - T::one());
        let (flo, fhi) = (am_side.min(top), am_side.max(top));
        let f = cst::<T>(rng.gen_range(0.1..0.9));
        let x3 = flo + f * (fhi - flo);
        let x = Point3::new(x1, x2, x3);
        if check_in_domain(&x, prm).is_err() || x3 <= lo || x3 >= hi {
            continue;
        }
        let h = cst::<T>(1e-5) * (T::one() + x1.abs());
        let coarse_r = one_sided_d1(&x, T::one(), h, prm)?;
        let fine_r = one_sided_d1(&x, T::one(), h / cst::<T>(16.0), prm)?;
        let coarse_l = one_sided_d1(&x, -T::one(), h, prm)?;
        let fine_l = one_sided_d1(&x, -T::one(), h / cst::<T>(16.0), prm)?;
        // expected contraction (1/16)^{min(p-1, 1)} per step refinement (the
        // analytic O(δ) terms dominate once p > 2), with slack
        let rate = (prm.p - T::one()).min(T::one());
        let contraction = cst::<T>(16.0).powf(-rate) * cst::<T>(2.0);
        let floor = cst::<T>(1e-7);
        let viol_r = fine_r.abs() - (contraction * coarse_r.abs() + floor);
        let viol_l = fine_l.abs() - (contraction * coarse_l.abs() + floor);
        let viol = viol_r.max(viol_l).to_f64().unwrap_or(f64::NAN);
        done += 1;
        if viol > worst {
            worst = viol;
            worst_pt = vec![
                x1.to_f64().unwrap_or(f64::NAN),
                x2.to_f64().unwrap_or(f64::NAN),
                x3.to_f64().unwrap_or(f64::NAN),
            ];
        }
    }
    Ok(ProbeReport::new(
        "fan_border",
        n_points,
        worst,
        worst_pt,
        1e-9,
    ))
}

/// Rectangular grid over a window of the strip; nodes outside Ω² are unused.
#[derive(Debug, Clone)]
pub struct Grid2<T: Real> {
    pub nx1: usize,
    pub nx2: usize,
    pub x1_min: T,
    pub x1_max: T,
    pub x2_min: T,
    pub x2_max: T,
    pub values: Vec<T>,
}

impl<T: Real> Grid2<T> {
    pub fn new(nx1: usize, nx2: usize, x1_min: T, x1_max: T, x2_min: T, x2_max: T) -> Self {
        Self {
            nx1,
            nx2,
            x1_min,
            x1_max,
            x2_min,
            x2_max,
            values: vec![T::nan(); nx1 * nx2],
        }
    }

    pub fn x1(&self, i: usize) -> T {
        self.x1_min
            + (self.x1_max - self.x1_min) * cst::<T>(i as f64) / cst::<T>((self.nx1 - 1) as f64)
    }

    pub fn x2(&self, j: usize) -> T {
        self.x2_min
            + (self.x2_max - self.x2_min) * cst::<T>(j as f64) / cst::<T>((self.nx2 - 1) as f64)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx1 + i
    }

    pub fn inside(&self, i: usize, j: usize, eps: T) -> bool {
        let x1 = self.x1(i);
        let x2 = self.x2(j);
        Point2::new(x1, x2).strip_violation(eps) <= T::zero()
    }
}

/// Upper (concave, `max = true`) or lower (convex) hull update of the values
/// along one run; returns the largest change.
fn hull_update<T: Real>(ts: &[T], vs: &mut [T], maximize: bool) -> T {
    let n = ts.len();
    if n < 3 {
        return T::zero();
    }
    let sgn = if maximize { T::one() } else { -T::one() };
    // monotone chain on (t, sgn·v): upper hull
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        while stack.len() >= 2 {
            let i = stack[stack.len() - 2];
            let j = stack[stack.len() - 1];
            // pop j if it lies below the segment i–k (not extreme)
            let cross = (ts[j] - ts[i]) * (sgn * vs[k] - sgn * vs[i])
                - (ts[k] - ts[i]) * (sgn * vs[j] - sgn * vs[i]);
            if cross >= T::zero() {
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(k);
    }
    // interpolate the hull at every node
    let mut change = T::zero();
    let mut seg = 0usize;
    for k in 0..n {
        while seg + 1 < stack.len() - 1 && ts[stack[seg + 1]] <= ts[k] {
            seg += 1;
        }
        let i = stack[seg];
        let j = stack[(seg + 1).min(stack.len() - 1)];
        let hull = if i == j || ts[j] == ts[i] {
            vs[i]
        } else {
            let lam = (ts[k] - ts[i]) / (ts[j] - ts[i]);
            vs[i] + lam * (vs[j] - vs[i])
        };
        let better = if maximize { hull > vs[k] } else { hull < vs[k] };
        if better {
            change = change.max((hull - vs[k]).abs());
            vs[k] = hull;
        }
    }
    change
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Iterated discrete concave (max) / convex (min) envelope of the skeleton
/// boundary data `|t|^p` over grid segments; approximates the auxiliary
/// Bellman function `B±_p` from the admissible side.
///
/// The update sweeps eight straight-line families (axes, diagonals and
/// knight directions); each run is truncated exactly at its lower-parabola
/// crossings, where the boundary values are pinned.
pub fn envelope_oracle_2d<T: Real>(
    p: T,
    eps: T,
    grid: &Grid2<T>,
    which: Which,
    n_iter: usize,
) -> Result<Grid2<T>> {
    if grid.nx1 < 2 || grid.nx2 < 2 {
        return Err(Error::Parameter("grid must be at least 2x2".into()));
    }
    let maximize = matches!(which, Which::Max);
    let mut out = grid.clone();
    let nx1 = out.nx1;
    let nx2 = out.nx2;

    // initial admissible value: ⟨φ⟩-Jensen lower bound for the sup problem,
    // a large finite cap for the inf problem
    let big = cst::<T>(1e9);
    for j in 0..nx2 {
        for i in 0..nx1 {
            let id = out.idx(i, j);
            if out.inside(i, j, eps) {
                out.values[id] = if maximize {
                    out.x1(i).abs().powf(p)
                } else {
                    big * (T::one() + out.x2(j).abs().powf(p / cst::<T>(2.0)))
                };
            } else {
                out.values[id] = T::nan();
            }
        }
    }

    // direction families: all coprime steps up to 4 cells; the richer the
    // slope set, the closer the restricted-direction closure gets to the
    // true (all-direction) concave envelope
    let mut dirs: Vec<(isize, isize)> = vec![(1, 0), (0, 1)];
    for di in 1isize..=16 {
        for dj in -16isize..=16 {
            if dj == 0 {
                continue;
            }
            if gcd(di as u64, dj.unsigned_abs() as u64) == 1 {
                dirs.push((di, dj));
            }
        }
    }

    let mut last_change = T::infinity();
    for _ in 0..n_iter {
        let mut change = T::zero();
        for &(di, dj) in dirs.iter() {
            // enumerate all lines of direction (di, dj) by their entry nodes
            for j0 in 0..nx2 {
                for i0 in 0..nx1 {
                    let prev_i = i0 as isize - di;
                    let prev_j = j0 as isize - dj;
                    let has_prev = prev_i >= 0
                        && prev_i < nx1 as isize
                        && prev_j >= 0
                        && prev_j < nx2 as isize;
                    if has_prev {
                        continue; // not the first node of the line
                    }
                    change = change.max(sweep_line(&mut out, i0, j0, di, dj, p, eps, maximize));
                }
            }
        }
        last_change = change;
        if change < cst::<T>(1e-8) {
            break;
        }
    }
    let _ = last_change;
    Ok(out)
}

/// Hull-update a single grid line starting at `(i0, j0)` with step
/// `(di, dj)`.
///
/// Runs are maximal node chains whose connecting segments stay inside the
/// strip (the upper-boundary gap is concave along the line, so the check is
/// exact). A run end that faces the lower parabola — inside or beyond the
/// window — is pinned with the exact skeleton crossing value `|t|^p`; ends
/// facing the free upper boundary stay unpinned.
#[allow(clippy::too_many_arguments)]
fn sweep_line<T: Real>(
    g: &mut Grid2<T>,
    i0: usize,
    j0: usize,
    di: isize,
    dj: isize,
    p: T,
    eps: T,
    maximize: bool,
) -> T {
    let mut nodes: Vec<(usize, usize, bool)> = Vec::new();
    let (mut i, mut j) = (i0 as isize, j0 as isize);
    while i >= 0 && i < g.nx1 as isize && j >= 0 && j < g.nx2 as isize {
        let (iu, ju) = (i as usize, j as usize);
        nodes.push((iu, ju, g.inside(iu, ju, eps)));
        i += di;
        j += dj;
    }
    if nodes.len() < 2 {
        return T::zero();
    }

    let dx1 = (g.x1_max - g.x1_min) / cst::<T>((g.nx1 - 1) as f64);
    let dx2 = (g.x2_max - g.x2_min) / cst::<T>((g.nx2 - 1) as f64);
    let step1 = cst::<T>(di as f64) * dx1;
    let step2 = cst::<T>(dj as f64) * dx2;
    let base1 = g.x1(i0);
    let base2 = g.x2(j0);
    let x1_at = |t: T| base1 + t * step1;
    let x2_at = |t: T| base2 + t * step2;
    // signed gaps along the line: low(t) ≥ 0 inside the lower boundary,
    // up(t) ≤ 0 inside the upper; both are concave in t
    let low = |t: T| x2_at(t) - x1_at(t) * x1_at(t);
    let up = |t: T| low(t) - eps * eps;

    // max of the concave upper gap over [ta, tb] (vertex or endpoint)
    let up_max = |ta: T, tb: T| -> T {
        let mut m = up(ta).max(up(tb));
        if step1 != T::zero() {
            let tv = (step2 / (cst::<T>(2.0) * step1) - base1) / step1;
            if tv > ta && tv < tb {
                m = m.max(up(tv));
            }
        }
        m
    };
    let segment_inside = |ta: T, tb: T| up_max(ta, tb) <= T::zero();

    // lower-parabola crossing of the line in (ta, tb): low is concave with a
    // sign change, so bisection is safe
    let crossing = |ta: T, tb: T| -> Option<T> {
        let (mut lo, mut hi) = (ta, tb);
        if low(lo) * low(hi) > T::zero() {
            return None;
        }
        for _ in 0..80 {
            let mid = cst::<T>(0.5) * (lo + hi);
            if low(lo) * low(mid) <= T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(cst::<T>(0.5) * (lo + hi))
    };

    // beyond-window skeleton crossing in the given direction from t0: the
    // nearest root of the concave gap `low` outside the array range
    let beyond = |t0: T, forward: bool| -> Option<T> {
        // expand a bracket away from t0
        let mut step = T::one();
        let mut prev = t0;
        for _ in 0..64 {
            let t = if forward { t0 + step } else { t0 - step };
            if low(t) <= T::zero() {
                let (a, b) = if forward { (prev, t) } else { (t, prev) };
                let tc = crossing(a, b)?;
                // the pinned segment must not escape through the free boundary
                let (sa, sb) = if forward { (t0, tc) } else { (tc, t0) };
                if up_max(sa, sb) <= T::zero() {
                    return Some(tc);
                }
                return None;
            }
            prev = if forward { t0 + step } else { t0 - step };
            step = step + step;
        }
        None
    };

    let mut change = T::zero();
    let n = nodes.len();
    let mut k = 0usize;
    while k < n {
        if !nodes[k].2 {
            k += 1;
            continue;
        }
        // extend the run while the connecting segments stay inside
        let start = k;
        while k + 1 < n
            && nodes[k + 1].2
            && segment_inside(cst::<T>(k as f64), cst::<T>((k + 1) as f64))
        {
            k += 1;
        }
        let end = k + 1; // exclusive
        k += 1;

        let t_start = cst::<T>(start as f64);
        let t_last = cst::<T>((end - 1) as f64);
        let mut ts: Vec<T> = Vec::with_capacity(end - start + 2);
        let mut vs: Vec<T> = Vec::with_capacity(end - start + 2);

        // pinned endpoint before the run
        let head_pin = if start == 0 {
            beyond(t_start, false)
        } else {
            let t_prev = cst::<T>((start - 1) as f64);
            if low(t_prev) < T::zero() {
                crossing(t_prev, t_start).filter(|&tc| up_max(tc, t_start) <= T::zero())
            } else {
                None
            }
        };
        if let Some(tc) = head_pin {
            if t_start - tc > cst::<T>(1e-9) {
                ts.push(tc);
                vs.push(x1_at(tc).abs().powf(p));
            }
        }
        for (off, node) in nodes[start..end].iter().enumerate() {
            ts.push(cst::<T>((start + off) as f64));
            vs.push(g.values[g.idx(node.0, node.1)]);
        }
        let run_offset = ts.len() - (end - start);
        // pinned endpoint after the run
        let tail_pin = if end == n {
            beyond(t_last, true)
        } else {
            let t_next = cst::<T>(end as f64);
            if nodes[end].2 {
                None // split by a mid-segment exit through the free boundary
            } else if low(t_next) < T::zero() {
                crossing(t_last, t_next).filter(|&tc| up_max(t_last, tc) <= T::zero())
            } else {
                None
            }
        };
        if let Some(tc) = tail_pin {
            if tc - t_last > cst::<T>(1e-9) {
                ts.push(tc);
                vs.push(x1_at(tc).abs().powf(p));
            }
        }

        change = change.max(hull_update(&ts, &mut vs, maximize));
        for (off, node) in nodes[start..end].iter().enumerate() {
            let id = g.idx(node.0, node.1);
            g.values[id] = vs[run_offset + off];
        }
    }
    change
}

/// Run the envelope oracle and compare it against the closed-form envelope
/// assignment (`A^k` for `B⁺` with p ≤ 2, `A^m` for p ≥ 2, mirrored for
/// `B⁻`), excluding a margin of cells on each side of the window.
pub fn envelope_report<T: Real>(
    p: T,
    eps: T,
    grid: &Grid2<T>,
    which: Which,
    n_iter: usize,
    margin_x1: usize,
    ctx: &QuadCtx<T>,
) -> Result<(Grid2<T>, ProbeReport)> {
    use crate::domain::{ak, am};
    // the window-truncation artifact is an x1-edge effect (the boundary
    // cascade has exponential ε-scale memory in x1); the x2 edges meet the
    // strip only inside the x1 margin, so a thin fixed margin suffices there
    let margin_x2 = margin_x1.min(10);
    let out = envelope_oracle_2d(p, eps, grid, which, n_iter)?;
    let two = cst::<T>(2.0);
    let use_ak = match which {
        Which::Max => p <= two,
        Which::Min => p >= two,
    };
    let mut sup_diff = T::zero();
    let mut sup_ref = T::zero();
    let mut worst_pt = vec![];
    let mut n = 0usize;
    // the free (upper parabola) boundary cannot be resolved by grid-aligned
    // segment families: nodes touching it are endpoints of every run through
    // them, so a one-cell layer is excluded from the comparison
    let dx2 = (out.x2_max - out.x2_min) / cst::<T>((out.nx2 - 1) as f64);
    let layer = cst::<T>(1.5) * dx2;
    for j in margin_x2..out.nx2.saturating_sub(margin_x2) {
        for i in margin_x1..out.nx1.saturating_sub(margin_x1) {
            if !out.inside(i, j, eps) {
                continue;
            }
            let pt = Point2::new(out.x1(i), out.x2(j));
            if pt.x2 > pt.x1 * pt.x1 + eps * eps - layer {
                continue;
            }
            let reference = if use_ak {
                ak(pt, p, eps, ctx)?
            } else {
                am(pt, p, eps, ctx)?
            };
            let diff = (out.values[out.idx(i, j)] - reference).abs();
            sup_ref = sup_ref.max(reference.abs());
            n += 1;
            if diff > sup_diff {
                sup_diff = diff;
                worst_pt = vec![
                    pt.x1.to_f64().unwrap_or(f64::NAN),
                    pt.x2.to_f64().unwrap_or(f64::NAN),
                ];
            }
        }
    }
    let rel = (sup_diff / sup_ref).to_f64().unwrap_or(f64::NAN);
    let report = ProbeReport::new("envelope", n, rel, worst_pt, 0.01);
    Ok((out, report))
}

/// Random zero-mean step function on `[0, L]` with heavy-tailed values.
fn random_step_function<R: Rng>(rng: &mut R) -> Option<TestFunction<f64>> {
    let n_pieces = rng.gen_range(3..=12);
    let mut widths = Vec::with_capacity(n_pieces);
    let mut values = Vec::with_capacity(n_pieces);
    for _ in 0..n_pieces {
        widths.push(rng.gen_range(0.1..1.0));
        // symmetric heavy-tailed law (Cauchy via tan), clipped
        let u: f64 = rng.gen_range(0.0..1.0);
        let v = (std::f64::consts::PI * (u - 0.5)).tan();
        values.push(v.clamp(-8.0, 8.0));
    }
    let total: f64 = widths.iter().sum();
    let mean: f64 = widths.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>() / total;
    for v in &mut values {
        *v -= mean;
    }
    if values.iter().all(|v| v.abs() < 1e-9) {
        return None;
    }
    let mut pieces = Vec::with_capacity(n_pieces);
    let mut t = 0.0;
    for (w, v) in widths.iter().zip(&values) {
        pieces.push((t, t + w, SegmentKind::Const(*v)));
        t += w;
    }
    TestFunction::new(1.0, pieces).ok()
}

/// Monte-Carlo stress test of the inequality: the normalized ratio
/// `‖φ‖_r / (C ‖φ‖_p^{p/r} ‖φ‖_BMO^{1-p/r})` over random zero-mean step
/// functions must not exceed 1.
pub fn inequality_monte_carlo<T: Real>(
    p: T,
    r: T,
    n_funcs: usize,
    seed: u64,
    ctx: &QuadCtx<T>,
) -> Result<ProbeReport> {
    let c = constant(p, r, ctx)?
        .c
        .to_f64()
        .ok_or_else(|| Error::Internal("constant not representable".into()))?;
    let pf = p.to_f64().unwrap();
    let rf = r.to_f64().unwrap();
    let ctx64 = QuadCtx::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    let mut done = 0usize;
    while done < n_funcs {
        let Some(phi) = random_step_function(&mut rng) else {
            continue;
        };
        let norm_p = moment(&phi, pf, false, &ctx64)?.powf(1.0 / pf);
        let norm_r = moment(&phi, rf, false, &ctx64)?.powf(1.0 / rf);
        let bmo = bmo_norm(&phi, 512, &ctx64)?;
        if bmo < 1e-9 || norm_p < 1e-12 {
            continue;
        }
        let ratio = norm_r / (c * norm_p.powf(pf / rf) * bmo.powf(1.0 - pf / rf));
        done += 1;
        if ratio > worst {
            worst = ratio;
            worst_pt = vec![done as f64, ratio];
        }
    }
    let mut report = ProbeReport::new("inequality_mc", n_funcs, worst, worst_pt, 1.0 + 1e-3);
    // the recorded quantity is the worst ratio; pass/fail against 1 + 1e-3
    report.passed = worst <= 1.0 + 1e-3;
    Ok(report)
}

/// Normalized ratio achieved by the near-extremal optimizer at the argmax of
/// the constant computation (should approach 1).
pub fn near_extremal_ratio<T: Real>(p: T, r: T, ctx: &QuadCtx<T>) -> Result<T> {
    let res = constant(p, r, ctx)?;
    let x3_star = res.x3_star.ok_or_else(|| {
        Error::Parameter("near-extremal check requires the xi-equation branch".into())
    })?;
    let prm = Params::new(p, r, T::one(), *ctx)?;
    let x = Point3::new(T::zero(), T::one(), x3_star);
    let phi = optimizer_f0(&x, &prm)?;
    let norm_p = moment(&phi, p, false, ctx)?.powf(T::one() / p);
    let norm_r = moment(&phi, r, false, ctx)?.powf(T::one() / r);
    let bmo = bmo_norm(&phi, 4000, ctx)?;
    Ok(norm_r / (res.c * norm_p.powf(p / r) * bmo.powf(T::one() - p / r)))
}

/// Ordering cross-check between the two candidates: the dispatcher's max
/// dominates its min on random interior points.
pub fn b1_b2_cross_check<T: Real>(prm: &Params<T>, n: usize, seed: u64) -> Result<ProbeReport> {
    prm.require_b2()?;
    let two = cst::<T>(2.0);
    let disc = (prm.r - two) * (prm.r - prm.p);
    if disc == T::zero() {
        return Err(Error::Parameter("degenerate parameters".into()));
    }
    let b2_is_max = disc < T::zero();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_pt = vec![];
    for _ in 0..n {
        let x = sample_point(&mut rng, prm, 2.5, 0.03)?;
        let b1 = eval_b1(&x, prm)?;
        let b2 = eval_b2(&x, prm)?;
        let gap = if b2_is_max { b1 - b2 } else { b2 - b1 };
        let viol = gap.to_f64().unwrap_or(f64::NAN);
        if viol > worst {
            worst = viol;
            worst_pt = vec![
                x.x1.to_f64().unwrap_or(f64::NAN),
                x.x2.to_f64().unwrap_or(f64::NAN),
                x.x3.to_f64().unwrap_or(f64::NAN),
            ];
        }
    }
    Ok(ProbeReport::new("b1_b2_order", n, worst, worst_pt, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prm(p: f64, r: f64, eps: f64) -> Params<f64> {
        Params::with_defaults(p, r, eps).unwrap()
    }

    #[test]
    fn hull_update_concave() {
        let ts = [0.0f64, 1.0, 2.0, 3.0];
        let mut vs = [0.0f64, -5.0, -5.0, 3.0];
        hull_update(&ts, &mut vs, true);
        // upper hull is the chord from (0,0) to (3,3)
        assert!((vs[1] - 1.0).abs() < 1e-12 && (vs[2] - 2.0).abs() < 1e-12);
        // convex side: a cap gets cut down to the chord
        let mut ws = [0.0f64, 5.0, 5.0, 3.0];
        hull_update(&ts, &mut ws, false);
        assert!((ws[1] - 1.0).abs() < 1e-12 && (ws[2] - 2.0).abs() < 1e-12);
        // already-concave data is a fixpoint
        let mut cs = [0.0f64, 2.0, 3.0, 3.5];
        let ch = hull_update(&ts, &mut cs, true);
        assert!(ch.abs() < 1e-15);
    }

    #[test]
    fn envelope_p2_is_x2() {
        // both envelopes coincide with x₂ at p = 2: the closed forms A^m and
        // A^k agree, so the report comparison must come out near zero
        let grid = Grid2::<f64>::new(61, 61, -2.0, 2.0, 0.0, 5.0);
        let ctx = QuadCtx::default();
        // the window cuts off chord partners within ~2ε of its edges, so the
        // comparison margin must cover that band (16 cells ≈ ε here)
        let (_, rep) = envelope_report(2.0, 1.0, &grid, Which::Max, 400, 16, &ctx).unwrap();
        assert!(
            rep.worst_violation < 0.01,
            "relative sup deviation {}",
            rep.worst_violation
        );
    }

    #[test]
    fn envelope_output_midpoint_concave() {
        let grid = Grid2::<f64>::new(41, 41, -1.5, 1.5, 0.0, 3.0);
        let out = envelope_oracle_2d(1.5, 1.0, &grid, Which::Max, 400).unwrap();
        // aligned triples along rows and columns stay concave
        let mut worst = 0.0f64;
        for j in 0..41 {
            for i in 1..40 {
                if out.inside(i - 1, j, 1.0) && out.inside(i, j, 1.0) && out.inside(i + 1, j, 1.0) {
                    let mid = out.values[out.idx(i, j)];
                    let avg = 0.5 * (out.values[out.idx(i - 1, j)] + out.values[out.idx(i + 1, j)]);
                    worst = worst.max(avg - mid);
                }
            }
        }
        assert!(worst < 1e-8, "midpoint concavity defect {worst}");
    }

    #[test]
    fn concavity_probe_sign_cases() {
        // (1.3, 1.7): B₂ concave; (1.5, 3): B₂ convex
        let rep = concavity_probe(&prm(1.3, 1.7, 1.0), 400, 11).unwrap();
        assert!(rep.passed, "concave case: {}", rep.worst_violation);
        let rep = concavity_probe(&prm(1.5, 3.0, 1.0), 400, 11).unwrap();
        assert!(rep.passed, "convex case: {}", rep.worst_violation);
    }

    #[test]
    fn concavity_probe_deterministic() {
        let a = concavity_probe(&prm(1.3, 1.7, 1.0), 100, 5).unwrap();
        let b = concavity_probe(&prm(1.3, 1.7, 1.0), 100, 5).unwrap();
        assert_eq!(a.worst_violation.to_bits(), b.worst_violation.to_bits());
    }

    #[test]
    fn smoothness_probe_small() {
        let rep = smoothness_probe(&prm(1.3, 1.7, 1.0), 10).unwrap();
        assert!(
            rep.passed,
            "worst jump {} at {:?}",
            rep.worst_violation, rep.worst_point
        );
        let rep = fan_border_probe(&prm(1.3, 1.7, 1.0), 8).unwrap();
        assert!(
            rep.passed,
            "fan border decay violated by {} at {:?}",
            rep.worst_violation, rep.worst_point
        );
    }

    #[test]
    fn mc_inequality_small() {
        let ctx = QuadCtx::default();
        let rep = inequality_monte_carlo(1.3, 1.7, 100, 7, &ctx).unwrap();
        assert!(rep.passed, "worst ratio {}", rep.worst_violation);
        // ratios are positive and bounded away from zero for nondegenerate φ
        assert!(rep.worst_violation > 0.2);
    }

    #[test]
    fn mc_worst_ratio_monotone_in_sample_count() {
        // a longer run under the same seed extends the sample stream, so the
        // recorded worst ratio can only grow
        let ctx = QuadCtx::default();
        let short = inequality_monte_carlo(1.3, 1.7, 50, 21, &ctx).unwrap();
        let long = inequality_monte_carlo(1.3, 1.7, 200, 21, &ctx).unwrap();
        assert!(long.worst_violation >= short.worst_violation);
    }

    #[test]
    fn near_extremal_close_to_one() {
        let ctx = QuadCtx::default();
        let ratio = near_extremal_ratio(1.3, 1.7, &ctx).unwrap();
        assert!(ratio >= 0.99 && ratio <= 1.0 + 1e-6, "ratio {ratio}");
    }

    #[test]
    fn cross_check_both_orientations() {
        let rep = b1_b2_cross_check(&prm(1.3, 1.7, 1.0), 300, 3).unwrap();
        assert!(rep.passed, "B2 >= B1 failed: {}", rep.worst_violation);
        let rep = b1_b2_cross_check(&prm(1.5, 3.0, 1.0), 300, 3).unwrap();
        assert!(rep.passed, "B1 >= B2 failed: {}", rep.worst_violation);
    }

    #[test]
    fn second_difference_sign_small() {
        let rep = second_difference_sign_probe(&prm(1.3, 1.7, 1.0), 200, 9).unwrap();
        assert!(rep.passed, "worst {}", rep.worst_violation);
        let rep = second_difference_sign_probe(&prm(1.5, 3.0, 1.0), 200, 9).unwrap();
        assert!(rep.passed, "worst {}", rep.worst_violation);
    }
}
