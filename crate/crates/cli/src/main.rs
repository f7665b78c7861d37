//! Command-line front end: sharp constants, Bellman evaluation,
//! classification, optimizers, ratio profiles, verification suites and
//! parameter scans, with machine-readable output.

use bmo_bellman::bellman::{
    eval_b1, eval_b2_full, eval_bellman, grad_b2, leaf_coords_b1, LeafCoords, Which,
};
use bmo_bellman::constant::{constant, ratio_profile};
use bmo_bellman::domain::{
    classify_b1, classify_b2, classify_omega2, x3_bounds, Params, Point2, Point3,
};
use bmo_bellman::optimizer::{bmo_norm, delivery_curve, moments, optimizer_for};
use bmo_bellman::verify::{
    concavity_probe, envelope_report, fan_border_probe, inequality_monte_carlo,
    second_difference_sign_probe, smoothness_probe, Grid2, ProbeReport,
};
use bmo_bellman::{Error, QuadCtx};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bmo-bellman",
    version,
    about = "Sharp constants and Bellman functions for the multiplicative BMO inequality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidateArg {
    B1,
    B2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    All,
    Concavity,
    Smooth,
    Envelope,
    Mc,
}

#[derive(Args)]
struct Shared {
    /// Lebesgue exponent p (1 <= p < r)
    #[arg(long)]
    p: f64,
    /// Lebesgue exponent r (> p)
    #[arg(long)]
    r: f64,
    /// BMO bound ε
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// absolute tolerance for quadrature and root-finding
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// seed for randomized probes
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Shared {
    fn ctx(&self) -> Result<QuadCtx<f64>, Error> {
        QuadCtx::new(self.tol, self.tol * 100.0, 400)
    }

    fn params(&self) -> Result<Params<f64>, Error> {
        Params::new(self.p, self.r, self.eps, self.ctx()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sharp constant C(p, r)
    Constant {
        #[command(flatten)]
        shared: Shared,
    },
    /// Evaluate a Bellman candidate at a point of the domain
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long)]
        x3: f64,
        /// dispatch to the extremal function (default: max)
        #[arg(long, value_enum)]
        which: Option<WhichArg>,
        /// evaluate a specific candidate instead
        #[arg(long, value_enum, conflicts_with = "which")]
        candidate: Option<CandidateArg>,
    },
    /// Classify a point: ω-sector and foliation subdomains
    Classify {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long)]
        x3: f64,
    },
    /// Construct the extremal test function at a point and verify it
    Optimizer {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long)]
        x3: f64,
        /// grid size for the BMO-norm lower bound
        #[arg(long, default_value_t = 4000)]
        n_grid: usize,
    },
    /// Table of B(0,1,x3)/x3 over the critical segment (1 < p < r < 2)
    Profile {
        #[command(flatten)]
        shared: Shared,
        /// number of samples
        #[arg(long, default_value_t = 101)]
        n: usize,
    },
    /// Run verification suites
    Verify {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// sample count for randomized probes
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// grid nodes per axis for the envelope oracle
        #[arg(long, default_value_t = 120)]
        grid_n: usize,
    },
    /// CSV scan of C(p, r) over a parameter grid
    Scan {
        /// output format
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        p_min: f64,
        #[arg(long)]
        p_max: f64,
        #[arg(long, default_value_t = 5)]
        p_steps: usize,
        #[arg(long)]
        r_min: f64,
        #[arg(long)]
        r_max: f64,
        #[arg(long, default_value_t = 5)]
        r_steps: usize,
    },
}

fn leaf_json(leaf: &LeafCoords<f64>) -> serde_json::Value {
    // ξ = +∞ (the outermost leaf) serializes as the string "inf"
    let num = |v: f64| -> serde_json::Value {
        if v.is_finite() {
            json!(v)
        } else {
            json!("inf")
        }
    };
    match *leaf {
        LeafCoords::FanLeft { u, v, xi, h } => {
            json!({"type": "fan_left", "u": u, "v": v, "xi": num(xi), "h": h})
        }
        LeafCoords::FanRight { u, v, xi, h } => {
            json!({"type": "fan_right", "u": u, "v": v, "xi": num(xi), "h": h})
        }
        LeafCoords::Chord { a, b } => json!({"type": "chord", "a": a, "b": b}),
        LeafCoords::RLeaf { v } => json!({"type": "r_leaf", "v": v}),
        LeafCoords::F0Leaf { xi, h } => json!({"type": "f0_leaf", "xi": num(xi), "h": h}),
        LeafCoords::B1Trapezoid { v } => json!({"type": "b1_trapezoid", "v": v}),
        LeafCoords::B1Triangle { v } => json!({"type": "b1_triangle", "v": v}),
    }
}

#[derive(Serialize)]
struct Document {
    command: &'static str,
    params: serde_json::Value,
    result: serde_json::Value,
    diagnostics: serde_json::Value,
}

fn emit(doc: &Document, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(doc).unwrap()),
        Format::Text | Format::Csv => {
            println!("# {}", doc.command);
            println!("{}", serde_json::to_string_pretty(&doc.result).unwrap());
        }
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Constant { shared } => {
            let ctx = shared.ctx()?;
            let res = constant(shared.p, shared.r, &ctx)?;
            let doc = Document {
                command: "constant",
                params: json!({"p": shared.p, "r": shared.r, "eps": shared.eps, "tol": shared.tol}),
                result: json!({
                    "c": res.c,
                    "branch": res.branch.as_str(),
                    "xi_star": res.xi_star.map(|v| if v.is_finite() { json!(v) } else { json!("inf") }),
                    "x3_star": res.x3_star,
                    "degenerate_fallback": res.degenerate_fallback,
                }),
                diagnostics: json!({}),
            };
            emit(&doc, shared.format);
        }
        Command::Eval {
            shared,
            x1,
            x2,
            x3,
            which,
            candidate,
        } => {
            let prm = shared.params()?;
            let x = Point3::new(x1, x2, x3);
            let b1_result = |prm: &Params<f64>| -> Result<_, Error> {
                let v = eval_b1(&x, prm)?;
                let leaf = leaf_coords_b1(&x, prm)?;
                Ok((
                    v,
                    classify_b1(&x, prm)?.as_str().to_string(),
                    leaf_json(&leaf),
                    false,
                ))
            };
            let b2_result = |prm: &Params<f64>| -> Result<_, Error> {
                let full = eval_b2_full(&x, prm)?;
                Ok((
                    full.value,
                    full.label.as_str().to_string(),
                    leaf_json(&full.leaf),
                    true,
                ))
            };
            let (value, label, leaf, is_b2) = match candidate {
                Some(CandidateArg::B1) => b1_result(&prm)?,
                Some(CandidateArg::B2) => b2_result(&prm)?,
                None => {
                    let dispatched = match which {
                        Some(WhichArg::Min) => Which::Min,
                        _ => Which::Max,
                    };
                    // dispatch on the sign of (r-2)(r-p)
                    let b1_is_max = (prm.r - 2.0) * (prm.r - prm.p) > 0.0;
                    let use_b1 = b1_is_max == matches!(dispatched, Which::Max);
                    let _ = eval_bellman(&x, &prm, dispatched)?;
                    if use_b1 {
                        b1_result(&prm)?
                    } else {
                        b2_result(&prm)?
                    }
                }
            };
            // the analytic gradient belongs to the B2 candidate
            let grad = if is_b2 { grad_b2(&x, &prm).ok() } else { None };
            let doc = Document {
                command: "eval",
                params: json!({"p": shared.p, "r": shared.r, "eps": shared.eps,
                               "x1": x1, "x2": x2, "x3": x3}),
                result: json!({
                    "value": value,
                    "label": label,
                    "leaf": leaf,
                    "gradient": grad.map(|g| json!({"d_dx2": g.d_dx2, "d_dx3": g.d_dx3})),
                }),
                diagnostics: json!({}),
            };
            emit(&doc, shared.format);
        }
        Command::Classify { shared, x1, x2, x3 } => {
            let prm = shared.params()?;
            let x = Point3::new(x1, x2, x3);
            let (lo, hi) = x3_bounds(Point2::new(x1, x2), &prm)?;
            let omega = classify_omega2(Point2::new(x1, x2), shared.eps)?;
            let b1 = classify_b1(&x, &prm)?;
            let b2 = classify_b2(&x, &prm).map(|l| l.as_str().to_string());
            let doc = Document {
                command: "classify",
                params: json!({"p": shared.p, "r": shared.r, "eps": shared.eps,
                               "x1": x1, "x2": x2, "x3": x3}),
                result: json!({
                    "omega": omega.index,
                    "b1_label": b1.as_str(),
                    "b2_label": b2.ok(),
                    "x3_bounds": [lo, hi],
                }),
                diagnostics: json!({}),
            };
            emit(&doc, shared.format);
        }
        Command::Optimizer {
            shared,
            x1,
            x2,
            x3,
            n_grid,
        } => {
            let prm = shared.params()?;
            let x = Point3::new(x1, x2, x3);
            let phi = optimizer_for(&x, &prm)?;
            let (m1, m2, mp, mr) = moments(&phi, &prm)?;
            let norm = bmo_norm(&phi, n_grid, &prm.ctx)?;
            let curve_end = delivery_curve(&phi, 64)?.last().copied();
            let doc = Document {
                command: "optimizer",
                params: json!({"p": shared.p, "r": shared.r, "eps": shared.eps,
                               "x1": x1, "x2": x2, "x3": x3, "n_grid": n_grid}),
                result: json!({
                    "test_function": phi.document(),
                    "moments": {"m1": m1, "m2": m2, "mp": mp, "mr": mr},
                    "bmo_norm": norm,
                }),
                diagnostics: json!({
                    "delivery_curve_end": curve_end.map(|pt| [pt.x1, pt.x2]),
                }),
            };
            emit(&doc, shared.format);
        }
        Command::Profile { shared, n } => {
            let ctx = shared.ctx()?;
            let table = ratio_profile(shared.p, shared.r, n, &ctx)?;
            match shared.format {
                Format::Csv => {
                    println!("x3,ratio");
                    for (x3, ratio) in &table {
                        println!("{x3},{ratio}");
                    }
                }
                _ => {
                    let doc = Document {
                        command: "profile",
                        params: json!({"p": shared.p, "r": shared.r, "n": n}),
                        result: json!(table
                            .iter()
                            .map(|(x3, ratio)| json!({"x3": x3, "ratio": ratio}))
                            .collect::<Vec<_>>()),
                        diagnostics: json!({}),
                    };
                    emit(&doc, shared.format);
                }
            }
        }
        Command::Verify {
            shared,
            suite,
            samples,
            grid_n,
        } => {
            let prm = shared.params()?;
            let ctx = shared.ctx()?;
            let mut reports: Vec<ProbeReport> = Vec::new();
            let want = |s: Suite| {
                matches!(suite, Suite::All)
                    || std::mem::discriminant(&suite) == std::mem::discriminant(&s)
            };
            if want(Suite::Concavity) {
                reports.push(concavity_probe(&prm, samples, shared.seed)?);
                reports.push(second_difference_sign_probe(
                    &prm,
                    samples / 2,
                    shared.seed,
                )?);
            }
            if want(Suite::Smooth) {
                reports.push(smoothness_probe(&prm, (samples / 40).max(5))?);
                reports.push(fan_border_probe(&prm, (samples / 100).max(5))?);
            }
            if want(Suite::Envelope) {
                let w = 3.0 * shared.eps;
                let top = w * w + shared.eps * shared.eps;
                let grid = Grid2::new(grid_n, grid_n, -w, w, 0.0, top);
                let (_, rep) = envelope_report(
                    shared.p,
                    shared.eps,
                    &grid,
                    Which::Max,
                    2000,
                    grid_n / 20,
                    &ctx,
                )?;
                reports.push(rep);
            }
            if want(Suite::Mc) {
                reports.push(inequality_monte_carlo(
                    shared.p,
                    shared.r,
                    samples,
                    shared.seed,
                    &ctx,
                )?);
            }
            let all_passed = reports.iter().all(|r| r.passed);
            let doc = Document {
                command: "verify",
                params: json!({"p": shared.p, "r": shared.r, "eps": shared.eps,
                               "seed": shared.seed, "samples": samples}),
                result: serde_json::to_value(&reports).unwrap(),
                diagnostics: json!({"all_passed": all_passed}),
            };
            emit(&doc, shared.format);
        }
        Command::Scan {
            format,
            tol,
            p_min,
            p_max,
            p_steps,
            r_min,
            r_max,
            r_steps,
        } => {
            let ctx = QuadCtx::new(tol, tol * 100.0, 400)?;
            let mut rows = Vec::new();
            for i in 0..p_steps {
                let p = if p_steps == 1 {
                    p_min
                } else {
                    p_min + (p_max - p_min) * i as f64 / (p_steps - 1) as f64
                };
                for j in 0..r_steps {
                    let r = if r_steps == 1 {
                        r_min
                    } else {
                        r_min + (r_max - r_min) * j as f64 / (r_steps - 1) as f64
                    };
                    if !(p >= 1.0 && r > p) {
                        continue;
                    }
                    let res = constant(p, r, &ctx)?;
                    rows.push((p, r, res));
                }
            }
            match format {
                Format::Json => {
                    let doc = Document {
                        command: "scan",
                        params: json!({"p_min": p_min, "p_max": p_max, "p_steps": p_steps,
                                       "r_min": r_min, "r_max": r_max, "r_steps": r_steps}),
                        result: json!(rows
                            .iter()
                            .map(|(p, r, res)| json!({
                                "p": p, "r": r, "c": res.c,
                                "branch": res.branch.as_str(),
                                "xi_star": res.xi_star.filter(|v| v.is_finite()),
                            }))
                            .collect::<Vec<_>>()),
                        diagnostics: json!({}),
                    };
                    emit(&doc, Format::Json);
                }
                _ => {
                    println!("p,r,C,branch,xi_star");
                    for (p, r, res) in rows {
                        let xi = res
                            .xi_star
                            .filter(|v| v.is_finite())
                            .map(|v| v.to_string())
                            .unwrap_or_default();
                        println!("{p},{r},{},{},{xi}", res.c, res.branch.as_str());
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        let code = match err {
            Error::Numerical { .. } | Error::Internal(_) => 4,
            _ => 3,
        };
        std::process::exit(code);
    }
}
