//! Sharp constants and Bellman functions for the multiplicative inequality
//! `‖φ‖_r ≤ C(p,r) ‖φ‖_p^{p/r} ‖φ‖_BMO^{1-p/r}`.
//!
//! The crate evaluates the two Bellman candidates `B₁`/`B₂` on their
//! three-dimensional domain, constructs the extremal test functions attaining
//! them, computes the sharp constant for every parameter range, and ships the
//! independent numerical oracles (concavity, smoothness, 2-D envelope, Monte
//! Carlo) used to verify the construction.
//!
//! All numerics are generic over the scalar type (see [`scalar::Real`]);
//! `f64` aliases for the main data types live at the crate root.
//!
//! ```
//! use bmo_bellman::{constant, eval_bellman, Which, QuadCtx, Params64, Point3_64};
//!
//! let ctx = QuadCtx::<f64>::default();
//! // closed-form branch of the sharp constant
//! let res = constant(2.0, 4.0, &ctx).unwrap();
//! assert!((res.c - 12f64.powf(0.25)).abs() < 1e-12);
//! // root branch for 1 < p < r < 2, with the critical-leaf data attached
//! let res = constant(1.5, 1.8, &ctx).unwrap();
//! assert!(res.xi_star.unwrap() > 1.0);
//!
//! // evaluate the extremal Bellman function at an admissible point
//! let prm = Params64::with_defaults(1.3, 1.7, 1.0).unwrap();
//! let value = eval_bellman(&Point3_64::new(0.4, 0.9, 0.8), &prm, Which::Max).unwrap();
//! assert!(value > 0.8 && value < 1.0);
//! ```

pub mod bellman;
pub mod constant;
pub mod domain;
pub mod error;
pub mod gamma;
pub mod optimizer;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod verify;

pub use bellman::{eval_b1, eval_b2, eval_bellman, grad_b2, leaf_coords_b2, Which};
pub use constant::{constant, ratio_profile, Branch};
pub use domain::{classify_b1, classify_b2, x3_bounds};
pub use error::{Error, Result};
pub use quad::QuadCtx;
pub use scalar::Real;

/// `f64` aliases for the main data types.
pub type QuadCtx64 = QuadCtx<f64>;
pub type Params64 = domain::Params<f64>;
pub type Point2_64 = domain::Point2<f64>;
pub type Point3_64 = domain::Point3<f64>;
pub type TestFunction64 = optimizer::TestFunction<f64>;
pub type ConstantResult64 = constant::ConstantResult<f64>;
pub type Grid2_64 = verify::Grid2<f64>;
