//! Volumetric sum-of-Gaussians actor model with analytic contour rendering,
//! a joint PCA shape space and two-stage space-time shape and pose fitting.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod appearance;
pub mod energy;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod io;
pub mod optimizer;
pub mod raycast;
pub mod scene;
pub mod shape;

pub use error::{Error, Result};
pub use exec::Exec;
