//! Parallax-based depth with aleatoric uncertainty.
//!
//! * [`geometry`]: virtual-camera projection and `z = a / rho + c`.
//! * [`uncertainty`]: probabilistic (`a * sigma_zeta`) and relative
//!   (`delta_z`) conversion of parallax uncertainty to depth.
//! * [`losses`]: log-depth L1 and Laplace NLL terms with hand gradients,
//!   a finite-difference checker and a Laplace maximum-likelihood fitter.
//! * [`metrics`]: Abs rel, RMSE log, delta < 1.25 and sparsification / AuSE.
//! * [`simulate`]: seeded synthetic scenes and noise for end-to-end checks.
//! * [`io`]: PFM maps, pose files, INI configuration, JSON reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod map;
pub mod metrics;
pub mod parallel;
pub mod simulate;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, LinearDepthParams, RelativePose, VirtualCoords};
pub use map::{Quantity, ScalarMap, INVALID};
pub use parallel::Exec;
