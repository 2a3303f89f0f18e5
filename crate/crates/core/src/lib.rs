//! Numerical toolkit for semicooperative differential games played on a
//! curved strategy spacetime.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`] and [`geometry`]: uniform grids, metric fields, Christoffel
//!   symbols, curvature and the covariant Laplacian.
//! - [`polygon`]: geodesic strategy-polygon areas on ellipsoid patches.
//! - [`lie`]: Lie brackets of drift-plus-noise gradient fields.
//! - [`gff`]: Gaussian free field sampling and the stubbornness measure.
//! - [`sde`]: market-share dynamics, coefficient checks and the cooperative
//!   Nash inequality.
//! - [`profit`]: truncated ladder algebra and the bond-resale cascade.
//! - [`brane`]: the 2-brane action, ghost action and Faddeev–Popov
//!   determinant.
//! - [`propagator`]: short-time kernels, the Schrödinger-like evolution and
//!   the optimal degree of cooperation.
//! - [`io`], [`scenario`] and [`pipeline`]: file formats, scenario parsing
//!   and the end-to-end run.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod brane;
pub mod error;
pub mod geometry;
pub mod gff;
pub mod grid;
pub mod io;
pub mod lie;
pub mod pipeline;
pub mod polygon;
pub mod profit;
pub mod propagator;
pub mod scenario;
pub mod sde;

pub use error::{Error, Result};

/// Version string embedded in every output header and manifest.
pub const VERSION: &str = concat!("semicoop ", env!("CARGO_PKG_VERSION"));
