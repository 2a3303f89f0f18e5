//! Finite-difference differential geometry on uniform grids: metric fields,
//! Christoffel symbols, curvature, the combined strategy-spacetime metric and
//! the covariant Laplacian.
//!
//! Everything here is computed in the Riemannian (Wick-rotated) regime. A
//! Lorentzian `(−,+,+)` tag only flips the sign of the time-time metric
//! entry; the formulas are signature-agnostic, but the simulation layers
//! downstream require positive-definite slices.

mod christoffel;
mod curvature;
mod laplacian;
mod metric;

pub use christoffel::{christoffel, ChristoffelField};
pub use curvature::{combined_metric, curvature, CurvatureBundle};
pub use laplacian::covariant_laplacian;
pub use metric::{MetricField, Signature, SINGULAR_PIVOT};

use crate::grid::{Axis, GridSpec};
use crate::error::Result;

/// Round-sphere metric `dθ² + sin²θ dφ²` on `θ ∈ [θ0, θ1]`, `φ ∈ [0, φ1]`.
pub fn sphere_metric(theta: (f64, f64), phi_end: f64, nodes: usize) -> Result<MetricField> {
    let grid = GridSpec::new(vec![
        Axis::new(theta.0, theta.1, nodes),
        Axis::new(0.0, phi_end, nodes),
    ])?;
    MetricField::from_fn(grid, 2, Signature::Riemannian, |x| {
        let s = x[0].sin();
        vec![1.0, 0.0, 0.0, s * s]
    })
}
