//! Uniform rectilinear grids and the finite-difference stencils shared by
//! every module.
//!
//! Nodes are stored row-major with the last axis fastest. For the world
//! volume the axis order is `(s, σ1, σ2)`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a uniform grid: closed interval `[start, end]` sampled at
/// `nodes` equally spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, nodes: usize) -> Self {
        Axis { start, end, nodes }
    }

    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / (self.nodes as f64 - 1.0)
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.end
        } else {
            self.start + i as f64 * self.spacing()
        }
    }
}

/// Uniform grid over 1..=3 axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    /// Central differences need an interior point, so every axis carries at
    /// least three nodes and a strictly positive spacing.
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::invalid(format!(
                "grid rank must be 1..=3, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.nodes < 3 {
                return Err(Error::invalid(format!(
                    "axis {k} has {} nodes; at least 3 are required",
                    a.nodes
                )));
            }
            if !(a.end > a.start) || !a.start.is_finite() || !a.end.is_finite() {
                return Err(Error::invalid(format!(
                    "axis {k} extent [{}, {}] must be finite with end > start",
                    a.start, a.end
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    /// World-volume grid over `s ∈ [0, t]` and the two strategy axes.
    pub fn world_volume(time: (f64, f64, usize), sigma1: (f64, f64, usize), sigma2: (f64, f64, usize)) -> Result<Self> {
        Self::new(vec![
            Axis::new(time.0, time.1, time.2),
            Axis::new(sigma1.0, sigma1.1, sigma1.2),
            Axis::new(sigma2.0, sigma2.1, sigma2.2),
        ])
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat-index stride of axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.axes[k + 1..].iter().map(|a| a.nodes).product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.rank());
        multi
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &i)| acc * self.axes[k].nodes + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for k in (0..self.rank()).rev() {
            let n = self.axes[k].nodes;
            out[k] = flat % n;
            flat /= n;
        }
        out
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.axes[k].coord(i))
            .collect()
    }

    /// True when the node sits on no boundary face.
    pub fn is_interior(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .all(|(&i, a)| i > 0 && i + 1 < a.nodes)
    }

    /// Cell volume element used by the trapezoid rule.
    pub fn cell_volume(&self) -> f64 {
        (0..self.rank()).map(|k| self.spacing(k)).product()
    }

    /// Trapezoid weight of a node: product over axes of `h` (interior) or
    /// `h/2` (end points).
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| {
                let h = a.spacing();
                if i == 0 || i + 1 == a.nodes {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.end - a.start).product()
    }

    pub fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{what}: grids differ")));
        }
        Ok(())
    }

    /// Sub-grid made of the node slices `range` along axis `k`.
    pub fn slab(&self, k: usize, range: std::ops::RangeInclusive<usize>) -> Result<GridSpec> {
        let a = self.axes[k];
        let (lo, hi) = (*range.start(), *range.end());
        if hi >= a.nodes || hi < lo + 2 {
            return Err(Error::invalid(format!(
                "slab {lo}..={hi} invalid on axis {k} with {} nodes",
                a.nodes
            )));
        }
        let mut axes = self.axes.clone();
        axes[k] = Axis::new(a.coord(lo), a.coord(hi), hi - lo + 1);
        GridSpec::new(axes)
    }
}

/// Values that finite-difference stencils can act on (real and complex).
pub trait Stencil: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Stencil for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// First derivative along axis `k`: central in the interior, second-order
/// one-sided at the two boundary faces.
pub fn derivative<T: Stencil>(grid: &GridSpec, values: &[T], k: usize) -> Vec<T> {
    let stride = grid.stride(k);
    let n = grid.axis(k).nodes;
    let inv2h = 1.0 / (2.0 * grid.spacing(k));
    (0..values.len())
        .map(|flat| {
            let i = (flat / stride) % n;
            let at = |j: usize| values[flat - i * stride + j * stride];
            if i == 0 {
                (at(1) * 4.0 - at(0) * 3.0 - at(2)) * inv2h
            } else if i + 1 == n {
                (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * inv2h
            } else {
                (at(i + 1) - at(i - 1)) * inv2h
            }
        })
        .collect()
}

/// Second derivative along axis `k`. Interior nodes use the compact
/// three-point stencil; boundary nodes the four-point second-order one-sided
/// stencil (first order when the axis has only three nodes).
pub fn second_derivative<T: Stencil>(grid: &GridSpec, values: &[T], k: usize) -> Vec<T> {
    let stride = grid.stride(k);
    let n = grid.axis(k).nodes;
    let h = grid.spacing(k);
    let inv_h2 = 1.0 / (h * h);
    (0..values.len())
        .map(|flat| {
            let i = (flat / stride) % n;
            let at = |j: usize| values[flat - i * stride + j * stride];
            if i == 0 {
                if n >= 4 {
                    (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * inv_h2
                } else {
                    (at(0) - at(1) * 2.0 + at(2)) * inv_h2
                }
            } else if i + 1 == n {
                if n >= 4 {
                    (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * inv_h2
                } else {
                    (at(n - 1) - at(n - 2) * 2.0 + at(n - 3)) * inv_h2
                }
            } else {
                (at(i + 1) - at(i) * 2.0 + at(i - 1)) * inv_h2
            }
        })
        .collect()
}

/// Mixed or pure second derivative `∂_a ∂_b`.
pub fn hessian_component<T: Stencil>(grid: &GridSpec, values: &[T], a: usize, b: usize) -> Vec<T> {
    if a == b {
        second_derivative(grid, values, a)
    } else {
        derivative(grid, &derivative(grid, values, b), a)
    }
}

/// Plain discrete Laplacian `Σ_a ∂_a ∂_a`.
pub fn discrete_laplacian<T: Stencil>(grid: &GridSpec, values: &[T]) -> Vec<T> {
    let mut out = second_derivative(grid, values, 0);
    for k in 1..grid.rank() {
        for (o, d) in out.iter_mut().zip(second_derivative(grid, values, k)) {
            *o = *o + d;
        }
    }
    out
}

/// Samples a function of the node coordinates.
pub fn sample<T, F: Fn(&[f64]) -> T>(grid: &GridSpec, f: F) -> Vec<T> {
    (0..grid.len()).map(|i| f(&grid.coords(i))).collect()
}

/// Multilinear interpolation of node values at `point`, clamped to the grid.
/// Calls `f(node, weight)` for each contributing corner.
pub fn interpolation_weights(grid: &GridSpec, point: &[f64], mut f: impl FnMut(usize, f64)) {
    let r = grid.rank();
    let mut lo = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for k in 0..r {
        let a = grid.axis(k);
        let t = ((point[k] - a.start) / a.spacing()).clamp(0.0, (a.nodes - 1) as f64);
        let i = (t.floor() as usize).min(a.nodes - 2);
        lo[k] = i;
        frac[k] = t - i as f64;
    }
    for corner in 0..(1usize << r) {
        let mut w = 1.0;
        let mut flat = 0;
        for k in 0..r {
            let up = (corner >> k) & 1;
            w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
            flat += (lo[k] + up) * grid.stride(k);
        }
        if w != 0.0 {
            f(flat, w);
        }
    }
}

pub fn interpolate(grid: &GridSpec, values: &[f64], point: &[f64]) -> f64 {
    let mut s = 0.0;
    interpolation_weights(grid, point, |n, w| s += w * values[n]);
    s
}

/// Deterministic pairwise summation; the tree shape depends only on the
/// length, so the result is independent of how the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> GridSpec {
        GridSpec::world_volume((0.0, 1.0, 5), (-1.0, 1.0, 7), (0.0, 2.0, 4)).unwrap()
    }

    #[test]
    fn rejects_thin_axes() {
        assert!(GridSpec::new(vec![Axis::new(0.0, 1.0, 2)]).is_err());
        assert!(GridSpec::new(vec![Axis::new(1.0, 1.0, 5)]).is_err());
        assert!(GridSpec::new(vec![]).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = grid3();
        for flat in 0..g.len() {
            assert_eq!(g.index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(1), 4);
        assert_eq!(g.stride(0), 28);
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let g = grid3();
        let f = sample(&g, |x| 0.5 * x[1] * x[1] + 3.0 * x[0] * x[2] - x[2]);
        let d1 = derivative(&g, &f, 1);
        let d11 = second_derivative(&g, &f, 1);
        let d02 = hessian_component(&g, &f, 0, 2);
        for i in 0..g.len() {
            let x = g.coords(i);
            assert!((d1[i] - x[1]).abs() < 1e-12);
            assert!((d11[i] - 1.0).abs() < 1e-10);
            assert!((d02[i] - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = grid3();
        let w: Vec<f64> = (0..g.len()).map(|i| g.trapezoid_weight(i)).collect();
        assert!((pairwise_sum(&w) - g.volume()).abs() < 1e-12);
    }

    #[test]
    fn interpolation_exact_on_multilinear() {
        let g = grid3();
        let f = sample(&g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[2]);
        let p = [0.37, -0.2, 1.3];
        let expected = 1.0 + 2.0 * 0.37 + 0.2 + 0.5 * 0.37 * 1.3;
        assert!((interpolate(&g, &f, &p) - expected).abs() < 1e-12);
        // clamped outside the box
        assert_eq!(interpolate(&g, &f, &[-5.0, -9.0, 0.0]), f[g.index(&[0, 0, 0])]);
    }
}
