use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Smallest LU pivot magnitude accepted before a node is declared singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;

/// Declared signature of a metric field. Kernels compute in the Riemannian
/// (Wick-rotated) regime; the tag records what the field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Riemannian,
    /// `(−,+,+,…)`: the first coordinate is timelike.
    Lorentzian,
}

/// A symmetric `dim × dim` tensor at every node of a grid.
///
/// `dim` equals the grid rank for world-volume metrics and 11 for the
/// background metric, which is only ever contracted.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: GridSpec,
    dim: usize,
    signature: Signature,
    data: Vec<f64>,
}

impl MetricField {
    pub fn new(grid: GridSpec, dim: usize, signature: Signature, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("metric dimension must be positive"));
        }
        if data.len() != grid.len() * dim * dim {
            return Err(Error::invalid(format!(
                "metric data has {} values, expected {} nodes × {dim}²",
                data.len(),
                grid.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: "metric".into(),
                location: format!("node {}", bad / (dim * dim)),
            });
        }
        let field = MetricField {
            grid,
            dim,
            signature,
            data,
        };
        field.check_symmetric()?;
        Ok(field)
    }

    pub fn from_fn<F>(grid: GridSpec, dim: usize, signature: Signature, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut data = Vec::with_capacity(grid.len() * dim * dim);
        for node in 0..grid.len() {
            let m = f(&grid.coords(node));
            if m.len() != dim * dim {
                return Err(Error::invalid(format!(
                    "metric generator returned {} entries, expected {}",
                    m.len(),
                    dim * dim
                )));
            }
            data.extend_from_slice(&m);
        }
        Self::new(grid, dim, signature, data)
    }

    pub fn constant(grid: GridSpec, matrix: &[f64], signature: Signature) -> Result<Self> {
        let dim = (matrix.len() as f64).sqrt().round() as usize;
        if dim * dim != matrix.len() {
            return Err(Error::invalid("constant metric must be a square matrix"));
        }
        let data = matrix.repeat(grid.len());
        Self::new(grid, dim, signature, data)
    }

    /// Euclidean identity metric with `dim` equal to the grid rank.
    pub fn flat(grid: GridSpec) -> Self {
        let dim = grid.rank();
        Self::identity(grid, dim)
    }

    pub fn identity(grid: GridSpec, dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for a in 0..dim {
            m[a * dim + a] = 1.0;
        }
        let data = m.repeat(grid.len());
        MetricField {
            grid,
            dim,
            signature: Signature::Riemannian,
            data,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.dim * self.dim;
        &self.data[node * n..(node + 1) * n]
    }

    pub fn get(&self, node: usize, a: usize, b: usize) -> f64 {
        self.data[node * self.dim * self.dim + a * self.dim + b]
    }

    pub fn matrix(&self, node: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, self.at(node))
    }

    /// Values of component `(a, b)` at every node.
    pub fn component(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|n| self.get(n, a, b)).collect()
    }

    fn check_symmetric(&self) -> Result<()> {
        let d = self.dim;
        for node in 0..self.grid.len() {
            let m = self.at(node);
            for a in 0..d {
                for b in a + 1..d {
                    let diff = (m[a * d + b] - m[b * d + a]).abs();
                    let scale = m[a * d + b].abs().max(m[b * d + a].abs()).max(1.0);
                    if diff > SYMMETRY_TOL * scale {
                        return Err(Error::NonSymmetric {
                            node,
                            asymmetry: diff,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-node inverse metric `h^{ab}` by LU factorisation.
    pub fn inverse(&self) -> Result<MetricField> {
        let d = self.dim;
        let inv: Vec<Result<Vec<f64>>> = (0..self.grid.len())
            .into_par_iter()
            .map(|node| {
                let lu = self.matrix(node).lu();
                check_pivots(&lu.u(), node)?;
                let inv = lu.try_inverse().ok_or(Error::Singular { node, pivot: 0.0 })?;
                let mut out = vec![0.0; d * d];
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
                    }
                }
                Ok(out)
            })
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for block in inv {
            data.extend(block?);
        }
        Ok(MetricField {
            grid: self.grid.clone(),
            dim: d,
            signature: self.signature,
            data,
        })
    }

    pub fn determinants(&self) -> Result<Vec<f64>> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|node| {
                let lu = self.matrix(node).lu();
                check_pivots(&lu.u(), node)?;
                Ok(lu.determinant())
            })
            .collect()
    }

    /// Spectral condition number per node (ratio of extreme singular values).
    pub fn condition_numbers(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|node| {
                let sv = self.matrix(node).singular_values();
                let max = sv.max();
                let min = sv.min();
                if min == 0.0 {
                    f64::INFINITY
                } else {
                    max / min
                }
            })
            .collect()
    }

    /// Restricts every node matrix to the leading `dim × dim` block.
    pub fn leading_block(&self, dim: usize) -> Result<MetricField> {
        if dim == 0 || dim > self.dim {
            return Err(Error::invalid(format!(
                "block size {dim} outside 1..={}",
                self.dim
            )));
        }
        let mut data = Vec::with_capacity(self.grid.len() * dim * dim);
        for node in 0..self.grid.len() {
            for a in 0..dim {
                for b in 0..dim {
                    data.push(self.get(node, a, b));
                }
            }
        }
        MetricField::new(self.grid.clone(), dim, self.signature, data)
    }

    /// Replaces the grid (same node count), e.g. to re-label a slice.
    pub fn with_grid(mut self, grid: GridSpec) -> Result<MetricField> {
        if grid.len() != self.grid.len() {
            return Err(Error::GridMismatch("node counts differ".into()));
        }
        self.grid = grid;
        Ok(self)
    }
}

fn check_pivots(u: &DMatrix<f64>, node: usize) -> Result<()> {
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
    if pivot < SINGULAR_PIVOT {
        return Err(Error::Singular { node, pivot });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::world_volume((0.0, 1.0, 3), (0.0, 1.0, 4), (0.0, 1.0, 3)).unwrap()
    }

    #[test]
    fn rejects_asymmetric() {
        let err = MetricField::constant(grid(), &[1.0, 0.5, 0.0, 0.4, 1.0, 0.0, 0.0, 0.0, 1.0], Signature::Riemannian)
            .unwrap_err();
        assert!(matches!(err, Error::NonSymmetric { node: 0, .. }));
    }

    #[test]
    fn singular_node_is_named() {
        let g = grid();
        let target = 17;
        let m = MetricField::from_fn(g.clone(), 3, Signature::Riemannian, |x| {
            let n = g.index(&[
                (x[0] * 2.0).round() as usize,
                (x[1] * 3.0).round() as usize,
                (x[2] * 2.0).round() as usize,
            ]);
            let z = if n == target { 0.0 } else { 1.0 };
            vec![1.0, 0.0, 0.0, 0.0, z, 0.0, 0.0, 0.0, 1.0]
        })
        .unwrap();
        match m.inverse() {
            Err(Error::Singular { node, .. }) => assert_eq!(node, target),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn inverse_and_determinant() {
        let m = MetricField::constant(grid(), &[4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0], Signature::Riemannian).unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(inv.get(5, 0, 0), 0.25);
        assert_eq!(inv.get(5, 1, 1), 0.5);
        let det = m.determinants().unwrap();
        assert!((det[0] - 8.0).abs() < 1e-14);
        assert!((m.condition_numbers()[0] - 4.0).abs() < 1e-12);
    }
}
