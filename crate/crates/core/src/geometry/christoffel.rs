use rayon::prelude::*;

use super::metric::MetricField;
use crate::error::{Error, Result};
use crate::grid::{derivative, GridSpec};

/// Christoffel symbols of the second kind, `Γ^a_{bc}` at every node,
/// stored `[node][a][b][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    grid: GridSpec,
    dim: usize,
    data: Vec<f64>,
}

impl ChristoffelField {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        let data = vec![0.0; grid.len() * dim * dim * dim];
        ChristoffelField { grid, dim, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.dim.pow(3);
        &self.data[node * n..(node + 1) * n]
    }

    pub fn get(&self, node: usize, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim;
        self.data[node * d * d * d + (a * d + b) * d + c]
    }

    /// Values of `Γ^a_{bc}` at every node.
    pub fn component(&self, a: usize, b: usize, c: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|n| self.get(n, a, b, c)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Contracted symbol `h^{bc} Γ^a_{bc}` per node, given the inverse metric.
    pub fn contracted(&self, inverse: &MetricField) -> Vec<Vec<f64>> {
        let d = self.dim;
        (0..self.grid.len())
            .map(|node| {
                (0..d)
                    .map(|a| {
                        let mut s = 0.0;
                        for b in 0..d {
                            for c in 0..d {
                                s += inverse.get(node, b, c) * self.get(node, a, b, c);
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }
}

/// `Γ^a_{bc} = ½ h^{ad}(∂_b h_{dc} + ∂_c h_{db} − ∂_d h_{bc})` with the
/// grid's finite-difference stencils. Only `b ≤ c` is evaluated; the mirror
/// entry is copied so lower-index symmetry holds bit for bit.
pub fn christoffel(metric: &MetricField) -> Result<ChristoffelField> {
    let grid = metric.grid();
    let d = metric.dim();
    if d != grid.rank() {
        return Err(Error::GridMismatch(format!(
            "metric dimension {d} does not match grid rank {}",
            grid.rank()
        )));
    }
    let inverse = metric.inverse()?;

    // dh[(k * d + a) * d + b] = ∂_k h_ab over the grid.
    let dh: Vec<Vec<f64>> = (0..d * d * d)
        .into_par_iter()
        .map(|idx| {
            let k = idx / (d * d);
            let a = (idx / d) % d;
            let b = idx % d;
            derivative(grid, &metric.component(a, b), k)
        })
        .collect();
    let partial = |node: usize, k: usize, a: usize, b: usize| dh[(k * d + a) * d + b][node];

    let mut data = vec![0.0; grid.len() * d * d * d];
    data.par_chunks_mut(d * d * d)
        .enumerate()
        .for_each(|(node, out)| {
            for a in 0..d {
                for b in 0..d {
                    for c in b..d {
                        let mut s = 0.0;
                        for e in 0..d {
                            let lowered = partial(node, b, e, c) + partial(node, c, e, b)
                                - partial(node, e, b, c);
                            s += inverse.get(node, a, e) * lowered;
                        }
                        let v = 0.5 * s;
                        out[(a * d + b) * d + c] = v;
                        out[(a * d + c) * d + b] = v;
                    }
                }
            }
        });
    Ok(ChristoffelField {
        grid: grid.clone(),
        dim: d,
        data,
    })
}
