use std::f64::consts::PI;

use serde::Serialize;

use crate::brane::ActionTerms;
use crate::error::{Error, Result};
use crate::geometry::{ChristoffelField, MetricField};
use crate::grid::{derivative, GridSpec};

/// `ĥ^{ab} ĥ_{ab}` for the eleven-dimensional background.
pub const BACKGROUND_TRACE: f64 = 11.0;

/// Covariant tensor `g_{k_1…k_p}` of rank `p ≤ 2` on a grid, components
/// row-major per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: GridSpec,
    dim: usize,
    rank: usize,
    data: Vec<f64>,
}

impl TensorField {
    pub fn new(grid: GridSpec, dim: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if rank > 2 {
            return Err(Error::invalid(format!("tensor rank {rank} exceeds 2")));
        }
        let per = dim.pow(rank as u32);
        if data.len() != grid.len() * per {
            return Err(Error::GridMismatch(format!(
                "tensor needs {} values, got {}",
                grid.len() * per,
                data.len()
            )));
        }
        Ok(TensorField { grid, dim, rank, data })
    }

    pub fn scalar(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let d = grid.rank();
        Self::new(grid, d, 0, values)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn components(&self) -> usize {
        self.dim.pow(self.rank as u32)
    }

    pub fn get(&self, node: usize, comp: usize) -> f64 {
        self.data[node * self.components() + comp]
    }

    fn component_grid(&self, comp: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|n| self.get(n, comp)).collect()
    }
}

fn split(comp: usize, dim: usize, rank: usize) -> [usize; 2] {
    match rank {
        0 => [0, 0],
        1 => [comp, 0],
        _ => [comp / dim, comp % dim],
    }
}

fn join(idx: [usize; 2], dim: usize, rank: usize) -> usize {
    match rank {
        0 => 0,
        1 => idx[0],
        _ => idx[0] * dim + idx[1],
    }
}

/// Potential of the parallel-displaced strategy tensor `g`:
///
/// `V = Q R̃ x̄ − g − g_{;ν} − ½ Σ_v h^{ab}(∂_a Γ^k_{b k_v} + Γ^m_{b k_v} Γ^k_{a m}) g_{…k…}
///      − ½ Σ_{v≠w} h^{ab} Γ^k_{a k_v} Γ^m_{b k_w} g_{…k…m…}`
///
/// Every tensor-valued term is reduced to a scalar by summing its
/// components, and `g_{;ν}` is summed over `ν`.
pub fn potential_v(
    g: &TensorField,
    metric: &MetricField,
    chr: &ChristoffelField,
    q: f64,
    rtilde: &[f64],
    xbar: f64,
) -> Result<Vec<f64>> {
    let grid = metric.grid();
    let d = metric.dim();
    if &g.grid != grid || chr.grid() != grid || chr.dim() != d || g.dim != d || d != grid.rank() {
        return Err(Error::GridMismatch("tensor, metric and connection must share one grid".into()));
    }
    if rtilde.len() != grid.len() {
        return Err(Error::GridMismatch("Ricci scalar does not cover the grid".into()));
    }
    let n = grid.len();
    let p = g.rank;
    let comps = g.components();
    let inverse = metric.inverse()?;

    let mut v: Vec<f64> = rtilde.iter().map(|r| q * r * xbar).collect();
    for (node, out) in v.iter_mut().enumerate() {
        for c in 0..comps {
            *out -= g.get(node, c);
        }
    }

    // ∇_ν g_{k…} = ∂_ν g_{k…} − Σ_v Γ^m_{ν k_v} g_{…m…}
    for c in 0..comps {
        let gc = g.component_grid(c);
        for nu in 0..d {
            let dg = derivative(grid, &gc, nu);
            for node in 0..n {
                v[node] -= dg[node];
            }
        }
    }
    if p == 0 {
        return Ok(v);
    }
    for node in 0..n {
        let mut s = 0.0;
        for c in 0..comps {
            let idx = split(c, d, p);
            for nu in 0..d {
                for slot in 0..p {
                    for m in 0..d {
                        let mut j = idx;
                        j[slot] = m;
                        s += chr.get(node, m, nu, idx[slot]) * g.get(node, join(j, d, p));
                    }
                }
            }
        }
        v[node] += s;
    }

    // C^k_{m} = h^{ab}(∂_a Γ^k_{bm} + Γ^l_{bm} Γ^k_{al})
    let mut dgamma = vec![0.0; n * d * d * d * d];
    let at = |node: usize, a: usize, k: usize, b: usize, m: usize| (((node * d + a) * d + k) * d + b) * d + m;
    for k in 0..d {
        for b in 0..d {
            for m in 0..d {
                let comp = chr.component(k, b, m);
                for a in 0..d {
                    let der = derivative(grid, &comp, a);
                    for node in 0..n {
                        dgamma[at(node, a, k, b, m)] = der[node];
                    }
                }
            }
        }
    }
    for node in 0..n {
        let mut cm = vec![0.0; d * d];
        for k in 0..d {
            for m in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        let hab = inverse.get(node, a, b);
                        if hab == 0.0 {
                            continue;
                        }
                        let mut t = dgamma[at(node, a, k, b, m)];
                        for l in 0..d {
                            t += chr.get(node, l, b, m) * chr.get(node, k, a, l);
                        }
                        s += hab * t;
                    }
                }
                cm[k * d + m] = s;
            }
        }
        let mut single = 0.0;
        let mut double = 0.0;
        for c in 0..comps {
            let idx = split(c, d, p);
            for slot in 0..p {
                for k in 0..d {
                    let mut j = idx;
                    j[slot] = k;
                    single += cm[k * d + idx[slot]] * g.get(node, join(j, d, p));
                }
            }
            if p == 2 {
                for (sv, sw) in [(0usize, 1usize), (1, 0)] {
                    for k in 0..d {
                        for m in 0..d {
                            let mut w = 0.0;
                            for a in 0..d {
                                for b in 0..d {
                                    w += inverse.get(node, a, b)
                                        * chr.get(node, k, a, idx[sv])
                                        * chr.get(node, m, b, idx[sw]);
                                }
                            }
                            let mut j = idx;
                            j[sv] = k;
                            j[sw] = m;
                            double += w * g.get(node, join(j, d, p));
                        }
                    }
                }
            }
        }
        v[node] -= 0.5 * single + 0.5 * double;
    }
    Ok(v)
}

/// Right-hand side of the `F` equation per node:
/// `3 + h N̂ (πb)^Ω − (1/3!√h) εĤ (πb)^{1−Ω} + e∇c/(πε) − V`.
pub fn assemble_rhs(terms: &ActionTerms, ghost_density: Option<&[f64]>, epsilon: f64, v: &[f64]) -> Result<Vec<f64>> {
    let base = terms.brane_part();
    if v.len() != base.len() || ghost_density.is_some_and(|g| g.len() != base.len()) {
        return Err(Error::GridMismatch("potential and ghost density must match the action grid".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let out: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, b)| b + ghost_density.map_or(0.0, |g| g[i] / (PI * epsilon)) - v[i])
        .collect();
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            term: "F right-hand side".into(),
            location: format!("node {i}"),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveScalar {
    pub values: Vec<f64>,
    /// `F` fails to increase strictly along the time axis somewhere.
    pub monotonicity_flag: bool,
}

/// `F = RHS / ĥ^{ab}ĥ_{ab}` with a flag when `F` is not strictly increasing
/// along axis 0.
pub fn effective_scalar_f(grid: &GridSpec, rhs: &[f64]) -> Result<EffectiveScalar> {
    if rhs.len() != grid.len() {
        return Err(Error::GridMismatch("right-hand side does not cover the grid".into()));
    }
    let values: Vec<f64> = rhs.iter().map(|r| r / BACKGROUND_TRACE).collect();
    let stride = grid.stride(0);
    let monotonicity_flag = (0..grid.len().saturating_sub(stride)).any(|n| values[n + stride] <= values[n]);
    Ok(EffectiveScalar {
        values,
        monotonicity_flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{christoffel, sphere_metric};

    fn plane() -> GridSpec {
        GridSpec::new(vec![crate::grid::Axis::new(0.0, 1.0, 9), crate::grid::Axis::new(0.0, 2.0, 7)]).unwrap()
    }

    #[test]
    fn zero_tensor_zero_potential() {
        let g = plane();
        let m = MetricField::flat(g.clone());
        let c = christoffel(&m).unwrap();
        let t = TensorField::new(g.clone(), 2, 2, vec![0.0; g.len() * 4]).unwrap();
        let v = potential_v(&t, &m, &c, 2.0, &vec![0.0; g.len()], 0.7).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_scalar_on_flat_metric() {
        let g = plane();
        let m = MetricField::flat(g.clone());
        let c = christoffel(&m).unwrap();
        let t = TensorField::scalar(g.clone(), vec![1.75; g.len()]).unwrap();
        let v = potential_v(&t, &m, &c, 2.0, &vec![0.0; g.len()], 0.5).unwrap();
        assert!(v.iter().all(|&x| (x + 1.75).abs() < 1e-14));
    }

    #[test]
    fn curvature_product_alone() {
        let g = plane();
        let m = MetricField::flat(g.clone());
        let c = christoffel(&m).unwrap();
        let t = TensorField::scalar(g.clone(), vec![0.0; g.len()]).unwrap();
        let v = potential_v(&t, &m, &c, 2.0, &vec![1.0; g.len()], 0.5).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn rank_three_rejected() {
        let g = plane();
        assert!(TensorField::new(g.clone(), 2, 3, vec![0.0; g.len() * 8]).is_err());
    }

    #[test]
    fn covector_on_sphere_is_finite() {
        let m = sphere_metric((0.5, 2.5), 3.0, 17).unwrap();
        let g = m.grid().clone();
        let c = christoffel(&m).unwrap();
        let t = TensorField::new(g.clone(), 2, 1, (0..g.len() * 2).map(|i| (i as f64 * 0.1).cos()).collect()).unwrap();
        let v = potential_v(&t, &m, &c, 1.0, &vec![2.0; g.len()], 0.3).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn f_examples() {
        let g = GridSpec::world_volume((0.0, 1.0, 5), (0.0, 1.0, 3), (0.0, 1.0, 3)).unwrap();
        let f = effective_scalar_f(&g, &vec![11.0; g.len()]).unwrap();
        assert!(f.values.iter().all(|&x| x == 1.0));
        assert!(f.monotonicity_flag);
        let f = effective_scalar_f(&g, &vec![0.0; g.len()]).unwrap();
        assert!(f.values.iter().all(|&x| x == 0.0) && f.monotonicity_flag);
        let rhs: Vec<f64> = (0..g.len()).map(|n| 2.0 + 3.0 * g.coords(n)[0]).collect();
        let f = effective_scalar_f(&g, &rhs).unwrap();
        assert!(!f.monotonicity_flag);
        for (x, r) in f.values.iter().zip(&rhs) {
            assert_eq!(*x, r / 11.0);
        }
    }
}
