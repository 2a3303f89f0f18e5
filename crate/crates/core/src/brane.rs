//! Discretised 2-brane action: pull-back tensors, the action integral with
//! its constraint term, the ghost action and the Faddeev–Popov determinant.
//!
//! Background indices run over `0..11`. The first three are the world-volume
//! directions and `3..11` the transverse ones. Integrals use the trapezoid
//! rule with pairwise summation in a fixed order.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{christoffel, ChristoffelField, MetricField};
use crate::grid::{derivative, pairwise_sum, GridSpec};

/// Dimension of the background strategy field.
pub const BACKGROUND_DIM: usize = 11;

/// `ε_{ijk}` on indices `0..3`.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Antisymmetric coupling supported on one transverse index triple:
/// `H_{t_i t_j t_k} = scale · ε_{ijk}`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseCoupling {
    pub triple: [usize; 3],
    /// Per-node factor.
    pub scale: Vec<f64>,
}

impl TransverseCoupling {
    /// `H = −ε det⁻¹(h)` on the first three transverse directions.
    pub fn from_metric(h: &MetricField) -> Result<Self> {
        let det = h.determinants()?;
        Ok(TransverseCoupling {
            triple: [3, 4, 5],
            scale: det.iter().map(|d| -1.0 / d).collect(),
        })
    }

    /// Value of `H_{abc}` at `node` for background indices.
    pub fn value(&self, node: usize, a: usize, b: usize, c: usize) -> f64 {
        let pos = |x: usize| self.triple.iter().position(|&t| t == x);
        match (pos(a), pos(b), pos(c)) {
            (Some(i), Some(j), Some(k)) => self.scale[node] * levi_civita(i, j, k),
            _ => 0.0,
        }
    }
}

/// Ghost fields `e^{ab}` (row-major 3×3 per node) and `c^a` (3 per node).
#[derive(Debug, Clone, PartialEq)]
pub struct GhostFields {
    pub e: Vec<f64>,
    pub c: Vec<f64>,
}

/// Everything the action integrand needs, on one rank-3 world-volume grid.
#[derive(Debug, Clone)]
pub struct BraneConfiguration {
    /// World-volume metric `h_{ab}`.
    pub h: MetricField,
    /// Background metric `N_{θν}` (11×11 per node).
    pub background: MetricField,
    /// `χ^θ`, one scalar grid per background direction.
    pub embedding: Vec<Vec<f64>>,
    pub coupling: TransverseCoupling,
    pub ghost: Option<GhostFields>,
    /// Lagrange multiplier `λ` per node.
    pub lambda: Vec<f64>,
    /// Exponent `Ω ∈ (0, 1)`.
    pub omega: f64,
    pub xbar: f64,
    pub q: f64,
    /// Ricci scalar `R̃` per node.
    pub ricci_scalar: Vec<f64>,
    /// Profit weight `π_i b_i` per node.
    pub profit_weight: Vec<f64>,
}

impl BraneConfiguration {
    /// Constant embedding, zero multiplier, no ghosts, `R̃ = 0`, unit profit
    /// weight, `Ω = ½`, `Q = 2`, `x̄ = 0`.
    pub fn new(h: MetricField, background: MetricField) -> Result<Self> {
        let n = h.grid().len();
        let coupling = TransverseCoupling::from_metric(&h)?;
        let cfg = BraneConfiguration {
            embedding: vec![vec![0.0; n]; BACKGROUND_DIM],
            coupling,
            ghost: None,
            lambda: vec![0.0; n],
            omega: 0.5,
            xbar: 0.0,
            q: 2.0,
            ricci_scalar: vec![0.0; n],
            profit_weight: vec![1.0; n],
            h,
            background,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> &GridSpec {
        self.h.grid()
    }

    /// Linear embedding `χ^θ = σ^θ` for the world-volume directions.
    pub fn with_linear_embedding(mut self) -> Self {
        let g = self.h.grid().clone();
        for (t, chi) in self.embedding.iter_mut().enumerate().take(3) {
            *chi = (0..g.len()).map(|n| g.coords(n)[t]).collect();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.h.grid();
        let n = g.len();
        let mut v = Vec::new();
        if g.rank() != 3 || self.h.dim() != 3 {
            v.push("world volume must be a rank-3 grid with a 3×3 metric".to_string());
        }
        if self.background.dim() != BACKGROUND_DIM {
            v.push(format!("background metric must be {BACKGROUND_DIM}×{BACKGROUND_DIM}"));
        }
        if self.background.grid() != g {
            v.push("background metric lives on a different grid".to_string());
        }
        if self.embedding.len() != BACKGROUND_DIM || self.embedding.iter().any(|c| c.len() != n) {
            v.push(format!("embedding needs {BACKGROUND_DIM} fields of {n} nodes"));
        }
        let mut triple = self.coupling.triple;
        triple.sort_unstable();
        if triple[0] < 3 || triple[2] >= BACKGROUND_DIM || triple[0] == triple[1] || triple[1] == triple[2] {
            v.push("coupling triple must be three distinct transverse indices".to_string());
        }
        for (name, len) in [
            ("coupling scale", self.coupling.scale.len()),
            ("lambda", self.lambda.len()),
            ("ricci scalar", self.ricci_scalar.len()),
            ("profit weight", self.profit_weight.len()),
        ] {
            if len != n {
                v.push(format!("{name} has {len} values, grid has {n} nodes"));
            }
        }
        if let Some(gh) = &self.ghost {
            if gh.e.len() != 9 * n || gh.c.len() != 3 * n {
                v.push("ghost fields must hold 9 and 3 components per node".to_string());
            }
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            v.push(format!("omega must lie in (0,1), got {}", self.omega));
        }
        if !self.xbar.is_finite() || !self.q.is_finite() {
            v.push("xbar and Q must be finite".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Violations(v))
        }
    }
}

/// Pull-backs per node: `N̂_{ab}` (9 values) and `Ĥ_{abc}` (27 values).
#[derive(Debug, Clone, PartialEq)]
pub struct Pullbacks {
    pub n_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
}

impl Pullbacks {
    pub fn n_hat(&self, node: usize, a: usize, b: usize) -> f64 {
        self.n_hat[node * 9 + a * 3 + b]
    }

    pub fn h_hat(&self, node: usize, a: usize, b: usize, c: usize) -> f64 {
        self.h_hat[node * 27 + (a * 3 + b) * 3 + c]
    }
}

/// `N̂_{ab} = ∂_a χ^θ ∂_b χ^ν N_{θν}` and
/// `Ĥ_{abc} = ∂_a χ^i ∂_b χ^j ∂_c χ^k H_{ijk}` (transverse `i, j, k`).
/// `H` is totally antisymmetric on three indices, so `Ĥ_{abc} = ε_{abc} Ĥ_{012}`.
pub fn pullbacks(config: &BraneConfiguration) -> Result<Pullbacks> {
    config.validate()?;
    let g = config.grid();
    let n = g.len();
    // jac[t][a] = ∂_a χ^t
    let jac: Vec<Vec<Vec<f64>>> = config
        .embedding
        .par_iter()
        .map(|chi| (0..3).map(|a| derivative(g, chi, a)).collect())
        .collect();
    let active: Vec<usize> = (0..BACKGROUND_DIM)
        .filter(|&t| jac[t].iter().any(|d| d.iter().any(|&v| v != 0.0)))
        .collect();
    let tr = config.coupling.triple;
    let perms = [
        [0, 1, 2],
        [1, 2, 0],
        [2, 0, 1],
        [0, 2, 1],
        [2, 1, 0],
        [1, 0, 2],
    ];

    let mut n_hat = vec![0.0; n * 9];
    let mut h_hat = vec![0.0; n * 27];
    n_hat
        .par_chunks_mut(9)
        .zip(h_hat.par_chunks_mut(27))
        .enumerate()
        .for_each(|(node, (nh, hh))| {
            let j = |t: usize, a: usize| jac[t][a][node];
            for a in 0..3 {
                for b in a..3 {
                    let mut s = 0.0;
                    for &t in &active {
                        for &u in &active {
                            s += j(t, a) * j(u, b) * config.background.get(node, t, u);
                        }
                    }
                    nh[a * 3 + b] = s;
                    nh[b * 3 + a] = s;
                }
            }
            let mut v = 0.0;
            for p in &perms {
                let (x, y, z) = (tr[p[0]], tr[p[1]], tr[p[2]]);
                v += j(x, 0) * j(y, 1) * j(z, 2) * config.coupling.value(node, x, y, z);
            }
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        hh[(a * 3 + b) * 3 + c] = levi_civita(a, b, c) * v;
                    }
                }
            }
        });
    Ok(Pullbacks { n_hat, h_hat })
}

/// Per-node pieces of the bracketed integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTerms {
    /// `√|h|`.
    pub sqrt_h: Vec<f64>,
    /// `h^{ab} N̂_{ab} (πb)^Ω`.
    pub kinetic: Vec<f64>,
    /// `(1/3!√|h|) ε^{abc} Ĥ_{abc} (πb)^{1−Ω}`.
    pub transverse: Vec<f64>,
    /// `Q R̃ x̄`.
    pub curvature: Vec<f64>,
}

impl ActionTerms {
    /// `3 + kinetic − transverse` per node, the part of the integrand that
    /// feeds the effective scalar `F`.
    pub fn brane_part(&self) -> Vec<f64> {
        self.kinetic
            .iter()
            .zip(&self.transverse)
            .map(|(k, t)| 3.0 + k - t)
            .collect()
    }
}

pub fn action_terms(config: &BraneConfiguration) -> Result<ActionTerms> {
    let pb = pullbacks(config)?;
    let g = config.grid();
    let inverse = config.h.inverse()?;
    let det = config.h.determinants()?;
    if let Some(node) = config.profit_weight.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::domain(format!(
            "profit weight π·b = {} at node {node} must be positive for fractional exponents",
            config.profit_weight[node]
        )));
    }
    let n = g.len();
    let om = config.omega;
    let mut sqrt_h = vec![0.0; n];
    let mut kinetic = vec![0.0; n];
    let mut transverse = vec![0.0; n];
    for node in 0..n {
        let sh = det[node].abs().sqrt();
        sqrt_h[node] = sh;
        let w = config.profit_weight[node];
        let mut k = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                k += inverse.get(node, a, b) * pb.n_hat(node, a, b);
            }
        }
        kinetic[node] = k * w.powf(om);
        let mut e = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    e += levi_civita(a, b, c) * pb.h_hat(node, a, b, c);
                }
            }
        }
        transverse[node] = e / (6.0 * sh) * w.powf(1.0 - om);
    }
    let curvature = config
        .ricci_scalar
        .iter()
        .map(|r| config.q * r * config.xbar)
        .collect();
    Ok(ActionTerms {
        sqrt_h,
        kinetic,
        transverse,
        curvature,
    })
}

fn integrate(grid: &GridSpec, values: &[f64], slices: std::ops::RangeInclusive<usize>) -> f64 {
    let (lo, hi) = (*slices.start(), *slices.end());
    let stride = grid.stride(0);
    let h0 = grid.spacing(0);
    let terms: Vec<f64> = (lo * stride..(hi + 1) * stride)
        .map(|node| {
            let i = node / stride;
            let w0 = if i == lo || i == hi { 0.5 * h0 } else { h0 };
            // weight along the remaining axes from the full-grid rule
            let rest = grid.trapezoid_weight(node) / {
                let full_i = i;
                if full_i == 0 || full_i + 1 == grid.axis(0).nodes {
                    0.5 * h0
                } else {
                    h0
                }
            };
            w0 * rest * values[node]
        })
        .collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionReport {
    pub action: f64,
    pub ghost: Option<f64>,
    pub total: f64,
}

/// `½ ∫ √|h| [3 + h N̂ (πb)^Ω − (1/3!√|h|) εĤ (πb)^{1−Ω} − Q R̃ x̄ − λ r] dσ³`
/// over the time slices `slices` (all of them with [`evaluate_action`]).
/// `residual` is the SDE constraint residual `r` per node.
pub fn evaluate_action_slab(
    config: &BraneConfiguration,
    residual: &[f64],
    slices: std::ops::RangeInclusive<usize>,
) -> Result<f64> {
    let g = config.grid();
    if residual.len() != g.len() {
        return Err(Error::GridMismatch(format!(
            "residual has {} values, grid has {} nodes",
            residual.len(),
            g.len()
        )));
    }
    if *slices.end() >= g.axis(0).nodes || slices.start() >= slices.end() {
        return Err(Error::invalid("time slab must span at least two slices of the grid"));
    }
    let t = action_terms(config)?;
    let integrand: Vec<f64> = (0..g.len())
        .map(|n| {
            0.5 * t.sqrt_h[n]
                * (3.0 + t.kinetic[n] - t.transverse[n] - t.curvature[n] - config.lambda[n] * residual[n])
        })
        .collect();
    if let Some(node) = integrand.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: "action integrand".into(),
            location: format!("node {node}"),
        });
    }
    Ok(integrate(g, &integrand, slices))
}

pub fn evaluate_action(config: &BraneConfiguration, residual: &[f64]) -> Result<f64> {
    let last = config.grid().axis(0).nodes - 1;
    evaluate_action_slab(config, residual, 0..=last)
}

/// Action plus the ghost term when ghost fields are present.
pub fn evaluate_with_ghost(config: &BraneConfiguration, residual: &[f64], epsilon: f64) -> Result<ActionReport> {
    let action = evaluate_action(config, residual)?;
    let ghost = match config.ghost {
        Some(_) => Some(ghost_action(config, epsilon)?),
        None => None,
    };
    Ok(ActionReport {
        action,
        ghost,
        total: action + ghost.unwrap_or(0.0),
    })
}

/// Residual `x(s+ds) − x(s) − μ ds − ω dB` per node from a state field `x`,
/// drift `μ` and noise increment `ω dB` on the grid. The last time slice has
/// no successor and gets residual 0.
pub fn sde_residual(grid: &GridSpec, x: &[f64], drift: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    if x.len() != n || drift.len() != n || noise.len() != n {
        return Err(Error::GridMismatch("state, drift and noise must cover the grid".into()));
    }
    let stride = grid.stride(0);
    let ds = grid.spacing(0);
    Ok((0..n)
        .map(|node| {
            if node + stride >= n {
                0.0
            } else {
                x[node + stride] - x[node] - drift[node] * ds - noise[node]
            }
        })
        .collect())
}

/// `∇_a c^b = ∂_a c^b + Γ^b_{ak} c^k`, stored `[node][a][b]`.
pub fn ghost_gradient(grid: &GridSpec, gamma: &ChristoffelField, c: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let comps: Vec<Vec<f64>> = (0..3).map(|b| (0..n).map(|node| c[node * 3 + b]).collect()).collect();
    let mut out = vec![0.0; n * 9];
    for a in 0..3 {
        for b in 0..3 {
            let d = derivative(grid, &comps[b], a);
            for node in 0..n {
                let mut s = d[node];
                for k in 0..3 {
                    s += gamma.get(node, b, a, k) * comps[k][node];
                }
                out[node * 9 + a * 3 + b] = s;
            }
        }
    }
    out
}

/// `e^{ab} h_{bc} ∇_a c^c` per node.
pub fn ghost_density(config: &BraneConfiguration) -> Result<Vec<f64>> {
    config.validate()?;
    let gh = config
        .ghost
        .as_ref()
        .ok_or_else(|| Error::invalid("ghost term requested without ghost fields"))?;
    let g = config.grid();
    let gamma = christoffel(&config.h)?;
    let grad = ghost_gradient(g, &gamma, &gh.c);
    Ok((0..g.len())
        .map(|node| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    let e = gh.e[node * 9 + a * 3 + b];
                    if e == 0.0 {
                        continue;
                    }
                    for c in 0..3 {
                        s += e * config.h.get(node, b, c) * grad[node * 9 + a * 3 + c];
                    }
                }
            }
            s
        })
        .collect())
}

/// `(1/2πε) ∫ √|h| e^{ab} h_{bc} ∇_a c^c dσ³`.
pub fn ghost_action(config: &BraneConfiguration, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let density = ghost_density(config)?;
    let g = config.grid();
    let det = config.h.determinants()?;
    let terms: Vec<f64> = (0..g.len())
        .map(|node| g.trapezoid_weight(node) * det[node].abs().sqrt() * density[node])
        .collect();
    Ok(pairwise_sum(&terms) / (2.0 * PI * epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpDeterminant {
    /// `ln |det|`, `−∞` when singular.
    pub log_abs_det: f64,
    pub sign: f64,
    pub singular: bool,
}

/// Log-determinant by LU. A pivot below `1e-12 · max|A|` marks the operator
/// singular.
pub fn fp_log_determinant(op: &DMatrix<f64>) -> Result<FpDeterminant> {
    if op.nrows() != op.ncols() || op.nrows() == 0 {
        return Err(Error::invalid("operator must be a non-empty square matrix"));
    }
    let scale = op.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lu = op.clone().lu();
    let u = lu.u();
    let mut log = 0.0;
    let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for p in u.diagonal().iter() {
        if p.abs() <= 1e-12 * scale || scale == 0.0 {
            return Ok(FpDeterminant {
                log_abs_det: f64::NEG_INFINITY,
                sign: 0.0,
                singular: true,
            });
        }
        log += p.abs().ln();
        if *p < 0.0 {
            sign = -sign;
        }
    }
    Ok(FpDeterminant {
        log_abs_det: log,
        sign,
        singular: false,
    })
}

/// Largest number of ghost degrees of freedom assembled densely.
pub const MAX_FP_DOF: usize = 3000;

/// Discrete covariant gradient `c ↦ ∇_a c^b` on interior nodes (Dirichlet
/// `c = 0` on the boundary), as a `9n × 3n` matrix. Forward differences;
/// the central stencil has a checkerboard null mode.
pub fn ghost_operator(config: &BraneConfiguration) -> Result<DMatrix<f64>> {
    config.validate()?;
    let g = config.grid();
    let interior: Vec<usize> = (0..g.len()).filter(|&n| g.is_interior(n)).collect();
    let dof = 3 * interior.len();
    if dof == 0 {
        return Err(Error::invalid("grid has no interior nodes"));
    }
    if dof > MAX_FP_DOF {
        return Err(Error::invalid(format!(
            "{dof} ghost degrees of freedom exceed the dense limit {MAX_FP_DOF}"
        )));
    }
    let mut col_of = vec![usize::MAX; g.len()];
    for (i, &n) in interior.iter().enumerate() {
        col_of[n] = i;
    }
    let gamma = christoffel(&config.h)?;
    let mut a_mat = DMatrix::zeros(9 * interior.len(), dof);
    for (row_node, &node) in interior.iter().enumerate() {
        for a in 0..3 {
            let stride = g.stride(a);
            let inv_h = 1.0 / g.spacing(a);
            for b in 0..3 {
                let row = row_node * 9 + a * 3 + b;
                for (nb, w) in [(node + stride, inv_h), (node, -inv_h)] {
                    if col_of[nb] != usize::MAX {
                        a_mat[(row, col_of[nb] * 3 + b)] += w;
                    }
                }
                for k in 0..3 {
                    a_mat[(row, row_node * 3 + k)] += gamma.get(node, b, a, k);
                }
            }
        }
    }
    Ok(a_mat)
}

/// `ln Δ_FP = ½ ln det(Aᵀ A)` for the ghost operator `A`.
pub fn fp_determinant(config: &BraneConfiguration) -> Result<FpDeterminant> {
    let a = ghost_operator(config)?;
    let p = a.transpose() * &a;
    let mut d = fp_log_determinant(&p)?;
    d.log_abs_det *= 0.5;
    d.sign = if d.singular { 0.0 } else { 1.0 };
    Ok(d)
}
