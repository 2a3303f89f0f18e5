use rayon::prelude::*;

use super::christoffel::ChristoffelField;
use super::metric::MetricField;
use crate::error::{Error, Result};
use crate::grid::{derivative, hessian_component};

/// Riemann, Ricci, scalar and Einstein curvature at every node.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    dim: usize,
    nodes: usize,
    /// `R^a_{bcd}` stored `[node][a][b][c][d]`.
    riemann: Vec<f64>,
    /// `R_{bd}` stored `[node][b][d]`.
    ricci: Vec<f64>,
    scalar: Vec<f64>,
    /// `G_{bd} = R_{bd} − ½ R g_{bd}`.
    einstein: Vec<f64>,
}

impl CurvatureBundle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn riemann(&self, node: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.riemann[node * n.pow(4) + ((a * n + b) * n + c) * n + d]
    }

    pub fn ricci(&self, node: usize, a: usize, b: usize) -> f64 {
        self.ricci[node * self.dim * self.dim + a * self.dim + b]
    }

    pub fn ricci_scalar(&self) -> &[f64] {
        &self.scalar
    }

    pub fn einstein(&self, node: usize, a: usize, b: usize) -> f64 {
        self.einstein[node * self.dim * self.dim + a * self.dim + b]
    }

    pub fn einstein_data(&self) -> &[f64] {
        &self.einstein
    }

    pub fn max_abs_riemann(&self) -> f64 {
        self.riemann.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Riemann tensor from the connection,
/// `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce}Γ^e_{db} − Γ^a_{de}Γ^e_{cb}`,
/// then Ricci `R_{bd} = R^a_{bad}` (symmetrised), scalar `g^{bd}R_{bd}` and
/// the Einstein tensor.
pub fn curvature(metric: &MetricField, christoffel: &ChristoffelField) -> Result<CurvatureBundle> {
    let grid = metric.grid();
    let d = metric.dim();
    if christoffel.grid() != grid || christoffel.dim() != d {
        return Err(Error::GridMismatch(
            "christoffel field was not computed on this metric's grid".into(),
        ));
    }
    let inverse = metric.inverse()?;

    // ∂_k Γ^a_{bc} from first and second metric derivatives, so boundary
    // nodes keep the order of the one-sided stencils.
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let sym = |a: usize, b: usize| if a <= b { (a, b) } else { (b, a) };
    let pair_index = |a: usize, b: usize| {
        let (a, b) = sym(a, b);
        pairs.iter().position(|&p| p == (a, b)).unwrap()
    };
    let comps: Vec<Vec<f64>> = pairs.iter().map(|&(a, b)| metric.component(a, b)).collect();
    let first: Vec<Vec<f64>> = (0..d * pairs.len())
        .into_par_iter()
        .map(|idx| derivative(grid, &comps[idx % pairs.len()], idx / pairs.len()))
        .collect();
    let second: Vec<Vec<f64>> = (0..pairs.len() * pairs.len())
        .into_par_iter()
        .map(|idx| {
            let (k, l) = pairs[idx / pairs.len()];
            hessian_component(grid, &comps[idx % pairs.len()], k, l)
        })
        .collect();
    let dg_at = |node: usize, k: usize, a: usize, b: usize| first[k * pairs.len() + pair_index(a, b)][node];
    let ddg_at =
        |node: usize, k: usize, l: usize, a: usize, b: usize| second[pair_index(k, l) * pairs.len() + pair_index(a, b)][node];

    let d4 = d.pow(4);
    let mut dgamma = vec![0.0; grid.len() * d4];
    dgamma.par_chunks_mut(d4).enumerate().for_each(|(node, out)| {
        let ginv = |a: usize, b: usize| inverse.get(node, a, b);
        let gam = christoffel.at(node);
        // Γ_{dbc} = g_{da} Γ^a_{bc}
        let mut lower = vec![0.0; d * d * d];
        for e in 0..d {
            for b in 0..d {
                for c in 0..d {
                    lower[(e * d + b) * d + c] = (0..d).map(|a| metric.get(node, e, a) * gam[(a * d + b) * d + c]).sum();
                }
            }
        }
        for k in 0..d {
            // ∂_k g^{ae} = −g^{af} ∂_k g_{fh} g^{he}
            let mut dinv = vec![0.0; d * d];
            for a in 0..d {
                for e in 0..d {
                    let mut s = 0.0;
                    for f in 0..d {
                        for h in 0..d {
                            s += ginv(a, f) * dg_at(node, k, f, h) * ginv(h, e);
                        }
                    }
                    dinv[a * d + e] = -s;
                }
            }
            for b in 0..d {
                for c in 0..d {
                    let dlower: Vec<f64> = (0..d)
                        .map(|e| {
                            0.5 * (ddg_at(node, k, b, e, c) + ddg_at(node, k, c, e, b) - ddg_at(node, k, e, b, c))
                        })
                        .collect();
                    for a in 0..d {
                        let mut s = 0.0;
                        for e in 0..d {
                            s += dinv[a * d + e] * lower[(e * d + b) * d + c] + ginv(a, e) * dlower[e];
                        }
                        out[((k * d + a) * d + b) * d + c] = s;
                    }
                }
            }
        }
    });
    let dg = |node: usize, k: usize, a: usize, b: usize, c: usize| dgamma[node * d4 + ((k * d + a) * d + b) * d + c];

    let nodes = grid.len();
    let mut riemann = vec![0.0; nodes * d4];
    riemann
        .par_chunks_mut(d4)
        .enumerate()
        .for_each(|(node, out)| {
            let gam = christoffel.at(node);
            let g = |a: usize, b: usize, c: usize| gam[(a * d + b) * d + c];
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        for e in 0..d {
                            let mut quad = 0.0;
                            for f in 0..d {
                                quad += g(a, c, f) * g(f, e, b) - g(a, e, f) * g(f, c, b);
                            }
                            out[((a * d + b) * d + c) * d + e] =
                                dg(node, c, a, e, b) - dg(node, e, a, c, b) + quad;
                        }
                    }
                }
            }
        });

    let mut ricci = vec![0.0; nodes * d * d];
    let mut scalar = vec![0.0; nodes];
    let mut einstein = vec![0.0; nodes * d * d];
    ricci
        .par_chunks_mut(d * d)
        .zip(scalar.par_iter_mut())
        .zip(einstein.par_chunks_mut(d * d))
        .enumerate()
        .for_each(|(node, ((ric, sc), ein))| {
            let r = &riemann[node * d4..(node + 1) * d4];
            let rie = |a: usize, b: usize, c: usize, e: usize| r[((a * d + b) * d + c) * d + e];
            let mut raw = vec![0.0; d * d];
            for b in 0..d {
                for e in 0..d {
                    raw[b * d + e] = (0..d).map(|a| rie(a, b, a, e)).sum();
                }
            }
            for b in 0..d {
                for e in 0..d {
                    ric[b * d + e] = 0.5 * (raw[b * d + e] + raw[e * d + b]);
                }
            }
            let mut s = 0.0;
            for b in 0..d {
                for e in 0..d {
                    s += inverse.get(node, b, e) * ric[b * d + e];
                }
            }
            *sc = s;
            for b in 0..d {
                for e in 0..d {
                    ein[b * d + e] = ric[b * d + e] - 0.5 * s * metric.get(node, b, e);
                }
            }
        });

    Ok(CurvatureBundle {
        dim: d,
        nodes,
        riemann,
        ricci,
        scalar,
        einstein,
    })
}

/// Strategy-spacetime metric `N = e^{γ b} G + η`, node by node.
pub fn combined_metric(
    curvature: &CurvatureBundle,
    flat: &MetricField,
    stubbornness_field: &[f64],
    gamma: f64,
) -> Result<MetricField> {
    crate::gff::check_gamma(gamma)?;
    let d = flat.dim();
    let nodes = flat.grid().len();
    if curvature.dim() != d || curvature.nodes() != nodes || stubbornness_field.len() != nodes {
        return Err(Error::GridMismatch(
            "einstein tensor, flat metric and stubbornness field must share one grid".into(),
        ));
    }
    let mut data = Vec::with_capacity(nodes * d * d);
    for node in 0..nodes {
        let w = (gamma * stubbornness_field[node]).exp();
        for a in 0..d {
            for b in 0..d {
                let g = curvature.einstein(node, a, b);
                let eta = flat.get(node, a, b);
                data.push(w * g + eta);
            }
        }
    }
    MetricField::new(flat.grid().clone(), d, flat.signature(), data)
}
