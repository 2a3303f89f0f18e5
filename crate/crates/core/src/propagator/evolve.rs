use num_complex::Complex64;
use rayon::prelude::*;

use super::kernel::{KernelMode, KernelSpec};
use crate::error::{Error, Result};
use crate::geometry::{ChristoffelField, MetricField};
use crate::grid::GridSpec;

/// Complex wave function on the two real strategy dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
    /// Time stamp.
    pub s: f64,
    norm: f64,
}

fn l2_norm(grid: &GridSpec, values: &[Complex64]) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    (crate::grid::pairwise_sum(&sq) * grid.cell_volume()).sqrt()
}

impl WaveFunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, s: f64) -> Result<Self> {
        if grid.rank() != 2 {
            return Err(Error::invalid("wave functions live on a rank-2 grid"));
        }
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                term: "wave function".into(),
                location: format!("node {i}"),
            });
        }
        let norm = l2_norm(&grid, &values);
        if !(norm > 0.0) {
            return Err(Error::invalid("wave function has zero norm"));
        }
        Ok(WaveFunction { grid, values, s, norm })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|n| {
                let x = grid.coords(n);
                f(x[0], x[1])
            })
            .collect();
        Self::new(grid, values, 0.0)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `‖Ψ‖₂` with the cell-volume weight.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn normalized(mut self) -> Self {
        let k = 1.0 / self.norm;
        self.values.iter_mut().for_each(|v| *v *= k);
        self.norm = l2_norm(&self.grid, &self.values);
        self
    }

    /// `√(⟨(x_k − ⟨x_k⟩)²⟩)` under `|Ψ|²`.
    pub fn width(&self, k: usize) -> f64 {
        let w: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let x: Vec<f64> = (0..self.grid.len()).map(|n| self.grid.coords(n)[k]).collect();
        let total = crate::grid::pairwise_sum(&w);
        let m1: Vec<f64> = w.iter().zip(&x).map(|(w, x)| w * x).collect();
        let mean = crate::grid::pairwise_sum(&m1) / total;
        let m2: Vec<f64> = w.iter().zip(&x).map(|(w, x)| w * (x - mean).powi(2)).collect();
        (crate::grid::pairwise_sum(&m2) / total).sqrt()
    }

    /// `⟨Ψ, Φ⟩` with the cell-volume weight.
    pub fn inner(&self, other: &WaveFunction) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a.conj() * b;
        }
        acc * self.grid.cell_volume()
    }
}

/// Per-node coefficients of the discrete Laplace–Beltrami operator on
/// interior nodes: `a_k = h^{kk}/Δ_k²`, `b_k = (h^{bc}Γ^k_{bc})/(2Δ_k)` and
/// the mixed weight `2h^{01}/(4Δ_0Δ_1)`.
struct Operator {
    n0: usize,
    n1: usize,
    a: [Vec<f64>; 2],
    b: [Vec<f64>; 2],
    mixed: Vec<f64>,
}

impl Operator {
    fn new(grid: &GridSpec, metric: &MetricField, chr: &ChristoffelField) -> Result<Self> {
        if metric.grid() != grid || chr.grid() != grid || metric.dim() != 2 || chr.dim() != 2 {
            return Err(Error::GridMismatch(
                "metric and connection must be 2×2 fields on the wave-function grid".into(),
            ));
        }
        let inverse = metric.inverse()?;
        let contracted = chr.contracted(&inverse);
        let (h0, h1) = (grid.spacing(0), grid.spacing(1));
        let n = grid.len();
        let mut a = [vec![0.0; n], vec![0.0; n]];
        let mut b = [vec![0.0; n], vec![0.0; n]];
        let mut mixed = vec![0.0; n];
        for node in 0..n {
            for (k, h) in [(0, h0), (1, h1)] {
                a[k][node] = inverse.get(node, k, k) / (h * h);
                b[k][node] = contracted[node][k] / (2.0 * h);
            }
            mixed[node] = 2.0 * inverse.get(node, 0, 1) / (4.0 * h0 * h1);
        }
        Ok(Operator {
            n0: grid.axis(0).nodes,
            n1: grid.axis(1).nodes,
            a,
            b,
            mixed,
        })
    }

    fn interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.n0 && j + 1 < self.n1
    }

    /// `L_k ψ` on interior nodes, zero on the boundary.
    fn axis(&self, k: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let stride = if k == 0 { self.n1 } else { 1 };
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        out.par_chunks_mut(self.n1).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                if !self.interior(i, j) {
                    continue;
                }
                let n = i * self.n1 + j;
                let (a, b) = (self.a[k][n], self.b[k][n]);
                *o = psi[n + stride] * (a - b) - psi[n] * (2.0 * a) + psi[n - stride] * (a + b);
            }
        });
        out
    }

    fn cross(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let s = self.n1;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        out.par_chunks_mut(self.n1).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                if !self.interior(i, j) {
                    continue;
                }
                let n = i * s + j;
                let m = self.mixed[n];
                if m != 0.0 {
                    *o = (psi[n + s + 1] - psi[n + s - 1] - psi[n - s + 1] + psi[n - s - 1]) * m;
                }
            }
        });
        out
    }

    fn full(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let l0 = self.axis(0, psi);
        let l1 = self.axis(1, psi);
        let lm = self.cross(psi);
        l0.iter().zip(&l1).zip(&lm).map(|((a, b), c)| a + b + c).collect()
    }

    /// Solves `(I − ½ g L_k) y = rhs` along every interior line of axis `k`.
    fn solve_axis(&self, k: usize, g: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
        let (lines, len, stride) = if k == 0 {
            (self.n1, self.n0, self.n1)
        } else {
            (self.n0, self.n1, 1)
        };
        let line_start = |l: usize| if k == 0 { l } else { l * self.n1 };
        let half = g * 0.5;
        let solved: Vec<Vec<Complex64>> = (1..lines.saturating_sub(1))
            .into_par_iter()
            .map(|l| {
                let m = len - 2;
                let mut sub = vec![Complex64::new(0.0, 0.0); m];
                let mut diag = vec![Complex64::new(0.0, 0.0); m];
                let mut sup = vec![Complex64::new(0.0, 0.0); m];
                let mut d = vec![Complex64::new(0.0, 0.0); m];
                for t in 0..m {
                    let n = line_start(l) + (t + 1) * stride;
                    let (a, b) = (self.a[k][n], self.b[k][n]);
                    sub[t] = -half * (a + b);
                    diag[t] = Complex64::new(1.0, 0.0) + half * (2.0 * a);
                    sup[t] = -half * (a - b);
                    d[t] = rhs[n];
                }
                thomas(&sub, &diag, &sup, &mut d);
                d
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); rhs.len()];
        for (l, line) in (1..lines.saturating_sub(1)).zip(solved) {
            for (t, v) in line.into_iter().enumerate() {
                out[line_start(l) + (t + 1) * stride] = v;
            }
        }
        out
    }
}

fn thomas(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64], d: &mut [Complex64]) {
    let m = d.len();
    if m == 0 {
        return;
    }
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    d[0] /= beta;
    for t in 1..m {
        beta = diag[t] - sub[t] * c[t - 1];
        c[t] = sup[t] / beta;
        d[t] = (d[t] - sub[t] * d[t - 1]) / beta;
    }
    for t in (0..m - 1).rev() {
        let next = d[t + 1];
        d[t] -= c[t] * next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub psi: WaveFunction,
    /// `ε F⁰ / (M Δ²)` with the finest spacing.
    pub cfl_ratio: f64,
    pub warning: Option<String>,
    /// Largest relative norm change over a single step.
    pub max_norm_drift: f64,
}

/// Steps `∂_s Ψ = (ι/2M) F⁰ D_a D^a Ψ` forward `steps` times with step `ε`
/// (`ι` replaced by 1 in Wick mode). Douglas alternating-direction
/// Crank–Nicolson: the axis operators are implicit, the mixed derivative
/// explicit. Ψ is held at zero on the boundary.
pub fn evolve(
    psi: &WaveFunction,
    spec: &KernelSpec,
    metric: &MetricField,
    chr: &ChristoffelField,
    steps: usize,
) -> Result<Evolution> {
    spec.validate()?;
    let grid = psi.grid();
    let op = Operator::new(grid, metric, chr)?;
    let unit = match spec.mode {
        KernelMode::Lorentzian => Complex64::i(),
        KernelMode::Wick => Complex64::new(1.0, 0.0),
    };
    let g = unit * (spec.f0 / (2.0 * spec.mass) * spec.epsilon);
    let dmin = grid.spacing(0).min(grid.spacing(1));
    let cfl_ratio = spec.epsilon * spec.f0.abs() / (spec.mass * dmin * dmin);
    let warning = (cfl_ratio > 1.0).then(|| {
        format!("step ratio εF⁰/(MΔ²) = {cfl_ratio:.3} exceeds 1; accuracy of the scheme degrades")
    });

    let mut cur: Vec<Complex64> = psi.values().to_vec();
    for (n, v) in cur.iter_mut().enumerate() {
        let ij = grid.multi_index(n);
        if !op.interior(ij[0], ij[1]) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    let mut norm = l2_norm(grid, &cur);
    let mut max_norm_drift: f64 = 0.0;
    for step in 0..steps {
        if g == Complex64::new(0.0, 0.0) {
            break;
        }
        let l0 = op.axis(0, &cur);
        let l1 = op.axis(1, &cur);
        let lm = op.cross(&cur);
        let y0: Vec<Complex64> = (0..cur.len()).map(|n| cur[n] + g * (l0[n] + l1[n] + lm[n])).collect();
        let r1: Vec<Complex64> = (0..cur.len()).map(|n| y0[n] - g * 0.5 * l0[n]).collect();
        let y1 = op.solve_axis(0, g, &r1);
        let r2: Vec<Complex64> = (0..cur.len()).map(|n| y1[n] - g * 0.5 * l1[n]).collect();
        cur = op.solve_axis(1, g, &r2);
        if let Some(n) = cur.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                term: "wave function".into(),
                location: format!("step {step}, node {n}"),
            });
        }
        let next = l2_norm(grid, &cur);
        max_norm_drift = max_norm_drift.max((next - norm).abs() / norm);
        norm = next;
    }
    let s = psi.s + steps as f64 * spec.epsilon;
    let mut out = WaveFunction::new(grid.clone(), cur, s)?;
    out.s = s;
    Ok(Evolution {
        psi: out,
        cfl_ratio,
        warning,
        max_norm_drift,
    })
}

/// `‖D_a D^a Ψ‖₂` with the same interior stencils as [`evolve`].
pub fn laplacian_norm(psi: &WaveFunction, metric: &MetricField, chr: &ChristoffelField) -> Result<f64> {
    let op = Operator::new(psi.grid(), metric, chr)?;
    Ok(l2_norm(psi.grid(), &op.full(psi.values())))
}
