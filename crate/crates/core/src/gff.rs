//! Discrete Gaussian free field for the stubbornness distribution, the
//! `γ ↦ Q` stubbornness measure and the conformal factor `e^{γ b}`.
//!
//! Sampling is exact in finite dimension: the Dirichlet graph Laplacian on
//! the interior nodes is diagonalised by products of sine modes, and each
//! mode gets an independent Gaussian coefficient of variance `2π / λ`. The
//! resulting field has covariance `2π L⁻¹`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// `γ` at which the strategy spacetime behaves as a Brownian surface.
pub const BROWNIAN_SURFACE_GAMMA: f64 = 1.632_993_161_855_452; // √(8/3)

/// Largest `γ b` accepted before `e^{γ b}` is treated as an overflow.
pub const MAX_EXPONENT: f64 = 700.0;

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::domain(format!("gamma must lie in (0,2], got {gamma}")));
    }
    Ok(())
}

/// `Q = 2/γ + γ/2`. Decreasing on `(0, 2]` with minimum `Q = 2` at `γ = 2`.
pub fn stubbornness_measure(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(2.0 / gamma + gamma / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StubbornnessRegime {
    /// `γ = 2`, `Q = 2`.
    TooStubborn,
    /// `γ = √(8/3)`.
    BrownianSurface,
    Intermediate,
}

pub fn regime(gamma: f64) -> Result<StubbornnessRegime> {
    check_gamma(gamma)?;
    Ok(if gamma == 2.0 {
        StubbornnessRegime::TooStubborn
    } else if (gamma - BROWNIAN_SURFACE_GAMMA).abs() < 1e-12 {
        StubbornnessRegime::BrownianSurface
    } else {
        StubbornnessRegime::Intermediate
    })
}

/// Element-wise `e^{γ b}`.
pub fn conformal_factor(b: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    b.iter()
        .enumerate()
        .map(|(node, &v)| {
            let e = gamma * v;
            if e > MAX_EXPONENT || !e.is_finite() {
                Err(Error::Overflow(format!(
                    "conformal factor exponent γ·b = {e} at node {node}"
                )))
            } else {
                Ok(e.exp())
            }
        })
        .collect()
}

/// Seeded sampler for a discrete GFF on an `nx × ny` node grid with zero
/// boundary. One sampler owns one random stream; concurrent sampling needs
/// one sampler per task.
#[derive(Debug, Clone)]
pub struct GffSampler {
    nx: usize,
    ny: usize,
    basis_x: Vec<f64>,
    basis_y: Vec<f64>,
    mode_scale: Vec<f64>,
    rng: ChaCha8Rng,
}

fn sine_basis(m: usize) -> (Vec<f64>, Vec<f64>) {
    let norm = (2.0 / (m as f64 + 1.0)).sqrt();
    let mut basis = vec![0.0; m * m];
    let mut eig = vec![0.0; m];
    for k in 0..m {
        let arg = PI * (k + 1) as f64 / (m as f64 + 1.0);
        eig[k] = 2.0 - 2.0 * arg.cos();
        for i in 0..m {
            basis[i * m + k] = norm * (arg * (i + 1) as f64).sin();
        }
    }
    (basis, eig)
}

impl GffSampler {
    pub fn new(nx: usize, ny: usize, seed: u64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::invalid(format!(
                "GFF grid must be at least 4×4, got {nx}×{ny}"
            )));
        }
        let (mx, my) = (nx - 2, ny - 2);
        let (basis_x, eig_x) = sine_basis(mx);
        let (basis_y, eig_y) = sine_basis(my);
        let mut mode_scale = vec![0.0; mx * my];
        for k in 0..mx {
            for l in 0..my {
                mode_scale[k * my + l] = (2.0 * PI / (eig_x[k] + eig_y[l])).sqrt();
            }
        }
        Ok(GffSampler {
            nx,
            ny,
            basis_x,
            basis_y,
            mode_scale,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// One realisation, row-major `nx × ny`, boundary rows and columns zero.
    pub fn sample(&mut self) -> Vec<f64> {
        let (mx, my) = (self.nx - 2, self.ny - 2);
        let coeff: Vec<f64> = self
            .mode_scale
            .iter()
            .map(|s| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                s * z
            })
            .collect();
        // tmp = coeff · Syᵀ  (mx × my)
        let mut tmp = vec![0.0; mx * my];
        for k in 0..mx {
            for j in 0..my {
                let mut s = 0.0;
                for l in 0..my {
                    s += coeff[k * my + l] * self.basis_y[j * my + l];
                }
                tmp[k * my + j] = s;
            }
        }
        let mut out = vec![0.0; self.nx * self.ny];
        for i in 0..mx {
            for j in 0..my {
                let mut s = 0.0;
                for k in 0..mx {
                    s += self.basis_x[i * mx + k] * tmp[k * my + j];
                }
                out[(i + 1) * self.ny + (j + 1)] = s;
            }
        }
        out
    }
}

/// Square `grid_size × grid_size` GFF sample, reproducible per seed.
pub fn sample_gff(grid_size: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(GffSampler::new(grid_size, grid_size, seed)?.sample())
}

/// A sampled stubbornness distribution with its derived quantities.
#[derive(Debug, Clone)]
pub struct StubbornnessField {
    pub gamma: f64,
    pub q: f64,
    pub field: Vec<f64>,
    pub factor: Vec<f64>,
    pub shape: (usize, usize),
}

impl StubbornnessField {
    pub fn sample(nx: usize, ny: usize, gamma: f64, seed: u64) -> Result<Self> {
        let q = stubbornness_measure(gamma)?;
        let field = GffSampler::new(nx, ny, seed)?.sample();
        let factor = conformal_factor(&field, gamma)?;
        Ok(StubbornnessField {
            gamma,
            q,
            field,
            factor,
            shape: (nx, ny),
        })
    }
}
