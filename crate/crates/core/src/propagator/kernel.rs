use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Imaginary time: the kernel is a real Gaussian.
    Wick,
    #[default]
    Lorentzian,
}

/// Short-time kernel parameters on the three world-volume directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Mass-like constant `M`.
    pub mass: f64,
    /// Time step `ε`.
    pub epsilon: f64,
    /// Effective scalar `F⁰`.
    pub f0: f64,
    /// Contravariant background block `ĥ^{ab}`, row-major.
    pub hhat: [f64; 9],
    /// Half-width of the integration box for `ξ`.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub mode: KernelMode,
}

fn default_half_width() -> f64 {
    f64::INFINITY
}

impl KernelSpec {
    /// Flat block, unbounded box, Wick mode.
    pub fn flat(mass: f64, epsilon: f64, f0: f64) -> Self {
        KernelSpec {
            mass,
            epsilon,
            f0,
            hhat: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            half_width: f64::INFINITY,
            mode: KernelMode::Wick,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            v.push(format!("M must be positive and finite, got {}", self.mass));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            v.push(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if !self.f0.is_finite() {
            v.push("F0 must be finite".to_string());
        }
        if self.hhat.iter().any(|x| !x.is_finite()) {
            v.push("background block must be finite".to_string());
        }
        let m = self.hhat_matrix();
        if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
            v.push("background block must be symmetric".to_string());
        }
        if !(self.half_width > 0.0) {
            v.push(format!("half-width must be positive, got {}", self.half_width));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Violations(v))
        }
    }

    pub fn hhat_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.hhat)
    }

    /// `(ε/M) F⁰ ĥ^{ab}`; the Lorentzian correlation is `ι` times this.
    pub fn covariance(&self) -> Matrix3<f64> {
        self.hhat_matrix() * (self.epsilon / self.mass * self.f0)
    }

    fn wick_covariance(&self) -> Result<Matrix3<f64>> {
        self.validate()?;
        let cov = self.covariance();
        if cov.cholesky().is_none() {
            return Err(Error::domain(format!(
                "kernel covariance (ε/M)F⁰ĥ is not positive definite (F0 = {})",
                self.f0
            )));
        }
        Ok(cov)
    }
}

/// `L_ε = √(h ĥ)/2` from the two determinants.
pub fn l_epsilon(det_h: f64, det_hhat: f64) -> Result<f64> {
    let p = det_h * det_hhat;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("h·ĥ = {p} must be positive")));
    }
    Ok(p.sqrt() / 2.0)
}

/// `K₀(ξ)`: the Gaussian with covariance `(ε/M)F⁰ĥ` in Wick mode, its
/// analytic continuation to covariance `ι(ε/M)F⁰ĥ` in Lorentzian mode.
pub fn kernel_value(spec: &KernelSpec, xi: [f64; 3]) -> Result<Complex64> {
    spec.validate()?;
    let cov = spec.covariance();
    let det = cov.determinant();
    let precision = cov
        .try_inverse()
        .ok_or_else(|| Error::domain("kernel covariance is singular"))?;
    let x = nalgebra::Vector3::from(xi);
    let q = (x.transpose() * precision * x)[(0, 0)];
    match spec.mode {
        KernelMode::Wick => {
            if !(det > 0.0) {
                return Err(Error::domain("Wick covariance must be positive definite"));
            }
            Ok(Complex64::new((-0.5 * q).exp() / ((2.0 * PI).powi(3) * det).sqrt(), 0.0))
        }
        KernelMode::Lorentzian => {
            let amp = 1.0 / ((2.0 * PI).powi(3) * det.abs()).sqrt();
            let phase = Complex64::from_polar(1.0, -0.75 * PI);
            let phase = if det < 0.0 { phase * Complex64::i() } else { phase };
            Ok(phase * amp * Complex64::from_polar(1.0, 0.5 * q))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub estimate: f64,
    pub deviation: f64,
    /// Integration half-widths actually used per axis.
    pub box_half_widths: [f64; 3],
}

/// Panels per axis for the composite rule.
const PANELS: usize = 8;

/// `∫ K₀ dξ` over the box `|ξ_a| ≤ half_width` (clipped at twelve marginal
/// standard deviations) by tensor-product composite Gauss–Legendre with
/// `nodes` points per panel. Returns `|estimate − 1|`.
pub fn kernel_normalization_check(spec: &KernelSpec, nodes: usize) -> Result<NormalizationReport> {
    if spec.mode != KernelMode::Wick {
        return Err(Error::invalid("normalization is checked in Wick mode"));
    }
    if nodes < 2 {
        return Err(Error::invalid("need at least two quadrature nodes per panel"));
    }
    let cov = spec.wick_covariance()?;
    let precision = cov.try_inverse().ok_or_else(|| Error::domain("singular covariance"))?;
    let norm = 1.0 / ((2.0 * PI).powi(3) * cov.determinant()).sqrt();
    let rule = GaussLegendre::new(std::num::NonZeroUsize::new(nodes).expect("checked above"));

    let mut widths = [0.0; 3];
    let axes: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|a| {
            let b = spec.half_width.min(12.0 * cov[(a, a)].sqrt());
            widths[a] = b;
            let panel = 2.0 * b / PANELS as f64;
            let mut pts = Vec::with_capacity(PANELS * nodes);
            for p in 0..PANELS {
                let lo = -b + p as f64 * panel;
                for (x, w) in rule.iter() {
                    pts.push((lo + 0.5 * panel * (x + 1.0), 0.5 * panel * w));
                }
            }
            pts
        })
        .collect();

    let p = precision;
    let slabs: Vec<f64> = axes[0]
        .par_iter()
        .map(|&(x, wx)| {
            let mut acc = 0.0;
            for &(y, wy) in &axes[1] {
                let mut row = 0.0;
                for &(z, wz) in &axes[2] {
                    let q = p[(0, 0)] * x * x
                        + p[(1, 1)] * y * y
                        + p[(2, 2)] * z * z
                        + 2.0 * (p[(0, 1)] * x * y + p[(0, 2)] * x * z + p[(1, 2)] * y * z);
                    row += wz * (-0.5 * q).exp();
                }
                acc += wy * row;
            }
            wx * acc
        })
        .collect();
    let estimate = norm * crate::grid::pairwise_sum(&slabs);
    Ok(NormalizationReport {
        estimate,
        deviation: (estimate - 1.0).abs(),
        box_half_widths: widths,
    })
}

/// Sample second moments `⟨Δξ^a Δξ^b⟩` of draws from `K₀` with their
/// standard errors and the target `(ε/M)F⁰ĥ^{ab}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub samples: usize,
    pub covariance: [f64; 9],
    pub standard_error: [f64; 9],
    pub expected: [f64; 9],
}

impl CorrelationEstimate {
    /// Largest `|estimate − expected| / SE` over the entries.
    pub fn max_z(&self) -> f64 {
        (0..9)
            .map(|k| {
                let d = (self.covariance[k] - self.expected[k]).abs();
                if self.standard_error[k] > 0.0 {
                    d / self.standard_error[k]
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

const CHUNK: usize = 1 << 14;

/// Draws are generated in fixed chunks, chunk `k` on stream `k` of the
/// seeded generator, so the estimate does not depend on the thread count.
pub fn two_point_correlation(spec: &KernelSpec, samples: usize, seed: u64) -> Result<CorrelationEstimate> {
    if spec.mode != KernelMode::Wick {
        return Err(Error::invalid("two-point sampling runs in Wick mode"));
    }
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let cov = spec.wick_covariance()?;
    let l = cov.cholesky().expect("checked positive definite").l();
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<[f64; 6]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = CHUNK.min(samples - k * CHUNK);
            let mut acc = [0.0; 6];
            for _ in 0..count {
                let z = nalgebra::Vector3::from_fn(|_, _| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                });
                let x = l * z;
                acc[0] += x[0] * x[0];
                acc[1] += x[0] * x[1];
                acc[2] += x[0] * x[2];
                acc[3] += x[1] * x[1];
                acc[4] += x[1] * x[2];
                acc[5] += x[2] * x[2];
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 6];
    for acc in &partial {
        for (t, a) in tot.iter_mut().zip(acc) {
            *t += a;
        }
    }
    let n = samples as f64;
    let idx = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    let mut c = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            c[a * 3 + b] = tot[idx[a][b]] / n;
        }
    }
    let mut se = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            se[a * 3 + b] = ((c[a * 3 + a] * c[b * 3 + b] + c[a * 3 + b].powi(2)) / n).sqrt();
        }
    }
    let mut expected = [0.0; 9];
    expected.copy_from_slice(cov.transpose().as_slice());
    Ok(CorrelationEstimate {
        samples,
        covariance: c,
        standard_error: se,
        expected,
    })
}
