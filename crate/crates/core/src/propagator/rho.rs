use serde::Serialize;

use super::evolve::{laplacian_norm, WaveFunction};
use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::geometry::{ChristoffelField, MetricField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoReport {
    pub rho_star: f64,
    /// Every refined zero of `∂J/∂ρ̂`, ascending.
    pub stationary_points: Vec<f64>,
    /// No interior stationary point: `rho_star` is the best grid point.
    pub boundary_flag: bool,
    /// `J` is constant on the grid.
    pub degenerate: bool,
    /// `(ρ̂, J(ρ̂))` on the search grid.
    pub objective: Vec<(f64, f64)>,
}

const MIN_POINTS: usize = 16;
const STEP: f64 = 1e-6;

/// Uniform grid `ρ̂ = k/resolution`, `k = 1..=resolution`.
pub fn optimal_rho<B>(
    builder: B,
    psi: &WaveFunction,
    metric: &MetricField,
    chr: &ChristoffelField,
    resolution: usize,
) -> Result<RhoReport>
where
    B: Fn(f64) -> Result<KernelSpec>,
{
    let points: Vec<f64> = (1..=resolution).map(|k| k as f64 / resolution as f64).collect();
    optimal_rho_on(builder, psi, metric, chr, &points)
}

/// Stationary points of `J(ρ̂) = ‖∂_s Ψ‖ = |F⁰(ρ̂)|/(2M(ρ̂)) ‖D_a D^a Ψ‖`.
///
/// Sign changes of the central-difference derivative between neighbouring
/// grid points are refined by bisection. `rho_star` is the stationary point
/// with the largest `J`.
pub fn optimal_rho_on<B>(
    builder: B,
    psi: &WaveFunction,
    metric: &MetricField,
    chr: &ChristoffelField,
    points: &[f64],
) -> Result<RhoReport>
where
    B: Fn(f64) -> Result<KernelSpec>,
{
    if points.len() < MIN_POINTS {
        return Err(Error::invalid(format!(
            "need at least {MIN_POINTS} grid points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) || !(points[0] > 0.0) || points[points.len() - 1] > 1.0 {
        return Err(Error::invalid("grid must be strictly increasing inside (0,1]"));
    }
    let lap = laplacian_norm(psi, metric, chr)?;
    let j = |rho: f64| -> Result<f64> {
        let spec = builder(rho)?;
        spec.validate()?;
        let v = spec.f0.abs() / (2.0 * spec.mass) * lap;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                term: "objective".into(),
                location: format!("rho {rho}"),
            });
        }
        Ok(v)
    };
    let dj = |rho: f64| -> Result<f64> {
        let h = STEP;
        if rho + h > 1.0 {
            Ok((3.0 * j(rho)? - 4.0 * j(rho - h)? + j(rho - 2.0 * h)?) / (2.0 * h))
        } else if rho - h <= 0.0 {
            Ok((-3.0 * j(rho)? + 4.0 * j(rho + h)? - j(rho + 2.0 * h)?) / (2.0 * h))
        } else {
            Ok((j(rho + h)? - j(rho - h)?) / (2.0 * h))
        }
    };

    let objective: Vec<(f64, f64)> = points.iter().map(|&r| Ok((r, j(r)?))).collect::<Result<_>>()?;
    let jmax = objective.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let spread = objective.iter().fold(0.0f64, |m, p| m.max((p.1 - objective[0].1).abs()));
    let argmax = objective
        .iter()
        .copied()
        .fold(objective[0], |best, p| if p.1 > best.1 { p } else { best });
    if spread <= 1e-12 * jmax.max(f64::MIN_POSITIVE) {
        return Ok(RhoReport {
            rho_star: argmax.0,
            stationary_points: points.to_vec(),
            boundary_flag: false,
            degenerate: true,
            objective,
        });
    }

    let slopes: Vec<f64> = points.iter().map(|&r| dj(r)).collect::<Result<_>>()?;
    let mut stationary = Vec::new();
    for k in 0..points.len() - 1 {
        let (a, b) = (slopes[k], slopes[k + 1]);
        if a == 0.0 {
            if k > 0 {
                stationary.push(points[k]);
            }
            continue;
        }
        if a.signum() != b.signum() && b != 0.0 {
            let (mut lo, mut hi, mut slo) = (points[k], points[k + 1], a);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let s = dj(mid)?;
                if s == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if s.signum() == slo.signum() {
                    lo = mid;
                    slo = s;
                } else {
                    hi = mid;
                }
            }
            stationary.push(0.5 * (lo + hi));
        }
    }
    if stationary.is_empty() {
        return Ok(RhoReport {
            rho_star: argmax.0,
            stationary_points: stationary,
            boundary_flag: true,
            degenerate: false,
            objective,
        });
    }
    let mut best = (stationary[0], j(stationary[0])?);
    for &r in &stationary[1..] {
        let v = j(r)?;
        if v > best.1 {
            best = (r, v);
        }
    }
    Ok(RhoReport {
        rho_star: best.0,
        stationary_points: stationary,
        boundary_flag: false,
        degenerate: false,
        objective,
    })
}
