//! Itô market-share dynamics: geometry-derived coefficients, Euler–Maruyama
//! ensembles, Lipschitz probing and the cooperative Nash payoff check.
//!
//! The state `x` is the firm's position in strategy spacetime with one
//! component per coordinate. The scalar market share is `x[0]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{ChristoffelField, MetricField};
use crate::grid::{interpolation_weights, GridSpec};
use crate::polygon::effective_region;

/// Own and opponents' controls entering the coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub own: f64,
    pub other: f64,
}

/// A firm's state and strategy choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmState {
    /// Initial position `x₀` in strategy spacetime.
    pub x0: Vec<f64>,
    pub strategy: f64,
    #[serde(default)]
    pub opponent_strategy: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub rho_hat: f64,
    pub rho_tilde: f64,
    /// Stubbornness value `b_i` weighting the payoff.
    pub stubbornness: f64,
}

impl FirmState {
    pub fn market_share(&self) -> f64 {
        self.x0[0]
    }

    pub fn control(&self) -> Control {
        Control {
            own: self.strategy,
            other: self.opponent_strategy,
        }
    }

    /// Every violated precondition. With `area`, also checks that the
    /// strategy lies in the effective region `[0, α₁^ρ̂ 𝒜]`.
    pub fn violations(&self, area: Option<f64>) -> Vec<String> {
        let mut v = Vec::new();
        if self.x0.is_empty() || self.x0.iter().any(|c| !c.is_finite()) {
            v.push("x0 must be a non-empty finite vector".into());
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(0.0..=1.0).contains(&a) {
                v.push(format!("{name} must lie in [0,1], got {a}"));
            }
        }
        for (name, r) in [("rho_hat", self.rho_hat), ("rho_tilde", self.rho_tilde)] {
            if !(r > 0.0 && r <= 1.0) {
                v.push(format!("{name} must lie in (0,1], got {r}"));
            }
        }
        if !self.strategy.is_finite() || !self.stubbornness.is_finite() {
            v.push("strategy and stubbornness must be finite".into());
        }
        if let Some(area) = area {
            if v.is_empty() {
                match effective_region(area, self.alpha1, self.rho_hat) {
                    Ok(limit) if self.strategy < 0.0 || self.strategy > limit => v.push(format!(
                        "strategy {} lies outside the effective region [0, {limit}]",
                        self.strategy
                    )),
                    Ok(_) => {}
                    Err(e) => v.push(e.to_string()),
                }
            }
        }
        v
    }

    pub fn validate(&self, area: Option<f64>) -> Result<()> {
        let v = self.violations(area);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Violations(v))
        }
    }
}

/// Drift `μ(s, x, u)` and diffusion `ω(s, x, u)` of an Itô process.
pub trait Coefficients: Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, s: f64, x: &[f64], u: Control, out: &mut [f64]);
    /// Row-major `dim × noise_dim`.
    fn diffusion(&self, s: f64, x: &[f64], u: Control, out: &mut [f64]);
    fn geometry_derived(&self) -> bool {
        false
    }
}

/// Coefficients built from closures.
pub struct FnCoefficients<D, S> {
    pub dim: usize,
    pub noise_dim: usize,
    pub drift: D,
    pub diffusion: S,
}

impl<D, S> Coefficients for FnCoefficients<D, S>
where
    D: Fn(f64, &[f64], Control, &mut [f64]) + Sync,
    S: Fn(f64, &[f64], Control, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn drift(&self, s: f64, x: &[f64], u: Control, out: &mut [f64]) {
        (self.drift)(s, x, u, out)
    }
    fn diffusion(&self, s: f64, x: &[f64], u: Control, out: &mut [f64]) {
        (self.diffusion)(s, x, u, out)
    }
}

/// State-independent drift vector and diffusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCoefficients {
    pub mu: Vec<f64>,
    /// Row-major `mu.len() × noise_dim`.
    pub omega: Vec<f64>,
    pub noise_dim: usize,
}

impl ConstantCoefficients {
    pub fn new(mu: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 || omega.len() % d != 0 || omega.is_empty() {
            return Err(Error::invalid("diffusion must be a dim × m matrix"));
        }
        let noise_dim = omega.len() / d;
        Ok(ConstantCoefficients { mu, omega, noise_dim })
    }

    /// Zero drift, identity diffusion.
    pub fn brownian(dim: usize) -> Self {
        let mut omega = vec![0.0; dim * dim];
        for a in 0..dim {
            omega[a * dim + a] = 1.0;
        }
        ConstantCoefficients {
            mu: vec![0.0; dim],
            omega,
            noise_dim: dim,
        }
    }
}

impl Coefficients for ConstantCoefficients {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn drift(&self, _s: f64, _x: &[f64], _u: Control, out: &mut [f64]) {
        out.copy_from_slice(&self.mu);
    }
    fn diffusion(&self, _s: f64, _x: &[f64], _u: Control, out: &mut [f64]) {
        out.copy_from_slice(&self.omega);
    }
}

/// Coefficients induced by a metric: `μ^a = −½ h^{bc} Γ^a_{bc}` and
/// `ω ωᵀ = h^{ab}` at every node, interpolated multilinearly in between.
#[derive(Debug, Clone)]
pub struct GeometricCoefficients {
    grid: GridSpec,
    dim: usize,
    mu: Vec<f64>,
    omega: Vec<f64>,
}

impl GeometricCoefficients {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn drift_at(&self, node: usize) -> &[f64] {
        &self.mu[node * self.dim..(node + 1) * self.dim]
    }

    /// Lower-triangular factor at a node, row-major.
    pub fn diffusion_at(&self, node: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.omega[node * d2..(node + 1) * d2]
    }
}

impl Coefficients for GeometricCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _s: f64, x: &[f64], _u: Control, out: &mut [f64]) {
        out.fill(0.0);
        interpolation_weights(&self.grid, x, |n, w| {
            for (o, m) in out.iter_mut().zip(self.drift_at(n)) {
                *o += w * m;
            }
        });
    }
    fn diffusion(&self, _s: f64, x: &[f64], _u: Control, out: &mut [f64]) {
        out.fill(0.0);
        interpolation_weights(&self.grid, x, |n, w| {
            for (o, m) in out.iter_mut().zip(self.diffusion_at(n)) {
                *o += w * m;
            }
        });
    }
    fn geometry_derived(&self) -> bool {
        true
    }
}

/// Drift from the contracted connection and diffusion from the Cholesky
/// factor of the inverse metric.
pub fn derive_coefficients(
    metric: &MetricField,
    christoffel: &ChristoffelField,
) -> Result<GeometricCoefficients> {
    let grid = metric.grid();
    let d = metric.dim();
    if christoffel.grid() != grid || christoffel.dim() != d {
        return Err(Error::GridMismatch(
            "christoffel field was not computed on this metric's grid".into(),
        ));
    }
    let inverse = metric.inverse()?;
    let contracted = christoffel.contracted(&inverse);
    let mu: Vec<f64> = contracted.iter().flatten().map(|c| -0.5 * c).collect();
    let factors: Vec<Result<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let chol = inverse
                .matrix(node)
                .cholesky()
                .ok_or(Error::NotPositiveDefinite { node })?;
            let l = chol.l();
            let mut out = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..=a {
                    out[a * d + b] = l[(a, b)];
                }
            }
            Ok(out)
        })
        .collect();
    let mut omega = Vec::with_capacity(grid.len() * d * d);
    for f in factors {
        omega.extend(f?);
    }
    Ok(GeometricCoefficients {
        grid: grid.clone(),
        dim: d,
        mu,
        omega,
    })
}

/// Largest `|Σ_k ω^a_k ω^b_k − h^{ab}|` over all nodes.
pub fn diffusion_identity_residual(coeffs: &GeometricCoefficients, inverse: &MetricField) -> f64 {
    let d = coeffs.dim;
    let mut worst = 0.0f64;
    for node in 0..coeffs.grid.len() {
        let w = coeffs.diffusion_at(node);
        for a in 0..d {
            for b in 0..d {
                let s: f64 = (0..d).map(|k| w[a * d + k] * w[b * d + k]).sum();
                worst = worst.max((s - inverse.get(node, a, b)).abs());
            }
        }
    }
    worst
}

/// Simulated paths stored `[path][step][component]`, `steps + 1` time
/// points per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub paths: usize,
    pub steps: usize,
    pub dim: usize,
    pub dt: f64,
    pub data: Vec<f64>,
}

impl PathEnsemble {
    pub fn path(&self, p: usize) -> &[f64] {
        let n = (self.steps + 1) * self.dim;
        &self.data[p * n..(p + 1) * n]
    }

    pub fn value(&self, p: usize, step: usize, c: usize) -> f64 {
        self.path(p)[step * self.dim + c]
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Sample mean and unbiased variance of component `c` at `step`.
    pub fn moments(&self, step: usize, c: usize) -> (f64, f64) {
        let n = self.paths as f64;
        let mean = (0..self.paths).map(|p| self.value(p, step, c)).sum::<f64>() / n;
        let var = (0..self.paths)
            .map(|p| (self.value(p, step, c) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (mean, var)
    }

    pub fn summary(&self) -> EnsembleSummary {
        let (mean, variance) = (0..self.dim).map(|c| self.moments(self.steps, c)).unzip();
        EnsembleSummary {
            paths: self.paths,
            steps: self.steps,
            horizon: self.horizon(),
            terminal_mean: mean,
            terminal_variance: variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub terminal_mean: Vec<f64>,
    pub terminal_variance: Vec<f64>,
}

/// One Euler–Maruyama path driven by the given Brownian increments
/// (`steps × noise_dim`, already scaled by `√dt`). Writes `steps + 1`
/// states into `out`.
pub fn euler_maruyama_path(
    coeffs: &dyn Coefficients,
    x0: &[f64],
    control: Control,
    dt: f64,
    increments: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let d = coeffs.dim();
    let m = coeffs.noise_dim();
    let steps = increments.len() / m;
    let mut mu = vec![0.0; d];
    let mut om = vec![0.0; d * m];
    out[..d].copy_from_slice(x0);
    for k in 0..steps {
        let s = k as f64 * dt;
        let (head, tail) = out.split_at_mut((k + 1) * d);
        let x = &head[k * d..];
        coeffs.drift(s, x, control, &mut mu);
        coeffs.diffusion(s, x, control, &mut om);
        if mu.iter().chain(&om).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "coefficient evaluation returned a non-finite value at step {k}"
            )));
        }
        let dw = &increments[k * m..(k + 1) * m];
        for a in 0..d {
            let mut noise = 0.0;
            for j in 0..m {
                noise += om[a * m + j] * dw[j];
            }
            tail[a] = x[a] + mu[a] * dt + noise;
        }
    }
    Ok(())
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_run(horizon: f64, steps: usize, paths: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::invalid(format!("at least 2 steps are required, got {steps}")));
    }
    if paths == 0 {
        return Err(Error::invalid("at least one path is required"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// Euler–Maruyama ensemble for one firm. Path `p` draws from its own
/// stream of the master seed, so results do not depend on scheduling.
pub fn simulate(
    coeffs: &dyn Coefficients,
    initial: &FirmState,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let mut out = simulate_firms(&[coeffs], std::slice::from_ref(initial), None, horizon, steps, paths, seed)?;
    Ok(out.remove(0))
}

/// Joint simulation of several firms. Brownian increments are independent
/// across firms unless `correlation` (firms × firms, positive definite)
/// is given, in which case noise component `k` of firm `i` is
/// `Σ_j L_ij dZ_j^k` with `L Lᵀ = correlation`.
pub fn simulate_firms(
    coeffs: &[&dyn Coefficients],
    initial: &[FirmState],
    correlation: Option<&DMatrix<f64>>,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<PathEnsemble>> {
    check_run(horizon, steps, paths)?;
    let n = coeffs.len();
    if n == 0 || initial.len() != n {
        return Err(Error::invalid("one initial state per coefficient set is required"));
    }
    let m = coeffs[0].noise_dim();
    for (i, (c, f)) in coeffs.iter().zip(initial).enumerate() {
        if f.x0.len() != c.dim() {
            return Err(Error::invalid(format!(
                "firm {i}: x0 has {} components, coefficients expect {}",
                f.x0.len(),
                c.dim()
            )));
        }
        if c.noise_dim() != m {
            return Err(Error::invalid("all firms must share the noise dimension"));
        }
        f.validate(None)?;
    }
    let mix = match correlation {
        None => None,
        Some(c) => {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::invalid("correlation matrix must be firms × firms"));
            }
            Some(c.clone().cholesky().ok_or(Error::NotPositiveDefinite { node: 0 })?.l())
        }
    };
    let dt = horizon / steps as f64;
    let sq = dt.sqrt();

    let mut data: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| vec![0.0; paths * (steps + 1) * c.dim()])
        .collect();
    let results: Vec<Result<Vec<Vec<f64>>>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut z = vec![0.0; n * steps * m];
            for v in z.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v = g * sq;
            }
            // z laid out [firm][step][k]
            let incs: Vec<Vec<f64>> = match &mix {
                None => (0..n).map(|i| z[i * steps * m..(i + 1) * steps * m].to_vec()).collect(),
                Some(l) => (0..n)
                    .map(|i| {
                        (0..steps * m)
                            .map(|q| (0..=i).map(|j| l[(i, j)] * z[j * steps * m + q]).sum())
                            .collect()
                    })
                    .collect(),
            };
            (0..n)
                .map(|i| {
                    let mut out = vec![0.0; (steps + 1) * coeffs[i].dim()];
                    euler_maruyama_path(coeffs[i], &initial[i].x0, initial[i].control(), dt, &incs[i], &mut out)
                        .map_err(|e| Error::Numerical(format!("firm {i}, path {p}: {e}")))?;
                    Ok(out)
                })
                .collect()
        })
        .collect();
    for (p, r) in results.into_iter().enumerate() {
        for (i, path) in r?.into_iter().enumerate() {
            let len = path.len();
            data[i][p * len..(p + 1) * len].copy_from_slice(&path);
        }
    }
    Ok(coeffs
        .iter()
        .zip(data)
        .map(|(c, data)| PathEnsemble {
            paths,
            steps,
            dim: c.dim(),
            dt,
            data,
        })
        .collect())
}

/// Ceilings for the Lipschitz and growth bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCeilings {
    pub drift_lipschitz: f64,
    pub diffusion_lipschitz: f64,
    pub drift_bound: f64,
    pub diffusion_bound: f64,
}

impl Default for LipschitzCeilings {
    fn default() -> Self {
        LipschitzCeilings {
            drift_lipschitz: f64::INFINITY,
            diffusion_lipschitz: f64::INFINITY,
            drift_bound: f64::INFINITY,
            diffusion_bound: f64::INFINITY,
        }
    }
}

/// Estimated constants: `‖Δμ‖ ≤ A ‖Δx‖`, `‖Δω‖_F ≤ B ‖Δx‖`, `‖μ‖ ≤ A₀`,
/// `‖ω‖_F ≤ B₀` over the probed region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub drift_lipschitz: f64,
    pub diffusion_lipschitz: f64,
    pub drift_bound: f64,
    pub diffusion_bound: f64,
    pub pass: bool,
}

/// Randomised pair probing over the box spanned by `region`: each probe
/// compares a uniform point with a nearby point (local slope) and with a
/// second uniform point (global slope).
pub fn validate_lipschitz(
    coeffs: &dyn Coefficients,
    region: &GridSpec,
    probes: usize,
    seed: u64,
    s: f64,
    control: Control,
    ceilings: LipschitzCeilings,
) -> Result<LipschitzReport> {
    if probes < 2 {
        return Err(Error::invalid(format!("at least 2 probes are required, got {probes}")));
    }
    let d = coeffs.dim();
    if region.rank() != d {
        return Err(Error::GridMismatch(format!(
            "region rank {} differs from state dimension {d}",
            region.rank()
        )));
    }
    let m = coeffs.noise_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        region
            .axes()
            .iter()
            .map(|a| rng.random_range(a.start..=a.end))
            .collect()
    };
    let diag = region
        .axes()
        .iter()
        .map(|a| (a.end - a.start).powi(2))
        .sum::<f64>()
        .sqrt();
    let eval = |x: &[f64]| {
        let mut mu = vec![0.0; d];
        let mut om = vec![0.0; d * m];
        coeffs.drift(s, x, control, &mut mu);
        coeffs.diffusion(s, x, control, &mut om);
        (mu, om)
    };
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>();
    let mut rep = LipschitzReport {
        drift_lipschitz: 0.0,
        diffusion_lipschitz: 0.0,
        drift_bound: 0.0,
        diffusion_bound: 0.0,
        pass: true,
    };
    for _ in 0..probes {
        let x = uniform(&mut rng);
        let far = uniform(&mut rng);
        let near: Vec<f64> = x
            .iter()
            .zip(region.axes())
            .map(|(c, a)| (c + rng.random_range(-1.0..=1.0) * 1e-4 * diag).clamp(a.start, a.end))
            .collect();
        let (mx, ox) = eval(&x);
        rep.drift_bound = rep.drift_bound.max(norm(&mx));
        rep.diffusion_bound = rep.diffusion_bound.max(norm(&ox));
        for y in [near, far] {
            let dx = norm(&diff(&x, &y));
            if dx == 0.0 {
                continue;
            }
            let (my, oy) = eval(&y);
            rep.drift_lipschitz = rep.drift_lipschitz.max(norm(&diff(&mx, &my)) / dx);
            rep.diffusion_lipschitz = rep.diffusion_lipschitz.max(norm(&diff(&ox, &oy)) / dx);
        }
    }
    let values = [
        rep.drift_lipschitz,
        rep.diffusion_lipschitz,
        rep.drift_bound,
        rep.diffusion_bound,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: "coefficients".into(),
            location: "Lipschitz probe".into(),
        });
    }
    rep.pass = rep.drift_lipschitz <= ceilings.drift_lipschitz
        && rep.diffusion_lipschitz <= ceilings.diffusion_lipschitz
        && rep.drift_bound <= ceilings.drift_bound
        && rep.diffusion_bound <= ceilings.diffusion_bound;
    Ok(rep)
}

/// Per-path payoffs over a common horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSample {
    pub horizon: f64,
    pub values: Vec<f64>,
}

/// `∫₀ᵗ π(s, x(s), u) b ds` along every path, by the trapezoid rule.
pub fn payoff_integral(
    ensemble: &PathEnsemble,
    profit: &(dyn Fn(f64, &[f64], Control) -> f64 + Sync),
    stubbornness: f64,
    control: Control,
) -> PayoffSample {
    let d = ensemble.dim;
    let values = (0..ensemble.paths)
        .into_par_iter()
        .map(|p| {
            let path = ensemble.path(p);
            let f = |k: usize| profit(k as f64 * ensemble.dt, &path[k * d..(k + 1) * d], control);
            let mut s = 0.5 * (f(0) + f(ensemble.steps));
            for k in 1..ensemble.steps {
                s += f(k);
            }
            s * ensemble.dt * stubbornness
        })
        .collect();
    PayoffSample {
        horizon: ensemble.horizon(),
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashReport {
    pub holds: bool,
    pub confidence: f64,
    pub mean_star: f64,
    pub mean_deviation: f64,
    pub standard_error: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Checks `E[payoff*] ≥ E[payoff_dev]` with a normal-approximation
/// confidence `Φ(Δ / SE)` for the ordering.
pub fn nash_check(star: &PayoffSample, deviation: &PayoffSample) -> Result<NashReport> {
    if star.values.len() < 2 || deviation.values.len() < 2 {
        return Err(Error::invalid("payoffs need at least 2 paths each"));
    }
    let tol = 1e-12 * star.horizon.abs().max(deviation.horizon.abs()).max(1.0);
    if (star.horizon - deviation.horizon).abs() > tol {
        return Err(Error::invalid(format!(
            "payoff horizons differ: {} vs {}",
            star.horizon, deviation.horizon
        )));
    }
    let (ms, vs) = mean_var(&star.values);
    let (md, vd) = mean_var(&deviation.values);
    let se = (vs / star.values.len() as f64 + vd / deviation.values.len() as f64).sqrt();
    let delta = ms - md;
    let confidence = if se > 0.0 {
        Normal::standard().cdf(delta / se)
    } else if delta > 0.0 {
        1.0
    } else if delta < 0.0 {
        0.0
    } else {
        0.5
    };
    Ok(NashReport {
        holds: delta >= 0.0,
        confidence,
        mean_star: ms,
        mean_deviation: md,
        standard_error: se,
    })
}

/// Reconstructs `ω ωᵀ` at a node as a matrix.
pub fn diffusion_product(coeffs: &GeometricCoefficients, node: usize) -> DMatrix<f64> {
    let d = coeffs.dim;
    let w = DMatrix::from_row_slice(d, d, coeffs.diffusion_at(node));
    &w * w.transpose()
}

/// Drift at a node as a vector.
pub fn drift_vector(coeffs: &GeometricCoefficients, node: usize) -> DVector<f64> {
    DVector::from_column_slice(coeffs.drift_at(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{christoffel, sphere_metric, Signature};
    use crate::grid::Axis;

    fn firm(x0: Vec<f64>) -> FirmState {
        FirmState {
            x0,
            strategy: 0.5,
            opponent_strategy: 0.0,
            alpha1: 0.5,
            alpha2: 0.5,
            rho_hat: 0.5,
            rho_tilde: 0.5,
            stubbornness: 1.0,
        }
    }

    fn grid3() -> GridSpec {
        GridSpec::world_volume((0.0, 1.0, 5), (0.0, 1.0, 5), (0.0, 1.0, 5)).unwrap()
    }

    #[test]
    fn flat_metric_gives_brownian_coefficients() {
        let m = MetricField::flat(grid3());
        let c = derive_coefficients(&m, &christoffel(&m).unwrap()).unwrap();
        for node in 0..m.grid().len() {
            assert!(c.drift_at(node).iter().all(|&v| v == 0.0));
            assert_eq!(c.diffusion_at(node), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn constant_diagonal_metric() {
        // ω ωᵀ = h^{-1}: h = diag(1/4, 1, 1) gives ω = diag(2, 1, 1)
        let m = MetricField::constant(grid3(), &[0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], Signature::Riemannian)
            .unwrap();
        let c = derive_coefficients(&m, &christoffel(&m).unwrap()).unwrap();
        assert_eq!(c.diffusion_at(3)[0], 2.0);
        assert_eq!(c.diffusion_at(3)[4], 1.0);
        assert!(c.drift_at(3).iter().all(|&v| v == 0.0));
        assert!(c.geometry_derived());
    }

    #[test]
    fn sphere_drift_at_quarter_pi() {
        use std::f64::consts::FRAC_PI_4;
        let m = sphere_metric((FRAC_PI_4 - 0.2, FRAC_PI_4 + 0.2), 1.0, 81).unwrap();
        let c = derive_coefficients(&m, &christoffel(&m).unwrap()).unwrap();
        let node = m.grid().index(&[40, 40]);
        assert!((m.grid().coords(node)[0] - FRAC_PI_4).abs() < 1e-12);
        // μ^θ = −½ h^{φφ} Γ^θ_{φφ} = ½ cot θ
        assert!((c.drift_at(node)[0] - 0.5).abs() < 1e-4);
        assert!(c.drift_at(node)[1].abs() < 1e-12);
    }

    #[test]
    fn lorentzian_metric_cannot_be_factored() {
        let m = MetricField::constant(grid3(), &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], Signature::Lorentzian)
            .unwrap();
        let err = derive_coefficients(&m, &christoffel(&m).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { node: 0 }));
    }

    #[test]
    fn zero_coefficients_keep_initial_state() {
        let c = ConstantCoefficients::new(vec![0.0; 3], vec![0.0; 9]).unwrap();
        let e = simulate(&c, &firm(vec![0.3, -1.0, 2.0]), 1.0, 10, 4, 7).unwrap();
        for p in 0..4 {
            for k in 0..=10 {
                assert_eq!(&e.path(p)[k * 3..k * 3 + 3], &[0.3, -1.0, 2.0]);
            }
        }
    }

    #[test]
    fn linear_decay_matches_ode() {
        let c = FnCoefficients {
            dim: 1,
            noise_dim: 1,
            drift: |_s: f64, x: &[f64], _u: Control, out: &mut [f64]| out[0] = -x[0],
            diffusion: |_s: f64, _x: &[f64], _u: Control, out: &mut [f64]| out[0] = 0.0,
        };
        let e = simulate(&c, &firm(vec![1.0]), 1.0, 1000, 1, 0).unwrap();
        let x = e.value(0, 1000, 0);
        assert!((x - (-1.0f64).exp()).abs() < 1.0 / 1000.0);
    }

    #[test]
    fn seeds_are_reproducible() {
        let c = ConstantCoefficients::brownian(3);
        let a = simulate(&c, &firm(vec![0.0; 3]), 1.0, 8, 16, 42).unwrap();
        let b = simulate(&c, &firm(vec![0.0; 3]), 1.0, 8, 16, 42).unwrap();
        assert_eq!(a, b);
        let c2 = simulate(&c, &firm(vec![0.0; 3]), 1.0, 8, 16, 43).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn rejects_short_runs() {
        let c = ConstantCoefficients::brownian(1);
        assert!(simulate(&c, &firm(vec![0.0]), 1.0, 1, 4, 0).is_err());
        assert!(simulate(&c, &firm(vec![0.0, 1.0]), 1.0, 4, 4, 0).is_err());
    }

    #[test]
    fn non_finite_coefficient_names_step() {
        let c = FnCoefficients {
            dim: 1,
            noise_dim: 1,
            drift: |s: f64, _x: &[f64], _u: Control, out: &mut [f64]| {
                out[0] = if s > 0.45 { f64::NAN } else { 0.0 }
            },
            diffusion: |_s: f64, _x: &[f64], _u: Control, out: &mut [f64]| out[0] = 0.0,
        };
        let err = simulate(&c, &firm(vec![0.0]), 1.0, 10, 2, 0).unwrap_err();
        assert!(err.to_string().contains("step 5"), "{err}");
    }

    #[test]
    fn correlated_firms() {
        let c = ConstantCoefficients::brownian(1);
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-12]);
        let firms = [firm(vec![0.0]), firm(vec![0.0])];
        let out = simulate_firms(&[&c, &c], &firms, Some(&corr), 1.0, 4, 8, 3).unwrap();
        for p in 0..8 {
            assert!((out[0].value(p, 4, 0) - out[1].value(p, 4, 0)).abs() < 1e-5);
        }
        let ind = simulate_firms(&[&c, &c], &firms, None, 1.0, 4, 8, 3).unwrap();
        assert_ne!(ind[0].data, ind[1].data);
    }

    #[test]
    fn firm_state_checks() {
        let mut f = firm(vec![0.0; 3]);
        assert!(f.validate(Some(4.0)).is_ok());
        f.strategy = 3.0; // 0.5^0.5·4 ≈ 2.83
        assert!(f.validate(Some(4.0)).is_err());
        f.alpha1 = 1.5;
        f.rho_hat = 0.0;
        match f.validate(None) {
            Err(Error::Violations(v)) => assert_eq!(v.len(), 2),
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn lipschitz_examples() {
        let region = GridSpec::new(vec![Axis::new(-10.0, 10.0, 3)]).unwrap();
        let constant = ConstantCoefficients::new(vec![2.0], vec![1.0]).unwrap();
        let r = validate_lipschitz(&constant, &region, 200, 1, 0.0, Control::default(), LipschitzCeilings::default())
            .unwrap();
        assert_eq!(r.drift_lipschitz, 0.0);
        assert_eq!(r.drift_bound, 2.0);

        let square = FnCoefficients {
            dim: 1,
            noise_dim: 1,
            drift: |_s: f64, x: &[f64], _u: Control, out: &mut [f64]| out[0] = x[0] * x[0],
            diffusion: |_s: f64, _x: &[f64], _u: Control, out: &mut [f64]| out[0] = 0.0,
        };
        let ceil = LipschitzCeilings {
            drift_lipschitz: 1.0,
            ..Default::default()
        };
        let r = validate_lipschitz(&square, &region, 2000, 2, 0.0, Control::default(), ceil).unwrap();
        assert!(!r.pass);
        assert!(r.drift_lipschitz > 18.0 && r.drift_lipschitz <= 20.0 + 1e-6);

        let sine = FnCoefficients {
            dim: 1,
            noise_dim: 1,
            drift: |_s: f64, x: &[f64], _u: Control, out: &mut [f64]| out[0] = x[0].sin(),
            diffusion: |_s: f64, _x: &[f64], _u: Control, out: &mut [f64]| out[0] = 0.0,
        };
        let ceil = LipschitzCeilings {
            drift_lipschitz: 1.1,
            ..Default::default()
        };
        let r = validate_lipschitz(&sine, &region, 2000, 3, 0.0, Control::default(), ceil).unwrap();
        assert!(r.pass && r.drift_lipschitz <= 1.0 + 1e-9);
        assert!(validate_lipschitz(&sine, &region, 1, 3, 0.0, Control::default(), ceil).is_err());
    }

    #[test]
    fn nash_examples() {
        let a = PayoffSample {
            horizon: 1.0,
            values: vec![1.0, 2.0, 3.0],
        };
        let r = nash_check(&a, &a).unwrap();
        assert!(r.holds);
        assert_eq!(r.confidence, 0.5);
        let one = PayoffSample {
            horizon: 1.0,
            values: vec![1.0; 5],
        };
        let zero = PayoffSample {
            horizon: 1.0,
            values: vec![0.0; 5],
        };
        let r = nash_check(&one, &zero).unwrap();
        assert!(r.holds && r.confidence == 1.0);
        let shifted = PayoffSample {
            horizon: 1.0,
            values: a.values.iter().map(|v| v + 1.0).collect(),
        };
        let r = nash_check(&a, &shifted).unwrap();
        assert!(!r.holds && r.confidence < 0.5);
        let other = PayoffSample {
            horizon: 2.0,
            values: vec![0.0; 5],
        };
        assert!(nash_check(&one, &other).is_err());
    }

    #[test]
    fn payoff_of_constant_profit() {
        let c = ConstantCoefficients::brownian(1);
        let e = simulate(&c, &firm(vec![0.0]), 2.0, 10, 3, 0).unwrap();
        let p = payoff_integral(&e, &|_s, _x, _u| 1.5, 2.0, Control::default());
        assert!(p.values.iter().all(|v| (v - 6.0).abs() < 1e-12));
        assert_eq!(p.horizon, 2.0);
    }
}
