//! Profit creation and reduction operators on a truncated profit ladder, and
//! the bond-resale cascade.
//!
//! The ladder defaults to the monomial basis, where `π⁻|n⟩ = n|n−1⟩` and
//! `π⁺|n⟩ = |n+1⟩`. All entries are small integers, so the truncated
//! canonical relation holds exactly in floating point. The orthonormal Fock
//! basis (`√n` entries) is available for comparison.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LadderBasis {
    #[default]
    Monomial,
    Fock,
}

/// Truncated ladder operators for `firms` independent firms, each with `d`
/// profit levels. Operators act on the `d^firms`-dimensional tensor product.
#[derive(Debug, Clone)]
pub struct LadderAlgebra {
    d: usize,
    firms: usize,
    lowering: Vec<DMatrix<f64>>,
    raising: Vec<DMatrix<f64>>,
}

fn single_firm(d: usize, basis: LadderBasis) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut lower = DMatrix::zeros(d, d);
    let mut raise = DMatrix::zeros(d, d);
    for n in 1..d {
        let (l, r) = match basis {
            LadderBasis::Monomial => (n as f64, 1.0),
            LadderBasis::Fock => ((n as f64).sqrt(), (n as f64).sqrt()),
        };
        lower[(n - 1, n)] = l;
        raise[(n, n - 1)] = r;
    }
    (lower, raise)
}

fn embed(op: &DMatrix<f64>, slot: usize, firms: usize) -> DMatrix<f64> {
    let d = op.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut out = DMatrix::<f64>::identity(1, 1);
    for k in 0..firms {
        out = out.kronecker(if k == slot { op } else { &id });
    }
    out
}

impl LadderAlgebra {
    /// Single-firm ladder on `d ≥ 2` levels in the monomial basis.
    pub fn new(d: usize) -> Result<Self> {
        Self::with_basis(d, 1, LadderBasis::Monomial)
    }

    pub fn with_basis(d: usize, firms: usize, basis: LadderBasis) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("ladder needs at least 2 levels, got {d}")));
        }
        if firms == 0 {
            return Err(Error::invalid("ladder needs at least one firm"));
        }
        if (d as f64).powi(firms as i32) > 4096.0 {
            return Err(Error::invalid(format!(
                "tensor dimension {d}^{firms} is too large for dense operators"
            )));
        }
        let (l, r) = single_firm(d, basis);
        let lowering = (0..firms).map(|i| embed(&l, i, firms)).collect();
        let raising = (0..firms).map(|i| embed(&r, i, firms)).collect();
        Ok(LadderAlgebra {
            d,
            firms,
            lowering,
            raising,
        })
    }

    pub fn levels(&self) -> usize {
        self.d
    }

    pub fn firms(&self) -> usize {
        self.firms
    }

    pub fn dimension(&self) -> usize {
        self.d.pow(self.firms as u32)
    }

    /// `π⁻_i`.
    pub fn lowering(&self, firm: usize) -> &DMatrix<f64> {
        &self.lowering[firm]
    }

    /// `π⁺_i`.
    pub fn raising(&self, firm: usize) -> &DMatrix<f64> {
        &self.raising[firm]
    }

    /// `π̃ = π⁺ + ιπ⁻` for `sign = +1`, `π⁺ − ιπ⁻` for `sign = −1`.
    pub fn profit_state(&self, firm: usize, sign: f64) -> DMatrix<Complex64> {
        let l = &self.lowering[firm];
        let r = &self.raising[firm];
        DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| {
            Complex64::new(r[(i, j)], sign * l[(i, j)])
        })
    }

    /// Basis state of a single firm at `level`, embedded with all other
    /// firms at level 0.
    pub fn state(&self, firm: usize, level: usize) -> Result<Vec<f64>> {
        if firm >= self.firms || level >= self.d {
            return Err(Error::invalid("firm or level out of range"));
        }
        let mut v = vec![0.0; self.dimension()];
        let stride = self.d.pow((self.firms - 1 - firm) as u32);
        v[level * stride] = 1.0;
        Ok(v)
    }
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Consumers, sale counts and the asymmetry parameter of the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeParams {
    /// `θ_j` for each of the `m` consumers.
    pub theta: Vec<u64>,
    pub kappa: f64,
    /// Weight of one unit of `π⁻`.
    #[serde(default = "unit_weight")]
    pub unit: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl CascadeParams {
    pub fn uniform(m: usize, theta: u64, kappa: f64) -> Self {
        CascadeParams {
            theta: vec![theta; m],
            kappa,
            unit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.theta.is_empty() {
            v.push("cascade needs at least one consumer".to_string());
        }
        if self.theta.iter().any(|&t| t == 0) {
            v.push("every sale count must be at least 1".to_string());
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            v.push(format!("kappa must be positive, got {}", self.kappa));
        }
        if !self.unit.is_finite() {
            v.push("unit weight must be finite".to_string());
        }
        match v.len() {
            0 => Ok(()),
            _ => Err(Error::Violations(v)),
        }
    }
}

/// Neumaier-compensated sum.
fn compensated<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(format!("{what} is not representable")))
    }
}

/// Brute-force `Σ_j Σ_{ρ=1}^{θ_j} ρ e^{−ρκ} π⁻`.
pub fn cascade_sum(p: &CascadeParams) -> Result<f64> {
    p.validate()?;
    let k = p.kappa;
    let total = compensated(
        p.theta
            .iter()
            .flat_map(|&t| (1..=t).map(move |r| r as f64 * (-(r as f64) * k).exp())),
    );
    finite(total * p.unit, "cascade sum")
}

/// Brute-force unweighted `Σ_j Σ_{ρ=1}^{θ_j} e^{−ρκ} π⁻`.
pub fn geometric_sum(p: &CascadeParams) -> Result<f64> {
    p.validate()?;
    let k = p.kappa;
    let total = compensated(
        p.theta
            .iter()
            .flat_map(|&t| (1..=t).map(move |r| (-(r as f64) * k).exp())),
    );
    finite(total * p.unit, "geometric sum")
}

/// Closed form of the weighted sum:
/// `e^{−κ}[(1 − e^{−(θ+1)κ})/(1 − e^{−κ})² − (θ+1)e^{−θκ}/(1 − e^{−κ})]` per consumer.
pub fn cascade_closed_form(p: &CascadeParams) -> Result<f64> {
    p.validate()?;
    let k = p.kappa;
    let one_minus_q = -(-k).exp_m1();
    let per = |t: u64| {
        let t = t as f64;
        let head = -(-(t + 1.0) * k).exp_m1() / (one_minus_q * one_minus_q);
        let tail = (t + 1.0) * (-t * k).exp() / one_minus_q;
        (-k).exp() * (head - tail)
    };
    let total = compensated(p.theta.iter().map(|&t| per(t)));
    finite(total * p.unit, "cascade closed form")
}

/// Closed form of the unweighted sum starting at `ρ = 1`:
/// `e^{−κ}(1 − e^{−θκ})/(1 − e^{−κ})` per consumer.
pub fn geometric_closed_form(p: &CascadeParams) -> Result<f64> {
    p.validate()?;
    let k = p.kappa;
    let total = compensated(
        p.theta
            .iter()
            .map(|&t| (-k).exp() * (-(t as f64) * k).exp_m1() / (-k).exp_m1()),
    );
    finite(total * p.unit, "geometric closed form")
}

/// `(1 − e^{−θκ})/(1 − e^{−κ})` per consumer, which is the geometric sum
/// started at `ρ = 0`.
pub fn geometric_closed_form_from_zero(p: &CascadeParams) -> Result<f64> {
    p.validate()?;
    let k = p.kappa;
    let total = compensated(
        p.theta
            .iter()
            .map(|&t| (-(t as f64) * k).exp_m1() / (-k).exp_m1()),
    );
    finite(total * p.unit, "geometric closed form")
}

/// Per-consumer limit `e^{−κ}/(1 − e^{−κ}) = 1/(e^κ − 1)` per unit `π⁻`.
pub fn cascade_limit(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(1.0 / kappa.exp_m1())
}

/// Magnitude beyond which the derivative is reported as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeDerivative {
    /// `−1/κ² + 1/12`.
    pub value: f64,
    /// `κ` lies outside `(0, 1)`, where the expansion is not trustworthy.
    pub outside_expansion: bool,
    pub divergent: bool,
}

/// Small-`κ` expansion of `∂/∂κ` of the cascade limit.
pub fn cascade_derivative(kappa: f64) -> Result<CascadeDerivative> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    let value = -1.0 / (kappa * kappa) + 1.0 / 12.0;
    Ok(CascadeDerivative {
        value,
        outside_expansion: kappa >= 1.0,
        divergent: !value.is_finite() || value.abs() > DIVERGENCE_THRESHOLD,
    })
}

/// Central difference of [`cascade_limit`] with relative step `rel`.
pub fn cascade_limit_slope(kappa: f64, rel: f64) -> Result<f64> {
    let h = kappa * rel;
    if !(h > 0.0) || h >= kappa {
        return Err(Error::invalid("relative step must lie in (0, 1)"));
    }
    Ok((cascade_limit(kappa + h)? - cascade_limit(kappa - h)?) / (2.0 * h))
}
