//! Lie brackets of drift-plus-noise gradient fields on 3-D strategy space.
//!
//! A field is `∇_V = (v_μ + b_μ) ∂^μ` where `v` is the drift part and `b` a
//! fixed, smooth realisation of the noise part. The bracket is assembled as
//! four separate commutators (drift/drift, drift/noise, noise/drift,
//! noise/noise) so a non-finite component can be traced to its term.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub type Point = [f64; 3];

/// A smooth map `R³ → R³`.
pub trait Field3: Send + Sync {
    fn eval(&self, y: Point) -> Point;
}

impl<F> Field3 for F
where
    F: Fn(Point) -> Point + Send + Sync,
{
    fn eval(&self, y: Point) -> Point {
        self(y)
    }
}

/// `c · y₀^p₀ y₁^p₁ y₂^p₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 3],
}

impl Monomial {
    pub fn eval(&self, y: Point) -> f64 {
        self.coef
            * y[0].powi(self.powers[0] as i32)
            * y[1].powi(self.powers[1] as i32)
            * y[2].powi(self.powers[2] as i32)
    }
}

/// Vector field whose components are polynomials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolynomialField {
    pub components: [Vec<Monomial>; 3],
}

impl PolynomialField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Point) -> Self {
        let mut f = Self::default();
        for (k, v) in c.iter().enumerate() {
            f.components[k].push(Monomial {
                coef: *v,
                powers: [0; 3],
            });
        }
        f
    }

    /// Adds `coef · y^powers` to component `k`.
    pub fn with_term(mut self, k: usize, coef: f64, powers: [u32; 3]) -> Self {
        self.components[k].push(Monomial { coef, powers });
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for comp in out.components.iter_mut() {
            for m in comp.iter_mut() {
                m.coef *= factor;
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.components
            .iter()
            .flatten()
            .map(|m| m.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }
}

impl Field3 for PolynomialField {
    fn eval(&self, y: Point) -> Point {
        let mut out = [0.0; 3];
        for (k, comp) in self.components.iter().enumerate() {
            out[k] = comp.iter().map(|m| m.eval(y)).sum();
        }
        out
    }
}

/// Smooth stand-in for a Brownian component: a truncated random Fourier
/// series `Σ_m a_{ν,m} sin(k_m · y + φ_{ν,m})` drawn once from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFourierField {
    wavevectors: Vec<Point>,
    amplitudes: Vec<Point>,
    phases: Vec<Point>,
}

impl RandomFourierField {
    /// `modes` terms, amplitudes of total standard deviation `amplitude`
    /// per component, wavevector components of standard deviation
    /// `2π / wavelength`.
    pub fn new(seed: u64, modes: usize, amplitude: f64, wavelength: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("random Fourier field needs at least one mode"));
        }
        if !(wavelength > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid(
                "random Fourier field needs finite amplitude and positive wavelength",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kscale = 2.0 * PI / wavelength;
        let ascale = amplitude / (modes as f64).sqrt();
        let mut normal = |s: f64| -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        };
        let mut wavevectors = Vec::with_capacity(modes);
        let mut amplitudes = Vec::with_capacity(modes);
        for _ in 0..modes {
            wavevectors.push([normal(kscale), normal(kscale), normal(kscale)]);
            amplitudes.push([normal(ascale), normal(ascale), normal(ascale)]);
        }
        let phases = (0..modes)
            .map(|_| {
                [
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ]
            })
            .collect();
        Ok(RandomFourierField {
            wavevectors,
            amplitudes,
            phases,
        })
    }
}

impl Field3 for RandomFourierField {
    fn eval(&self, y: Point) -> Point {
        let mut out = [0.0; 3];
        for ((k, a), p) in self.wavevectors.iter().zip(&self.amplitudes).zip(&self.phases) {
            let arg = k[0] * y[0] + k[1] * y[1] + k[2] * y[2];
            for nu in 0..3 {
                out[nu] += a[nu] * (arg + p[nu]).sin();
            }
        }
        out
    }
}

/// Serializable description of one component field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero {},
    Polynomial {
        components: [Vec<Monomial>; 3],
    },
    RandomFourier {
        seed: u64,
        modes: usize,
        amplitude: f64,
        wavelength: f64,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<Arc<dyn Field3>> {
        Ok(match self {
            FieldSpec::Zero {} => Arc::new(PolynomialField::zero()),
            FieldSpec::Polynomial { components } => Arc::new(PolynomialField {
                components: components.clone(),
            }),
            FieldSpec::RandomFourier {
                seed,
                modes,
                amplitude,
                wavelength,
            } => Arc::new(RandomFourierField::new(*seed, *modes, *amplitude, *wavelength)?),
        })
    }
}

/// A gradient field `(v + b) ∂`: drift part `v` and fixed noise realisation `b`.
#[derive(Clone)]
pub struct VectorField {
    drift: Arc<dyn Field3>,
    noise: Arc<dyn Field3>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("VectorField { .. }")
    }
}

impl VectorField {
    pub fn new(drift: impl Field3 + 'static, noise: impl Field3 + 'static) -> Self {
        VectorField {
            drift: Arc::new(drift),
            noise: Arc::new(noise),
        }
    }

    pub fn from_arcs(drift: Arc<dyn Field3>, noise: Arc<dyn Field3>) -> Self {
        VectorField { drift, noise }
    }

    pub fn drift_only(drift: impl Field3 + 'static) -> Self {
        Self::new(drift, PolynomialField::zero())
    }

    pub fn drift(&self) -> &dyn Field3 {
        self.drift.as_ref()
    }

    pub fn noise(&self) -> &dyn Field3 {
        self.noise.as_ref()
    }

    /// Total component `v + b` at `y`.
    pub fn eval(&self, y: Point) -> Point {
        let v = self.drift.eval(y);
        let b = self.noise.eval(y);
        [v[0] + b[0], v[1] + b[1], v[2] + b[2]]
    }
}

impl Field3 for VectorField {
    fn eval(&self, y: Point) -> Point {
        VectorField::eval(self, y)
    }
}

/// The bracket `[V, U]` viewed as a drift-only field, for nested brackets.
pub struct BracketField {
    pub v: VectorField,
    pub u: VectorField,
    pub spacing: f64,
}

impl Field3 for BracketField {
    fn eval(&self, y: Point) -> Point {
        lie_bracket(&self.v, &self.u, y, self.spacing).unwrap_or([f64::NAN; 3])
    }
}

/// Jacobian `J[μ][ν] = ∂_μ f_ν` by the fourth-order five-point central
/// stencil (exact for polynomials of degree ≤ 4 up to rounding).
pub fn jacobian(f: &dyn Field3, y: Point, h: f64) -> [[f64; 3]; 3] {
    let mut jac = [[0.0; 3]; 3];
    for mu in 0..3 {
        let at = |t: f64| {
            let mut p = y;
            p[mu] += t;
            f.eval(p)
        };
        let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
        for nu in 0..3 {
            jac[mu][nu] = (-p2[nu] + 8.0 * p1[nu] - 8.0 * m1[nu] + m2[nu]) / (12.0 * h);
        }
    }
    jac
}

fn directional(a: Point, jac: &[[f64; 3]; 3]) -> Point {
    let mut out = [0.0; 3];
    for nu in 0..3 {
        out[nu] = a[0] * jac[0][nu] + a[1] * jac[1][nu] + a[2] * jac[2][nu];
    }
    out
}

fn commutator(a: Point, ja: &[[f64; 3]; 3], b: Point, jb: &[[f64; 3]; 3]) -> Point {
    let ab = directional(a, jb);
    let ba = directional(b, ja);
    [ab[0] - ba[0], ab[1] - ba[1], ab[2] - ba[2]]
}

const TERMS: [&str; 4] = [
    "v·∂u − u·∂v",
    "v·∂w − w·∂v",
    "b·∂u − u·∂b",
    "b·∂w − w·∂b",
];

/// The four commutator terms of `[V, U]` at `y`, in the order
/// drift/drift, drift/noise, noise/drift, noise/noise.
pub fn bracket_terms(v: &VectorField, u: &VectorField, y: Point, spacing: f64) -> Result<[Point; 4]> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    if y.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("evaluation point must be finite"));
    }
    let (vd, vn, ud, un) = (v.drift(), v.noise(), u.drift(), u.noise());
    let (vv, bb, uu, ww) = (vd.eval(y), vn.eval(y), ud.eval(y), un.eval(y));
    let (jv, jb, ju, jw) = (
        jacobian(vd, y, spacing),
        jacobian(vn, y, spacing),
        jacobian(ud, y, spacing),
        jacobian(un, y, spacing),
    );
    let terms = [
        commutator(vv, &jv, uu, &ju),
        commutator(vv, &jv, ww, &jw),
        commutator(bb, &jb, uu, &ju),
        commutator(bb, &jb, ww, &jw),
    ];
    for (t, name) in terms.iter().zip(TERMS) {
        if t.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                term: name.into(),
                location: format!("{y:?}"),
            });
        }
    }
    Ok(terms)
}

/// Covariant components of `[∇_V, ∇_U]` at `y`.
pub fn lie_bracket(v: &VectorField, u: &VectorField, y: Point, spacing: f64) -> Result<Point> {
    let t = bracket_terms(v, u, y, spacing)?;
    let mut out = [0.0; 3];
    for nu in 0..3 {
        out[nu] = (t[0][nu] + t[1][nu]) + (t[2][nu] + t[3][nu]);
    }
    Ok(out)
}

/// `1e-4` of the region's diagonal.
pub fn default_spacing(region: &GridSpec) -> f64 {
    let diag: f64 = region
        .axes()
        .iter()
        .map(|a| (a.end - a.start).powi(2))
        .sum::<f64>()
        .sqrt();
    1e-4 * diag
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub present: bool,
    pub max_norm: f64,
    pub location: Point,
}

/// Scans every node of a rank-3 region for a bracket exceeding `tolerance`.
pub fn curvature_present(
    v: &VectorField,
    u: &VectorField,
    region: &GridSpec,
    tolerance: f64,
) -> Result<CurvatureReport> {
    if region.rank() != 3 {
        return Err(Error::invalid(format!(
            "region must be three-dimensional, got rank {}",
            region.rank()
        )));
    }
    let h = default_spacing(region);
    let norms: Vec<Result<f64>> = (0..region.len())
        .into_par_iter()
        .map(|node| {
            let c = region.coords(node);
            let b = lie_bracket(v, u, [c[0], c[1], c[2]], h)?;
            Ok((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt())
        })
        .collect();
    let mut best = (0.0, 0usize);
    for (node, n) in norms.into_iter().enumerate() {
        let n = n?;
        if n > best.0 {
            best = (n, node);
        }
    }
    let c = region.coords(best.1);
    Ok(CurvatureReport {
        present: best.0 > tolerance,
        max_norm: best.0,
        location: [c[0], c[1], c[2]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> GridSpec {
        GridSpec::world_volume((0.0, 1.0, 5), (0.0, 1.0, 5), (0.0, 1.0, 5)).unwrap()
    }

    #[test]
    fn constant_fields_commute() {
        let v = VectorField::drift_only(PolynomialField::constant([1.0, -2.0, 0.5]));
        let u = VectorField::drift_only(PolynomialField::constant([3.0, 0.0, 1.0]));
        assert_eq!(lie_bracket(&v, &u, [0.3, 0.2, 0.1], 1e-4).unwrap(), [0.0; 3]);
    }

    #[test]
    fn shear_pair() {
        // V = (y₂, 0, 0), U = (0, y₁, 0): [V,U] = (−y₁, y₂, 0)
        let v = VectorField::drift_only(PolynomialField::zero().with_term(0, 1.0, [0, 1, 0]));
        let u = VectorField::drift_only(PolynomialField::zero().with_term(1, 1.0, [1, 0, 0]));
        let y = [0.4, 0.7, 0.2];
        let b = lie_bracket(&v, &u, y, 1e-4).unwrap();
        assert!((b[0] + 0.4).abs() < 1e-10);
        assert!((b[1] - 0.7).abs() < 1e-10);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn identical_noise_cancels() {
        let noise = RandomFourierField::new(5, 8, 1.0, 2.0).unwrap();
        let v = VectorField::new(PolynomialField::zero(), noise.clone());
        let u = VectorField::new(PolynomialField::zero(), noise);
        let t = bracket_terms(&v, &u, [0.1, 0.5, 0.9], 1e-4).unwrap();
        assert_eq!(t[3], [0.0; 3]);
    }

    #[test]
    fn coordinate_fields_are_flat() {
        let e1 = VectorField::drift_only(PolynomialField::constant([1.0, 0.0, 0.0]));
        let e2 = VectorField::drift_only(PolynomialField::constant([0.0, 1.0, 0.0]));
        let r = curvature_present(&e1, &e2, &cube(), 1e-6).unwrap();
        assert!(!r.present);
        assert_eq!(r.max_norm, 0.0);
    }

    #[test]
    fn rotation_against_translation() {
        let rot = VectorField::drift_only(
            PolynomialField::zero()
                .with_term(0, -1.0, [0, 1, 0])
                .with_term(1, 1.0, [1, 0, 0]),
        );
        let tr = VectorField::drift_only(PolynomialField::constant([1.0, 0.0, 0.0]));
        let r = curvature_present(&rot, &tr, &cube(), 1e-6).unwrap();
        assert!(r.present);
        assert!((r.max_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn self_bracket_vanishes() {
        let f = RandomFourierField::new(1, 6, 1.0, 1.5).unwrap();
        let v = VectorField::drift_only(f);
        let r = curvature_present(&v, &v.clone(), &cube(), 1e-9).unwrap();
        assert!(!r.present);
    }

    #[test]
    fn non_finite_term_is_named() {
        let bad = VectorField::new(PolynomialField::zero(), |_y: Point| [f64::NAN, 0.0, 0.0]);
        let ok = VectorField::drift_only(PolynomialField::constant([1.0, 0.0, 0.0]));
        match lie_bracket(&ok, &bad, [0.0; 3], 1e-3) {
            Err(Error::NonFinite { term, .. }) => assert_eq!(term, TERMS[1]),
            other => panic!("expected non-finite error, got {other:?}"),
        }
        assert!(lie_bracket(&ok, &ok, [0.0; 3], 0.0).is_err());
    }

    #[test]
    fn field_spec_json() {
        let spec: FieldSpec = serde_json::from_str(
            r#"{"kind":"polynomial","components":[[{"coef":2.0,"powers":[1,0,0]}],[],[]]}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap().eval([3.0, 0.0, 0.0]), [6.0, 0.0, 0.0]);
        assert!(serde_json::from_str::<FieldSpec>(r#"{"kind":"zero","x":1}"#).is_err());
    }
}
