//! Geodesic strategy-polygon areas.
//!
//! A side of a polygon sweeps a region between its geodesic and the equator
//! of an ellipsoid patch; its area is
//!
//! ```text
//! A = r²(τ2 − τ1) + ∫_{ρ1}^{ρ2} ∫_{θ1}^{θ2} (1/k − r²) cos θ dθ dρ
//! ```
//!
//! with `r` the authalic radius and `k` the Gaussian curvature over the
//! patch. Side areas are then added, or split into an added and a
//! subtracted group when the sides lie on the same side of the equator.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_QUADRATURE_NODES: usize = 32;

/// Gaussian-curvature model over `(θ, ρ)` for a patch of authalic radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureModel {
    /// `k ≡ value`.
    Constant { value: f64 },
    /// `k ≡ factor / r²`; `factor = 1` is the sphere.
    RadiusScaled { factor: f64 },
    /// Oblate spheroid with semi-axes `equatorial ≥ polar`, geodetic latitude:
    /// `k = (1 − e² sin²θ)² / (a²(1 − e²))`.
    Spheroid { equatorial: f64, polar: f64 },
}

impl CurvatureModel {
    pub fn at(&self, radius: f64, theta: f64, _rho: f64) -> f64 {
        match *self {
            CurvatureModel::Constant { value } => value,
            CurvatureModel::RadiusScaled { factor } => factor / (radius * radius),
            CurvatureModel::Spheroid { equatorial, polar } => {
                let e2 = 1.0 - (polar * polar) / (equatorial * equatorial);
                let w = 1.0 - e2 * theta.sin().powi(2);
                w * w / (equatorial * equatorial * (1.0 - e2))
            }
        }
    }
}

/// One ellipsoid patch at a fixed time slice.
pub struct EllipsoidPatch<'a> {
    pub radius: f64,
    pub curvature: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub theta: (f64, f64),
    pub rho: (f64, f64),
    pub tau: (f64, f64),
}

impl EllipsoidPatch<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::domain(format!("radius must be positive, got {}", self.radius)));
        }
        let (t1, t2) = self.theta;
        if !(t1 < t2 && t1 > -FRAC_PI_2 && t2 < FRAC_PI_2) {
            return Err(Error::domain(format!(
                "latitudes must satisfy -π/2 < θ1 < θ2 < π/2, got [{t1}, {t2}]"
            )));
        }
        if !(self.rho.0 < self.rho.1) {
            return Err(Error::domain(format!(
                "longitudes must satisfy ρ1 < ρ2, got [{}, {}]",
                self.rho.0, self.rho.1
            )));
        }
        if !self.tau.0.is_finite() || !self.tau.1.is_finite() {
            return Err(Error::domain("azimuths must be finite"));
        }
        Ok(())
    }
}

fn rule(nodes: usize) -> Result<GaussLegendre> {
    let n = NonZeroUsize::new(nodes).ok_or_else(|| Error::invalid("quadrature needs at least one node"))?;
    Ok(GaussLegendre::new(n))
}

/// Tensor-product Gauss–Legendre integral of the correction term
/// `∬ (1/k − r²) cos θ dθ dρ`.
pub fn correction_term(patch: &EllipsoidPatch<'_>, quadrature_nodes: usize) -> Result<f64> {
    patch.validate()?;
    let gl = rule(quadrature_nodes)?;
    let pairs = gl.as_node_weight_pairs();
    let (t1, t2) = patch.theta;
    let (r1, r2) = patch.rho;
    let (ht, ct) = (0.5 * (t2 - t1), 0.5 * (t2 + t1));
    let (hr, cr) = (0.5 * (r2 - r1), 0.5 * (r2 + r1));
    let r2sq = patch.radius * patch.radius;
    let mut total = 0.0;
    for &(xr, wr) in pairs {
        let rho = cr + hr * xr;
        let mut inner = 0.0;
        for &(xt, wt) in pairs {
            let theta = ct + ht * xt;
            let k = (patch.curvature)(theta, rho);
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::domain(format!(
                    "Gaussian curvature must be positive, got {k} at θ = {theta}, ρ = {rho}"
                )));
            }
            inner += wt * (1.0 / k - r2sq) * theta.cos();
        }
        total += wr * inner;
    }
    Ok(total * ht * hr)
}

/// Area of the region swept by one geodesic side.
pub fn patch_area(patch: &EllipsoidPatch<'_>, quadrature_nodes: usize) -> Result<f64> {
    let corr = correction_term(patch, quadrature_nodes)?;
    Ok(patch.radius * patch.radius * (patch.tau.1 - patch.tau.0) + corr)
}

/// Side areas of one polygon and how to combine them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonAssembly {
    pub areas: Vec<f64>,
    /// All sides on the same side of the equator.
    pub same_side: bool,
    /// When `same_side`, the first `added` areas are summed and the rest
    /// subtracted.
    #[serde(default)]
    pub added: usize,
}

/// Combines side areas into the polygon area. Errors on a degenerate
/// (non-positive) difference.
pub fn assemble_polygon(sides: &PolygonAssembly) -> Result<f64> {
    if let Some(bad) = sides.areas.iter().position(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            term: "side area".into(),
            location: format!("side {bad}"),
        });
    }
    if !sides.same_side {
        if sides.areas.len() < 3 {
            return Err(Error::invalid(format!(
                "a polygon needs at least 3 sides, got {}",
                sides.areas.len()
            )));
        }
        // Summing in sorted order makes the result independent of side order.
        let mut sorted = sides.areas.clone();
        sorted.sort_by(f64::total_cmp);
        return Ok(sorted.iter().sum());
    }
    let l = sides.areas.len();
    if sides.added == 0 || sides.added >= l {
        return Err(Error::invalid(format!(
            "same-side assembly needs a non-empty added group and subtracted group, got {} of {l}",
            sides.added
        )));
    }
    let plus: f64 = sides.areas[..sides.added].iter().sum();
    let minus: f64 = sides.areas[sides.added..].iter().sum();
    let area = plus - minus;
    if area <= 0.0 {
        return Err(Error::domain(format!(
            "degenerate polygon: added sides {plus} do not exceed subtracted sides {minus}"
        )));
    }
    Ok(area)
}

/// `α^ρ̂ · A`, the part of a polygon a firm commits with cooperation `ρ̂`.
pub fn effective_region(area: f64, alpha: f64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha must lie in [0,1], got {alpha}")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("degree of cooperation must lie in (0,1], got {rho}")));
    }
    if !(area >= 0.0) {
        return Err(Error::domain(format!("area must be non-negative, got {area}")));
    }
    Ok(alpha.powf(rho) * area)
}

/// A scalar patch parameter, either fixed or linear in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeParam {
    Fixed(f64),
    Linear { value: f64, rate: f64 },
}

impl TimeParam {
    pub fn at(&self, s: f64) -> f64 {
        match *self {
            TimeParam::Fixed(v) => v,
            TimeParam::Linear { value, rate } => value + rate * s,
        }
    }
}

/// Serializable patch description; every parameter may depend on `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub radius: TimeParam,
    pub curvature: CurvatureModel,
    pub theta: [TimeParam; 2],
    pub rho: [TimeParam; 2],
    pub tau: [TimeParam; 2],
}

impl PatchSpec {
    pub fn area_at(&self, s: f64, quadrature_nodes: usize) -> Result<f64> {
        let radius = self.radius.at(s);
        let model = self.curvature;
        let k = move |theta: f64, rho: f64| model.at(radius, theta, rho);
        let patch = EllipsoidPatch {
            radius,
            curvature: &k,
            theta: (self.theta[0].at(s), self.theta[1].at(s)),
            rho: (self.rho[0].at(s), self.rho[1].at(s)),
            tau: (self.tau[0].at(s), self.tau[1].at(s)),
        };
        patch_area(&patch, quadrature_nodes)
    }
}

/// One side of a scenario polygon: a patch or a precomputed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideSpec {
    Area { area: f64 },
    Patch(PatchSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSpec {
    pub sides: Vec<SideSpec>,
    #[serde(default)]
    pub same_side: bool,
    #[serde(default)]
    pub added: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonReport {
    pub area: f64,
    pub per_side: Vec<f64>,
}

impl PolygonSpec {
    pub fn evaluate(&self, s: f64, quadrature_nodes: usize) -> Result<PolygonReport> {
        let per_side = self
            .sides
            .iter()
            .map(|side| match side {
                SideSpec::Area { area } => Ok(*area),
                SideSpec::Patch(p) => p.area_at(s, quadrature_nodes),
            })
            .collect::<Result<Vec<f64>>>()?;
        let area = assemble_polygon(&PolygonAssembly {
            areas: per_side.clone(),
            same_side: self.same_side,
            added: self.added,
        })?;
        Ok(PolygonReport { area, per_side })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere_patch(r: f64, k: &(dyn Fn(f64, f64) -> f64 + Sync), tau: (f64, f64)) -> EllipsoidPatch<'_> {
        EllipsoidPatch {
            radius: r,
            curvature: k,
            theta: (-0.3, 0.9),
            rho: (0.1, 1.7),
            tau,
        }
    }

    #[test]
    fn sphere_area_is_exact() {
        for r in [0.5, 1.0, 2.0, 3.7] {
            let k = move |_: f64, _: f64| 1.0 / (r * r);
            for nodes in [1, 4, 32] {
                let p = sphere_patch(r, &k, (0.2, 1.1));
                assert!(correction_term(&p, nodes).unwrap().abs() < 1e-14);
            }
            let p = sphere_patch(r, &k, (0.4, 0.4));
            assert!(patch_area(&p, 32).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn half_curvature_closed_form() {
        let k = |_: f64, _: f64| 0.5;
        let p = EllipsoidPatch {
            radius: 1.0,
            curvature: &k,
            theta: (0.0, PI / 6.0),
            rho: (0.0, PI / 4.0),
            tau: (0.0, 1.0),
        };
        let expected = 1.0 + PI / 8.0;
        assert!((patch_area(&p, 32).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn non_positive_curvature_rejected() {
        let k = |theta: f64, _: f64| theta;
        let p = EllipsoidPatch {
            radius: 1.0,
            curvature: &k,
            theta: (-0.2, 0.5),
            rho: (0.0, 1.0),
            tau: (0.0, 1.0),
        };
        assert!(matches!(patch_area(&p, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_patches_rejected() {
        let k = |_: f64, _: f64| 1.0;
        let mut p = EllipsoidPatch {
            radius: 1.0,
            curvature: &k,
            theta: (0.5, 0.2),
            rho: (0.0, 1.0),
            tau: (0.0, 1.0),
        };
        assert!(patch_area(&p, 8).is_err());
        p.theta = (-1.0, 1.6);
        assert!(patch_area(&p, 8).is_err());
        p.theta = (0.0, 0.5);
        p.radius = 0.0;
        assert!(patch_area(&p, 8).is_err());
    }

    #[test]
    fn assembly_cases() {
        let plain = PolygonAssembly {
            areas: vec![2.0, 3.0, 4.0],
            same_side: false,
            added: 0,
        };
        assert_eq!(assemble_polygon(&plain).unwrap(), 9.0);
        let split = PolygonAssembly {
            areas: vec![5.0, 2.0],
            same_side: true,
            added: 1,
        };
        assert_eq!(assemble_polygon(&split).unwrap(), 3.0);
        let degenerate = PolygonAssembly {
            areas: vec![2.0, 5.0],
            same_side: true,
            added: 1,
        };
        assert!(matches!(assemble_polygon(&degenerate), Err(Error::Domain(_))));
    }

    #[test]
    fn effective_region_cases() {
        assert_eq!(effective_region(8.0, 0.25, 0.5).unwrap(), 4.0);
        assert_eq!(effective_region(7.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(effective_region(3.5, 1.0, 0.3).unwrap(), 3.5);
        assert!(effective_region(1.0, 0.5, 0.0).is_err());
        assert!(effective_region(1.0, 1.5, 0.5).is_err());
        assert!(effective_region(1.0, -0.1, 0.5).is_err());
    }

    #[test]
    fn spheroid_curvature_limits() {
        let sphere = CurvatureModel::Spheroid { equatorial: 2.0, polar: 2.0 };
        assert!((sphere.at(2.0, 0.3, 0.0) - 0.25).abs() < 1e-15);
        // Oblate: flatter (smaller k) at the pole than on the equator.
        let oblate = CurvatureModel::Spheroid { equatorial: 1.0, polar: 0.9 };
        assert!(oblate.at(1.0, 1.4, 0.0) < oblate.at(1.0, 0.0, 0.0));
    }

    #[test]
    fn scenario_sides_from_json() {
        let json = r#"{
            "sides": [
                {"area": 2.0},
                {"radius": 1.0, "curvature": {"kind": "radius_scaled", "factor": 1.0},
                 "theta": [0.0, 0.5], "rho": [0.0, 1.0], "tau": [0.0, {"value": 1.0, "rate": 0.5}]},
                {"area": 1.5}
            ]
        }"#;
        let spec: PolygonSpec = serde_json::from_str(json).unwrap();
        let report = spec.evaluate(2.0, 16).unwrap();
        assert!((report.per_side[1] - 2.0).abs() < 1e-14);
        assert!((report.area - 5.5).abs() < 1e-14);
    }
}
