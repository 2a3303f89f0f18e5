//! Scenario files: one strict JSON document describing a full run.
//!
//! Unknown keys are rejected. Range checks from every module run up front and
//! all violations are reported together.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{MetricField, Signature};
use crate::grid::{Axis, GridSpec};
use crate::polygon::{PolygonSpec, DEFAULT_QUADRATURE_NODES};
use crate::sde::FirmState;

/// World-volume metric `h_{ab}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Flat {},
    /// The same symmetric 3×3 matrix at every node, row-major.
    Constant { matrix: [f64; 9] },
    /// `h_{ab} = (1 + amplitude · sin(σ₁) cos(σ₂)) δ_{ab}`.
    Conformal { amplitude: f64 },
    /// Metric stored in the binary grid format; relative paths resolve
    /// against the scenario file's directory.
    File {
        path: PathBuf,
        #[serde(default = "riemannian")]
        signature: Signature,
    },
}

fn riemannian() -> Signature {
    Signature::Riemannian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GffConfig {
    pub gamma: f64,
    /// Falls back to a seed derived from the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub mass: f64,
    pub epsilon: f64,
    pub omega: f64,
    /// Defaults to the stubbornness measure `Q(γ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub xbar: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            horizon: 1.0,
            steps: 50,
            paths: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Nodes per axis of the square strategy grid.
    pub nodes: usize,
    pub half_width: f64,
    /// Initial packet width.
    pub sigma0: f64,
    pub steps: usize,
    /// Points of the `ρ̂` search grid.
    pub rho_grid: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            nodes: 65,
            half_width: 6.0,
            sigma0: 1.0,
            steps: 20,
            rho_grid: 32,
        }
    }
}

/// How the profit weight depends on the degree of cooperation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfitModel {
    /// `π = α₁^ρ̂ 𝒜`, the effective strategy region.
    Linear {},
    /// Synthetic: unit profit and `F⁰(ρ̂)` scaled by `1 − (ρ̂ − vertex)²`.
    Quadratic { vertex: f64 },
}

impl Default for ProfitModel {
    fn default() -> Self {
        ProfitModel::Linear {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Three axes: time, σ₁, σ₂.
    pub grid: Vec<Axis>,
    pub metric: MetricConfig,
    pub firms: Vec<FirmState>,
    #[serde(default)]
    pub polygons: Vec<PolygonSpec>,
    pub gff: GffConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub sde: SdeConfig,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub profit: ProfitModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        if self.grid.len() != 3 {
            return Err(Error::invalid(format!(
                "scenario grid needs 3 axes (time, σ₁, σ₂), got {}",
                self.grid.len()
            )));
        }
        GridSpec::new(self.grid.clone())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_metric(&self, grid: &GridSpec) -> Result<MetricField> {
        match &self.metric {
            MetricConfig::Flat {} => Ok(MetricField::flat(grid.clone())),
            MetricConfig::Constant { matrix } => MetricField::constant(grid.clone(), matrix, Signature::Riemannian),
            MetricConfig::Conformal { amplitude } => {
                let a = *amplitude;
                MetricField::from_fn(grid.clone(), 3, Signature::Riemannian, |x| {
                    let w = 1.0 + a * x[1].sin() * x[2].cos();
                    vec![w, 0.0, 0.0, 0.0, w, 0.0, 0.0, 0.0, w]
                })
            }
            MetricConfig::File { path, signature } => {
                let m = crate::io::read_grid(&self.resolve(path))?.to_metric(*signature)?;
                m.grid().ensure_same(grid, "metric file")?;
                Ok(m)
            }
        }
    }

    /// Area of firm `i`'s polygon at `s = 0`, if the scenario lists one.
    pub fn firm_area(&self, i: usize) -> Result<Option<f64>> {
        match self.polygons.get(i) {
            Some(p) => Ok(Some(p.evaluate(0.0, DEFAULT_QUADRATURE_NODES)?.area)),
            None => Ok(None),
        }
    }

    /// `Q`, from the kernel block or from `γ`.
    pub fn q(&self) -> Result<f64> {
        match self.kernel.q {
            Some(q) => Ok(q),
            None => crate::gff::stubbornness_measure(self.gff.gamma),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.grid_spec() {
            v.push(format!("grid: {e}"));
        } else if self.grid[1].nodes < 4 || self.grid[2].nodes < 4 {
            v.push("grid: strategy axes need at least 4 nodes for the free-field sample".into());
        }
        match &self.metric {
            MetricConfig::File { path, .. } => {
                let full = self.resolve(path);
                if !full.is_file() {
                    v.push(format!("metric file {} does not exist", full.display()));
                }
            }
            MetricConfig::Constant { matrix } => {
                if matrix.iter().any(|x| !x.is_finite()) {
                    v.push("metric: matrix must be finite".into());
                }
                for a in 0..3 {
                    for b in 0..a {
                        if matrix[a * 3 + b] != matrix[b * 3 + a] {
                            v.push("metric: matrix must be symmetric".into());
                        }
                    }
                }
            }
            MetricConfig::Conformal { amplitude } => {
                if !(amplitude.abs() < 1.0) {
                    v.push(format!("metric: conformal amplitude must lie in (-1,1), got {amplitude}"));
                }
            }
            MetricConfig::Flat {} => {}
        }
        if self.firms.is_empty() {
            v.push("at least one firm is required".into());
        }
        for (i, f) in self.firms.iter().enumerate() {
            if f.x0.len() != 3 {
                v.push(format!("firms[{i}]: x0 needs 3 components, got {}", f.x0.len()));
            }
            if !(f.stubbornness > 0.0) {
                v.push(format!("firms[{i}]: stubbornness must be positive, got {}", f.stubbornness));
            }
            let area = match self.firm_area(i) {
                Ok(a) => a,
                Err(e) => {
                    v.push(format!("polygons[{i}]: {e}"));
                    None
                }
            };
            for msg in f.violations(area) {
                v.push(format!("firms[{i}]: {msg}"));
            }
        }
        if !(self.gff.gamma > 0.0 && self.gff.gamma <= 2.0) {
            v.push(format!("gamma must lie in (0,2], got {}", self.gff.gamma));
        }
        let k = &self.kernel;
        if !(k.mass > 0.0 && k.mass.is_finite()) {
            v.push(format!("kernel: M must be positive, got {}", k.mass));
        }
        if !(k.epsilon > 0.0 && k.epsilon.is_finite()) {
            v.push(format!("kernel: epsilon must be positive, got {}", k.epsilon));
        }
        if !(k.omega > 0.0 && k.omega < 1.0) {
            v.push(format!("kernel: omega must lie in (0,1), got {}", k.omega));
        }
        if !k.xbar.is_finite() || !k.lambda.is_finite() || k.q.is_some_and(|q| !q.is_finite()) {
            v.push("kernel: xbar, lambda and Q must be finite".into());
        }
        let s = &self.sde;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) || s.steps == 0 || s.paths == 0 {
            v.push("sde: horizon, steps and paths must be positive".into());
        }
        let e = &self.evolution;
        if e.nodes < 5 {
            v.push(format!("evolution: need at least 5 nodes per axis, got {}", e.nodes));
        }
        if !(e.half_width > 0.0 && e.sigma0 > 0.0) {
            v.push("evolution: half_width and sigma0 must be positive".into());
        }
        if e.rho_grid < 16 {
            v.push(format!("evolution: rho_grid must be at least 16, got {}", e.rho_grid));
        }
        if let ProfitModel::Quadratic { vertex } = self.profit {
            if !(vertex > 0.0 && vertex <= 1.0) {
                v.push(format!("profit: vertex must lie in (0,1], got {vertex}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Violations(v))
        }
    }

    /// Canonical JSON without the output directory.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        Ok(serde_json::to_string(&c)?)
    }

    /// Seed for one stage, derived from the master seed and a fixed label.
    pub fn stage_seed(&self, label: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(label.as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Parses and validates a scenario from text.
pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = crate::io::read_text(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario_str(&text, &base)
}
