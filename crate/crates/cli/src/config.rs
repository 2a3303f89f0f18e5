//! Input documents for the single-module subcommands.

use std::path::{Path, PathBuf};

use semicoop::geometry::Signature;
use semicoop::lie::FieldSpec;
use semicoop::propagator::{KernelMode, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = semicoop::io::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Relative paths inside a config resolve against the config's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn zero_field() -> FieldSpec {
    FieldSpec::Zero {}
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPair {
    pub drift: FieldSpec,
    #[serde(default = "zero_field")]
    pub noise: FieldSpec,
}

/// Two gradient fields and an optional difference spacing.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieScenario {
    pub v: FieldPair,
    pub u: FieldPair,
    #[serde(default)]
    pub spacing: Option<f64>,
}

/// A constant or a scalar grid file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarInput {
    Value(f64),
    File(PathBuf),
}

fn riemannian() -> Signature {
    Signature::Riemannian
}

fn half() -> f64 {
    0.5
}

fn two() -> f64 {
    2.0
}

fn default_epsilon() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    /// World-volume metric, 3×3 blocks on a rank-3 grid.
    pub metric: PathBuf,
    #[serde(default = "riemannian")]
    pub signature: Signature,
    /// 11×11 background blocks; identity when absent.
    #[serde(default)]
    pub background: Option<PathBuf>,
    /// One scalar grid per background direction; linear when absent.
    #[serde(default)]
    pub embedding: Option<Vec<PathBuf>>,
    #[serde(default)]
    pub lambda: Option<ScalarInput>,
    /// Computed from the metric when absent.
    #[serde(default)]
    pub ricci_scalar: Option<ScalarInput>,
    #[serde(default)]
    pub profit_weight: Option<ScalarInput>,
    #[serde(default)]
    pub residual: Option<ScalarInput>,
    /// 3×3 blocks of `e^{ab}`.
    #[serde(default)]
    pub ghost_e: Option<PathBuf>,
    /// 3×1 blocks of `c^a`.
    #[serde(default)]
    pub ghost_c: Option<PathBuf>,
    #[serde(default = "half")]
    pub omega: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub xbar: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn sixteen() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub kernel: KernelSpec,
    /// Gauss–Legendre nodes per panel.
    #[serde(default = "sixteen")]
    pub nodes: usize,
    /// Draws for the two-point estimate; skipped when zero.
    #[serde(default)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneGrid {
    pub nodes: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub sigma0: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub momentum: [f64; 2],
}

/// Dependence of `F⁰` on the degree of cooperation.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum F0Profile {
    Constant {},
    Linear {},
    Quadratic { vertex: f64 },
}

impl F0Profile {
    pub fn shape(&self, rho: f64) -> f64 {
        match *self {
            F0Profile::Constant {} => 1.0,
            F0Profile::Linear {} => rho,
            F0Profile::Quadratic { vertex } => 1.0 - (rho - vertex).powi(2),
        }
    }
}

fn identity2() -> [f64; 4] {
    [1.0, 0.0, 0.0, 1.0]
}

fn lorentzian() -> KernelMode {
    KernelMode::Lorentzian
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub mass: f64,
    pub epsilon: f64,
    pub f0: f64,
    #[serde(default = "lorentzian")]
    pub mode: KernelMode,
    pub grid: PlaneGrid,
    /// Constant 2×2 metric, row-major.
    #[serde(default = "identity2")]
    pub metric: [f64; 4],
    pub packet: Packet,
    #[serde(default = "twenty")]
    pub steps: usize,
    /// Used by `optimal-rho` only.
    #[serde(default)]
    pub profile: Option<F0Profile>,
}
