//! End-to-end run: geometry, coefficients, market paths, action, the
//! effective scalar, evolution and the optimal degree of cooperation.
//!
//! Every artifact is written under the output directory and listed in
//! `manifest.json` with its SHA-256. The manifest holds no timestamps or
//! absolute paths, so identical inputs give identical manifests.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::brane::{action_terms, evaluate_action, fp_determinant, sde_residual, BraneConfiguration, MAX_FP_DOF};
use crate::error::{Error, Result};
use crate::geometry::{christoffel, combined_metric, curvature, ChristoffelField, MetricField, Signature};
use crate::gff::StubbornnessField;
use crate::grid::GridSpec;
use crate::io::{self, GridFile};
use crate::propagator::{
    assemble_rhs, effective_scalar_f, evolve, optimal_rho, potential_v, KernelMode, KernelSpec, RhoReport,
    TensorField, WaveFunction,
};
use crate::scenario::{ProfitModel, ScenarioConfig};
use crate::sde::{derive_coefficients, simulate, PathEnsemble};
use crate::VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub name: String,
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
    pub validation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub rho: Option<RhoReport>,
    pub failure: Option<Failure>,
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn emit(&mut self, name: &str, file: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.dir.join(file);
        io::write_bytes(&path, &bytes)?;
        self.manifest.artifacts.push(Artifact {
            name: name.into(),
            file: file.into(),
            sha256: io::sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn grid(&mut self, name: &str, file: &str, g: &GridFile) -> Result<()> {
        self.emit(name, file, io::encode_grid(g)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, file, text.into_bytes())
    }

    fn stage(&mut self, name: &str, diagnostics: Vec<String>) {
        self.manifest.stages.push(StageRecord {
            name: name.into(),
            status: StageStatus::Ok,
            diagnostics,
        });
    }
}

#[derive(Serialize)]
struct ActionSummary {
    action: f64,
    ghost: Option<f64>,
    logdet_fp: Option<f64>,
    fp_singular: Option<bool>,
}

#[derive(Serialize)]
struct EvolutionSummary {
    f0: f64,
    steps: usize,
    s: f64,
    norm: f64,
    cfl_ratio: f64,
    max_norm_drift: f64,
    warning: Option<String>,
}

/// Pieces of the `F` right-hand side that do not depend on `ρ̂`, on the
/// first time slice.
struct FSlice {
    kinetic: Vec<f64>,
    transverse: Vec<f64>,
    rest: Vec<f64>,
}

impl FSlice {
    /// Mean of `F` over the slice at profit weight `w`.
    fn f0(&self, w: f64, omega: f64) -> f64 {
        let n = self.kinetic.len() as f64;
        let mut s = 0.0;
        for i in 0..self.kinetic.len() {
            s += (self.rest[i] + self.kinetic[i] * w.powf(omega) - self.transverse[i] * w.powf(1.0 - omega))
                / crate::propagator::BACKGROUND_TRACE;
        }
        s / n
    }
}

fn profit_weight(cfg: &ScenarioConfig, rho: f64) -> Result<f64> {
    let firm = &cfg.firms[0];
    match cfg.profit {
        ProfitModel::Linear {} => {
            let area = cfg.firm_area(0)?.unwrap_or(1.0);
            Ok(crate::polygon::effective_region(area, firm.alpha1, rho)? * firm.stubbornness)
        }
        ProfitModel::Quadratic { .. } => Ok(firm.stubbornness),
    }
}

fn profit_shape(cfg: &ScenarioConfig, rho: f64) -> f64 {
    match cfg.profit {
        ProfitModel::Linear {} => 1.0,
        ProfitModel::Quadratic { vertex } => 1.0 - (rho - vertex).powi(2),
    }
}

/// Mean share of the ensemble's first component at time `s`, linear in
/// between recorded steps.
fn mean_share_at(ens: &PathEnsemble, s: f64) -> f64 {
    let pos = (s / ens.dt).clamp(0.0, ens.steps as f64);
    let k = (pos.floor() as usize).min(ens.steps.saturating_sub(1));
    let t = pos - k as f64;
    let (a, _) = ens.moments(k, 0);
    let (b, _) = ens.moments((k + 1).min(ens.steps), 0);
    a + t * (b - a)
}

/// Runs every stage in order. A failing stage stops the run; the manifest
/// written so far records it.
pub fn run_pipeline(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut run = Run {
        dir: out_dir.to_path_buf(),
        manifest: Manifest {
            version: VERSION.into(),
            seed: cfg.seed,
            config_sha256: io::sha256_hex(cfg.canonical_json()?.as_bytes()),
            stages: Vec::new(),
            artifacts: Vec::new(),
        },
    };
    let mut rho_out = None;
    let mut stage = String::from("validate");
    let result = stages(cfg, &mut run, &mut stage, &mut rho_out);
    let failure = result.err().map(|e| {
        run.manifest.stages.push(StageRecord {
            name: stage.clone(),
            status: StageStatus::Failed,
            diagnostics: vec![e.to_string()],
        });
        Failure {
            stage: stage.clone(),
            message: e.to_string(),
            validation: e.is_validation(),
        }
    });
    let text = serde_json::to_string_pretty(&run.manifest)? + "\n";
    io::write_text(&out_dir.join("manifest.json"), &text)?;
    Ok(RunReport {
        out_dir: out_dir.to_path_buf(),
        manifest: run.manifest,
        rho: rho_out,
        failure,
    })
}

fn stages(cfg: &ScenarioConfig, run: &mut Run, stage: &mut String, rho_out: &mut Option<RhoReport>) -> Result<()> {
    cfg.validate()?;
    run.stage("validate", Vec::new());

    *stage = "geometry".into();
    let grid = cfg.grid_spec()?;
    let metric = cfg.build_metric(&grid)?;
    let chr = christoffel(&metric)?;
    let bundle = curvature(&metric, &chr)?;
    let d = metric.dim();
    run.grid("metric", "metric.bin", &GridFile::metric(&metric))?;
    run.grid(
        "christoffel",
        "christoffel.bin",
        &GridFile::blocks(grid.clone(), d, d * d, chr.data().to_vec()),
    )?;
    run.grid(
        "ricci_scalar",
        "ricci_scalar.bin",
        &GridFile::scalar(grid.clone(), bundle.ricci_scalar().to_vec()),
    )?;
    run.stage(
        "geometry",
        vec![format!("max |Riemann| = {:e}", bundle.max_abs_riemann())],
    );

    *stage = "stubbornness".into();
    let (n0, n1, n2) = (grid.axis(0).nodes, grid.axis(1).nodes, grid.axis(2).nodes);
    let gff_seed = cfg.gff.seed.unwrap_or_else(|| cfg.stage_seed("gff"));
    let stub = StubbornnessField::sample(n1, n2, cfg.gff.gamma, gff_seed)?;
    let plane = GridSpec::new(vec![*grid.axis(1), *grid.axis(2)])?;
    run.grid("stubbornness", "stubbornness.bin", &GridFile::scalar(plane, stub.field.clone()))?;
    let b_field: Vec<f64> = (0..grid.len()).map(|n| stub.field[n % (n1 * n2)]).collect();
    let flat = MetricField::identity(grid.clone(), d);
    let combined = combined_metric(&bundle, &flat, &b_field, cfg.gff.gamma)?;
    run.grid("combined_metric", "combined_metric.bin", &GridFile::metric(&combined))?;
    run.stage("stubbornness", vec![format!("Q = {}", stub.q)]);

    *stage = "derive_coefficients".into();
    let coeffs = derive_coefficients(&metric, &chr)?;
    let mu: Vec<f64> = (0..grid.len()).flat_map(|n| coeffs.drift_at(n).to_vec()).collect();
    let omega: Vec<f64> = (0..grid.len()).flat_map(|n| coeffs.diffusion_at(n).to_vec()).collect();
    run.grid("drift", "drift.bin", &GridFile::blocks(grid.clone(), d, 1, mu))?;
    run.grid("diffusion", "diffusion.bin", &GridFile::blocks(grid.clone(), d, d, omega))?;
    run.stage("derive_coefficients", Vec::new());

    *stage = "simulate_sde".into();
    let mut ensembles = Vec::with_capacity(cfg.firms.len());
    let mut summaries = Vec::new();
    for (i, firm) in cfg.firms.iter().enumerate() {
        let ens = simulate(
            &coeffs,
            firm,
            cfg.sde.horizon,
            cfg.sde.steps,
            cfg.sde.paths,
            cfg.stage_seed(&format!("sde/{i}")),
        )?;
        run.emit(&format!("paths_{i}"), &format!("paths_{i}.bin"), io::encode_paths(&ens))?;
        summaries.push(ens.summary());
        ensembles.push(ens);
    }
    run.json("sde_summary", "sde_summary.json", &summaries)?;
    run.stage("simulate_sde", Vec::new());

    *stage = "action".into();
    let mut background = vec![0.0; grid.len() * 121];
    for n in 0..grid.len() {
        for a in 0..11 {
            background[n * 121 + a * 11 + a] = 1.0;
        }
        for a in 0..d {
            for b in 0..d {
                background[n * 121 + a * 11 + b] = combined.get(n, a, b);
            }
        }
    }
    let background = MetricField::new(grid.clone(), 11, Signature::Riemannian, background)?;
    let mut brane = BraneConfiguration::new(metric.clone(), background)?.with_linear_embedding();
    let share: Vec<f64> = (0..grid.len())
        .map(|n| mean_share_at(&ensembles[0], grid.coords(n)[0]))
        .collect();
    brane.embedding[3] = share.clone();
    brane.lambda = vec![cfg.kernel.lambda; grid.len()];
    brane.omega = cfg.kernel.omega;
    brane.q = cfg.q()?;
    brane.xbar = cfg.kernel.xbar;
    brane.ricci_scalar = bundle.ricci_scalar().to_vec();
    brane.profit_weight = vec![profit_weight(cfg, cfg.firms[0].rho_hat)?; grid.len()];
    let drift0: Vec<f64> = (0..grid.len()).map(|n| coeffs.drift_at(n)[0]).collect();
    let residual = sde_residual(&grid, &share, &drift0, &vec![0.0; grid.len()])?;
    let action = evaluate_action(&brane, &residual)?;
    let interior = (n0 - 2) * (n1 - 2) * (n2 - 2);
    let fp = if 3 * interior <= MAX_FP_DOF {
        Some(fp_determinant(&brane)?)
    } else {
        None
    };
    run.json(
        "action",
        "action.json",
        &ActionSummary {
            action,
            ghost: None,
            logdet_fp: fp.map(|f| f.log_abs_det).filter(|v| v.is_finite()),
            fp_singular: fp.map(|f| f.singular),
        },
    )?;
    let mut diagnostics = Vec::new();
    if fp.is_none() {
        diagnostics.push(format!("{} ghost degrees of freedom: determinant skipped", 3 * interior));
    }
    run.stage("action", diagnostics);

    *stage = "effective_scalar".into();
    let tensor = TensorField::scalar(grid.clone(), share.clone())?;
    let v = potential_v(&tensor, &metric, &chr, brane.q, bundle.ricci_scalar(), brane.xbar)?;
    let terms = action_terms(&brane)?;
    let rhs = assemble_rhs(&terms, None, cfg.kernel.epsilon, &v)?;
    let f = effective_scalar_f(&grid, &rhs)?;
    run.grid("effective_scalar", "effective_scalar.bin", &GridFile::scalar(grid.clone(), f.values.clone()))?;
    // strip the profit weight back out so F⁰ can be re-weighted per ρ̂
    let mut unit = brane.clone();
    unit.profit_weight = vec![1.0; grid.len()];
    let raw = action_terms(&unit)?;
    let slice = n1 * n2;
    let fs = FSlice {
        kinetic: raw.kinetic[..slice].to_vec(),
        transverse: raw.transverse[..slice].to_vec(),
        rest: (0..slice).map(|n| 3.0 - v[n]).collect(),
    };
    let f0_at = |rho: f64| -> Result<f64> {
        Ok(fs.f0(profit_weight(cfg, rho)?, cfg.kernel.omega) * profit_shape(cfg, rho))
    };
    let f0 = f0_at(cfg.firms[0].rho_hat)?;
    let mut diagnostics = vec![format!("F0 = {f0}")];
    if f.monotonicity_flag {
        diagnostics.push("F is not strictly increasing in s".into());
    }
    run.stage("effective_scalar", diagnostics);

    *stage = "evolve".into();
    let e = &cfg.evolution;
    let plane = GridSpec::new(vec![
        crate::grid::Axis::new(-e.half_width, e.half_width, e.nodes),
        crate::grid::Axis::new(-e.half_width, e.half_width, e.nodes),
    ])?;
    let mut block = [0.0; 4];
    for (k, (a, b)) in [(1, 1), (1, 2), (2, 1), (2, 2)].into_iter().enumerate() {
        block[k] = (0..slice).map(|n| metric.get(n, a, b)).sum::<f64>() / slice as f64;
    }
    let plane_metric = MetricField::constant(plane.clone(), &block, Signature::Riemannian)?;
    let plane_chr = ChristoffelField::zeros(plane.clone(), 2);
    let sigma0 = e.sigma0;
    let psi0 = WaveFunction::from_fn(plane.clone(), |x, y| {
        Complex64::new((-(x * x + y * y) / (4.0 * sigma0 * sigma0)).exp(), 0.0)
    })?
    .normalized();
    let spec_at = |rho: f64| -> Result<KernelSpec> {
        let mut s = KernelSpec::flat(cfg.kernel.mass, cfg.kernel.epsilon, f0_at(rho)?);
        s.mode = KernelMode::Lorentzian;
        Ok(s)
    };
    let evo = evolve(&psi0, &spec_at(cfg.firms[0].rho_hat)?, &plane_metric, &plane_chr, e.steps)?;
    run.grid("psi", "psi.bin", &GridFile::complex(plane.clone(), evo.psi.values()))?;
    run.json(
        "evolution",
        "evolution.json",
        &EvolutionSummary {
            f0,
            steps: e.steps,
            s: evo.psi.s,
            norm: evo.psi.norm(),
            cfl_ratio: evo.cfl_ratio,
            max_norm_drift: evo.max_norm_drift,
            warning: evo.warning.clone(),
        },
    )?;
    run.stage("evolve", evo.warning.clone().into_iter().collect());

    *stage = "optimal_rho".into();
    let report = optimal_rho(spec_at, &evo.psi, &plane_metric, &plane_chr, e.rho_grid)?;
    run.json("rho", "rho.json", &report)?;
    let mut diagnostics = Vec::new();
    if report.boundary_flag {
        diagnostics.push("no interior stationary point".into());
    }
    if report.degenerate {
        diagnostics.push("objective is constant in rho".into());
    }
    run.stage("optimal_rho", diagnostics);
    *rho_out = Some(report);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    const SCENARIO: &str = r#"{
        "grid": [{"start": 0.0, "end": 1.0, "nodes": 5},
                 {"start": 0.0, "end": 1.0, "nodes": 6},
                 {"start": 0.0, "end": 1.0, "nodes": 6}],
        "metric": {"preset": "flat"},
        "firms": [{"x0": [0.4, 0.5, 0.5], "strategy": 0.3, "alpha1": 0.5, "alpha2": 0.5,
                   "rho_hat": 0.5, "rho_tilde": 0.5, "stubbornness": 1.0}],
        "gff": {"gamma": 1.0},
        "kernel": {"mass": 100.0, "epsilon": 0.01, "omega": 0.5, "xbar": 0.5, "lambda": 0.1},
        "sde": {"horizon": 1.0, "steps": 10, "paths": 64},
        "evolution": {"nodes": 33, "half_width": 6.0, "sigma0": 1.0, "steps": 5, "rho_grid": 16},
        "seed": 7
    }"#;

    #[test]
    fn runs_and_repeats() {
        let cfg = parse_scenario_str(SCENARIO, Path::new(".")).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_pipeline(&cfg, a.path()).unwrap();
        let rb = run_pipeline(&cfg, b.path()).unwrap();
        assert!(ra.failure.is_none(), "{:?}", ra.failure);
        assert_eq!(ra.manifest, rb.manifest);
        assert!(a.path().join("manifest.json").is_file());
    }

    #[test]
    fn quadratic_profit_recovers_vertex() {
        let text = SCENARIO.replace("\"seed\": 7", "\"seed\": 7, \"profit\": {\"model\": \"quadratic\", \"vertex\": 0.6}");
        let cfg = parse_scenario_str(&text, Path::new(".")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = run_pipeline(&cfg, dir.path()).unwrap();
        assert!((r.rho.unwrap().rho_star - 0.6).abs() < 1e-3);
    }

    #[test]
    fn indefinite_metric_halts_at_coefficients() {
        let text = SCENARIO.replace(
            "{\"preset\": \"flat\"}",
            "{\"preset\": \"constant\", \"matrix\": [-1, 0, 0, 0, 1, 0, 0, 0, 1]}",
        );
        let cfg = parse_scenario_str(&text, Path::new(".")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = run_pipeline(&cfg, dir.path()).unwrap();
        let f = r.failure.unwrap();
        assert_eq!(f.stage, "derive_coefficients");
        assert!(f.message.contains("node 0"));
        assert_eq!(r.manifest.stages.last().unwrap().status, StageStatus::Failed);
    }
}
