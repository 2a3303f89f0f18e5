//! `semicoop`: command-line front end.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use semicoop::brane::{
    evaluate_action, fp_determinant, ghost_action, BraneConfiguration, GhostFields, BACKGROUND_DIM, MAX_FP_DOF,
};
use semicoop::geometry::{christoffel, covariant_laplacian, curvature, ChristoffelField, MetricField, Signature};
use semicoop::grid::{Axis, GridSpec};
use semicoop::io::{self, GridFile};
use semicoop::lie::{bracket_terms, default_spacing, lie_bracket, VectorField};
use semicoop::polygon::{PolygonSpec, DEFAULT_QUADRATURE_NODES};
use semicoop::profit::{cascade_closed_form, cascade_derivative, cascade_limit, cascade_sum, CascadeParams};
use semicoop::propagator::{
    evolve, kernel_normalization_check, optimal_rho, two_point_correlation, KernelSpec, WaveFunction,
};
use semicoop::scenario::parse_scenario;
use semicoop::sde::{derive_coefficients, simulate};
use semicoop::{gff, pipeline, Error, VERSION};
use serde_json::{json, Value};

use config::{ActionConfig, EvolveConfig, KernelCheckConfig, LieScenario, ScalarInput};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeometryOp {
    Christoffel,
    Curvature,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignatureArg {
    Riemannian,
    Lorentzian,
}

impl From<SignatureArg> for Signature {
    fn from(s: SignatureArg) -> Self {
        match s {
            SignatureArg::Riemannian => Signature::Riemannian,
            SignatureArg::Lorentzian => Signature::Lorentzian,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "semicoop", version, about = "Semicooperative games on curved strategy spacetime")]
struct Cli {
    /// Master seed; overrides seeds in scenario files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are written under.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Christoffel symbols, curvature or the covariant Laplacian of a metric file.
    Geometry {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        op: GeometryOp,
        /// Scalar grid the Laplacian acts on.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "riemannian")]
        signature: SignatureArg,
    },
    /// Area of a geodesic strategy polygon at time `s`.
    PolygonArea {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = DEFAULT_QUADRATURE_NODES)]
        nodes: usize,
    },
    /// Lie bracket of two gradient fields at a point.
    LieBracket {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: [f64; 3],
    },
    /// One Gaussian free field sample on the unit square.
    GffSample {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Euler–Maruyama ensemble for one firm of a scenario.
    SimulateSde {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        firm: usize,
        /// Also write the ensemble as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bond-resale cascade sum, closed form and small-κ limit.
    Cascade {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        theta: u64,
        #[arg(long)]
        m: usize,
    },
    /// Brane action from binary field files.
    Action {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ghost: bool,
        #[arg(long)]
        fp_det: bool,
    },
    /// Kernel normalization and two-point correlation.
    KernelCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evolve a Gaussian packet.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal degree of cooperation.
    OptimalRho {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Full run from a scenario file.
    Pipeline {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected x,y,z, got {} values", v.len()))
}

/// A command's result: JSON and optionally a dedicated CSV rendering.
struct Report {
    json: Value,
    csv: Option<String>,
}

impl Report {
    fn json(json: Value) -> Self {
        Report { json, csv: None }
    }
}

struct Ctx {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn output(&self, p: &Path) -> CliResult<PathBuf> {
        let path = match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", parent.display())))?;
        }
        Ok(path)
    }
}

fn base_dir(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn to_value<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Numerical(e.to_string()))
}

fn geometry(
    ctx: &Ctx,
    metric_path: &Path,
    out: &Path,
    op: GeometryOp,
    field: Option<&Path>,
    signature: Signature,
) -> CliResult<Report> {
    let metric = io::read_grid(metric_path)?.to_metric(signature)?;
    let grid = metric.grid().clone();
    let d = metric.dim();
    let chr = christoffel(&metric)?;
    let out = ctx.output(out)?;
    match op {
        GeometryOp::Christoffel => {
            io::write_grid(&out, &GridFile::blocks(grid.clone(), d, d * d, chr.data().to_vec()))?;
            let names: Vec<String> = (0..d * d * d)
                .map(|k| format!("gamma_{}_{}{}", k / (d * d), (k / d) % d, k % d))
                .collect();
            let cols: Vec<Vec<f64>> = (0..d * d * d).map(|k| chr.component(k / (d * d), (k / d) % d, k % d)).collect();
            let columns: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)).collect();
            Ok(Report {
                json: json!({"op": "christoffel", "nodes": grid.len(), "dim": d, "max_abs": chr.max_abs(), "out": out}),
                csv: Some(io::grid_csv(&grid, &columns)),
            })
        }
        GeometryOp::Curvature => {
            let bundle = curvature(&metric, &chr)?;
            let r = bundle.ricci_scalar().to_vec();
            io::write_grid(&out, &GridFile::scalar(grid.clone(), r.clone()))?;
            let max_r = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(Report {
                json: json!({
                    "op": "curvature",
                    "nodes": grid.len(),
                    "max_abs_riemann": bundle.max_abs_riemann(),
                    "max_abs_ricci_scalar": max_r,
                    "out": out,
                }),
                csv: Some(io::grid_csv(&grid, &[("ricci_scalar", &r)])),
            })
        }
        GeometryOp::Laplacian => {
            let field = field.ok_or_else(|| CliError::Validation("--op laplacian requires --field".into()))?;
            let f = io::read_grid(field)?;
            f.grid.ensure_same(&grid, "field")?;
            let lap = covariant_laplacian(&metric, &chr, &f.to_scalar()?)?;
            io::write_grid(&out, &GridFile::scalar(grid.clone(), lap.clone()))?;
            let max = lap.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(Report {
                json: json!({"op": "laplacian", "nodes": grid.len(), "max_abs": max, "out": out}),
                csv: Some(io::grid_csv(&grid, &[("laplacian", &lap)])),
            })
        }
    }
}

fn polygon_area(path: &Path, time: f64, nodes: usize) -> CliResult<Report> {
    let spec: PolygonSpec = config::load(path)?;
    let report = spec.evaluate(time, nodes)?;
    let mut csv = String::from("side,area\n");
    for (i, a) in report.per_side.iter().enumerate() {
        csv.push_str(&format!("{i},{a}\n"));
    }
    csv.push_str(&format!("total,{}\n", report.area));
    Ok(Report {
        json: to_value(&report)?,
        csv: Some(csv),
    })
}

fn lie(path: &Path, y: [f64; 3]) -> CliResult<Report> {
    let sc: LieScenario = config::load(path)?;
    let build = |p: &config::FieldPair| -> CliResult<VectorField> {
        Ok(VectorField::from_arcs(p.drift.build()?, p.noise.build()?))
    };
    let v = build(&sc.v)?;
    let u = build(&sc.u)?;
    let spacing = match sc.spacing {
        Some(h) => h,
        None => {
            let axes = y.iter().map(|c| Axis::new(c - 1.0, c + 1.0, 3)).collect();
            default_spacing(&GridSpec::new(axes)?)
        }
    };
    let bracket = lie_bracket(&v, &u, y, spacing)?;
    let terms = bracket_terms(&v, &u, y, spacing)?;
    Ok(Report {
        json: json!({"point": y, "spacing": spacing, "bracket": bracket, "terms": terms}),
        csv: Some(format!("component,value\n0,{}\n1,{}\n2,{}\n", bracket[0], bracket[1], bracket[2])),
    })
}

fn gff_sample(ctx: &Ctx, size: usize, gamma: f64, out: &Path) -> CliResult<Report> {
    let seed = ctx.seed.unwrap_or(0);
    let field = gff::StubbornnessField::sample(size, size, gamma, seed)?;
    let grid = GridSpec::new(vec![Axis::new(0.0, 1.0, size), Axis::new(0.0, 1.0, size)])?;
    let out = ctx.output(out)?;
    io::write_grid(&out, &GridFile::scalar(grid.clone(), field.field.clone()))?;
    let n = field.field.len() as f64;
    let mean = field.field.iter().sum::<f64>() / n;
    let var = field.field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Report {
        json: json!({
            "size": size,
            "gamma": gamma,
            "seed": seed,
            "q": field.q,
            "regime": gff::regime(gamma)?,
            "mean": mean,
            "variance": var,
            "out": out,
        }),
        csv: Some(io::grid_csv(&grid, &[("b", &field.field), ("factor", &field.factor)])),
    })
}

fn simulate_sde(
    ctx: &Ctx,
    path: &Path,
    paths: Option<usize>,
    steps: Option<usize>,
    out: &Path,
    firm: usize,
    csv: Option<&Path>,
) -> CliResult<Report> {
    let mut cfg = parse_scenario(path)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let state = cfg
        .firms
        .get(firm)
        .cloned()
        .ok_or_else(|| CliError::Validation(format!("scenario has no firm {firm}")))?;
    let grid = cfg.grid_spec()?;
    let metric = cfg.build_metric(&grid)?;
    let chr = christoffel(&metric)?;
    let coeffs = derive_coefficients(&metric, &chr)?;
    let ens = simulate(
        &coeffs,
        &state,
        cfg.sde.horizon,
        steps.unwrap_or(cfg.sde.steps),
        paths.unwrap_or(cfg.sde.paths),
        cfg.stage_seed(&format!("sde/{firm}")),
    )?;
    let out = ctx.output(out)?;
    io::write_paths(&out, &ens)?;
    if let Some(c) = csv {
        io::write_text(&ctx.output(c)?, &io::paths_csv(&ens))?;
    }
    let summary = ens.summary();
    let mut text = String::from("component,terminal_mean,terminal_variance\n");
    for c in 0..ens.dim {
        text.push_str(&format!("{c},{},{}\n", summary.terminal_mean[c], summary.terminal_variance[c]));
    }
    let mut json = to_value(&summary)?;
    json["out"] = json!(out);
    Ok(Report {
        json,
        csv: Some(text),
    })
}

fn cascade(kappa: f64, theta: u64, m: usize) -> CliResult<Report> {
    let p = CascadeParams::uniform(m, theta, kappa);
    let sum = cascade_sum(&p)?;
    let closed = cascade_closed_form(&p)?;
    let limit = cascade_limit(kappa)?;
    let d = cascade_derivative(kappa)?;
    Ok(Report::json(json!({
        "sum": sum,
        "closed_form": closed,
        "limit": limit,
        "derivative": d.value,
        "divergence_flag": d.divergent,
        "outside_expansion": d.outside_expansion,
    })))
}

fn scalar_input(base: &Path, input: &Option<ScalarInput>, grid: &GridSpec, default: f64) -> CliResult<Vec<f64>> {
    match input {
        None => Ok(vec![default; grid.len()]),
        Some(ScalarInput::Value(v)) => Ok(vec![*v; grid.len()]),
        Some(ScalarInput::File(p)) => {
            let f = io::read_grid(&config::resolve(base, p))?;
            f.grid.ensure_same(grid, &p.display().to_string())?;
            Ok(f.to_scalar()?)
        }
    }
}

fn blocks(base: &Path, p: &Path, grid: &GridSpec, rows: usize, cols: usize) -> CliResult<Vec<f64>> {
    let f = io::read_grid(&config::resolve(base, p))?;
    f.grid.ensure_same(grid, &p.display().to_string())?;
    if f.rows != rows || f.cols != cols {
        return Err(CliError::Validation(format!(
            "{} holds {}×{} blocks, expected {rows}×{cols}",
            p.display(),
            f.rows,
            f.cols
        )));
    }
    Ok(f.data)
}

fn action(path: &Path, with_ghost: bool, with_fp: bool) -> CliResult<Report> {
    let cfg: ActionConfig = config::load(path)?;
    let base = base_dir(path);
    let h = io::read_grid(&config::resolve(&base, &cfg.metric))?.to_metric(cfg.signature)?;
    let grid = h.grid().clone();
    let background = match &cfg.background {
        Some(p) => MetricField::new(
            grid.clone(),
            BACKGROUND_DIM,
            Signature::Riemannian,
            blocks(&base, p, &grid, BACKGROUND_DIM, BACKGROUND_DIM)?,
        )?,
        None => MetricField::identity(grid.clone(), BACKGROUND_DIM),
    };
    let mut brane = BraneConfiguration::new(h.clone(), background)?.with_linear_embedding();
    if let Some(list) = &cfg.embedding {
        if list.len() != BACKGROUND_DIM {
            return Err(CliError::Validation(format!(
                "embedding needs {BACKGROUND_DIM} files, got {}",
                list.len()
            )));
        }
        for (t, p) in list.iter().enumerate() {
            brane.embedding[t] = scalar_input(&base, &Some(ScalarInput::File(p.clone())), &grid, 0.0)?;
        }
    }
    brane.lambda = scalar_input(&base, &cfg.lambda, &grid, 0.0)?;
    brane.ricci_scalar = match &cfg.ricci_scalar {
        Some(_) => scalar_input(&base, &cfg.ricci_scalar, &grid, 0.0)?,
        None => curvature(&h, &christoffel(&h)?)?.ricci_scalar().to_vec(),
    };
    brane.profit_weight = scalar_input(&base, &cfg.profit_weight, &grid, 1.0)?;
    brane.omega = cfg.omega;
    brane.q = cfg.q;
    brane.xbar = cfg.xbar;
    if let (Some(e), Some(c)) = (&cfg.ghost_e, &cfg.ghost_c) {
        brane.ghost = Some(GhostFields {
            e: blocks(&base, e, &grid, 3, 3)?,
            c: blocks(&base, c, &grid, 3, 1)?,
        });
    }
    brane.validate()?;
    let residual = scalar_input(&base, &cfg.residual, &grid, 0.0)?;
    let value = evaluate_action(&brane, &residual)?;
    let ghost = if with_ghost {
        if brane.ghost.is_none() {
            return Err(CliError::Validation("--ghost needs ghost_e and ghost_c in the config".into()));
        }
        Some(ghost_action(&brane, cfg.epsilon)?)
    } else {
        None
    };
    let fp = if with_fp {
        if 3 * grid.len() > MAX_FP_DOF {
            return Err(CliError::Validation(format!(
                "Faddeev-Popov operator needs at most {MAX_FP_DOF} ghost unknowns, grid gives {}",
                3 * grid.len()
            )));
        }
        Some(fp_determinant(&brane)?)
    } else {
        None
    };
    Ok(Report::json(json!({
        "action": value,
        "ghost": ghost,
        "logdet_fp": fp.map(|f| f.log_abs_det),
        "fp_singular": fp.map(|f| f.singular),
    })))
}

fn kernel_check(ctx: &Ctx, path: &Path) -> CliResult<Report> {
    let cfg: KernelCheckConfig = config::load(path)?;
    let norm = kernel_normalization_check(&cfg.kernel, cfg.nodes)?;
    let correlation = if cfg.samples > 0 {
        let est = two_point_correlation(&cfg.kernel, cfg.samples, ctx.seed.unwrap_or(0))?;
        let mut v = to_value(&est)?;
        v["max_z"] = json!(est.max_z());
        Some(v)
    } else {
        None
    };
    Ok(Report::json(json!({
        "estimate": norm.estimate,
        "deviation": norm.deviation,
        "box_half_widths": norm.box_half_widths,
        "correlation": correlation,
    })))
}

struct Plane {
    metric: MetricField,
    chr: ChristoffelField,
    psi: WaveFunction,
}

fn plane(cfg: &EvolveConfig) -> CliResult<Plane> {
    let hw = cfg.grid.half_width;
    let grid = GridSpec::new(vec![Axis::new(-hw, hw, cfg.grid.nodes), Axis::new(-hw, hw, cfg.grid.nodes)])?;
    let metric = MetricField::constant(grid.clone(), &cfg.metric, Signature::Riemannian)?;
    let chr = ChristoffelField::zeros(grid.clone(), 2);
    let p = cfg.packet;
    let psi = WaveFunction::from_fn(grid, |x, y| {
        let (dx, dy) = (x - p.center[0], y - p.center[1]);
        let amp = (-(dx * dx + dy * dy) / (4.0 * p.sigma0 * p.sigma0)).exp();
        Complex64::from_polar(amp, p.momentum[0] * x + p.momentum[1] * y)
    })?
    .normalized();
    Ok(Plane { metric, chr, psi })
}

fn spec(cfg: &EvolveConfig, f0: f64) -> KernelSpec {
    let mut s = KernelSpec::flat(cfg.mass, cfg.epsilon, f0);
    s.mode = cfg.mode;
    s
}

fn run_evolve(ctx: &Ctx, path: &Path, steps: Option<usize>, out: &Path) -> CliResult<Report> {
    let cfg: EvolveConfig = config::load(path)?;
    let p = plane(&cfg)?;
    let steps = steps.unwrap_or(cfg.steps);
    let initial_width = [p.psi.width(0), p.psi.width(1)];
    let evo = evolve(&p.psi, &spec(&cfg, cfg.f0), &p.metric, &p.chr, steps)?;
    if let Some(w) = &evo.warning {
        eprintln!("warning: {w}");
    }
    let out = ctx.output(out)?;
    io::write_grid(&out, &GridFile::complex(p.psi.grid().clone(), evo.psi.values()))?;
    Ok(Report::json(json!({
        "steps": steps,
        "s": evo.psi.s,
        "norm": evo.psi.norm(),
        "initial_width": initial_width,
        "width": [evo.psi.width(0), evo.psi.width(1)],
        "cfl_ratio": evo.cfl_ratio,
        "max_norm_drift": evo.max_norm_drift,
        "warning": evo.warning,
        "out": out,
    })))
}

fn run_optimal_rho(path: &Path, resolution: usize) -> CliResult<Report> {
    let cfg: EvolveConfig = config::load(path)?;
    let profile = cfg
        .profile
        .ok_or_else(|| CliError::Validation("optimal-rho needs a \"profile\" in the config".into()))?;
    let p = plane(&cfg)?;
    let psi = if cfg.steps > 0 {
        evolve(&p.psi, &spec(&cfg, cfg.f0), &p.metric, &p.chr, cfg.steps)?.psi
    } else {
        p.psi
    };
    let report = optimal_rho(
        |rho| Ok(spec(&cfg, cfg.f0 * profile.shape(rho))),
        &psi,
        &p.metric,
        &p.chr,
        resolution,
    )?;
    let mut csv = String::from("rho,objective\n");
    for (r, j) in &report.objective {
        csv.push_str(&format!("{r},{j}\n"));
    }
    Ok(Report {
        json: to_value(&report)?,
        csv: Some(csv),
    })
}

fn run_pipeline(ctx: &Ctx, path: &Path) -> CliResult<Report> {
    let mut cfg = parse_scenario(path)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let out_dir = ctx
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| cfg.resolve(d)))
        .unwrap_or_else(|| PathBuf::from("run"));
    let report = pipeline::run_pipeline(&cfg, &out_dir)?;
    let json = json!({
        "out_dir": report.out_dir,
        "manifest": report.manifest,
        "rho": report.rho,
        "failure": report.failure,
    });
    if let Some(f) = &report.failure {
        println!("{}", serde_json::to_string_pretty(&json).unwrap_or_default());
        let msg = format!("stage {} failed: {}", f.stage, f.message);
        return Err(if f.validation {
            CliError::Validation(msg)
        } else {
            CliError::Numerical(msg)
        });
    }
    let mut csv = String::from("artifact,file,sha256,bytes\n");
    for a in &report.manifest.artifacts {
        csv.push_str(&format!("{},{},{},{}\n", a.name, a.file, a.sha256, a.bytes));
    }
    Ok(Report { json, csv: Some(csv) })
}

/// Top-level scalar fields as `key,value` rows.
fn flat_csv(v: &Value) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(map) = v {
        for (k, x) in map {
            let cell = match x {
                Value::Array(items) => items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k},{cell}\n"));
        }
    }
    out
}

fn dispatch(cli: &Cli) -> CliResult<Report> {
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Geometry {
            metric,
            out,
            op,
            field,
            signature,
        } => geometry(&ctx, metric, out, *op, field.as_deref(), (*signature).into()),
        Command::PolygonArea { scenario, time, nodes } => polygon_area(scenario, *time, *nodes),
        Command::LieBracket { scenario, point } => lie(scenario, *point),
        Command::GffSample { size, gamma, out } => gff_sample(&ctx, *size, *gamma, out),
        Command::SimulateSde {
            scenario,
            paths,
            steps,
            out,
            firm,
            csv,
        } => simulate_sde(&ctx, scenario, *paths, *steps, out, *firm, csv.as_deref()),
        Command::Cascade { kappa, theta, m } => cascade(*kappa, *theta, *m),
        Command::Action { config, ghost, fp_det } => action(config, *ghost, *fp_det),
        Command::KernelCheck { config } => kernel_check(&ctx, config),
        Command::Evolve { config, steps, out } => run_evolve(&ctx, config, *steps, out),
        Command::OptimalRho { config, grid } => run_optimal_rho(config, *grid),
        Command::Pipeline { scenario } => run_pipeline(&ctx, scenario),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => {
                    let mut json = report.json;
                    if let Value::Object(map) = &mut json {
                        map.insert("version".into(), json!(VERSION));
                    }
                    println!("{}", serde_json::to_string_pretty(&json).unwrap_or_default());
                }
                Format::Csv => print!("{}", report.csv.unwrap_or_else(|| flat_csv(&report.json))),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 2,
                CliError::Numerical(_) => 3,
            })
        }
    }
}
