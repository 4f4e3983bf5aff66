//! Declarative scenarios: a TOML config names a gallery field, an
//! operation and its grids; running it produces a trace, optional plot and
//! an exit status.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::boundary::{classify_boundary_point, moving_spectral_trace, spectral_trace, ClassifyOptions, SpectralOptions, Verdict};
use crate::chains::{chain_from_family, condition_c_check, pde_residual};
use crate::disc::{sweep_grid_50, BoundaryPoint};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionFamily, IntegratorConfig};
use crate::herglotz::{example64_field, gallery_entries, gallery_field, HerglotzField, TimeDomain, TimeFn};
use crate::plot::{emit_plot, PlotKind};
use crate::quad;
use crate::semigroup::{declared_spectral_function, embed_map_with, product_formula_check_with, PRODUCT_SEQUENCE};
use crate::boundary::angular_derivative;
use crate::disc::StolzSchedule;
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Evolve,
    Spectral,
    Classify,
    ChainCheck,
    Embed,
    ProductFormula,
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Evolve => "evolve",
            Operation::Spectral => "spectral",
            Operation::Classify => "classify",
            Operation::ChainCheck => "chain-check",
            Operation::Embed => "embed",
            Operation::ProductFormula => "product-formula",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl FieldSpec {
    /// Gallery identifier such as `hyperbolic:1` or `brnp:0,1`.
    pub fn gallery_id(&self) -> String {
        if self.params.is_empty() {
            self.id.clone()
        } else {
            let p: Vec<String> = self.params.iter().map(|v| v.to_string()).collect();
            format!("{}:{}", self.id, p.join(","))
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id.split_once(':') {
            None => Ok(Self { id: id.trim().into(), params: vec![] }),
            Some((name, raw)) => {
                let params = raw
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| Error::UnknownField(id.into())))
                    .collect::<Result<_>>()?;
                Ok(Self { id: name.trim().into(), params })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl TimeGrid {
    pub fn range(start: f64, end: f64, step: f64) -> Self {
        Self { start: Some(start), end: Some(end), step: Some(step), ..Self::default() }
    }

    pub fn resolve(&self) -> Result<Vec<f64>> {
        let bad = |m: &str| Error::Precondition(format!("time grid: {m}"));
        let times = if let Some(v) = &self.values {
            v.clone()
        } else {
            let start = self.start.unwrap_or(0.0);
            let end = self.end.ok_or_else(|| bad("`end` or `values` required"))?;
            if !(end > start) {
                return Err(bad("end must exceed start"));
            }
            let n = match (self.step, self.count) {
                (Some(h), None) if h > 0.0 => ((end - start) / h).round() as usize,
                (None, Some(n)) if n >= 1 => n,
                (None, None) => 20,
                _ => return Err(bad("give exactly one of a positive `step` or `count`")),
            };
            (0..=n).map(|k| start + (end - start) * k as f64 / n as f64).collect()
        };
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(bad("times must be finite and strictly increasing"));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    /// Interior starting points as `[re, im]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z: Vec<[f64; 2]>,
    /// Real starting points for the real-slice fan.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub real: Vec<f64>,
    /// Boundary point angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    /// Largest acceptable discrepancy for invariant checks.
    #[serde(default = "default_check")]
    pub check: f64,
}

fn one() -> f64 {
    1.0
}

fn default_check() -> f64 {
    1e-4
}

fn yes() -> bool {
    true
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { scale: 1.0, rtol: None, atol: None, check: default_check() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub json: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotKind>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, csv: true, json: true, plot: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaProfile {
    Linear,
    Quadratic,
    Sine,
}

/// Operation-specific settings; each operation reads only its own keys.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_eval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_profile: Option<LambdaProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sequence: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_final_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<Operation>,
    pub field: FieldSpec,
    #[serde(default)]
    pub times: TimeGrid,
    #[serde(default)]
    pub points: PointSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub options: Options,
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ScenarioConfig {
    pub fn parse(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(src, s.start));
            Error::Config { line, column, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::parse(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Minimal config used when only a field id is given on the command line.
    pub fn default_for(op: Operation, field: &str) -> Result<Self> {
        let field = FieldSpec::parse(field)?;
        let mut cfg = Self {
            scenario: format!("{}-{}", op.name(), field.id),
            operation: Some(op),
            field,
            times: TimeGrid::range(0.0, 1.0, 0.05),
            points: PointSpec::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
            options: Options::default(),
        };
        if let Ok(f) = gallery_field(&cfg.field.gallery_id()) {
            let dom = f.validity();
            if dom.end.is_finite() {
                let end = dom.start + 0.9 * (dom.end - dom.start);
                cfg.times = TimeGrid { start: Some(dom.start), end: Some(end), count: Some(20), ..TimeGrid::default() };
            }
            let last = *cfg.times.resolve()?.last().unwrap();
            match op {
                Operation::Evolve => {
                    cfg.points.z = vec![[0.5, 0.0], [0.0, 0.5], [-0.3, 0.3]];
                    if f.has_real_coefficients() {
                        cfg.points.real = vec![0.5, 0.9, 0.99, 0.999];
                        cfg.output.plot = Some(PlotKind::Fan);
                    }
                }
                Operation::Spectral => cfg.output.plot = Some(PlotKind::Lambda),
                Operation::Classify => cfg.options.t_eval = Some(last),
                Operation::ChainCheck => cfg.options.horizon = Some(last),
                Operation::Embed => cfg.options.t0 = Some(last),
                Operation::ProductFormula => {
                    cfg.options.t0 = Some(dom.start + 0.1 * (last - dom.start));
                    cfg.options.t = Some(0.1 * (last - dom.start));
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub parallel: usize,
    pub tol_scale: f64,
    pub write_files: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_dir: None, parallel: 1, tol_scale: 1.0, write_files: true }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trace: TraceRecord,
    pub written: Vec<PathBuf>,
    pub violations: Vec<String>,
}

impl ScenarioOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            0
        } else {
            2
        }
    }
}

/// 1 for configuration problems, 2 for invariant violations, 3 for solver
/// failures.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvariantViolation { .. } => 2,
        e if e.is_solver() => 3,
        Error::Singularity(_) => 3,
        _ => 1,
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    field: HerglotzField,
    family: Arc<EvolutionFamily>,
    integrator: IntegratorConfig,
    scale: f64,
    parallel: bool,
    violations: Vec<String>,
}

impl Ctx<'_> {
    fn sigma(&self) -> BoundaryPoint {
        BoundaryPoint::from_angle(self.cfg.points.sigma.unwrap_or(0.0))
    }

    fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions { parallel: self.parallel, ..SpectralOptions::default().scaled(self.scale) }
    }

    fn require(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::Config { line: 0, column: 0, message: format!("operation {} needs options.{name}", self.op().name()) })
    }

    fn op(&self) -> Operation {
        self.cfg.operation.unwrap_or(Operation::Evolve)
    }

    fn violation(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

/// Runs a scenario; invariant violations are collected in the outcome
/// rather than returned as errors so the trace is still written.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutcome> {
    let op = cfg.operation.ok_or_else(|| Error::Config { line: 0, column: 0, message: "no operation given".into() })?;
    let scale = cfg.tolerances.scale * opts.tol_scale;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config { line: 0, column: 0, message: format!("tolerance scale {scale} must be positive") });
    }
    let field = gallery_field(&cfg.field.gallery_id())?;
    let mut integrator = IntegratorConfig::default();
    if let Some(r) = cfg.tolerances.rtol {
        integrator.rtol = r;
    }
    if let Some(a) = cfg.tolerances.atol {
        integrator.atol = a;
    }
    let integrator = integrator.scaled(scale);
    let family = Arc::new(EvolutionFamily::new(field.clone(), integrator)?);
    let mut ctx = Ctx { cfg, field, family, integrator, scale, parallel: opts.parallel > 1, violations: Vec::new() };
    let run = |ctx: &mut Ctx| -> Result<TraceRecord> {
        match op {
            Operation::Evolve => run_evolve(ctx),
            Operation::Spectral => run_spectral(ctx),
            Operation::Classify => run_classify(ctx),
            Operation::ChainCheck => run_chain(ctx),
            Operation::Embed => run_embed(ctx),
            Operation::ProductFormula => run_product(ctx),
        }
    };
    let mut trace = if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .map_err(|e| Error::Config { line: 0, column: 0, message: format!("thread pool: {e}") })?;
        pool.install(|| run(&mut ctx))?
    } else {
        run(&mut ctx)?
    };

    trace.params.insert("field".into(), json!(cfg.field.gallery_id()));
    trace.params.insert("operation".into(), json!(op.name()));
    trace.params.insert("options".into(), serde_json::to_value(&cfg.options)?);
    trace.params.insert("points".into(), serde_json::to_value(&cfg.points)?);
    trace.provenance.insert("field_id".into(), json!(ctx.field.id()));
    trace.provenance.insert("config_hash".into(), json!(cfg.hash()));
    trace.provenance.insert(
        "tolerances".into(),
        json!({"rtol": ctx.integrator.rtol, "atol": ctx.integrator.atol, "scale": scale, "check": cfg.tolerances.check}),
    );
    trace.provenance.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    trace.verdicts.insert("violations".into(), json!(ctx.violations));

    let mut written = Vec::new();
    if opts.write_files {
        let dir = opts
            .out_dir
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        if cfg.output.csv {
            let p = dir.join(format!("{}.csv", cfg.scenario));
            std::fs::write(&p, trace.to_csv())?;
            written.push(p);
        }
        if cfg.output.json {
            let p = dir.join(format!("{}.json", cfg.scenario));
            std::fs::write(&p, trace.to_json_string())?;
            written.push(p);
        }
        if let Some(kind) = cfg.output.plot {
            let p = dir.join(format!("{}.svg", cfg.scenario));
            emit_plot(&trace, kind, &p)?;
            written.push(p);
        }
    }
    Ok(ScenarioOutcome { trace, written, violations: ctx.violations })
}

fn new_trace(ctx: &Ctx, times: Vec<f64>) -> Result<TraceRecord> {
    TraceRecord::new(&ctx.cfg.scenario, ctx.cfg.field.gallery_id(), times)
}

fn barrier(cfg: &ScenarioConfig) -> Option<Box<dyn Fn(f64) -> Option<f64>>> {
    if cfg.field.id == "g64" {
        let g = example64_field(*cfg.field.params.first().unwrap_or(&1.0)).ok()?;
        Some(Box::new(move |t| g.singular_solution(t)))
    } else {
        None
    }
}

fn run_evolve(ctx: &mut Ctx) -> Result<TraceRecord> {
    let times = ctx.cfg.times.resolve()?;
    let s0 = ctx.field.validity().start;
    let mut trace = new_trace(ctx, times.clone())?;
    let fam = ctx.family.clone();
    let zs: Vec<Complex64> = ctx.cfg.points.z.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let paths: Vec<Vec<Complex64>> = if ctx.parallel {
        zs.par_iter().map(|&z| fam.evolve_path(s0, &times, z)).collect::<Result<_>>()?
    } else {
        zs.iter().map(|&z| fam.evolve_path(s0, &times, z)).collect::<Result<_>>()?
    };
    for (k, p) in paths.iter().enumerate() {
        trace.push_complex(&format!("w{k}"), p)?;
    }
    let xs = &ctx.cfg.points.real;
    if !xs.is_empty() {
        let fans: Vec<Vec<f64>> = if ctx.parallel {
            xs.par_iter().map(|&x| fam.evolve_real_path(s0, &times, x)).collect::<Result<_>>()?
        } else {
            xs.iter().map(|&x| fam.evolve_real_path(s0, &times, x)).collect::<Result<_>>()?
        };
        let bar = barrier(ctx.cfg);
        let bar_vals: Option<Vec<f64>> = bar.map(|b| times.iter().map(|&t| b(t).unwrap_or(f64::NAN)).collect());
        for (x, fan) in xs.iter().zip(&fans) {
            if let Some(bv) = &bar_vals {
                for ((t, v), b) in times.iter().zip(fan).zip(bv) {
                    if *t > s0 && !(v < b) {
                        ctx.violation(format!("ξ_{x}({t}) = {v} is not below the barrier {b}"));
                    }
                }
            }
            trace.push(format!("xi[{x}]"), fan.clone())?;
        }
        if let Some(bv) = bar_vals {
            trace.push("barrier", bv)?;
        }
    }
    if let Some(a) = ctx.cfg.points.sigma {
        let tr = fam.boundary_trajectory(BoundaryPoint::from_angle(a), &times)?;
        let mut theta = tr.angles.clone();
        // unwrap for a continuous curve
        for i in 1..theta.len() {
            let d = theta[i] - theta[i - 1];
            theta[i] -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        }
        trace.push("theta", theta)?;
        trace.push("velocity", tr.velocities.clone())?;
    }
    Ok(trace)
}

fn declared_reference(field: &HerglotzField, sigma: BoundaryPoint, times: &[f64]) -> Result<Option<Vec<f64>>> {
    let Some(np) = field.nullpoint_at(sigma) else { return Ok(None) };
    let start = field.validity().start;
    let d = np.dilation.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let q = quad::integrate(|x| Ok(d.eval(x)), start, t, 1e-13, 1e-13)?;
        out.push(-q.value);
    }
    Ok(Some(out))
}

fn run_spectral(ctx: &mut Ctx) -> Result<TraceRecord> {
    let times = ctx.cfg.times.resolve()?;
    let sigma = ctx.sigma();
    let opts = ctx.spectral_options();
    let s0 = ctx.field.validity().start;
    let fixed = (0..8).all(|k| {
        let t = times[0] + (times[times.len() - 1] - times[0]) * k as f64 / 7.0;
        ctx.field.eval(sigma.value(), t.max(s0)).norm() < 1e-12
    });
    let (tr, moving) = if fixed {
        (spectral_trace(&ctx.family, sigma, &times, &opts)?, None)
    } else {
        let m = moving_spectral_trace(&ctx.family, sigma, &times, &opts)?;
        let extra = (m.angles.clone(), m.tangential_mismatch);
        (m.trace, Some(extra))
    };
    let mut trace = new_trace(ctx, times.clone())?;
    let disc: Vec<f64> = tr.lambda_direct.iter().zip(&tr.lambda_integral).map(|(a, b)| (a - b).abs()).collect();
    trace.push("lambda_direct", tr.lambda_direct.clone())?;
    trace.push("lambda_integral", tr.lambda_integral.clone())?;
    trace.push("discrepancy", disc)?;
    let check = ctx.cfg.tolerances.check;
    if let Some(reference) = declared_reference(&ctx.field, sigma, &times)? {
        let worst = reference.iter().zip(&tr.lambda_integral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.verdicts.insert("reference_deviation".into(), json!(worst));
        if !(worst < check) {
            ctx.violation(format!("integral route deviates from the declared dilation by {worst:e}"));
        }
        trace.push("lambda_reference", reference)?;
    }
    if let Some((angles, mismatch)) = moving {
        trace.push("theta", angles)?;
        trace.verdicts.insert("tangential_mismatch".into(), json!(mismatch));
    }
    trace.verdicts.insert("max_discrepancy".into(), json!(tr.discrepancy));
    trace.verdicts.insert("flags".into(), json!(tr.flags));
    if !(tr.discrepancy < check) {
        ctx.violation(format!("spectral routes differ by {:e} (limit {check:e})", tr.discrepancy));
    }
    Ok(trace)
}

fn opt_num(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn run_classify(ctx: &mut Ctx) -> Result<TraceRecord> {
    let t_eval = ctx.require(ctx.cfg.options.t_eval, "t_eval")?;
    let mut copts = ClassifyOptions::at(t_eval);
    copts.spectral = ctx.spectral_options();
    let report = classify_boundary_point(&ctx.family, ctx.sigma(), &copts)?;
    let ev = &report.evidence;
    let mut trace = new_trace(ctx, vec![t_eval])?;
    trace.push("null_residual", vec![ev.null_residual])?;
    trace.push("sup_phi", vec![opt_num(ev.sup_phi)])?;
    trace.push("max_quotient", vec![opt_num(ev.max_quotient)])?;
    trace.push("radial_limit", vec![opt_num(ev.radial_limit)])?;
    trace.push("spectral_discrepancy", vec![opt_num(ev.spectral_discrepancy)])?;
    trace.verdicts.insert("classification".into(), json!(report.verdict.as_str()));
    trace.verdicts.insert("evidence".into(), serde_json::to_value(ev)?);
    if let Some(expected) = ctx.cfg.options.expect {
        if expected != report.verdict {
            ctx.violation(format!("expected verdict {}, got {}", expected.as_str(), report.verdict.as_str()));
        }
    }
    Ok(trace)
}

fn run_chain(ctx: &mut Ctx) -> Result<TraceRecord> {
    let horizon = ctx.require(ctx.cfg.options.horizon, "horizon")?;
    let times: Vec<f64> = ctx.cfg.times.resolve()?.into_iter().filter(|&t| t <= horizon).collect();
    if times.is_empty() {
        return Err(Error::Precondition("no grid time lies at or before the horizon".into()));
    }
    let chain = chain_from_family(ctx.family.clone(), horizon)?;
    let grid: Vec<Complex64> = if ctx.cfg.points.z.is_empty() {
        sweep_grid_50()
    } else {
        ctx.cfg.points.z.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    };
    let probe = grid[0];
    let mut assoc = Vec::with_capacity(times.len());
    let mut pde = Vec::with_capacity(times.len());
    let delta = 1e-4;
    let start = ctx.field.validity().start;
    for (i, &s) in times.iter().enumerate() {
        let t = times.get(i + 1).copied().unwrap_or(horizon);
        assoc.push(chain.association_residual(s, t, &grid)?);
        pde.push(if s - delta >= start && s + delta <= horizon { pde_residual(&chain, probe, s, delta)? } else { f64::NAN });
    }
    let t0 = ctx.cfg.options.t0.unwrap_or(times[0]);
    let cond = condition_c_check(&chain, ctx.sigma(), t0, &times, 0.1)?;
    let mut trace = new_trace(ctx, times.clone())?;
    trace.push("association", assoc.clone())?;
    trace.push("pde_residual", pde.clone())?;
    trace.push("boundary_re", cond.rows.iter().map(|r| r.boundary_value[0]).collect())?;
    trace.push("boundary_im", cond.rows.iter().map(|r| r.boundary_value[1]).collect())?;
    trace.push("derivative_re", cond.rows.iter().map(|r| r.derivative[0]).collect())?;
    trace.push("derivative_im", cond.rows.iter().map(|r| r.derivative[1]).collect())?;
    trace.push("conformal", cond.rows.iter().map(|r| f64::from(u8::from(r.conformal))).collect())?;
    trace.verdicts.insert("c1".into(), json!(cond.c1));
    trace.verdicts.insert("c2".into(), json!(cond.c2));
    trace.verdicts.insert("c3".into(), json!(cond.c3));
    trace.verdicts.insert("max_arg_jump".into(), json!(cond.max_arg_jump));
    trace.verdicts.insert("arg_spread".into(), json!(cond.arg_spread));
    let worst_assoc = assoc.iter().cloned().fold(0.0, f64::max);
    if worst_assoc > 1e-8 * ctx.scale {
        ctx.violation(format!("association residual {worst_assoc:e} exceeds {:e}", 1e-8 * ctx.scale));
    }
    let worst_pde = pde.iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max);
    if worst_pde > 1e-5 {
        ctx.violation(format!("PDE residual {worst_pde:e} exceeds 1e-5"));
    }
    Ok(trace)
}

fn run_embed(ctx: &mut Ctx) -> Result<TraceRecord> {
    let t0 = ctx.require(ctx.cfg.options.t0, "t0")?;
    let v0 = ctx.cfg.options.v0.unwrap_or(0.0);
    let (base, _) = declared_spectral_function(&ctx.field)?;
    let end = base(t0);
    let lambda = match ctx.cfg.options.lambda_profile.unwrap_or(LambdaProfile::Sine) {
        LambdaProfile::Linear => TimeFn::new(move |t| end * t / t0, TimeDomain::half_line()),
        LambdaProfile::Quadratic => TimeFn::new(move |t| end * (t / t0).powi(2), TimeDomain::half_line()),
        LambdaProfile::Sine => {
            TimeFn::new(move |t| (std::f64::consts::FRAC_PI_2 * t / t0).sin() * end, TimeDomain::half_line())
        }
    };
    let emb = embed_map_with(ctx.field.clone(), t0, lambda.clone(), v0, ctx.integrator)?;
    let times: Vec<f64> = ctx.cfg.times.resolve()?.into_iter().filter(|&t| t <= t0).collect();
    if times.is_empty() {
        return Err(Error::Precondition("no grid time lies in [0, t0]".into()));
    }
    let report = emb.verify(&sweep_grid_50(), &times)?;
    let one = BoundaryPoint::one();
    let sched = StolzSchedule::radial(one);
    let s0 = emb.family.start();
    let mut realized = Vec::with_capacity(times.len());
    for &t in &times {
        if t == s0 {
            realized.push(0.0);
            continue;
        }
        let d = angular_derivative(|z| emb.psi(s0, t, z), one, num_complex::Complex64::new(1.0, 0.0), &sched, 1e-8)?;
        realized.push(-d.value.norm().ln());
    }
    let fam = EvolutionFamily::new(emb.family.field(), ctx.integrator)?;
    let mut copts = ClassifyOptions::at(t0);
    copts.spectral = ctx.spectral_options();
    let class = classify_boundary_point(&fam, one, &copts)?;
    let mut trace = new_trace(ctx, times.clone())?;
    trace.push("lambda_target", times.iter().map(|&t| lambda.eval(t)).collect())?;
    trace.push("lambda_realized", realized)?;
    trace.verdicts.insert("embedding".into(), serde_json::to_value(&report)?);
    trace.verdicts.insert("classification".into(), json!(class.verdict.as_str()));
    trace.verdicts.insert("target".into(), json!(emb.target));
    if !report.ok {
        ctx.violation(format!("embedding checks failed: {report:?}"));
    }
    if class.verdict != Verdict::RegularFixed {
        ctx.violation(format!("embedded family classified as {}", class.verdict.as_str()));
    }
    Ok(trace)
}

fn run_product(ctx: &mut Ctx) -> Result<TraceRecord> {
    let t0 = ctx.require(ctx.cfg.options.t0, "t0")?;
    let t = ctx.require(ctx.cfg.options.t, "t")?;
    let ns = ctx.cfg.options.n_sequence.clone().unwrap_or_else(|| PRODUCT_SEQUENCE.to_vec());
    let z = ctx.cfg.points.z.first().map_or(Complex64::new(0.5, 0.0), |p| Complex64::new(p[0], p[1]));
    let sigma = ctx.cfg.points.sigma.map(BoundaryPoint::from_angle);
    let tab = product_formula_check_with(&ctx.field, t0, t, &ns, z, sigma, ctx.integrator)?;
    let idx: Vec<f64> = tab.rows.iter().map(|r| r.n as f64).collect();
    let mut trace = TraceRecord::with_index(&ctx.cfg.scenario, ctx.cfg.field.gallery_id(), "n", idx)?;
    trace.push("value_re", tab.rows.iter().map(|r| r.value[0]).collect())?;
    trace.push("value_im", tab.rows.iter().map(|r| r.value[1]).collect())?;
    trace.push("error", tab.rows.iter().map(|r| r.error).collect())?;
    trace.verdicts.insert("reference".into(), json!({"re": tab.reference[0], "im": tab.reference[1]}));
    trace.verdicts.insert("monotone".into(), json!(tab.monotone));
    trace.verdicts.insert("final_error".into(), json!(tab.final_error()));
    if !tab.monotone {
        ctx.violation("product-formula error increased along the n sequence".into());
    }
    if let Some(m) = ctx.cfg.options.max_final_error {
        if !(tab.final_error() < m) {
            ctx.violation(format!("final product-formula error {:e} is not below {m:e}", tab.final_error()));
        }
    }
    Ok(trace)
}

/// Gallery listing as text lines or JSON.
pub fn gallery_list(as_json: bool) -> String {
    let entries = gallery_entries();
    if as_json {
        let mut s = serde_json::to_string_pretty(&entries).expect("gallery serializes");
        s.push('\n');
        return s;
    }
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{:<12} {}\n  params: {}\n  example: {}\n  reference: {}\n", e.id, e.description, e.params, e.example, e.reference));
    }
    out
}
