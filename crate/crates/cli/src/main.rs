//! `sgn`: solve, sweep and probe from the command line.
//!
//! Exit codes: 0 success, 1 probe found a violation or collision,
//! 2 max iterations or stagnation, 3 numerical failure, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use sgn_core::baselines::{iht_solve, tsi_init, wf_solve, BaselineConfig, BaselineMethod};
use sgn_core::bench::{
    self, Arm, Cell, CellNoise, Experiment, Initializer, Method, SweepManifest, SweepSpec,
};
use sgn_core::identifiability::{collision_scan, s1_injectivity_check, CollisionOptions};
use sgn_core::io::vector_to_csv;
use sgn_core::{
    gen_ensemble, gen_signal, initialize, measure, InitOptions, NoiseKind, NoiseSpec, RngSeed,
    SgnError, SolveStatus, SolverConfig, StepMu, StorageMode,
};

const EXIT_OK: u8 = 0;
const EXIT_FOUND: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Environment variable that replaces the default output directory.
const OUT_DIR_ENV: &str = "SGN_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "sgn",
    version,
    about = "Sparse recovery from quadratic measurements"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one synthetic instance and recover it.
    Solve(SolveArgs),
    /// Run a Monte-Carlo sweep.
    Sweep(SweepArgs),
    /// Probe injectivity of a random ensemble.
    Probe(ProbeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolveArgs {
    /// JSON file with flag values, or a manifest written by an earlier run.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::None)]
    noise: NoiseArg,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Sgn)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = InitArg::Alg1)]
    init: InitArg,
    /// TSI threshold parameter.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Step scale `c` in `μ = c / φ̂²`.
    #[arg(long, default_value_t = sgn_core::refine::DEFAULT_STEP_SCALE)]
    mu: f64,
    /// Defaults to 200 for sgn and 2000 for wf/iht.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = StorageArg::Auto)]
    storage: StorageArg,
    /// Fall back to a dense SVD when the power iteration hits its cap.
    #[arg(long)]
    svd_fallback: bool,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Experiment kind for an explicit grid.
    #[arg(long, value_enum)]
    experiment: Option<ExperimentArg>,
    /// Trials per cell; defaults to 100 (50 for the noise preset).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; does not change the output.
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    jobs: usize,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated measurement counts.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Comma-separated sparsity levels.
    #[arg(long, value_delimiter = ',')]
    s: Vec<usize>,
    /// Comma-separated SNR levels (`snr = ‖x‖/σ²`).
    #[arg(long, value_delimiter = ',')]
    snr: Vec<f64>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated arms: sgn, wf, iht, alg1, tsi:ALPHA.
    #[arg(long, value_delimiter = ',')]
    arms: Vec<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    storage: Option<StorageArg>,
    /// Also write per-trial records as JSONL.
    #[arg(long)]
    records: bool,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ProbeArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProbeMode::S1Check)]
    mode: ProbeMode,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random starts for the collision search.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseArg {
    None,
    Gaussian,
    Laplace,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Sgn,
    Wf,
    Iht,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum InitArg {
    Alg1,
    Tsi,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StorageArg {
    Auto,
    Materialized,
    Streamed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    Experiment1,
    Experiment2,
    Experiment3,
    Experiment4,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ExperimentArg {
    InitCompare,
    PhaseMap,
    Convergence,
    IterationCount,
    NoiseSweep,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProbeMode {
    S1Check,
    Collision,
}

impl NoiseArg {
    fn kind(self) -> NoiseKind {
        match self {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Laplace => NoiseKind::Laplace,
        }
    }
}

impl StorageArg {
    fn mode(self, n: usize, m: usize) -> StorageMode {
        match self {
            StorageArg::Materialized => StorageMode::Materialized,
            StorageArg::Streamed => StorageMode::Streamed,
            // 64M entries (512 MiB) and up are generated on demand.
            StorageArg::Auto => {
                if (m as u128) * (n as u128) * (n as u128) < 1 << 26 {
                    StorageMode::Materialized
                } else {
                    StorageMode::Streamed
                }
            }
        }
    }
}

/// Failure classified by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(anyhow::Error),
}

impl From<SgnError> for Failure {
    fn from(e: SgnError) -> Self {
        match e {
            SgnError::Argument(_)
            | SgnError::DimensionMismatch { .. }
            | SgnError::Capacity { .. } => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn out_dir(flag: &Option<PathBuf>, default: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(default),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn manifest(command: &str, config: &impl Serialize, extra: Value) -> Value {
    let mut m = json!({
        "tool": "sgn",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut m, extra) {
        dst.extend(src);
    }
    m
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    if a.n == 0 || a.m == 0 {
        return Err(usage("--n and --m must be positive"));
    }
    if a.s == 0 || a.s > a.n {
        return Err(usage(format!(
            "--s must satisfy 1 ≤ s ≤ n (got s={}, n={})",
            a.s, a.n
        )));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!(
            "--sigma must be nonnegative (got {})",
            a.sigma
        )));
    }
    if !(a.mu > 0.0 && a.mu.is_finite()) {
        return Err(usage(format!("--mu must be positive (got {})", a.mu)));
    }
    if !(a.alpha > 0.0 && a.alpha.is_finite()) {
        return Err(usage(format!("--alpha must be positive (got {})", a.alpha)));
    }
    let noise = if a.noise == NoiseArg::None {
        NoiseSpec::none()
    } else {
        NoiseSpec::new(a.noise.kind(), a.sigma)?
    };

    let base = RngSeed::new(a.seed, 0);
    let ens = gen_ensemble(a.n, a.m, base.child(0), a.storage.mode(a.n, a.m))?;
    let x = gen_signal(a.n, a.s, base.child(1))?;
    let obs = measure(&ens, &x, noise, base.child(2))?;
    let truth = x.values();

    let mut opts = InitOptions::default();
    opts.power.svd_fallback = a.svd_fallback;
    let init = match a.init {
        InitArg::Alg1 => initialize(&ens, &obs, a.s, &opts)?,
        InitArg::Tsi => tsi_init(&ens, &obs, a.alpha, &opts)?,
    };
    let result = match a.method {
        MethodArg::Sgn => {
            let mut cfg = SolverConfig::new(a.s);
            cfg.step_mu = StepMu::Scale(a.mu);
            if let Some(k) = a.max_iters {
                cfg.max_iters = k;
            }
            sgn_core::solve(&ens, &obs, &init.x0, &cfg, Some(truth))
        }
        MethodArg::Wf | MethodArg::Iht => {
            let method = if a.method == MethodArg::Wf {
                BaselineMethod::Wf
            } else {
                BaselineMethod::Iht
            };
            let mut cfg = BaselineConfig::new(method, a.s);
            cfg.step_mu = a.mu;
            cfg.alpha = a.alpha;
            if let Some(k) = a.max_iters {
                cfg.max_iters = k;
            }
            match method {
                BaselineMethod::Wf => wf_solve(&ens, &obs, &init.x0, &cfg, Some(truth)),
                BaselineMethod::Iht => iht_solve(&ens, &obs, &init.x0, &cfg, Some(truth)),
            }
        }
    };
    let result = match result {
        Ok(r) => r,
        Err(e @ SgnError::Argument(_)) => return Err(e.into()),
        Err(e) => {
            eprintln!("sgn: solver failed: {e}");
            return Ok(EXIT_NUMERICAL);
        }
    };

    let status = result.trace.status;
    let rel = sgn_core::rel_error(&result.x, truth)?;
    let dir = out_dir(&a.out, "sgn-out");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir, "solution.csv", &vector_to_csv(&result.x))?;
    write(&dir, "signal.csv", &vector_to_csv(truth))?;
    write(&dir, "init.csv", &vector_to_csv(&init.x0))?;
    write(&dir, "trace.jsonl", &result.trace.to_jsonl())?;
    let summary = json!({
        "method": a.method,
        "status": status,
        "iterations": result.trace.iterations(),
        "rel_error": rel,
        "dist": sgn_core::dist(&result.x, truth)?,
        "init_rel_error": sgn_core::rel_error(&init.x0, truth)?,
        "init_support": init.support_hat,
        "phi": init.phi,
        "step_mu": result.trace.step_mu,
        "noise_sigma": noise.sigma,
        "signal_norm": x.norm(),
    });
    write(&dir, "summary.json", &pretty(&summary))?;
    let seeds = json!({
        "seeds": {
            "master_seed": a.seed,
            "ensemble": base.child(0),
            "signal": base.child(1),
            "noise": base.child(2),
        }
    });
    write(&dir, "manifest.json", &pretty(&manifest("solve", a, seeds)))?;
    println!(
        "status={status:?} iterations={} rel_error={rel:e}",
        result.trace.iterations()
    );

    Ok(match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxIters | SolveStatus::Stagnated => EXIT_NOT_CONVERGED,
        SolveStatus::NumericalFailure | SolveStatus::Diverged => EXIT_NUMERICAL,
    })
}

fn parse_arm(text: &str) -> Result<Arm, Failure> {
    let t = text.trim();
    match t {
        "sgn" => Ok(Arm::Solver(Method::Sgn)),
        "wf" => Ok(Arm::Solver(Method::Wf)),
        "iht" => Ok(Arm::Solver(Method::Iht)),
        "alg1" => Ok(Arm::Init(Initializer::Alg1)),
        _ => {
            let alpha = t
                .strip_prefix("tsi:")
                .and_then(|a| a.parse::<f64>().ok())
                .filter(|a| *a > 0.0)
                .ok_or_else(|| usage(format!("--arms: unknown arm `{t}`")))?;
            Ok(Arm::Init(Initializer::Tsi { alpha }))
        }
    }
}

fn build_spec(a: &SweepArgs) -> Result<SweepSpec, Failure> {
    let mut spec = match (a.preset, a.experiment) {
        (Some(p), _) => {
            let trials = a
                .trials
                .unwrap_or(if p == Preset::Experiment4 { 50 } else { 100 });
            match p {
                Preset::Experiment1 => SweepSpec::init_compare(trials, a.seed),
                Preset::Experiment2 => SweepSpec::phase_map(trials, a.seed),
                Preset::Experiment3 => SweepSpec::convergence(trials, a.seed),
                Preset::Experiment4 => SweepSpec::noise_sweep(trials, a.seed),
            }
        }
        (None, Some(e)) => {
            let trials = a.trials.unwrap_or(100);
            let mut spec = match e {
                ExperimentArg::InitCompare => SweepSpec::init_compare(trials, a.seed),
                ExperimentArg::PhaseMap => SweepSpec::phase_map(trials, a.seed),
                ExperimentArg::Convergence => SweepSpec::convergence(trials, a.seed),
                ExperimentArg::IterationCount => SweepSpec::iteration_count(trials, a.seed),
                ExperimentArg::NoiseSweep => SweepSpec::noise_sweep(trials, a.seed),
            };
            if a.m.is_empty() || a.s.is_empty() {
                return Err(usage("an explicit grid needs --m and --s"));
            }
            let noise_kind = a.noise.unwrap_or(NoiseArg::None);
            let noises: Vec<CellNoise> = if !a.snr.is_empty() {
                if noise_kind == NoiseArg::None {
                    return Err(usage("--snr needs --noise gaussian|laplace"));
                }
                a.snr
                    .iter()
                    .map(|&snr| CellNoise::Snr {
                        family: noise_kind.kind(),
                        snr,
                    })
                    .collect()
            } else if noise_kind != NoiseArg::None {
                vec![CellNoise::Sigma {
                    family: noise_kind.kind(),
                    sigma: a.sigma.unwrap_or(0.0),
                }]
            } else {
                vec![CellNoise::None]
            };
            spec.cells.clear();
            for &noise in &noises {
                for &s in &a.s {
                    for &m in &a.m {
                        spec.cells.push(Cell { m, s, noise });
                    }
                }
            }
            spec
        }
        (None, None) => return Err(usage("sweep needs --preset or --experiment")),
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if !a.arms.is_empty() {
        spec.arms = a
            .arms
            .iter()
            .map(|t| parse_arm(t))
            .collect::<Result<_, _>>()?;
    }
    if let Some(k) = a.max_iters {
        spec.solver.max_iters = k;
        spec.baseline.max_iters = k;
    }
    if let Some(st) = a.storage {
        spec.storage = st.mode(spec.n, spec.cells.iter().map(|c| c.m).max().unwrap_or(0));
    }
    spec.keep_records = a.records;
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_sweep(a: &SweepArgs) -> Outcome {
    let spec = build_spec(a)?;
    let result = bench::run_sweep(&spec, a.jobs)?;
    let dir = out_dir(&a.out, "sgn-sweep");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir, "sweep.csv", &bench::to_csv(&result))?;
    write(&dir, "timing.csv", &bench::timing_csv(&result))?;
    if spec.experiment == Experiment::PhaseMap {
        for arm in &spec.arms {
            let label = arm.label();
            write(
                &dir,
                &format!("phase_{label}.csv"),
                &bench::phase_matrix_csv(&result, &label),
            )?;
        }
    }
    if !result.curves.is_empty() {
        write(&dir, "curves.csv", &bench::curves_csv(&result))?;
    }
    if let Some(records) = &result.records {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        write(&dir, "records.jsonl", &text)?;
    }
    let extra = json!({ "sweep": SweepManifest::new(&spec) });
    write(&dir, "manifest.json", &pretty(&manifest("sweep", a, extra)))?;
    println!(
        "{} cells x {} arms x {} trials -> {}",
        spec.cells.len(),
        spec.arms.len(),
        spec.trials,
        dir.join("sweep.csv").display()
    );
    Ok(EXIT_OK)
}

fn cmd_probe(a: &ProbeArgs) -> Outcome {
    if a.n == 0 || a.m == 0 {
        return Err(usage("--n and --m must be positive"));
    }
    let base = RngSeed::new(a.seed, 0);
    let ens = gen_ensemble(a.n, a.m, base.child(0), StorageMode::Materialized)?;
    let dir = out_dir(&a.out, "sgn-probe");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let (positive, report) = match a.mode {
        ProbeMode::S1Check => {
            let cert = s1_injectivity_check(&ens);
            println!("injective={}", cert.injective);
            (
                !cert.injective,
                serde_json::to_value(&cert).expect("certificate serializes"),
            )
        }
        ProbeMode::Collision => {
            if a.s == 0 || a.s > a.n {
                return Err(usage(format!(
                    "--s must satisfy 1 ≤ s ≤ n (got s={}, n={})",
                    a.s, a.n
                )));
            }
            if a.budget == 0 {
                return Err(usage("--budget must be at least 1"));
            }
            let rep = collision_scan(
                &ens,
                a.s,
                base.child(3),
                a.budget,
                &CollisionOptions::default(),
            )?;
            println!(
                "found={} attempts={} residual={:e} separation={:e}",
                rep.found, rep.attempts, rep.residual, rep.separation
            );
            (
                rep.found,
                serde_json::to_value(&rep).expect("report serializes"),
            )
        }
    };
    write(&dir, "probe.json", &pretty(&report))?;
    write(
        &dir,
        "manifest.json",
        &pretty(&manifest("probe", a, json!({}))),
    )?;
    Ok(if positive { EXIT_FOUND } else { EXIT_OK })
}

/// Turns a JSON object of flag values into `--flag value` tokens.
fn config_tokens(text: &str) -> anyhow::Result<Vec<OsString>> {
    let v: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let obj: Map<String, Value> = match v {
        Value::Object(mut o) => match o.remove("config") {
            Some(Value::Object(inner)) => inner,
            _ => o,
        },
        _ => return Err(anyhow!("config must be a JSON object")),
    };
    let mut out = Vec::new();
    for (key, val) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match val {
            Value::Null => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) => {}
            Value::Array(items) => {
                if items.is_empty() {
                    continue;
                }
                let joined: Vec<String> =
                    items.iter().map(scalar).collect::<anyhow::Result<_>>()?;
                out.push(flag.into());
                out.push(joined.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(&other)?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(v: &Value) -> anyhow::Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(anyhow!("unsupported config value {v}")),
    }
}

/// Splices `--config FILE` contents in front of the explicit flags, so that
/// explicit flags win.
fn expand_config(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let pos = args
        .iter()
        .position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let (path, consumed) = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => (PathBuf::from(p), 1),
        None => match args.get(pos + 1) {
            Some(p) => (PathBuf::from(p), 2),
            None => return Ok(args),
        },
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("--config: reading {}", path.display()))?;
    let tokens = config_tokens(&text).with_context(|| format!("--config: {}", path.display()))?;
    let mut out: Vec<OsString> = Vec::with_capacity(args.len() + tokens.len());
    // argv[0] and the subcommand stay in front.
    out.extend(args[..2.min(args.len())].iter().cloned());
    out.extend(tokens);
    for (i, a) in args.iter().enumerate().skip(2) {
        if i < pos || i >= pos + consumed {
            out.push(a.clone());
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("sgn: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Probe(a) => cmd_probe(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("sgn: usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("sgn: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
