//! Monte-Carlo sweep harness.
//!
//! A sweep is a list of cells (measurement count, sparsity, noise) times a
//! number of trials. Trial `t` of cell `c` draws everything from
//! `RngSeed::new(master_seed, c).child(t)`:
//!
//! | child | purpose        |
//! |-------|----------------|
//! | 0     | ensemble       |
//! | 1     | signal         |
//! | 2     | noise          |
//!
//! so any single trial replays in isolation. Trials run on a worker pool and
//! are re-ordered by `(cell, trial)` before aggregation; the thread count
//! never changes the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::baselines::{iht_solve, tsi_init, wf_solve, BaselineConfig, BaselineMethod};
use crate::ensemble::{gen_ensemble, gen_signal, measure, NoiseKind, NoiseSpec, StorageMode};
use crate::error::{Result, SgnError};
use crate::metrics::{TrialOutcome, DEFAULT_SUCCESS_THRESHOLD};
use crate::refine::{solve, SolveResult, SolveStatus, SolverConfig};
use crate::rng::RngSeed;
use crate::spectral::{initialize, InitOptions, InitResult, PowerOptions};

/// Wall clock that reads zero where no monotonic clock exists (wasm32).
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn secs(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

/// Floor applied before taking `log10` of a relative error.
pub const LOG_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    InitCompare,
    PhaseMap,
    Convergence,
    IterationCount,
    NoiseSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Initializer {
    Alg1,
    Tsi { alpha: f64 },
}

impl Initializer {
    pub fn label(&self) -> String {
        match self {
            Initializer::Alg1 => "alg1".into(),
            Initializer::Tsi { alpha } => format!("tsi_{alpha}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgn,
    Wf,
    Iht,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Sgn => "sgn",
            Method::Wf => "wf",
            Method::Iht => "iht",
        }
    }
}

/// One compared procedure: an initializer alone, or a solver started from the
/// shared initial point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Init(Initializer),
    Solver(Method),
}

impl Arm {
    pub fn label(&self) -> String {
        match self {
            Arm::Init(i) => i.label(),
            Arm::Solver(m) => m.label().into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellNoise {
    None,
    /// Fixed standard deviation.
    Sigma {
        family: NoiseKind,
        sigma: f64,
    },
    /// `σ = √(‖x‖ / snr)`, i.e. `snr = ‖x‖/σ²`.
    Snr {
        family: NoiseKind,
        snr: f64,
    },
}

impl CellNoise {
    pub fn resolve(&self, x_norm: f64) -> Result<NoiseSpec> {
        match *self {
            CellNoise::None => Ok(NoiseSpec::none()),
            CellNoise::Sigma { family, sigma } => NoiseSpec::new(family, sigma),
            CellNoise::Snr { family, snr } => {
                if !(snr > 0.0) {
                    return Err(SgnError::Argument(format!(
                        "snr must be positive (got {snr})"
                    )));
                }
                NoiseSpec::new(family, (x_norm / snr).sqrt())
            }
        }
    }

    pub fn snr(&self) -> Option<f64> {
        match *self {
            CellNoise::Snr { snr, .. } => Some(snr),
            _ => None,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            CellNoise::None => Some(0.0),
            CellNoise::Sigma { sigma, .. } => Some(sigma),
            CellNoise::Snr { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub s: usize,
    pub noise: CellNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub n: usize,
    pub cells: Vec<Cell>,
    pub trials: usize,
    pub master_seed: u64,
    pub arms: Vec<Arm>,
    /// Initializer shared by the solver arms.
    pub init: Initializer,
    pub init_options: InitOptions,
    /// Template; `s` is set per cell.
    pub solver: SolverConfig,
    /// Template; `method` and `s` are set per arm and cell.
    pub baseline: BaselineConfig,
    pub success_threshold: f64,
    pub storage: StorageMode,
    /// Keep per-trial records in the result.
    pub keep_records: bool,
}

impl SweepSpec {
    fn base(
        experiment: Experiment,
        n: usize,
        cells: Vec<Cell>,
        arms: Vec<Arm>,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            experiment,
            n,
            cells,
            trials,
            master_seed: seed,
            arms,
            init: Initializer::Alg1,
            init_options: InitOptions {
                power: PowerOptions {
                    svd_fallback: true,
                    ..PowerOptions::default()
                },
                ..InitOptions::default()
            },
            solver: SolverConfig::new(1),
            baseline: BaselineConfig::new(BaselineMethod::Wf, 1),
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            storage: StorageMode::Materialized,
            keep_records: false,
        }
    }

    /// Initializer comparison: `n = 500`, `s = 5`, `m/n ∈ {0.1, …, 1.0}`.
    pub fn init_compare(trials: usize, seed: u64) -> Self {
        let n = 500;
        let cells = (1..=10)
            .map(|k| Cell {
                m: n * k / 10,
                s: 5,
                noise: CellNoise::None,
            })
            .collect();
        let arms = vec![
            Arm::Init(Initializer::Alg1),
            Arm::Init(Initializer::Tsi { alpha: 0.5 }),
            Arm::Init(Initializer::Tsi { alpha: 0.2 }),
        ];
        let mut spec = Self::base(Experiment::InitCompare, n, cells, arms, trials, seed);
        spec.storage = StorageMode::Streamed;
        spec
    }

    /// Phase map: `n = 100`, `m/n ∈ {0.2, …, 2.0}`, `s/n ∈ {0.1, …, 1.0}`.
    pub fn phase_map(trials: usize, seed: u64) -> Self {
        let n = 100;
        let mut cells = Vec::new();
        for sk in 1..=10 {
            for mk in 1..=10 {
                cells.push(Cell {
                    m: n * 2 * mk / 10,
                    s: n * sk / 10,
                    noise: CellNoise::None,
                });
            }
        }
        let arms = vec![
            Arm::Solver(Method::Sgn),
            Arm::Solver(Method::Wf),
            Arm::Solver(Method::Iht),
        ];
        let mut spec = Self::base(Experiment::PhaseMap, n, cells, arms, trials, seed);
        spec.solver.max_iters = 2000;
        spec.baseline.max_iters = 2000;
        spec
    }

    /// Convergence curves at `(n, m, s) = (200, 200, 40)`.
    pub fn convergence(trials: usize, seed: u64) -> Self {
        let cells = vec![Cell {
            m: 200,
            s: 40,
            noise: CellNoise::None,
        }];
        let arms = vec![Arm::Solver(Method::Sgn), Arm::Solver(Method::Iht)];
        let mut spec = Self::base(Experiment::Convergence, 200, cells, arms, trials, seed);
        spec.solver.max_iters = 1000;
        spec.baseline.max_iters = 1000;
        spec
    }

    /// Iterations to success with `m = ⌊10 s ln n⌋`, `n = 100`, `s ∈ {6, 8, …, 22}`.
    pub fn iteration_count(trials: usize, seed: u64) -> Self {
        let n = 100;
        let cells = (6..=22)
            .step_by(2)
            .map(|s| Cell {
                m: (10.0 * s as f64 * (n as f64).ln()).floor() as usize,
                s,
                noise: CellNoise::None,
            })
            .collect();
        let arms = vec![Arm::Solver(Method::Sgn), Arm::Solver(Method::Iht)];
        let mut spec = Self::base(Experiment::IterationCount, n, cells, arms, trials, seed);
        spec.solver.max_iters = 1000;
        spec.baseline.max_iters = 1000;
        spec
    }

    /// Gaussian noise with `snr = ‖x‖/σ² ∈ {5, 10, …, 50}` at `(100, 200, 5)`.
    pub fn noise_sweep(trials: usize, seed: u64) -> Self {
        let cells = (1..=10)
            .map(|k| Cell {
                m: 200,
                s: 5,
                noise: CellNoise::Snr {
                    family: NoiseKind::Gaussian,
                    snr: 5.0 * k as f64,
                },
            })
            .collect();
        Self::base(
            Experiment::NoiseSweep,
            100,
            cells,
            vec![Arm::Solver(Method::Sgn)],
            trials,
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 || self.cells.is_empty() || self.arms.is_empty() {
            return Err(SgnError::Argument(
                "sweep needs n ≥ 1, trials ≥ 1, at least one cell and one arm".into(),
            ));
        }
        for c in &self.cells {
            if c.m == 0 || c.s == 0 || c.s > self.n {
                return Err(SgnError::Argument(format!(
                    "invalid cell m={}, s={} for n={}",
                    c.m, c.s, self.n
                )));
            }
        }
        Ok(())
    }

    /// Seed of trial `t` in cell `cell`.
    pub fn trial_seed(&self, cell: usize, t: usize) -> RngSeed {
        RngSeed::new(self.master_seed, cell as u64).child(t as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub arm: String,
    pub outcome: TrialOutcome,
    pub status: Option<SolveStatus>,
    /// First iteration with relative error at or below the success threshold.
    pub iterations_to_success: Option<usize>,
    /// Relative error per iteration (convergence experiment only).
    pub curve: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub x_norm: f64,
    pub sigma: f64,
    pub arms: Vec<ArmOutcome>,
}

fn init_with(
    init: &Initializer,
    ens: &crate::ensemble::MeasurementEnsemble,
    obs: &crate::ensemble::Observations,
    s: usize,
    opts: &InitOptions,
) -> Result<InitResult> {
    match *init {
        Initializer::Alg1 => initialize(ens, obs, s, opts),
        Initializer::Tsi { alpha } => tsi_init(ens, obs, alpha, opts),
    }
}

/// Runs trial `t` of cell `cell`. Solver failures are recorded, never raised.
pub fn run_trial(spec: &SweepSpec, cell_idx: usize, t: usize) -> Result<TrialRecord> {
    let cell = *spec
        .cells
        .get(cell_idx)
        .ok_or_else(|| SgnError::Argument(format!("cell {cell_idx} out of range")))?;
    let seed = spec.trial_seed(cell_idx, t);
    let n = spec.n;
    let ens = gen_ensemble(n, cell.m, seed.child(0), spec.storage)?;
    let x = gen_signal(n, cell.s, seed.child(1))?;
    let noise = cell.noise.resolve(x.norm())?;
    let obs = measure(&ens, &x, noise, seed.child(2))?;
    let truth = x.values();
    let thr = spec.success_threshold;
    let want_curve = spec.experiment == Experiment::Convergence;

    let zero = vec![0.0; n];
    let evaluate = |xhat: &[f64], iters: usize, secs: f64| -> Result<TrialOutcome> {
        TrialOutcome::evaluate(xhat, truth, iters, thr, secs)
    };

    let needs_shared = spec.arms.iter().any(|a| matches!(a, Arm::Solver(_)));
    let t0 = Stopwatch::start();
    let shared = if needs_shared {
        Some(init_with(
            &spec.init,
            &ens,
            &obs,
            cell.s,
            &spec.init_options,
        ))
    } else {
        None
    };
    let shared_secs = t0.secs();

    let mut arms = Vec::with_capacity(spec.arms.len());
    for arm in &spec.arms {
        let label = arm.label();
        let out = match arm {
            Arm::Init(init) => {
                let start = Stopwatch::start();
                let res = init_with(init, &ens, &obs, cell.s, &spec.init_options);
                let secs = start.secs();
                let xhat = res.as_ref().map(|r| r.x0.as_slice()).unwrap_or(&zero);
                ArmOutcome {
                    arm: label,
                    outcome: evaluate(xhat, 0, secs)?,
                    status: None,
                    iterations_to_success: None,
                    curve: None,
                }
            }
            Arm::Solver(method) => {
                let x0 = match shared.as_ref().expect("shared init computed") {
                    Ok(init) => init.x0.clone(),
                    Err(_) => {
                        arms.push(ArmOutcome {
                            arm: label,
                            outcome: evaluate(&zero, 0, shared_secs)?,
                            status: Some(SolveStatus::NumericalFailure),
                            iterations_to_success: None,
                            curve: None,
                        });
                        continue;
                    }
                };
                let start = Stopwatch::start();
                let res = run_solver(spec, *method, cell.s, &ens, &obs, &x0, truth);
                let secs = shared_secs + start.secs();
                match res {
                    Ok(res) => {
                        let curve = want_curve.then(|| {
                            res.trace
                                .records
                                .iter()
                                .map(|r| r.rel_error.unwrap_or(f64::NAN))
                                .collect()
                        });
                        ArmOutcome {
                            arm: label,
                            outcome: evaluate(&res.x, res.trace.iterations(), secs)?,
                            status: Some(res.trace.status),
                            iterations_to_success: res.trace.first_below(thr),
                            curve,
                        }
                    }
                    Err(_) => ArmOutcome {
                        arm: label,
                        outcome: evaluate(&x0, 0, secs)?,
                        status: Some(SolveStatus::NumericalFailure),
                        iterations_to_success: None,
                        curve: None,
                    },
                }
            }
        };
        arms.push(out);
    }
    Ok(TrialRecord {
        cell: cell_idx,
        trial: t,
        x_norm: x.norm(),
        sigma: noise.sigma,
        arms,
    })
}

fn run_solver(
    spec: &SweepSpec,
    method: Method,
    s: usize,
    ens: &crate::ensemble::MeasurementEnsemble,
    obs: &crate::ensemble::Observations,
    x0: &[f64],
    truth: &[f64],
) -> Result<SolveResult> {
    match method {
        Method::Sgn => {
            let mut cfg = spec.solver;
            cfg.s = s;
            solve(ens, obs, x0, &cfg, Some(truth))
        }
        Method::Wf | Method::Iht => {
            let mut cfg = spec.baseline;
            cfg.s = s;
            cfg.method = if method == Method::Wf {
                BaselineMethod::Wf
            } else {
                BaselineMethod::Iht
            };
            if method == Method::Wf {
                wf_solve(ens, obs, x0, &cfg, Some(truth))
            } else {
                iht_solve(ens, obs, x0, &cfg, Some(truth))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub cell: usize,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub snr: Option<f64>,
    pub sigma: Option<f64>,
    pub arm: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rel_error: f64,
    pub mean_log10_rel_error: f64,
    pub mean_iterations: f64,
    /// Mean first-success iteration, over successful trials only.
    pub mean_iterations_to_success: Option<f64>,
    pub mean_wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub arm: String,
    pub k: usize,
    pub mean_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellAggregate>,
    pub curves: Vec<CurvePoint>,
    pub records: Option<Vec<TrialRecord>>,
}

impl SweepResult {
    pub fn cell(&self, cell: usize, arm: &str) -> Option<&CellAggregate> {
        self.cells.iter().find(|c| c.cell == cell && c.arm == arm)
    }

    pub fn curve(&self, arm: &str) -> Vec<f64> {
        self.curves
            .iter()
            .filter(|p| p.arm == arm)
            .map(|p| p.mean_rel_error)
            .collect()
    }
}

/// Rebuilds cell aggregates (and curves) from raw trial records, in order.
pub fn aggregate(
    spec: &SweepSpec,
    records: &[TrialRecord],
) -> (Vec<CellAggregate>, Vec<CurvePoint>) {
    let mut cells = Vec::new();
    for (ci, cell) in spec.cells.iter().enumerate() {
        let in_cell: Vec<&TrialRecord> = records.iter().filter(|r| r.cell == ci).collect();
        for (ai, arm) in spec.arms.iter().enumerate() {
            let outs: Vec<&ArmOutcome> = in_cell.iter().map(|r| &r.arms[ai]).collect();
            let trials = outs.len();
            let successes = outs.iter().filter(|o| o.outcome.success).count();
            let mean = |f: &dyn Fn(&ArmOutcome) -> f64| -> f64 {
                if trials == 0 {
                    f64::NAN
                } else {
                    outs.iter().map(|o| f(o)).sum::<f64>() / trials as f64
                }
            };
            let to_success: Vec<f64> = outs
                .iter()
                .filter(|o| o.outcome.success)
                .filter_map(|o| o.iterations_to_success.map(|k| k as f64))
                .collect();
            cells.push(CellAggregate {
                cell: ci,
                n: spec.n,
                m: cell.m,
                s: cell.s,
                snr: cell.noise.snr(),
                sigma: cell.noise.sigma(),
                arm: arm.label(),
                trials,
                successes,
                success_rate: if trials == 0 {
                    0.0
                } else {
                    successes as f64 / trials as f64
                },
                mean_rel_error: mean(&|o| o.outcome.rel_error),
                mean_log10_rel_error: mean(&|o| o.outcome.rel_error.max(LOG_FLOOR).log10()),
                mean_iterations: mean(&|o| o.outcome.iterations as f64),
                mean_iterations_to_success: (!to_success.is_empty())
                    .then(|| to_success.iter().sum::<f64>() / to_success.len() as f64),
                mean_wall_time: mean(&|o| o.outcome.wall_time),
            });
        }
    }

    let mut curves = Vec::new();
    if spec.experiment == Experiment::Convergence {
        let len = records
            .iter()
            .flat_map(|r| r.arms.iter())
            .filter_map(|a| a.curve.as_ref().map(Vec::len))
            .max()
            .unwrap_or(0);
        for (ai, arm) in spec.arms.iter().enumerate() {
            let series: Vec<&Vec<f64>> = records
                .iter()
                .filter_map(|r| r.arms[ai].curve.as_ref())
                .filter(|c| !c.is_empty())
                .collect();
            if series.is_empty() {
                continue;
            }
            for k in 0..len {
                // Finished runs hold their final value.
                let total: f64 = series.iter().map(|c| c[k.min(c.len() - 1)]).sum();
                curves.push(CurvePoint {
                    arm: arm.label(),
                    k,
                    mean_rel_error: total / series.len() as f64,
                });
            }
        }
    }
    (cells, curves)
}

/// Runs every trial of the sweep on `jobs` worker threads.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    spec.validate()?;
    let work: Vec<(usize, usize)> = (0..spec.cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SgnError::Argument(format!("cannot build worker pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        work.par_iter()
            .map(|&(c, t)| run_trial(spec, c, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let (cells, curves) = aggregate(spec, &records);
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        curves,
        records: spec.keep_records.then_some(records),
    })
}

fn expect_experiment(spec: &SweepSpec, want: Experiment) -> Result<()> {
    if spec.experiment == want {
        Ok(())
    } else {
        Err(SgnError::Argument(format!(
            "expected a {want:?} sweep, got {:?}",
            spec.experiment
        )))
    }
}

pub fn sweep_phase(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    expect_experiment(spec, Experiment::PhaseMap)?;
    run_sweep(spec, jobs)
}

pub fn sweep_init(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    expect_experiment(spec, Experiment::InitCompare)?;
    run_sweep(spec, jobs)
}

pub fn sweep_convergence(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    expect_experiment(spec, Experiment::Convergence)?;
    run_sweep(spec, jobs)
}

pub fn sweep_iterations(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    expect_experiment(spec, Experiment::IterationCount)?;
    run_sweep(spec, jobs)
}

pub fn sweep_noise(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    expect_experiment(spec, Experiment::NoiseSweep)?;
    run_sweep(spec, jobs)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format aggregate table, one row per `(cell, arm)`. Wall times are
/// excluded so that reruns are byte-identical.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "cell,n,m,s,m_over_n,s_over_n,snr,sigma,method,trials,successes,success_rate,\
         mean_rel_error,mean_log10_rel_error,mean_iterations,mean_iterations_to_success\n",
    );
    for c in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:e},{},{},{}",
            c.cell,
            c.n,
            c.m,
            c.s,
            c.m as f64 / c.n as f64,
            c.s as f64 / c.n as f64,
            opt_num(c.snr),
            opt_num(c.sigma),
            c.arm,
            c.trials,
            c.successes,
            c.success_rate,
            c.mean_rel_error,
            c.mean_log10_rel_error,
            c.mean_iterations,
            opt_num(c.mean_iterations_to_success),
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Success-rate matrix for one arm: rows `s/n`, columns `m/n`.
pub fn phase_matrix_csv(result: &SweepResult, arm: &str) -> String {
    let mut ms: Vec<usize> = result.cells.iter().map(|c| c.m).collect();
    let mut ss: Vec<usize> = result.cells.iter().map(|c| c.s).collect();
    ms.sort_unstable();
    ms.dedup();
    ss.sort_unstable();
    ss.dedup();
    let n = result.spec.n as f64;
    let mut out = String::from("s_over_n");
    for m in &ms {
        write!(out, ",{}", *m as f64 / n).unwrap();
    }
    out.push('\n');
    for s in &ss {
        write!(out, "{}", *s as f64 / n).unwrap();
        for m in &ms {
            let rate = result
                .cells
                .iter()
                .find(|c| c.arm == arm && c.m == *m && c.s == *s)
                .map(|c| c.success_rate.to_string())
                .unwrap_or_default();
            write!(out, ",{rate}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Mean relative error per iteration, one row per `(method, k)`.
pub fn curves_csv(result: &SweepResult) -> String {
    let mut out = String::from("method,k,mean_rel_error\n");
    for p in &result.curves {
        writeln!(out, "{},{},{:e}", p.arm, p.k, p.mean_rel_error).unwrap();
    }
    out
}

/// Wall-clock means, kept apart from the deterministic tables.
pub fn timing_csv(result: &SweepResult) -> String {
    let mut out = String::from("cell,method,mean_wall_time_s\n");
    for c in &result.cells {
        writeln!(out, "{},{},{}", c.cell, c.arm, c.mean_wall_time).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub tool: String,
    pub version: String,
    pub spec: SweepSpec,
    pub log_base_in_m_rule: String,
    pub snr_definition: String,
}

impl SweepManifest {
    pub fn new(spec: &SweepSpec) -> Self {
        Self {
            tool: "sgn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.clone(),
            log_base_in_m_rule: "natural".into(),
            snr_definition: "snr = ||x|| / sigma^2".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(experiment: Experiment) -> SweepSpec {
        let mut spec = SweepSpec::phase_map(3, 5);
        spec.experiment = experiment;
        spec.n = 20;
        spec.cells = vec![
            Cell {
                m: 40,
                s: 2,
                noise: CellNoise::None,
            },
            Cell {
                m: 10,
                s: 6,
                noise: CellNoise::None,
            },
        ];
        spec.solver.max_iters = 50;
        spec.baseline.max_iters = 50;
        spec
    }

    #[test]
    fn trial_is_deterministic() {
        let spec = tiny(Experiment::PhaseMap);
        let mut a = run_trial(&spec, 0, 1).unwrap();
        let mut b = run_trial(&spec, 0, 1).unwrap();
        for r in [&mut a, &mut b] {
            r.arms.iter_mut().for_each(|o| o.outcome.wall_time = 0.0);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn jobs_do_not_change_output() {
        let spec = tiny(Experiment::PhaseMap);
        let a = run_sweep(&spec, 1).unwrap();
        let b = run_sweep(&spec, 3).unwrap();
        assert_eq!(to_csv(&a), to_csv(&b));
    }

    #[test]
    fn aggregates_recompute_from_records() {
        let mut spec = tiny(Experiment::PhaseMap);
        spec.keep_records = true;
        let res = run_sweep(&spec, 2).unwrap();
        let recs = res.records.as_ref().unwrap();
        let (cells, _) = aggregate(&spec, recs);
        assert_eq!(cells, res.cells);
        for c in &res.cells {
            let k = c.success_rate * c.trials as f64;
            assert_eq!(k, k.round());
        }
        // Any single trial replays on its own.
        let mut lone = run_trial(&spec, 1, 2).unwrap();
        let mut inside = recs
            .iter()
            .find(|r| r.cell == 1 && r.trial == 2)
            .unwrap()
            .clone();
        lone.arms.iter_mut().for_each(|o| o.outcome.wall_time = 0.0);
        inside
            .arms
            .iter_mut()
            .for_each(|o| o.outcome.wall_time = 0.0);
        assert_eq!(lone, inside);
    }

    #[test]
    fn wrong_experiment_rejected() {
        let spec = tiny(Experiment::PhaseMap);
        assert!(sweep_noise(&spec, 1).is_err());
        assert!(sweep_init(&spec, 1).is_err());
    }

    #[test]
    fn infeasible_cell_fails() {
        let mut spec = tiny(Experiment::PhaseMap);
        spec.cells = vec![Cell {
            m: 1,
            s: 10,
            noise: CellNoise::None,
        }];
        let res = run_sweep(&spec, 1).unwrap();
        assert!(res.cells.iter().all(|c| c.success_rate == 0.0));
    }

    #[test]
    fn snr_resolves_sigma() {
        let n = CellNoise::Snr {
            family: NoiseKind::Gaussian,
            snr: 5.0,
        };
        let spec = n.resolve(20.0).unwrap();
        assert!((spec.sigma - 2.0).abs() < 1e-15);
        assert!(CellNoise::Snr {
            family: NoiseKind::Gaussian,
            snr: 0.0
        }
        .resolve(1.0)
        .is_err());
    }

    #[test]
    fn presets_have_documented_grids() {
        let p = SweepSpec::phase_map(1, 0);
        assert_eq!(p.cells.len(), 100);
        assert_eq!(p.cells.first().map(|c| (c.m, c.s)), Some((20, 10)));
        assert_eq!(p.cells.last().map(|c| (c.m, c.s)), Some((200, 100)));
        let it = SweepSpec::iteration_count(1, 0);
        assert_eq!(
            it.cells.iter().map(|c| c.s).collect::<Vec<_>>(),
            vec![6, 8, 10, 12, 14, 16, 18, 20, 22]
        );
        assert_eq!(it.cells[0].m, 276);
        let nz = SweepSpec::noise_sweep(1, 0);
        assert_eq!(nz.cells.len(), 10);
        assert_eq!(nz.cells[9].noise.snr(), Some(50.0));
        let init = SweepSpec::init_compare(1, 0);
        assert_eq!(
            init.cells.iter().map(|c| c.m).collect::<Vec<_>>(),
            (1..=10).map(|k| 50 * k).collect::<Vec<_>>()
        );
    }

    #[test]
    fn phase_matrix_layout() {
        let spec = tiny(Experiment::PhaseMap);
        let res = run_sweep(&spec, 1).unwrap();
        let text = phase_matrix_csv(&res, "sgn");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s_over_n,0.5,2");
        assert_eq!(lines.len(), 3);
    }
}
