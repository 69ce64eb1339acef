//! Browser bindings: one recovery run, an initializer comparison over `m/n`,
//! and a small phase map. Every export returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sgn_core::baselines::{iht_solve, tsi_init, wf_solve, BaselineConfig, BaselineMethod};
use sgn_core::bench::{aggregate, run_trial, Arm, Cell, CellNoise, Method, SweepSpec};
use sgn_core::spectral::PowerOptions;
use sgn_core::{
    gen_ensemble, gen_signal, initialize, measure, rel_error, InitOptions, NoiseKind, NoiseSpec,
    RngSeed, SolverConfig, StorageMode,
};

#[derive(Debug, Serialize)]
pub struct Recovery {
    pub method: String,
    pub status: String,
    pub init_rel_error: f64,
    pub rel_error: f64,
    /// Relative error after each iteration, starting with the initial point.
    pub curve: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct InitCurve {
    pub m_over_n: Vec<f64>,
    pub alg1: Vec<f64>,
    pub tsi: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PhaseMap {
    pub method: String,
    pub m_over_n: Vec<f64>,
    pub s_over_n: Vec<f64>,
    /// `rates[row][col]`, rows by `s/n`, columns by `m/n`.
    pub rates: Vec<Vec<f64>>,
}

fn init_options() -> InitOptions {
    InitOptions {
        power: PowerOptions {
            svd_fallback: true,
            ..PowerOptions::default()
        },
        ..InitOptions::default()
    }
}

fn parse_method(name: &str) -> Result<Method, String> {
    match name {
        "sgn" => Ok(Method::Sgn),
        "wf" => Ok(Method::Wf),
        "iht" => Ok(Method::Iht),
        _ => Err(format!("unknown method `{name}`")),
    }
}

pub fn recovery(
    n: usize,
    m: usize,
    s: usize,
    sigma: f64,
    seed: u64,
    method: &str,
) -> Result<Recovery, String> {
    let method = parse_method(method)?;
    let base = RngSeed::new(seed, 0);
    let ens =
        gen_ensemble(n, m, base.child(0), StorageMode::Materialized).map_err(|e| e.to_string())?;
    let x = gen_signal(n, s, base.child(1)).map_err(|e| e.to_string())?;
    let noise = if sigma > 0.0 {
        NoiseSpec::new(NoiseKind::Gaussian, sigma)
    } else {
        Ok(NoiseSpec::none())
    }
    .map_err(|e| e.to_string())?;
    let obs = measure(&ens, &x, noise, base.child(2)).map_err(|e| e.to_string())?;
    let truth = x.values();
    let init = initialize(&ens, &obs, s, &init_options()).map_err(|e| e.to_string())?;
    let res = match method {
        Method::Sgn => sgn_core::solve(&ens, &obs, &init.x0, &SolverConfig::new(s), Some(truth)),
        Method::Wf => {
            let mut cfg = BaselineConfig::new(BaselineMethod::Wf, s);
            cfg.max_iters = 500;
            wf_solve(&ens, &obs, &init.x0, &cfg, Some(truth))
        }
        Method::Iht => {
            let mut cfg = BaselineConfig::new(BaselineMethod::Iht, s);
            cfg.max_iters = 500;
            iht_solve(&ens, &obs, &init.x0, &cfg, Some(truth))
        }
    }
    .map_err(|e| e.to_string())?;
    Ok(Recovery {
        method: method.label().into(),
        status: format!("{:?}", res.trace.status),
        init_rel_error: rel_error(&init.x0, truth).map_err(|e| e.to_string())?,
        rel_error: rel_error(&res.x, truth).map_err(|e| e.to_string())?,
        curve: res
            .trace
            .records
            .iter()
            .map(|r| r.rel_error.unwrap_or(f64::NAN))
            .collect(),
        truth: truth.to_vec(),
        estimate: res.x,
    })
}

/// Mean initializer error for `m/n ∈ {0.1, …, 1.0}`.
pub fn init_curve(
    n: usize,
    s: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<InitCurve, String> {
    let mut out = InitCurve {
        m_over_n: Vec::new(),
        alg1: Vec::new(),
        tsi: Vec::new(),
    };
    let opts = init_options();
    for k in 1..=10 {
        let m = (n * k / 10).max(1);
        let (mut a, mut b) = (0.0, 0.0);
        for t in 0..trials {
            let base = RngSeed::new(seed, k as u64).child(t as u64);
            let ens = gen_ensemble(n, m, base.child(0), StorageMode::Streamed)
                .map_err(|e| e.to_string())?;
            let x = gen_signal(n, s, base.child(1)).map_err(|e| e.to_string())?;
            let obs =
                measure(&ens, &x, NoiseSpec::none(), base.child(2)).map_err(|e| e.to_string())?;
            let err = |r: sgn_core::Result<sgn_core::InitResult>| {
                r.ok()
                    .and_then(|r| rel_error(&r.x0, x.values()).ok())
                    .unwrap_or(1.0)
            };
            a += err(initialize(&ens, &obs, s, &opts));
            b += err(tsi_init(&ens, &obs, alpha, &opts));
        }
        out.m_over_n.push(m as f64 / n as f64);
        out.alg1.push(a / trials as f64);
        out.tsi.push(b / trials as f64);
    }
    Ok(out)
}

/// Success rates on a `grid × grid` lattice of `m/n ∈ (0, 2]`, `s/n ∈ (0, 1]`.
pub fn phase_map(
    n: usize,
    grid: usize,
    trials: usize,
    seed: u64,
    method: &str,
    max_iters: usize,
) -> Result<PhaseMap, String> {
    let method = parse_method(method)?;
    let mut spec = SweepSpec::phase_map(trials, seed);
    spec.n = n;
    spec.arms = vec![Arm::Solver(method)];
    spec.solver.max_iters = max_iters;
    spec.baseline.max_iters = max_iters;
    spec.cells.clear();
    let m_levels: Vec<usize> = (1..=grid).map(|k| (2 * n * k / grid).max(1)).collect();
    let s_levels: Vec<usize> = (1..=grid).map(|k| (n * k / grid).max(1)).collect();
    for &s in &s_levels {
        for &m in &m_levels {
            spec.cells.push(Cell {
                m,
                s,
                noise: CellNoise::None,
            });
        }
    }
    spec.validate().map_err(|e| e.to_string())?;
    // Serial: the browser has no thread pool.
    let mut records = Vec::new();
    for c in 0..spec.cells.len() {
        for t in 0..trials {
            records.push(run_trial(&spec, c, t).map_err(|e| e.to_string())?);
        }
    }
    let (cells, _) = aggregate(&spec, &records);
    let rates = cells
        .chunks(grid)
        .map(|row| row.iter().map(|c| c.success_rate).collect())
        .collect();
    Ok(PhaseMap {
        method: method.label().into(),
        m_over_n: m_levels.iter().map(|&m| m as f64 / n as f64).collect(),
        s_over_n: s_levels.iter().map(|&s| s as f64 / n as f64).collect(),
        rates,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("demo output serializes"))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = recover)]
pub fn recover_js(
    n: usize,
    m: usize,
    s: usize,
    sigma: f64,
    seed: u64,
    method: &str,
) -> Result<String, JsValue> {
    to_js(recovery(n, m, s, sigma, seed, method))
}

#[wasm_bindgen(js_name = initCurve)]
pub fn init_curve_js(
    n: usize,
    s: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(init_curve(n, s, alpha, trials, seed))
}

#[wasm_bindgen(js_name = phaseMap)]
pub fn phase_map_js(
    n: usize,
    grid: usize,
    trials: usize,
    seed: u64,
    method: &str,
    max_iters: usize,
) -> Result<String, JsValue> {
    to_js(phase_map(n, grid, trials, seed, method, max_iters))
}
