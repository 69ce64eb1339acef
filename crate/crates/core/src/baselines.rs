//! Comparison methods.
//!
//! These are simplified proxies, not the published WF/TWF codes:
//!
//! * [`wf_solve`]: plain gradient descent `x ← x − μ∇f(x)` (Wirtinger-flow style);
//! * [`iht_solve`]: thresholded gradient descent `x ← H_s(x − μ∇f(x))`;
//! * [`tsi_init`]: spectral initialization on the thresholded support
//!   `{j : Y_jj > α φ² √(ln n / m)}`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{MeasurementEnsemble, Observations};
use crate::error::{check_len, Result, SgnError};
use crate::metrics::rel_error;
use crate::refine::{
    hard_threshold, Linearization, SolveResult, SolveStatus, SolveTrace, StepKind, TraceRecord,
    DEFAULT_STEP_SCALE,
};
use crate::spectral::{
    marginals, norm_estimate, spectral_on_support, InitOptions, InitResult, PhiConvention,
};
use crate::vecops::{diff_norm, nonzeros, norm};

/// Objective growth factor, relative to the start, that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Wf,
    Iht,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// `μ = step_mu / φ̂²`.
    pub step_mu: f64,
    pub max_iters: usize,
    /// Sparsity for the thresholded variant.
    pub s: usize,
    /// TSI threshold parameter.
    pub alpha: f64,
    pub tol_residual: f64,
    pub tol_stagnation: f64,
    pub phi_convention: PhiConvention,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, s: usize) -> Self {
        Self {
            method,
            step_mu: DEFAULT_STEP_SCALE,
            max_iters: 2000,
            s,
            alpha: 0.5,
            tol_residual: 1e-12,
            tol_stagnation: 1e-14,
            phi_convention: PhiConvention::Mean,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.method == BaselineMethod::Iht && (self.s == 0 || self.s > n) {
            return Err(SgnError::Argument(format!(
                "thresholded descent needs 1 ≤ s ≤ n (got s={}, n={n})",
                self.s
            )));
        }
        if !(self.step_mu > 0.0 && self.step_mu.is_finite()) {
            return Err(SgnError::Argument(format!(
                "step_mu must be positive (got {})",
                self.step_mu
            )));
        }
        Ok(())
    }
}

fn descend(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    x0: &[f64],
    config: &BaselineConfig,
    sparsity: Option<usize>,
    truth: Option<&[f64]>,
) -> Result<SolveResult> {
    config.validate(ens.n())?;
    check_len("initial point", ens.n(), x0.len())?;
    if x0.iter().all(|v| *v == 0.0) {
        return Err(SgnError::DegenerateInput("zero initial point".into()));
    }
    let mut phi = norm_estimate(&obs.y, config.phi_convention);
    if phi == 0.0 {
        phi = norm(x0);
    }
    let mu = config.step_mu / (phi * phi);
    let kind = if sparsity.is_some() {
        StepKind::ThresholdedGradient
    } else {
        StepKind::Gradient
    };
    let rel = |x: &[f64]| truth.and_then(|t| rel_error(x, t).ok());

    let mut x = x0.to_vec();
    let mut lin = Linearization::new(ens, obs, &x)?;
    let start = lin.objective();
    let mut records = vec![TraceRecord {
        k: 0,
        rel_error: rel(&x),
        residual_norm: lin.residual_norm(),
        objective: start,
        support: nonzeros(&x),
        step_kind: StepKind::Initial,
        jitter_applied: false,
    }];
    let mut status = SolveStatus::MaxIters;
    for k in 1..=config.max_iters {
        let g = lin.gradient();
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - mu * b).collect();
        if let Some(s) = sparsity {
            next = hard_threshold(&next, s);
        }
        if next.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::Diverged;
            break;
        }
        let change = diff_norm(&next, &x);
        x = next;
        lin = Linearization::new(ens, obs, &x)?;
        let obj = lin.objective();
        records.push(TraceRecord {
            k,
            rel_error: rel(&x),
            residual_norm: lin.residual_norm(),
            objective: obj,
            support: nonzeros(&x),
            step_kind: kind,
            jitter_applied: false,
        });
        if !obj.is_finite() || obj > DIVERGENCE_FACTOR * start.max(f64::MIN_POSITIVE) {
            status = SolveStatus::Diverged;
            break;
        }
        if obj <= config.tol_residual {
            status = SolveStatus::Converged;
            break;
        }
        if change <= config.tol_stagnation * norm(&x) {
            status = SolveStatus::Stagnated;
            break;
        }
    }
    Ok(SolveResult {
        x,
        trace: SolveTrace {
            records,
            status,
            step_mu: mu,
        },
    })
}

/// Plain gradient descent; no sparsity handling.
pub fn wf_solve(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    x0: &[f64],
    config: &BaselineConfig,
    truth: Option<&[f64]>,
) -> Result<SolveResult> {
    descend(ens, obs, x0, config, None, truth)
}

/// Gradient descent followed by hard thresholding to `config.s` entries.
pub fn iht_solve(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    x0: &[f64],
    config: &BaselineConfig,
    truth: Option<&[f64]>,
) -> Result<SolveResult> {
    descend(ens, obs, x0, config, Some(config.s), truth)
}

/// TSI support rule `{j : Y_jj > α φ² √(ln n / m)}`.
///
/// When no marginal clears the threshold the single largest marginal is used.
pub fn tsi_support(marginals: &[f64], phi: f64, alpha: f64, m: usize) -> Vec<usize> {
    let n = marginals.len();
    let tau = alpha * phi * phi * ((n as f64).ln() / m as f64).sqrt();
    let picked: Vec<usize> = (0..n).filter(|&j| marginals[j] > tau).collect();
    if !picked.is_empty() {
        return picked;
    }
    let mut best = 0;
    for j in 1..n {
        if marginals[j] > marginals[best] {
            best = j;
        }
    }
    vec![best]
}

pub fn tsi_init(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    alpha: f64,
    opts: &InitOptions,
) -> Result<InitResult> {
    if !(alpha > 0.0) {
        return Err(SgnError::Argument(format!(
            "alpha must be positive (got {alpha})"
        )));
    }
    let marg = marginals(ens, obs)?;
    let phi = norm_estimate(&obs.y, opts.phi_convention);
    let support = tsi_support(&marg, phi, alpha, ens.m());
    spectral_on_support(ens, obs, support, marg, opts)
}
