//! Sparse Gauss-Newton refinement.
//!
//! Each iteration picks the next support by gradient hard thresholding,
//! `S_{k+1} = supp(H_s(x^k − μ ∇f(x^k)))`, then takes a Gauss-Newton step for
//! the residuals `F_i(z) = (zᵀA_i z − y_i)/√m` restricted to `S_{k+1}`:
//!
//! ```text
//! [J_Sᵀ J_S] p = ∇_S f(x^k) − J_Sᵀ J_C x^k_C        C = supp(x^k) \ S
//! x^{k+1}_S = x^k_S − p,   x^{k+1} = 0 off S
//! ```
//!
//! with `J(z)` the matrix whose row `i` is `((A_i + A_iᵀ) z)ᵀ / √m`.
//!
//! Everything in an iteration is derived from the vectors `w_i = (A_i + A_iᵀ) x^k`
//! and the residuals `r_i = x^kᵀ A_i x^k − y_i`, computed once per iterate
//! by [`Linearization`]. For `x^k` with `t` nonzeros that costs `O(m·n·t)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{MeasurementEnsemble, Observations};
use crate::error::{check_len, Result, SgnError};
use crate::metrics::rel_error;
use crate::spectral::{norm_estimate, PhiConvention};
use crate::vecops::{diff_norm, dot, nonzeros, norm, top_k_indices};

/// Step-size window `μ·‖x‖² ∈ [0.303, 0.344]` with a proven contraction.
pub const STEP_WINDOW: (f64, f64) = (0.303, 0.344);
/// Default `μ·φ̂²`.
pub const DEFAULT_STEP_SCALE: f64 = 0.32;

/// Thresholding step size, expressed as `μ = scale / φ̂²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMu {
    #[default]
    Auto,
    Scale(f64),
}

impl StepMu {
    pub fn scale(&self) -> f64 {
        match *self {
            StepMu::Auto => DEFAULT_STEP_SCALE,
            StepMu::Scale(c) => c,
        }
    }

    /// Absolute step for a given norm estimate.
    pub fn resolve(&self, phi: f64) -> f64 {
        self.scale() / (phi * phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub s: usize,
    pub step_mu: StepMu,
    pub max_iters: usize,
    /// Stop once the objective is at most this.
    pub tol_residual: f64,
    /// Stop once `‖x^{k+1} − x^k‖ ≤ tol_stagnation · ‖x^{k+1}‖`.
    pub tol_stagnation: f64,
    /// Diagonal regularization scale used when the normal matrix is not SPD.
    pub jitter: f64,
    pub phi_convention: PhiConvention,
}

impl SolverConfig {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            step_mu: StepMu::Auto,
            max_iters: 200,
            tol_residual: 1e-12,
            tol_stagnation: 1e-14,
            jitter: 1e-10,
            phi_convention: PhiConvention::Mean,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.s == 0 || self.s > n {
            return Err(SgnError::Argument(format!(
                "sparsity must satisfy 1 ≤ s ≤ n (got s={}, n={n})",
                self.s
            )));
        }
        let c = self.step_mu.scale();
        if !(c > 0.0 && c.is_finite()) {
            return Err(SgnError::Argument(format!(
                "step scale must be positive (got {c})"
            )));
        }
        if !(self.tol_residual >= 0.0 && self.tol_stagnation >= 0.0 && self.jitter >= 0.0) {
            return Err(SgnError::Argument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub support: Vec<usize>,
    pub k: usize,
    pub residual_norm: f64,
    pub grad_norm_restricted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Initial,
    GaussNewton,
    Gradient,
    ThresholdedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Stagnated,
    NumericalFailure,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    pub residual_norm: f64,
    pub objective: f64,
    pub support: Vec<usize>,
    pub step_kind: StepKind,
    pub jitter_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub status: SolveStatus,
    pub step_mu: f64,
}

impl SolveTrace {
    /// Number of steps taken (records after the initial one).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// First iteration whose relative error is at most `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_error.is_some_and(|e| e <= threshold))
            .map(|r| r.k)
    }

    /// One JSON object per record, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub trace: SolveTrace,
}

/// Per-iterate quantities shared by the gradient, the Jacobian and the GN system.
#[derive(Debug, Clone)]
pub struct Linearization {
    n: usize,
    m: usize,
    /// Row `i` holds `(A_i + A_iᵀ) z`.
    w: Vec<f64>,
    /// `zᵀA_i z − y_i`.
    r: Vec<f64>,
}

impl Linearization {
    pub fn new(ens: &MeasurementEnsemble, obs: &Observations, z: &[f64]) -> Result<Self> {
        check_len("observations", ens.m(), obs.m())?;
        check_len("iterate length", ens.n(), z.len())?;
        let (n, m) = (ens.n(), ens.m());
        let support = nonzeros(z);
        let mut w = vec![0.0; m * n];
        let mut r = vec![0.0; m];
        for i in 0..m {
            let wi = &mut w[i * n..(i + 1) * n];
            ens.sym_apply(i, z, &support, wi);
            let q = 0.5 * support.iter().map(|&j| z[j] * wi[j]).sum::<f64>();
            r[i] = q - obs.y[i];
        }
        Ok(Self { n, m, w, r })
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.r
    }

    pub fn objective(&self) -> f64 {
        dot(&self.r, &self.r) / (2.0 * self.m as f64)
    }

    /// `‖F(z)‖`.
    pub fn residual_norm(&self) -> f64 {
        (dot(&self.r, &self.r) / self.m as f64).sqrt()
    }

    /// `∇f(z) = (1/m) Σ_i r_i (A_i + A_iᵀ) z`.
    pub fn gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for i in 0..self.m {
            let ri = self.r[i];
            for (gj, wj) in g.iter_mut().zip(self.row(i)) {
                *gj += ri * wj;
            }
        }
        let inv = 1.0 / self.m as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    /// `J_S(z)`, an `m × |S|` matrix.
    pub fn jacobian(&self, support: &[usize]) -> DMatrix<f64> {
        let scale = 1.0 / (self.m as f64).sqrt();
        DMatrix::from_fn(self.m, support.len(), |i, a| {
            self.row(i)[support[a]] * scale
        })
    }

    /// Solves the restricted GN system at iterate `z`; returns `p` on `support`
    /// (length `|S|`) and whether jitter was needed.
    pub fn gn_system(&self, z: &[f64], support: &[usize], jitter: f64) -> Result<(Vec<f64>, bool)> {
        let k = support.len();
        if k == 0 {
            return Ok((Vec::new(), false));
        }
        let mut in_s = vec![false; self.n];
        support.iter().for_each(|&j| in_s[j] = true);
        let cross: Vec<usize> = nonzeros(z).into_iter().filter(|&j| !in_s[j]).collect();

        let inv_m = 1.0 / self.m as f64;
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut ws = vec![0.0; k];
        for i in 0..self.m {
            let row = self.row(i);
            for (a, &j) in support.iter().enumerate() {
                ws[a] = row[j];
            }
            // r_i minus the part of J_C x_C carried by this measurement.
            let coef = self.r[i] - cross.iter().map(|&c| row[c] * z[c]).sum::<f64>();
            for a in 0..k {
                rhs[a] += coef * ws[a];
                let wa = ws[a];
                for b in a..k {
                    gram[(a, b)] += wa * ws[b];
                }
            }
        }
        for a in 0..k {
            rhs[a] *= inv_m;
            for b in a..k {
                let v = gram[(a, b)] * inv_m;
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        if let Some(ch) = Cholesky::new(gram.clone()) {
            return Ok((ch.solve(&rhs).as_slice().to_vec(), false));
        }
        let max_diag = gram.diagonal().max().max(f64::MIN_POSITIVE);
        let mut jittered = gram;
        for a in 0..k {
            jittered[(a, a)] += jitter * max_diag;
        }
        match Cholesky::new(jittered) {
            Some(ch) => Ok((ch.solve(&rhs).as_slice().to_vec(), true)),
            None => Err(SgnError::Numerical(format!(
                "normal matrix of size {k} is not positive definite even with jitter"
            ))),
        }
    }
}

/// `∇f(z) = (1/m) Σ_i (zᵀA_i z − y_i)(A_i + A_iᵀ) z`.
pub fn gradient(ens: &MeasurementEnsemble, obs: &Observations, z: &[f64]) -> Result<Vec<f64>> {
    Ok(Linearization::new(ens, obs, z)?.gradient())
}

/// Keeps the `s` largest-magnitude entries (lowest index on ties).
pub fn hard_threshold(v: &[f64], s: usize) -> Vec<f64> {
    let mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let keep = top_k_indices(&mags, s.min(v.len()));
    let mut out = vec![0.0; v.len()];
    for j in keep {
        out[j] = v[j];
    }
    out
}

fn threshold_support(x: &[f64], grad: &[f64], mu: f64, s: usize) -> Vec<usize> {
    let v: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - mu * g).collect();
    nonzeros(&hard_threshold(&v, s))
}

/// `supp(H_s(x^k − μ∇f(x^k)))`; empty when the thresholded vector is zero.
pub fn select_support(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    state: &IterateState,
    mu: f64,
    s: usize,
) -> Result<Vec<usize>> {
    if !(mu > 0.0) {
        return Err(SgnError::Argument(format!(
            "step size must be positive (got {mu})"
        )));
    }
    let g = gradient(ens, obs, &state.x)?;
    Ok(threshold_support(&state.x, &g, mu, s))
}

/// Rows `((A_i + A_iᵀ) z)_S / √m`.
pub fn jacobian_apply(
    ens: &MeasurementEnsemble,
    z: &[f64],
    support: &[usize],
) -> Result<DMatrix<f64>> {
    let obs = Observations::from_values(vec![0.0; ens.m()]);
    Ok(Linearization::new(ens, &obs, z)?.jacobian(support))
}

/// GN direction on `support`, embedded in `ℝⁿ`, plus the jitter flag.
pub fn gn_direction(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    state: &IterateState,
    support: &[usize],
    jitter: f64,
) -> Result<(Vec<f64>, bool)> {
    let lin = Linearization::new(ens, obs, &state.x)?;
    let (p_s, jit) = lin.gn_system(&state.x, support, jitter)?;
    let mut p = vec![0.0; ens.n()];
    for (a, &j) in support.iter().enumerate() {
        p[j] = p_s[a];
    }
    Ok((p, jit))
}

fn apply_step(x: &[f64], support: &[usize], p_s: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; x.len()];
    for (a, &j) in support.iter().enumerate() {
        next[j] = x[j] - p_s[a];
    }
    next
}

fn state_from(lin: &Linearization, x: Vec<f64>, k: usize) -> IterateState {
    let support = nonzeros(&x);
    let g = lin.gradient();
    let grad_norm_restricted = support.iter().map(|&j| g[j] * g[j]).sum::<f64>().sqrt();
    IterateState {
        x,
        support,
        k,
        residual_norm: lin.residual_norm(),
        grad_norm_restricted,
    }
}

/// Wraps an iterate into a state (computes residual and restricted gradient norms).
pub fn make_state(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    x: Vec<f64>,
    k: usize,
) -> Result<IterateState> {
    let lin = Linearization::new(ens, obs, &x)?;
    Ok(state_from(&lin, x, k))
}

/// Resolves the absolute step `μ = scale / φ̂²`, `φ̂` from the observations.
pub fn resolve_step(obs: &Observations, x0: &[f64], config: &SolverConfig) -> f64 {
    let mut phi = norm_estimate(&obs.y, config.phi_convention);
    if phi == 0.0 {
        phi = norm(x0);
    }
    config.step_mu.resolve(phi)
}

/// One iteration. Fails with [`SgnError::DegenerateInput`] when the
/// thresholded vector is zero and with [`SgnError::Numerical`] when the
/// normal equations cannot be solved.
pub fn step(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    state: &IterateState,
    config: &SolverConfig,
    mu: f64,
) -> Result<IterateState> {
    let lin = Linearization::new(ens, obs, &state.x)?;
    let support = threshold_support(&state.x, &lin.gradient(), mu, config.s);
    if support.is_empty() {
        return Err(SgnError::DegenerateInput(
            "thresholded gradient step is identically zero".into(),
        ));
    }
    let (p_s, _) = lin.gn_system(&state.x, &support, config.jitter)?;
    let next = apply_step(&state.x, &support, &p_s);
    make_state(ens, obs, next, state.k + 1)
}

/// Runs the refinement from `x0`. `truth`, when given, fills per-iteration
/// relative errors in the trace.
pub fn solve(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    x0: &[f64],
    config: &SolverConfig,
    truth: Option<&[f64]>,
) -> Result<SolveResult> {
    config.validate(ens.n())?;
    check_len("initial point", ens.n(), x0.len())?;
    if let Some(t) = truth {
        check_len("ground truth", ens.n(), t.len())?;
    }
    if x0.iter().all(|v| *v == 0.0) {
        return Err(SgnError::DegenerateInput(
            "zero initial point: the Jacobian vanishes".into(),
        ));
    }
    let mu = resolve_step(obs, x0, config);
    let rel = |x: &[f64]| truth.and_then(|t| rel_error(x, t).ok());

    let mut x = x0.to_vec();
    let mut lin = Linearization::new(ens, obs, &x)?;
    let mut records = vec![TraceRecord {
        k: 0,
        rel_error: rel(&x),
        residual_norm: lin.residual_norm(),
        objective: lin.objective(),
        support: nonzeros(&x),
        step_kind: StepKind::Initial,
        jitter_applied: false,
    }];

    let mut status = SolveStatus::MaxIters;
    for k in 1..=config.max_iters {
        let support = threshold_support(&x, &lin.gradient(), mu, config.s);
        if support.is_empty() {
            status = SolveStatus::Stagnated;
            break;
        }
        let (p_s, jitter_applied) = match lin.gn_system(&x, &support, config.jitter) {
            Ok(v) => v,
            Err(_) => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let next = apply_step(&x, &support, &p_s);
        if next.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalFailure;
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
            support,
            step_kind: StepKind::GaussNewton,
            jitter_applied,
        });
        if !obj.is_finite() {
            status = SolveStatus::NumericalFailure;
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
