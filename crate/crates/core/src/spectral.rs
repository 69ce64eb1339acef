//! Support-restricted spectral initialization.
//!
//! 1. marginals `Y_jj = (1/m) Σ_i y_i a^i_jj`;
//! 2. `Ŝ` = indices of the `s` largest marginals;
//! 3. `v` = leading left singular vector of `Y_Ŝ = (1/m) Σ_i y_i [A_i]_{Ŝ,Ŝ}`;
//! 4. `φ` = norm estimate from `y`;
//! 5. `x⁰ = φ v`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{MeasurementEnsemble, Observations};
use crate::error::{check_len, Result, SgnError};
use crate::vecops::top_k_indices;

/// Normalization inside the norm estimate `φ = (c · Σ y_i²)^{1/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiConvention {
    /// `c = 1/m`; unbiased for `‖x‖⁴` under Gaussian ensembles.
    #[default]
    Mean,
    /// `c = 1/(2m)`.
    HalfMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Stop when `‖v_{t+1} − v_t‖` falls to this value.
    pub tol: f64,
    /// Iteration cap; `None` means `10·k + 100` for a `k × k` matrix.
    pub max_iters: Option<usize>,
    /// On hitting the cap, take the vector from a dense SVD instead of failing.
    #[serde(default)]
    pub svd_fallback: bool,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: None,
            svd_fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitOptions {
    pub phi_convention: PhiConvention,
    pub power: PowerOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitResult {
    pub x0: Vec<f64>,
    pub support_hat: Vec<usize>,
    pub phi: f64,
    pub marginals: Vec<f64>,
    pub power_iters_used: usize,
}

pub fn marginals(ens: &MeasurementEnsemble, obs: &Observations) -> Result<Vec<f64>> {
    check_len("observations", ens.m(), obs.m())?;
    let (n, m) = (ens.n(), ens.m());
    let mut out = vec![0.0; n];
    for (i, &yi) in obs.y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += yi * ens.diag(i, j);
        }
    }
    let inv = 1.0 / m as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(out)
}

/// Indices of the `s` largest marginal values (signed), lowest index on ties.
pub fn select_support(marginals: &[f64], s: usize) -> Result<Vec<usize>> {
    if s == 0 || s > marginals.len() {
        return Err(SgnError::Argument(format!(
            "support size must satisfy 1 ≤ s ≤ n (got s={s}, n={})",
            marginals.len()
        )));
    }
    Ok(top_k_indices(marginals, s))
}

/// `Y_S = (1/m) Σ_i y_i [A_i]_{S,S}`.
pub fn restricted_matrix(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    support: &[usize],
) -> Result<DMatrix<f64>> {
    check_len("observations", ens.m(), obs.m())?;
    let k = support.len();
    let mut y_s = DMatrix::<f64>::zeros(k, k);
    for (i, &yi) in obs.y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (a, &r) in support.iter().enumerate() {
            for (b, &c) in support.iter().enumerate() {
                y_s[(a, b)] += yi * ens.entry(i, r, c);
            }
        }
    }
    Ok(y_s / ens.m() as f64)
}

/// Leading left singular vector of a square matrix by power iteration on `M Mᵀ`.
///
/// Starts from the normalized all-ones vector. The sign is fixed so that the
/// largest-magnitude entry (lowest index on ties) is positive. Returns the
/// vector and the number of iterations used.
pub fn leading_left_singular_vector(
    mat: &DMatrix<f64>,
    opts: &PowerOptions,
) -> Result<(DVector<f64>, usize)> {
    let k = mat.nrows();
    if k == 0 {
        return Err(SgnError::Argument("empty matrix".into()));
    }
    let cap = opts.max_iters.unwrap_or(10 * k + 100);
    let mt = mat.transpose();
    let mut v = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut iters = 0;
    let mut converged = false;
    while iters < cap {
        iters += 1;
        let w = mat * (&mt * &v);
        let wn = w.norm();
        if wn == 0.0 {
            // Zero matrix: every unit vector is singular; keep the start.
            converged = true;
            break;
        }
        let next = w / wn;
        let change = (&next - &v).norm();
        v = next;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && opts.svd_fallback {
        let svd = mat.clone().svd(true, false);
        let mut best = 0;
        for (j, sv) in svd.singular_values.iter().enumerate() {
            if *sv > svd.singular_values[best] {
                best = j;
            }
        }
        if let Some(u) = svd.u {
            let mut v = u.column(best).into_owned();
            fix_sign(v.as_mut_slice());
            return Ok((v, iters));
        }
    }
    if !converged {
        let w = mat * (&mt * &v);
        let lambda = v.dot(&w);
        let residual = (w - &v * lambda).norm();
        return Err(SgnError::NoConvergence {
            what: "power iteration",
            iterations: iters,
            residual,
        });
    }
    fix_sign(v.as_mut_slice());
    Ok((v, iters))
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Unit vector in `ℝⁿ`, supported on `support`, from the leading left singular
/// vector of `Y_S`.
pub fn restricted_spectral(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    support: &[usize],
    opts: &PowerOptions,
) -> Result<(Vec<f64>, usize)> {
    if support.is_empty() {
        return Err(SgnError::Argument("support must be nonempty".into()));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= ens.n()) {
        return Err(SgnError::Argument(format!(
            "support index {bad} out of range (n = {})",
            ens.n()
        )));
    }
    let y_s = restricted_matrix(ens, obs, support)?;
    let (u, iters) = leading_left_singular_vector(&y_s, opts)?;
    let mut v = vec![0.0; ens.n()];
    for (a, &j) in support.iter().enumerate() {
        v[j] = u[a];
    }
    Ok((v, iters))
}

pub fn norm_estimate(y: &[f64], convention: PhiConvention) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let sq: f64 = y.iter().map(|v| v * v).sum();
    let denom = match convention {
        PhiConvention::Mean => y.len() as f64,
        PhiConvention::HalfMean => 2.0 * y.len() as f64,
    };
    (sq / denom).powf(0.25)
}

/// Spectral estimate on a given support: `φ · v` with `v` from [`restricted_spectral`].
pub fn spectral_on_support(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    support: Vec<usize>,
    marginals: Vec<f64>,
    opts: &InitOptions,
) -> Result<InitResult> {
    let (v, iters) = restricted_spectral(ens, obs, &support, &opts.power)?;
    let phi = norm_estimate(&obs.y, opts.phi_convention);
    Ok(InitResult {
        x0: v.iter().map(|e| phi * e).collect(),
        support_hat: support,
        phi,
        marginals,
        power_iters_used: iters,
    })
}

/// The complete initializer.
pub fn initialize(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    s: usize,
    opts: &InitOptions,
) -> Result<InitResult> {
    let marg = marginals(ens, obs)?;
    let support = select_support(&marg, s)?;
    spectral_on_support(ens, obs, support, marg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gen_ensemble, gen_signal, measure, NoiseSpec, StorageMode};
    use crate::rng::RngSeed;

    fn explicit(n: usize, mats: &[Vec<f64>]) -> MeasurementEnsemble {
        MeasurementEnsemble::from_matrices(n, mats).unwrap()
    }

    #[test]
    fn marginals_hand_example() {
        let e = explicit(2, &[vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, -1.0]]);
        let obs = Observations::from_values(vec![1.0, 1.0]);
        assert_eq!(marginals(&e, &obs).unwrap(), vec![1.0, 0.0]);
        let zero = Observations::from_values(vec![0.0, 0.0]);
        assert_eq!(marginals(&e, &zero).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn marginals_match_double_loop() {
        let e = gen_ensemble(9, 13, RngSeed::new(4, 4), StorageMode::Streamed).unwrap();
        let mut rng = RngSeed::new(4, 5).stream();
        let y: Vec<f64> = (0..13).map(|_| rng.normal()).collect();
        let got = marginals(&e, &Observations::from_values(y.clone())).unwrap();
        for j in 0..9 {
            let mut acc = 0.0;
            for (i, yi) in y.iter().enumerate() {
                acc += yi * e.matrix(i)[j * 9 + j];
            }
            assert!((got[j] - acc / 13.0).abs() < 1e-12);
        }
    }

    #[test]
    fn select_support_rules() {
        assert_eq!(select_support(&[0.9, 0.1, 0.5], 2).unwrap(), vec![0, 2]);
        assert_eq!(select_support(&[0.3, 0.3, 0.3], 2).unwrap(), vec![0, 1]);
        assert_eq!(select_support(&[3.0, -1.0, 2.0], 3).unwrap(), vec![0, 1, 2]);
        // Signed, not magnitude: a large negative marginal is not selected.
        assert_eq!(select_support(&[-5.0, 0.1, 0.2], 1).unwrap(), vec![2]);
        assert!(select_support(&[1.0], 2).is_err());
    }

    #[test]
    fn singular_vector_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let (v, _) = leading_left_singular_vector(&m, &PowerOptions::default()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9);
    }

    #[test]
    fn singular_vector_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let (v, _) = leading_left_singular_vector(&m, &PowerOptions::default()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn singular_vector_sign_convention() {
        let m = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        let (v, _) = leading_left_singular_vector(&m, &PowerOptions::default()).unwrap();
        assert!(v[0] > 0.0);
    }

    #[test]
    fn power_iteration_reports_nonconvergence() {
        // Equal singular values along a rotating pair never settle at tol 0.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.999_999]);
        let mut opts = PowerOptions {
            tol: 0.0,
            max_iters: Some(5),
            svd_fallback: false,
        };
        let err = leading_left_singular_vector(&m, &opts).unwrap_err();
        match err {
            SgnError::NoConvergence {
                iterations,
                residual,
                ..
            } => {
                assert_eq!(iterations, 5);
                assert!(residual.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
        opts.svd_fallback = true;
        let (v, iters) = leading_left_singular_vector(&m, &opts).unwrap();
        assert_eq!(iters, 5);
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn norm_estimate_examples() {
        assert_eq!(norm_estimate(&[1.0, 1.0], PhiConvention::Mean), 1.0);
        assert_eq!(norm_estimate(&[0.0, 0.0], PhiConvention::Mean), 0.0);
        let half = norm_estimate(&[1.0, 1.0], PhiConvention::HalfMean);
        assert!((half - 0.5f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn initialize_invariants() {
        let e = gen_ensemble(40, 120, RngSeed::new(8, 0), StorageMode::Materialized).unwrap();
        let x = gen_signal(40, 4, RngSeed::new(8, 1)).unwrap();
        let obs = measure(&e, &x, NoiseSpec::none(), RngSeed::new(8, 2)).unwrap();
        let init = initialize(&e, &obs, 4, &InitOptions::default()).unwrap();
        assert_eq!(init.support_hat.len(), 4);
        for (j, v) in init.x0.iter().enumerate() {
            if *v != 0.0 {
                assert!(init.support_hat.contains(&j));
            }
        }
        let nrm = crate::vecops::norm(&init.x0);
        assert!((nrm - init.phi).abs() <= 1e-12 * init.phi);
    }

    #[test]
    fn full_support_is_unrestricted_spectral() {
        let e = gen_ensemble(6, 30, RngSeed::new(2, 0), StorageMode::Materialized).unwrap();
        let x = gen_signal(6, 6, RngSeed::new(2, 1)).unwrap();
        let obs = measure(&e, &x, NoiseSpec::none(), RngSeed::new(2, 2)).unwrap();
        let init = initialize(&e, &obs, 6, &InitOptions::default()).unwrap();
        assert_eq!(init.support_hat, (0..6).collect::<Vec<_>>());
        // Compare with the dense SVD of the full Y.
        let y = restricted_matrix(&e, &obs, &init.support_hat).unwrap();
        let svd = y.svd(true, false);
        let idx = svd.singular_values.imax();
        let u = svd.u.unwrap().column(idx).into_owned();
        let v = DVector::from_column_slice(&init.x0) / init.phi;
        assert!(u.dot(&v).abs() > 1.0 - 1e-10);
    }
}
