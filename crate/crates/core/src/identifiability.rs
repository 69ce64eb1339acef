//! Empirical probes of injectivity of `M(x) = (xᵀA_1x, …, xᵀA_mx)` on sparse vectors.
//!
//! For `s = 1` injectivity is decidable exactly: `M(a e_j) = a² d_j` with
//! `d_j = (a¹_jj, …, a^m_jj)`, so two 1-sparse vectors collide (other than
//! `x = ±z`) iff some `d_j` is zero or two diagonals are positively
//! proportional. For larger `s`, [`collision_search`] looks for a pair
//! `(x, z)`, `x ≠ ±z`, with `M(x) = M(z)` by damped Gauss-Newton from random
//! starts. Not finding one is evidence, never a certificate.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::MeasurementEnsemble;
use crate::error::{Result, SgnError};
use crate::metrics::dist;
use crate::rng::RngSeed;
use crate::vecops::{nonzeros, norm};

/// Tolerance on the normalized collinearity residual of two diagonals.
pub const COLLINEARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum S1Violation {
    /// `d_j = 0`: `e_j` and `0` collide.
    ZeroDiagonal { index: usize },
    /// `d_k = ratio · d_j` with `ratio > 0`: `e_j` and `e_k/√ratio` collide.
    Proportional { j: usize, k: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S1Certificate {
    pub injective: bool,
    pub n: usize,
    pub m: usize,
    pub violation: Option<S1Violation>,
    /// Colliding pair for a violation.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Exact injectivity test on 1-sparse vectors.
pub fn s1_injectivity_check(ens: &MeasurementEnsemble) -> S1Certificate {
    let (n, m) = (ens.n(), ens.m());
    let diags: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| ens.diag(i, j)).collect())
        .collect();
    let norms: Vec<f64> = diags.iter().map(|d| norm(d)).collect();

    let unit = |j: usize| -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        e
    };
    let violated = |v: S1Violation, x: Vec<f64>, z: Vec<f64>| S1Certificate {
        injective: false,
        n,
        m,
        violation: Some(v),
        witness: Some((x, z)),
    };

    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return violated(
            S1Violation::ZeroDiagonal { index: j },
            unit(j),
            vec![0.0; n],
        );
    }
    let hats: Vec<Vec<f64>> = diags
        .iter()
        .zip(&norms)
        .map(|(d, nr)| d.iter().map(|v| v / nr).collect())
        .collect();
    for j in 0..n {
        for k in (j + 1)..n {
            let c: f64 = hats[j].iter().zip(&hats[k]).map(|(a, b)| a * b).sum();
            if c <= 0.0 {
                continue;
            }
            let off: f64 = hats[j]
                .iter()
                .zip(&hats[k])
                .map(|(a, b)| (a - c * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if off <= COLLINEARITY_TOL {
                let ratio = norms[k] / norms[j];
                let mut z = vec![0.0; n];
                z[k] = 1.0 / ratio.sqrt();
                return violated(S1Violation::Proportional { j, k, ratio }, unit(j), z);
            }
        }
    }
    S1Certificate {
        injective: true,
        n,
        m,
        violation: None,
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionOptions {
    /// Largest `‖M(x) − M(z)‖` (at `‖(x, z)‖ = 1`) accepted as a collision.
    pub collision_tol: f64,
    /// Smallest `dist(x, z)` accepted; rejects `x ≈ ±z`.
    pub sep_tol: f64,
    pub max_inner_iters: usize,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        Self {
            collision_tol: 1e-8,
            sep_tol: 1e-3,
            max_inner_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub found: bool,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub residual: f64,
    pub separation: f64,
    pub supports: (Vec<usize>, Vec<usize>),
    pub attempts: usize,
    pub budget: usize,
}

/// `‖M(x) − M(z)‖`, recomputed from the ensemble.
pub fn collision_residual(ens: &MeasurementEnsemble, x: &[f64], z: &[f64]) -> f64 {
    let (sx, sz) = (nonzeros(x), nonzeros(z));
    (0..ens.m())
        .map(|i| {
            let d = ens.quad_form(i, x, &sx) - ens.quad_form(i, z, &sz);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn residuals(
    ens: &MeasurementEnsemble,
    vars: &[f64],
    sup_x: &[usize],
    sup_z: &[usize],
    with_jacobian: bool,
) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let n = ens.n();
    let m = ens.m();
    let (px, pz) = (sup_x.len(), sup_z.len());
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    for (a, &j) in sup_x.iter().enumerate() {
        x[j] = vars[a];
    }
    for (b, &j) in sup_z.iter().enumerate() {
        z[j] = vars[px + b];
    }
    let mut r = DVector::zeros(m + 1);
    let mut jac = with_jacobian.then(|| DMatrix::zeros(m + 1, px + pz));
    let (mut wx, mut wz) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..m {
        ens.sym_apply(i, &x, sup_x, &mut wx);
        ens.sym_apply(i, &z, sup_z, &mut wz);
        let qx = 0.5 * sup_x.iter().map(|&j| x[j] * wx[j]).sum::<f64>();
        let qz = 0.5 * sup_z.iter().map(|&j| z[j] * wz[j]).sum::<f64>();
        r[i] = qx - qz;
        if let Some(jm) = jac.as_mut() {
            for (a, &j) in sup_x.iter().enumerate() {
                jm[(i, a)] = wx[j];
            }
            for (b, &j) in sup_z.iter().enumerate() {
                jm[(i, px + b)] = -wz[j];
            }
        }
    }
    // Sphere constraint ‖(x, z)‖² = 1 keeps the search away from the origin.
    let sq: f64 = vars.iter().map(|v| v * v).sum();
    r[m] = sq - 1.0;
    if let Some(jm) = jac.as_mut() {
        for (a, v) in vars.iter().enumerate() {
            jm[(m, a)] = 2.0 * v;
        }
    }
    (r, jac)
}

fn normalize(v: &mut [f64]) {
    let nr = norm(v);
    if nr > 0.0 {
        v.iter_mut().for_each(|e| *e /= nr);
    }
}

/// Levenberg–Marquardt on `M(x) − M(z)` over `supp(x) ⊆ sup_x`, `supp(z) ⊆ sup_z`,
/// from the given start. Returns `(x, z)` scaled to `‖(x, z)‖ = 1`.
pub fn refine_pair(
    ens: &MeasurementEnsemble,
    sup_x: &[usize],
    sup_z: &[usize],
    x_start: &[f64],
    z_start: &[f64],
    opts: &CollisionOptions,
) -> (Vec<f64>, Vec<f64>) {
    let n = ens.n();
    let mut vars: Vec<f64> = sup_x
        .iter()
        .map(|&j| x_start[j])
        .chain(sup_z.iter().map(|&j| z_start[j]))
        .collect();
    normalize(&mut vars);
    let p = vars.len();
    let mut lambda = 1e-3;
    let (mut r, mut jac) = residuals(ens, &vars, sup_x, sup_z, true);
    let mut cost = r.norm_squared();
    let target = (opts.collision_tol * 1e-3).powi(2);
    for _ in 0..opts.max_inner_iters {
        if cost <= target {
            break;
        }
        let j = jac.as_ref().expect("jacobian requested");
        let jt = j.transpose();
        let normal = &jt * j;
        let grad = &jt * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = normal.clone();
            let scale = normal.diagonal().max().max(1e-12);
            for a in 0..p {
                damped[(a, a)] += lambda * scale;
            }
            let Some(ch) = Cholesky::new(damped) else {
                lambda *= 4.0;
                continue;
            };
            let delta = ch.solve(&(-&grad));
            let mut trial: Vec<f64> = vars.iter().zip(delta.iter()).map(|(v, d)| v + d).collect();
            normalize(&mut trial);
            let (tr, _) = residuals(ens, &trial, sup_x, sup_z, false);
            let tcost = tr.norm_squared();
            if tcost < cost {
                vars = trial;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
        let (nr, nj) = residuals(ens, &vars, sup_x, sup_z, true);
        r = nr;
        jac = nj;
        cost = r.norm_squared();
    }
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    for (a, &j) in sup_x.iter().enumerate() {
        x[j] = vars[a];
    }
    for (b, &j) in sup_z.iter().enumerate() {
        z[j] = vars[sup_x.len() + b];
    }
    (x, z)
}

struct Candidate {
    x: Vec<f64>,
    z: Vec<f64>,
    residual: f64,
    separation: f64,
    supports: (Vec<usize>, Vec<usize>),
}

fn check_support(name: &str, sup: &[usize], s: usize, n: usize) -> Result<Vec<usize>> {
    if sup.len() > s {
        return Err(SgnError::Argument(format!(
            "support {name} has {} indices, more than s = {s}",
            sup.len()
        )));
    }
    if sup.is_empty() {
        return Err(SgnError::Argument(format!("support {name} is empty")));
    }
    let mut v = sup.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.len() != sup.len() || v.iter().any(|&j| j >= n) {
        return Err(SgnError::Argument(format!(
            "support {name} must hold distinct indices below n = {n}"
        )));
    }
    Ok(v)
}

fn run_searches<F>(
    ens: &MeasurementEnsemble,
    seed: RngSeed,
    budget: usize,
    opts: &CollisionOptions,
    mut supports_for: F,
) -> CollisionReport
where
    F: FnMut(&mut crate::rng::SeqRng) -> (Vec<usize>, Vec<usize>),
{
    let n = ens.n();
    let mut best_valid: Option<Candidate> = None;
    let mut best_any: Option<Candidate> = None;
    let mut attempts = 0;
    for t in 0..budget {
        attempts = t + 1;
        let mut rng = seed.child(t as u64).stream();
        let (sx, sz) = supports_for(&mut rng);
        let mut xs = vec![0.0; n];
        let mut zs = vec![0.0; n];
        sx.iter().for_each(|&j| xs[j] = rng.normal());
        sz.iter().for_each(|&j| zs[j] = rng.normal());
        let (x, z) = refine_pair(ens, &sx, &sz, &xs, &zs, opts);
        let cand = Candidate {
            residual: collision_residual(ens, &x, &z),
            separation: dist(&x, &z).expect("equal lengths"),
            x,
            z,
            supports: (sx, sz),
        };
        let valid = cand.separation >= opts.sep_tol;
        let better =
            |cur: &Option<Candidate>| cur.as_ref().is_none_or(|b| cand.residual < b.residual);
        if valid {
            if better(&best_valid) {
                best_valid = Some(cand);
            }
            if best_valid
                .as_ref()
                .is_some_and(|b| b.residual <= opts.collision_tol)
            {
                break;
            }
        } else if better(&best_any) {
            best_any = Some(cand);
        }
    }
    let found = best_valid
        .as_ref()
        .is_some_and(|b| b.residual <= opts.collision_tol);
    let c = best_valid.or(best_any);
    match c {
        Some(c) => CollisionReport {
            found,
            x: c.x,
            z: c.z,
            residual: c.residual,
            separation: c.separation,
            supports: c.supports,
            attempts,
            budget,
        },
        None => CollisionReport {
            found: false,
            x: vec![0.0; n],
            z: vec![0.0; n],
            residual: f64::INFINITY,
            separation: 0.0,
            supports: (Vec::new(), Vec::new()),
            attempts,
            budget,
        },
    }
}

/// Collision search with fixed supports `supp(x) ⊆ I`, `supp(z) ⊆ J`.
pub fn collision_search(
    ens: &MeasurementEnsemble,
    s: usize,
    sup_x: &[usize],
    sup_z: &[usize],
    seed: RngSeed,
    budget: usize,
    opts: &CollisionOptions,
) -> Result<CollisionReport> {
    let sx = check_support("I", sup_x, s, ens.n())?;
    let sz = check_support("J", sup_z, s, ens.n())?;
    Ok(run_searches(ens, seed, budget, opts, |_| {
        (sx.clone(), sz.clone())
    }))
}

/// Collision search drawing a fresh uniform pair of `s`-subsets for every start.
pub fn collision_scan(
    ens: &MeasurementEnsemble,
    s: usize,
    seed: RngSeed,
    budget: usize,
    opts: &CollisionOptions,
) -> Result<CollisionReport> {
    let n = ens.n();
    if s == 0 || s > n {
        return Err(SgnError::Argument(format!(
            "sparsity must satisfy 1 ≤ s ≤ n (got s={s}, n={n})"
        )));
    }
    let draw = move |rng: &mut crate::rng::SeqRng| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for t in 0..s {
            let j = t + rng.below((n - t) as u64) as usize;
            idx.swap(t, j);
        }
        let mut v = idx[..s].to_vec();
        v.sort_unstable();
        v
    };
    Ok(run_searches(ens, seed, budget, opts, |rng| {
        let a = draw(rng);
        let b = draw(rng);
        (a, b)
    }))
}
