//! Measurement ensembles, sparse ground truth and (noisy) observations.
//!
//! Entry `(r, c)` of matrix `i` of a Gaussian ensemble is the standard normal
//! draw number `(i·n + r)·n + c` of the ensemble seed's [`CounterRng`], so a
//! streamed ensemble can regenerate any entry, row or block on demand and a
//! materialized one is just a cache of the same numbers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, SgnError};
use crate::rng::{CounterRng, RngSeed};
use crate::vecops::{nonzeros, norm};

/// Default cap on materialized storage: 4 GiB.
pub const DEFAULT_MEMORY_CAP: u128 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    Materialized,
    Streamed,
}

#[derive(Debug, Clone)]
enum Source {
    Gaussian { seed: RngSeed, rng: CounterRng },
    Explicit,
}

/// The `m` real `n × n` matrices `A_i` of the measurement model `y_i = xᵀA_i x`.
///
/// Matrix indices are zero-based. Cloning is cheap; materialized data is shared.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    n: usize,
    m: usize,
    source: Source,
    data: Option<Arc<[f64]>>,
    /// `A_i + A_iᵀ`, kept next to `data` when materialized.
    sym: Option<Arc<[f64]>>,
}

fn symmetrize(n: usize, data: &[f64]) -> Arc<[f64]> {
    let mut out = vec![0.0; data.len()];
    for (a, b) in data.chunks_exact(n * n).zip(out.chunks_exact_mut(n * n)) {
        for r in 0..n {
            for c in 0..n {
                b[r * n + c] = a[r * n + c] + a[c * n + r];
            }
        }
    }
    Arc::from(out)
}

/// Draws an i.i.d. standard normal ensemble under the default memory cap.
pub fn gen_ensemble(
    n: usize,
    m: usize,
    seed: RngSeed,
    mode: StorageMode,
) -> Result<MeasurementEnsemble> {
    MeasurementEnsemble::gaussian(n, m, seed, mode, DEFAULT_MEMORY_CAP)
}

impl MeasurementEnsemble {
    pub fn gaussian(
        n: usize,
        m: usize,
        seed: RngSeed,
        mode: StorageMode,
        memory_cap: u128,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(SgnError::Argument(format!(
                "ensemble needs n ≥ 1 and m ≥ 1 (got n={n}, m={m})"
            )));
        }
        let rng = seed.counter();
        let data = match mode {
            StorageMode::Streamed => None,
            StorageMode::Materialized => {
                // A_i and A_i + A_iᵀ.
                let needed = (m as u128) * (n as u128) * (n as u128) * 16;
                if needed > memory_cap {
                    return Err(SgnError::Capacity {
                        needed,
                        cap: memory_cap,
                    });
                }
                let len = m * n * n;
                let mut v = Vec::with_capacity(len);
                v.extend((0..len as u64).map(|k| rng.normal(k)));
                Some(Arc::from(v))
            }
        };
        let sym = data.as_deref().map(|d| symmetrize(n, d));
        Ok(Self {
            n,
            m,
            source: Source::Gaussian { seed, rng },
            data,
            sym,
        })
    }

    /// Ensemble from explicit row-major matrices.
    pub fn from_matrices(n: usize, matrices: &[Vec<f64>]) -> Result<Self> {
        if n == 0 || matrices.is_empty() {
            return Err(SgnError::Argument(
                "explicit ensemble needs n ≥ 1 and at least one matrix".into(),
            ));
        }
        let mut data = Vec::with_capacity(matrices.len() * n * n);
        for a in matrices {
            check_len("matrix entries", n * n, a.len())?;
            data.extend_from_slice(a);
        }
        Ok(Self {
            n,
            m: matrices.len(),
            source: Source::Explicit,
            sym: Some(symmetrize(n, &data)),
            data: Some(Arc::from(data)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> Option<RngSeed> {
        match self.source {
            Source::Gaussian { seed, .. } => Some(seed),
            Source::Explicit => None,
        }
    }

    pub fn mode(&self) -> StorageMode {
        if self.data.is_some() {
            StorageMode::Materialized
        } else {
            StorageMode::Streamed
        }
    }

    #[inline]
    fn index(&self, i: usize, r: usize, c: usize) -> usize {
        (i * self.n + r) * self.n + c
    }

    #[inline]
    pub fn entry(&self, i: usize, r: usize, c: usize) -> f64 {
        let k = self.index(i, r, c);
        match (&self.data, &self.source) {
            (Some(d), _) => d[k],
            (None, Source::Gaussian { rng, .. }) => rng.normal(k as u64),
            (None, Source::Explicit) => unreachable!("explicit ensembles are always stored"),
        }
    }

    /// Matrix `i` as a row-major `n·n` vector.
    pub fn matrix(&self, i: usize) -> Vec<f64> {
        assert!(i < self.m, "matrix index {i} out of range (m = {})", self.m);
        match &self.data {
            Some(d) => d[self.index(i, 0, 0)..self.index(i + 1, 0, 0)].to_vec(),
            None => (0..self.n * self.n)
                .map(|k| self.entry(i, k / self.n, k % self.n))
                .collect(),
        }
    }

    fn stored_sym(&self, i: usize) -> Option<&[f64]> {
        self.sym
            .as_ref()
            .map(|d| &d[self.index(i, 0, 0)..self.index(i + 1, 0, 0)])
    }

    fn stored(&self, i: usize) -> Option<&[f64]> {
        self.data
            .as_ref()
            .map(|d| &d[self.index(i, 0, 0)..self.index(i + 1, 0, 0)])
    }

    #[inline]
    pub fn diag(&self, i: usize, j: usize) -> f64 {
        self.entry(i, j, j)
    }

    /// `zᵀA_i z`, where `support` lists (a superset of) the nonzeros of `z`.
    pub fn quad_form(&self, i: usize, z: &[f64], support: &[usize]) -> f64 {
        let n = self.n;
        match self.stored(i) {
            Some(a) => support
                .iter()
                .map(|&r| {
                    let row = &a[r * n..(r + 1) * n];
                    z[r] * support.iter().map(|&c| row[c] * z[c]).sum::<f64>()
                })
                .sum(),
            None => support
                .iter()
                .map(|&r| {
                    z[r] * support
                        .iter()
                        .map(|&c| self.entry(i, r, c) * z[c])
                        .sum::<f64>()
                })
                .sum(),
        }
    }

    /// Writes `(A_i + A_iᵀ) z` into `out`; `support` lists the nonzeros of `z`.
    pub fn sym_apply(&self, i: usize, z: &[f64], support: &[usize], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(out.len(), n);
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.stored_sym(i) {
            Some(b) if 2 * support.len() <= n => {
                for &c in support {
                    let zc = z[c];
                    for (o, v) in out.iter_mut().zip(&b[c * n..(c + 1) * n]) {
                        *o += v * zc;
                    }
                }
            }
            Some(b) => {
                // Upper triangle only: B_rc contributes to both w_r and w_c.
                for r in 0..n {
                    let row = &b[r * n + r + 1..(r + 1) * n];
                    let zr = z[r];
                    let zt = &z[r + 1..];
                    let (head, tail) = out.split_at_mut(r + 1);
                    let mut acc = [0.0; 4];
                    let mut oc = tail.chunks_exact_mut(4);
                    let mut vc = row.chunks_exact(4);
                    let mut zc = zt.chunks_exact(4);
                    for ((o, v), zz) in (&mut oc).zip(&mut vc).zip(&mut zc) {
                        for l in 0..4 {
                            acc[l] += v[l] * zz[l];
                            o[l] += v[l] * zr;
                        }
                    }
                    let mut rest = 0.0;
                    for ((o, v), zz) in oc
                        .into_remainder()
                        .iter_mut()
                        .zip(vc.remainder())
                        .zip(zc.remainder())
                    {
                        rest += v * zz;
                        *o += v * zr;
                    }
                    head[r] += b[r * n + r] * zr + (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest;
                }
            }
            None => {
                for &c in support {
                    let zc = z[c];
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += (self.entry(i, r, c) + self.entry(i, c, r)) * zc;
                    }
                }
            }
        }
    }

    /// The `rows × cols` block of matrix `i`, row-major.
    pub fn block(&self, i: usize, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                out.push(self.entry(i, r, c));
            }
        }
        out
    }

    /// All measurement values `zᵀA_i z` for `i = 0..m`.
    pub fn measure_all(&self, z: &[f64]) -> Vec<f64> {
        let support = nonzeros(z);
        (0..self.m)
            .map(|i| self.quad_form(i, z, &support))
            .collect()
    }
}

/// A sparse ground-truth signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
    s: usize,
}

impl SparseSignal {
    /// Wraps a dense vector that has at most `s` nonzeros.
    pub fn from_dense(values: Vec<f64>, s: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SgnError::Argument("signal has non-finite entries".into()));
        }
        let support = nonzeros(&values);
        if support.len() > s {
            return Err(SgnError::Argument(format!(
                "signal has {} nonzeros, more than s = {s}",
                support.len()
            )));
        }
        Ok(Self { values, support, s })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Smallest nonzero magnitude, `None` for the zero signal.
    pub fn x_min(&self) -> Option<f64> {
        self.support
            .iter()
            .map(|&j| self.values[j].abs())
            .min_by(f64::total_cmp)
    }
}

/// Draws an `s`-sparse signal: uniform random support, i.i.d. N(0,1) values.
pub fn gen_signal(n: usize, s: usize, seed: RngSeed) -> Result<SparseSignal> {
    if s == 0 || s > n {
        return Err(SgnError::Argument(format!(
            "sparsity must satisfy 1 ≤ s ≤ n (got s={s}, n={n})"
        )));
    }
    let mut rng = seed.stream();
    // Partial Fisher–Yates: the first s slots are a uniform s-subset.
    let mut idx: Vec<usize> = (0..n).collect();
    for t in 0..s {
        let j = t + rng.below((n - t) as u64) as usize;
        idx.swap(t, j);
    }
    let mut values = vec![0.0; n];
    for &j in &idx[..s] {
        let mut v = rng.normal();
        while v == 0.0 {
            v = rng.normal();
        }
        values[j] = v;
    }
    SparseSignal::from_dense(values, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Gaussian,
    Laplace,
}

/// Centered additive noise; `sigma` is the standard deviation for both families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SgnError::Argument(format!(
                "noise sigma must be finite and ≥ 0 (got {sigma})"
            )));
        }
        if kind == NoiseKind::None && sigma != 0.0 {
            return Err(SgnError::Argument(
                "noise kind `none` requires sigma = 0".into(),
            ));
        }
        Ok(Self { kind, sigma })
    }

    pub const fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub y: Vec<f64>,
    pub noise: NoiseSpec,
    pub clean_y: Option<Vec<f64>>,
}

impl Observations {
    /// Observations with no known ground truth.
    pub fn from_values(y: Vec<f64>) -> Self {
        Self {
            y,
            noise: NoiseSpec::none(),
            clean_y: None,
        }
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }
}

/// `y_i = xᵀA_i x + ε_i` with `ε_i` drawn from `noise` under `seed`.
pub fn measure(
    ens: &MeasurementEnsemble,
    x: &SparseSignal,
    noise: NoiseSpec,
    seed: RngSeed,
) -> Result<Observations> {
    check_len("signal length", ens.n(), x.n())?;
    let clean: Vec<f64> = (0..ens.m())
        .map(|i| ens.quad_form(i, x.values(), x.support()))
        .collect();
    let y = match noise.kind {
        NoiseKind::None => clean.clone(),
        NoiseKind::Gaussian => {
            let mut rng = seed.stream();
            clean
                .iter()
                .map(|c| c + noise.sigma * rng.normal())
                .collect()
        }
        NoiseKind::Laplace => {
            let mut rng = seed.stream();
            clean.iter().map(|c| c + rng.laplace(noise.sigma)).collect()
        }
    };
    Ok(Observations {
        y,
        noise,
        clean_y: Some(clean),
    })
}

/// Least-squares objective `(1/2m) Σ (zᵀA_i z − y_i)²`.
pub fn objective(ens: &MeasurementEnsemble, obs: &Observations, z: &[f64]) -> Result<f64> {
    check_len("observations", ens.m(), obs.m())?;
    check_len("iterate length", ens.n(), z.len())?;
    let support = nonzeros(z);
    let m = ens.m();
    let sum: f64 = (0..m)
        .map(|i| {
            let r = ens.quad_form(i, z, &support) - obs.y[i];
            r * r
        })
        .sum();
    Ok(sum / (2.0 * m as f64))
}
