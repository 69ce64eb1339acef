use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sgn_core::refine::{
    gn_direction, gradient, hard_threshold, jacobian_apply, make_state, select_support, step,
};
use sgn_core::rng::{RngSeed, SeqRng};
use sgn_core::{
    gen_ensemble, gen_signal, measure, objective, rel_error, solve, MeasurementEnsemble, NoiseSpec,
    Observations, SolverConfig, StorageMode,
};

fn instance(
    n: usize,
    m: usize,
    s: usize,
    seed: u64,
) -> (MeasurementEnsemble, Vec<f64>, Observations) {
    let base = RngSeed::new(seed, 0);
    let ens = gen_ensemble(n, m, base.child(0), StorageMode::Materialized).unwrap();
    let x = gen_signal(n, s, base.child(1)).unwrap();
    let obs = measure(&ens, &x, NoiseSpec::none(), base.child(2)).unwrap();
    (ens, x.values().to_vec(), obs)
}

fn perturb(x: &[f64], rel: f64, rng: &mut SeqRng) -> Vec<f64> {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    let mut d = vec![0.0; x.len()];
    for &j in &support {
        d[j] = rng.normal();
    }
    let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter()
        .zip(&d)
        .map(|(a, b)| a + rel * xn * b / dn)
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    for (n, m, s) in [(10, 20, 3), (50, 100, 5)] {
        for t in 0..10 {
            let (ens, _, obs) = instance(n, m, s, 100 + t);
            let mut rng = RngSeed::new(t, 9).stream();
            let mut z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let target = 0.5 + 1.5 * rng.uniform();
            z.iter_mut().for_each(|v| *v *= target / zn);
            let g = gradient(&ens, &obs, &z).unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..n)
                .map(|j| {
                    let mut p = z.clone();
                    let mut q = z.clone();
                    p[j] += h;
                    q[j] -= h;
                    (objective(&ens, &obs, &p).unwrap() - objective(&ens, &obs, &q).unwrap())
                        / (2.0 * h)
                })
                .collect();
            let err = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(
                err <= 1e-6 * scale,
                "(n={n}, m={m}) relative error {}",
                err / scale
            );
        }
    }
}

/// `argmin ‖F(z) + J(z)(w − z)‖` over `supp(w) ⊆ S`, by dense QR; returns `z − w`.
fn qr_direction(
    ens: &MeasurementEnsemble,
    obs: &Observations,
    z: &[f64],
    support: &[usize],
) -> Vec<f64> {
    let (n, m) = (ens.n(), ens.m());
    let sm = (m as f64).sqrt();
    let mut jfull = DMatrix::<f64>::zeros(m, n);
    let mut f = DVector::<f64>::zeros(m);
    for i in 0..m {
        let a = ens.matrix(i);
        let mut q = 0.0;
        for r in 0..n {
            for c in 0..n {
                q += z[r] * a[r * n + c] * z[c];
                jfull[(i, r)] += (a[r * n + c] + a[c * n + r]) * z[c] / sm;
            }
        }
        f[i] = (q - obs.y[i]) / sm;
    }
    // F + J(w − z) with w off S equal to zero: minimize ‖J_S w_S − (J z − F)‖.
    let zv = DVector::from_column_slice(z);
    let b = &jfull * &zv - &f;
    let js = DMatrix::from_fn(m, support.len(), |i, a| jfull[(i, support[a])]);
    let qr = js.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let w_s = qr.r().solve_upper_triangular(&qtb).unwrap();
    let mut p = vec![0.0; n];
    for (a, &j) in support.iter().enumerate() {
        p[j] = z[j] - w_s[a];
    }
    p
}

#[test]
fn gn_direction_matches_dense_least_squares() {
    for t in 0..50u64 {
        let mut rng = RngSeed::new(t, 77).stream();
        let n = 8 + rng.below(13) as usize;
        let s = 2 + rng.below(5) as usize;
        let m = (3 * s + rng.below(41 - 3 * s as u64) as usize).min(40);
        let (ens, x, obs) = instance(n, m, s, 500 + t);
        let z = perturb(&x, 0.3, &mut rng);
        // Shift one support index so that the cross term is exercised.
        let mut support: Vec<usize> = (0..n).filter(|&j| z[j] != 0.0).collect();
        let outside = (0..n).find(|j| !support.contains(j)).unwrap();
        support[0] = outside;
        support.sort_unstable();
        let state = make_state(&ens, &obs, z.clone(), 0).unwrap();
        let (p, jit) = gn_direction(&ens, &obs, &state, &support, 1e-10).unwrap();
        assert!(!jit);
        let oracle = qr_direction(&ens, &obs, &z, &support);
        let scale = oracle.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let err = p
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8 * scale, "instance {t}: err {err}");
    }
}

#[test]
fn one_step_contracts_from_nearby_points() {
    let (n, m, s) = (100, 200, 5);
    let mut better = 0;
    for t in 0..100u64 {
        let (ens, x, obs) = instance(n, m, s, 900 + t);
        let mut rng = RngSeed::new(t, 5).stream();
        let z = perturb(&x, 0.01, &mut rng);
        let cfg = SolverConfig::new(s);
        let state = make_state(&ens, &obs, z.clone(), 0).unwrap();
        let mu = cfg
            .step_mu
            .resolve(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let next = step(&ens, &obs, &state, &cfg, mu).unwrap();
        if rel_error(&next.x, &x).unwrap() < rel_error(&z, &x).unwrap() {
            better += 1;
        }
    }
    assert!(better >= 99, "{better}/100 contracted");
}

#[test]
fn support_is_captured_and_kept() {
    let (n, m, s) = (100, 200, 5);
    for t in 0..20u64 {
        let (ens, x, obs) = instance(n, m, s, 1300 + t);
        let truth: Vec<usize> = (0..n).filter(|&j| x[j] != 0.0).collect();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_min = truth.iter().map(|&j| x[j].abs()).fold(f64::MAX, f64::min);
        let mut rng = RngSeed::new(t, 6).stream();
        let z = perturb(&x, 0.5 * x_min / xn, &mut rng);
        let res = solve(&ens, &obs, &z, &SolverConfig::new(s), Some(&x)).unwrap();
        for r in &res.trace.records[1..] {
            assert_eq!(r.support, truth, "instance {t}, iteration {}", r.k);
        }
    }
}

fn gram_band_rate(m: usize, trials: u64) -> (usize, Vec<f64>) {
    let (n, s) = (100, 5);
    let mut ok = 0;
    let mut mean_eig = vec![0.0; s];
    for t in 0..trials {
        let (ens, _, _) = instance(n, m, s, 1500 + t);
        let z = gen_signal(n, s, RngSeed::new(t, 8)).unwrap();
        let zv: Vec<f64> = z.values().iter().map(|v| v / z.norm()).collect();
        let j = jacobian_apply(&ens, &zv, z.support()).unwrap();
        let gram = j.transpose() * &j;
        let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (acc, e) in mean_eig.iter_mut().zip(&eig) {
            *acc += e / trials as f64;
        }
        if eig.iter().all(|&e| (1.5..=4.5).contains(&e)) {
            ok += 1;
        }
    }
    (ok, mean_eig)
}

#[test]
fn gram_band_of_restricted_jacobian() {
    // E[JᵀJ] = 2I + 2zzᵀ: eigenvalues 2 (s − 1 times) and 4.
    // At m = 200 the smallest eigenvalue leaves [1.5, 4.5] in roughly a
    // third of draws (an independent Monte-Carlo check gives 0.66), so the
    // band is asserted at that rate there and at 95% once m = 800.
    let (ok, mean) = gram_band_rate(200, 100);
    assert!(ok >= 55, "{ok}/100 inside the band at m = 200");
    assert!((mean[4] - 4.0).abs() < 0.4, "top eigenvalue {mean:?}");
    assert!(mean[..4].iter().all(|e| (e - 2.0).abs() < 0.5), "{mean:?}");
    let (ok, _) = gram_band_rate(800, 100);
    assert!(ok >= 95, "{ok}/100 inside the band at m = 800");
}

#[test]
fn noisy_error_floor_shrinks_with_m() {
    let (n, s, sigma) = (100, 5, 0.5);
    let mut means = Vec::new();
    for m in [400, 800] {
        let mut total = 0.0;
        for t in 0..30u64 {
            let base = RngSeed::new(2000 + t, m as u64);
            let ens = gen_ensemble(n, m, base.child(0), StorageMode::Materialized).unwrap();
            let x = gen_signal(n, s, base.child(1)).unwrap();
            let obs =
                measure(&ens, &x, NoiseSpec::gaussian(sigma).unwrap(), base.child(2)).unwrap();
            let mut rng = base.child(3).stream();
            let z = perturb(x.values(), 0.01, &mut rng);
            let res = solve(&ens, &obs, &z, &SolverConfig::new(s), Some(x.values())).unwrap();
            total += rel_error(&res.x, x.values()).unwrap();
        }
        means.push(total / 30.0);
    }
    // Doubling m divides the floor by about √2.
    let ratio = means[1] / means[0];
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!(
        (ratio - target).abs() <= 0.25,
        "ratio {ratio}, means {means:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hard_threshold_keeps_largest(v in proptest::collection::vec(-10.0f64..10.0, 1..30), k in 1usize..30) {
        let k = k.min(v.len());
        let h = hard_threshold(&v, k);
        let kept: Vec<usize> = (0..v.len()).filter(|&j| h[j] != 0.0).collect();
        prop_assert!(kept.len() <= k);
        for j in 0..v.len() {
            prop_assert!(h[j] == 0.0 || h[j] == v[j]);
        }
        let min_kept = kept.iter().map(|&j| v[j].abs()).fold(f64::MAX, f64::min);
        for j in 0..v.len() {
            if h[j] == 0.0 && v[j] != 0.0 && kept.len() == k {
                prop_assert!(v[j].abs() <= min_kept);
            }
        }
    }

    #[test]
    fn support_selection_composes(seed in 0u64..1000) {
        let (ens, x, obs) = instance(12, 30, 3, seed);
        let mut rng = RngSeed::new(seed, 1).stream();
        let z = perturb(&x, 0.2, &mut rng);
        let state = make_state(&ens, &obs, z.clone(), 0).unwrap();
        let mu = 0.05;
        let g = gradient(&ens, &obs, &z).unwrap();
        let v: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - mu * b).collect();
        let expect: Vec<usize> = hard_threshold(&v, 3).iter().enumerate().filter(|(_, e)| **e != 0.0).map(|(j, _)| j).collect();
        prop_assert_eq!(select_support(&ens, &obs, &state, mu, 3).unwrap(), expect);
    }

    #[test]
    fn iterates_are_exactly_sparse(seed in 0u64..1000) {
        let (ens, x, obs) = instance(15, 30, 3, seed);
        let mut rng = RngSeed::new(seed, 2).stream();
        let z: Vec<f64> = x.iter().map(|v| v + 0.1 * rng.normal()).collect();
        let mut cfg = SolverConfig::new(3);
        cfg.max_iters = 15;
        let res = solve(&ens, &obs, &z, &cfg, None).unwrap();
        for r in &res.trace.records[1..] {
            prop_assert!(r.support.len() <= 3);
        }
        prop_assert!(res.x.iter().filter(|v| **v != 0.0).count() <= 3);
    }
}
