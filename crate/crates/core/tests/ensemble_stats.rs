use sgn_core::rng::RngSeed;
use sgn_core::{gen_ensemble, gen_signal, measure, NoiseSpec, StorageMode};

#[test]
fn support_positions_are_uniform() {
    // 10⁴ draws of 3-subsets of 10 indices; each index is hit 3000 times in expectation.
    let (n, s, draws) = (10, 3, 10_000);
    let mut counts = vec![0usize; n];
    for t in 0..draws {
        let x = gen_signal(n, s, RngSeed::new(77, t)).unwrap();
        assert_eq!(x.support().len(), s);
        for &j in x.support() {
            counts[j] += 1;
        }
    }
    let expected = (draws as usize * s) as f64 / n as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 9 degrees of freedom; 21.67 is the 0.99 quantile.
    assert!(chi2 < 21.67, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn measurement_moments() {
    // y = xᵀAx is N(0, ‖x‖⁴) for a fixed x and non-symmetric Gaussian A.
    let (n, m) = (20, 20000);
    let ens = gen_ensemble(n, m, RngSeed::new(5, 0), StorageMode::Streamed).unwrap();
    let x = gen_signal(n, 4, RngSeed::new(5, 1)).unwrap();
    let obs = measure(&ens, &x, NoiseSpec::none(), RngSeed::new(5, 2)).unwrap();
    let x4 = x.norm().powi(4);
    let mean = obs.y.iter().sum::<f64>() / m as f64;
    let second = obs.y.iter().map(|v| v * v).sum::<f64>() / m as f64;
    // Standard errors: ‖x‖²/√m and √2‖x‖⁴/√m.
    assert!(
        mean.abs() < 5.0 * x.norm().powi(2) / (m as f64).sqrt(),
        "mean {mean}"
    );
    assert!(
        (second / x4 - 1.0).abs() < 5.0 * 2f64.sqrt() / (m as f64).sqrt(),
        "E y² ratio {}",
        second / x4
    );
}

#[test]
fn streamed_and_materialized_agree_bitwise() {
    let seed = RngSeed::new(9, 4);
    let a = gen_ensemble(7, 5, seed, StorageMode::Materialized).unwrap();
    let b = gen_ensemble(7, 5, seed, StorageMode::Streamed).unwrap();
    for i in 0..5 {
        assert_eq!(a.matrix(i), b.matrix(i));
    }
    let x = gen_signal(7, 2, RngSeed::new(9, 5)).unwrap();
    let ya = measure(
        &a,
        &x,
        NoiseSpec::gaussian(0.3).unwrap(),
        RngSeed::new(9, 6),
    )
    .unwrap();
    let yb = measure(
        &b,
        &x,
        NoiseSpec::gaussian(0.3).unwrap(),
        RngSeed::new(9, 6),
    )
    .unwrap();
    assert_eq!(ya.y, yb.y);
}

#[test]
fn laplace_noise_has_requested_spread() {
    let (n, m) = (5, 20000);
    let ens = gen_ensemble(n, m, RngSeed::new(3, 0), StorageMode::Streamed).unwrap();
    let x = gen_signal(n, 2, RngSeed::new(3, 1)).unwrap();
    let obs = measure(
        &ens,
        &x,
        NoiseSpec::laplace(0.7).unwrap(),
        RngSeed::new(3, 2),
    )
    .unwrap();
    let clean = obs.clean_y.as_ref().unwrap();
    let e: Vec<f64> = obs.y.iter().zip(clean).map(|(a, b)| a - b).collect();
    let sd = (e.iter().map(|v| v * v).sum::<f64>() / m as f64).sqrt();
    assert!((sd - 0.7).abs() < 0.03, "sd {sd}");
}
