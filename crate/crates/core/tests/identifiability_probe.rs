use sgn_core::identifiability::{
    collision_residual, collision_scan, collision_search, s1_injectivity_check, CollisionOptions,
};
use sgn_core::rng::RngSeed;
use sgn_core::{gen_ensemble, StorageMode};

/// Tries every ordered pair of singleton supports.
fn exhaustive_s1(ens: &sgn_core::MeasurementEnsemble, seed: RngSeed) -> bool {
    let n = ens.n();
    let opts = CollisionOptions::default();
    for j in 0..n {
        for k in 0..n {
            let rep = collision_search(
                ens,
                1,
                &[j],
                &[k],
                seed.child((j * n + k) as u64),
                40,
                &opts,
            )
            .unwrap();
            if rep.found {
                return true;
            }
        }
    }
    false
}

#[test]
fn s1_check_agrees_with_exhaustive_search() {
    for (n, m) in [(2, 1), (4, 2)] {
        for t in 0..50u64 {
            let ens =
                gen_ensemble(n, m, RngSeed::new(t, m as u64), StorageMode::Materialized).unwrap();
            let cert = s1_injectivity_check(&ens);
            let found = exhaustive_s1(&ens, RngSeed::new(t, 99));
            assert_eq!(!cert.injective, found, "n={n} m={m} ensemble {t}: {cert:?}");
        }
    }
}

#[test]
fn found_collisions_verify_and_scale() {
    let ens = gen_ensemble(6, 2, RngSeed::new(31, 0), StorageMode::Materialized).unwrap();
    let rep = collision_scan(
        &ens,
        2,
        RngSeed::new(31, 1),
        50,
        &CollisionOptions::default(),
    )
    .unwrap();
    assert!(rep.found);
    assert!(collision_residual(&ens, &rep.x, &rep.z) <= 1e-8);
    for a in [-3.0, 0.5, 10.0] {
        let ax: Vec<f64> = rep.x.iter().map(|v| a * v).collect();
        let az: Vec<f64> = rep.z.iter().map(|v| a * v).collect();
        assert!(collision_residual(&ens, &ax, &az) <= 1e-8 * a * a);
    }
    assert!(rep.supports.0.len() <= 2 && rep.supports.1.len() <= 2);
    assert!(rep
        .x
        .iter()
        .enumerate()
        .all(|(j, v)| *v == 0.0 || rep.supports.0.contains(&j)));
}

#[test]
fn self_collision_is_filtered() {
    let ens = gen_ensemble(6, 8, RngSeed::new(32, 0), StorageMode::Materialized).unwrap();
    let rep = collision_search(
        &ens,
        2,
        &[1, 4],
        &[1, 4],
        RngSeed::new(32, 1),
        30,
        &CollisionOptions::default(),
    )
    .unwrap();
    assert!(!rep.found);
    assert_eq!(rep.attempts, 30);
}
