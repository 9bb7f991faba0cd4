use mecplan::queueing::{geo_d1_ccdf, max_local_rate, mec_violation_from_rho, ps_short_ccdf};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Waiting times of a slotted FCFS queue by the Lindley recursion.
fn lindley_waits(lambda: f64, d: u32, n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waits = Vec::with_capacity(n);
    let mut backlog = 0u64; // slots of work ahead of a new arrival
    let warmup = 10_000;
    let mut slot = 0u64;
    while waits.len() < n {
        if rng.random::<f64>() < lambda {
            if slot >= warmup {
                waits.push(backlog as u32);
            }
            backlog += d as u64;
        }
        backlog = backlog.saturating_sub(1);
        slot += 1;
    }
    waits
}

#[test]
fn geo_d1_matches_lindley_recursion() {
    for (lambda, d) in [(0.1, 5u32), (0.15, 4), (0.08, 6)] {
        let n = 400_000;
        let waits = lindley_waits(lambda, d, n, 17);
        for i in 0..d {
            let model = geo_d1_ccdf(lambda, d, i).unwrap();
            let emp = waits.iter().filter(|&&w| w > i).count() as f64 / n as f64;
            // Waits are correlated, so allow a generous multiple of the binomial error.
            let se = (emp * (1.0 - emp) / n as f64).sqrt();
            assert!((emp - model).abs() <= 10.0 * se + 2e-3, "lambda {lambda} d {d} i {i}: {emp} vs {model}");
        }
    }
}

proptest! {
    #[test]
    fn geo_d1_is_monotone(load in 0.01f64..0.95, d in 1u32..12) {
        let lambda = load / d as f64;
        let vals: Vec<f64> = (0..d).map(|i| geo_d1_ccdf(lambda, d, i).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        for &v in &vals {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let heavier = geo_d1_ccdf(lambda * 1.01, d, 0).unwrap();
        prop_assert!(heavier >= vals[0] - 1e-15);
    }

    #[test]
    fn max_local_rate_meets_target(d in 2u32..10, slack in 0u32..9, eps in 1e-9f64..0.5) {
        let d_max = d + slack.min(d - 1);
        let lam = max_local_rate(d, d_max, eps).unwrap();
        prop_assert!(lam >= 0.0 && lam < 1.0 / d as f64);
        if lam > 0.0 {
            prop_assert!(geo_d1_ccdf(lam, d, d_max - d).unwrap() <= eps + 1e-12);
        }
    }

    #[test]
    fn mec_violation_monotone_in_load(r1 in 0.0f64..0.99, r2 in 0.0f64..0.99, e in 1.0f64..50.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(mec_violation_from_rho(lo, e) <= mec_violation_from_rho(hi, e));
        prop_assert!(ps_short_ccdf(hi, e) <= ps_short_ccdf(hi, e - 1.0));
    }
}

#[test]
fn unstable_server_loses_everything() {
    assert_eq!(mec_violation_from_rho(1.0, 10.0), 1.0);
    assert_eq!(ps_short_ccdf(1.2, 3.0), 1.0);
}
