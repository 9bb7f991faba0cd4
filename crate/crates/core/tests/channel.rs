use mecplan::channel_phy::{
    avg_decoding_error, conditional_error, monte_carlo_decoding_error, q_func, q_inv, Direction, FadingModel,
    LinkBudget,
};
use mecplan::exec::Execution;
use proptest::prelude::*;

fn link(snr: f64, n_t: u32, b: f64) -> LinkBudget {
    LinkBudget {
        alpha: snr,
        p_sub: 1.0,
        n0w0: 1.0,
        n_t,
        t_s: 0.125e-3,
        w0: 120e3,
        b,
        direction: Direction::Uplink,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Second differences over the subcarrier count stay non-negative.
    #[test]
    fn averaged_error_is_convex_in_subcarriers(
        snr_db in 10.0f64..60.0,
        n_t in 1u32..=16,
        b in 32.0f64..512.0,
    ) {
        let l = link(10f64.powf(snr_db / 10.0), n_t, b);
        prop_assume!(conditional_error(1.0, 1, &l) < 0.5);
        let fading = FadingModel::rayleigh_mrc(n_t);
        let e: Vec<f64> = (1..=10).map(|n| avg_decoding_error(n, &l, &fading).unwrap()).collect();
        for w in e.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12, "{:?}", e);
        }
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn q_inv_inverts_q(x in -4.0f64..8.0) {
        let p = q_func(x);
        prop_assert!((q_inv(p).unwrap() - x).abs() <= 1e-9 * (1.0 + x.abs()));
    }
}

/// SNR at which the averaged error is about `target`.
fn snr_for(target: f64, n_t: u32, n: u32) -> f64 {
    let fading = FadingModel::rayleigh_mrc(n_t);
    let (mut lo, mut hi) = (-20.0f64, 80.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let e = avg_decoding_error(n, &link(10f64.powf(mid / 10.0), n_t, 256.0), &fading).unwrap();
        if e > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    10f64.powf(hi / 10.0)
}

#[test]
fn quadrature_agrees_with_monte_carlo() {
    for (target, n_t, n) in [(1e-2, 4, 2), (1e-1, 8, 3), (3e-3, 2, 1)] {
        let l = link(snr_for(target, n_t, n), n_t, 256.0);
        let exact = avg_decoding_error(n, &l, &FadingModel::rayleigh_mrc(n_t)).unwrap();
        let mc = monte_carlo_decoding_error(n, &l, 400_000, 5, Execution::Parallel).unwrap();
        assert!(
            (mc.mean - exact).abs() <= 5.0 * mc.std_error,
            "n_t {n_t} n {n}: quadrature {exact} vs MC {} +- {}",
            mc.mean,
            mc.std_error
        );
    }
}

#[test]
fn monte_carlo_is_thread_independent() {
    let l = link(2.0, 4, 256.0);
    let a = monte_carlo_decoding_error(2, &l, 200_000, 9, Execution::Sequential).unwrap();
    let b = monte_carlo_decoding_error(2, &l, 200_000, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}
