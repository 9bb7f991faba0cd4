use mecplan::exec::Execution;
use mecplan::optimizer::{
    assoc_comm_bottleneck, assoc_comp_bottleneck, brute_force_solve, device_loss, extended_plb_solve,
    fixed_association_solve, plb_solve, BruteObjective, ErrorTables, OptError, PlbOptions, Scenario, SolveMode,
    SolveStatus,
};
use mecplan::scenario::{generate, generate_scenario, ScenarioConfig, ScenarioFile};
use proptest::prelude::*;

/// Small instance the brute-force oracle can enumerate.
fn tiny(seed: u64, k: usize, n_c: u32, n_max: u32, n_t: u32) -> ScenarioFile {
    let mut cfg = ScenarioConfig { seed, n_devices: k, ap_rows: 1, ap_cols: 2, ..ScenarioConfig::default() };
    cfg.radio.n_c = n_c;
    cfg.radio.n_max = n_max;
    cfg.radio.n_t = n_t;
    generate(&cfg).unwrap()
}

fn typical(file: &ScenarioFile) -> Scenario {
    let mut f = file.clone();
    f.typical_scenario = true;
    f.to_scenario().unwrap()
}

#[test]
fn comp_association_balances_two_aps() {
    let mut scen = generate_scenario(&ScenarioConfig { n_devices: 8, ap_rows: 1, ap_cols: 2, ..Default::default() })
        .unwrap();
    scen.s_rate = vec![10.0, 10.0];
    scen.c_s = 1.0;
    scen.c_l_mean = 1.0;
    scen.lambda_long = vec![3.0, 5.0];
    scen.lambda_u = vec![0.5; 8];
    let comp = assoc_comp_bottleneck(&scen, None).unwrap();
    assert!((comp.rho_star - 0.6).abs() < 1e-12);
    assert!((comp.lambda_star[0] - 3.0).abs() < 1e-12 && (comp.lambda_star[1] - 1.0).abs() < 1e-12);
    assert_eq!(comp.members, vec![0, 1]);
    // Rounding puts whole devices on the APs; each load stays within one device of the optimum.
    for m in 0..2 {
        assert!((comp.workloads[m] - 0.6).abs() <= 0.05 + 1e-12);
    }
}

#[test]
fn comp_association_rejects_overload() {
    let mut scen = generate_scenario(&ScenarioConfig { n_devices: 4, ap_rows: 1, ap_cols: 2, ..Default::default() })
        .unwrap();
    scen.lambda_long = vec![1.0, 1.0];
    assert!(matches!(assoc_comp_bottleneck(&scen, None), Err(OptError::Unstable { .. })));
}

#[test]
fn comm_association_picks_strongest_ap() {
    let scen = generate_scenario(&ScenarioConfig::default()).unwrap();
    let assoc = assoc_comm_bottleneck(&scen).unwrap();
    for (k, a) in assoc.iter().enumerate() {
        if let Some(m) = a {
            let row = &scen.alpha[k];
            assert!(row.iter().all(|&g| g <= row[*m]), "device {k}");
        }
    }
}

#[test]
fn extended_allocation_is_feasible_and_certified() {
    for seed in 1..=3 {
        let scen = generate_scenario(&ScenarioConfig { seed, ..Default::default() }).unwrap();
        let r = extended_plb_solve(&scen, None, &PlbOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let eps = r.epsilon_a.unwrap();
        let alloc = r.allocation();
        alloc.check_constraints(&scen).unwrap();
        assert!(r.subcarriers_used <= scen.n_max);
        for k in 0..scen.num_devices() {
            assert!(device_loss(k, &alloc, &scen).unwrap() <= eps * (1.0 + 1e-9), "seed {seed} device {k}");
        }
        assert!(r.max_device_loss.unwrap() <= eps * (1.0 + 1e-9));
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let scen = generate_scenario(&ScenarioConfig::default()).unwrap();
    let run = |exec| {
        let opts = PlbOptions { exec, ..PlbOptions::default() };
        serde_json::to_string(&extended_plb_solve(&scen, None, &opts).unwrap()).unwrap()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    let a = ErrorTables::build(&scen, Execution::Sequential).unwrap();
    let b = ErrorTables::build(&scen, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn plb_needs_typical_flag() {
    let scen = tiny(1000, 2, 4, 8, 8).to_scenario().unwrap();
    assert!(matches!(plb_solve(&scen, None, &PlbOptions::default()), Err(OptError::Precondition(_))));
}

#[test]
fn brute_refuses_large_instances() {
    let scen = generate_scenario(&ScenarioConfig::default()).unwrap();
    assert!(matches!(brute_force_solve(&scen, &BruteObjective::Typical, None), Err(OptError::TooLarge(_))));
}

#[test]
fn log_bisection_brackets_linear_answer() {
    let scen = typical(&tiny(1003, 3, 6, 20, 16));
    let lin = plb_solve(&scen, None, &PlbOptions::default()).unwrap();
    let log = plb_solve(&scen, None, &PlbOptions::log_scale()).unwrap();
    let (a, b) = (lin.epsilon_a.unwrap(), log.epsilon_a.unwrap());
    let last = log.trace.last().unwrap();
    assert!((last.eps_ub / last.eps_lb).ln() <= 2.0 * PlbOptions::default().log_tol);
    assert!(b >= a - 1e-9 && b <= a * 1e-3f64.exp() + 1e-9, "linear {a} log {b}");
}

#[test]
fn infeasible_start_is_reported() {
    let scen = typical(&tiny(1001, 3, 3, 6, 4));
    let opts = PlbOptions { eps_init: 1e-12, ..PlbOptions::default() };
    let r = plb_solve(&scen, None, &opts).unwrap();
    assert_eq!(r.status, SolveStatus::InfeasibleAtInit);
    assert!(r.epsilon_a.is_none() && r.trace.is_empty());
}

#[test]
fn fixed_association_respects_given_map() {
    let scen = generate_scenario(&ScenarioConfig::default()).unwrap();
    let assoc = assoc_comm_bottleneck(&scen).unwrap();
    let r = fixed_association_solve(&scen, &assoc, SolveMode::Comm, None, &PlbOptions::default()).unwrap();
    if r.status.is_feasible() {
        for (k, a) in assoc.iter().enumerate() {
            if r.offload_rates[k] > 0.0 {
                assert_eq!(r.association[k], *a);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // The oracle optimum stays inside every bracket and the bracket halves exactly.
    #[test]
    fn plb_brackets_the_oracle(
        seed in 2000u64..3000,
        k in 2usize..=3,
        n_c in 3u32..=6,
        nt_i in 0usize..3,
        extra in 0.0f64..1.0,
    ) {
        let lo = 2 * k as u32 + 1;
        let hi = 2 * k as u32 * n_c;
        let n_max = lo + ((hi - lo) as f64 * extra) as u32;
        let scen = typical(&tiny(seed, k, n_c, n_max, [4, 8, 16][nt_i]));
        let brute = brute_force_solve(&scen, &BruteObjective::Typical, None).unwrap();
        let opts = PlbOptions::default();
        let r = plb_solve(&scen, None, &opts).unwrap();
        let best = brute.value.unwrap_or(f64::INFINITY);
        // A start above every achievable loss is the only way to fail at init.
        prop_assert_eq!(r.status.is_feasible(), best <= opts.eps_init);
        prop_assume!(r.status.is_feasible());
        for t in &r.trace {
            prop_assert!(t.eps_lb < best && best <= t.eps_ub, "{:?} vs {}", t, best);
            prop_assert_eq!(t.eps_ub - t.eps_lb, opts.eps_init * 0.5f64.powi(t.iteration as i32 - 1));
        }
        prop_assert!(best <= r.epsilon_a.unwrap());
    }
}
