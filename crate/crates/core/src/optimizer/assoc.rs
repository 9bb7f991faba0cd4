//! Closed-form associations for the two asymptotic regimes.

use serde::{Deserialize, Serialize};

use super::model::Scenario;
use super::OptError;
use crate::channel_phy::{avg_decoding_error, Direction};

/// Radio-limited regime: each device picks its strongest AP, or stays local
/// when local processing alone beats that AP at `n_c` subcarriers each way.
pub fn assoc_comm_bottleneck(scen: &Scenario) -> Result<Vec<Option<usize>>, OptError> {
    let fading = scen.fading();
    (0..scen.num_devices())
        .map(|k| {
            let best = argmax(&scen.alpha[k]);
            let eu = avg_decoding_error(scen.n_c, &scen.link(k, best, Direction::Uplink), &fading)?;
            let ed = avg_decoding_error(scen.n_c, &scen.link(k, best, Direction::Downlink), &fading)?;
            let local = scen.eps_loc(k, scen.lambda_u[k])?;
            Ok(if local <= eu + ed { None } else { Some(best) })
        })
        .collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (m, &a) in row.iter().enumerate() {
        if a > row[best] {
            best = m;
        }
    }
    best
}

/// Compute-limited regime: equalized workload `rho*` and its rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompAssociation {
    pub rho_star: f64,
    /// APs that receive short packets at the continuous optimum.
    pub members: Vec<usize>,
    /// Short-packet rate each AP receives at the continuous optimum.
    pub lambda_star: Vec<f64>,
    /// Integral association after greedy rounding.
    pub association: Vec<Option<usize>>,
    /// Workload of each AP under `association`.
    pub workloads: Vec<f64>,
}

/// Water-filling over the APs, then longest-demand-first rounding onto the
/// member APs. `demand[k]` is the rate device `k` offloads (all of
/// `lambda_u` when `None`).
pub fn assoc_comp_bottleneck(scen: &Scenario, demand: Option<&[f64]>) -> Result<CompAssociation, OptError> {
    let demand: Vec<f64> = demand.map_or_else(|| scen.lambda_u.clone(), <[f64]>::to_vec);
    if demand.len() != scen.num_devices() {
        return Err(OptError::InvalidScenario("demand length differs from device count".into()));
    }
    let mm = scen.num_aps();
    let total_cycles: f64 = demand.iter().sum::<f64>() * scen.c_s;
    let mut order: Vec<usize> = (0..mm).collect();
    order.sort_by(|&a, &b| scen.base_workload(a).total_cmp(&scen.base_workload(b)));

    let rho_with = |count: usize| {
        let set = &order[..count];
        let long: f64 = set.iter().map(|&m| scen.lambda_long[m] * scen.c_l_mean).sum();
        let cap: f64 = set.iter().map(|&m| scen.s_rate[m]).sum();
        (total_cycles + long) / cap
    };
    // The admissible set sizes form a prefix, so bisect for the largest.
    let admissible = |count: usize| rho_with(count) > scen.base_workload(order[count - 1]);
    let count = if !admissible(1) {
        1
    } else {
        let (mut lo, mut hi) = (1usize, mm);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if admissible(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    };
    let rho_star = if total_cycles > 0.0 { rho_with(count) } else { scen.base_workload(order[0]) };
    if rho_star >= 1.0 {
        return Err(OptError::Unstable { rho: rho_star });
    }
    let mut members = order[..count].to_vec();
    members.sort_unstable();
    let mut lambda_star = vec![0.0; mm];
    if total_cycles > 0.0 {
        for &m in &members {
            lambda_star[m] = ((rho_star * scen.s_rate[m] - scen.lambda_long[m] * scen.c_l_mean) / scen.c_s).max(0.0);
        }
    }

    let mut devices: Vec<usize> = (0..demand.len()).collect();
    devices.sort_by(|&a, &b| demand[b].total_cmp(&demand[a]));
    let mut arrivals = vec![0.0; mm];
    let mut association = vec![None; demand.len()];
    for k in devices {
        if demand[k] <= 0.0 {
            continue;
        }
        let mut best = members[0];
        for &m in &members[1..] {
            if scen.workload(m, arrivals[m]) < scen.workload(best, arrivals[best]) {
                best = m;
            }
        }
        arrivals[best] += demand[k];
        association[k] = Some(best);
    }
    let workloads = (0..mm).map(|m| scen.workload(m, arrivals[m])).collect();
    Ok(CompAssociation { rho_star, members, lambda_star, association, workloads })
}
