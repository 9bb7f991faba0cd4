use serde::{Deserialize, Serialize};

use super::model::{ErrorTables, Scenario};
use super::OptError;
use crate::channel_phy::{avg_decoding_error_real, Direction};
use crate::exec::{self, Execution};
use crate::queueing::offload_loss;

/// How the per-device subcarrier subproblem is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemMode {
    /// Enumerate every integer pair in `[1, n_c]^2`.
    #[default]
    Exact,
    /// Solve over real subcarrier counts, then round both up.
    RelaxCeil,
}

/// Fewest subcarriers `(n_u, n_d)` with `eps_u + eps_d + eps_mec <= eps_th`.
///
/// Ties go to the smaller total, then the smaller `n_u`. Returns `None` when
/// no pair in `[1, n_c]^2` meets the target.
pub fn min_subcarriers_pair(up: &[f64], down: &[f64], eps_mec: f64, eps_th: f64) -> Option<(u32, u32)> {
    let mut best: Option<(u32, u32)> = None;
    for (i, &eu) in up.iter().enumerate() {
        // Largest downlink error still admissible only shrinks as n_u drops,
        // so scanning n_d upward and stopping at the first hit is enough.
        let Some(j) = down.iter().position(|&ed| offload_loss(eu, ed, eps_mec) <= eps_th) else {
            continue;
        };
        let cand = (i as u32 + 1, j as u32 + 1);
        let better = match best {
            None => true,
            Some(b) => cand.0 + cand.1 < b.0 + b.1,
        };
        if better {
            best = Some(cand);
        }
    }
    best
}

/// Subproblem for device `k` at AP `m` under the given MEC violation probability.
pub fn min_subcarriers_device(
    k: usize,
    m: usize,
    eps_mec: f64,
    eps_th: f64,
    scen: &Scenario,
    tables: &ErrorTables,
    mode: SubproblemMode,
) -> Result<Option<(u32, u32)>, OptError> {
    match mode {
        SubproblemMode::Exact => Ok(min_subcarriers_pair(tables.up_row(k, m), tables.down_row(k, m), eps_mec, eps_th)),
        SubproblemMode::RelaxCeil => relax_ceil(k, m, eps_mec, eps_th, scen),
    }
}

fn relax_ceil(k: usize, m: usize, eps_mec: f64, eps_th: f64, scen: &Scenario) -> Result<Option<(u32, u32)>, OptError> {
    let n_c = scen.n_c as f64;
    let fading = scen.fading();
    let (lu, ld) = (scen.link(k, m, Direction::Uplink), scen.link(k, m, Direction::Downlink));
    let err = |nu: f64, nd: f64| -> Result<f64, OptError> {
        Ok(offload_loss(
            avg_decoding_error_real(nu, &lu, &fading)?,
            avg_decoding_error_real(nd, &ld, &fading)?,
            eps_mec,
        ))
    };
    // Best split of a real total `t`: the loss is convex along the split.
    let best_split = |t: f64| -> Result<(f64, f64), OptError> {
        let (mut lo, mut hi) = ((t - n_c).max(1.0), (t - 1.0).min(n_c));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            if hi - lo < 1e-6 {
                break;
            }
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if err(a, t - a)? <= err(b, t - b)? {
                hi = b;
            } else {
                lo = a;
            }
        }
        let x = 0.5 * (lo + hi);
        Ok((x, err(x, t - x)?))
    };
    if best_split(2.0 * n_c)?.1 > eps_th {
        return Ok(None);
    }
    let (mut lo, mut hi) = (2.0, 2.0 * n_c);
    if best_split(lo)?.1 <= eps_th {
        hi = lo;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if best_split(mid)?.1 <= eps_th {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (x, _) = best_split(hi)?;
    let nu = (x - 1e-9).ceil().clamp(1.0, n_c) as u32;
    let nd = (hi - x - 1e-9).ceil().clamp(1.0, n_c) as u32;
    Ok(Some((nu, nd)))
}

/// Per-device choice of AP and subcarriers at a common threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeviceChoice {
    pub ap: usize,
    pub n_u: u32,
    pub n_d: u32,
}

/// For each device, the AP needing the fewest subcarriers to meet `eps_th`
/// (ties to the lowest index). `None` marks a device no AP can serve.
pub fn assign_and_allocate(
    eps_th: f64,
    eps_mec: &[f64],
    scen: &Scenario,
    tables: &ErrorTables,
    mode: SubproblemMode,
    exec: Execution,
) -> Result<Vec<Option<DeviceChoice>>, OptError> {
    exec::map_range(exec, scen.num_devices(), |k| {
        let mut best: Option<DeviceChoice> = None;
        for (m, &em) in eps_mec.iter().enumerate() {
            if let Some((n_u, n_d)) = min_subcarriers_device(k, m, em, eps_th, scen, tables, mode)? {
                if best.is_none_or(|b| n_u + n_d < b.n_u + b.n_d) {
                    best = Some(DeviceChoice { ap: m, n_u, n_d });
                }
            }
        }
        Ok(best)
    })
    .into_iter()
    .collect()
}
