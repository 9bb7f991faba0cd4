use serde::{Deserialize, Serialize};

use super::OptError;
use crate::channel_phy::{avg_decoding_error, Direction, FadingModel, LinkBudget};
use crate::exec::{self, Execution};
use crate::queueing::{
    local_violation_prob, mec_violation_from_rho, offload_loss, LocalServerSpec,
};

/// Everything the solvers need about one cluster, in slots and linear units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Large-scale gain `alpha[k][m]`.
    pub alpha: Vec<Vec<f64>>,
    /// Short-packet arrival rate of each device (packets/slot).
    pub lambda_u: Vec<f64>,
    /// Local service time of each device (slots).
    pub d_loc: Vec<u32>,
    /// MEC capacity of each AP (cycles/slot).
    pub s_rate: Vec<f64>,
    /// Long-packet arrival rate at each AP (packets/slot).
    pub lambda_long: Vec<f64>,
    pub c_s: f64,
    pub c_l_mean: f64,
    /// End-to-end deadline (slots).
    pub d_max: u32,
    pub n_max: u32,
    pub n_c: u32,
    /// Link templates; their `alpha` is replaced per device-AP pair.
    pub uplink: LinkBudget,
    pub downlink: LinkBudget,
    /// Short-packet load is negligible next to the long-packet load.
    pub typical_scenario: bool,
}

impl Scenario {
    pub fn num_devices(&self) -> usize {
        self.lambda_u.len()
    }

    pub fn num_aps(&self) -> usize {
        self.s_rate.len()
    }

    pub fn link(&self, k: usize, m: usize, dir: Direction) -> LinkBudget {
        let template = match dir {
            Direction::Uplink => self.uplink,
            Direction::Downlink => self.downlink,
        };
        template.with_alpha(self.alpha[k][m])
    }

    pub fn fading(&self) -> FadingModel {
        FadingModel::rayleigh_mrc(self.uplink.n_t)
    }

    /// Long-packet share of the workload of AP `m`.
    pub fn base_workload(&self, m: usize) -> f64 {
        self.lambda_long[m] * self.c_l_mean / self.s_rate[m]
    }

    /// Workload of AP `m` given the short-packet rate offloaded to it.
    pub fn workload(&self, m: usize, short_rate: f64) -> f64 {
        (short_rate * self.c_s + self.lambda_long[m] * self.c_l_mean) / self.s_rate[m]
    }

    /// Workload bound reached when every device offloads everything to `m`.
    pub fn rho_ub(&self, m: usize) -> f64 {
        self.workload(m, self.lambda_u.iter().sum())
    }

    pub fn mec_exponent(&self, m: usize) -> f64 {
        self.s_rate[m] * (self.d_max as f64 - 2.0) / self.c_s - 1.0
    }

    pub fn eps_mec(&self, m: usize, rho: f64) -> f64 {
        mec_violation_from_rho(rho, self.mec_exponent(m))
    }

    pub fn eps_loc(&self, k: usize, lambda0: f64) -> Result<f64, OptError> {
        if lambda0 <= 0.0 {
            return Ok(0.0);
        }
        let spec = LocalServerSpec { d_loc: self.d_loc[k], lambda0 };
        if lambda0 * self.d_loc[k] as f64 >= 1.0 {
            return Ok(1.0);
        }
        Ok(local_violation_prob(&spec, self.d_max)?)
    }

    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |m: String| Err(OptError::InvalidScenario(m));
        let (k, m) = (self.num_devices(), self.num_aps());
        if k == 0 || m == 0 {
            return bad("at least one device and one AP are required".into());
        }
        if self.alpha.len() != k || self.alpha.iter().any(|r| r.len() != m) {
            return bad(format!("gain matrix must be {k} x {m}"));
        }
        if self.alpha.iter().flatten().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("gains must be positive".into());
        }
        if self.d_loc.len() != k || self.lambda_long.len() != m {
            return bad("per-device or per-AP vectors have inconsistent lengths".into());
        }
        if self.lambda_u.iter().any(|&l| !(0.0..1.0).contains(&l)) {
            return bad("lambda_u must lie in [0, 1)".into());
        }
        if self.s_rate.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("s_rate must be positive".into());
        }
        if self.lambda_long.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return bad("lambda_long must be non-negative".into());
        }
        if !(self.c_s > 0.0 && self.c_l_mean > 0.0) {
            return bad("c_s and c_l_mean must be positive".into());
        }
        if self.d_max < 3 {
            return bad(format!("d_max = {} slots leaves no time for processing", self.d_max));
        }
        if self.n_c == 0 {
            return bad("n_c must be at least 1".into());
        }
        for (i, &d) in self.d_loc.iter().enumerate() {
            if d == 0 {
                return bad(format!("device {i}: d_loc must be at least 1"));
            }
            if self.d_max >= d && self.d_max - d >= d {
                return bad(format!(
                    "device {i}: d_max - d_loc = {} is outside the local delay model (needs <= {})",
                    self.d_max - d,
                    d - 1
                ));
            }
        }
        self.uplink.validate()?;
        self.downlink.validate()?;
        if self.uplink.n_t != self.downlink.n_t {
            return bad("uplink and downlink must use the same antenna count".into());
        }
        Ok(())
    }
}

/// Fading-averaged decoding error for every device, AP and subcarrier count.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTables {
    n_c: usize,
    num_aps: usize,
    /// `[k * M + m][n - 1]`
    up: Vec<Vec<f64>>,
    down: Vec<Vec<f64>>,
}

impl ErrorTables {
    pub fn build(scen: &Scenario, exec: Execution) -> Result<Self, OptError> {
        let (kk, mm, n_c) = (scen.num_devices(), scen.num_aps(), scen.n_c as usize);
        let fading = scen.fading();
        let rows = exec::map_range(exec, kk * mm * 2, |idx| {
            let (pair, dir) = (idx / 2, if idx % 2 == 0 { Direction::Uplink } else { Direction::Downlink });
            let link = scen.link(pair / mm, pair % mm, dir);
            (1..=n_c as u32)
                .map(|n| avg_decoding_error(n, &link, &fading))
                .collect::<Result<Vec<f64>, _>>()
        });
        let mut up = Vec::with_capacity(kk * mm);
        let mut down = Vec::with_capacity(kk * mm);
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            if i % 2 == 0 {
                up.push(row);
            } else {
                down.push(row);
            }
        }
        Ok(Self { n_c, num_aps: mm, up, down })
    }

    pub fn n_c(&self) -> u32 {
        self.n_c as u32
    }

    /// Uplink error of device `k` at AP `m` on `n >= 1` subcarriers.
    pub fn eps_u(&self, k: usize, m: usize, n: u32) -> f64 {
        self.up[k * self.num_aps + m][n as usize - 1]
    }

    pub fn eps_d(&self, k: usize, m: usize, n: u32) -> f64 {
        self.down[k * self.num_aps + m][n as usize - 1]
    }

    pub fn up_row(&self, k: usize, m: usize) -> &[f64] {
        &self.up[k * self.num_aps + m]
    }

    pub fn down_row(&self, k: usize, m: usize) -> &[f64] {
        &self.down[k * self.num_aps + m]
    }
}

/// A complete decision: association, offload split and subcarriers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// AP serving each device; `None` means all packets stay local.
    pub association: Vec<Option<usize>>,
    /// Rate each device offloads to its AP (packets/slot).
    pub offload_rates: Vec<f64>,
    pub local_rates: Vec<f64>,
    pub subcarriers_ul: Vec<u32>,
    pub subcarriers_dl: Vec<u32>,
}

impl Allocation {
    pub fn empty(num_devices: usize) -> Self {
        Self {
            association: vec![None; num_devices],
            offload_rates: vec![0.0; num_devices],
            local_rates: vec![0.0; num_devices],
            subcarriers_ul: vec![0; num_devices],
            subcarriers_dl: vec![0; num_devices],
        }
    }

    /// Association as a 0/1 matrix.
    pub fn x_matrix(&self, num_aps: usize) -> Vec<Vec<u8>> {
        self.association
            .iter()
            .map(|a| (0..num_aps).map(|m| u8::from(*a == Some(m))).collect())
            .collect()
    }

    pub fn total_subcarriers(&self) -> u32 {
        self.subcarriers_ul.iter().chain(&self.subcarriers_dl).sum()
    }

    /// Short-packet rate arriving at each AP.
    pub fn ap_arrivals(&self, num_aps: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_aps];
        for (a, r) in self.association.iter().zip(&self.offload_rates) {
            if let Some(m) = a {
                out[*m] += r;
            }
        }
        out
    }

    pub fn workloads(&self, scen: &Scenario) -> Vec<f64> {
        self.ap_arrivals(scen.num_aps())
            .iter()
            .enumerate()
            .map(|(m, &r)| scen.workload(m, r))
            .collect()
    }

    /// Checks association, rate conservation, subcarrier range, the
    /// subcarrier budget and MEC stability.
    pub fn check_constraints(&self, scen: &Scenario) -> Result<(), OptError> {
        let k = scen.num_devices();
        let fail = |m: String| Err(OptError::ConstraintViolation(m));
        let lens = [
            self.association.len(),
            self.offload_rates.len(),
            self.local_rates.len(),
            self.subcarriers_ul.len(),
            self.subcarriers_dl.len(),
        ];
        if lens.iter().any(|&l| l != k) {
            return fail(format!("allocation vectors must have length {k}"));
        }
        for i in 0..k {
            let (off, loc) = (self.offload_rates[i], self.local_rates[i]);
            if !(off >= 0.0 && loc >= 0.0) {
                return fail(format!("device {i}: negative rate"));
            }
            let total = off + loc;
            if (total - scen.lambda_u[i]).abs() > 1e-12 * scen.lambda_u[i] {
                return fail(format!("device {i}: offload {off} + local {loc} != lambda_u {}", scen.lambda_u[i]));
            }
            let (nu, nd) = (self.subcarriers_ul[i], self.subcarriers_dl[i]);
            match self.association[i] {
                None => {
                    if off != 0.0 {
                        return fail(format!("device {i}: offloads without an AP"));
                    }
                    if nu != 0 || nd != 0 {
                        return fail(format!("device {i}: subcarriers without an AP"));
                    }
                }
                Some(m) => {
                    if m >= scen.num_aps() {
                        return fail(format!("device {i}: AP index {m} out of range"));
                    }
                    if !(1..=scen.n_c).contains(&nu) || !(1..=scen.n_c).contains(&nd) {
                        return fail(format!("device {i}: subcarriers ({nu}, {nd}) outside 1..={}", scen.n_c));
                    }
                }
            }
        }
        if self.total_subcarriers() > scen.n_max {
            return fail(format!("{} subcarriers used, budget {}", self.total_subcarriers(), scen.n_max));
        }
        for (m, rho) in self.workloads(scen).iter().enumerate() {
            if !(*rho < 1.0) {
                return fail(format!("AP {m}: workload {rho} >= 1"));
            }
        }
        Ok(())
    }
}

/// Loss components of one device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceBreakdown {
    pub eps_u: f64,
    pub eps_d: f64,
    pub eps_mec: f64,
    pub eps_loc: f64,
    pub loss: f64,
}

/// Which MEC workload enters the violation probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadBasis {
    /// Workload implied by the allocation itself.
    Actual,
    /// Every device offloading everything to each AP.
    UpperBound,
}

/// Per-device loss `max(eps_loc, x (eps_u + eps_d + eps_mec))`.
pub fn device_breakdown(
    alloc: &Allocation,
    scen: &Scenario,
    tables: &ErrorTables,
    basis: WorkloadBasis,
) -> Result<Vec<DeviceBreakdown>, OptError> {
    let rho: Vec<f64> = match basis {
        WorkloadBasis::Actual => alloc.workloads(scen),
        WorkloadBasis::UpperBound => (0..scen.num_aps()).map(|m| scen.rho_ub(m)).collect(),
    };
    (0..scen.num_devices())
        .map(|k| {
            let eps_loc = scen.eps_loc(k, alloc.local_rates[k])?;
            let (eps_u, eps_d, eps_mec, offload) = match alloc.association[k] {
                Some(m) => {
                    let (eu, ed) = (
                        tables.eps_u(k, m, alloc.subcarriers_ul[k]),
                        tables.eps_d(k, m, alloc.subcarriers_dl[k]),
                    );
                    let em = scen.eps_mec(m, rho[m]);
                    (eu, ed, em, offload_loss(eu, ed, em))
                }
                None => (0.0, 0.0, 0.0, 0.0),
            };
            Ok(DeviceBreakdown { eps_u, eps_d, eps_mec, eps_loc, loss: eps_loc.max(offload) })
        })
        .collect()
}

/// Loss of device `k` under `alloc`, evaluated from the closed forms directly.
pub fn device_loss(k: usize, alloc: &Allocation, scen: &Scenario) -> Result<f64, OptError> {
    let eps_loc = scen.eps_loc(k, alloc.local_rates[k])?;
    let offload = match alloc.association[k] {
        Some(m) => {
            let fading = scen.fading();
            let eu = avg_decoding_error(alloc.subcarriers_ul[k], &scen.link(k, m, Direction::Uplink), &fading)?;
            let ed = avg_decoding_error(alloc.subcarriers_dl[k], &scen.link(k, m, Direction::Downlink), &fading)?;
            let rho = scen.workload(m, alloc.ap_arrivals(scen.num_aps())[m]);
            offload_loss(eu, ed, scen.eps_mec(m, rho))
        }
        None => 0.0,
    };
    Ok(eps_loc.max(offload))
}
