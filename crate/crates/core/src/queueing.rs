//! Closed-form delay and reliability of local FCFS and MEC processor-sharing
//! servers. Time is measured in slots throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("delay index {i} is outside the validity window 0..={max} of the Geo/D/1 CCDF")]
    OutsideWindow { i: u32, max: u32 },
}

/// Geo/D/1 server at a device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalServerSpec {
    /// Service time per short packet (slots).
    pub d_loc: u32,
    /// Local arrival probability per slot.
    pub lambda0: f64,
}

/// Processor-sharing MEC server fed by short and long packets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MecServerSpec {
    /// CPU cycles per slot.
    pub s_rate: f64,
    pub c_s: f64,
    pub c_l_mean: f64,
    pub lambda_long: f64,
    pub lambda_short_sum: f64,
}

/// Pareto law of the long/short cycle ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoWorkload {
    pub c0_ratio: f64,
    pub v: f64,
}

impl ParetoWorkload {
    pub fn new(c0_ratio: f64, v: f64) -> Result<Self, QueueError> {
        if !(v > 1.0 && v < 2.0) {
            return Err(QueueError::Domain { what: "v", value: v });
        }
        if !(c0_ratio >= 1.0 && c0_ratio.is_finite()) {
            return Err(QueueError::Domain { what: "c0_ratio", value: c0_ratio });
        }
        Ok(Self { c0_ratio, v })
    }

    /// Tail constant `p_A = c0_ratio^v`.
    pub fn p_a(&self) -> f64 {
        self.c0_ratio.powf(self.v)
    }

    /// Mean cycle ratio `v c0 / (v - 1)`.
    pub fn mean_ratio(&self) -> f64 {
        self.v * self.c0_ratio / (self.v - 1.0)
    }
}

/// How per-link losses are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Exact,
    #[default]
    Linearized,
}

fn clamp01(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// `Pr{queueing delay > i}` for Geo/D/1 FCFS, valid for `0 <= i <= d_loc - 1`.
pub fn geo_d1_ccdf(lambda0: f64, d_loc: u32, i: u32) -> Result<f64, QueueError> {
    if d_loc == 0 {
        return Err(QueueError::Domain { what: "d_loc", value: 0.0 });
    }
    if !(0.0..1.0).contains(&lambda0) {
        return Err(QueueError::Domain { what: "lambda0", value: lambda0 });
    }
    let load = lambda0 * d_loc as f64;
    if load >= 1.0 {
        return Err(QueueError::Domain { what: "lambda0 * d_loc", value: load });
    }
    if i >= d_loc {
        return Err(QueueError::OutsideWindow { i, max: d_loc - 1 });
    }
    let growth = (-(i as f64 + 1.0) * (-lambda0).ln_1p()).exp();
    Ok(clamp01(1.0 - growth * (1.0 - load)))
}

/// Probability that a locally processed packet misses `d_max`.
pub fn local_violation_prob(spec: &LocalServerSpec, d_max: u32) -> Result<f64, QueueError> {
    if d_max < spec.d_loc {
        return Ok(1.0);
    }
    geo_d1_ccdf(spec.lambda0, spec.d_loc, d_max - spec.d_loc)
}

/// Workload `rho` of a MEC server.
pub fn mec_workload(spec: &MecServerSpec) -> f64 {
    (spec.lambda_short_sum * spec.c_s + spec.lambda_long * spec.c_l_mean) / spec.s_rate
}

/// Approximate CCDF `rho^q` of the short-packet processing delay in quanta.
pub fn ps_short_ccdf(rho: f64, q: f64) -> f64 {
    if rho >= 1.0 || rho.is_nan() {
        return 1.0;
    }
    if q <= 0.0 {
        return 1.0;
    }
    clamp01(rho.max(0.0).powf(q))
}

/// Exponent of `rho` in the MEC deadline-violation probability.
pub fn mec_exponent(spec: &MecServerSpec, d_max: u32) -> f64 {
    spec.s_rate * (d_max as f64 - 2.0) / spec.c_s - 1.0
}

/// Probability that an offloaded packet misses the processing deadline.
pub fn mec_violation_prob(spec: &MecServerSpec, d_max: u32) -> f64 {
    mec_violation_from_rho(mec_workload(spec), mec_exponent(spec, d_max))
}

/// [`mec_violation_prob`] given the workload and exponent directly.
pub fn mec_violation_from_rho(rho: f64, exponent: f64) -> f64 {
    if !(rho < 1.0) || exponent < 0.0 {
        return 1.0;
    }
    if rho <= 0.0 {
        return if exponent > 0.0 { 0.0 } else { 1.0 };
    }
    clamp01(rho.powf(exponent))
}

/// Overall packet loss of an offloaded packet.
pub fn overall_loss(eps_u: f64, eps_d: f64, eps_mec: f64, mode: LossMode) -> f64 {
    match mode {
        LossMode::Exact => clamp01(1.0 - (1.0 - eps_u) * (1.0 - eps_d) * (1.0 - eps_mec)),
        LossMode::Linearized => clamp01(offload_loss(eps_u, eps_d, eps_mec)),
    }
}

/// The linearized sum used by every solver. Kept as one function so solver
/// and oracle compare identical floating-point values.
#[inline]
pub fn offload_loss(eps_u: f64, eps_d: f64, eps_mec: f64) -> f64 {
    eps_u + eps_d + eps_mec
}

/// Heavy-tail asymptote of the long-packet processing delay beyond `x` slots.
pub fn long_tail_asymptote(pw: &ParetoWorkload, spec: &MecServerSpec, x: f64) -> Result<f64, QueueError> {
    if !(x > 0.0) {
        return Err(QueueError::Domain { what: "x", value: x });
    }
    let rho = mec_workload(spec);
    if !(rho < 1.0) {
        return Err(QueueError::Domain { what: "rho", value: rho });
    }
    let v = pw.v;
    let speed = spec.s_rate / spec.c_s;
    Ok(pw.p_a() * speed.powf(-v) * (1.0 - rho).powf(-v) * x.powf(-v))
}

/// Largest local arrival rate whose deadline-violation probability stays
/// within `eps_th`, to absolute tolerance `1e-12`.
pub fn max_local_rate(d_loc: u32, d_max: u32, eps_th: f64) -> Result<f64, QueueError> {
    if d_loc == 0 {
        return Err(QueueError::Domain { what: "d_loc", value: 0.0 });
    }
    if !(eps_th > 0.0 && eps_th < 1.0) {
        return Err(QueueError::Domain { what: "eps_th", value: eps_th });
    }
    if d_max < d_loc {
        return Ok(0.0);
    }
    let i = d_max - d_loc;
    if i >= d_loc {
        return Err(QueueError::OutsideWindow { i, max: d_loc - 1 });
    }
    let limit = 1.0 / d_loc as f64;
    let violation = |lam: f64| geo_d1_ccdf(lam, d_loc, i).unwrap_or(1.0);
    let (mut lo, mut hi) = (0.0f64, limit);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid >= limit {
            break;
        }
        if violation(mid) <= eps_th {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
