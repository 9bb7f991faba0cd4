//! Association, offloading and subcarrier allocation that minimize the
//! worst device's packet loss probability.

mod assoc;
mod brute;
mod model;
mod plb;
mod subproblem;

use serde::{Deserialize, Serialize};

pub use assoc::{assoc_comm_bottleneck, assoc_comp_bottleneck, CompAssociation};
pub use brute::{brute_force_solve, BruteObjective, BruteResult, BRUTE_MAX_APS, BRUTE_MAX_DEVICES, BRUTE_MAX_NC};
pub use model::{device_breakdown, device_loss, Allocation, DeviceBreakdown, ErrorTables, Scenario, WorkloadBasis};
pub use plb::{
    extended_plb_solve, fixed_association_solve, plb_solve, BisectionScale, PlbOptions, TraceEntry,
};
pub use subproblem::{assign_and_allocate, min_subcarriers_device, min_subcarriers_pair, DeviceChoice, SubproblemMode};

use crate::channel_phy::PhyError;
use crate::queueing::QueueError;

#[derive(Debug, thiserror::Error)]
pub enum OptError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("MEC workload {rho} is not below 1")]
    Unstable { rho: f64 },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Bisection under the typical-scenario workload bound.
    Plb,
    /// Bisection with local offloading and sequential association.
    Extended,
    /// Strongest-AP association, subcarriers by bisection.
    Comm,
    /// Workload-balancing association, subcarriers by bisection.
    Comp,
    /// Exhaustive search on a small instance.
    Brute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The bracket closed to the requested width.
    Converged,
    /// The iteration cap was hit first; `epsilon_a` is still certified.
    IterationLimit,
    /// Nothing is feasible even at the initial upper bound.
    InfeasibleAtInit,
    /// Exhaustive search found the optimum.
    Optimal,
    /// Exhaustive search found no feasible point.
    Infeasible,
}

impl SolveStatus {
    pub fn is_feasible(self) -> bool {
        !matches!(self, SolveStatus::InfeasibleAtInit | SolveStatus::Infeasible)
    }
}

/// Outcome of a solve, serialized as the `optimize` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub status: SolveStatus,
    /// Certified upper bound on the worst device loss; `None` when infeasible.
    pub epsilon_a: Option<f64>,
    /// Worst device loss actually reached by the returned allocation.
    pub max_device_loss: Option<f64>,
    pub association: Vec<Option<usize>>,
    pub offload_rates: Vec<f64>,
    pub local_rates: Vec<f64>,
    pub subcarriers_ul: Vec<u32>,
    pub subcarriers_dl: Vec<u32>,
    pub subcarriers_used: u32,
    pub workloads: Vec<f64>,
    pub workload_basis: WorkloadBasis,
    pub per_device_breakdown: Vec<DeviceBreakdown>,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        mode: SolveMode,
        status: SolveStatus,
        epsilon_a: Option<f64>,
        alloc: Option<Allocation>,
        scen: &Scenario,
        tables: &ErrorTables,
        basis: WorkloadBasis,
        trace: Vec<TraceEntry>,
    ) -> Result<Self, OptError> {
        let (alloc, breakdown) = match alloc {
            Some(a) => {
                let b = device_breakdown(&a, scen, tables, basis)?;
                (a, b)
            }
            None => (Allocation::empty(scen.num_devices()), Vec::new()),
        };
        let max_device_loss = breakdown.iter().map(|b| b.loss).reduce(f64::max);
        Ok(Self {
            mode,
            status,
            epsilon_a,
            max_device_loss: if status.is_feasible() { max_device_loss } else { None },
            subcarriers_used: alloc.total_subcarriers(),
            workloads: alloc.workloads(scen),
            association: alloc.association,
            offload_rates: alloc.offload_rates,
            local_rates: alloc.local_rates,
            subcarriers_ul: alloc.subcarriers_ul,
            subcarriers_dl: alloc.subcarriers_dl,
            workload_basis: basis,
            per_device_breakdown: breakdown,
            iterations: trace.len(),
            trace,
        })
    }

    pub fn allocation(&self) -> Allocation {
        Allocation {
            association: self.association.clone(),
            offload_rates: self.offload_rates.clone(),
            local_rates: self.local_rates.clone(),
            subcarriers_ul: self.subcarriers_ul.clone(),
            subcarriers_dl: self.subcarriers_dl.clone(),
        }
    }
}
