use serde::{Deserialize, Serialize};

use super::model::{Allocation, ErrorTables, Scenario, WorkloadBasis};
use super::subproblem::{assign_and_allocate, min_subcarriers_device, SubproblemMode};
use super::{OptError, SolveMode, SolveReport, SolveStatus};
use crate::exec::{self, Execution};
use crate::queueing::max_local_rate;

/// Spacing of the thresholds tried by the bisection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectionScale {
    /// Arithmetic midpoints; stops once `UB - LB <= delta_eps`.
    #[default]
    Linear,
    /// Geometric midpoints; stops once `ln(UB / LB) <= log_tol`.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlbOptions {
    pub eps_init: f64,
    pub delta_eps: f64,
    pub scale: BisectionScale,
    /// Lower end of the bracket in log mode, treated as infeasible.
    pub log_floor: f64,
    pub log_tol: f64,
    pub max_iterations: usize,
    pub subproblem: SubproblemMode,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for PlbOptions {
    fn default() -> Self {
        Self {
            eps_init: 1.0,
            delta_eps: 1e-9,
            scale: BisectionScale::Linear,
            log_floor: 1e-300,
            log_tol: 1e-3,
            max_iterations: 2000,
            subproblem: SubproblemMode::Exact,
            exec: Execution::default(),
        }
    }
}

impl PlbOptions {
    pub fn log_scale() -> Self {
        Self { scale: BisectionScale::Log, ..Self::default() }
    }

    fn validate(&self) -> Result<(), OptError> {
        let ok = self.eps_init > 0.0
            && self.eps_init.is_finite()
            && self.delta_eps > 0.0
            && self.log_tol > 0.0
            && self.log_floor > 0.0
            && self.log_floor < self.eps_init;
        if ok {
            Ok(())
        } else {
            Err(OptError::Precondition(format!("invalid bisection options {self:?}")))
        }
    }
}

/// Bracket state at the start of one bisection step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub eps_lb: f64,
    pub eps_ub: f64,
    pub eps_th: f64,
    pub feasible: bool,
    /// Subcarriers the candidate would need; `None` if some device has no option.
    pub subcarriers_used: Option<u32>,
}

struct Probe {
    feasible: Option<Allocation>,
    used: Option<u32>,
}

struct Bisection {
    status: SolveStatus,
    ub: Option<f64>,
    best: Option<Allocation>,
    trace: Vec<TraceEntry>,
}

fn bisect(opts: &PlbOptions, mut probe: impl FnMut(f64) -> Result<Probe, OptError>) -> Result<Bisection, OptError> {
    opts.validate()?;
    let init = probe(opts.eps_init)?;
    let Some(mut best) = init.feasible else {
        return Ok(Bisection { status: SolveStatus::InfeasibleAtInit, ub: None, best: None, trace: Vec::new() });
    };
    let mut trace = Vec::new();
    // Linear mode keeps the bracket as exact dyadic fractions of eps_init.
    let (mut lo, mut hi) = match opts.scale {
        BisectionScale::Linear => (0.0, 1.0),
        BisectionScale::Log => (opts.log_floor.ln(), opts.eps_init.ln()),
    };
    let bounds = |lo: f64, hi: f64| match opts.scale {
        BisectionScale::Linear => (opts.eps_init * lo, opts.eps_init * hi),
        BisectionScale::Log => (lo.exp(), hi.exp()),
    };
    let status = loop {
        let done = match opts.scale {
            BisectionScale::Linear => opts.eps_init * (hi - lo) <= opts.delta_eps,
            BisectionScale::Log => hi - lo <= opts.log_tol,
        };
        if done {
            break SolveStatus::Converged;
        }
        if trace.len() >= opts.max_iterations {
            break SolveStatus::IterationLimit;
        }
        let mid = 0.5 * (lo + hi);
        let (eps_lb, eps_ub) = bounds(lo, hi);
        let eps_th = match opts.scale {
            BisectionScale::Linear => opts.eps_init * mid,
            BisectionScale::Log => mid.exp(),
        };
        let p = probe(eps_th)?;
        trace.push(TraceEntry {
            iteration: trace.len() + 1,
            eps_lb,
            eps_ub,
            eps_th,
            feasible: p.feasible.is_some(),
            subcarriers_used: p.used,
        });
        match p.feasible {
            Some(a) => {
                best = a;
                hi = mid;
            }
            None => lo = mid,
        }
    };
    Ok(Bisection { status, ub: Some(bounds(lo, hi).1), best: Some(best), trace })
}

fn report(
    mode: SolveMode,
    b: Bisection,
    scen: &Scenario,
    tables: &ErrorTables,
    basis: WorkloadBasis,
) -> Result<SolveReport, OptError> {
    SolveReport::assemble(mode, b.status, b.ub, b.best, scen, tables, basis, b.trace)
}

fn tables_for(scen: &Scenario, tables: Option<&ErrorTables>, exec: Execution) -> Result<ErrorTables, OptError> {
    scen.validate()?;
    match tables {
        Some(t) => Ok(t.clone()),
        None => ErrorTables::build(scen, exec),
    }
}

/// Bisection on the loss target where every device offloads everything and
/// each MEC server is charged its worst-case workload.
pub fn plb_solve(scen: &Scenario, tables: Option<&ErrorTables>, opts: &PlbOptions) -> Result<SolveReport, OptError> {
    if !scen.typical_scenario {
        return Err(OptError::Precondition(
            "plb assumes negligible short-packet load; set typical_scenario".into(),
        ));
    }
    let tables = tables_for(scen, tables, opts.exec)?;
    let eps_mec: Vec<f64> = (0..scen.num_aps()).map(|m| scen.eps_mec(m, scen.rho_ub(m))).collect();
    let b = bisect(opts, |eps_th| {
        let choices = assign_and_allocate(eps_th, &eps_mec, scen, &tables, opts.subproblem, opts.exec)?;
        let Some(choices) = choices.into_iter().collect::<Option<Vec<_>>>() else {
            return Ok(Probe { feasible: None, used: None });
        };
        let mut alloc = Allocation::empty(scen.num_devices());
        for (k, c) in choices.iter().enumerate() {
            alloc.association[k] = Some(c.ap);
            alloc.offload_rates[k] = scen.lambda_u[k];
            alloc.subcarriers_ul[k] = c.n_u;
            alloc.subcarriers_dl[k] = c.n_d;
        }
        let used = alloc.total_subcarriers();
        let feasible = (used <= scen.n_max).then_some(alloc);
        Ok(Probe { feasible, used: Some(used) })
    })?;
    report(SolveMode::Plb, b, scen, &tables, WorkloadBasis::UpperBound)
}

/// Highest local rate device `k` can keep within `eps_th`.
fn local_capacity(scen: &Scenario, k: usize, eps_th: f64) -> Result<f64, OptError> {
    if eps_th >= 1.0 {
        return Ok(scen.lambda_u[k]);
    }
    Ok(max_local_rate(scen.d_loc[k], scen.d_max, eps_th)?)
}

/// Splits each device's traffic so the local part meets `eps_th` on its own.
fn local_split(scen: &Scenario, eps_th: f64) -> Result<Allocation, OptError> {
    let mut alloc = Allocation::empty(scen.num_devices());
    for k in 0..scen.num_devices() {
        let cap = local_capacity(scen, k, eps_th)?;
        if cap >= scen.lambda_u[k] {
            alloc.local_rates[k] = scen.lambda_u[k];
        } else {
            alloc.local_rates[k] = cap;
            alloc.offload_rates[k] = scen.lambda_u[k] - cap;
        }
    }
    Ok(alloc)
}

/// Subcarriers for a fixed association, given the resulting workloads.
fn allocate_fixed(
    mut alloc: Allocation,
    eps_th: f64,
    scen: &Scenario,
    tables: &ErrorTables,
    mode: SubproblemMode,
    exec: Execution,
) -> Result<Probe, OptError> {
    let rho = alloc.workloads(scen);
    let picks = exec::map_range(exec, scen.num_devices(), |k| match alloc.association[k] {
        Some(m) => min_subcarriers_device(k, m, scen.eps_mec(m, rho[m]), eps_th, scen, tables, mode).map(|p| p.map(Some)),
        None => Ok(Some(None)),
    });
    for (k, p) in picks.into_iter().enumerate() {
        match p? {
            None => return Ok(Probe { feasible: None, used: None }),
            Some(Some((nu, nd))) => {
                alloc.subcarriers_ul[k] = nu;
                alloc.subcarriers_dl[k] = nd;
            }
            Some(None) => {}
        }
    }
    let used = alloc.total_subcarriers();
    Ok(Probe { feasible: (used <= scen.n_max).then_some(alloc), used: Some(used) })
}

/// Bisection where each step keeps as much traffic local as the target
/// allows, associates devices one by one against the running workloads, and
/// then sizes subcarriers for the final workloads.
pub fn extended_plb_solve(
    scen: &Scenario,
    tables: Option<&ErrorTables>,
    opts: &PlbOptions,
) -> Result<SolveReport, OptError> {
    let tables = tables_for(scen, tables, opts.exec)?;
    let mm = scen.num_aps();
    let base: Vec<f64> = (0..mm).map(|m| scen.base_workload(m)).collect();
    let eps_mec_base: Vec<f64> = (0..mm).map(|m| scen.eps_mec(m, base[m])).collect();
    let b = bisect(opts, |eps_th| {
        let mut alloc = local_split(scen, eps_th)?;
        // Subcarrier counts each device would use if short packets did not
        // load the servers; radio errors at every AP are compared at them.
        let typical = assign_and_allocate(eps_th, &eps_mec_base, scen, &tables, opts.subproblem, opts.exec)?;
        let mut arrivals = vec![0.0; mm];
        for k in 0..scen.num_devices() {
            if alloc.offload_rates[k] <= 0.0 {
                continue;
            }
            let mut best = (0usize, f64::INFINITY);
            for m in 0..mm {
                let radio = match typical[k] {
                    Some(c) => tables.eps_u(k, m, c.n_u) + tables.eps_d(k, m, c.n_d),
                    None => 1.0,
                };
                let score = radio + scen.eps_mec(m, scen.workload(m, arrivals[m]));
                if score < best.1 {
                    best = (m, score);
                }
            }
            alloc.association[k] = Some(best.0);
            arrivals[best.0] += alloc.offload_rates[k];
        }
        allocate_fixed(alloc, eps_th, scen, &tables, opts.subproblem, opts.exec)
    })?;
    report(SolveMode::Extended, b, scen, &tables, WorkloadBasis::Actual)
}

/// Bisection with the association held fixed; devices mapped to `None` keep
/// all traffic local, the rest offload everything.
pub fn fixed_association_solve(
    scen: &Scenario,
    association: &[Option<usize>],
    mode: SolveMode,
    tables: Option<&ErrorTables>,
    opts: &PlbOptions,
) -> Result<SolveReport, OptError> {
    let tables = tables_for(scen, tables, opts.exec)?;
    if association.len() != scen.num_devices() || association.iter().flatten().any(|&m| m >= scen.num_aps()) {
        return Err(OptError::Precondition("association does not match the scenario".into()));
    }
    let mut template = Allocation::empty(scen.num_devices());
    for (k, a) in association.iter().enumerate() {
        template.association[k] = *a;
        if a.is_some() {
            template.offload_rates[k] = scen.lambda_u[k];
        } else {
            template.local_rates[k] = scen.lambda_u[k];
        }
    }
    let local_loss: Vec<f64> =
        (0..scen.num_devices()).map(|k| scen.eps_loc(k, template.local_rates[k])).collect::<Result<_, _>>()?;
    let b = bisect(opts, |eps_th| {
        if local_loss.iter().any(|&l| l > eps_th) {
            return Ok(Probe { feasible: None, used: None });
        }
        allocate_fixed(template.clone(), eps_th, scen, &tables, opts.subproblem, opts.exec)
    })?;
    report(mode, b, scen, &tables, WorkloadBasis::Actual)
}
