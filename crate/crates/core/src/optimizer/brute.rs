//! Exhaustive search, used as an oracle for the bisection solvers.

use serde::{Deserialize, Serialize};

use super::model::{Allocation, ErrorTables, Scenario, WorkloadBasis};
use super::{OptError, SolveMode, SolveReport, SolveStatus};
use crate::exec::Execution;
use crate::queueing::offload_loss;

pub const BRUTE_MAX_DEVICES: usize = 4;
pub const BRUTE_MAX_APS: usize = 3;
pub const BRUTE_MAX_NC: u32 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BruteObjective {
    /// Everything offloaded, servers charged their worst-case workload.
    Typical,
    /// Local processing allowed; `local_fractions` lists the shares of
    /// `lambda_u` a device may keep while offloading the rest, besides the
    /// all-local choice.
    General { local_fractions: Vec<f64> },
}

impl BruteObjective {
    pub fn general_default() -> Self {
        BruteObjective::General { local_fractions: vec![0.0, 0.25, 0.5, 0.75] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteResult {
    /// Smallest achievable worst-device loss, `None` if nothing is feasible.
    pub value: Option<f64>,
    pub allocation: Option<Allocation>,
    pub leaves: u64,
}

impl BruteResult {
    pub fn into_report(self, scen: &Scenario, tables: &ErrorTables, objective: &BruteObjective) -> Result<SolveReport, OptError> {
        let status = if self.value.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
        let basis = match objective {
            BruteObjective::Typical => WorkloadBasis::UpperBound,
            BruteObjective::General { .. } => WorkloadBasis::Actual,
        };
        SolveReport::assemble(SolveMode::Brute, status, self.value, self.allocation, scen, tables, basis, Vec::new())
    }
}

#[derive(Clone, Copy)]
struct Radio {
    loss: f64,
    n_u: u32,
    n_d: u32,
}

/// Radio options of one device at one AP under a fixed MEC violation
/// probability, cheapest loss first.
fn radio_options(tables: &ErrorTables, k: usize, m: usize, eps_mec: f64) -> Vec<Radio> {
    let n_c = tables.n_c();
    let mut v = Vec::with_capacity((n_c * n_c) as usize);
    for n_u in 1..=n_c {
        for n_d in 1..=n_c {
            v.push(Radio { loss: offload_loss(tables.eps_u(k, m, n_u), tables.eps_d(k, m, n_d), eps_mec), n_u, n_d });
        }
    }
    v.sort_by(|a, b| a.loss.total_cmp(&b.loss));
    v
}

struct Search<'a> {
    options: &'a [Vec<Radio>],
    floor: &'a [f64],
    n_max: u32,
    best: f64,
    best_pick: Option<Vec<usize>>,
    pick: Vec<usize>,
    leaves: u64,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, used: u32, worst: f64, min_rest: u32) {
        if k == self.options.len() {
            self.leaves += 1;
            if worst < self.best {
                self.best = worst;
                self.best_pick = Some(self.pick.clone());
            }
            return;
        }
        let opts = &self.options[k];
        let worst = worst.max(self.floor[k]);
        if worst >= self.best {
            return;
        }
        let needs_radio = !opts.is_empty();
        let rest = if needs_radio { min_rest - 2 } else { min_rest };
        if !needs_radio {
            self.pick[k] = usize::MAX;
            self.dfs(k + 1, used, worst, rest);
            return;
        }
        for (i, o) in opts.iter().enumerate() {
            if o.loss.max(worst) >= self.best {
                break;
            }
            let u = used + o.n_u + o.n_d;
            if u + rest > self.n_max {
                continue;
            }
            self.pick[k] = i;
            self.dfs(k + 1, u, o.loss.max(worst), rest);
        }
    }
}

/// Runs the branch-and-bound over subcarriers for one fixed association.
/// `options[k]` is empty for devices that stay local.
fn search(options: &[Vec<Radio>], floor: &[f64], n_max: u32, incumbent: f64) -> (f64, Option<Vec<usize>>, u64) {
    let min_rest = 2 * options.iter().filter(|o| !o.is_empty()).count() as u32;
    if min_rest > n_max {
        return (incumbent, None, 0);
    }
    let mut s = Search {
        options,
        floor,
        n_max,
        best: incumbent,
        best_pick: None,
        pick: vec![0; options.len()],
        leaves: 0,
    };
    s.dfs(0, 0, 0.0, min_rest);
    (s.best, s.best_pick, s.leaves)
}

/// Device plan in the general objective: `None` is all-local, otherwise
/// `(ap, local share)`.
type Plan = Option<(usize, f64)>;

/// Minimizes the worst device loss by enumerating every association,
/// offload split (general objective) and subcarrier pair.
pub fn brute_force_solve(
    scen: &Scenario,
    objective: &BruteObjective,
    tables: Option<&ErrorTables>,
) -> Result<BruteResult, OptError> {
    scen.validate()?;
    let (kk, mm) = (scen.num_devices(), scen.num_aps());
    if kk > BRUTE_MAX_DEVICES || mm > BRUTE_MAX_APS || scen.n_c > BRUTE_MAX_NC {
        return Err(OptError::TooLarge(format!(
            "K = {kk}, M = {mm}, n_c = {} (limits {BRUTE_MAX_DEVICES}, {BRUTE_MAX_APS}, {BRUTE_MAX_NC})",
            scen.n_c
        )));
    }
    let tables = match tables {
        Some(t) => t.clone(),
        None => ErrorTables::build(scen, Execution::Sequential)?,
    };
    let mut plans_per_device: Vec<Vec<Plan>> = Vec::with_capacity(kk);
    for _ in 0..kk {
        let mut plans = Vec::new();
        match objective {
            BruteObjective::Typical => plans.extend((0..mm).map(|m| Some((m, 0.0)))),
            BruteObjective::General { local_fractions } => {
                plans.push(None);
                for m in 0..mm {
                    plans.extend(local_fractions.iter().map(|&f| Some((m, f))));
                }
            }
        }
        plans_per_device.push(plans);
    }
    let eps_mec_ub: Vec<f64> = (0..mm).map(|m| scen.eps_mec(m, scen.rho_ub(m))).collect();

    let mut best = f64::INFINITY;
    let mut best_alloc = None;
    let mut leaves = 0u64;
    let mut idx = vec![0usize; kk];
    loop {
        let plans: Vec<Plan> = idx.iter().enumerate().map(|(k, &i)| plans_per_device[k][i]).collect();
        let mut alloc = Allocation::empty(kk);
        for (k, p) in plans.iter().enumerate() {
            match p {
                None => alloc.local_rates[k] = scen.lambda_u[k],
                Some((m, f)) => {
                    alloc.association[k] = Some(*m);
                    alloc.local_rates[k] = f * scen.lambda_u[k];
                    alloc.offload_rates[k] = scen.lambda_u[k] - alloc.local_rates[k];
                }
            }
        }
        let eps_mec: Vec<f64> = match objective {
            BruteObjective::Typical => eps_mec_ub.clone(),
            BruteObjective::General { .. } => {
                let rho = alloc.workloads(scen);
                (0..mm).map(|m| scen.eps_mec(m, rho[m])).collect()
            }
        };
        let floor: Vec<f64> = (0..kk).map(|k| scen.eps_loc(k, alloc.local_rates[k])).collect::<Result<_, _>>()?;
        let options: Vec<Vec<Radio>> = (0..kk)
            .map(|k| match alloc.association[k] {
                Some(m) => radio_options(&tables, k, m, eps_mec[m]),
                None => Vec::new(),
            })
            .collect();
        let (value, pick, n) = search(&options, &floor, scen.n_max, best);
        leaves += n;
        if let Some(pick) = pick {
            best = value;
            for (k, &i) in pick.iter().enumerate() {
                if i != usize::MAX {
                    alloc.subcarriers_ul[k] = options[k][i].n_u;
                    alloc.subcarriers_dl[k] = options[k][i].n_d;
                }
            }
            best_alloc = Some(alloc);
        }
        // Odometer over the per-device plans.
        let mut k = 0;
        while k < kk {
            idx[k] += 1;
            if idx[k] < plans_per_device[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == kk {
            break;
        }
    }
    Ok(BruteResult { value: best_alloc.as_ref().map(|_| best), allocation: best_alloc, leaves })
}
