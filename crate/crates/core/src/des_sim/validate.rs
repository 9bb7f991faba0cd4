use serde::{Deserialize, Serialize};

use super::{
    run_replications, ArrivalKind, ArrivalSpec, Discipline, EmpiricalCcdf, JobClass, PacketClass, SimConfig,
    SimError, Work,
};
use crate::exec::Execution;
use crate::queueing::{ps_short_ccdf, ParetoWorkload};

/// Rows with fewer expected exceedances than this are flagged unreliable.
pub const RELIABLE_MIN_EVENTS: f64 = 30.0;

/// Packets per replication; fixed so results do not depend on thread count.
const PACKETS_PER_REPLICATION: u64 = 1_250_000;

/// Smallest model probability that still gets a row.
const MODEL_FLOOR: f64 = 1e-6;

/// One MEC server fed by short-packet and long-packet sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsValidationSetup {
    pub arrival_kind: ArrivalKind,
    pub short_rates: Vec<f64>,
    pub long_rates: Vec<f64>,
    /// Cycles per short packet.
    pub c_s: f64,
    /// Server capacity (cycles per slot).
    pub s_rate: f64,
    pub pareto: ParetoWorkload,
}

impl PsValidationSetup {
    /// Ten short and ten long sources at 0.01 packets/slot each,
    /// `S / c_s = 5`, Pareto `v = 1.5`, `c0 / c_s = 10`.
    pub fn fig5(arrival_kind: ArrivalKind) -> Self {
        Self {
            arrival_kind,
            short_rates: vec![0.01; 10],
            long_rates: vec![0.01; 10],
            c_s: 1.0,
            s_rate: 5.0,
            pareto: ParetoWorkload { c0_ratio: 10.0, v: 1.5 },
        }
    }

    pub fn rho(&self) -> f64 {
        let short: f64 = self.short_rates.iter().sum();
        let long: f64 = self.long_rates.iter().sum();
        (short * self.c_s + long * self.c_s * self.pareto.mean_ratio()) / self.s_rate
    }

    pub fn sim_config(&self, discipline: Discipline, n_packets: u64, seed: u64) -> SimConfig {
        let mut rates = self.short_rates.clone();
        rates.extend_from_slice(&self.long_rates);
        let short = JobClass { class: PacketClass::Short, work: Work::Deterministic { cycles: self.c_s } };
        let long = JobClass {
            class: PacketClass::Long,
            work: Work::Pareto { c0: self.c_s * self.pareto.c0_ratio, v: self.pareto.v },
        };
        let mut classes = vec![short; self.short_rates.len()];
        classes.extend(std::iter::repeat_n(long, self.long_rates.len()));
        SimConfig::new(
            ArrivalSpec { kind: self.arrival_kind, rates },
            classes,
            discipline,
            self.s_rate,
            n_packets,
            seed,
        )
    }

    /// Delay (slots) at which the model predicts `rho^q`.
    pub fn probe_time(&self, q: u32) -> f64 {
        self.c_s * (q as f64 + 1.0) / self.s_rate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsValidationRow {
    pub q: u32,
    pub t_slots: f64,
    pub prob_model: f64,
    pub prob_empirical: f64,
    pub stderr: f64,
    pub reliable: bool,
    /// Whether this row counts toward the verdict (empirical >= 1e-3 and reliable).
    pub checked: bool,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsValidationReport {
    pub rho: f64,
    pub short_samples: usize,
    pub rows: Vec<PsValidationRow>,
    pub passed: bool,
}

/// Pooled short and long delays under `discipline`. The packet budget is
/// split into fixed-size replications seeded `seed`, `seed + 1`, ...
pub fn simulate_discipline(
    setup: &PsValidationSetup,
    discipline: Discipline,
    n_packets: u64,
    seed: u64,
    exec: Execution,
) -> Result<(Option<EmpiricalCcdf>, Option<EmpiricalCcdf>), SimError> {
    let reps = n_packets.div_ceil(PACKETS_PER_REPLICATION).max(1);
    let per = n_packets.div_ceil(reps);
    let cfg = setup.sim_config(discipline, per, seed);
    run_replications(&cfg, reps as usize, exec)
}

/// Pooled short-packet delays of the PS server.
pub fn ps_short_ccdf_empirical(
    setup: &PsValidationSetup,
    n_packets: u64,
    seed: u64,
    exec: Execution,
) -> Result<EmpiricalCcdf, SimError> {
    let (short, _) = simulate_discipline(setup, Discipline::Ps, n_packets, seed, exec)?;
    short.ok_or_else(|| SimError::InvalidConfig("no short packets were generated".into()))
}

/// Compares the simulated short-packet PS delay against `rho^q`, read as
/// `Pr{W >= c_s (q + 1) / S}`.
///
/// A row is within tolerance when `|model - empirical| <= 3 stderr + 0.2 model`.
pub fn validate_ps_approximation(
    setup: &PsValidationSetup,
    n_packets: u64,
    seed: u64,
    exec: Execution,
) -> Result<PsValidationReport, SimError> {
    let rho = setup.rho();
    let short = ps_short_ccdf_empirical(setup, n_packets, seed, exec)?;
    Ok(report_from_ccdf(setup, rho, &short))
}

/// Builds the validation rows from an already simulated short-packet CCDF.
pub fn report_from_ccdf(setup: &PsValidationSetup, rho: f64, short: &EmpiricalCcdf) -> PsValidationReport {
    let n = short.count() as f64;
    let mut rows = Vec::new();
    for q in 0..=500u32 {
        let model = ps_short_ccdf(rho, q as f64);
        if model < MODEL_FLOOR {
            break;
        }
        let t = setup.probe_time(q);
        // A packet that sees q others needs about (q + 1) quanta, so rho^q is
        // the mass at or beyond t; PS delays have atoms exactly at t.
        let emp = short.query_at_least(t * (1.0 - 1e-9));
        let se = short.binomial_std_error(emp);
        let reliable = n * emp.min(1.0 - emp).max(model.min(1.0 - model)) >= RELIABLE_MIN_EVENTS;
        let checked = reliable && emp >= 1e-3;
        let within = (model - emp).abs() <= 3.0 * se + 0.2 * model;
        rows.push(PsValidationRow {
            q,
            t_slots: t,
            prob_model: model,
            prob_empirical: emp,
            stderr: se,
            reliable,
            checked,
            within_tolerance: within,
        });
    }
    let passed = rows.iter().all(|r| !r.checked || r.within_tolerance);
    PsValidationReport { rho, short_samples: short.count(), rows, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig5_load() {
        let s = PsValidationSetup::fig5(ArrivalKind::Poisson);
        assert!((s.rho() - 0.62).abs() < 1e-12);
        assert_eq!(s.probe_time(4), 1.0);
    }

    #[test]
    fn idle_server_edge() {
        // A lone deterministic job never exceeds its own service time.
        let setup = PsValidationSetup { short_rates: vec![1e-9], long_rates: vec![], ..PsValidationSetup::fig5(ArrivalKind::Poisson) };
        let ccdf = EmpiricalCcdf::from_samples(vec![0.2; 100], 0).unwrap();
        let r = report_from_ccdf(&setup, 0.0, &ccdf);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].prob_empirical, 1.0);
        assert!(r.passed);
    }
}
