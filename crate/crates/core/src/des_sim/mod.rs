//! Discrete-event simulation of a single server under FCFS and
//! processor-sharing disciplines.
//!
//! Every source owns a ChaCha8 stream (`seed`, stream = source index) from
//! which it draws both its inter-arrival gaps and its job sizes, so a run is
//! a pure function of its [`SimConfig`]. Bernoulli sources emit at integer
//! slot boundaries; simultaneous arrivals are ordered by source index. A
//! completion and an arrival at the same instant are processed completion
//! first.

mod ccdf;
mod validate;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::queueing::ParetoWorkload;

pub use ccdf::{write_ccdf_csv, CcdfRow, EmpiricalCcdf};
pub use validate::{
    ps_short_ccdf_empirical, report_from_ccdf, simulate_discipline, validate_ps_approximation, PsValidationReport,
    PsValidationRow, PsValidationSetup, RELIABLE_MIN_EVENTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("offered load {rho} >= 1; set allow_transient to run anyway")]
    Unstable { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    /// One arrival per slot with probability `rate`, at slot boundaries.
    Bernoulli,
    /// Continuous-time Poisson process with intensity `rate` per slot.
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    pub kind: ArrivalKind,
    /// Per-source rate (packets per slot).
    pub rates: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketClass {
    Short,
    Long,
}

impl PacketClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketClass::Short => "short",
            PacketClass::Long => "long",
        }
    }
}

/// Size law of a job, in CPU cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Work {
    Deterministic { cycles: f64 },
    Pareto { c0: f64, v: f64 },
}

impl Work {
    pub fn mean(&self) -> f64 {
        match *self {
            Work::Deterministic { cycles } => cycles,
            Work::Pareto { c0, v } => v * c0 / (v - 1.0),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Work::Deterministic { cycles } => cycles,
            Work::Pareto { c0, v } => {
                // 1 - U lies in (0, 1].
                let u = 1.0 - rng.random::<f64>();
                c0 * u.powf(-1.0 / v)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub class: PacketClass,
    pub work: Work,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discipline {
    /// Each source gets a dedicated FCFS server. Without explicit splits the
    /// capacity is shared in proportion to each source's offered work.
    FcfsIndividual { splits: Option<Vec<f64>> },
    /// One FCFS queue shared by all sources.
    FcfsMux,
    /// Egalitarian processor sharing.
    Ps,
}

impl Discipline {
    pub fn name(&self) -> &'static str {
        match self {
            Discipline::FcfsIndividual { .. } => "fcfs_individual",
            Discipline::FcfsMux => "fcfs_mux",
            Discipline::Ps => "ps",
        }
    }
}

/// Inverse-CDF draw of the long/short cycle ratio from `u` in (0, 1].
pub fn pareto_sample(pw: &ParetoWorkload, u: f64) -> f64 {
    pw.c0_ratio * u.powf(-1.0 / pw.v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub arrivals: ArrivalSpec,
    /// Job class of each source, parallel to `arrivals.rates`.
    pub classes: Vec<JobClass>,
    pub discipline: Discipline,
    /// Server capacity (cycles per slot).
    pub total_rate: f64,
    /// Packets measured after the warm-up.
    pub n_packets: u64,
    pub seed: u64,
    /// Packets discarded first; `None` means `max(10_000, n_packets / 100)`.
    pub warmup: Option<u64>,
    pub allow_transient: bool,
    /// Keep a per-packet log (FCFS disciplines only).
    pub record_trace: bool,
    /// Record the resident count seen by every k-th measured arrival
    /// (PS and FCFS-mux only).
    pub snapshot_every: Option<u64>,
}

impl SimConfig {
    pub fn new(
        arrivals: ArrivalSpec,
        classes: Vec<JobClass>,
        discipline: Discipline,
        total_rate: f64,
        n_packets: u64,
        seed: u64,
    ) -> Self {
        Self {
            arrivals,
            classes,
            discipline,
            total_rate,
            n_packets,
            seed,
            warmup: None,
            allow_transient: false,
            record_trace: false,
            snapshot_every: None,
        }
    }

    pub fn warmup_packets(&self) -> u64 {
        self.warmup.unwrap_or_else(|| (self.n_packets / 100).max(10_000))
    }

    /// Offered load `sum_k rate_k E[work_k] / total_rate`.
    pub fn offered_load(&self) -> f64 {
        self.arrivals
            .rates
            .iter()
            .zip(&self.classes)
            .map(|(r, c)| r * c.work.mean())
            .sum::<f64>()
            / self.total_rate
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.arrivals.rates.is_empty() {
            return bad("no sources".into());
        }
        if self.arrivals.rates.len() != self.classes.len() {
            return bad(format!(
                "{} arrival rates but {} job classes",
                self.arrivals.rates.len(),
                self.classes.len()
            ));
        }
        if self.n_packets == 0 {
            return bad("n_packets must be at least 1".into());
        }
        if !(self.total_rate.is_finite() && self.total_rate > 0.0) {
            return bad(format!("total_rate must be positive, got {}", self.total_rate));
        }
        for (k, &r) in self.arrivals.rates.iter().enumerate() {
            let ok = match self.arrivals.kind {
                ArrivalKind::Bernoulli => (0.0..1.0).contains(&r),
                ArrivalKind::Poisson => r.is_finite() && r > 0.0,
            };
            if !ok {
                return bad(format!("source {k}: rate {r} out of range"));
            }
        }
        if self.arrivals.rates.iter().all(|&r| r == 0.0) {
            return bad("every source has zero rate".into());
        }
        for (k, c) in self.classes.iter().enumerate() {
            let ok = match c.work {
                Work::Deterministic { cycles } => cycles.is_finite() && cycles > 0.0,
                Work::Pareto { c0, v } => c0.is_finite() && c0 > 0.0 && v > 1.0 && v < 2.0,
            };
            if !ok {
                return bad(format!("source {k}: invalid work law {:?}", c.work));
            }
        }
        if let Discipline::FcfsIndividual { splits: Some(s) } = &self.discipline {
            if s.len() != self.classes.len() {
                return bad("one split per source is required".into());
            }
            let sum: f64 = s.iter().sum();
            if (sum - self.total_rate).abs() > 1e-9 * self.total_rate {
                return bad(format!("splits sum to {sum}, expected {}", self.total_rate));
            }
            if s.iter().any(|&x| !(x > 0.0)) {
                return bad("splits must be positive".into());
            }
        }
        let rho = self.offered_load();
        if rho >= 1.0 && !self.allow_transient {
            return Err(SimError::Unstable { rho });
        }
        Ok(())
    }

    fn queue_rates(&self) -> Vec<f64> {
        match &self.discipline {
            Discipline::FcfsIndividual { splits: Some(s) } => s.clone(),
            Discipline::FcfsIndividual { splits: None } => {
                let loads: Vec<f64> = self
                    .arrivals
                    .rates
                    .iter()
                    .zip(&self.classes)
                    .map(|(r, c)| r * c.work.mean())
                    .collect();
                let total: f64 = loads.iter().sum();
                // Idle sources keep a nominal share so the vector stays positive.
                loads
                    .iter()
                    .map(|l| if *l > 0.0 { self.total_rate * l / total } else { self.total_rate })
                    .collect()
            }
            _ => vec![self.total_rate],
        }
    }
}

/// Per-packet log for FCFS runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub source: u32,
    pub arrival: f64,
    /// Service time on its server (slots).
    pub service: f64,
    pub departure: f64,
}

/// Busy-period work balance: capacity used versus work that arrived.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WorkCheck {
    pub busy_periods: u64,
    pub max_rel_error: f64,
}

impl WorkCheck {
    fn close(&mut self, capacity_used: f64, work: f64) {
        if work > 0.0 {
            self.busy_periods += 1;
            self.max_rel_error = self.max_rel_error.max((capacity_used - work).abs() / work);
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub short: Option<EmpiricalCcdf>,
    pub long: Option<EmpiricalCcdf>,
    pub offered_load: f64,
    pub work_check: WorkCheck,
    pub trace: Vec<TraceRecord>,
    /// Resident count (excluding the arriving packet) seen at sampled arrivals.
    pub snapshots: Vec<u32>,
}

impl SimOutput {
    pub fn class(&self, class: PacketClass) -> Option<&EmpiricalCcdf> {
        match class {
            PacketClass::Short => self.short.as_ref(),
            PacketClass::Long => self.long.as_ref(),
        }
    }
}

struct Arrival {
    time: f64,
    source: usize,
    work: f64,
}

/// Merged arrival stream of all sources.
struct ArrivalStream {
    kind: ArrivalKind,
    next: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    geometric: Vec<Option<Geometric>>,
    exp: Vec<Option<Exp<f64>>>,
    classes: Vec<JobClass>,
}

impl ArrivalStream {
    fn new(cfg: &SimConfig) -> Self {
        let n = cfg.arrivals.rates.len();
        let mut s = Self {
            kind: cfg.arrivals.kind,
            next: vec![f64::INFINITY; n],
            rngs: Vec::with_capacity(n),
            geometric: Vec::with_capacity(n),
            exp: Vec::with_capacity(n),
            classes: cfg.classes.clone(),
        };
        for (k, &r) in cfg.arrivals.rates.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            s.rngs.push(rng);
            s.geometric.push((r > 0.0 && s.kind == ArrivalKind::Bernoulli).then(|| Geometric::new(r).unwrap()));
            s.exp.push((r > 0.0 && s.kind == ArrivalKind::Poisson).then(|| Exp::new(r).unwrap()));
            // The first Bernoulli arrival may fall in slot 0.
            s.next[k] = s.gap(k) - if s.kind == ArrivalKind::Bernoulli { 1.0 } else { 0.0 };
        }
        s
    }

    fn gap(&mut self, k: usize) -> f64 {
        let rng = &mut self.rngs[k];
        match (self.geometric[k], self.exp[k]) {
            (Some(g), _) => (g.sample(rng) + 1) as f64,
            (_, Some(e)) => e.sample(rng),
            _ => f64::INFINITY,
        }
    }

    fn peek_time(&self) -> f64 {
        self.next.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn pop(&mut self) -> Arrival {
        let mut source = 0;
        for k in 1..self.next.len() {
            if self.next[k] < self.next[source] {
                source = k;
            }
        }
        let time = self.next[source];
        let work = self.classes[source].work.sample(&mut self.rngs[source]);
        self.next[source] = time + self.gap(source);
        Arrival { time, source, work }
    }
}

struct Recorder {
    warmup: u64,
    seen: u64,
    short: Vec<f64>,
    long: Vec<f64>,
    snapshot_every: Option<u64>,
    snapshots: Vec<u32>,
}

impl Recorder {
    fn measured(&self, index: u64) -> bool {
        index >= self.warmup
    }

    /// Called once per arrival, in arrival order; returns the packet index.
    fn on_arrival(&mut self, resident: usize) -> u64 {
        let index = self.seen;
        self.seen += 1;
        if let Some(every) = self.snapshot_every {
            if self.measured(index) && (index - self.warmup).is_multiple_of(every) {
                self.snapshots.push(resident as u32);
            }
        }
        index
    }

    fn on_departure(&mut self, index: u64, class: PacketClass, sojourn: f64) {
        if self.measured(index) {
            match class {
                PacketClass::Short => self.short.push(sojourn),
                PacketClass::Long => self.long.push(sojourn),
            }
        }
    }
}

/// Runs one replication.
pub fn run_queue_sim(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut arrivals = ArrivalStream::new(cfg);
    let total = cfg.warmup_packets() + cfg.n_packets;
    let mut rec = Recorder {
        warmup: cfg.warmup_packets(),
        seen: 0,
        short: Vec::new(),
        long: Vec::new(),
        snapshot_every: cfg.snapshot_every.filter(|&e| e > 0),
        snapshots: Vec::new(),
    };
    let mut trace = Vec::new();
    let work_check = match cfg.discipline {
        Discipline::Ps => run_ps(cfg, &mut arrivals, total, &mut rec),
        _ => run_fcfs(cfg, &mut arrivals, total, &mut rec, &mut trace),
    };
    Ok(SimOutput {
        short: EmpiricalCcdf::from_samples(rec.short, cfg.seed),
        long: EmpiricalCcdf::from_samples(rec.long, cfg.seed),
        offered_load: cfg.offered_load(),
        work_check,
        trace,
        snapshots: rec.snapshots,
    })
}

fn run_fcfs(
    cfg: &SimConfig,
    arrivals: &mut ArrivalStream,
    total: u64,
    rec: &mut Recorder,
    trace: &mut Vec<TraceRecord>,
) -> WorkCheck {
    let rates = cfg.queue_rates();
    let individual = matches!(cfg.discipline, Discipline::FcfsIndividual { .. });
    let n_queues = rates.len();
    let mut last_dep = vec![f64::NEG_INFINITY; n_queues];
    let mut busy_start = vec![0.0; n_queues];
    let mut busy_work = vec![0.0; n_queues];
    let mut check = WorkCheck::default();
    // Departure times of resident packets (mux only; FCFS departs in order).
    let mut resident: VecDeque<f64> = VecDeque::new();
    for _ in 0..total {
        let a = arrivals.pop();
        let q = if individual { a.source } else { 0 };
        if !individual {
            while resident.front().is_some_and(|&d| d <= a.time) {
                resident.pop_front();
            }
        }
        let index = rec.on_arrival(resident.len());
        if a.time >= last_dep[q] {
            check.close(rates[q] * (last_dep[q] - busy_start[q]), busy_work[q]);
            busy_start[q] = a.time;
            busy_work[q] = 0.0;
        }
        busy_work[q] += a.work;
        let service = a.work / rates[q];
        let departure = a.time.max(last_dep[q]) + service;
        last_dep[q] = departure;
        if !individual {
            resident.push_back(departure);
        }
        if cfg.record_trace {
            trace.push(TraceRecord { source: a.source as u32, arrival: a.time, service, departure });
        }
        rec.on_departure(index, arrivals.classes[a.source].class, departure - a.time);
    }
    for q in 0..n_queues {
        check.close(rates[q] * (last_dep[q] - busy_start[q]), busy_work[q]);
    }
    check
}

/// Job in a PS server keyed by the virtual time at which it completes.
#[derive(PartialEq)]
struct PsJob {
    finish_v: f64,
    index: u64,
    arrival: f64,
    class: PacketClass,
}

impl Eq for PsJob {}

impl Ord for PsJob {
    fn cmp(&self, other: &Self) -> Ordering {
        self.finish_v.total_cmp(&other.finish_v).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for PsJob {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Virtual time `v` advances at `S / n` while `n` jobs are resident, so a job
/// of size `w` arriving at virtual time `v_a` leaves when `v` reaches `v_a + w`.
fn run_ps(cfg: &SimConfig, arrivals: &mut ArrivalStream, total: u64, rec: &mut Recorder) -> WorkCheck {
    let s = cfg.total_rate;
    let mut heap: BinaryHeap<Reverse<PsJob>> = BinaryHeap::new();
    let (mut t, mut v) = (0.0f64, 0.0f64);
    let mut emitted = 0u64;
    let mut check = WorkCheck::default();
    let (mut busy_start, mut busy_work) = (0.0, 0.0);
    loop {
        let next_arrival = if emitted < total { arrivals.peek_time() } else { f64::INFINITY };
        let n = heap.len();
        if n > 0 {
            let head = heap.peek().map(|j| j.0.finish_v).unwrap_or(v);
            let completion = t + (head - v) * n as f64 / s;
            if completion <= next_arrival {
                let Reverse(job) = heap.pop().unwrap();
                t = completion;
                v = job.finish_v;
                rec.on_departure(job.index, job.class, t - job.arrival);
                if heap.is_empty() {
                    check.close(s * (t - busy_start), busy_work);
                    v = 0.0;
                }
                continue;
            }
        }
        if emitted == total {
            break;
        }
        let a = arrivals.pop();
        emitted += 1;
        if n > 0 {
            v += (a.time - t) * s / n as f64;
        } else {
            busy_start = a.time;
            busy_work = 0.0;
        }
        t = a.time;
        busy_work += a.work;
        let index = rec.on_arrival(n);
        heap.push(Reverse(PsJob {
            finish_v: v + a.work,
            index,
            arrival: a.time,
            class: arrivals.classes[a.source].class,
        }));
    }
    check
}

/// Independent replications with seeds `base_seed + r`, pooled per class.
pub fn run_replications(
    cfg: &SimConfig,
    replications: usize,
    exec: Execution,
) -> Result<(Option<EmpiricalCcdf>, Option<EmpiricalCcdf>), SimError> {
    cfg.validate()?;
    let runs = exec::map_range(exec, replications.max(1), |r| {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(r as u64);
        c.record_trace = false;
        c.snapshot_every = None;
        run_queue_sim(&c)
    });
    let mut short: Option<EmpiricalCcdf> = None;
    let mut long: Option<EmpiricalCcdf> = None;
    for run in runs {
        let run = run?;
        for (acc, part) in [(&mut short, run.short), (&mut long, run.long)] {
            match (acc.as_mut(), part) {
                (Some(a), Some(p)) => a.merge(&p),
                (None, Some(p)) => *acc = Some(p),
                _ => {}
            }
        }
    }
    Ok((short, long))
}
