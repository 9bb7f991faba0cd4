use std::io::Write;

use serde::{Deserialize, Serialize};

/// Empirical complementary CDF of one packet class.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCcdf {
    samples: Vec<f64>,
    seeds: Vec<u64>,
}

impl EmpiricalCcdf {
    /// Builds from unsorted samples. Returns `None` when `samples` is empty.
    pub fn from_samples(mut samples: Vec<f64>, seed: u64) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_by(f64::total_cmp);
        Some(Self { samples, seeds: vec![seed] })
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Seeds of every replication merged into this estimate, ascending.
    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Fraction of samples strictly greater than `t`.
    pub fn query(&self, t: f64) -> f64 {
        let at_or_below = self.samples.partition_point(|&x| x <= t);
        (self.samples.len() - at_or_below) as f64 / self.samples.len() as f64
    }

    /// Fraction of samples greater than or equal to `t`.
    pub fn query_at_least(&self, t: f64) -> f64 {
        let below = self.samples.partition_point(|&x| x < t);
        (self.samples.len() - below) as f64 / self.samples.len() as f64
    }

    /// Binomial standard error of [`query`](Self::query) at `t`.
    pub fn std_error(&self, t: f64) -> f64 {
        self.binomial_std_error(self.query(t))
    }

    /// Binomial standard error of an estimated proportion `p` from these samples.
    pub fn binomial_std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.samples.len() as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Smallest sample `x` with `query(x) <= p`.
    pub fn tail_quantile(&self, p: f64) -> f64 {
        let n = self.samples.len();
        let keep = ((1.0 - p) * n as f64).ceil() as usize;
        self.samples[keep.clamp(1, n) - 1]
    }

    /// Pools another replication. The result does not depend on merge order.
    pub fn merge(&mut self, other: &EmpiricalCcdf) {
        let mut merged = Vec::with_capacity(self.samples.len() + other.samples.len());
        let (a, b) = (&self.samples, &other.samples);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i].total_cmp(&b[j]).is_le() {
                merged.push(a[i]);
                i += 1;
            } else {
                merged.push(b[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&b[j..]);
        self.samples = merged;
        self.seeds.extend_from_slice(&other.seeds);
        self.seeds.sort_unstable();
    }
}

/// One line of a CCDF export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub class: String,
    pub t_slots: f64,
    pub prob_empirical: f64,
    pub stderr: f64,
    pub prob_model: Option<f64>,
}

/// Writes rows with the header `class,t_slots,prob_empirical,stderr,prob_model`.
pub fn write_ccdf_csv<W: Write>(out: W, rows: &[CcdfRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
