use std::path::Path;

use mecplan::exec::{map_range, with_jobs, Execution};
use mecplan::optimizer::{
    assoc_comm_bottleneck, assoc_comp_bottleneck, extended_plb_solve, plb_solve, PlbOptions, SolveReport,
};
use mecplan::scenario::{generate, ScenarioConfig, ScenarioFile};
use serde::{Deserialize, Serialize};

use crate::optimize::plb_options;
use crate::{absolute, write_text, CliError, Outcome, SweepArgs, SweepMode, VaryArg};

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub vary_param: String,
    pub value: String,
    pub epsilon_a: Option<f64>,
    pub subcarriers_used: Option<u32>,
    pub iterations: Option<usize>,
    /// Devices whose AP differs from the strongest-AP association.
    pub assoc_dist_comm: Option<u32>,
    /// Distance between the per-AP short-packet rates and the balanced
    /// optimum, in units of twice the mean device offload rate.
    pub assoc_dist_comp: Option<f64>,
    pub status: String,
}

/// Parses `8,12,16` and inclusive ranges `8:32:2`, in order.
pub fn parse_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Usage(format!("--values: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
    let mut out = Vec::new();
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let pieces: Vec<&str> = part.split(':').collect();
        match pieces.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || b < a {
                    return Err(bad(format!("range `{part}` needs start <= stop and a positive step")));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| a + i as f64 * step));
            }
            _ => return Err(bad(format!("cannot read `{part}`"))),
        }
    }
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad("no usable values".into()));
    }
    Ok(out)
}

fn variant(base: &ScenarioFile, vary: VaryArg, value: f64) -> Result<ScenarioFile, String> {
    let whole = |v: f64| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as u32)
        } else {
            Err(format!("{v} is not a positive integer"))
        }
    };
    Ok(match vary {
        VaryArg::Nt => {
            let mut f = base.clone();
            f.radio.n_t = whole(value)?;
            f
        }
        VaryArg::Srate if value > 0.0 => base.with_s_over_c(value),
        VaryArg::W0ts if value > 0.0 => base.with_numerology(value),
        VaryArg::K => base.with_devices(whole(value)? as usize).map_err(|e| e.to_string())?,
        _ => return Err(format!("{value} must be positive")),
    })
}

fn solve_point(base: &ScenarioFile, a: &SweepArgs, opts: &PlbOptions, value: f64) -> Result<(SolveReport, SweepRow), String> {
    let mut file = variant(base, a.vary, value)?;
    if a.mode == SweepMode::Plb {
        file.typical_scenario = true;
    }
    let scen = file.to_scenario().map_err(|e| e.to_string())?;
    let report = match a.mode {
        SweepMode::Plb => plb_solve(&scen, None, opts),
        SweepMode::Extended => extended_plb_solve(&scen, None, opts),
    }
    .map_err(|e| e.to_string())?;
    let mut row = SweepRow {
        vary_param: a.vary.as_str().into(),
        value: format!("{value}"),
        epsilon_a: report.epsilon_a,
        subcarriers_used: Some(report.subcarriers_used),
        iterations: Some(report.iterations),
        assoc_dist_comm: None,
        assoc_dist_comp: None,
        status: serde_json::to_value(report.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
    };
    if report.status.is_feasible() {
        let comm = assoc_comm_bottleneck(&scen).map_err(|e| e.to_string())?;
        row.assoc_dist_comm = Some(report.association.iter().zip(&comm).filter(|(x, y)| x != y).count() as u32);
        let mean_offload = report.offload_rates.iter().sum::<f64>() / report.offload_rates.len() as f64;
        if let Ok(comp) = assoc_comp_bottleneck(&scen, Some(&report.offload_rates)) {
            let arrivals = report.allocation().ap_arrivals(scen.num_aps());
            let l1: f64 = arrivals.iter().zip(&comp.lambda_star).map(|(x, y)| (x - y).abs()).sum();
            row.assoc_dist_comp = Some(if mean_offload > 0.0 { l1 / (2.0 * mean_offload) } else { 0.0 });
        }
    }
    Ok((report, row))
}

fn error_row(a: &SweepArgs, value: f64, msg: &str) -> SweepRow {
    SweepRow {
        vary_param: a.vary.as_str().into(),
        value: format!("{value}"),
        epsilon_a: None,
        subcarriers_used: None,
        iterations: None,
        assoc_dist_comm: None,
        assoc_dist_comp: None,
        status: format!("error: {msg}"),
    }
}

pub fn run(a: &SweepArgs, out: &Path) -> Result<Outcome, CliError> {
    let values = parse_values(&a.values)?;
    let opts = plb_options(a.eps_init, a.delta_eps, a.bisection, a.log_tol)?;
    let base = match &a.scenario {
        Some(p) => ScenarioFile::load(&absolute(p)?)?,
        None => {
            let mut cfg = ScenarioConfig { seed: a.seed, ..ScenarioConfig::default() };
            if a.vary == VaryArg::K {
                cfg.n_devices = values.iter().fold(1.0f64, |m, &v| m.max(v)) as usize;
            }
            generate(&cfg)?
        }
    };
    let rows: Vec<SweepRow> = with_jobs(a.jobs, || {
        map_range(Execution::Parallel, values.len(), |i| match solve_point(&base, a, &opts, values[i]) {
            Ok((_, row)) => row,
            Err(msg) => error_row(a, values[i], &msg),
        })
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let mut outputs = Vec::new();
    write_text(out, "sweep.csv", &text, &mut outputs)?;
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    Ok(Outcome {
        outputs,
        seeds: vec![base.seed],
        passed: true,
        message: format!("{} points written to {} ({failed} failed)", rows.len(), out.join("sweep.csv").display()),
    })
}
