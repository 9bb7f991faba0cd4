use std::path::Path;

use mecplan::des_sim::{
    report_from_ccdf, simulate_discipline, write_ccdf_csv, ArrivalKind, CcdfRow, Discipline, EmpiricalCcdf,
    PsValidationReport, PsValidationSetup,
};
use mecplan::exec::{with_jobs, Execution};
use mecplan::queueing::{long_tail_asymptote, ps_short_ccdf, MecServerSpec, ParetoWorkload};
use mecplan::scenario::ScenarioFile;

use crate::{absolute, write_text, ArrivalArg, CliError, Outcome, PresetArg, ValidateArgs};

/// Long-packet rows are spaced this many per decade of delay.
const LONG_POINTS_PER_DECADE: f64 = 10.0;
/// Long-packet rows stop once fewer than this many samples exceed the delay.
const LONG_MIN_EXCEEDANCES: f64 = 10.0;

fn setup_for(a: &ValidateArgs) -> Result<PsValidationSetup, CliError> {
    let kind = match a.arrivals {
        ArrivalArg::Poisson => ArrivalKind::Poisson,
        ArrivalArg::Bernoulli => ArrivalKind::Bernoulli,
    };
    if let Some(PresetArg::Fig5) = a.preset {
        return Ok(PsValidationSetup::fig5(kind));
    }
    let (Some(path), Some(m)) = (&a.scenario, a.ap) else {
        return Err(CliError::Usage("give --preset, or --scenario together with --ap".into()));
    };
    let file = ScenarioFile::load(&absolute(path)?)?;
    if m >= file.aps.len() {
        return Err(CliError::Usage(format!("--ap {m} but the scenario has {} APs", file.aps.len())));
    }
    let gains = file.gains();
    let short_rates: Vec<f64> = file
        .devices
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let row = &gains[*k];
            (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best }) == m
        })
        .map(|(_, d)| d.lambda_u)
        .filter(|&r| r > 0.0)
        .collect();
    if short_rates.is_empty() {
        return Err(CliError::Usage(format!("no device has AP {m} as its strongest AP")));
    }
    let ap = &file.aps[m];
    let pareto = ParetoWorkload::new(file.compute.c_l_min_ratio, file.compute.pareto_v)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(PsValidationSetup {
        arrival_kind: kind,
        short_rates,
        long_rates: if ap.lambda_long > 0.0 { vec![ap.lambda_long] } else { Vec::new() },
        c_s: file.compute.c_s,
        s_rate: ap.s_rate,
        pareto,
    })
}

fn server_spec(setup: &PsValidationSetup) -> MecServerSpec {
    MecServerSpec {
        s_rate: setup.s_rate,
        c_s: setup.c_s,
        c_l_mean: setup.c_s * setup.pareto.mean_ratio(),
        lambda_long: setup.long_rates.iter().sum(),
        lambda_short_sum: setup.short_rates.iter().sum(),
    }
}

/// Short rows sit on the model's atoms `c_s (q + 1) / S` and report
/// `Pr{W >= t}`; long rows are log-spaced and report `Pr{W > t}`.
fn ccdf_rows(
    setup: &PsValidationSetup,
    report: &PsValidationReport,
    short: Option<&EmpiricalCcdf>,
    long: Option<&EmpiricalCcdf>,
    with_model: bool,
) -> Vec<CcdfRow> {
    let mut rows = Vec::new();
    if let Some(c) = short {
        for r in &report.rows {
            let p = c.query_at_least(r.t_slots * (1.0 - 1e-9));
            rows.push(CcdfRow {
                class: "short".into(),
                t_slots: r.t_slots,
                prob_empirical: p,
                stderr: c.binomial_std_error(p),
                prob_model: with_model.then(|| ps_short_ccdf(report.rho, r.q as f64)),
            });
        }
    }
    if let Some(c) = long {
        let spec = server_spec(setup);
        let t0 = setup.c_s * setup.pareto.c0_ratio / setup.s_rate;
        for j in 0.. {
            let t = t0 * 10f64.powf(j as f64 / LONG_POINTS_PER_DECADE);
            let p = c.query(t);
            if p * (c.count() as f64) < LONG_MIN_EXCEEDANCES {
                break;
            }
            rows.push(CcdfRow {
                class: "long".into(),
                t_slots: t,
                prob_empirical: p,
                stderr: c.std_error(t),
                prob_model: if with_model { long_tail_asymptote(&setup.pareto, &spec, t).ok() } else { None },
            });
        }
    }
    rows
}

fn validation_csv(report: &PsValidationReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn run(a: &ValidateArgs, out: &Path) -> Result<Outcome, CliError> {
    let setup = setup_for(a)?;
    if a.packets == 0 {
        return Err(CliError::Usage("--packets must be positive".into()));
    }
    let rho = setup.rho();
    if !(rho < 1.0) {
        return Err(CliError::Validation(format!("the configured server is unstable (rho = {rho})")));
    }
    let disciplines = [Discipline::FcfsIndividual { splits: None }, Discipline::FcfsMux, Discipline::Ps];
    let sims = with_jobs(a.jobs, || {
        disciplines
            .iter()
            .map(|d| simulate_discipline(&setup, d.clone(), a.packets, a.seed, Execution::Parallel))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| CliError::Validation(e.to_string()))?;

    let (ps_short, _) = &sims[2];
    let ps_short = ps_short.as_ref().ok_or_else(|| CliError::Internal("no short packets simulated".into()))?;
    let report = report_from_ccdf(&setup, rho, ps_short);

    let mut outputs = Vec::new();
    for (d, (short, long)) in disciplines.iter().zip(&sims) {
        let with_model = matches!(d, Discipline::Ps);
        let rows = ccdf_rows(&setup, &report, short.as_ref(), long.as_ref(), with_model);
        let mut buf = Vec::new();
        write_ccdf_csv(&mut buf, &rows).map_err(|e| CliError::Internal(e.to_string()))?;
        let text = String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))?;
        write_text(out, &format!("ccdf_{}.csv", d.name()), &text, &mut outputs)?;
    }
    write_text(out, "ps_validation.csv", &validation_csv(&report)?, &mut outputs)?;

    let checked = report.rows.iter().filter(|r| r.checked).count();
    let failing: Vec<u32> = report.rows.iter().filter(|r| r.checked && !r.within_tolerance).map(|r| r.q).collect();
    let unreliable = report.rows.iter().filter(|r| !r.reliable).count();
    let mut message = format!(
        "rho = {rho:.4}, {} short packets; {checked} rows checked, {} outside tolerance",
        report.short_samples,
        failing.len()
    );
    if !failing.is_empty() {
        message += &format!(" (q = {failing:?})");
    }
    if unreliable > 0 {
        message += &format!("; {unreliable} rows marked unreliable");
    }
    // A run too short to check any row has not validated anything.
    let passed = report.passed && checked > 0;
    message += if passed { "\nPASS" } else { "\nFAIL" };
    Ok(Outcome { outputs, seeds: vec![a.seed], passed, message })
}
