use std::fmt::Write as _;
use std::path::Path;

use mecplan::exec::{with_jobs, Execution};
use mecplan::optimizer::{
    assoc_comm_bottleneck, assoc_comp_bottleneck, brute_force_solve, extended_plb_solve, fixed_association_solve,
    plb_solve, BisectionScale, BruteObjective, ErrorTables, PlbOptions, Scenario, SolveMode, SolveReport,
    SubproblemMode,
};
use mecplan::scenario::ScenarioFile;

use crate::{absolute, to_json, write_text, BisectionArg, CliError, ModeArg, OptimizeArgs, Outcome, SubproblemArg};

pub(crate) fn plb_options(eps_init: f64, delta_eps: f64, bisection: BisectionArg, log_tol: f64) -> Result<PlbOptions, CliError> {
    if !(eps_init > 0.0 && eps_init <= 1.0) {
        return Err(CliError::Usage(format!("--eps-init must lie in (0, 1], got {eps_init}")));
    }
    if !(delta_eps > 0.0) || !(log_tol > 0.0) {
        return Err(CliError::Usage("--delta-eps and --log-tol must be positive".into()));
    }
    Ok(PlbOptions {
        eps_init,
        delta_eps,
        scale: match bisection {
            BisectionArg::Linear => BisectionScale::Linear,
            BisectionArg::Log => BisectionScale::Log,
        },
        log_tol,
        exec: Execution::Parallel,
        ..PlbOptions::default()
    })
}

pub(crate) fn load_scenario(path: &Path, typical: bool) -> Result<(ScenarioFile, Scenario), CliError> {
    let mut file = ScenarioFile::load(&absolute(path)?)?;
    file.typical_scenario |= typical;
    let scen = file.to_scenario()?;
    Ok((file, scen))
}

pub fn summary(r: &SolveReport, scen: &Scenario) -> String {
    let mut s = String::new();
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
    let _ = writeln!(s, "mode: {}", serde_json::to_value(r.mode).unwrap().as_str().unwrap_or("?"));
    let _ = writeln!(s, "status: {}", serde_json::to_value(r.status).unwrap().as_str().unwrap_or("?"));
    let _ = writeln!(s, "epsilon_a: {}", fmt(r.epsilon_a));
    let _ = writeln!(s, "max device loss: {}", fmt(r.max_device_loss));
    let _ = writeln!(s, "subcarriers: {} of {}", r.subcarriers_used, scen.n_max);
    let _ = writeln!(s, "iterations: {}", r.iterations);
    let loads: Vec<String> = r.workloads.iter().map(|w| format!("{w:.4}")).collect();
    let _ = writeln!(s, "AP workloads: {}", loads.join(" "));
    let local = r.association.iter().filter(|a| a.is_none()).count();
    let _ = write!(s, "devices kept local: {local} of {}", r.association.len());
    s
}

pub fn run(a: &OptimizeArgs, out: &Path) -> Result<Outcome, CliError> {
    let (file, scen) = load_scenario(&a.scenario, a.typical)?;
    let mut opts = plb_options(a.eps_init, a.delta_eps, a.bisection, a.log_tol)?;
    opts.subproblem = match a.subproblem {
        SubproblemArg::Exact => SubproblemMode::Exact,
        SubproblemArg::RelaxCeil => SubproblemMode::RelaxCeil,
    };
    let mut outputs = Vec::new();
    let report = with_jobs(a.jobs, || -> Result<SolveReport, CliError> {
        let tables = ErrorTables::build(&scen, opts.exec)?;
        Ok(match a.mode {
            ModeArg::Plb => plb_solve(&scen, Some(&tables), &opts)?,
            ModeArg::Extended => extended_plb_solve(&scen, Some(&tables), &opts)?,
            ModeArg::Comm => {
                let assoc = assoc_comm_bottleneck(&scen)?;
                write_text(out, "association.json", &to_json(&assoc), &mut outputs)?;
                fixed_association_solve(&scen, &assoc, SolveMode::Comm, Some(&tables), &opts)?
            }
            ModeArg::Comp => {
                let comp = assoc_comp_bottleneck(&scen, None)?;
                write_text(out, "association.json", &to_json(&comp), &mut outputs)?;
                fixed_association_solve(&scen, &comp.association, SolveMode::Comp, Some(&tables), &opts)?
            }
            ModeArg::Brute => {
                let objective =
                    if scen.typical_scenario { BruteObjective::Typical } else { BruteObjective::general_default() };
                brute_force_solve(&scen, &objective, Some(&tables))?.into_report(&scen, &tables, &objective)?
            }
        })
    })?;
    let text = summary(&report, &scen);
    write_text(out, "report.json", &to_json(&report), &mut outputs)?;
    write_text(out, "summary.txt", &format!("{text}\n"), &mut outputs)?;
    Ok(Outcome { outputs, seeds: vec![file.seed], passed: true, message: text })
}
