use std::path::Path;

use mecplan::scenario::{generate, ScenarioConfig};

use crate::{write_text, CliError, GenerateArgs, Outcome};

pub fn config(a: &GenerateArgs) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        seed: a.seed,
        n_devices: a.devices,
        ap_rows: a.ap_rows,
        ap_cols: a.ap_cols,
        ap_spacing_m: a.ap_spacing,
        s_over_c: a.s_over_c,
        ..ScenarioConfig::default()
    };
    cfg.radio.n_t = a.nt;
    cfg.channel.shadowing_std_db = a.shadowing_std;
    match a.w0 {
        Some(w0) => cfg.with_numerology(w0),
        None => cfg,
    }
}

pub fn run(a: &GenerateArgs, out: &Path) -> Result<Outcome, CliError> {
    if !(a.ap_spacing > 0.0) || !(a.s_over_c > 0.0) || a.w0.is_some_and(|w| !(w > 0.0)) {
        return Err(CliError::Usage("ap-spacing, s-over-c and w0 must be positive".into()));
    }
    let mut file = generate(&config(a))?;
    file.typical_scenario = a.typical;
    file.validate()?;
    let mut outputs = Vec::new();
    write_text(out, "scenario.json", &file.to_json(), &mut outputs)?;
    Ok(Outcome {
        outputs,
        seeds: vec![a.seed],
        passed: true,
        message: format!(
            "wrote {} ({} devices, {} APs)",
            out.join("scenario.json").display(),
            file.devices.len(),
            file.aps.len()
        ),
    })
}
