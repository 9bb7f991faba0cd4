//! Random deployments and their JSON file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel_phy::{Direction, LinkBudget};
use crate::optimizer::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read or write scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario file: {0}")]
    Malformed(String),
    #[error("scenario file has no schema_version")]
    MissingVersion,
    #[error("schema_version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("unknown field `{path}`")]
    UnknownField { path: String },
    #[error("scenario violates a constraint: {0}")]
    ConstraintViolation(String),
}

/// Path loss in dB at `d` metres; distances below 1 m are clamped.
pub fn path_loss_db(d: f64, offset_db: f64, slope_db: f64) -> f64 {
    offset_db + slope_db * d.max(1.0).log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApSpec {
    pub x: f64,
    pub y: f64,
    /// MEC capacity (cycles/slot).
    pub s_rate: f64,
    /// Long-packet arrival rate (packets/slot).
    pub lambda_long: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub x: f64,
    pub y: f64,
    /// Short-packet arrival rate (packets/slot).
    pub lambda_u: f64,
    /// Local service time (slots).
    pub d_loc: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Subcarrier spacing (Hz).
    pub w0: f64,
    /// Slot length (s).
    pub t_s: f64,
    pub n_max: u32,
    /// Subcarriers within one coherence bandwidth.
    pub n_c: u32,
    pub n_t: u32,
    pub p_ul_dbm: f64,
    pub p_dl_dbm: f64,
    pub n0_dbm_hz: f64,
    pub b_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    /// Cycles per short packet.
    pub c_s: f64,
    /// Minimum long-packet workload relative to `c_s`.
    pub c_l_min_ratio: f64,
    pub pareto_v: f64,
}

impl ComputeParams {
    pub fn c_l_mean(&self) -> f64 {
        self.c_s * self.c_l_min_ratio * self.pareto_v / (self.pareto_v - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosParams {
    pub d_max_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub pl_offset_db: f64,
    pub pl_slope_db: f64,
    pub shadowing_std_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { pl_offset_db: 35.3, pl_slope_db: 37.6, shadowing_std_db: 8.0 }
    }
}

/// On-disk scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub seed: u64,
    pub aps: Vec<ApSpec>,
    pub devices: Vec<DeviceSpec>,
    pub radio: RadioParams,
    pub compute: ComputeParams,
    pub qos: QosParams,
    #[serde(default)]
    pub channel: ChannelParams,
    /// Shadowing of each device-AP link (dB); zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadowing_db: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub typical_scenario: bool,
}

const TOP_FIELDS: &[&str] = &[
    "schema_version",
    "seed",
    "aps",
    "devices",
    "radio",
    "compute",
    "qos",
    "channel",
    "shadowing_db",
    "typical_scenario",
];
const AP_FIELDS: &[&str] = &["x", "y", "s_rate", "lambda_long"];
const DEVICE_FIELDS: &[&str] = &["x", "y", "lambda_u", "d_loc"];
const RADIO_FIELDS: &[&str] = &["w0", "t_s", "n_max", "n_c", "n_t", "p_ul_dbm", "p_dl_dbm", "n0_dbm_hz", "b_bits"];
const COMPUTE_FIELDS: &[&str] = &["c_s", "c_l_min_ratio", "pareto_v"];
const QOS_FIELDS: &[&str] = &["d_max_ms"];
const CHANNEL_FIELDS: &[&str] = &["pl_offset_db", "pl_slope_db", "shadowing_std_db"];

fn check_keys(v: &Value, path: &str, allowed: &[&str]) -> Result<(), ScenarioError> {
    if let Value::Object(map) = v {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                let path = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                return Err(ScenarioError::UnknownField { path });
            }
        }
    }
    Ok(())
}

fn check_schema(root: &Value) -> Result<(), ScenarioError> {
    let Value::Object(map) = root else {
        return Err(ScenarioError::Malformed("top level must be an object".into()));
    };
    match map.get("schema_version") {
        None => return Err(ScenarioError::MissingVersion),
        Some(v) => match v.as_u64() {
            Some(found) if found == SCHEMA_VERSION as u64 => {}
            Some(found) => return Err(ScenarioError::VersionMismatch { found, expected: SCHEMA_VERSION }),
            None => return Err(ScenarioError::Malformed("schema_version must be an unsigned integer".into())),
        },
    }
    check_keys(root, "", TOP_FIELDS)?;
    for (name, fields) in [("aps", AP_FIELDS), ("devices", DEVICE_FIELDS)] {
        if let Some(Value::Array(items)) = map.get(name) {
            for (i, item) in items.iter().enumerate() {
                check_keys(item, &format!("{name}[{i}]"), fields)?;
            }
        }
    }
    for (name, fields) in
        [("radio", RADIO_FIELDS), ("compute", COMPUTE_FIELDS), ("qos", QOS_FIELDS), ("channel", CHANNEL_FIELDS)]
    {
        if let Some(v) = map.get(name) {
            check_keys(v, name, fields)?;
        }
    }
    Ok(())
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let root: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
        check_schema(&root)?;
        let file: ScenarioFile = serde_json::from_value(root).map_err(|e| ScenarioError::Malformed(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Deadline in whole slots.
    pub fn d_max_slots(&self) -> u32 {
        (self.qos.d_max_ms * 1e-3 / self.radio.t_s + 1e-9).floor() as u32
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::ConstraintViolation(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.aps.is_empty() || self.devices.is_empty() {
            return bad("at least one AP and one device are required".into());
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if !pos(ap.s_rate) || !(ap.lambda_long >= 0.0 && ap.lambda_long.is_finite()) {
                return bad(format!("aps[{i}]: s_rate must be positive and lambda_long non-negative"));
            }
            if !(ap.x.is_finite() && ap.y.is_finite()) {
                return bad(format!("aps[{i}]: position must be finite"));
            }
        }
        for (i, d) in self.devices.iter().enumerate() {
            if !(0.0..1.0).contains(&d.lambda_u) {
                return bad(format!("devices[{i}]: lambda_u must lie in [0, 1)"));
            }
            if d.d_loc == 0 {
                return bad(format!("devices[{i}]: d_loc must be at least 1"));
            }
            if !(d.x.is_finite() && d.y.is_finite()) {
                return bad(format!("devices[{i}]: position must be finite"));
            }
        }
        let r = &self.radio;
        if !(pos(r.w0) && pos(r.t_s) && pos(r.b_bits)) || r.n_c == 0 || r.n_t == 0 {
            return bad("radio: w0, t_s, b_bits, n_c and n_t must be positive".into());
        }
        if ![r.p_ul_dbm, r.p_dl_dbm, r.n0_dbm_hz].iter().all(|v| v.is_finite()) {
            return bad("radio: powers must be finite".into());
        }
        let c = &self.compute;
        if !pos(c.c_s) || !(c.c_l_min_ratio >= 1.0) || !(c.pareto_v > 1.0 && c.pareto_v < 2.0) {
            return bad("compute: need c_s > 0, c_l_min_ratio >= 1 and 1 < pareto_v < 2".into());
        }
        if !pos(self.qos.d_max_ms) {
            return bad("qos: d_max_ms must be positive".into());
        }
        let ch = &self.channel;
        if ![ch.pl_offset_db, ch.pl_slope_db].iter().all(|v| v.is_finite()) || !(ch.shadowing_std_db >= 0.0) {
            return bad("channel: invalid path-loss parameters".into());
        }
        if let Some(sh) = &self.shadowing_db {
            if sh.len() != self.devices.len() || sh.iter().any(|r| r.len() != self.aps.len()) {
                return bad("shadowing_db must have one row per device and one column per AP".into());
            }
            if sh.iter().flatten().any(|v| !v.is_finite()) {
                return bad("shadowing_db entries must be finite".into());
            }
        }
        self.to_scenario().map(|_| ()).map_err(|e| ScenarioError::ConstraintViolation(e.to_string()))
    }

    /// Large-scale gain of every device-AP link.
    pub fn gains(&self) -> Vec<Vec<f64>> {
        self.devices
            .iter()
            .enumerate()
            .map(|(k, d)| {
                self.aps
                    .iter()
                    .enumerate()
                    .map(|(m, ap)| {
                        let dist = (d.x - ap.x).hypot(d.y - ap.y);
                        let shadow = self.shadowing_db.as_ref().map_or(0.0, |s| s[k][m]);
                        let loss = path_loss_db(dist, self.channel.pl_offset_db, self.channel.pl_slope_db) + shadow;
                        10f64.powf(-loss / 10.0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Solver view in slots and linear units.
    ///
    /// Uplink power is spread over `n_c` subcarriers; downlink power over
    /// `n_max` subcarriers and `n_t` antennas (`n_max = 0` counts as one).
    pub fn to_scenario(&self) -> Result<Scenario, crate::optimizer::OptError> {
        let r = &self.radio;
        let n0w0 = dbm_to_watt(r.n0_dbm_hz) * r.w0;
        let link = |p_sub: f64, direction| LinkBudget {
            alpha: 1.0,
            p_sub,
            n0w0,
            n_t: r.n_t,
            t_s: r.t_s,
            w0: r.w0,
            b: r.b_bits,
            direction,
        };
        let scen = Scenario {
            alpha: self.gains(),
            lambda_u: self.devices.iter().map(|d| d.lambda_u).collect(),
            d_loc: self.devices.iter().map(|d| d.d_loc).collect(),
            s_rate: self.aps.iter().map(|a| a.s_rate).collect(),
            lambda_long: self.aps.iter().map(|a| a.lambda_long).collect(),
            c_s: self.compute.c_s,
            c_l_mean: self.compute.c_l_mean(),
            d_max: self.d_max_slots(),
            n_max: r.n_max,
            n_c: r.n_c,
            uplink: link(dbm_to_watt(r.p_ul_dbm) / r.n_c as f64, Direction::Uplink),
            downlink: link(dbm_to_watt(r.p_dl_dbm) / (r.n_max.max(1) as f64 * r.n_t as f64), Direction::Downlink),
            typical_scenario: self.typical_scenario,
        };
        scen.validate()?;
        Ok(scen)
    }
}

impl ScenarioFile {
    /// Same deployment at subcarrier spacing `w0`, holding `t_s w0`, the
    /// total and coherence bandwidths, and all per-second rates and times.
    pub fn with_numerology(&self, w0: f64) -> Self {
        let scale = self.radio.w0 / w0;
        let mut out = self.clone();
        out.radio.w0 = w0;
        out.radio.t_s = self.radio.t_s * scale;
        out.radio.n_max = rescale_count(self.radio.n_max, scale);
        out.radio.n_c = rescale_count(self.radio.n_c, scale).max(1);
        for ap in &mut out.aps {
            ap.s_rate *= scale;
            ap.lambda_long *= scale;
        }
        for d in &mut out.devices {
            d.lambda_u *= scale;
            d.d_loc = rescale_slots(d.d_loc, scale);
        }
        out
    }

    /// Keeps only the first `k` devices.
    pub fn with_devices(&self, k: usize) -> Result<Self, ScenarioError> {
        if k == 0 || k > self.devices.len() {
            return Err(ScenarioError::ConstraintViolation(format!(
                "cannot keep {k} of {} devices",
                self.devices.len()
            )));
        }
        let mut out = self.clone();
        out.devices.truncate(k);
        if let Some(sh) = &mut out.shadowing_db {
            sh.truncate(k);
        }
        Ok(out)
    }

    /// Sets every AP's capacity to `s_over_c` short packets per slot.
    pub fn with_s_over_c(&self, s_over_c: f64) -> Self {
        let mut out = self.clone();
        for ap in &mut out.aps {
            ap.s_rate = s_over_c * self.compute.c_s;
        }
        out
    }
}

fn rescale_count(n: u32, scale: f64) -> u32 {
    (n as f64 * scale).round() as u32
}

/// A duration of `d` slots expressed in slots `scale` times longer, rounded up.
fn rescale_slots(d: u32, scale: f64) -> u32 {
    ((d as f64 / scale) - 1e-9).ceil().max(1.0) as u32
}

/// Parameters of a random deployment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_devices: usize,
    /// APs sit on a `rows x cols` grid with spacing `ap_spacing_m`.
    pub ap_rows: usize,
    pub ap_cols: usize,
    pub ap_spacing_m: f64,
    pub lambda_u_min: f64,
    pub lambda_u_max: f64,
    /// Local service times, assigned to devices in turn.
    pub d_loc_cycle: Vec<u32>,
    /// MEC capacity over `c_s` (cycles per slot in units of `c_s`).
    pub s_over_c: f64,
    pub lambda_long: f64,
    pub radio: RadioParams,
    pub compute: ComputeParams,
    pub qos: QosParams,
    pub channel: ChannelParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_devices: 20,
            ap_rows: 2,
            ap_cols: 2,
            ap_spacing_m: 500.0,
            lambda_u_min: 0.05,
            lambda_u_max: 0.1,
            d_loc_cycle: vec![5, 6],
            s_over_c: 6.0,
            lambda_long: 0.1,
            radio: RadioParams {
                w0: 120e3,
                t_s: 0.125e-3,
                n_max: 256,
                n_c: 10,
                n_t: 16,
                p_ul_dbm: 23.0,
                p_dl_dbm: 46.0,
                n0_dbm_hz: -174.0,
                b_bits: 256.0,
            },
            compute: ComputeParams { c_s: 1.0, c_l_min_ratio: 10.0, pareto_v: 1.5 },
            qos: QosParams { d_max_ms: 1.0 },
            channel: ChannelParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Rescales to subcarrier spacing `w0` keeping the symbols per slot
    /// (`t_s w0`), total bandwidth, coherence bandwidth and all per-second
    /// rates and times fixed.
    pub fn with_numerology(&self, w0: f64) -> Self {
        let r = &self.radio;
        let scale = r.w0 / w0;
        let t_s = r.t_s * scale;
        let mut out = self.clone();
        out.radio.w0 = w0;
        out.radio.t_s = t_s;
        out.radio.n_max = rescale_count(r.n_max, scale);
        out.radio.n_c = rescale_count(r.n_c, scale).max(1);
        out.lambda_u_min *= scale;
        out.lambda_u_max *= scale;
        out.lambda_long *= scale;
        out.s_over_c *= scale;
        out.d_loc_cycle = self.d_loc_cycle.iter().map(|&d| rescale_slots(d, scale)).collect();
        out
    }
}

/// Draws AP and device positions, rates and shadowing from `cfg.seed`.
///
/// Devices are uniform over the bounding box of the AP grid; shadowing is
/// i.i.d. normal per link.
pub fn generate(cfg: &ScenarioConfig) -> Result<ScenarioFile, ScenarioError> {
    if cfg.ap_rows == 0 || cfg.ap_cols == 0 || cfg.n_devices == 0 || cfg.d_loc_cycle.is_empty() {
        return Err(ScenarioError::ConstraintViolation("need at least one AP, device and d_loc value".into()));
    }
    if !(cfg.lambda_u_min >= 0.0 && cfg.lambda_u_min <= cfg.lambda_u_max) {
        return Err(ScenarioError::ConstraintViolation("lambda_u range is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let aps: Vec<ApSpec> = (0..cfg.ap_rows * cfg.ap_cols)
        .map(|i| ApSpec {
            x: (i % cfg.ap_cols) as f64 * cfg.ap_spacing_m,
            y: (i / cfg.ap_cols) as f64 * cfg.ap_spacing_m,
            s_rate: cfg.s_over_c * cfg.compute.c_s,
            lambda_long: cfg.lambda_long,
        })
        .collect();
    let (w, h) = ((cfg.ap_cols - 1) as f64 * cfg.ap_spacing_m, (cfg.ap_rows - 1) as f64 * cfg.ap_spacing_m);
    let devices: Vec<DeviceSpec> = (0..cfg.n_devices)
        .map(|k| DeviceSpec {
            x: rng.random::<f64>() * w,
            y: rng.random::<f64>() * h,
            lambda_u: if cfg.lambda_u_max > cfg.lambda_u_min {
                rng.random_range(cfg.lambda_u_min..cfg.lambda_u_max)
            } else {
                cfg.lambda_u_min
            },
            d_loc: cfg.d_loc_cycle[k % cfg.d_loc_cycle.len()],
        })
        .collect();
    let shadowing_db = if cfg.channel.shadowing_std_db > 0.0 {
        let normal = Normal::new(0.0, cfg.channel.shadowing_std_db)
            .map_err(|e| ScenarioError::ConstraintViolation(e.to_string()))?;
        Some((0..devices.len()).map(|_| (0..aps.len()).map(|_| normal.sample(&mut rng)).collect()).collect())
    } else {
        None
    };
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        aps,
        devices,
        radio: cfg.radio.clone(),
        compute: cfg.compute.clone(),
        qos: cfg.qos.clone(),
        channel: cfg.channel.clone(),
        shadowing_db,
        typical_scenario: false,
    };
    file.validate()?;
    Ok(file)
}

/// Generates and converts in one step.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    generate(cfg)?.to_scenario().map_err(|e| ScenarioError::ConstraintViolation(e.to_string()))
}
