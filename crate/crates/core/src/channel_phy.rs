//! Finite-blocklength physical-layer model.
//!
//! A short packet of `b` bits is sent in one slot over `n_sub` subcarriers of
//! a quasi-static flat-fading channel. The normal approximation gives the
//! achievable rate for a target decoding error, and conversely the decoding
//! error for a fixed packet size. Averaging the latter over the small-scale
//! fading distribution yields the per-link loss used by the optimizers.
//!
//! Fading is Rayleigh per antenna branch with maximum-ratio combining, so the
//! power gain is `Gamma(n_t, 1)`. The fading expectation is split at the gain
//! where the normal-approximation argument crosses zero: below it the
//! conditional error is close to one, above it close to zero. The split
//! leaves an exact outage term `P(G < g0)` (regularized incomplete gamma)
//! plus two smooth residual integrals, which are evaluated with composite
//! Gauss-Legendre rules whose node count doubles until the total changes by
//! less than [`QUADRATURE_REL_TOL`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::numeric::{composite_unit, gamma_p_int, gamma_pdf_int, NODES_PER_PANEL};

/// Q-function arguments are clamped to this magnitude.
pub const Q_ARG_CLAMP: f64 = 40.0;

/// Relative change between successive node doublings that ends the expectation.
pub const QUADRATURE_REL_TOL: f64 = 1e-9;

const INITIAL_PANELS: usize = 4;
const MAX_PANELS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid link budget: {0}")]
    InvalidLink(String),
    #[error(
        "fading expectation did not converge for n_sub = {n_sub}: \
         {nodes} nodes, last relative change {rel_change:e}, estimate {estimate:e}"
    )]
    NonConvergence {
        n_sub: f64,
        nodes: usize,
        rel_change: f64,
        estimate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Uplink,
    Downlink,
}

/// Radio parameters of one device-AP link in one direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Large-scale channel gain (linear).
    pub alpha: f64,
    /// Transmit power per subcarrier per antenna (W).
    pub p_sub: f64,
    /// Noise power per subcarrier (W).
    pub n0w0: f64,
    pub n_t: u32,
    /// Slot duration (s).
    pub t_s: f64,
    /// Subcarrier bandwidth (Hz).
    pub w0: f64,
    /// Packet size (bits).
    pub b: f64,
    pub direction: Direction,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<(), PhyError> {
        let checks = [
            ("alpha", self.alpha),
            ("p_sub", self.p_sub),
            ("n0w0", self.n0w0),
            ("t_s", self.t_s),
            ("w0", self.w0),
            ("b", self.b),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(PhyError::InvalidLink(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_t == 0 {
            return Err(PhyError::InvalidLink("n_t must be at least 1".into()));
        }
        Ok(())
    }

    /// Received SNR per unit small-scale gain.
    pub fn snr_per_unit_gain(&self) -> f64 {
        self.alpha * self.p_sub / self.n0w0
    }

    pub fn snr(&self, g: f64) -> f64 {
        self.snr_per_unit_gain() * g
    }

    /// Channel uses available to a packet on `n_sub` subcarriers.
    pub fn blocklength(&self, n_sub: f64) -> f64 {
        self.t_s * n_sub * self.w0
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Small-scale fading model of the power gain `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    Deterministic { g: f64 },
    /// Sum of `shape` unit-mean exponential branches.
    Gamma { shape: u32 },
}

impl FadingModel {
    pub fn rayleigh_mrc(n_t: u32) -> Self {
        FadingModel::Gamma { shape: n_t }
    }

    fn validate(&self) -> Result<(), PhyError> {
        match *self {
            FadingModel::Deterministic { g } if !(g.is_finite() && g > 0.0) => {
                Err(PhyError::Domain { what: "g", value: g })
            }
            FadingModel::Gamma { shape: 0 } => Err(PhyError::Domain { what: "gamma shape", value: 0.0 }),
            _ => Ok(()),
        }
    }
}

/// Gaussian tail probability `Q(x)`.
pub fn q_func(x: f64) -> f64 {
    let x = x.clamp(-Q_ARG_CLAMP, Q_ARG_CLAMP);
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_func`].
pub fn q_inv(eps: f64) -> Result<f64, PhyError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PhyError::Domain { what: "eps", value: eps });
    }
    let mut x = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * eps);
    for _ in 0..50 {
        let q = q_func(x);
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        // Newton on ln Q in the lower tail keeps relative accuracy for tiny eps.
        let step = if eps < 0.5 {
            (q.ln() - eps.ln()) * q / pdf
        } else {
            (q - eps) / pdf
        };
        x += step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Channel dispersion `V = 1 - 1/(1+snr)^2`, written to avoid cancellation.
fn dispersion(snr: f64) -> f64 {
    snr * (2.0 + snr) / ((1.0 + snr) * (1.0 + snr))
}

/// Normal-approximation rate (bits/s) at decoding error `eps`.
///
/// Negative values for very weak links are returned unchanged.
pub fn achievable_rate(g: f64, n_sub: u32, link: &LinkBudget, eps: f64) -> Result<f64, PhyError> {
    link.validate()?;
    if !(g.is_finite() && g > 0.0) {
        return Err(PhyError::Domain { what: "g", value: g });
    }
    if n_sub == 0 {
        return Err(PhyError::Domain { what: "n_sub", value: 0.0 });
    }
    let qi = q_inv(eps)?;
    let snr = link.snr(g);
    let bandwidth = n_sub as f64 * link.w0;
    let v = dispersion(snr);
    Ok(bandwidth / std::f64::consts::LN_2
        * (snr.ln_1p() - (v / (link.t_s * bandwidth)).sqrt() * qi))
}

/// Argument of the Q-function in the decoding error for gain `g`.
fn error_argument(snr: f64, blocklength: f64, rate_nats: f64) -> f64 {
    let v = dispersion(snr);
    if v <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (blocklength / v).sqrt() * (snr.ln_1p() - rate_nats)
}

/// Decoding error probability of a `b`-bit packet for a fixed gain `g`.
pub fn conditional_error(g: f64, n_sub: u32, link: &LinkBudget) -> f64 {
    conditional_error_real(g, n_sub as f64, link)
}

/// [`conditional_error`] with a continuous subcarrier count.
pub fn conditional_error_real(g: f64, n_sub: f64, link: &LinkBudget) -> f64 {
    let blocklength = link.blocklength(n_sub);
    let rate_nats = link.b * std::f64::consts::LN_2 / blocklength;
    q_func(error_argument(link.snr(g), blocklength, rate_nats))
}

/// Decoding error averaged over the small-scale fading.
pub fn avg_decoding_error(n_sub: u32, link: &LinkBudget, fading: &FadingModel) -> Result<f64, PhyError> {
    if n_sub == 0 {
        return Err(PhyError::Domain { what: "n_sub", value: 0.0 });
    }
    avg_decoding_error_real(n_sub as f64, link, fading)
}

/// [`avg_decoding_error`] with a continuous subcarrier count (used by the
/// relaxed subproblem).
pub fn avg_decoding_error_real(n_sub: f64, link: &LinkBudget, fading: &FadingModel) -> Result<f64, PhyError> {
    link.validate()?;
    fading.validate()?;
    if !(n_sub.is_finite() && n_sub > 0.0) {
        return Err(PhyError::Domain { what: "n_sub", value: n_sub });
    }
    match *fading {
        FadingModel::Deterministic { g } => Ok(conditional_error_real(g, n_sub, link)),
        FadingModel::Gamma { shape } => gamma_expectation(shape, n_sub, link),
    }
}

fn gamma_expectation(shape: u32, n_sub: f64, link: &LinkBudget) -> Result<f64, PhyError> {
    let unit_snr = link.snr_per_unit_gain();
    let blocklength = link.blocklength(n_sub);
    let rate_nats = link.b * std::f64::consts::LN_2 / blocklength;
    let snr_threshold = rate_nats.exp_m1();
    if !snr_threshold.is_finite() {
        return Ok(1.0);
    }
    let g0 = snr_threshold / unit_snr;
    if !g0.is_finite() {
        return Ok(1.0);
    }
    let outage = gamma_p_int(shape, g0);
    let arg = |g: f64| error_argument(unit_snr * g, blocklength, rate_nats);

    // Below g0: Q(h) - 1 = -Q(-h); above g0: Q(h). Both residuals decay away
    // from g0, so the integrands are smooth on each side.
    let below = |u: f64| {
        let g = g0 * u;
        -gamma_pdf_int(shape, g) * q_func(-arg(g)) * g0
    };
    let above = |u: f64| {
        let om = 1.0 - u;
        let g = g0 + g0 * u / om;
        gamma_pdf_int(shape, g) * q_func(arg(g)) * g0 / (om * om)
    };
    let estimate = |panels: usize| {
        (outage + composite_unit(panels, below) + composite_unit(panels, above)).clamp(0.0, 1.0)
    };

    let mut panels = INITIAL_PANELS;
    let mut prev = estimate(panels);
    let mut rel_change = f64::INFINITY;
    while panels < MAX_PANELS {
        panels *= 2;
        let next = estimate(panels);
        let scale = next.abs().max(prev.abs());
        rel_change = if scale < f64::MIN_POSITIVE { 0.0 } else { (next - prev).abs() / scale };
        prev = next;
        if rel_change <= QUADRATURE_REL_TOL {
            return Ok(next);
        }
    }
    Err(PhyError::NonConvergence {
        n_sub,
        nodes: 2 * panels * NODES_PER_PANEL,
        rel_change,
        estimate: prev,
    })
}

/// Smallest subcarrier count in `1..=n_c` meeting `eps_target`, or `None`.
pub fn min_subcarriers(
    eps_target: f64,
    link: &LinkBudget,
    fading: &FadingModel,
    n_c: u32,
) -> Result<Option<u32>, PhyError> {
    if !(eps_target > 0.0 && eps_target < 1.0) {
        return Err(PhyError::Domain { what: "eps_target", value: eps_target });
    }
    // The error is strictly decreasing in n_sub, so bisect on the integers.
    if n_c == 0 || avg_decoding_error(n_c, link, fading)? > eps_target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u32, n_c);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if avg_decoding_error(mid, link, fading)? <= eps_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Summary of a Monte Carlo estimate of the fading-averaged error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: u64,
}

/// Monte Carlo estimate of [`avg_decoding_error`] under `Gamma(n_t, 1)` fading.
///
/// Draws are split into fixed chunks, each with its own ChaCha8 stream, so
/// the estimate does not depend on the number of worker threads.
pub fn monte_carlo_decoding_error(
    n_sub: u32,
    link: &LinkBudget,
    draws: u64,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloEstimate, PhyError> {
    link.validate()?;
    const CHUNK: u64 = 1 << 16;
    let chunks = draws.div_ceil(CHUNK) as usize;
    let dist = Gamma::new(link.n_t as f64, 1.0).map_err(|_| PhyError::Domain {
        what: "n_t",
        value: link.n_t as f64,
    })?;
    let partial = exec::map_range(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = CHUNK.min(draws - c as u64 * CHUNK);
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..count {
            let g: f64 = dist.sample(&mut rng);
            let e = conditional_error(g.max(f64::MIN_POSITIVE), n_sub, link);
            s1 += e;
            s2 += e * e;
        }
        // Keep the RNG type in use even when count is 0.
        let _ = rng.random::<u8>();
        (s1, s2)
    });
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = draws as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), draws })
}
