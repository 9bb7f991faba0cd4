//! Small numerical kernels shared by the physical-layer model.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const GL_POINTS: usize = 16;

/// Nodes and weights of the 16-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_16() -> &'static [(f64, f64); GL_POINTS] {
    static RULE: OnceLock<[(f64, f64); GL_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = [(0.0, 0.0); GL_POINTS];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            rule[i] = (-x, w);
            rule[n - 1 - i] = (x, w);
        }
        rule
    })
}

/// Composite Gauss-Legendre over [0, 1] with `panels` equal sub-intervals.
pub(crate) fn composite_unit<F: Fn(f64) -> f64>(panels: usize, f: F) -> f64 {
    let rule = gauss_legendre_16();
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        let mut acc = 0.0;
        for &(x, w) in rule.iter() {
            acc += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * acc;
    }
    total
}

pub(crate) const NODES_PER_PANEL: usize = GL_POINTS;

/// Regularized lower incomplete gamma `P(n, x)` for integer shape `n >= 1`.
pub(crate) fn gamma_p_int(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let a = n as f64;
    if x < a + 1.0 {
        // P = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= x / (a + k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        (a * x.ln() - x - ln_gamma(a + 1.0) + sum.ln()).exp().min(1.0)
    } else {
        // Q = e^-x sum_{k<n} x^k / k!, each term formed in log space.
        let lx = x.ln();
        let upper: f64 = (0..n)
            .map(|k| (k as f64 * lx - x - ln_gamma(k as f64 + 1.0)).exp())
            .sum();
        (1.0 - upper).max(0.0)
    }
}

/// Gamma(shape `n`, unit scale) density.
pub(crate) fn gamma_pdf_int(n: u32, g: f64) -> f64 {
    if g < 0.0 || !g.is_finite() {
        return 0.0;
    }
    if g == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    let a = n as f64;
    ((a - 1.0) * g.ln() - g - ln_gamma(a)).exp()
}
