//! Exact sampler for the Pólya-Gamma distribution PG(1, b).
//!
//! Draws `J*(1, b/2)` with Devroye's alternating-series accept-reject
//! scheme (truncation point 0.64, mixture of a truncated inverse Gaussian
//! and a shifted exponential as the envelope) and returns `J*/4`.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use crate::error::{MscError, Result};
use crate::rng::RngStream;

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;

/// Maximum number of envelope proposals per draw. The acceptance probability
/// is above 0.99 for every `b`, so hitting this means something is broken.
pub const MAX_PROPOSALS: usize = 10_000;

/// Draw one PG(1, b) variate.
pub fn sample_polya_gamma(stream: &mut RngStream, b: f64) -> Result<f64> {
    if !b.is_finite() || b < 0.0 {
        return Err(MscError::invalid(format!("PG(1, b) requires finite b >= 0, got {b}")));
    }
    let z = 0.5 * b;
    let k = PI * PI / 8.0 + 0.5 * z * z;
    let p_exp = exponential_mass(z, k);

    for _ in 0..MAX_PROPOSALS {
        let x = if stream.uniform() < p_exp {
            TRUNC + stream.exponential() / k
        } else {
            truncated_inverse_gaussian(stream, z)
        };
        let mut s = series_coef(0, x);
        let y = stream.uniform() * s;
        let mut n = 0usize;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return Ok(0.25 * x);
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
            if n > MAX_PROPOSALS {
                return Err(MscError::IterationCap {
                    what: "Polya-Gamma alternating series",
                    cap: MAX_PROPOSALS,
                });
            }
        }
    }
    Err(MscError::IterationCap {
        what: "Polya-Gamma accept-reject",
        cap: MAX_PROPOSALS,
    })
}

/// Mean of PG(1, b): tanh(b/2) / (2b), with the limit 1/4 at b = 0.
pub fn polya_gamma_mean(b: f64) -> f64 {
    let b = b.abs();
    if b < 1e-6 {
        0.25 - b * b / 48.0
    } else {
        (0.5 * b).tanh() / (2.0 * b)
    }
}

/// n-th coefficient of the alternating series for the J*(1, z) density,
/// piecewise around the truncation point.
fn series_coef(n: usize, x: f64) -> f64 {
    let kn = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        kn * (-0.5 * kn * kn * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + kn.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// Probability that the envelope mixture picks the exponential tail.
fn exponential_mass(z: f64, k: f64) -> f64 {
    let sqrt_t = TRUNC.sqrt();
    let b = (TRUNC * z - 1.0) / sqrt_t;
    let a = -(TRUNC * z + 1.0) / sqrt_t;
    let x0 = k.ln() + k * TRUNC;
    let xb = x0 - z + log_norm_cdf(b);
    let xa = x0 + z + log_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse Gaussian with mean 1/z and shape 1, truncated to (0, TRUNC).
fn truncated_inverse_gaussian(stream: &mut RngStream, z: f64) -> f64 {
    if z < TRUNC_RECIP {
        // Mean above the truncation point: propose from a truncated Lévy
        // (shape-1 inverse gamma) and thin by exp(-z^2 x / 2).
        loop {
            let (mut e1, mut e2) = (stream.exponential(), stream.exponential());
            while e1 * e1 > 2.0 * e2 / TRUNC {
                e1 = stream.exponential();
                e2 = stream.exponential();
            }
            let s = 1.0 + e1 * TRUNC;
            let x = TRUNC / (s * s);
            if stream.uniform() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    }
    let mu = 1.0 / z;
    loop {
        let g = crate::sampling::sample_std_normal(stream);
        let y = g * g;
        let half_mu = 0.5 * mu;
        let mu_y = mu * y;
        let mut x = mu + half_mu * mu_y - half_mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
        if stream.uniform() > mu / (mu + x) {
            x = mu * mu / x;
        }
        if x < TRUNC {
            return x;
        }
    }
}

/// log Φ(x) for the standard normal CDF, stable far into the left tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion: Φ(x) ≈ φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶).
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - 0.5 * (2.0 * PI).ln() - (-x).ln() + series.ln()
    }
}
