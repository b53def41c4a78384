//! Photon-number statistics of an attenuated laser pulse.

use crate::error::{Error, Result};

/// Below this photon number the pmf is evaluated as a running product,
/// above it in log space.
const DIRECT_LIMIT: u64 = 20;

/// Probability that a pulse with mean photon number `mu` carries exactly `l` photons.
pub fn poisson_pmf(mu: f64, l: u64) -> Result<f64> {
    check_mean("mu", mu)?;
    Ok(pmf(mu, l))
}

/// Probability of `l` or more photons in a coherent pulse with mean `x`.
pub fn psi_tail(x: f64, l: u64) -> Result<f64> {
    check_mean("X", x)?;
    Ok(tail(x, l))
}

fn check_mean(name: &str, mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and > 0, got {mu}")))
    }
}

pub(crate) fn pmf(mu: f64, l: u64) -> f64 {
    if l <= DIRECT_LIMIT {
        let mut term = (-mu).exp();
        for k in 1..=l {
            term *= mu / k as f64;
        }
        term
    } else {
        (-mu + l as f64 * mu.ln() - ln_factorial(l)).exp()
    }
}

fn ln_factorial(l: u64) -> f64 {
    (2..=l).map(|k| (k as f64).ln()).sum()
}

pub(crate) fn tail(x: f64, l: u64) -> f64 {
    match l {
        0 => 1.0,
        1 => -(-x).exp_m1(),
        _ => {
            let lower: f64 = (0..l).map(|j| pmf(x, j)).sum();
            if lower < 0.5 {
                1.0 - lower
            } else {
                // 1 - lower cancels catastrophically here; sum the upper tail
                // directly. Terms from j = l on are decreasing since l > x - 1.
                upper_series(x, l)
            }
        }
    }
}

fn upper_series(x: f64, l: u64) -> f64 {
    let mut term = pmf(x, l);
    let mut sum = 0.0;
    let mut j = l;
    while term > 0.0 && term > sum * 1e-18 {
        sum += term;
        j += 1;
        term *= x / j as f64;
        if j > l + 100_000 {
            break;
        }
    }
    sum
}
