//! Distribution functions for a single GEV(μ, σ, ξ).

use crate::error::{Error, Result};

/// Shapes with `|ξ|` below this use the Gumbel (ξ = 0) formulas.
pub const GUMBEL_SHAPE_EPS: f64 = 1e-8;

fn check(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<()> {
    if !(y.is_finite() && mu.is_finite() && sigma.is_finite() && xi.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite GEV argument (y={y}, mu={mu}, sigma={sigma}, xi={xi})"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::invalid(format!("GEV scale must be positive, got {sigma}")));
    }
    Ok(())
}

/// `P(Y <= y)` for `Y ~ GEV(mu, sigma, xi)`.
///
/// Outside the support the CDF saturates: 0 below the lower endpoint when
/// `xi > 0`, 1 above the upper endpoint when `xi < 0`.
pub fn gev_cdf(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check(y, mu, sigma, xi)?;
    let z = (y - mu) / sigma;
    if xi.abs() < GUMBEL_SHAPE_EPS {
        return Ok((-(-z).exp()).exp());
    }
    let w = xi * z;
    if w <= -1.0 {
        return Ok(if xi > 0.0 { 0.0 } else { 1.0 });
    }
    Ok((-(-w.ln_1p() / xi).exp()).exp())
}

/// Log-density; `-inf` outside the support.
pub fn gev_log_density(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check(y, mu, sigma, xi)?;
    Ok(log_density_unchecked(y, mu, sigma, xi))
}

#[inline]
pub(crate) fn log_density_unchecked(y: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let z = (y - mu) / sigma;
    if xi.abs() < GUMBEL_SHAPE_EPS {
        return -sigma.ln() - z - (-z).exp();
    }
    let w = xi * z;
    if w <= -1.0 {
        return f64::NEG_INFINITY;
    }
    let lw = w.ln_1p();
    -sigma.ln() - (1.0 + 1.0 / xi) * lw - (-lw / xi).exp()
}

/// The return-level factor `f_ξ(r)`, so that the `r`-block return value is
/// `μ − σ·f_ξ(r)`.
///
/// With `y_r = −log(1 − 1/r)`: `f_ξ(r) = (1 − y_r^(−ξ))/ξ` for `ξ ≠ 0` and
/// `log y_r` for `ξ = 0`.
pub fn return_level_factor(r: f64, xi: f64) -> Result<f64> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::invalid(format!("return period must exceed 1, got {r}")));
    }
    if !xi.is_finite() {
        return Err(Error::invalid(format!("non-finite shape {xi}")));
    }
    Ok(factor_unchecked(r, xi))
}

#[inline]
pub(crate) fn factor_unchecked(r: f64, xi: f64) -> f64 {
    let log_yr = (-(-1.0 / r).ln_1p()).ln();
    if xi.abs() < GUMBEL_SHAPE_EPS {
        log_yr
    } else {
        -(-xi * log_yr).exp_m1() / xi
    }
}

/// Quantile function: the `p`-quantile of GEV(mu, sigma, xi).
pub fn gev_quantile(p: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must be in (0, 1), got {p}")));
    }
    check(mu, mu, sigma, xi)?;
    Ok(mu - sigma * factor_unchecked(1.0 / (1.0 - p), xi))
}
