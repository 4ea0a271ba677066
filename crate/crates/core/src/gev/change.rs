//! Return values and their changes between two times.

use super::dist::{factor_unchecked, return_level_factor};
use super::fit::nll_samples;
use super::model::{AltTrendParams, GevParams, TrendModel};
use crate::error::{Error, Result};
use crate::ingest::BlockMaximaSeries;

/// The `r`-block return value at time covariate `t`: the `1 − 1/r` quantile
/// of the GEV with `(μ_t, σ_t, ξ_t)`.
pub fn return_value(params: &GevParams, model: TrendModel, r: f64, t: f64) -> Result<f64> {
    if !params.fits_model(model) {
        return Err(Error::invalid(format!("coefficients use terms outside {model}")));
    }
    let (mu, sigma, xi) = params.at(t);
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("scale {sigma} at t={t} is not positive")));
    }
    Ok(mu - sigma * return_level_factor(r, xi)?)
}

/// Unchecked variant for hot loops; `r > 1` and a positive scale assumed.
#[inline]
pub(crate) fn return_value_fast(params: &GevParams, r: f64, t: f64) -> f64 {
    let (mu, sigma, xi) = params.at(t);
    mu - sigma * factor_unchecked(r, xi)
}

fn require_linear(params: &GevParams) -> Result<()> {
    if params.fits_model(TrendModel::M0) {
        Ok(())
    } else {
        Err(Error::invalid("closed-form changes need linear-trend (M0) coefficients"))
    }
}

/// Relative change in the `r`-block return value from `t1` to `t2` under M0:
/// `μ1(t2 − t1) / (μ0 + μ1 t1 − σ f_ξ(r))`.
pub fn rel_change_closed_form(params: &GevParams, r: f64, t1: f64, t2: f64) -> Result<f64> {
    require_linear(params)?;
    let denom = params.mu0 + params.mu1 * t1 - params.sigma0 * return_level_factor(r, params.xi0)?;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::NumericDegeneracy(format!(
            "return value at t={t1} is {denom}"
        )));
    }
    Ok(params.mu1 * (t2 - t1) / denom)
}

/// Absolute change `μ1(t2 − t1)` under M0, the same for every return period.
pub fn abs_change_closed_form(params: &GevParams, t1: f64, t2: f64) -> f64 {
    params.mu1 * (t2 - t1)
}

/// Return value under the exponential-shift trend: `μ_t − σ_t f_ξ(r)`.
pub fn wiel_return_value(params: &AltTrendParams, r: f64, t: f64) -> Result<f64> {
    Ok(params.location(t) - params.scale(t) * return_level_factor(r, params.xi)?)
}

/// Predictive AIC: `−2·mean_i log L_i + 2·n_par`, where `log L_i` is the
/// log-likelihood of station `i`'s maxima under its smoothed coefficients.
pub fn predictive_aic(
    station_maxima: &[BlockMaximaSeries],
    smoothed_params: &[GevParams],
    model: TrendModel,
) -> Result<f64> {
    if station_maxima.len() != smoothed_params.len() {
        return Err(Error::invalid(format!(
            "{} stations but {} parameter sets",
            station_maxima.len(),
            smoothed_params.len()
        )));
    }
    if station_maxima.is_empty() {
        return Err(Error::invalid("no stations"));
    }
    let mut total = 0.0;
    for (s, p) in station_maxima.iter().zip(smoothed_params) {
        let (t, y) = s.observations();
        total -= nll_samples(&t, &y, p);
    }
    let mean_log_lik = total / station_maxima.len() as f64;
    Ok(aic_from_mean_log_lik(mean_log_lik, model))
}

pub fn aic_from_mean_log_lik(mean_log_lik: f64, model: TrendModel) -> f64 {
    -2.0 * mean_log_lik + 2.0 * model.n_par() as f64
}
