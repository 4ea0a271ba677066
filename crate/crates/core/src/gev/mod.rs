//! GEV distribution, trend models, likelihood fitting and return values.

mod change;
mod dist;
mod fit;
mod model;

pub use change::{
    abs_change_closed_form, aic_from_mean_log_lik, predictive_aic, rel_change_closed_form,
    return_value, wiel_return_value,
};
pub(crate) use change::return_value_fast;
pub use dist::{gev_cdf, gev_log_density, gev_quantile, return_level_factor, GUMBEL_SHAPE_EPS};
pub use fit::{
    fit_gev, fit_gev_with, fit_stationary, neg_log_likelihood, FitOptions, GevFit,
    MIN_BLOCK_MAXIMA, SHAPE_BOUND,
};
pub use model::{AltTrendParams, GevParams, TrendModel};
