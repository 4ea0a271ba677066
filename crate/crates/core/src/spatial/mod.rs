//! Spatial smoothing of station coefficients onto a grid.

mod grid;
mod kriging;
mod smooth;

pub use grid::{Grid, GridSpec, LonLat, EARTH_RADIUS_KM};
pub use kriging::{
    fit_kriging_model, krige, matern32, KrigingModel, KrigingOperator, KrigingPrediction,
    MIN_KRIGING_STATIONS, NUGGET_FLOOR, VARIANCE_FLOOR,
};
pub use smooth::{smooth_coefficients, CoefficientField, CoefficientSmoother, StationFit, Surface};
