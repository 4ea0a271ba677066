use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Grid, LonLat};
use super::kriging::{fit_kriging_model, KrigingModel, KrigingOperator};
use crate::error::{Error, Result};
use crate::gev::{GevFit, GevParams, TrendModel, SHAPE_BOUND};

/// A converged station fit and where the station is.
#[derive(Debug, Clone)]
pub struct StationFit {
    pub coord: LonLat,
    pub fit: GevFit,
}

/// One coefficient surface as it is kriged. The scale intercept is smoothed
/// on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Surface {
    Mu0,
    Mu1,
    Mu2,
    LogSigma0,
    Sigma1,
    Xi0,
    Xi1,
}

impl Surface {
    pub fn for_model(model: TrendModel) -> Vec<Surface> {
        let mut s = vec![Surface::Mu0, Surface::Mu1];
        if model.quadratic_location() {
            s.push(Surface::Mu2);
        }
        s.push(Surface::LogSigma0);
        if model.scale_trend() {
            s.push(Surface::Sigma1);
        }
        s.push(Surface::Xi0);
        if model.shape_trend() {
            s.push(Surface::Xi1);
        }
        s
    }

    fn extract(self, p: &GevParams) -> f64 {
        match self {
            Surface::Mu0 => p.mu0,
            Surface::Mu1 => p.mu1,
            Surface::Mu2 => p.mu2,
            Surface::LogSigma0 => p.sigma0.ln(),
            Surface::Sigma1 => p.sigma1,
            Surface::Xi0 => p.xi0,
            Surface::Xi1 => p.xi1,
        }
    }

    fn store(self, p: &mut GevParams, v: f64) {
        match self {
            Surface::Mu0 => p.mu0 = v,
            Surface::Mu1 => p.mu1 = v,
            Surface::Mu2 => p.mu2 = v,
            Surface::LogSigma0 => p.sigma0 = v.exp(),
            Surface::Sigma1 => p.sigma1 = v,
            Surface::Xi0 => p.xi0 = v.clamp(-SHAPE_BOUND, SHAPE_BOUND),
            Surface::Xi1 => p.xi1 = v,
        }
    }
}

/// Gridded best estimates of the climatological coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientField {
    pub grid: Grid,
    pub model: TrendModel,
    /// Calendar year at which the time covariate is zero.
    pub time_origin: f64,
    pub params: Vec<GevParams>,
}

impl CoefficientField {
    pub fn covariate(&self, year: f64) -> f64 {
        year - self.time_origin
    }
}

/// Kriging maps for every coefficient surface of a trend model, fitted once
/// and then applied to any set of station coefficients at the same stations.
#[derive(Debug, Clone)]
pub struct CoefficientSmoother {
    model: TrendModel,
    coords: Vec<LonLat>,
    targets: Vec<LonLat>,
    surfaces: Vec<(Surface, KrigingModel)>,
    operators: Vec<KrigingOperator>,
}

impl CoefficientSmoother {
    /// Fit one kriging model per surface to `params` at `coords`.
    pub fn fit(
        coords: &[LonLat],
        params: &[GevParams],
        model: TrendModel,
        targets: &[LonLat],
    ) -> Result<Self> {
        if coords.len() != params.len() {
            return Err(Error::invalid(format!(
                "{} coordinates but {} coefficient sets",
                coords.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !(p.sigma0 > 0.0) || !p.is_finite()) {
            return Err(Error::invalid("station coefficients must be finite with positive scale"));
        }
        let surfaces = Surface::for_model(model)
            .into_par_iter()
            .map(|s| {
                let v: Vec<f64> = params.iter().map(|p| s.extract(p)).collect();
                fit_kriging_model(coords, &v).map(|m| (s, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_models(model, coords, targets, surfaces)
    }

    /// Build the maps from already fitted kriging models.
    pub fn with_models(
        model: TrendModel,
        coords: &[LonLat],
        targets: &[LonLat],
        surfaces: Vec<(Surface, KrigingModel)>,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("empty prediction grid"));
        }
        let operators = surfaces
            .par_iter()
            .map(|(_, m)| KrigingOperator::new(m, coords, targets))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientSmoother {
            model,
            coords: coords.to_vec(),
            targets: targets.to_vec(),
            surfaces,
            operators,
        })
    }

    /// Same kriging models, maps rebuilt on the stations listed in `keep`.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let coords: Vec<LonLat> = keep.iter().map(|&i| self.coords[i]).collect();
        Self::with_models(self.model, &coords, &self.targets, self.surfaces.clone())
    }

    pub fn model(&self) -> TrendModel {
        self.model
    }

    pub fn n_stations(&self) -> usize {
        self.coords.len()
    }

    pub fn kriging_models(&self) -> &[(Surface, KrigingModel)] {
        &self.surfaces
    }

    /// Smoothed coefficients at every target for one set of station coefficients.
    pub fn apply(&self, params: &[GevParams]) -> Result<Vec<GevParams>> {
        if params.len() != self.coords.len() {
            return Err(Error::invalid(format!(
                "smoother built for {} stations, got {}",
                self.coords.len(),
                params.len()
            )));
        }
        let mut out = vec![GevParams::default(); self.targets.len()];
        for ((surface, _), op) in self.surfaces.iter().zip(&self.operators) {
            let v: Vec<f64> = params.iter().map(|p| surface.extract(p)).collect();
            for (cell, value) in out.iter_mut().zip(op.apply(&v)) {
                surface.store(cell, value);
            }
        }
        Ok(out)
    }
}

/// Krige every coefficient surface of the station fits onto `grid`.
pub fn smooth_coefficients(station_fits: &[StationFit], grid: &Grid) -> Result<CoefficientField> {
    let first = station_fits
        .first()
        .ok_or_else(|| Error::invalid("no station fits to smooth"))?;
    let model = first.fit.model;
    let time_origin = first.fit.time_origin;
    for s in station_fits {
        if !s.fit.converged {
            return Err(Error::invalid("all station fits must be converged"));
        }
        if s.fit.model != model || s.fit.time_origin != time_origin {
            return Err(Error::invalid("station fits mix trend models or analysis periods"));
        }
    }
    let coords: Vec<LonLat> = station_fits.iter().map(|s| s.coord).collect();
    let params: Vec<GevParams> = station_fits.iter().map(|s| s.fit.params).collect();
    let smoother = CoefficientSmoother::fit(&coords, &params, model, &grid.cells)?;
    Ok(CoefficientField {
        grid: grid.clone(),
        model,
        time_origin,
        params: smoother.apply(&params)?,
    })
}
