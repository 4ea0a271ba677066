//! Synthetic station networks with known trends, for tests and demos.
//!
//! Each year draws one spatially correlated Gaussian field over the stations
//! (shared storms), maps it to uniforms and then to GEV block maxima, so
//! station maxima are dependent within a year and independent across years.

use chrono::NaiveDate;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gev::gev_quantile;
use crate::ingest::{BlockMaximaSeries, DailySeries, Season};
use crate::rng::Streams;
use crate::spatial::{matern32, Grid, GridSpec, LonLat};

/// A rectangle of cells where the location parameter trends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedTrend {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    /// mm per year
    pub mu1: f64,
}

impl PlantedTrend {
    pub fn contains(&self, p: &LonLat) -> bool {
        (self.lon_min..=self.lon_max).contains(&p.lon) && (self.lat_min..=self.lat_max).contains(&p.lat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub grid: GridSpec,
    pub stations: usize,
    pub first_year: i32,
    pub years: usize,
    pub season: Season,
    pub mu0: f64,
    pub sigma: f64,
    pub xi: f64,
    pub trend: Option<PlantedTrend>,
    /// Range of the within-year dependence between stations.
    pub storm_range_km: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            grid: GridSpec {
                lon_min: -100.0,
                lon_max: -90.0,
                lat_min: 35.0,
                lat_max: 45.0,
                resolution: 0.5,
            },
            stations: 80,
            first_year: 1970,
            years: 40,
            season: Season::JJA,
            mu0: 40.0,
            sigma: 10.0,
            xi: 0.1,
            trend: None,
            storm_range_km: 250.0,
            seed: 1,
        }
    }
}

/// Grid and one series of block maxima per station.
#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub grid: Grid,
    pub stations: Vec<BlockMaximaSeries>,
}

fn station_coords<R: Rng>(spec: &GridSpec, n: usize, rng: &mut R) -> Vec<LonLat> {
    (0..n)
        .map(|_| {
            LonLat::new(
                rng.random_range(spec.lon_min..spec.lon_max),
                rng.random_range(spec.lat_min..spec.lat_max),
            )
        })
        .collect()
}

fn storm_factor(coords: &[LonLat], range_km: f64) -> Result<DMatrix<f64>> {
    let n = coords.len();
    let c = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + 1e-9
        } else {
            matern32(coords[i].distance_km(&coords[j]), range_km)
        }
    });
    Cholesky::new(c)
        .map(|c| c.l())
        .ok_or_else(|| Error::Numeric("storm correlation is not positive definite".into()))
}

/// Simulate a station network for one season.
pub fn synthetic_network(config: &SyntheticConfig) -> Result<SyntheticNetwork> {
    if config.stations == 0 || config.years < 2 {
        return Err(Error::invalid("need stations and at least two years"));
    }
    if !(config.sigma > 0.0 && config.storm_range_km > 0.0) {
        return Err(Error::invalid("scale and storm range must be positive"));
    }
    let grid = Grid::regular(&config.grid)?;
    let streams = Streams::new(config.seed).child("synthetic");
    let coords = station_coords(&config.grid, config.stations, &mut streams.child("sites").rng(0));
    let factor = storm_factor(&coords, config.storm_range_km)?;
    let normal = Normal::standard();
    let mid = config.first_year as f64 + 0.5 * (config.years - 1) as f64;

    let mut maxima = vec![Vec::with_capacity(config.years); config.stations];
    let year_streams = streams.child("years");
    for k in 0..config.years {
        let mut rng = year_streams.rng(k as u64);
        let z = DVector::from_fn(config.stations, |_, _| rng.sample::<f64, _>(StandardNormal));
        let field = &factor * z;
        let t = config.first_year as f64 + k as f64 - mid;
        for (i, c) in coords.iter().enumerate() {
            let slope = config.trend.filter(|tr| tr.contains(c)).map_or(0.0, |tr| tr.mu1);
            let u = normal.cdf(field[i]).clamp(1e-12, 1.0 - 1e-12);
            maxima[i].push(gev_quantile(u, config.mu0 + slope * t, config.sigma, config.xi)?);
        }
    }
    let stations = coords
        .iter()
        .zip(maxima)
        .enumerate()
        .map(|(i, (c, m))| BlockMaximaSeries::from_values(format!("S{i:04}"), *c, config.season, config.first_year, &m))
        .collect();
    Ok(SyntheticNetwork { grid, stations })
}

/// Cells inside the planted trend region.
pub fn planted_cells(grid: &Grid, trend: &PlantedTrend) -> Vec<bool> {
    grid.cells.iter().map(|c| trend.contains(c)).collect()
}

/// Daily records for `stations` sites over whole calendar years: dry with
/// probability `dry`, otherwise exponential with a station-specific mean.
/// Every `gap`-th day is missing when `gap > 0`.
pub fn synthetic_daily(
    spec: &GridSpec,
    stations: usize,
    first_year: i32,
    last_year: i32,
    dry: f64,
    gap: usize,
    seed: u64,
) -> Result<Vec<DailySeries>> {
    if last_year < first_year || !(0.0..1.0).contains(&dry) {
        return Err(Error::invalid("bad synthetic daily settings"));
    }
    let streams = Streams::new(seed).child("daily");
    let coords = station_coords(spec, stations, &mut streams.child("sites").rng(0));
    let start = NaiveDate::from_ymd_opt(first_year, 1, 1).ok_or_else(|| Error::invalid("bad first year"))?;
    let end = NaiveDate::from_ymd_opt(last_year, 12, 31).ok_or_else(|| Error::invalid("bad last year"))?;
    let dates: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
    Ok(coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = streams.child("values").rng(i as u64);
            let mean = 4.0 + 4.0 * (c.lat - spec.lat_min) / (spec.lat_max - spec.lat_min);
            let values = (0..dates.len())
                .map(|d| {
                    let v = if rng.random::<f64>() < dry {
                        0.0
                    } else {
                        mean * rng.sample::<f64, _>(Exp1)
                    };
                    // round to 0.1 mm like gauge records
                    let v = (v * 10.0).round() / 10.0;
                    (gap == 0 || d % gap != 0).then_some(v)
                })
                .collect();
            DailySeries {
                station_id: format!("D{i:03}"),
                lon: c.lon,
                lat: c.lat,
                dates: dates.clone(),
                values,
            }
        })
        .collect())
}
