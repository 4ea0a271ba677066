use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        LonLat { lon, lat }
    }

    /// Great-circle (haversine) distance in km.
    pub fn distance_km(&self, other: &LonLat) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let h = (0.5 * dp).sin().powi(2) + p1.cos() * p2.cos() * (0.5 * dl).sin().powi(2);
        2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
    }

    fn key(&self) -> (u64, u64) {
        (self.lon.to_bits(), self.lat.to_bits())
    }
}

/// Bounding box and spacing of a regular lon/lat grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub resolution: f64,
}

/// Prediction locations: cell centres of a regular grid, or any set of
/// distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub cells: Vec<LonLat>,
    pub resolution: f64,
}

impl Grid {
    /// Cell centres of `spec`, row by row from the south-west corner.
    pub fn regular(spec: &GridSpec) -> Result<Self> {
        let GridSpec {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
            resolution,
        } = *spec;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid(format!("grid resolution must be positive, got {resolution}")));
        }
        if !(lon_max > lon_min && lat_max > lat_min) {
            return Err(Error::invalid("grid bounding box is empty"));
        }
        let nx = ((lon_max - lon_min) / resolution).round().max(1.0) as usize;
        let ny = ((lat_max - lat_min) / resolution).round().max(1.0) as usize;
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push(LonLat::new(
                    lon_min + (i as f64 + 0.5) * resolution,
                    lat_min + (j as f64 + 0.5) * resolution,
                ));
            }
        }
        Ok(Grid { cells, resolution })
    }

    /// A grid made of arbitrary distinct points.
    pub fn from_points(cells: Vec<LonLat>, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        let mut seen = HashSet::with_capacity(cells.len());
        if let Some(dup) = cells.iter().find(|c| !seen.insert(c.key())) {
            return Err(Error::invalid(format!("duplicate grid cell ({}, {})", dup.lon, dup.lat)));
        }
        Ok(Grid { cells, resolution })
    }

    /// Drop the cells for which `keep` is false (a land or domain mask).
    pub fn masked(&self, keep: impl Fn(&LonLat) -> bool) -> Grid {
        Grid {
            cells: self.cells.iter().copied().filter(|c| keep(c)).collect(),
            resolution: self.resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell whose centre is within half a resolution of `p`.
    pub fn locate(&self, p: &LonLat) -> Option<usize> {
        let h = 0.5 * self.resolution + 1e-9;
        self.cells
            .iter()
            .position(|c| (c.lon - p.lon).abs() <= h && (c.lat - p.lat).abs() <= h)
    }
}

pub(crate) fn ensure_distinct(coords: &[LonLat]) -> Result<()> {
    let mut seen = HashSet::with_capacity(coords.len());
    match coords.iter().find(|c| !seen.insert(c.key())) {
        Some(c) => Err(Error::invalid(format!("duplicate coordinates ({}, {})", c.lon, c.lat))),
        None => Ok(()),
    }
}
