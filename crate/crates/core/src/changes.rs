//! Per-cell changes in return values, seasonal and annual.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{return_value_fast, GevParams};
use crate::ingest::Season;
use crate::spatial::{CoefficientField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeMetric {
    /// `(φ_t2 − φ_t1) / φ_t1`
    Relative,
    /// `φ_t2 − φ_t1` in mm
    Absolute,
}

impl ChangeMetric {
    pub fn label(self) -> &'static str {
        match self {
            ChangeMetric::Relative => "relative",
            ChangeMetric::Absolute => "absolute",
        }
    }

    /// The change from `v1` to `v2`; `None` when relative to a zero base.
    pub fn apply(self, v1: f64, v2: f64) -> Option<f64> {
        let d = match self {
            ChangeMetric::Absolute => v2 - v1,
            ChangeMetric::Relative if v1 == 0.0 => return None,
            ChangeMetric::Relative => (v2 - v1) / v1,
        };
        d.is_finite().then_some(d)
    }
}

impl fmt::Display for ChangeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ChangeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relative" => Ok(ChangeMetric::Relative),
            "absolute" => Ok(ChangeMetric::Absolute),
            _ => Err(Error::invalid(format!("unknown change metric `{s}`"))),
        }
    }
}

/// How changes are measured: metric, return period and endpoint years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeSpec {
    pub metric: ChangeMetric,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
}

impl ChangeSpec {
    pub fn new(metric: ChangeMetric, r: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::invalid(format!("return period must exceed 1, got {r}")));
        }
        if !(t1.is_finite() && t2.is_finite()) {
            return Err(Error::invalid("endpoint years must be finite"));
        }
        Ok(ChangeSpec { metric, r, t1, t2 })
    }

    /// Return values at both endpoints for coefficients whose time covariate
    /// is zero at `time_origin`. `None` if the scale is not positive at
    /// either endpoint.
    pub fn endpoint_values(&self, p: &GevParams, time_origin: f64) -> Option<(f64, f64)> {
        let (x1, x2) = (self.t1 - time_origin, self.t2 - time_origin);
        if !(p.scale(x1) > 0.0 && p.scale(x2) > 0.0) {
            return None;
        }
        let v1 = return_value_fast(p, self.r, x1);
        let v2 = return_value_fast(p, self.r, x2);
        (v1.is_finite() && v2.is_finite()).then_some((v1, v2))
    }

    pub fn cell_change(&self, p: &GevParams, time_origin: f64) -> Option<f64> {
        let (v1, v2) = self.endpoint_values(p, time_origin)?;
        self.metric.apply(v1, v2)
    }

    /// Per-cell changes for a whole set of smoothed coefficients.
    pub fn deltas(&self, params: &[GevParams], time_origin: f64) -> Vec<Option<f64>> {
        params.iter().map(|p| self.cell_change(p, time_origin)).collect()
    }
}

/// Gridded change in `r`-block return values between two years.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeField {
    pub grid: Grid,
    pub metric: ChangeMetric,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    /// `None` marks an undefined cell (zero base for the relative metric,
    /// or no usable season for annual changes).
    pub delta: Vec<Option<f64>>,
}

/// Change between calendar years `t1` and `t2` at every cell of `coeffs`.
pub fn change_field(
    coeffs: &CoefficientField,
    metric: ChangeMetric,
    r: f64,
    t1: f64,
    t2: f64,
) -> Result<ChangeField> {
    let spec = ChangeSpec::new(metric, r, t1, t2)?;
    Ok(ChangeField {
        grid: coeffs.grid.clone(),
        metric,
        r,
        t1,
        t2,
        delta: spec.deltas(&coeffs.params, coeffs.time_origin),
    })
}

/// Per-season return values at both endpoints. A `None` cell is masked (or
/// has no valid return value) in that season.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalReturnSet {
    pub grid: Grid,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub seasons: Vec<(Season, Vec<Option<(f64, f64)>>)>,
}

impl SeasonalReturnSet {
    /// Evaluate the return values of each season's coefficients. `masks`
    /// holds, per season, which cells are kept; `None` keeps all.
    pub fn from_fields(
        fields: &[(Season, &CoefficientField, Option<&[bool]>)],
        r: f64,
        t1: f64,
        t2: f64,
    ) -> Result<Self> {
        let (_, first, _) = fields
            .first()
            .ok_or_else(|| Error::invalid("no seasonal fields"))?;
        let spec = ChangeSpec::new(ChangeMetric::Absolute, r, t1, t2)?;
        let mut seasons = Vec::with_capacity(fields.len());
        for (season, field, mask) in fields {
            if field.grid != first.grid {
                return Err(Error::invalid("seasonal fields are on different grids"));
            }
            if mask.is_some_and(|m| m.len() != field.params.len()) {
                return Err(Error::invalid(format!("{season} mask does not match the grid")));
            }
            let values = field
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if mask.is_some_and(|m| !m[i]) {
                        None
                    } else {
                        spec.endpoint_values(p, field.time_origin)
                    }
                })
                .collect();
            seasons.push((*season, values));
        }
        Ok(SeasonalReturnSet {
            grid: first.grid.clone(),
            r,
            t1,
            t2,
            seasons,
        })
    }
}

/// Annual change per cell plus which seasons took part.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualChange {
    pub field: ChangeField,
    /// Number of seasons that contributed at each cell.
    pub seasons_used: Vec<usize>,
    /// Season holding the largest return value at `t1` and at `t2`.
    pub dominant: Vec<Option<(Season, Season)>>,
}

/// Compare the largest seasonal return value at `t2` with the largest at
/// `t1`. Masked seasons are left out of both maxima.
pub fn annual_change(seasonal: &SeasonalReturnSet, metric: ChangeMetric) -> Result<AnnualChange> {
    let n = seasonal.grid.len();
    if seasonal.seasons.iter().any(|(_, v)| v.len() != n) {
        return Err(Error::invalid("seasonal return values do not match the grid"));
    }
    let mut delta = Vec::with_capacity(n);
    let mut seasons_used = Vec::with_capacity(n);
    let mut dominant = Vec::with_capacity(n);
    for i in 0..n {
        let mut best1: Option<(f64, Season)> = None;
        let mut best2: Option<(f64, Season)> = None;
        let mut used = 0;
        for (season, values) in &seasonal.seasons {
            if let Some((v1, v2)) = values[i] {
                used += 1;
                if best1.is_none_or(|(b, _)| v1 > b) {
                    best1 = Some((v1, *season));
                }
                if best2.is_none_or(|(b, _)| v2 > b) {
                    best2 = Some((v2, *season));
                }
            }
        }
        seasons_used.push(used);
        match (best1, best2) {
            (Some((m1, s1)), Some((m2, s2))) => {
                delta.push(metric.apply(m1, m2));
                dominant.push(Some((s1, s2)));
            }
            _ => {
                delta.push(None);
                dominant.push(None);
            }
        }
    }
    Ok(AnnualChange {
        field: ChangeField {
            grid: seasonal.grid.clone(),
            metric,
            r: seasonal.r,
            t1: seasonal.t1,
            t2: seasonal.t2,
            delta,
        },
        seasons_used,
        dominant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::TrendModel;
    use crate::spatial::LonLat;

    fn field(params: Vec<GevParams>) -> CoefficientField {
        let cells = (0..params.len()).map(|i| LonLat::new(i as f64, 0.0)).collect();
        CoefficientField {
            grid: Grid::from_points(cells, 1.0).unwrap(),
            model: TrendModel::M0,
            time_origin: 0.0,
            params,
        }
    }

    #[test]
    fn no_trend_no_change() {
        let f = field(vec![GevParams::linear(10.0, 0.0, 2.0, 0.1)]);
        for m in [ChangeMetric::Relative, ChangeMetric::Absolute] {
            assert_eq!(change_field(&f, m, 20.0, 0.0, 67.0).unwrap().delta, vec![Some(0.0)]);
        }
    }

    #[test]
    fn matches_closed_forms() {
        let f = field(vec![GevParams::linear(10.0, 0.1, 1.0, 0.0)]);
        let rel = change_field(&f, ChangeMetric::Relative, 20.0, 0.0, 67.0).unwrap();
        let abs = change_field(&f, ChangeMetric::Absolute, 20.0, 0.0, 67.0).unwrap();
        assert!((rel.delta[0].unwrap() - 6.7 / (10.0 + 2.9701952490)).abs() < 1e-9);
        assert!((abs.delta[0].unwrap() - 6.7).abs() < 1e-12);
        let rel50 = change_field(&f, ChangeMetric::Relative, 50.0, 0.0, 67.0).unwrap();
        let abs50 = change_field(&f, ChangeMetric::Absolute, 50.0, 0.0, 67.0).unwrap();
        assert!((rel50.delta[0].unwrap() - rel.delta[0].unwrap()).abs() > 1e-3);
        assert!((abs50.delta[0].unwrap() - abs.delta[0].unwrap()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_years_use_time_origin() {
        let mut f = field(vec![GevParams::linear(10.0, 0.1, 1.0, 0.0)]);
        f.time_origin = 1983.5;
        let abs = change_field(&f, ChangeMetric::Absolute, 20.0, 1950.0, 2017.0).unwrap();
        assert!((abs.delta[0].unwrap() - 6.7).abs() < 1e-12);
        let rev = change_field(&f, ChangeMetric::Absolute, 20.0, 2017.0, 1950.0).unwrap();
        assert_eq!(rev.delta[0].unwrap(), -abs.delta[0].unwrap());
    }

    #[test]
    fn zero_base_is_undefined() {
        let f0 = crate::gev::return_level_factor(20.0, 0.0).unwrap();
        let f = field(vec![GevParams::linear(f0, 0.1, 1.0, 0.0)]);
        let rel = change_field(&f, ChangeMetric::Relative, 20.0, 0.0, 10.0).unwrap();
        assert_eq!(rel.delta, vec![None]);
        assert!(change_field(&f, ChangeMetric::Relative, 1.0, 0.0, 10.0).is_err());
    }

    fn set(per_season: Vec<Vec<Option<(f64, f64)>>>) -> SeasonalReturnSet {
        let n = per_season[0].len();
        let cells = (0..n).map(|i| LonLat::new(i as f64, 0.0)).collect();
        SeasonalReturnSet {
            grid: Grid::from_points(cells, 1.0).unwrap(),
            r: 20.0,
            t1: 1950.0,
            t2: 2017.0,
            seasons: Season::ALL.iter().copied().zip(per_season).collect(),
        }
    }

    #[test]
    fn dominant_season_sets_annual_change() {
        let s = set(vec![
            vec![Some((30.0, 33.0))],
            vec![Some((60.0, 70.0))],
            vec![Some((40.0, 41.0))],
            vec![Some((35.0, 20.0))],
        ]);
        let a = annual_change(&s, ChangeMetric::Absolute).unwrap();
        assert_eq!(a.field.delta, vec![Some(10.0)]);
        assert_eq!(a.dominant, vec![Some((Season::MAM, Season::MAM))]);
        assert_eq!(a.seasons_used, vec![4]);
    }

    #[test]
    fn flat_dominant_season_hides_change() {
        let s = set(vec![
            vec![Some((30.0, 30.5))],
            vec![Some((80.0, 80.1))],
            vec![Some((40.0, 41.0))],
            vec![Some((45.0, 70.0))],
        ]);
        let a = annual_change(&s, ChangeMetric::Absolute).unwrap();
        assert!((a.field.delta[0].unwrap() - 0.1).abs() < 1e-12);
        let r = annual_change(&s, ChangeMetric::Relative).unwrap();
        assert!((r.field.delta[0].unwrap() - 0.1 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn masked_seasons_are_excluded() {
        let s = set(vec![
            vec![Some((30.0, 33.0)), None],
            vec![Some((20.0, 25.0)), None],
            vec![None, None],
            vec![Some((10.0, 90.0)), None],
        ]);
        let a = annual_change(&s, ChangeMetric::Absolute).unwrap();
        assert_eq!(a.field.delta, vec![Some(60.0), None]);
        assert_eq!(a.seasons_used, vec![3, 0]);
    }
}
