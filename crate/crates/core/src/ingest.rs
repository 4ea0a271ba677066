//! Daily station records and seasonal block maxima.
//!
//! Daily input CSV (UTF-8, header required):
//!
//! ```text
//! station_id,lon,lat,date,prcp_mm
//! USC00011084,-87.08,31.06,1949-12-01,0.0
//! USC00011084,-87.08,31.06,1949-12-02,
//! ```
//!
//! An empty `prcp_mm` is a missing day; zeros are data. Block-maxima CSV:
//! `station_id,lon,lat,season,year,max_mm,missing_fraction`, with an empty
//! `max_mm` for blocks that failed the completeness rule.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::LonLat;

/// Record-level completeness a station must reach to enter an analysis.
pub const STATION_COMPLETENESS: f64 = 0.667;

pub const DAILY_HEADER: [&str; 5] = ["station_id", "lon", "lat", "date", "prcp_mm"];
pub const MAXIMA_HEADER: [&str; 7] = [
    "station_id",
    "lon",
    "lat",
    "season",
    "year",
    "max_mm",
    "missing_fraction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Season {
    DJF,
    MAM,
    JJA,
    SON,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::DJF, Season::MAM, Season::JJA, Season::SON];

    pub fn label(self) -> &'static str {
        match self {
            Season::DJF => "DJF",
            Season::MAM => "MAM",
            Season::JJA => "JJA",
            Season::SON => "SON",
        }
    }

    /// First and last calendar day of the block labelled `season_year`.
    /// DJF of year `t` runs from 1 December of `t − 1` to the end of February
    /// of `t`.
    pub fn date_range(self, season_year: i32) -> (NaiveDate, NaiveDate) {
        let ymd = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date");
        match self {
            Season::DJF => {
                let end = ymd(season_year, 3, 1).pred_opt().expect("date in range");
                (ymd(season_year - 1, 12, 1), end)
            }
            Season::MAM => (ymd(season_year, 3, 1), ymd(season_year, 5, 31)),
            Season::JJA => (ymd(season_year, 6, 1), ymd(season_year, 8, 31)),
            Season::SON => (ymd(season_year, 9, 1), ymd(season_year, 11, 30)),
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DJF" => Ok(Season::DJF),
            "MAM" => Ok(Season::MAM),
            "JJA" => Ok(Season::JJA),
            "SON" => Ok(Season::SON),
            other => Err(Error::invalid(format!("unknown season {other:?}"))),
        }
    }
}

/// One station's daily precipitation record. Dates are strictly increasing;
/// days absent from the record count as missing.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub station_id: String,
    pub lon: f64,
    pub lat: f64,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn coord(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }

    fn window(&self, start: NaiveDate, end: NaiveDate) -> &[Option<f64>] {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        &self.values[lo..hi.max(lo)]
    }
}

/// Seasonal maxima for one station and season over a span of season-years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaximaSeries {
    pub station_id: String,
    pub lon: f64,
    pub lat: f64,
    pub season: Season,
    /// First and last season-year of the analysis period. The time covariate
    /// is the year minus the midpoint of this span.
    pub period: (i32, i32),
    pub years: Vec<i32>,
    pub maxima: Vec<Option<f64>>,
    pub missing_fraction: Vec<f64>,
}

impl BlockMaximaSeries {
    /// Series over consecutive years starting at `first_year`, with no
    /// missing blocks. Convenient for synthetic data.
    pub fn from_values(
        station_id: impl Into<String>,
        coord: LonLat,
        season: Season,
        first_year: i32,
        values: &[f64],
    ) -> Self {
        let n = values.len() as i32;
        BlockMaximaSeries {
            station_id: station_id.into(),
            lon: coord.lon,
            lat: coord.lat,
            season,
            period: (first_year, first_year + n - 1),
            years: (first_year..first_year + n).collect(),
            maxima: values.iter().map(|v| Some(*v)).collect(),
            missing_fraction: vec![0.0; values.len()],
        }
    }

    pub fn coord(&self) -> LonLat {
        LonLat::new(self.lon, self.lat)
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn time_origin(&self) -> f64 {
        0.5 * (f64::from(self.period.0) + f64::from(self.period.1))
    }

    pub fn valid_count(&self) -> usize {
        self.maxima.iter().filter(|m| m.is_some()).count()
    }

    /// `(time covariate, maximum)` for every usable block.
    pub fn observations(&self) -> (Vec<f64>, Vec<f64>) {
        let origin = self.time_origin();
        self.years
            .iter()
            .zip(&self.maxima)
            .filter_map(|(y, m)| m.map(|v| (f64::from(*y) - origin, v)))
            .unzip()
    }
}

/// Parse the daily CSV at `path`.
pub fn parse_daily_csv(path: impl AsRef<Path>) -> Result<Vec<DailySeries>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_daily_reader(file)
}

/// Parse daily records from any reader. Stations come back sorted by id and
/// each station's days sorted by date, so row order in the input is
/// irrelevant.
pub fn parse_daily_reader<R: Read>(reader: R) -> Result<Vec<DailySeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != DAILY_HEADER.len() || header.iter().zip(DAILY_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                DAILY_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    struct Acc {
        lon: f64,
        lat: f64,
        rows: Vec<(NaiveDate, Option<f64>, u64)>,
    }
    let mut stations: BTreeMap<String, Acc> = BTreeMap::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(bad("empty station_id".into()));
        }
        let lon: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("invalid lon {:?}", &rec[1])))?;
        let lat: f64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("invalid lat {:?}", &rec[2])))?;
        if !(lon.is_finite() && lat.is_finite() && (-180.0..=360.0).contains(&lon) && lat.abs() <= 90.0)
        {
            return Err(bad(format!("coordinates out of range ({lon}, {lat})")));
        }
        let date = NaiveDate::parse_from_str(&rec[3], "%Y-%m-%d")
            .map_err(|_| bad(format!("invalid date {:?}", &rec[3])))?;
        let value = if rec[4].is_empty() {
            None
        } else {
            let v: f64 = rec[4]
                .parse()
                .map_err(|_| bad(format!("invalid prcp_mm {:?}", &rec[4])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(bad(format!("precipitation must be a nonnegative number, got {v}")));
            }
            Some(v)
        };

        let acc = stations.entry(id.clone()).or_insert(Acc {
            lon,
            lat,
            rows: Vec::new(),
        });
        if acc.lon != lon || acc.lat != lat {
            return Err(bad(format!(
                "station {id} changes coordinates from ({}, {}) to ({lon}, {lat})",
                acc.lon, acc.lat
            )));
        }
        acc.rows.push((date, value, line));
    }

    let mut out = Vec::with_capacity(stations.len());
    for (id, mut acc) in stations {
        acc.rows.sort_by_key(|r| (r.0, r.2));
        if let Some(w) = acc.rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateRecord {
                station: id,
                date: w[1].0.to_string(),
                line: w[1].2.max(w[0].2),
            });
        }
        out.push(DailySeries {
            station_id: id,
            lon: acc.lon,
            lat: acc.lat,
            dates: acc.rows.iter().map(|r| r.0).collect(),
            values: acc.rows.iter().map(|r| r.1).collect(),
        });
    }
    Ok(out)
}

/// Fraction of calendar days in `[start, end]` with a value present.
pub fn station_completeness(series: &DailySeries, start: NaiveDate, end: NaiveDate) -> f64 {
    if end < start {
        return 0.0;
    }
    let days = (end - start).num_days() + 1;
    let present = series.window(start, end).iter().filter(|v| v.is_some()).count();
    present as f64 / days as f64
}

/// Seasonal maxima for season-years `start_year..=end_year`.
///
/// A block is usable only when at least two thirds of its days are present;
/// otherwise its maximum is `None`. The missing fraction is always reported.
pub fn extract_block_maxima(
    series: &DailySeries,
    season: Season,
    start_year: i32,
    end_year: i32,
) -> Result<BlockMaximaSeries> {
    if end_year < start_year {
        return Err(Error::invalid(format!(
            "end year {end_year} precedes start year {start_year}"
        )));
    }
    let n = (end_year - start_year + 1) as usize;
    let mut years = Vec::with_capacity(n);
    let mut maxima = Vec::with_capacity(n);
    let mut missing_fraction = Vec::with_capacity(n);
    for year in start_year..=end_year {
        let (a, b) = season.date_range(year);
        let days = (b - a).num_days() as usize + 1;
        let present: Vec<f64> = series.window(a, b).iter().flatten().copied().collect();
        let missing = days - present.len();
        years.push(year);
        missing_fraction.push(missing as f64 / days as f64);
        maxima.push(if 3 * missing <= days && !present.is_empty() {
            present.into_iter().reduce(f64::max)
        } else {
            None
        });
    }
    Ok(BlockMaximaSeries {
        station_id: series.station_id.clone(),
        lon: series.lon,
        lat: series.lat,
        season,
        period: (start_year, end_year),
        years,
        maxima,
        missing_fraction,
    })
}

/// Write block maxima in the documented CSV schema.
pub fn write_block_maxima<W: Write>(writer: W, series: &[BlockMaximaSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MAXIMA_HEADER)?;
    for s in series {
        for i in 0..s.len() {
            w.write_record([
                s.station_id.clone(),
                s.lon.to_string(),
                s.lat.to_string(),
                s.season.to_string(),
                s.years[i].to_string(),
                s.maxima[i].map(|v| v.to_string()).unwrap_or_default(),
                s.missing_fraction[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<block maxima>", e))?;
    Ok(())
}

/// Read block maxima back, grouped by (station, season) and sorted by year.
/// Each group's analysis period is its first through last year; years must be
/// consecutive.
pub fn read_block_maxima<R: Read>(reader: R) -> Result<Vec<BlockMaximaSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(MAXIMA_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}", MAXIMA_HEADER.join(",")),
        });
    }
    let mut groups: BTreeMap<(String, Season), Vec<(i32, f64, f64, Option<f64>, f64, u64)>> =
        BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("invalid number {:?} in column {}", &rec[i], MAXIMA_HEADER[i])))
        };
        let season: Season = rec[3].parse().map_err(|_| bad(format!("invalid season {:?}", &rec[3])))?;
        let year: i32 = rec[4].parse().map_err(|_| bad(format!("invalid year {:?}", &rec[4])))?;
        let max = if rec[5].is_empty() { None } else { Some(num(5)?) };
        if max.is_some_and(|m| m < 0.0) {
            return Err(bad("negative block maximum".into()));
        }
        groups
            .entry((rec[0].to_string(), season))
            .or_default()
            .push((year, num(1)?, num(2)?, max, num(6)?, line));
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((id, season), mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        for w in rows.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::Parse {
                    line: w[1].5,
                    message: format!("station {id} {season}: years must be consecutive"),
                });
            }
        }
        let first = rows[0].0;
        let last = rows[rows.len() - 1].0;
        out.push(BlockMaximaSeries {
            station_id: id,
            lon: rows[0].1,
            lat: rows[0].2,
            season,
            period: (first, last),
            years: rows.iter().map(|r| r.0).collect(),
            maxima: rows.iter().map(|r| r.3).collect(),
            missing_fraction: rows.iter().map(|r| r.4).collect(),
        });
    }
    Ok(out)
}

/// Convenience: the day of the season-year a date belongs to, if any.
pub fn season_year_of(date: NaiveDate) -> (Season, i32) {
    match date.month() {
        12 => (Season::DJF, date.year() + 1),
        1 | 2 => (Season::DJF, date.year()),
        3..=5 => (Season::MAM, date.year()),
        6..=8 => (Season::JJA, date.year()),
        _ => (Season::SON, date.year()),
    }
}
