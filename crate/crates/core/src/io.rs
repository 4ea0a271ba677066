//! CSV formats for gridded fields, decisions and simulation results.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit. Undefined values are empty.

use std::io::{Read, Write};

use crate::changes::ChangeField;
use crate::error::{Error, Result};
use crate::gev::{GevFit, GevParams, TrendModel};
use crate::ingest::{BlockMaximaSeries, Season};
use crate::spatial::{CoefficientField, Grid, LonLat};
use crate::simstudy::SimStudyResult;
use crate::testing::{FdrResult, FieldSignificance, ZScoreField};

pub const COEFFICIENT_HEADER: [&str; 6] = ["lon", "lat", "mu0", "mu1", "sigma", "xi"];
pub const CHANGE_HEADER: [&str; 7] = ["lon", "lat", "delta", "metric", "r", "t1", "t2"];
pub const SIM_HEADER: [&str; 9] = [
    "family",
    "p",
    "n",
    "r",
    "rmse",
    "re_percent",
    "mc_sd",
    "mean_boot_se",
    "failures",
];

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn parse_f64(s: &str, line: u64, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} `{s}`"),
    })
}

fn parse_opt(s: &str, line: u64, what: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line, what).map(Some)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn extra_columns(model: TrendModel) -> Vec<&'static str> {
    let mut v = Vec::new();
    if model.quadratic_location() {
        v.push("mu2");
    }
    if model.scale_trend() {
        v.push("sigma1");
    }
    if model.shape_trend() {
        v.push("xi1");
    }
    v
}

/// `lon,lat,mu0,mu1,sigma,xi`, plus `mu2`, `sigma1`, `xi1` for models
/// that use them.
pub fn write_coefficients<W: Write>(writer: W, cells: &[LonLat], params: &[GevParams], model: TrendModel) -> Result<()> {
    if cells.len() != params.len() {
        return Err(Error::invalid("one coefficient set per cell required"));
    }
    let extra = extra_columns(model);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = COEFFICIENT_HEADER.to_vec();
    header.extend(&extra);
    w.write_record(&header)?;
    for (c, p) in cells.iter().zip(params) {
        let mut row = vec![num(c.lon), num(c.lat), num(p.mu0), num(p.mu1), num(p.sigma0), num(p.xi0)];
        for e in &extra {
            row.push(num(match *e {
                "mu2" => p.mu2,
                "sigma1" => p.sigma1,
                _ => p.xi1,
            }));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_coefficient_field<W: Write>(writer: W, field: &CoefficientField) -> Result<()> {
    write_coefficients(writer, &field.grid.cells, &field.params, field.model)
}

/// Inverse of [`write_coefficients`].
pub fn read_coefficients<R: Read>(reader: R) -> Result<(Vec<LonLat>, Vec<GevParams>)> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < 6 || header.iter().take(6).ne(COEFFICIENT_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", COEFFICIENT_HEADER.join(",")),
        });
    }
    let extra: Vec<String> = header.iter().skip(6).map(str::to_string).collect();
    let mut cells = Vec::new();
    let mut params = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let f = |i: usize, what: &str| parse_f64(&rec[i], line, what);
        cells.push(LonLat::new(f(0, "lon")?, f(1, "lat")?));
        let mut p = GevParams::linear(f(2, "mu0")?, f(3, "mu1")?, f(4, "sigma")?, f(5, "xi")?);
        for (k, name) in extra.iter().enumerate() {
            let v = f(6 + k, name)?;
            match name.as_str() {
                "mu2" => p.mu2 = v,
                "sigma1" => p.sigma1 = v,
                "xi1" => p.xi1 = v,
                _ => {}
            }
        }
        params.push(p);
    }
    Ok((cells, params))
}

/// `lon,lat,delta,metric,r,t1,t2`
pub fn write_change<W: Write>(writer: W, field: &ChangeField) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CHANGE_HEADER)?;
    for (c, d) in field.grid.cells.iter().zip(&field.delta) {
        w.write_record([
            num(c.lon),
            num(c.lat),
            opt(*d),
            field.metric.label().to_string(),
            num(field.r),
            num(field.t1),
            num(field.t2),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Column name for the rejection flag at level `q`, e.g. `reject_q33`.
pub fn reject_column(q: f64) -> String {
    format!("reject_q{}", (q * 100.0).round() as i64)
}

/// `lon,lat,z,reject_q33,reject_q10` (one flag column per FDR level).
pub fn write_decisions<W: Write>(writer: W, grid: &Grid, z: &ZScoreField, fdr: &[FdrResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["lon".to_string(), "lat".to_string(), "z".to_string()];
    header.extend(fdr.iter().map(|f| reject_column(f.q)));
    w.write_record(&header)?;
    for (i, c) in grid.cells.iter().enumerate() {
        let mut row = vec![num(c.lon), num(c.lat), opt(z.z[i])];
        row.extend(fdr.iter().map(|f| u8::from(f.rejected[i]).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `lon,lat,z`
pub fn write_z_field<W: Write>(writer: W, cells: &[LonLat], z: &ZScoreField) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lon", "lat", "z"])?;
    for (c, v) in cells.iter().zip(&z.z) {
        w.write_record([num(c.lon), num(c.lat), opt(*v)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Read a `lon,lat,z` file; extra columns are ignored.
pub fn read_z_field<R: Read>(reader: R) -> Result<(Vec<LonLat>, Vec<Option<f64>>)> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "lon" || &header[1] != "lat" || &header[2] != "z" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header lon,lat,z".into(),
        });
    }
    let mut cells = Vec::new();
    let mut z = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        cells.push(LonLat::new(parse_f64(&rec[0], line, "lon")?, parse_f64(&rec[1], line, "lat")?));
        z.push(parse_opt(&rec[2], line, "z")?);
    }
    Ok((cells, z))
}

/// `cutoff,fs`
pub fn write_field_significance<W: Write>(writer: W, fs: &FieldSignificance) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cutoff", "fs"])?;
    for (c, v) in fs.cutoffs.iter().zip(&fs.fs) {
        w.write_record([num(*c), num(*v)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Per-station observed fits.
pub fn write_station_fits<W: Write>(writer: W, stations: &[BlockMaximaSeries], fits: &[GevFit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "station_id",
        "lon",
        "lat",
        "mu0",
        "mu1",
        "sigma",
        "xi",
        "neg_log_lik",
        "n_blocks",
    ])?;
    for (s, f) in stations.iter().zip(fits) {
        let p = &f.params;
        w.write_record([
            s.station_id.clone(),
            num(s.lon),
            num(s.lat),
            num(p.mu0),
            num(p.mu1),
            num(p.sigma0),
            num(p.xi0),
            num(f.neg_log_lik),
            f.n_blocks.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `family,p,n,r,rmse,re_percent,mc_sd,mean_boot_se,failures`
pub fn write_sim_results<W: Write>(writer: W, result: &SimStudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SIM_HEADER)?;
    for row in &result.rows {
        w.write_record([
            row.family.label().to_string(),
            num(row.p),
            row.n.to_string(),
            num(row.r),
            num(row.rmse),
            num(row.re_percent),
            num(row.mc_sd),
            num(row.mean_boot_se),
            row.failures.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `n,sup_distance`
pub fn write_convergence<W: Write>(writer: W, rows: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "sup_distance"])?;
    for (n, d) in rows {
        w.write_record([n.to_string(), num(*d)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Points to krige: `lon,lat,value`.
pub fn read_points<R: Read>(reader: R) -> Result<(Vec<LonLat>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(["lon", "lat", "value"]) {
        return Err(Error::Parse {
            line: 1,
            message: "expected header lon,lat,value".into(),
        });
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        coords.push(LonLat::new(parse_f64(&rec[0], line, "lon")?, parse_f64(&rec[1], line, "lat")?));
        values.push(parse_f64(&rec[2], line, "value")?);
    }
    Ok((coords, values))
}

/// Cells excluded per season: `lon,lat,season`.
pub fn read_mask<R: Read>(reader: R) -> Result<Vec<(LonLat, Season)>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(["lon", "lat", "season"]) {
        return Err(Error::Parse {
            line: 1,
            message: "expected header lon,lat,season".into(),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let season: Season = rec[2].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("unknown season `{}`", &rec[2]),
        })?;
        out.push((
            LonLat::new(parse_f64(&rec[0], line, "lon")?, parse_f64(&rec[1], line, "lat")?),
            season,
        ));
    }
    Ok(out)
}
