#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use climex::ingest::{write_block_maxima, Season};
use climex::spatial::GridSpec;
use climex::synthetic::{synthetic_network, PlantedTrend, SyntheticConfig};

pub fn climex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_climex"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn small_grid() -> GridSpec {
    GridSpec {
        lon_min: -100.0,
        lon_max: -94.0,
        lat_min: 38.0,
        lat_max: 44.0,
        resolution: 1.0,
    }
}

/// Synthetic maxima for every season under `dir/maxima`, plus a config.
pub fn write_synthetic_run(dir: &Path, seasons: &[Season], trend: Option<PlantedTrend>, extra: &str) -> PathBuf {
    let maxima = dir.join("maxima");
    fs::create_dir_all(&maxima).unwrap();
    for (k, &season) in seasons.iter().enumerate() {
        let net = synthetic_network(&SyntheticConfig {
            grid: small_grid(),
            stations: 24,
            years: 25,
            season,
            trend,
            mu0: 30.0 + 5.0 * k as f64,
            seed: 10 + k as u64,
            ..Default::default()
        })
        .unwrap();
        let f = fs::File::create(maxima.join(format!("{season}.csv"))).unwrap();
        write_block_maxima(f, &net.stations).unwrap();
    }
    let seasons: Vec<String> = seasons.iter().map(|s| format!("\"{s}\"")).collect();
    let cfg = format!(
        r#"{{
  "maxima_dir": "maxima",
  "grid": {{"lon_min": -100.0, "lon_max": -94.0, "lat_min": 38.0, "lat_max": 44.0, "resolution": 1.0}},
  "seasons": [{}],
  "first_year": 1970,
  "last_year": 1994,
  "bootstrap": 20,
  "permutations": 20,
  "seed": 7,
  "output": "out"{extra}
}}"#,
        seasons.join(", ")
    );
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    path
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
