//! JSON run configuration with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use climex::changes::ChangeMetric;
use climex::gev::TrendModel;
use climex::ingest::Season;
use climex::spatial::GridSpec;
use climex::testing::DEFAULT_Q_LEVELS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn default_seasons() -> Vec<Season> {
    Season::ALL.to_vec()
}

fn default_model() -> TrendModel {
    TrendModel::M0
}

fn default_metric() -> ChangeMetric {
    ChangeMetric::Relative
}

fn default_r() -> f64 {
    20.0
}

fn default_replicates() -> usize {
    250
}

fn default_q() -> Vec<f64> {
    DEFAULT_Q_LEVELS.to_vec()
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Relative paths are taken relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Daily records, `station_id,lon,lat,date,prcp_mm`; needed by `extract`.
    #[serde(default)]
    pub daily: Option<PathBuf>,
    /// Where block maxima are read from; defaults to `<output>/maxima`.
    #[serde(default)]
    pub maxima_dir: Option<PathBuf>,
    /// Cells excluded per season, `lon,lat,season`; used by `annual`.
    #[serde(default)]
    pub mask: Option<PathBuf>,
    pub grid: GridSpec,
    #[serde(default = "default_seasons")]
    pub seasons: Vec<Season>,
    pub first_year: i32,
    pub last_year: i32,
    /// Change endpoints; default to the first and last year.
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default)]
    pub t2: Option<f64>,
    #[serde(default = "default_model")]
    pub model: TrendModel,
    #[serde(default = "default_metric")]
    pub metric: ChangeMetric,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_replicates")]
    pub bootstrap: usize,
    #[serde(default = "default_replicates")]
    pub permutations: usize,
    #[serde(default = "default_q")]
    pub q_levels: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.daily.as_mut().map(rebase);
        cfg.maxima_dir.as_mut().map(rebase);
        cfg.mask.as_mut().map(rebase);
        rebase(&mut cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seasons.is_empty() {
            return Err(CliError::usage("no seasons configured"));
        }
        if self.last_year <= self.first_year {
            return Err(CliError::usage("last_year must follow first_year"));
        }
        if let Some(q) = self.q_levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(CliError::usage(format!("q level {q} is outside (0, 1)")));
        }
        if self.q_levels.is_empty() {
            return Err(CliError::usage("no q levels configured"));
        }
        if !(self.r > 1.0) {
            return Err(CliError::usage(format!("return period must exceed 1, got {}", self.r)));
        }
        if let Some(m) = &self.mask {
            require_file(m)?;
        }
        Ok(())
    }

    pub fn t1(&self) -> f64 {
        self.t1.unwrap_or(f64::from(self.first_year))
    }

    pub fn t2(&self) -> f64 {
        self.t2.unwrap_or(f64::from(self.last_year))
    }

    pub fn maxima_dir(&self) -> PathBuf {
        self.maxima_dir.clone().unwrap_or_else(|| self.output.join("maxima"))
    }

    /// SHA-256 of the canonical JSON form, leaving out where outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{}: no such file", path.display())))
    }
}
