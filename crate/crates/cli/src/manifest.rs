//! Run manifests: enough to resume a run and to tell whether two runs used
//! the same inputs. No timestamps, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use climex::ingest::Season;
use climex::resampling::{plan_streams, ResampleKind};
use climex::store::{write_atomic, RunStore};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub index: usize,
    pub seed: u64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    #[serde(default)]
    pub season: Option<Season>,
    pub seed: u64,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    #[serde(default)]
    pub time_origin: Option<f64>,
    #[serde(default)]
    pub stations_used: usize,
    #[serde(default)]
    pub stations_failed: usize,
    #[serde(default)]
    pub replicates: BTreeMap<String, Vec<ReplicateEntry>>,
    pub complete: bool,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("climex".to_string(), climex::VERSION.to_string()),
        ("climex-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Manifest {
            command: command.to_string(),
            season: None,
            seed,
            config_hash,
            versions: versions(),
            time_origin: None,
            stations_used: 0,
            stations_failed: 0,
            replicates: BTreeMap::new(),
            complete: false,
        }
    }

    /// Refresh replicate seeds and statuses from the store.
    pub fn record_replicates(&mut self, store: &RunStore, counts: &[(ResampleKind, usize)]) {
        for &(kind, n) in counts {
            let streams = plan_streams(kind, self.seed);
            let entries = (0..n)
                .map(|i| ReplicateEntry {
                    index: i,
                    seed: streams.stream_seed(i as u64),
                    status: store.status(kind, i).to_string(),
                })
                .collect();
            self.replicates.insert(kind.label().to_string(), entries);
        }
    }

    pub fn read(dir: &Path) -> Result<Option<Self>, CliError> {
        let path = dir.join(FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        Ok(write_atomic(&dir.join(FILE), &bytes)?)
    }
}
