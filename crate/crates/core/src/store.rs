//! Replicate results persisted under a run directory so long analyses can
//! resume: `run/<kind>/<index>.csv` holds a completed replicate's gridded
//! coefficients and `run/<kind>/<index>.dropped` marks a dropped one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gev::TrendModel;
use crate::io::{read_coefficients, write_coefficients};
use crate::pipeline::{ReplicateRecord, ReplicateStore};
use crate::resampling::ResampleKind;
use crate::spatial::LonLat;

/// Write `bytes` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    cells: Vec<LonLat>,
    model: TrendModel,
}

impl RunStore {
    /// Store rooted at `dir/run`.
    pub fn new(dir: impl AsRef<Path>, cells: Vec<LonLat>, model: TrendModel) -> Self {
        RunStore {
            root: dir.as_ref().join("run"),
            cells,
            model,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: ResampleKind, index: usize, ext: &str) -> PathBuf {
        self.root.join(kind.label()).join(format!("{index}.{ext}"))
    }

    /// "completed", "dropped" or "pending" for the manifest.
    pub fn status(&self, kind: ResampleKind, index: usize) -> &'static str {
        if self.path(kind, index, "csv").exists() {
            "completed"
        } else if self.path(kind, index, "dropped").exists() {
            "dropped"
        } else {
            "pending"
        }
    }
}

impl ReplicateStore for RunStore {
    fn load(&self, kind: ResampleKind, index: usize) -> Result<Option<ReplicateRecord>> {
        let csv = self.path(kind, index, "csv");
        if csv.exists() {
            let f = fs::File::open(&csv).map_err(|e| Error::io(&csv, e))?;
            let (cells, params) = read_coefficients(f)?;
            if cells != self.cells {
                return Err(Error::invalid(format!("{} does not match the grid", csv.display())));
            }
            return Ok(Some(ReplicateRecord::Completed(params)));
        }
        if self.path(kind, index, "dropped").exists() {
            return Ok(Some(ReplicateRecord::Dropped));
        }
        Ok(None)
    }

    fn save(&self, kind: ResampleKind, index: usize, record: &ReplicateRecord) -> Result<()> {
        match record {
            ReplicateRecord::Completed(params) => {
                let mut buf = Vec::new();
                write_coefficients(&mut buf, &self.cells, params, self.model)?;
                write_atomic(&self.path(kind, index, "csv"), &buf)
            }
            ReplicateRecord::Dropped => write_atomic(&self.path(kind, index, "dropped"), b""),
        }
    }
}
