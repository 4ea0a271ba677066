//! Empirical false-discovery-rate threshold and field significance from
//! permutation z-scores.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default "low" and "high" confidence FDR levels.
pub const DEFAULT_Q_LEVELS: [f64; 2] = [0.33, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Observed,
    /// Permutation replicate, 0-based.
    Permutation(usize),
}

/// Standardized changes per grid cell; `None` where the standard error is
/// zero or the change is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZScoreField {
    pub z: Vec<Option<f64>>,
    pub provenance: Provenance,
}

impl ZScoreField {
    pub fn observed(z: Vec<Option<f64>>) -> Self {
        ZScoreField {
            z,
            provenance: Provenance::Observed,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrResult {
    pub q: f64,
    /// z cutoff; `+∞` when no cutoff meets the target.
    pub c_star: f64,
    pub rejected: Vec<bool>,
    pub v_hat: f64,
    pub r_hat: usize,
    /// Cells that entered the test.
    pub tested: usize,
    /// Cells left out because a z-score is undefined.
    pub excluded: usize,
}

impl FdrResult {
    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSignificance {
    pub cutoffs: Vec<f64>,
    pub fs: Vec<f64>,
    /// Replicates whose empirical CDF equals the observed one at each cutoff.
    pub ties: Vec<usize>,
}

/// Average over replicates of the number of cells with `|z_h| > c`.
pub fn estimate_false_rejections(null_z: &[ZScoreField], c: f64) -> Result<f64> {
    if null_z.is_empty() {
        return Err(Error::invalid("no permutation fields"));
    }
    if !(c >= 0.0) {
        return Err(Error::invalid(format!("cutoff must be nonnegative, got {c}")));
    }
    let total: usize = null_z
        .iter()
        .map(|f| f.z.iter().flatten().filter(|z| z.abs() > c).count())
        .sum();
    Ok(total as f64 / null_z.len() as f64)
}

/// Cells with a defined observed z and defined z in every replicate.
fn tested_cells(observed: &ZScoreField, null_z: &[ZScoreField]) -> Result<Vec<usize>> {
    if null_z.is_empty() {
        return Err(Error::invalid("no permutation fields"));
    }
    if let Some(f) = null_z.iter().find(|f| f.len() != observed.len()) {
        return Err(Error::invalid(format!(
            "permutation field has {} cells, observed has {}",
            f.len(),
            observed.len()
        )));
    }
    Ok((0..observed.len())
        .filter(|&i| observed.z[i].is_some() && null_z.iter().all(|f| f.z[i].is_some()))
        .collect())
}

fn sorted_abs(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.map(f64::abs).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of entries of an ascending slice strictly greater than `c`.
fn count_above(sorted: &[f64], c: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= c)
}

/// Smallest cutoff `c` among 0 and the observed `|z|` values with
/// `R̂(c) > 0` and `V̂(c)/R̂(c) ≤ q`; cells with `|z| > c` are rejected.
pub fn fdr_threshold(observed: &ZScoreField, null_z: &[ZScoreField], q: f64) -> Result<FdrResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("q must lie in (0, 1), got {q}")));
    }
    let cells = tested_cells(observed, null_z)?;
    let h = null_z.len() as f64;
    let obs = sorted_abs(cells.iter().filter_map(|&i| observed.z[i]));
    let null = sorted_abs(null_z.iter().flat_map(|f| cells.iter().filter_map(|&i| f.z[i])));

    let mut candidates = Vec::with_capacity(obs.len() + 1);
    candidates.push(0.0);
    candidates.extend(obs.iter().copied().filter(|&v| v > 0.0));
    candidates.dedup();

    let mut c_star = f64::INFINITY;
    let (mut v_hat, mut r_hat) = (0.0, 0);
    for &c in &candidates {
        let r = count_above(&obs, c);
        if r == 0 {
            break;
        }
        let v = count_above(&null, c) as f64 / h;
        if v / r as f64 <= q {
            c_star = c;
            v_hat = v;
            r_hat = r;
            break;
        }
    }
    let rejected = observed
        .z
        .iter()
        .enumerate()
        .map(|(i, z)| match z {
            Some(z) => z.abs() > c_star && cells.binary_search(&i).is_ok(),
            None => false,
        })
        .collect();
    Ok(FdrResult {
        q,
        c_star,
        rejected,
        v_hat,
        r_hat,
        tested: cells.len(),
        excluded: observed.len() - cells.len(),
    })
}

/// Fraction of replicates whose `|z|` empirical CDF lies strictly above
/// the observed one at each cutoff, i.e. replicates with a lighter tail
/// than the observed field.
pub fn field_significance(
    observed: &ZScoreField,
    null_z: &[ZScoreField],
    cutoffs: &[f64],
) -> Result<FieldSignificance> {
    if cutoffs.is_empty() {
        return Err(Error::invalid("no cutoffs"));
    }
    let cells = tested_cells(observed, null_z)?;
    let ecdf = |sorted: &[f64], c: f64| {
        if sorted.is_empty() {
            0.0
        } else {
            sorted.partition_point(|&v| v <= c) as f64 / sorted.len() as f64
        }
    };
    let obs = sorted_abs(cells.iter().filter_map(|&i| observed.z[i]));
    let nulls: Vec<Vec<f64>> = null_z
        .iter()
        .map(|f| sorted_abs(cells.iter().filter_map(|&i| f.z[i])))
        .collect();
    let h = nulls.len() as f64;
    let mut fs = Vec::with_capacity(cutoffs.len());
    let mut ties = Vec::with_capacity(cutoffs.len());
    for &c in cutoffs {
        let f = ecdf(&obs, c);
        let (mut above, mut tied) = (0usize, 0usize);
        for n in &nulls {
            let fh = ecdf(n, c);
            if f < fh {
                above += 1;
            } else if f == fh {
                tied += 1;
            }
        }
        fs.push(above as f64 / h);
        ties.push(tied);
    }
    Ok(FieldSignificance {
        cutoffs: cutoffs.to_vec(),
        fs,
        ties,
    })
}
