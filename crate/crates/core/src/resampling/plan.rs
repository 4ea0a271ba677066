use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BlockMaximaSeries;
use crate::rng::Streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleKind {
    /// Whole years drawn with replacement; maxima keep their years.
    Bootstrap,
    /// Years shuffled without replacement; maxima are read as if they came
    /// from the original consecutive years.
    Permutation,
}

impl ResampleKind {
    pub fn label(self) -> &'static str {
        match self {
            ResampleKind::Bootstrap => "bootstrap",
            ResampleKind::Permutation => "permutation",
        }
    }
}

impl fmt::Display for ResampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ResampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(ResampleKind::Bootstrap),
            "permutation" => Ok(ResampleKind::Permutation),
            _ => Err(Error::invalid(format!("unknown resampling kind `{s}`"))),
        }
    }
}

/// Year sequences for every replicate. Indices are 0-based positions into
/// the analysis years.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub kind: ResampleKind,
    pub seed: u64,
    pub sequences: Vec<Vec<usize>>,
}

impl ResamplePlan {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Length of every sequence.
    pub fn years(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }
}

/// Stream family for one kind of replicate under a run seed.
pub fn plan_streams(kind: ResampleKind, seed: u64) -> Streams {
    Streams::new(seed).child(kind.label())
}

/// Draw `replicates` sequences of length `t`. Replicate `i` depends only on
/// `(seed, kind, i)`.
pub fn make_plan(kind: ResampleKind, t: usize, replicates: usize, seed: u64) -> Result<ResamplePlan> {
    if t < 2 || replicates < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 years and 2 replicates, got {t} and {replicates}"
        )));
    }
    let streams = plan_streams(kind, seed);
    let sequences = (0..replicates)
        .map(|i| {
            let mut rng = streams.rng(i as u64);
            match kind {
                ResampleKind::Bootstrap => (0..t).map(|_| rng.random_range(0..t)).collect(),
                ResampleKind::Permutation => {
                    let mut s: Vec<usize> = (0..t).collect();
                    s.shuffle(&mut rng);
                    s
                }
            }
        })
        .collect();
    Ok(ResamplePlan {
        kind,
        seed,
        sequences,
    })
}

/// Reorder one station's maxima by `sequence`.
pub fn resample_maxima(
    maxima: &BlockMaximaSeries,
    sequence: &[usize],
    kind: ResampleKind,
) -> Result<BlockMaximaSeries> {
    if sequence.len() != maxima.len() {
        return Err(Error::invalid(format!(
            "sequence of length {} for a series of {} years",
            sequence.len(),
            maxima.len()
        )));
    }
    if let Some(&bad) = sequence.iter().find(|&&i| i >= maxima.len()) {
        return Err(Error::invalid(format!("year index {bad} out of range")));
    }
    let mut out = maxima.clone();
    out.maxima = sequence.iter().map(|&i| maxima.maxima[i]).collect();
    out.missing_fraction = sequence.iter().map(|&i| maxima.missing_fraction[i]).collect();
    if kind == ResampleKind::Bootstrap {
        out.years = sequence.iter().map(|&i| maxima.years[i]).collect();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::{fit_gev, TrendModel};
    use crate::ingest::Season;
    use crate::spatial::LonLat;

    fn series(values: &[f64]) -> BlockMaximaSeries {
        BlockMaximaSeries::from_values("s", LonLat::new(0.0, 0.0), Season::JJA, 1950, values)
    }

    #[test]
    fn permutation_plans_are_bijections() {
        let p = make_plan(ResampleKind::Permutation, 4, 50, 7).unwrap();
        for s in &p.sequences {
            let mut sorted = s.clone();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn bootstrap_plans_stay_in_range_and_repeat() {
        let p = make_plan(ResampleKind::Bootstrap, 68, 20, 7).unwrap();
        assert!(p.sequences.iter().flatten().all(|&i| i < 68));
        assert!(p.sequences.iter().any(|s| {
            let mut u = s.clone();
            u.sort();
            u.dedup();
            u.len() < 68
        }));
        assert_eq!(p.years(), 68);
    }

    #[test]
    fn plans_are_deterministic() {
        let a = make_plan(ResampleKind::Bootstrap, 30, 10, 99).unwrap();
        assert_eq!(a, make_plan(ResampleKind::Bootstrap, 30, 10, 99).unwrap());
        assert_ne!(a, make_plan(ResampleKind::Bootstrap, 30, 10, 100).unwrap());
        // a longer plan extends a shorter one
        let b = make_plan(ResampleKind::Bootstrap, 30, 25, 99).unwrap();
        assert_eq!(a.sequences[..], b.sequences[..10]);
        assert!(make_plan(ResampleKind::Permutation, 1, 10, 0).is_err());
        assert!(make_plan(ResampleKind::Permutation, 5, 1, 0).is_err());
    }

    #[test]
    fn identity_sequence_is_a_no_op() {
        let s = series(&[3.0, 1.0, 4.0, 1.5]);
        for kind in [ResampleKind::Bootstrap, ResampleKind::Permutation] {
            assert_eq!(resample_maxima(&s, &[0, 1, 2, 3], kind).unwrap(), s);
        }
        assert!(resample_maxima(&s, &[0, 1], ResampleKind::Bootstrap).is_err());
    }

    #[test]
    fn bootstrap_moves_years_permutation_does_not() {
        let s = series(&[3.0, 1.0, 4.0, 1.5]);
        let b = resample_maxima(&s, &[1, 1, 1, 1], ResampleKind::Bootstrap).unwrap();
        assert_eq!(b.years, vec![1951; 4]);
        assert_eq!(b.maxima, vec![Some(1.0); 4]);
        let p = resample_maxima(&s, &[3, 2, 1, 0], ResampleKind::Permutation).unwrap();
        assert_eq!(p.years, s.years);
        assert_eq!(p.maxima, vec![Some(1.5), Some(4.0), Some(1.0), Some(3.0)]);
    }

    #[test]
    fn reversal_flips_trend() {
        let values: Vec<f64> = (0..60)
            .map(|i| 20.0 + 0.3 * i as f64 + 3.0 * ((i * 37 % 11) as f64 / 11.0 - 0.5))
            .collect();
        let s = series(&values);
        let rev: Vec<usize> = (0..60).rev().collect();
        let forward = fit_gev(&s, TrendModel::M0).unwrap();
        let back = fit_gev(&resample_maxima(&s, &rev, ResampleKind::Permutation).unwrap(), TrendModel::M0).unwrap();
        assert!(forward.params.mu1 > 0.2 && back.params.mu1 < -0.2);
    }
}
