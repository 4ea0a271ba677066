use rayon::prelude::*;

use super::plan::{ResampleKind, ResamplePlan};
use crate::error::{Error, Result};
use crate::testing::{Provenance, ZScoreField};

/// A replicate is dropped when more than this fraction of stations fail.
pub const MAX_FAILED_STATIONS: f64 = 0.10;

/// Resampling fails when more than this fraction of replicates is dropped.
pub const MAX_DROPPED_REPLICATES: f64 = 0.25;

pub fn replicate_survives(failed: usize, stations: usize) -> bool {
    failed as f64 <= MAX_FAILED_STATIONS * stations as f64
}

/// One unit of replicate work.
pub trait ReplicateRunner: Sync {
    type Output: Send;

    /// Run replicate `index` with its year sequence. `Ok(None)` drops it.
    fn run(&self, kind: ResampleKind, index: usize, sequence: &[usize]) -> Result<Option<Self::Output>>;
}

/// Replicate outputs in index order; `None` for dropped replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicates<T> {
    pub kind: ResampleKind,
    pub outputs: Vec<Option<T>>,
}

impl<T> Replicates<T> {
    pub fn dropped(&self) -> usize {
        self.outputs.iter().filter(|o| o.is_none()).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &T> {
        self.outputs.iter().flatten()
    }
}

/// Run every replicate of `plan`, in parallel, collecting in index order.
pub fn run_replicates<R: ReplicateRunner>(runner: &R, plan: &ResamplePlan) -> Result<Replicates<R::Output>> {
    let outputs = plan
        .sequences
        .par_iter()
        .enumerate()
        .map(|(i, seq)| runner.run(plan.kind, i, seq))
        .collect::<Result<Vec<_>>>()?;
    let out = Replicates {
        kind: plan.kind,
        outputs,
    };
    check_dropped(out.dropped(), plan.len())?;
    Ok(out)
}

pub fn check_dropped(dropped: usize, total: usize) -> Result<()> {
    if dropped as f64 > MAX_DROPPED_REPLICATES * total as f64 {
        Err(Error::ResamplingFailure { dropped, total })
    } else {
        Ok(())
    }
}

/// Sample standard deviation (n − 1). Exactly zero when all values are
/// equal; `None` for fewer than two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return Some(0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Per-cell standard deviation across replicate change fields.
pub fn standard_errors<'a>(
    fields: impl IntoIterator<Item = &'a Vec<Option<f64>>>,
    n_cells: usize,
) -> Vec<Option<f64>> {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_cells];
    for f in fields {
        assert_eq!(f.len(), n_cells, "replicate field size");
        for (col, v) in columns.iter_mut().zip(f) {
            if let Some(v) = v {
                col.push(*v);
            }
        }
    }
    columns.iter().map(|c| sample_sd(c)).collect()
}

/// `Δ / se`, undefined where either is missing or the se is zero.
pub fn z_scores(delta: &[Option<f64>], se: &[Option<f64>]) -> Vec<Option<f64>> {
    delta
        .iter()
        .zip(se)
        .map(|(d, s)| match (d, s) {
            (Some(d), Some(s)) if *s > 0.0 => Some(d / s),
            _ => None,
        })
        .collect()
}

/// Standardize permutation changes by their shared per-cell standard
/// deviation across replicates.
pub fn permutation_z_fields(replicates: &Replicates<Vec<Option<f64>>>, n_cells: usize) -> Vec<ZScoreField> {
    let se = standard_errors(replicates.completed(), n_cells);
    replicates
        .outputs
        .iter()
        .enumerate()
        .filter_map(|(h, d)| {
            d.as_ref().map(|d| ZScoreField {
                z: z_scores(d, &se),
                provenance: Provenance::Permutation(h),
            })
        })
        .collect()
}

/// A pipeline that produces a per-cell change field for a resampled data set.
pub trait ChangePipeline: ReplicateRunner<Output = Vec<Option<f64>>> {
    fn n_cells(&self) -> usize;
}

/// Bootstrap standard error of the change at every cell.
pub fn bootstrap_standard_errors<P: ChangePipeline>(pipeline: &P, plan: &ResamplePlan) -> Result<Vec<Option<f64>>> {
    if plan.kind != ResampleKind::Bootstrap {
        return Err(Error::invalid("bootstrap standard errors need a bootstrap plan"));
    }
    let reps = run_replicates(pipeline, plan)?;
    Ok(standard_errors(reps.completed(), pipeline.n_cells()))
}

/// Permutation z-score fields, one per completed replicate.
pub fn permutation_null<P: ChangePipeline>(pipeline: &P, plan: &ResamplePlan) -> Result<Vec<ZScoreField>> {
    if plan.kind != ResampleKind::Permutation {
        return Err(Error::invalid("the permutation null needs a permutation plan"));
    }
    let reps = run_replicates(pipeline, plan)?;
    Ok(permutation_z_fields(&reps, pipeline.n_cells()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resampling::make_plan;

    struct Fixed(Vec<Option<Vec<Option<f64>>>>);

    impl ReplicateRunner for Fixed {
        type Output = Vec<Option<f64>>;
        fn run(&self, _: ResampleKind, index: usize, _: &[usize]) -> Result<Option<Self::Output>> {
            Ok(self.0[index].clone())
        }
    }

    impl ChangePipeline for Fixed {
        fn n_cells(&self) -> usize {
            1
        }
    }

    #[test]
    fn sd_of_one_two_three() {
        assert_eq!(sample_sd(&[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(sample_sd(&[0.1; 7]), Some(0.0));
        assert_eq!(sample_sd(&[1.0]), None);
    }

    #[test]
    fn bootstrap_se_and_zero_se() {
        let p = Fixed(vec![Some(vec![Some(1.0)]), Some(vec![Some(2.0)]), Some(vec![Some(3.0)])]);
        let plan = make_plan(ResampleKind::Bootstrap, 5, 3, 1).unwrap();
        assert_eq!(bootstrap_standard_errors(&p, &plan).unwrap(), vec![Some(1.0)]);
        let flat = Fixed(vec![Some(vec![Some(2.0)]); 3]);
        let se = bootstrap_standard_errors(&flat, &plan).unwrap();
        assert_eq!(se, vec![Some(0.0)]);
        assert_eq!(z_scores(&[Some(1.0)], &se), vec![None]);
    }

    #[test]
    fn shared_permutation_se() {
        let p = Fixed(vec![Some(vec![Some(-1.0)]), Some(vec![Some(1.0)])]);
        let plan = make_plan(ResampleKind::Permutation, 5, 2, 1).unwrap();
        let z = permutation_null(&p, &plan).unwrap();
        let expect = 1.0 / 2f64.sqrt();
        assert!((z[0].z[0].unwrap() + expect).abs() < 1e-15);
        assert!((z[1].z[0].unwrap() - expect).abs() < 1e-15);
        assert_eq!(z[1].provenance, Provenance::Permutation(1));
        let zero = Fixed(vec![Some(vec![Some(0.0)]); 2]);
        assert!(permutation_null(&zero, &plan).unwrap().iter().all(|f| f.z[0].is_none()));
        assert!(permutation_null(&zero, &make_plan(ResampleKind::Bootstrap, 5, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn dropped_replicate_policy() {
        let plan = make_plan(ResampleKind::Bootstrap, 5, 4, 1).unwrap();
        let one = Fixed(vec![None, Some(vec![Some(1.0)]), Some(vec![Some(2.0)]), Some(vec![Some(4.0)])]);
        let reps = run_replicates(&one, &plan).unwrap();
        assert_eq!(reps.dropped(), 1);
        let two = Fixed(vec![None, None, Some(vec![Some(2.0)]), Some(vec![Some(4.0)])]);
        assert!(matches!(
            run_replicates(&two, &plan),
            Err(Error::ResamplingFailure { dropped: 2, total: 4 })
        ));
        assert!(replicate_survives(8, 80) && !replicate_survives(9, 80));
    }
}
