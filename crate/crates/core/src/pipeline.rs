//! The per-season analysis: station fits, kriging to the grid, change
//! fields, bootstrap standard errors, permutation null, FDR decisions.

use rayon::prelude::*;
use serde::Serialize;

use crate::changes::{annual_change, AnnualChange, ChangeMetric, ChangeSpec, SeasonalReturnSet};
use crate::error::{Error, Result};
use crate::gev::{fit_gev, fit_gev_with, FitOptions, GevFit, GevParams, TrendModel};
use crate::ingest::{BlockMaximaSeries, Season};
use crate::resampling::{
    make_plan, permutation_z_fields, replicate_survives, resample_maxima, run_replicates,
    standard_errors, z_scores, ChangePipeline, ReplicateRunner, Replicates, ResampleKind, ResamplePlan,
};
use crate::spatial::{CoefficientField, CoefficientSmoother, Grid, LonLat, MIN_KRIGING_STATIONS};
use crate::testing::{fdr_threshold, field_significance, FdrResult, FieldSignificance, ZScoreField};

/// A station left out of the analysis and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationFailure {
    pub station_id: String,
    pub reason: String,
}

/// Observed fits and kriging maps for one season, ready to be rerun on
/// resampled data.
///
/// Kriging hyperparameters are estimated once from the observed station
/// coefficients and kept fixed for every replicate.
#[derive(Debug, Clone)]
pub struct SeasonPipeline {
    stations: Vec<BlockMaximaSeries>,
    fits: Vec<GevFit>,
    failures: Vec<StationFailure>,
    smoother: CoefficientSmoother,
    grid: Grid,
    model: TrendModel,
    time_origin: f64,
}

fn usable(fit: Result<GevFit>) -> std::result::Result<GevFit, String> {
    match fit {
        Ok(f) if f.converged => Ok(f),
        Ok(_) => Err("fit did not converge".to_string()),
        Err(e) => Err(e.to_string()),
    }
}

impl SeasonPipeline {
    pub fn new(stations: &[BlockMaximaSeries], grid: &Grid, model: TrendModel) -> Result<Self> {
        let first = stations.first().ok_or_else(|| Error::invalid("no stations"))?;
        if let Some(s) = stations
            .iter()
            .find(|s| s.season != first.season || s.period != first.period || s.len() != first.len())
        {
            return Err(Error::invalid(format!(
                "station {} does not share the season and years of {}",
                s.station_id, first.station_id
            )));
        }
        let results: Vec<_> = stations.par_iter().map(|s| usable(fit_gev(s, model))).collect();
        let mut kept = Vec::new();
        let mut fits = Vec::new();
        let mut failures = Vec::new();
        for (s, r) in stations.iter().zip(results) {
            match r {
                Ok(f) => {
                    kept.push(s.clone());
                    fits.push(f);
                }
                Err(reason) => failures.push(StationFailure {
                    station_id: s.station_id.clone(),
                    reason,
                }),
            }
        }
        if kept.len() < MIN_KRIGING_STATIONS {
            return Err(Error::InsufficientData {
                needed: MIN_KRIGING_STATIONS,
                got: kept.len(),
            });
        }
        let coords: Vec<LonLat> = kept.iter().map(|s| s.coord()).collect();
        let params: Vec<GevParams> = fits.iter().map(|f| f.params).collect();
        let smoother = CoefficientSmoother::fit(&coords, &params, model, &grid.cells)?;
        Ok(SeasonPipeline {
            stations: kept,
            fits,
            failures,
            smoother,
            grid: grid.clone(),
            model,
            time_origin: first.time_origin(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> TrendModel {
        self.model
    }

    pub fn time_origin(&self) -> f64 {
        self.time_origin
    }

    /// Number of years in every station's series.
    pub fn years(&self) -> usize {
        self.stations[0].len()
    }

    pub fn stations(&self) -> &[BlockMaximaSeries] {
        &self.stations
    }

    pub fn station_fits(&self) -> &[GevFit] {
        &self.fits
    }

    pub fn failures(&self) -> &[StationFailure] {
        &self.failures
    }

    pub fn smoother(&self) -> &CoefficientSmoother {
        &self.smoother
    }

    /// Smoothed observed coefficients.
    pub fn observed(&self) -> Result<CoefficientField> {
        let params: Vec<GevParams> = self.fits.iter().map(|f| f.params).collect();
        Ok(self.field(self.smoother.apply(&params)?))
    }

    pub fn field(&self, params: Vec<GevParams>) -> CoefficientField {
        CoefficientField {
            grid: self.grid.clone(),
            model: self.model,
            time_origin: self.time_origin,
            params,
        }
    }

    /// Smoothed coefficients for one resampled data set, or `None` if too
    /// many stations failed to fit. Every station gets the same sequence.
    pub fn replicate(&self, kind: ResampleKind, sequence: &[usize]) -> Result<Option<Vec<GevParams>>> {
        let mut params = Vec::with_capacity(self.stations.len());
        let mut keep = Vec::with_capacity(self.stations.len());
        for (i, (s, f)) in self.stations.iter().zip(&self.fits).enumerate() {
            let resampled = resample_maxima(s, sequence, kind)?;
            if let Ok(fit) = usable(fit_gev_with(&resampled, self.model, &FitOptions::warm(f.params))) {
                params.push(fit.params);
                keep.push(i);
            }
        }
        let failed = self.stations.len() - keep.len();
        if !replicate_survives(failed, self.stations.len()) {
            return Ok(None);
        }
        let smoothed = if failed == 0 {
            self.smoother.apply(&params)?
        } else {
            self.smoother.restricted(&keep)?.apply(&params)?
        };
        Ok(Some(smoothed))
    }
}

/// Outcome of one replicate as persisted between runs.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplicateRecord {
    Completed(Vec<GevParams>),
    Dropped,
}

impl ReplicateRecord {
    pub fn into_params(self) -> Option<Vec<GevParams>> {
        match self {
            ReplicateRecord::Completed(p) => Some(p),
            ReplicateRecord::Dropped => None,
        }
    }
}

/// Where finished replicates are kept, so interrupted runs can resume.
pub trait ReplicateStore: Sync {
    fn load(&self, kind: ResampleKind, index: usize) -> Result<Option<ReplicateRecord>>;
    fn save(&self, kind: ResampleKind, index: usize, record: &ReplicateRecord) -> Result<()>;
}

/// Keeps nothing.
pub struct NoStore;

impl ReplicateStore for NoStore {
    fn load(&self, _: ResampleKind, _: usize) -> Result<Option<ReplicateRecord>> {
        Ok(None)
    }

    fn save(&self, _: ResampleKind, _: usize, _: &ReplicateRecord) -> Result<()> {
        Ok(())
    }
}

/// Replicate runner producing smoothed coefficients, reusing stored results.
pub struct CoefficientRunner<'a, S: ReplicateStore> {
    pub pipeline: &'a SeasonPipeline,
    pub store: &'a S,
}

impl<S: ReplicateStore> ReplicateRunner for CoefficientRunner<'_, S> {
    type Output = Vec<GevParams>;

    fn run(&self, kind: ResampleKind, index: usize, sequence: &[usize]) -> Result<Option<Vec<GevParams>>> {
        if let Some(rec) = self.store.load(kind, index)? {
            return Ok(rec.into_params());
        }
        let out = self.pipeline.replicate(kind, sequence)?;
        let rec = match &out {
            Some(p) => ReplicateRecord::Completed(p.clone()),
            None => ReplicateRecord::Dropped,
        };
        self.store.save(kind, index, &rec)?;
        Ok(out)
    }
}

/// Replicate runner producing change fields directly.
pub struct ChangeRunner<'a> {
    pub pipeline: &'a SeasonPipeline,
    pub change: ChangeSpec,
}

impl ReplicateRunner for ChangeRunner<'_> {
    type Output = Vec<Option<f64>>;

    fn run(&self, kind: ResampleKind, _: usize, sequence: &[usize]) -> Result<Option<Vec<Option<f64>>>> {
        Ok(self
            .pipeline
            .replicate(kind, sequence)?
            .map(|p| self.change.deltas(&p, self.pipeline.time_origin)))
    }
}

impl ChangePipeline for ChangeRunner<'_> {
    fn n_cells(&self) -> usize {
        self.pipeline.grid.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub model: TrendModel,
    pub change: ChangeSpec,
    pub bootstrap: usize,
    pub permutations: usize,
    pub seed: u64,
    pub q_levels: Vec<f64>,
    pub fs_cutoffs: Vec<f64>,
}

/// Cutoffs 0, 0.25, …, 4 for field significance.
pub fn default_fs_cutoffs() -> Vec<f64> {
    (0..=16).map(|i| f64::from(i) * 0.25).collect()
}

/// Everything derived from change fields: standard errors, z-scores, FDR
/// decisions and field significance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceTest {
    pub delta: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
    pub observed_z: ZScoreField,
    pub null_z: Vec<ZScoreField>,
    pub fdr: Vec<FdrResult>,
    pub fs: FieldSignificance,
    pub bootstrap_dropped: usize,
    pub permutation_dropped: usize,
}

/// Standardize the observed change by the bootstrap spread and test it
/// against the permutation replicates.
pub fn significance_test(
    delta: Vec<Option<f64>>,
    bootstrap: &Replicates<Vec<Option<f64>>>,
    permutation: &Replicates<Vec<Option<f64>>>,
    q_levels: &[f64],
    fs_cutoffs: &[f64],
) -> Result<SignificanceTest> {
    let n = delta.len();
    let se = standard_errors(bootstrap.completed(), n);
    let observed_z = ZScoreField::observed(z_scores(&delta, &se));
    let null_z = permutation_z_fields(permutation, n);
    let fdr = q_levels
        .iter()
        .map(|&q| fdr_threshold(&observed_z, &null_z, q))
        .collect::<Result<Vec<_>>>()?;
    let fs = field_significance(&observed_z, &null_z, fs_cutoffs)?;
    Ok(SignificanceTest {
        delta,
        se,
        observed_z,
        null_z,
        fdr,
        fs,
        bootstrap_dropped: bootstrap.dropped(),
        permutation_dropped: permutation.dropped(),
    })
}

/// Map replicate coefficients to change fields.
pub fn replicate_deltas(
    reps: &Replicates<Vec<GevParams>>,
    change: &ChangeSpec,
    time_origin: f64,
) -> Replicates<Vec<Option<f64>>> {
    Replicates {
        kind: reps.kind,
        outputs: reps
            .outputs
            .iter()
            .map(|o| o.as_ref().map(|p| change.deltas(p, time_origin)))
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SeasonAnalysis {
    pub coefficients: CoefficientField,
    pub bootstrap: Replicates<Vec<GevParams>>,
    pub permutation: Replicates<Vec<GevParams>>,
    pub test: SignificanceTest,
}

/// Run bootstrap and permutation replicates through `store` and test the
/// observed change.
pub fn analyze_season<S: ReplicateStore>(
    pipeline: &SeasonPipeline,
    config: &AnalysisConfig,
    store: &S,
) -> Result<SeasonAnalysis> {
    if pipeline.model() != config.model {
        return Err(Error::invalid("pipeline and configuration use different trend models"));
    }
    let coefficients = pipeline.observed()?;
    let runner = CoefficientRunner { pipeline, store };
    let (bplan, hplan) = analysis_plans(config, pipeline.years())?;
    let bootstrap = run_replicates(&runner, &bplan)?;
    let permutation = run_replicates(&runner, &hplan)?;
    let origin = pipeline.time_origin();
    let test = significance_test(
        config.change.deltas(&coefficients.params, origin),
        &replicate_deltas(&bootstrap, &config.change, origin),
        &replicate_deltas(&permutation, &config.change, origin),
        &config.q_levels,
        &config.fs_cutoffs,
    )?;
    Ok(SeasonAnalysis {
        coefficients,
        bootstrap,
        permutation,
        test,
    })
}

/// Plans used by [`analyze_season`] for a given configuration.
pub fn analysis_plans(config: &AnalysisConfig, years: usize) -> Result<(ResamplePlan, ResamplePlan)> {
    Ok((
        make_plan(ResampleKind::Bootstrap, years, config.bootstrap, config.seed)?,
        make_plan(ResampleKind::Permutation, years, config.permutations, config.seed)?,
    ))
}

/// One season's observed coefficients and replicates, as input to the
/// annual test. `keep` masks cells out of this season.
#[derive(Debug, Clone)]
pub struct SeasonResult {
    pub season: Season,
    pub coefficients: CoefficientField,
    pub bootstrap: Replicates<Vec<GevParams>>,
    pub permutation: Replicates<Vec<GevParams>>,
    pub keep: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct AnnualAnalysis {
    pub change: AnnualChange,
    pub test: SignificanceTest,
}

fn annual_deltas(
    seasons: &[SeasonResult],
    pick: impl Fn(&SeasonResult) -> &Replicates<Vec<GevParams>> + Sync,
    metric: ChangeMetric,
    change: &ChangeSpec,
) -> Result<Replicates<Vec<Option<f64>>>> {
    let first = pick(&seasons[0]);
    let n = first.outputs.len();
    if seasons.iter().any(|s| pick(s).outputs.len() != n || pick(s).kind != first.kind) {
        return Err(Error::invalid("seasons have different replicate counts"));
    }
    let outputs = (0..n)
        .into_par_iter()
        .map(|h| {
            let mut fields = Vec::with_capacity(seasons.len());
            for s in seasons {
                match &pick(s).outputs[h] {
                    Some(p) => fields.push((s, CoefficientField {
                        params: p.clone(),
                        ..s.coefficients.clone()
                    })),
                    // a replicate dropped in any season is dropped for the year
                    None => return Ok(None),
                }
            }
            let refs: Vec<_> = fields
                .iter()
                .map(|(s, f)| (s.season, f, s.keep.as_deref()))
                .collect();
            let set = SeasonalReturnSet::from_fields(&refs, change.r, change.t1, change.t2)?;
            Ok(Some(annual_change(&set, metric)?.field.delta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Replicates {
        kind: first.kind,
        outputs,
    })
}

/// Annual change (largest seasonal return value at `t2` against the
/// largest at `t1`) tested exactly like a single season, using the
/// replicates of each season paired by index.
///
/// All seasons must share the grid, the years and the replicate plans, so
/// replicate `h` resamples the same years in every season.
pub fn analyze_annual(
    seasons: &[SeasonResult],
    change: &ChangeSpec,
    q_levels: &[f64],
    fs_cutoffs: &[f64],
) -> Result<AnnualAnalysis> {
    if seasons.is_empty() {
        return Err(Error::invalid("no seasons"));
    }
    let fields: Vec<_> = seasons
        .iter()
        .map(|s| (s.season, &s.coefficients, s.keep.as_deref()))
        .collect();
    let set = SeasonalReturnSet::from_fields(&fields, change.r, change.t1, change.t2)?;
    let observed = annual_change(&set, change.metric)?;
    let boot = annual_deltas(seasons, |s| &s.bootstrap, change.metric, change)?;
    let perm = annual_deltas(seasons, |s| &s.permutation, change.metric, change)?;
    let test = significance_test(observed.field.delta.clone(), &boot, &perm, q_levels, fs_cutoffs)?;
    Ok(AnnualAnalysis { change: observed, test })
}
