use climex::changes::{ChangeMetric, ChangeSpec};
use climex::gev::TrendModel;
use climex::pipeline::{analyze_season, default_fs_cutoffs, AnalysisConfig, NoStore, ReplicateStore, SeasonPipeline};
use climex::resampling::ResampleKind;
use climex::spatial::GridSpec;
use climex::store::RunStore;
use climex::synthetic::{synthetic_network, PlantedTrend, SyntheticConfig};

fn config(seed: u64) -> AnalysisConfig {
    AnalysisConfig {
        model: TrendModel::M0,
        change: ChangeSpec::new(ChangeMetric::Absolute, 20.0, 1970.0, 1999.0).unwrap(),
        bootstrap: 15,
        permutations: 15,
        seed,
        q_levels: vec![0.33, 0.1],
        fs_cutoffs: default_fs_cutoffs(),
    }
}

fn network(trend: Option<PlantedTrend>) -> climex::synthetic::SyntheticNetwork {
    synthetic_network(&SyntheticConfig {
        grid: GridSpec {
            lon_min: -100.0,
            lon_max: -95.0,
            lat_min: 38.0,
            lat_max: 43.0,
            resolution: 1.0,
        },
        stations: 20,
        years: 30,
        trend,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn analysis_is_deterministic_and_resumable() {
    let net = network(None);
    let pipeline = SeasonPipeline::new(&net.stations, &net.grid, TrendModel::M0).unwrap();
    let a = analyze_season(&pipeline, &config(9), &NoStore).unwrap();
    let b = analyze_season(&pipeline, &config(9), &NoStore).unwrap();
    assert_eq!(a.test, b.test);
    assert_eq!(a.test.null_z.len() + a.test.permutation_dropped, 15);
    assert_eq!(a.test.fdr.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::new(dir.path(), net.grid.cells.clone(), TrendModel::M0);
    let stored = analyze_season(&pipeline, &config(9), &store).unwrap();
    assert_eq!(stored.test, a.test);
    assert!(store.load(ResampleKind::Bootstrap, 14).unwrap().is_some());
    // a second pass reads every replicate back and reproduces the test
    let reread = analyze_season(&pipeline, &config(9), &store).unwrap();
    assert_eq!(reread.test, a.test);

    let other = analyze_season(&pipeline, &config(10), &NoStore).unwrap();
    assert_ne!(other.test.se, a.test.se);
}

#[test]
fn a_strong_planted_trend_gives_large_positive_z() {
    let trend = PlantedTrend {
        lon_min: -101.0,
        lon_max: -94.0,
        lat_min: 37.0,
        lat_max: 44.0,
        mu1: 1.0,
    };
    let net = network(Some(trend));
    let pipeline = SeasonPipeline::new(&net.stations, &net.grid, TrendModel::M0).unwrap();
    let a = analyze_season(&pipeline, &config(2), &NoStore).unwrap();
    let z: Vec<f64> = a.test.observed_z.z.iter().flatten().copied().collect();
    assert_eq!(z.len(), net.grid.len());
    assert!(z.iter().all(|&v| v > 2.0), "{z:?}");
    let f = &a.test.fdr[0];
    assert!(f.n_rejected() * 10 >= net.grid.len() * 9, "{} of {} rejected, c* {}", f.n_rejected(), net.grid.len(), f.c_star);
}

#[test]
fn too_few_stations_is_an_error() {
    let net = network(None);
    assert!(SeasonPipeline::new(&net.stations[..5], &net.grid, TrendModel::M0).is_err());
    assert!(SeasonPipeline::new(&[], &net.grid, TrendModel::M0).is_err());
}
