//! One function per subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use climex::changes::ChangeSpec;
use climex::gev::GevParams;
use climex::ingest::{
    extract_block_maxima, parse_daily_csv, read_block_maxima, station_completeness, write_block_maxima, Season,
    STATION_COMPLETENESS,
};
use climex::io;
use climex::pipeline::{
    analyze_annual, analyze_season, default_fs_cutoffs, AnalysisConfig, ReplicateStore,
    SeasonPipeline, SeasonResult, SignificanceTest,
};
use climex::resampling::{ResampleKind, Replicates};
use climex::simstudy::{default_y_grid, gumbel_convergence, run_sim_study, Family, SimConfig};
use climex::spatial::{fit_kriging_model, krige, CoefficientField, Grid, LonLat};
use climex::store::{write_atomic, RunStore};
use climex::testing::{fdr_threshold, field_significance, Provenance, ZScoreField};
use rayon::prelude::*;

use crate::config::{hex, require_file, RunConfig};
use crate::manifest::Manifest;
use crate::CliError;

/// Render a CSV into memory and write it atomically.
fn save(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> climex::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    Ok(write_atomic(path, &buf)?)
}

fn refuse(path: &Path) -> CliError {
    CliError::usage(format!("{} already exists; pass --force to replace it", path.display()))
}

/// Make `dir` ready for fresh outputs.
fn fresh_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        if !force {
            return Err(refuse(dir));
        }
        fs::remove_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }
    fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))
}

pub fn extract(cfg: &RunConfig, force: bool) -> Result<(), CliError> {
    let daily = cfg
        .daily
        .as_ref()
        .ok_or_else(|| CliError::usage("config has no `daily` input"))?;
    require_file(daily)?;
    let out = cfg.maxima_dir();
    let targets: Vec<PathBuf> = cfg.seasons.iter().map(|s| out.join(format!("{s}.csv"))).collect();
    if !force {
        if let Some(t) = targets.iter().find(|t| t.exists()) {
            return Err(refuse(t));
        }
    }
    let series = parse_daily_csv(daily)?;
    // completeness over the span of all season-years
    let (start, _) = Season::DJF.date_range(cfg.first_year);
    let (_, end) = Season::SON.date_range(cfg.last_year);
    let (kept, excluded): (Vec<_>, Vec<_>) = series
        .iter()
        .map(|s| (s, station_completeness(s, start, end)))
        .partition(|(_, c)| *c >= STATION_COMPLETENESS);
    for (season, path) in cfg.seasons.iter().zip(&targets) {
        let maxima = kept
            .par_iter()
            .map(|(s, _)| extract_block_maxima(s, *season, cfg.first_year, cfg.last_year))
            .collect::<climex::Result<Vec<_>>>()?;
        save(path, |w| write_block_maxima(w, &maxima))?;
    }
    save(&out.join("excluded_stations.csv"), |w| {
        let mut w = csv_writer(w);
        w.write_record(["station_id", "completeness"])?;
        for (s, c) in &excluded {
            w.write_record([s.station_id.clone(), c.to_string()])?;
        }
        w.flush().map_err(|e| climex::Error::Io {
            path: "excluded_stations.csv".into(),
            source: e,
        })
    })?;
    eprintln!(
        "extracted {} stations ({} below the completeness threshold) for {} seasons",
        kept.len(),
        excluded.len(),
        cfg.seasons.len()
    );
    Ok(())
}

fn csv_writer(w: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(w)
}

fn analysis_config(cfg: &RunConfig) -> Result<AnalysisConfig, CliError> {
    Ok(AnalysisConfig {
        model: cfg.model,
        change: change_spec(cfg)?,
        bootstrap: cfg.bootstrap,
        permutations: cfg.permutations,
        seed: cfg.seed,
        q_levels: cfg.q_levels.clone(),
        fs_cutoffs: default_fs_cutoffs(),
    })
}

fn change_spec(cfg: &RunConfig) -> Result<ChangeSpec, CliError> {
    ChangeSpec::new(cfg.metric, cfg.r, cfg.t1(), cfg.t2()).map_err(|e| CliError::usage(e.to_string()))
}

fn replicate_counts(cfg: &RunConfig) -> [(ResampleKind, usize); 2] {
    [
        (ResampleKind::Bootstrap, cfg.bootstrap),
        (ResampleKind::Permutation, cfg.permutations),
    ]
}

pub fn analyze(cfg: &RunConfig, force: bool, resume: bool) -> Result<(), CliError> {
    let maxima_dir = cfg.maxima_dir();
    let inputs: Vec<PathBuf> = cfg.seasons.iter().map(|s| maxima_dir.join(format!("{s}.csv"))).collect();
    for p in &inputs {
        require_file(p)?;
    }
    let acfg = analysis_config(cfg)?;
    let hash = cfg.hash();
    let grid = Grid::regular(&cfg.grid).map_err(|e| CliError::usage(e.to_string()))?;
    for (season, input) in cfg.seasons.iter().zip(&inputs) {
        let dir = cfg.output.join(season.label());
        prepare_run_dir(&dir, &hash, force, resume)?;
        let file = fs::File::open(input).map_err(|e| CliError::usage(format!("{}: {e}", input.display())))?;
        let stations: Vec<_> = read_block_maxima(file)?
            .into_iter()
            .filter(|s| s.season == *season)
            .collect();
        let pipeline = SeasonPipeline::new(&stations, &grid, cfg.model)?;
        let store = RunStore::new(&dir, grid.cells.clone(), cfg.model);

        let mut manifest = Manifest::new("analyze", cfg.seed, hash.clone());
        manifest.season = Some(*season);
        manifest.time_origin = Some(pipeline.time_origin());
        manifest.stations_used = pipeline.stations().len();
        manifest.stations_failed = pipeline.failures().len();
        manifest.record_replicates(&store, &replicate_counts(cfg));
        manifest.write(&dir)?;

        let analysis = analyze_season(&pipeline, &acfg, &store)?;
        save(&dir.join("coefficients.csv"), |w| io::write_coefficient_field(w, &analysis.coefficients))?;
        save(&dir.join("station_fits.csv"), |w| {
            io::write_station_fits(w, pipeline.stations(), pipeline.station_fits())
        })?;
        save(&dir.join("station_failures.csv"), |w| {
            let mut w = csv_writer(w);
            w.write_record(["station_id", "reason"])?;
            for f in pipeline.failures() {
                w.write_record([&f.station_id, &f.reason])?;
            }
            w.flush().map_err(|e| climex::Error::Io {
                path: "station_failures.csv".into(),
                source: e,
            })
        })?;
        let change = climex::changes::ChangeField {
            grid: grid.clone(),
            metric: cfg.metric,
            r: cfg.r,
            t1: cfg.t1(),
            t2: cfg.t2(),
            delta: analysis.test.delta.clone(),
        };
        save(&dir.join("change.csv"), |w| io::write_change(w, &change))?;
        write_test(&dir, &grid, &analysis.test)?;

        manifest.record_replicates(&store, &replicate_counts(cfg));
        manifest.complete = true;
        manifest.write(&dir)?;
        eprintln!(
            "{season}: {} stations, {} rejected at q={}",
            pipeline.stations().len(),
            analysis.test.fdr[0].n_rejected(),
            analysis.test.fdr[0].q
        );
    }
    Ok(())
}

fn prepare_run_dir(dir: &Path, hash: &str, force: bool, resume: bool) -> Result<(), CliError> {
    if !dir.exists() {
        return fresh_dir(dir, false);
    }
    if resume {
        return match Manifest::read(dir)? {
            Some(m) if m.config_hash == hash => Ok(()),
            Some(_) => Err(CliError::usage(format!(
                "{} was produced with a different configuration; pass --force to start over",
                dir.display()
            ))),
            None => Err(CliError::usage(format!("{} has no manifest to resume from", dir.display()))),
        };
    }
    fresh_dir(dir, force)
}

/// Standard errors, z-scores, decisions, field significance and the
/// permutation z-fields.
fn write_test(dir: &Path, grid: &Grid, test: &SignificanceTest) -> Result<(), CliError> {
    save(&dir.join("zscores.csv"), |w| {
        let mut w = csv_writer(w);
        w.write_record(["lon", "lat", "delta", "se", "z"])?;
        let s = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for (i, c) in grid.cells.iter().enumerate() {
            w.write_record([
                c.lon.to_string(),
                c.lat.to_string(),
                s(test.delta[i]),
                s(test.se[i]),
                s(test.observed_z.z[i]),
            ])?;
        }
        w.flush().map_err(|e| climex::Error::Io {
            path: "zscores.csv".into(),
            source: e,
        })
    })?;
    save(&dir.join("decisions.csv"), |w| io::write_decisions(w, grid, &test.observed_z, &test.fdr))?;
    save(&dir.join("fs.csv"), |w| io::write_field_significance(w, &test.fs))?;
    let null_dir = dir.join("null_z");
    if null_dir.exists() {
        fs::remove_dir_all(&null_dir).map_err(|e| CliError::usage(format!("{}: {e}", null_dir.display())))?;
    }
    for f in &test.null_z {
        let Provenance::Permutation(h) = f.provenance else {
            continue;
        };
        save(&null_dir.join(format!("{h}.csv")), |w| io::write_z_field(w, &grid.cells, f))?;
    }
    Ok(())
}

fn load_replicates(store: &RunStore, kind: ResampleKind, n: usize, season: Season) -> Result<Replicates<Vec<GevParams>>, CliError> {
    let outputs = (0..n)
        .map(|i| match store.load(kind, i)? {
            Some(rec) => Ok(rec.into_params()),
            None => Err(CliError::usage(format!("{season} {kind} replicate {i} is missing; finish `analyze` first"))),
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Replicates { kind, outputs })
}

fn season_masks(cfg: &RunConfig, grid: &Grid) -> Result<Vec<(Season, Vec<bool>)>, CliError> {
    let Some(path) = &cfg.mask else {
        return Ok(Vec::new());
    };
    let file = fs::File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut masks: Vec<(Season, Vec<bool>)> = Vec::new();
    for (p, season) in io::read_mask(file)? {
        let i = grid
            .locate(&p)
            .ok_or_else(|| CliError::usage(format!("mask point ({}, {}) is off the grid", p.lon, p.lat)))?;
        match masks.iter_mut().find(|(s, _)| *s == season) {
            Some((_, keep)) => keep[i] = false,
            None => {
                let mut keep = vec![true; grid.len()];
                keep[i] = false;
                masks.push((season, keep));
            }
        }
    }
    Ok(masks)
}

pub fn annual(cfg: &RunConfig, force: bool) -> Result<(), CliError> {
    let grid = Grid::regular(&cfg.grid).map_err(|e| CliError::usage(e.to_string()))?;
    let masks = season_masks(cfg, &grid)?;
    let mut seasons = Vec::with_capacity(cfg.seasons.len());
    for &season in &cfg.seasons {
        let dir = cfg.output.join(season.label());
        let manifest = Manifest::read(&dir)?
            .filter(|m| m.complete)
            .ok_or_else(|| CliError::usage(format!("no finished {season} analysis in {}", dir.display())))?;
        if manifest.seed != cfg.seed {
            return Err(CliError::usage(format!("{season} was analysed with seed {}", manifest.seed)));
        }
        let coeff_path = dir.join("coefficients.csv");
        let file = fs::File::open(&coeff_path).map_err(|e| CliError::usage(format!("{}: {e}", coeff_path.display())))?;
        let (cells, params) = io::read_coefficients(file)?;
        if cells != grid.cells {
            return Err(CliError::usage(format!("{} does not match the configured grid", coeff_path.display())));
        }
        let store = RunStore::new(&dir, grid.cells.clone(), cfg.model);
        seasons.push(SeasonResult {
            season,
            coefficients: CoefficientField {
                grid: grid.clone(),
                model: cfg.model,
                time_origin: manifest
                    .time_origin
                    .ok_or_else(|| CliError::usage(format!("{season} manifest lacks the time origin")))?,
                params,
            },
            bootstrap: load_replicates(&store, ResampleKind::Bootstrap, cfg.bootstrap, season)?,
            permutation: load_replicates(&store, ResampleKind::Permutation, cfg.permutations, season)?,
            keep: masks.iter().find(|(s, _)| *s == season).map(|(_, k)| k.clone()),
        });
    }
    let out = cfg.output.join("annual");
    fresh_dir(&out, force)?;
    let result = analyze_annual(&seasons, &change_spec(cfg)?, &cfg.q_levels, &default_fs_cutoffs())?;
    save(&out.join("change.csv"), |w| io::write_change(w, &result.change.field))?;
    write_test(&out, &grid, &result.test)?;
    let n_seasons = cfg.seasons.len();
    save(&out.join("annual_flags.csv"), |w| {
        let mut w = csv_writer(w);
        w.write_record(["lon", "lat", "seasons_used", "reduced", "dominant_t1", "dominant_t2"])?;
        for (i, c) in grid.cells.iter().enumerate() {
            let used = result.change.seasons_used[i];
            let (d1, d2) = result.change.dominant[i].map_or((String::new(), String::new()), |(a, b)| {
                (a.label().to_string(), b.label().to_string())
            });
            w.write_record([
                c.lon.to_string(),
                c.lat.to_string(),
                used.to_string(),
                u8::from(used < n_seasons).to_string(),
                d1,
                d2,
            ])?;
        }
        w.flush().map_err(|e| climex::Error::Io {
            path: "annual_flags.csv".into(),
            source: e,
        })
    })?;
    let mut manifest = Manifest::new("annual", cfg.seed, cfg.hash());
    manifest.complete = true;
    manifest.write(&out)?;
    eprintln!(
        "annual: {} rejected at q={}",
        result.test.fdr[0].n_rejected(),
        result.test.fdr[0].q
    );
    Ok(())
}

pub fn simulate(
    config: Option<&Path>,
    seed: Option<u64>,
    families: Option<Vec<Family>>,
    out: &Path,
    force: bool,
) -> Result<(), CliError> {
    let mut sim = match config {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<SimConfig>(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        sim.seed = s;
    }
    if let Some(f) = families {
        sim.families = f;
    }
    sim.validate().map_err(|e| CliError::usage(e.to_string()))?;
    fresh_dir(out, force)?;
    let result = run_sim_study(&sim)?;
    save(&out.join("sim_results.csv"), |w| io::write_sim_results(w, &result))?;
    let grid = default_y_grid();
    let conv: Vec<(usize, f64)> = sim.block_sizes.iter().map(|&n| (n, gumbel_convergence(n, &grid))).collect();
    save(&out.join("convergence.csv"), |w| io::write_convergence(w, &conv))?;
    let bytes = serde_json::to_vec(&sim).expect("config serializes");
    let mut manifest = Manifest::new("simulate", sim.seed, hex(&<sha2::Sha256 as sha2::Digest>::digest(bytes)));
    manifest.complete = true;
    manifest.write(out)?;
    let flagged = result.rows.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        eprintln!("warning: {flagged} sweep cells exceeded the failure-rate limit");
    }
    Ok(())
}

fn read_z(path: &Path) -> Result<(Vec<LonLat>, Vec<Option<f64>>), CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(io::read_z_field(file)?)
}

pub fn fdr(observed: &Path, null_dir: &Path, q_levels: &[f64], out: &Path, force: bool) -> Result<(), CliError> {
    require_file(observed)?;
    if let Some(q) = q_levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(CliError::usage(format!("q level {q} is outside (0, 1)")));
    }
    let entries = fs::read_dir(null_dir).map_err(|e| CliError::usage(format!("{}: {e}", null_dir.display())))?;
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::usage(format!("{}: {e}", null_dir.display())))?.path();
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .filter(|_| path.extension().is_some_and(|x| x == "csv"));
        if let Some(i) = index {
            files.push((i, path));
        }
    }
    if files.is_empty() {
        return Err(CliError::usage(format!("{} holds no <index>.csv z-fields", null_dir.display())));
    }
    files.sort();
    let (cells, z) = read_z(observed)?;
    let observed = ZScoreField::observed(z);
    let mut null = Vec::with_capacity(files.len());
    for (i, path) in &files {
        let (c, z) = read_z(path)?;
        if c != cells {
            return Err(CliError::usage(format!("{} uses different cells", path.display())));
        }
        null.push(ZScoreField {
            z,
            provenance: Provenance::Permutation(*i as usize),
        });
    }
    let grid = Grid::from_points(cells, 1.0).map_err(|e| CliError::usage(e.to_string()))?;
    let results = q_levels
        .iter()
        .map(|&q| fdr_threshold(&observed, &null, q))
        .collect::<climex::Result<Vec<_>>>()?;
    let fs_result = field_significance(&observed, &null, &default_fs_cutoffs())?;
    let targets = [out.join("decisions.csv"), out.join("fs.csv")];
    if !force {
        if let Some(t) = targets.iter().find(|t| t.exists()) {
            return Err(refuse(t));
        }
    }
    save(&targets[0], |w| io::write_decisions(w, &grid, &observed, &results))?;
    save(&targets[1], |w| io::write_field_significance(w, &fs_result))?;
    for r in &results {
        eprintln!("q={}: cutoff {} rejects {} of {} cells", r.q, r.c_star, r.n_rejected(), r.tested);
    }
    Ok(())
}

pub fn kriging_fit(points: &Path, cfg: &RunConfig, out: &Path, force: bool) -> Result<(), CliError> {
    require_file(points)?;
    let targets = [out.join("kriging_model.json"), out.join("prediction.csv")];
    if !force {
        if let Some(t) = targets.iter().find(|t| t.exists()) {
            return Err(refuse(t));
        }
    }
    let file = fs::File::open(points).map_err(|e| CliError::usage(format!("{}: {e}", points.display())))?;
    let (coords, values) = io::read_points(file)?;
    let grid = Grid::regular(&cfg.grid).map_err(|e| CliError::usage(e.to_string()))?;
    let model = fit_kriging_model(&coords, &values)?;
    let pred = krige(&model, &coords, &values, &grid)?;
    let mut json = serde_json::to_vec_pretty(&model).expect("model serializes");
    json.push(b'\n');
    write_atomic(&targets[0], &json)?;
    save(&targets[1], |w| {
        let mut w = csv_writer(w);
        w.write_record(["lon", "lat", "mean", "sd"])?;
        for (i, c) in grid.cells.iter().enumerate() {
            w.write_record([
                c.lon.to_string(),
                c.lat.to_string(),
                pred.mean[i].to_string(),
                pred.sd[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| climex::Error::Io {
            path: "prediction.csv".into(),
            source: e,
        })
    })?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "variance {} range_km {} nugget {} mean {}",
        model.variance, model.range_km, model.nugget, model.mean
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(())
}
