mod common;

use std::fs;

use climex::ingest::Season;
use common::{climex, snapshot, write_synthetic_run};

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn extract_writes_one_file_per_season_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let mut daily = String::from("station_id,lon,lat,date,prcp_mm\n");
    for (id, lon) in [("A", -99.0), ("B", -98.0)] {
        let mut d = chrono_days(1999, 2001);
        for (i, day) in d.drain(..).enumerate() {
            daily.push_str(&format!("{id},{lon},40,{day},{}\n", (i % 17) as f64 * 0.5));
        }
    }
    fs::write(dir.path().join("daily.csv"), daily).unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"daily": "daily.csv", "grid": {"lon_min": -100, "lon_max": -96, "lat_min": 38, "lat_max": 42, "resolution": 1},
            "first_year": 2000, "last_year": 2001, "output": "out"}"#,
    )
    .unwrap();
    let out = climex(&["extract", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for season in Season::ALL {
        let text = fs::read_to_string(dir.path().join(format!("out/maxima/{season}.csv"))).unwrap();
        // header plus 2 stations × 2 years
        assert_eq!(text.lines().count(), 5, "{season}");
    }
    let again = climex(&["extract", "--config", s(&cfg)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert!(climex(&["extract", "--force", "--config", s(&cfg)]).status.success());
}

fn chrono_days(first: i32, last: i32) -> Vec<String> {
    let mut out = Vec::new();
    for y in first..=last {
        for m in 1..=12u32 {
            let days = match m {
                2 if y % 4 == 0 => 29,
                2 => 28,
                4 | 6 | 9 | 11 => 30,
                _ => 31,
            };
            for d in 1..=days {
                out.push(format!("{y}-{m:02}-{d:02}"));
            }
        }
    }
    out
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"daily": "nope.csv", "grid": {"lon_min": -100, "lon_max": -96, "lat_min": 38, "lat_max": 42, "resolution": 1},
            "first_year": 2000, "last_year": 2001}"#,
    )
    .unwrap();
    let out = climex(&["extract", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert_eq!(climex(&["analyze", "--config", s(&dir.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(climex(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn analyze_resume_and_annual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_synthetic_run(dir.path(), &[Season::MAM, Season::JJA], None, "");
    let out = climex(&["analyze", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let jja = dir.path().join("out/JJA");
    for f in ["manifest.json", "coefficients.csv", "station_fits.csv", "change.csv", "decisions.csv", "fs.csv", "zscores.csv"] {
        assert!(jja.join(f).is_file(), "{f}");
    }
    assert!(jja.join("run/bootstrap/19.csv").is_file() || jja.join("run/bootstrap/19.dropped").is_file());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(jja.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["replicates"]["permutation"].as_array().unwrap().len(), 20);
    let header = fs::read_to_string(jja.join("decisions.csv")).unwrap();
    assert!(header.starts_with("lon,lat,z,reject_q33,reject_q10\n"));

    // rerunning without a flag is refused; resuming reuses every replicate
    let before = snapshot(&dir.path().join("out"));
    assert_eq!(climex(&["analyze", "--config", s(&cfg)]).status.code(), Some(2));
    let resumed = climex(&["analyze", "--resume", "--config", s(&cfg)]);
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    assert_eq!(before, snapshot(&dir.path().join("out")));

    // a removed replicate is recomputed identically
    let rep = jja.join("run/permutation/3.csv");
    if rep.exists() {
        fs::remove_file(&rep).unwrap();
        assert!(climex(&["analyze", "--resume", "--config", s(&cfg)]).status.success());
        assert_eq!(before, snapshot(&dir.path().join("out")));
    }
    // resuming with a changed configuration is refused
    assert_eq!(
        climex(&["analyze", "--resume", "--seed", "8", "--config", s(&cfg)]).status.code(),
        Some(2)
    );

    let annual = climex(&["annual", "--config", s(&cfg)]);
    assert!(annual.status.success(), "{}", String::from_utf8_lossy(&annual.stderr));
    let flags = fs::read_to_string(dir.path().join("out/annual/annual_flags.csv")).unwrap();
    assert!(flags.starts_with("lon,lat,seasons_used,reduced,dominant_t1,dominant_t2\n"));
    assert_eq!(flags.lines().count(), 1 + 36);
    assert!(dir.path().join("out/annual/decisions.csv").is_file());

    // the standalone test reproduces the annual decisions from its z-fields
    let annual_dir = dir.path().join("out/annual");
    fs::write(
        annual_dir.join("observed_z.csv"),
        fs::read_to_string(annual_dir.join("zscores.csv"))
            .unwrap()
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{}\n", f[0], f[1], f[4])
            })
            .collect::<String>(),
    )
    .unwrap();
    let fdr_out = dir.path().join("fdr");
    let r = climex(&[
        "fdr",
        "--observed",
        s(&annual_dir.join("observed_z.csv")),
        "--null-dir",
        s(&annual_dir.join("null_z")),
        "--out",
        s(&fdr_out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        fs::read(fdr_out.join("decisions.csv")).unwrap(),
        fs::read(annual_dir.join("decisions.csv")).unwrap()
    );
    assert_eq!(fs::read(fdr_out.join("fs.csv")).unwrap(), fs::read(annual_dir.join("fs.csv")).unwrap());
}

#[test]
fn masked_season_is_flagged_in_the_annual_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mask.csv"), "lon,lat,season\n-99.5,38.5,JJA\n").unwrap();
    let cfg = write_synthetic_run(dir.path(), &[Season::MAM, Season::JJA], None, ",\n  \"mask\": \"mask.csv\"");
    assert!(climex(&["analyze", "--config", s(&cfg)]).status.success());
    assert!(climex(&["annual", "--config", s(&cfg)]).status.success());
    let flags = fs::read_to_string(dir.path().join("out/annual/annual_flags.csv")).unwrap();
    let rows: Vec<&str> = flags.lines().skip(1).collect();
    assert_eq!(rows[0], "-99.5,38.5,1,1,MAM,MAM");
    assert!(rows[1..].iter().all(|r| r.split(',').nth(3) == Some("0")));
}

#[test]
fn absolute_change_decisions_do_not_depend_on_r_under_m0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_synthetic_run(dir.path(), &[Season::JJA], None, "");
    let run = |r: &str, out: &str| {
        let o = climex(&["analyze", "--metric", "absolute", "--r", r, "--out", s(&dir.path().join(out)), "--config", s(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out).join("JJA/decisions.csv")).unwrap()
    };
    let (a, b) = (run("20", "r20"), run("50", "r50"));
    assert_eq!(a.lines().count(), b.lines().count());
    for (la, lb) in a.lines().zip(b.lines()).skip(1) {
        let (fa, fb): (Vec<&str>, Vec<&str>) = (la.split(',').collect(), lb.split(',').collect());
        // identical reject flags; z equal up to rounding
        assert_eq!(fa[3..], fb[3..]);
        let (za, zb): (f64, f64) = (fa[2].parse().unwrap(), fb[2].parse().unwrap());
        assert!((za - zb).abs() < 1e-9, "{za} vs {zb}");
    }
}

#[test]
fn simulate_restricts_families_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim.json");
    fs::write(&sim, r#"{"years": 30, "block_sizes": [5, 10], "return_periods": [20], "replicates": 20, "bootstraps": 5}"#).unwrap();
    let run = |out: &str| {
        let o = climex(&["simulate", "--config", s(&sim), "--families", "exponential", "--seed", "3", "--out", s(&dir.path().join(out))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        snapshot(&dir.path().join(out))
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let rows = String::from_utf8(a.iter().find(|(p, _)| p.ends_with("sim_results.csv")).unwrap().1.clone()).unwrap();
    assert!(rows.starts_with("family,p,n,r,rmse,re_percent,mc_sd,mean_boot_se,failures\n"));
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.lines().skip(1).all(|l| l.starts_with("exponential,")));
}

#[test]
fn kriging_fit_writes_model_and_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let mut pts = String::from("lon,lat,value\n");
    for i in 0..15 {
        let (lon, lat) = (-99.7 + 0.37 * i as f64, 38.2 + 0.41 * ((i * 7) % 15) as f64);
        pts.push_str(&format!("{lon},{lat},{}\n", 10.0 + 0.5 * lon + lat));
    }
    fs::write(dir.path().join("pts.csv"), pts).unwrap();
    let cfg = write_synthetic_run(dir.path(), &[Season::JJA], None, "");
    let out = dir.path().join("krig");
    let o = climex(&["kriging-fit", "--points", s(&dir.path().join("pts.csv")), "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model: serde_json::Value = serde_json::from_slice(&fs::read(out.join("kriging_model.json")).unwrap()).unwrap();
    assert!(model["range_km"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read_to_string(out.join("prediction.csv")).unwrap().lines().count(), 1 + 36);
}
