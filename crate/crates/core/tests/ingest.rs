use climex::ingest::{extract_block_maxima, parse_daily_reader, read_block_maxima, write_block_maxima, Season};
use climex::spatial::GridSpec;
use climex::synthetic::synthetic_daily;

fn spec() -> GridSpec {
    GridSpec {
        lon_min: -100.0,
        lon_max: -95.0,
        lat_min: 38.0,
        lat_max: 43.0,
        resolution: 1.0,
    }
}

fn to_csv(series: &[climex::ingest::DailySeries]) -> Vec<String> {
    let mut rows = Vec::new();
    for s in series {
        for (d, v) in s.dates.iter().zip(&s.values) {
            rows.push(format!(
                "{},{},{},{},{}",
                s.station_id,
                s.lon,
                s.lat,
                d,
                v.map_or_else(String::new, |v| v.to_string())
            ));
        }
    }
    rows
}

#[test]
fn maxima_match_brute_force_and_ignore_row_order() {
    let daily = synthetic_daily(&spec(), 3, 1990, 1995, 0.6, 13, 4).unwrap();
    let rows = to_csv(&daily);
    let header = "station_id,lon,lat,date,prcp_mm\n";
    let forward = format!("{header}{}\n", rows.join("\n"));
    let mut rev = rows.clone();
    rev.reverse();
    let backward = format!("{header}{}\n", rev.join("\n"));
    let a = parse_daily_reader(forward.as_bytes()).unwrap();
    let b = parse_daily_reader(backward.as_bytes()).unwrap();
    assert_eq!(a, b);

    for s in &a {
        for season in Season::ALL {
            let m = extract_block_maxima(s, season, 1991, 1995).unwrap();
            assert_eq!(m.len(), 5);
            for (k, year) in (1991..=1995).enumerate() {
                let (start, end) = season.date_range(year);
                let vals: Vec<f64> = s
                    .dates
                    .iter()
                    .zip(&s.values)
                    .filter(|(d, _)| **d >= start && **d <= end)
                    .filter_map(|(_, v)| *v)
                    .collect();
                let brute = vals.iter().copied().reduce(f64::max);
                assert_eq!(m.maxima[k], brute, "{season} {year}");
            }
        }
    }
}

#[test]
fn block_maxima_csv_round_trips() {
    let daily = synthetic_daily(&spec(), 2, 2000, 2003, 0.5, 0, 1).unwrap();
    let maxima: Vec<_> = daily
        .iter()
        .map(|s| extract_block_maxima(s, Season::DJF, 2001, 2003).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_block_maxima(&mut buf, &maxima).unwrap();
    assert_eq!(read_block_maxima(buf.as_slice()).unwrap(), maxima);
}
