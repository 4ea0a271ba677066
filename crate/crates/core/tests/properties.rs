use climex::changes::{annual_change, ChangeMetric, ChangeSpec, SeasonalReturnSet};
use climex::gev::{gev_cdf, gev_quantile, GevParams, TrendModel};
use climex::ingest::Season;
use climex::resampling::{make_plan, ResampleKind};
use climex::spatial::{fit_kriging_model, krige, CoefficientField, Grid, LonLat};
use climex::testing::{fdr_threshold, Provenance, ZScoreField};
use proptest::prelude::*;

proptest! {
    #[test]
    fn cdf_is_monotone(mu in -50.0..50.0f64, sigma in 0.1..20.0f64, xi in -0.9..0.9f64, a in -100.0..100.0f64, d in 0.0..50.0f64) {
        let lo = gev_cdf(a, mu, sigma, xi).unwrap();
        let hi = gev_cdf(a + d, mu, sigma, xi).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(hi >= lo);
    }

    #[test]
    fn quantile_inverts_cdf(mu in -50.0..50.0f64, sigma in 0.1..20.0f64, xi in -0.9..0.9f64, p in 0.001..0.999f64) {
        let y = gev_quantile(p, mu, sigma, xi).unwrap();
        prop_assert!((gev_cdf(y, mu, sigma, xi).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn plans_are_reproducible_and_permutations_are_bijections(t in 2usize..60, seed in any::<u64>()) {
        let plan = make_plan(ResampleKind::Permutation, t, 5, seed).unwrap();
        prop_assert_eq!(&plan, &make_plan(ResampleKind::Permutation, t, 5, seed).unwrap());
        for seq in &plan.sequences {
            let mut s = seq.clone();
            s.sort_unstable();
            prop_assert_eq!(s, (0..t).collect::<Vec<_>>());
        }
        let boot = make_plan(ResampleKind::Bootstrap, t, 5, seed).unwrap();
        prop_assert!(boot.sequences.iter().all(|s| s.len() == t && s.iter().all(|&i| i < t)));
    }

    #[test]
    fn fdr_rejections_nest_in_q(obs in prop::collection::vec(-4.0..4.0f64, 30), null in prop::collection::vec(-4.0..4.0f64, 90)) {
        let observed = ZScoreField::observed(obs.into_iter().map(Some).collect());
        let null: Vec<ZScoreField> = null
            .chunks(30)
            .enumerate()
            .map(|(h, c)| ZScoreField { z: c.iter().copied().map(Some).collect(), provenance: Provenance::Permutation(h) })
            .collect();
        let strict = fdr_threshold(&observed, &null, 0.1).unwrap();
        let loose = fdr_threshold(&observed, &null, 0.33).unwrap();
        prop_assert!(loose.c_star <= strict.c_star);
        for (s, l) in strict.rejected.iter().zip(&loose.rejected) {
            prop_assert!(!s || *l);
        }
        if strict.r_hat > 0 {
            prop_assert!(strict.v_hat / strict.r_hat as f64 <= 0.1);
        }
    }

    #[test]
    fn annual_change_never_exceeds_the_largest_seasonal_change(
        raw in prop::collection::vec((5.0..80.0f64, -1.0..1.0f64, 1.0..20.0f64, -0.4..0.4f64, any::<bool>()), 4 * 6),
        r in 1.5..200.0f64,
    ) {
        let grid = Grid::from_points((0..6).map(|i| LonLat::new(i as f64, 0.0)).collect(), 1.0).unwrap();
        let fields: Vec<(Season, CoefficientField, Vec<bool>)> = Season::ALL
            .iter()
            .zip(raw.chunks(6))
            .map(|(&s, c)| {
                let params = c.iter().map(|&(m, m1, sg, xi, _)| GevParams::linear(m, m1, sg, xi)).collect();
                let keep = c.iter().map(|x| x.4).collect();
                (s, CoefficientField { grid: grid.clone(), model: TrendModel::M0, time_origin: 1990.0, params }, keep)
            })
            .collect();
        let refs: Vec<_> = fields.iter().map(|(s, f, k)| (*s, f, Some(k.as_slice()))).collect();
        let set = SeasonalReturnSet::from_fields(&refs, r, 1960.0, 2020.0).unwrap();
        let annual = annual_change(&set, ChangeMetric::Absolute).unwrap();
        let spec = ChangeSpec::new(ChangeMetric::Absolute, r, 1960.0, 2020.0).unwrap();
        for i in 0..6 {
            let seasonal = fields.iter().filter(|f| f.2[i]).filter_map(|(_, f, _)| spec.cell_change(&f.params[i], 1990.0));
            match annual.field.delta[i] {
                Some(a) => prop_assert!(a <= seasonal.fold(f64::NEG_INFINITY, f64::max)),
                None => prop_assert_eq!(annual.seasons_used[i], 0),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kriging_ignores_station_order(shift in 0usize..12, seed in 0u64..1000) {
        let coords: Vec<LonLat> = (0..12)
            .map(|i| LonLat::new(-100.0 + 0.7 * i as f64 + 0.01 * seed as f64 % 0.3, 35.0 + (i * 5 % 12) as f64 * 0.6))
            .collect();
        let values: Vec<f64> = coords.iter().map(|c| (c.lon * 0.3).sin() + 0.1 * c.lat).collect();
        let grid = Grid::from_points(vec![LonLat::new(-97.0, 38.0), LonLat::new(-94.3, 40.1)], 0.5).unwrap();
        let model = fit_kriging_model(&coords, &values).unwrap();
        let base = krige(&model, &coords, &values, &grid).unwrap();
        let mut c2 = coords.clone();
        let mut v2 = values.clone();
        c2.rotate_left(shift);
        v2.rotate_left(shift);
        let model2 = fit_kriging_model(&c2, &v2).unwrap();
        let other = krige(&model2, &c2, &v2, &grid).unwrap();
        for (a, b) in base.mean.iter().zip(&other.mean) {
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
        }
    }
}
