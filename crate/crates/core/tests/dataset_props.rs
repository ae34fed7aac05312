use chrono::NaiveDate;
use proptest::prelude::*;

use yieldcast::dataset::{
    build_feature_table, monthly_mean, remove_yield_outliers, FeatureSchema, InputSet, OutlierScope, YieldRecord, ZonalCube,
};
use yieldcast::geodata::{rect_ring, District, DistrictSet, Polygon};
use yieldcast::matching::{link_districts, AliasTable};

const NAMES: [&str; 5] = ["Anand", "Kheda", "Korba", "Jashpur", "Raigarh"];

fn shapes() -> DistrictSet {
    DistrictSet::new(
        NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| District {
                name: n.to_string(),
                state: if i < 2 { "Gujarat".into() } else { "Chhattisgarh".into() },
                polygons: vec![Polygon { rings: vec![rect_ring(i as f64, 0.0, i as f64 + 1.0, 1.0)] }],
            })
            .collect(),
    )
    .unwrap()
}

fn record(state: &str, district: &str, year: i32, y: f64) -> YieldRecord {
    YieldRecord { state: state.into(), district: district.into(), season: "kharif".into(), year, area: 1.0, production: y, yield_t_ha: y }
}

/// Yield rows over known, misspelled and unknown districts, with repeats.
fn yields() -> impl Strategy<Value = Vec<YieldRecord>> {
    let district = prop_oneof![
        (0usize..5).prop_map(|i| NAMES[i].to_string()),
        Just("Kheeda".to_string()),
        Just("Nowhere".to_string()),
    ];
    prop::collection::vec((district, 2001i32..2005, 0.5f64..5.0), 0..40).prop_map(|rows| {
        rows.into_iter()
            .map(|(d, year, y)| {
                let state = if ["Anand", "Kheda", "Kheeda"].contains(&d.as_str()) { "Gujarat" } else { "Chhattisgarh" };
                record(state, &d, year, y)
            })
            .collect()
    })
}

fn cube() -> ZonalCube {
    let mut c = ZonalCube::default();
    for d in 0..NAMES.len() {
        for year in 2001..2005 {
            for m in [6, 7] {
                // 2003 Korba July is missing.
                if !(d == 2 && year == 2003 && m == 7) {
                    c.insert(d, "t2m", year, m, d as f64 + year as f64 / 1000.0 + m as f64);
                }
            }
        }
    }
    c
}

proptest! {
    #[test]
    fn join_is_order_independent(recs in yields(), seed in any::<u64>()) {
        let shapes = shapes();
        let keys: Vec<(String, String)> = recs.iter().map(|r| (r.state.clone(), r.district.clone())).collect();
        let linkage = link_districts(&keys, &shapes, 80, &AliasTable::default());
        let schema = FeatureSchema { variables: vec!["t2m".into()], months: vec![6, 7] };
        let mut shuffled = recs.clone();
        shuffled.reverse();
        if !shuffled.is_empty() {
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
        }
        let a = build_feature_table(&cube(), &schema, &shapes, &recs, &linkage, 0, InputSet::AllFeatures);
        let b = build_feature_table(&cube(), &schema, &shapes, &shuffled, &linkage, 0, InputSet::AllFeatures);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.len(), b.len());
                prop_assert_eq!(a, b);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "one order failed: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn split_partitions_the_table(recs in yields(), last in 2000i32..2006) {
        let shapes = shapes();
        let keys: Vec<(String, String)> = recs.iter().map(|r| (r.state.clone(), r.district.clone())).collect();
        let linkage = link_districts(&keys, &shapes, 80, &AliasTable::default());
        let schema = FeatureSchema { variables: vec!["t2m".into()], months: vec![6, 7] };
        let Ok(table) = build_feature_table(&cube(), &schema, &shapes, &recs, &linkage, 0, InputSet::AllFeatures) else {
            return Ok(());
        };
        match table.chronological_split(last) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len() + test.len(), table.len());
                prop_assert!(train.rows.iter().all(|r| r.year <= last));
                prop_assert!(test.rows.iter().all(|r| r.year > last));
                let mut joined: Vec<_> = train.rows.iter().chain(&test.rows).cloned().collect();
                joined.sort_by_key(|r| (r.district_id, r.year));
                prop_assert_eq!(joined, table.rows.clone());
            }
            Err(_) => {
                let n_train = table.rows.iter().filter(|r| r.year <= last).count();
                prop_assert!(n_train == 0 || n_train == table.len());
            }
        }
    }

    #[test]
    fn outlier_filter_keeps_the_mean_record(ys in prop::collection::vec(0.1f64..10.0, 2..60), k in 0.1f64..5.0) {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut recs: Vec<YieldRecord> = ys.iter().map(|&y| record("S", "D", 2001, y)).collect();
        // Adding a record at the mean leaves the mean unchanged.
        recs.push(record("S", "AtMean", 2001, mean));
        let (kept, removed) = remove_yield_outliers(&recs, k, OutlierScope::Global);
        prop_assert!(kept.iter().any(|r| r.district == "AtMean"));
        prop_assert_eq!(kept.len() + removed, recs.len());
    }

    #[test]
    fn monthly_mean_of_constant(c in -100.0f64..100.0, year in 1990i32..2030, days in prop::collection::btree_set(0u32..365, 1..60)) {
        let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        let series: Vec<(NaiveDate, f64)> = days.iter().map(|&d| (start + chrono::Days::new(d as u64), c)).collect();
        for month in 1..=12 {
            let present = series.iter().any(|(d, _)| chrono::Datelike::month(d) == month && chrono::Datelike::year(d) == year);
            match monthly_mean(&series, month, year) {
                Some(v) => {
                    prop_assert!(present);
                    prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
                }
                None => prop_assert!(!present),
            }
        }
    }
}
