use std::collections::HashMap;

use proptest::prelude::*;

use yieldcast::dashboard::{build_bundle, percent_change, DashboardBundle, Metadata, Prediction};
use yieldcast::geodata::{rect_ring, District, DistrictSet, NameKeys, Polygon};

fn shapes() -> DistrictSet {
    DistrictSet::new(
        (0..6)
            .map(|i| District {
                name: format!("D{i}"),
                state: format!("S{}", i / 3),
                polygons: vec![Polygon { rings: vec![rect_ring(i as f64, 0.0, i as f64 + 1.0, 1.0)] }],
            })
            .collect(),
    )
    .unwrap()
}

fn bundle() -> impl Strategy<Value = DashboardBundle> {
    let pred = (0usize..8, 2019i32..2021, 0.01f64..10.0, prop::option::of(0.01f64..10.0));
    let obs = (0usize..8, 2017i32..2021, 0.01f64..10.0);
    (prop::collection::vec(pred, 0..20), prop::collection::vec(obs, 0..20)).prop_map(|(preds, obs)| {
        // Indices 6 and 7 have no geometry.
        let name = |i: usize| (format!("S{}", i / 3), format!("D{i}"));
        let mut seen = std::collections::HashSet::new();
        let predictions: Vec<Prediction> = preds
            .into_iter()
            .filter(|(i, y, _, _)| seen.insert((*i, *y)))
            .map(|(i, year, predicted, actual)| {
                let (state, district) = name(i);
                Prediction { state, district, year, predicted, actual }
            })
            .collect();
        let observed: HashMap<(String, String, i32), f64> = obs
            .into_iter()
            .map(|(i, y, v)| {
                let (s, d) = name(i);
                ((s, d, y), v)
            })
            .collect();
        let meta = Metadata { run_id: "abc".into(), experiment: "all_features".into(), model_name: "gbm".into(), model_family: "gbm".into(), test_years: vec![2019, 2020] };
        build_bundle(meta, &predictions, &observed, &shapes(), &NameKeys::default())
    })
}

proptest! {
    #[test]
    fn bundle_round_trips(b in bundle()) {
        let back = DashboardBundle::from_json(&b.to_json()).unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn percent_change_sign(pred in 0.0f64..10.0, prev in 0.01f64..10.0) {
        let pc = percent_change(pred, Some(prev)).unwrap();
        prop_assert_eq!(pc > 0.0, pred > prev);
        prop_assert_eq!(pc < 0.0, pred < prev);
    }

    #[test]
    fn state_means_follow_district_rows(b in bundle()) {
        for s in &b.states {
            let rows: Vec<_> = b.districts.iter().filter(|d| d.state == s.state && d.year == s.year).collect();
            prop_assert_eq!(rows.len(), s.n_districts);
            let pcs: Vec<f64> = rows.iter().filter_map(|d| d.percent_change).collect();
            let expect = (!pcs.is_empty()).then(|| pcs.iter().sum::<f64>() / pcs.len() as f64);
            prop_assert_eq!(s.mean_percent_change, expect);
        }
    }
}

#[test]
fn missing_values_are_null_not_zero() {
    let meta = Metadata { run_id: "r".into(), experiment: "e".into(), model_name: "m".into(), model_family: "dummy".into(), test_years: vec![2020] };
    let p = Prediction { state: "S0".into(), district: "D0".into(), year: 2020, predicted: 1.0, actual: None };
    let b = build_bundle(meta, &[p], &HashMap::new(), &shapes(), &NameKeys::default());
    let v: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
    let d = &v["districts"][0];
    assert!(d["previous_actual"].is_null() && d["percent_change"].is_null() && d["actual"].is_null() && d["ape_pct"].is_null());
    assert_eq!(v["geojson"]["features"].as_array().unwrap().len(), 6);
}
