use proptest::prelude::*;

use yieldcast::matrix::FeatureMatrix;
use yieldcast::models::{fit, read_model, write_model, ForestParams, Learned, ModelKind, ModelSpec, OmpParams, Predictor, RidgeParams, TreeParams};

fn dataset(max_rows: usize, width: usize) -> impl Strategy<Value = (FeatureMatrix, Vec<f64>)> {
    (8..max_rows).prop_flat_map(move |n| {
        (prop::collection::vec(-5.0f64..5.0, n * width), prop::collection::vec(-3.0f64..3.0, n))
            .prop_map(move |(x, y)| (FeatureMatrix::unnamed(width, x), y))
    })
}

fn distinct_rows(x: &FeatureMatrix) -> bool {
    let rows: Vec<Vec<u64>> = x.rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    let mut sorted = rows.clone();
    sorted.sort();
    sorted.dedup();
    sorted.len() == rows.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ensembles_are_deterministic((x, y) in dataset(60, 4), seed in any::<u64>()) {
        for family in ["forest", "extra_trees", "gbm", "tree"] {
            let spec = ModelSpec::new(ModelKind::default_for(family).unwrap()).with_seed(seed);
            let a = fit(&spec, &x, &y).unwrap();
            let b = fit(&spec, &x, &y).unwrap();
            prop_assert_eq!(&a.learned, &b.learned);
            prop_assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
        }
    }

    #[test]
    fn unrestricted_tree_interpolates((x, y) in dataset(80, 3)) {
        prop_assume!(distinct_rows(&x));
        let spec = ModelSpec::new(ModelKind::Tree(TreeParams { max_depth: None, min_samples_leaf: 1, min_samples_split: 2 }));
        let m = fit(&spec, &x, &y).unwrap();
        prop_assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn single_unbagged_tree_forest_is_cart((x, y) in dataset(60, 3), seed in any::<u64>()) {
        let forest = ModelSpec::new(ModelKind::Forest(ForestParams {
            n_trees: 1,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: Some(3),
            bootstrap: Some(false),
        }))
        .with_seed(seed);
        let tree = ModelSpec::new(ModelKind::Tree(TreeParams::default()));
        let f = fit(&forest, &x, &y).unwrap();
        let t = fit(&tree, &x, &y).unwrap();
        prop_assert_eq!(f.predict(&x).unwrap(), t.predict(&x).unwrap());
    }

    #[test]
    fn ridge_tends_to_least_squares((x, _) in dataset(60, 3), w in prop::collection::vec(-3.0f64..3.0, 3)) {
        let n = x.n_rows();
        prop_assume!(n >= 12);
        let y: Vec<f64> = x.rows().enumerate().map(|(i, r)| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.01 * ((i * 37 % 11) as f64 - 5.0)).collect();
        let lin = fit(&ModelSpec::new(ModelKind::Linear), &x, &y).unwrap();
        let ridge = fit(&ModelSpec::new(ModelKind::Ridge(RidgeParams { alpha: 1e-8 })), &x, &y).unwrap();
        let (Learned::Linear(a), Learned::Linear(b)) = (&lin.learned, &ridge.learned) else { panic!("linear families") };
        let diff: f64 = a.coef.iter().zip(&b.coef).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-5, "coefficient gap {diff}");
    }

    #[test]
    fn omp_selects_at_most_n_nonzero((x, y) in dataset(60, 6), k in 1usize..7) {
        let m = fit(&ModelSpec::new(ModelKind::Omp(OmpParams { n_nonzero: k })), &x, &y).unwrap();
        let Learned::Linear(lin) = &m.learned else { panic!("omp is linear") };
        prop_assert!(lin.selected.len() <= k);
        let mut s = lin.selected.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), lin.selected.len());
        for j in 0..6 {
            if !lin.selected.contains(&j) {
                prop_assert_eq!(lin.coef[j], 0.0);
            }
        }
    }

    #[test]
    fn binary_format_round_trips((x, y) in dataset(40, 3), seed in any::<u64>()) {
        for family in ModelKind::FAMILIES {
            let spec = ModelSpec::new(ModelKind::default_for(family).unwrap()).with_seed(seed);
            let m = match fit(&spec, &x, &y) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let mut buf = Vec::new();
            write_model(&m, &mut buf).unwrap();
            let back = read_model(&mut buf.as_slice()).unwrap();
            for row in x.rows() {
                prop_assert_eq!(back.predict_row(row).to_bits(), m.predict_row(row).to_bits());
            }
        }
    }
}

#[test]
fn omp_uses_exactly_n_nonzero_on_generic_data() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let x = FeatureMatrix::unnamed(8, (0..800).map(|_| rng.random_range(-1.0..1.0)).collect());
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
    for k in 1..=8 {
        let m = fit(&ModelSpec::new(ModelKind::Omp(OmpParams { n_nonzero: k })), &x, &y).unwrap();
        let Learned::Linear(lin) = &m.learned else { panic!("omp is linear") };
        assert_eq!(lin.selected.len(), k);
    }
}
