use proptest::prelude::*;

use yieldcast::evaluation::{compute_metrics, r2_score, residual_summary};

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..50).prop_flat_map(|n| (prop::collection::vec(0.1f64..20.0, n), prop::collection::vec(0.0f64..20.0, n)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn rmse_squared_is_mse((t, p) in pair()) {
        let m = compute_metrics(&t, &p).unwrap();
        prop_assert!(close(m.rmse * m.rmse, m.mse, 1e-12));
    }

    #[test]
    fn mean_predictor_scores_zero(t in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let p = vec![mean; t.len()];
        let r2 = r2_score(&t, &p);
        let distinct = t.iter().any(|v| *v != t[0]);
        prop_assert_eq!(r2, if distinct { 0.0 } else { 1.0 });
    }

    #[test]
    fn mae_rmse_translation_invariant((t, p) in pair(), shift in -5.0f64..5.0) {
        let a = compute_metrics(&t, &p).unwrap();
        let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
        let ps: Vec<f64> = p.iter().map(|v| v + shift).collect();
        let b = compute_metrics(&ts, &ps).unwrap();
        prop_assert!(close(a.mae, b.mae, 1e-9));
        prop_assert!(close(a.rmse, b.rmse, 1e-9));
    }

    #[test]
    fn r2_affine_invariant((t, p) in pair(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        prop_assume!(t.iter().any(|v| *v != t[0]));
        let f = |v: &Vec<f64>| v.iter().map(|x| scale * x + shift).collect::<Vec<f64>>();
        prop_assert!(close(r2_score(&t, &p), r2_score(&f(&t), &f(&p)), 1e-9));
    }

    #[test]
    fn agrees_with_direct_sums((t, p) in pair()) {
        let m = compute_metrics(&t, &p).unwrap();
        let n = t.len() as f64;
        let (mut ae, mut se, mut ape, mut sle) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..t.len() {
            let e = t[i] - p[i];
            ae += e.abs();
            se += e * e;
            ape += (e / t[i]).abs();
            let l = (1.0 + t[i]).ln() - (1.0 + p[i].max(0.0)).ln();
            sle += l * l;
        }
        let mean = t.iter().sum::<f64>() / n;
        let tot: f64 = t.iter().map(|v| (v - mean) * (v - mean)).sum();
        prop_assert!(close(m.mae, ae / n, 1e-12));
        prop_assert!(close(m.mse, se / n, 1e-12));
        prop_assert!(close(m.rmse, (se / n).sqrt(), 1e-12));
        prop_assert!(close(m.mape.unwrap(), ape / n, 1e-12));
        prop_assert!(close(m.rmsle.unwrap(), (sle / n).sqrt(), 1e-12));
        if tot > 0.0 {
            prop_assert!(close(m.r2, 1.0 - se / tot, 1e-12));
        }
    }

    #[test]
    fn histogram_counts_every_residual((t, p) in pair()) {
        let s = residual_summary(&t, &p).unwrap();
        prop_assert_eq!(s.histogram.counts.iter().sum::<usize>(), t.len());
        let distinct = s.residuals.iter().any(|r| *r != s.residuals[0]);
        let bins = if distinct { (t.len() as f64).sqrt().ceil() as usize } else { 1 };
        prop_assert_eq!(s.histogram.counts.len(), bins);
    }
}
