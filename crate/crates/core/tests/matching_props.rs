use proptest::prelude::*;

use yieldcast::matching::{fuzzy_join, levenshtein, similarity};

fn name() -> impl Strategy<Value = String> {
    "[a-dé ]{0,12}"
}

proptest! {
    #[test]
    fn levenshtein_is_a_metric(a in name(), b in name(), c in name()) {
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn levenshtein_length_bounds(a in name(), b in name()) {
        let (la, lb) = (a.chars().count(), b.chars().count());
        let d = levenshtein(&a, &b);
        prop_assert!(d <= la.max(lb));
        prop_assert!(d >= la.abs_diff(lb));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in name(), b in name()) {
        prop_assert_eq!(similarity(&a, &b), similarity(&b, &a));
        prop_assert!(similarity(&a, &b) <= 100);
    }

    #[test]
    fn fuzzy_join_ignores_input_order(
        ys in prop::collection::vec("[a-c]{1,6}", 0..10),
        ss in prop::collection::vec("[a-c]{1,6}", 0..10),
        threshold in 0u32..=100,
        seed in any::<u64>(),
    ) {
        let base = fuzzy_join(&ys, &ss, threshold);
        let rot = |v: &[String]| -> Vec<String> {
            let mut v = v.to_vec();
            v.reverse();
            if !v.is_empty() {
                let k = (seed as usize) % v.len();
                v.rotate_left(k);
            }
            v
        };
        prop_assert_eq!(fuzzy_join(&rot(&ys), &rot(&ss), threshold), base.clone());
        for m in &base.matches {
            prop_assert!(m.score >= threshold);
        }
    }
}
