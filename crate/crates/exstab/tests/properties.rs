//! Property-based checks over arbitrary inputs.
//!
//! The seeded end-to-end suites exercise realistic corpora; these properties
//! pin the small algebraic contracts underneath them — tokenization round
//! trips, budget floors, kernel bounds, prediction validation, ranking
//! order, seed stability, operator purity — on inputs proptest invents and
//! shrinks for us.

use exstab::core::{detokenize, is_content_word, tokenize, Explanation, Prediction};
use exstab::explain::kernel_weight;
use exstab::perturb::{char_delete, char_swap, word_delete, word_shuffle, Severity};
use exstab::seed::{derive_seed, rng_from_seed};
use proptest::prelude::*;
use rand::Rng;

/// Arbitrary text with plenty of whitespace variety mixed into arbitrary
/// unicode, since `tokenize` must treat every kind of whitespace alike.
fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            3 => any::<char>(),
            1 => prop_oneof![Just(' '), Just('\t'), Just('\n'), Just('\u{00a0}')],
        ],
        0..200,
    )
    .prop_map(String::from_iter)
}

/// Word lists over several scripts; no whitespace inside a word.
fn arb_words(min: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            4 => "[a-zA-Z]{1,10}",
            1 => "[0-9]{1,4}",
            1 => "[α-ωäöüß]{1,6}",
            1 => "(the|and|with|of|a)",
        ],
        min..30,
    )
}

proptest! {
    #[test]
    fn detokenize_then_tokenize_is_identity_on_token_lists(text in arb_text()) {
        let words = tokenize(&text);
        prop_assert_eq!(tokenize(&detokenize(&words)), words);
    }

    #[test]
    fn tokens_carry_every_non_whitespace_character_in_order(text in arb_text()) {
        let words = tokenize(&text);
        for w in &words {
            prop_assert!(!w.is_empty());
            prop_assert!(!w.chars().any(char::is_whitespace));
        }
        let glued: String = words.concat();
        let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(glued, stripped);
    }

    #[test]
    fn budgets_are_exact_floors_bounded_and_ordered(count in 0usize..1_000_000) {
        for sev in Severity::ALL {
            let budget = sev.budget(count);
            prop_assert_eq!(budget, (sev.value() * count as f64).floor() as usize);
            prop_assert!(budget <= count);
            prop_assert!(sev.budget(count + 1) >= budget, "budgets grow with the base");
        }
        let [light, medium, heavy] = Severity::ALL;
        prop_assert!(light.budget(count) <= medium.budget(count));
        prop_assert!(medium.budget(count) <= heavy.budget(count));
    }

    #[test]
    fn kernel_weights_stay_in_the_unit_interval_and_grow_with_overlap(
        o1 in 0.0f64..=1.0,
        o2 in 0.0f64..=1.0,
        width in 0.05f64..=2.0,
    ) {
        let (lo, hi) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
        let (w_lo, w_hi) = (kernel_weight(lo, width), kernel_weight(hi, width));
        prop_assert!(w_lo > 0.0 && w_hi <= 1.0);
        prop_assert!(w_lo <= w_hi, "keeping more words must never weigh less");
        prop_assert_eq!(kernel_weight(1.0, width), 1.0);
    }

    #[test]
    fn normalized_probability_vectors_are_accepted_with_first_argmax(
        raw in prop::collection::vec(0.0f64..=1.0, 1..12),
    ) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-9);
        let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
        let pred = Prediction::from_probs(probs.clone()).unwrap();
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        prop_assert_eq!(pred.predicted_index, best);
        prop_assert_eq!(pred.confidence(), probs[best]);
    }

    #[test]
    fn tainted_probability_vectors_are_rejected(
        raw in prop::collection::vec(0.0f64..=1.0, 1..12),
        excess in 0.01f64..10.0,
    ) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-9);
        let normalized: Vec<f64> = raw.iter().map(|p| p / sum).collect();

        let mut unbalanced = normalized.clone();
        unbalanced[0] += excess;
        prop_assert!(Prediction::from_probs(unbalanced).is_err());

        let mut nan = normalized.clone();
        nan[0] = f64::NAN;
        prop_assert!(Prediction::from_probs(nan).is_err());

        let mut negative = normalized;
        negative[0] = -0.5;
        prop_assert!(Prediction::from_probs(negative).is_err());
    }

    #[test]
    fn rankings_are_permutations_sorted_by_score_then_position(
        scores in prop::collection::vec(
            prop_oneof![Just(0.0f64), Just(1.0), Just(-1.0), -10.0f64..10.0],
            1..40,
        ),
    ) {
        let explanation = Explanation::new(scores.clone()).unwrap();
        let ranking = explanation.ranking();
        let mut seen = vec![false; scores.len()];
        for &i in ranking {
            prop_assert!(!seen[i], "ranking repeats position {i}");
            seen[i] = true;
        }
        prop_assert!(seen.iter().all(|&s| s), "ranking skips a position");
        for pair in ranking.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            prop_assert!(
                scores[a] > scores[b] || (scores[a] == scores[b] && a < b),
                "positions {a} and {b} are misordered"
            );
        }
        prop_assert_eq!(explanation.top1_index(), ranking[0]);
    }

    #[test]
    fn seed_derivation_is_deterministic_and_boundary_sensitive(
        root in any::<u64>(),
        a in "[a-z0-9]{1,8}",
        b in "[a-z0-9]{1,8}",
    ) {
        prop_assert_eq!(derive_seed(root, &[&a, &b]), derive_seed(root, &[&a, &b]));
        // Part boundaries are significant: "ab"+"c" never aliases "abc".
        let joined = format!("{a}{b}");
        prop_assert_ne!(derive_seed(root, &[&a, &b]), derive_seed(root, &[&joined]));
    }

    #[test]
    fn rng_streams_reproduce_exactly(seed in any::<u64>()) {
        let mut a = rng_from_seed(seed);
        let mut b = rng_from_seed(seed);
        let xs: Vec<u64> = (0..16).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.random()).collect();
        prop_assert_eq!(xs, ys);
    }

    #[test]
    fn operators_are_pure_functions_of_input_severity_and_seed(
        words in arb_words(1),
        seed in any::<u64>(),
    ) {
        let text = words.join(" ");
        for sev in Severity::ALL {
            prop_assert_eq!(char_swap(&text, sev, seed), char_swap(&text, sev, seed));
            prop_assert_eq!(char_delete(&text, sev, seed), char_delete(&text, sev, seed));
            prop_assert_eq!(word_delete(&words, sev, seed), word_delete(&words, sev, seed));
            prop_assert_eq!(word_shuffle(&words, sev, seed), word_shuffle(&words, sev, seed));
        }
    }

    #[test]
    fn word_operators_respect_budgets_and_safeguards(
        words in arb_words(2),
        seed in any::<u64>(),
    ) {
        let had_content = words.iter().any(|w| is_content_word(w));
        for sev in Severity::ALL {
            let budget = sev.budget(words.len());

            let deleted = word_delete(&words, sev, seed);
            prop_assert_eq!(deleted.budget, budget);
            prop_assert_eq!(deleted.applied, budget, "delete spends its whole budget");
            prop_assert_eq!(words.len() - deleted.words.len(), deleted.applied);
            prop_assert!(!deleted.words.is_empty());
            if had_content {
                prop_assert!(
                    deleted.words.iter().any(|w| is_content_word(w)),
                    "deletion must leave a content word standing"
                );
            }

            let shuffled = word_shuffle(&words, sev, seed);
            prop_assert_eq!(shuffled.budget, budget);
            prop_assert_eq!(shuffled.applied, budget);
            let mut before = words.clone();
            let mut after = shuffled.words.clone();
            before.sort();
            after.sort();
            prop_assert_eq!(before, after, "shuffle must preserve the word multiset");
        }
    }

    #[test]
    fn char_operators_preserve_word_count_and_shrink_by_applied(
        words in arb_words(1),
        seed in any::<u64>(),
    ) {
        let text = words.join(" ");
        let non_ws = text.chars().filter(|c| !c.is_whitespace()).count();
        for sev in Severity::ALL {
            let swapped = char_swap(&text, sev, seed);
            prop_assert!(swapped.applied <= swapped.budget);
            prop_assert_eq!(tokenize(&swapped.text).len(), words.len());
            let mut before: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
            let mut after: Vec<char> = swapped.text.chars().filter(|c| !c.is_whitespace()).collect();
            before.sort_unstable();
            after.sort_unstable();
            prop_assert_eq!(before, after, "swap must preserve the character multiset");

            let shrunk = char_delete(&text, sev, seed);
            prop_assert!(shrunk.applied <= shrunk.budget);
            prop_assert_eq!(tokenize(&shrunk.text).len(), words.len());
            let left = shrunk.text.chars().filter(|c| !c.is_whitespace()).count();
            prop_assert_eq!(left, non_ws - shrunk.applied);
        }
    }
}
