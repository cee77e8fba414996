use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stap_core::ltl::{
    all_words, build_nfa, canonical, eval_word, nfa_accepts, parse, powerset, progress,
    random_formula, to_nnf, Formula, PropSet,
};

const PROPS: [&str; 3] = ["a", "b", "c"];

fn formula() -> impl Strategy<Value = Formula> {
    any::<u64>().prop_map(|seed| random_formula(&mut ChaCha8Rng::seed_from_u64(seed), &PROPS, 4))
}

fn letter() -> impl Strategy<Value = PropSet> {
    proptest::sample::select(powerset(&PROPS))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn automaton_agrees_with_semantics(f in formula()) {
        let letters = powerset(&PROPS);
        let nfa = build_nfa(&f, &letters).unwrap();
        for w in all_words(&letters, 4) {
            prop_assert_eq!(nfa_accepts(&nfa, &w), eval_word(&f, &w), "{} on {:?}", f, w);
        }
    }

    #[test]
    fn progression_is_sound(f in formula(), a in letter(), w in proptest::collection::vec(letter(), 0..4)) {
        let g = progress(&canonical(&f), &a).unwrap();
        let mut aw = vec![a];
        aw.extend(w.iter().cloned());
        prop_assert_eq!(eval_word(&f, &aw), eval_word(&g, &w));
    }

    #[test]
    fn canonical_is_idempotent(f in formula()) {
        let c = canonical(&f);
        prop_assert_eq!(canonical(&c), c);
    }

    #[test]
    fn nnf_preserves_meaning(f in formula()) {
        let g = to_nnf(&f);
        prop_assert!(g.is_nnf());
        for w in all_words(&powerset(&PROPS), 3) {
            prop_assert_eq!(eval_word(&f, &w), eval_word(&g, &w));
        }
    }

    #[test]
    fn print_parse_round_trip(f in formula()) {
        prop_assert_eq!(parse(&f.to_string()).unwrap(), f);
    }
}
