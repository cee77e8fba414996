use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stap_core::ltl::{Nfa, PropSet};
use stap_core::models::{product, TransitionSystem};
use stap_core::realloc::{random_update, update_pa};
use stap_core::sim::load_scenario;

struct World {
    nfa: Arc<Nfa>,
    tss: Vec<TransitionSystem>,
    labels: Vec<PropSet>,
}

fn world(name: &str) -> World {
    let s = load_scenario(format!(
        "{}/../../scenarios/{name}.json",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    let tss = s.transition_systems().unwrap();
    let nfa = s.automaton(&tss).unwrap();
    let mut labels: Vec<PropSet> = tss
        .iter()
        .flat_map(|ts| ts.labels().iter().cloned())
        .collect();
    labels.sort();
    labels.dedup();
    World { nfa, tss, labels }
}

fn worlds() -> &'static [World; 2] {
    static W: OnceLock<[World; 2]> = OnceLock::new();
    W.get_or_init(|| [world("toy"), world("hospital_mini")])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Incremental updates give exactly the product rebuilt from the
    /// updated TS, and `R(t)` is exactly the set of vanished edges.
    #[test]
    fn incremental_update_matches_rebuild(seed in any::<u64>(), which in 0usize..2, steps in 1usize..5) {
        let w = &worlds()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.gen_range(0..w.tss.len());
        let mut pa = product(w.nfa.clone(), w.tss[r].clone(), r).unwrap();
        for _ in 0..steps {
            let info = random_update(pa.ts(), &w.labels, 3, &mut rng);
            let before = pa.edges();
            let rev = pa.revision();
            let removed = update_pa(&mut pa, &info).unwrap();
            let after = pa.edges();
            let scratch = product(w.nfa.clone(), pa.ts().clone(), r).unwrap();
            prop_assert_eq!(&after, &scratch.edges());
            prop_assert_eq!(&removed.0, &before.difference(&after).copied().collect());
            prop_assert_eq!(pa.revision(), rev + 1);
        }
    }
}
