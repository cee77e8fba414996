//! Environmental updates `Info(t)` and their effect on a product.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ReallocError;
use crate::ltl::PropSet;
use crate::models::{Cost, PaEdge, ProductAutomaton, TransitionSystem, TsEdge, TsState};

/// `Info(t)`: transitions to add and delete and states to relabel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateInfo {
    #[serde(default)]
    pub add: Vec<(TsState, TsState, TsEdge)>,
    #[serde(default)]
    pub delete: Vec<(TsState, TsState)>,
    #[serde(default)]
    pub relabel: Vec<(PropSet, TsState)>,
    #[serde(default)]
    pub t: u64,
}

impl UpdateInfo {
    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.delete.is_empty() && self.relabel.is_empty()
    }
}

/// `R(t)`: product edges removed by one update.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedEdges(pub BTreeSet<PaEdge>);

impl RemovedEdges {
    pub fn contains(&self, e: &PaEdge) -> bool {
        self.0.contains(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Applies `Info(t)` to the product's TS and recomputes the affected edges.
/// Edges are gated by the label of their source, so a relabel of `s`
/// changes the edges leaving `(., s)`. Bumps the revision.
pub fn update_pa(
    pa: &mut ProductAutomaton,
    info: &UpdateInfo,
) -> Result<RemovedEdges, ReallocError> {
    let n = pa.num_t();
    let check = |s: TsState| {
        if s.index() < n {
            Ok(())
        } else {
            Err(ReallocError::UnknownState(format!("#{}", s.0)))
        }
    };
    let added: BTreeSet<(TsState, TsState)> = info.add.iter().map(|(a, b, _)| (*a, *b)).collect();
    for &(a, b) in added.iter().chain(&info.delete) {
        check(a)?;
        check(b)?;
    }
    for (_, s) in &info.relabel {
        check(*s)?;
    }
    if info.delete.iter().any(|e| added.contains(e)) {
        return Err(ReallocError::InvalidUpdate(
            "a transition is both added and deleted".into(),
        ));
    }

    let sources: BTreeSet<TsState> = info
        .delete
        .iter()
        .map(|(a, _)| *a)
        .chain(info.relabel.iter().map(|(_, s)| *s))
        .collect();
    let mut before = BTreeSet::new();
    for &s in &sources {
        before.extend(pa.edges_from_ts(s));
    }

    for (label, s) in &info.relabel {
        pa.ts_mut().relabel(*s, label.clone())?;
        pa.refresh_ts_state(*s)?;
    }
    for &(a, b) in &info.delete {
        pa.ts_mut().remove_edge(a, b);
    }
    for (a, b, e) in &info.add {
        pa.ts_mut().add_edge(*a, *b, e.clone())?;
    }
    pa.sync_rows()?;

    let mut after = BTreeSet::new();
    for &s in &sources {
        after.extend(pa.edges_from_ts(s));
    }
    pa.bump_revision();
    Ok(RemovedEdges(before.difference(&after).copied().collect()))
}

/// A random update over `ts`: up to `max_each` deletions of existing
/// transitions, additions between random states and relabels to labels drawn
/// from `labels`. Adds never coincide with deletes.
pub fn random_update(
    ts: &TransitionSystem,
    labels: &[PropSet],
    max_each: usize,
    rng: &mut impl Rng,
) -> UpdateInfo {
    let n = ts.num_states() as u32;
    let existing: Vec<(TsState, TsState)> = ts.edges().map(|(a, b, _)| (a, b)).collect();
    let mut info = UpdateInfo::default();
    for _ in 0..rng.gen_range(0..=max_each) {
        if let Some(&e) = existing.choose(rng) {
            info.delete.push(e);
        }
    }
    for _ in 0..rng.gen_range(0..=max_each) {
        let e = (TsState(rng.gen_range(0..n)), TsState(rng.gen_range(0..n)));
        if !info.delete.contains(&e) {
            info.add.push((
                e.0,
                e.1,
                TsEdge::new("added", Cost(rng.gen_range(1..5) * Cost::ONE.0), 1),
            ));
        }
    }
    for _ in 0..rng.gen_range(0..=max_each) {
        if let Some(l) = labels.choose(rng) {
            info.relabel.push((l.clone(), TsState(rng.gen_range(0..n))));
        }
    }
    info
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{canonical, parse, Nfa};
    use crate::models::{compose_ts, product, Cost, LocationMap, MapEdge, OpStateMachine, PaState};
    use std::sync::Arc;

    fn toy() -> ProductAutomaton {
        let map = LocationMap {
            locations: vec!["s1".into(), "a".into(), "b".into()],
            edges: vec![
                MapEdge {
                    from: "s1".into(),
                    to: "a".into(),
                    cost: Cost::ONE,
                    duration: 1,
                    capability: None,
                },
                MapEdge {
                    from: "a".into(),
                    to: "b".into(),
                    cost: Cost::ONE,
                    duration: 1,
                    capability: None,
                },
            ],
        };
        let opsm = OpStateMachine {
            states: vec!["idle".into()],
            transitions: vec![],
        };
        let ts = compose_ts(&map, &opsm, "s1", "idle", &BTreeSet::new()).unwrap();
        let f = canonical(&parse("<>a && <>b").unwrap());
        let nfa = Arc::new(Nfa::build(&f, ts.labels(), 100).unwrap());
        product(nfa, ts, 0).unwrap()
    }

    #[test]
    fn delete_removes_every_automaton_copy() {
        let mut pa = toy();
        let (a, b) = (TsState(1), TsState(2));
        let expect: BTreeSet<PaEdge> = pa
            .edges()
            .into_iter()
            .filter(|(x, y)| x.t == a && y.t == b)
            .collect();
        assert_eq!(expect.len(), pa.num_q());
        let info = UpdateInfo {
            delete: vec![(a, b)],
            ..Default::default()
        };
        let r = update_pa(&mut pa, &info).unwrap();
        assert_eq!(r.0, expect);
        assert_eq!(pa.revision(), 1);
        assert!(!pa.edges().iter().any(|(x, y)| x.t == a && y.t == b));
    }

    #[test]
    fn add_and_relabel_match_the_rule() {
        let mut pa = toy();
        let (s1, b) = (TsState(0), TsState(2));
        let info = UpdateInfo {
            add: vec![(s1, b, TsEdge::new("shortcut", Cost::ONE, 1))],
            ..Default::default()
        };
        assert!(update_pa(&mut pa, &info).unwrap().is_empty());
        for q in pa.nfa().states() {
            let q2 = pa.nfa().delta(q, pa.ts().label(s1)).unwrap()[0];
            assert!(pa.has_edge(PaState::new(q, s1), PaState::new(q2, b)));
        }
        // relabel s1 as {a}: progress from the initial state now moves
        let label: PropSet = ["a"].into_iter().collect();
        let info = UpdateInfo {
            relabel: vec![(label.clone(), s1)],
            ..Default::default()
        };
        let r = update_pa(&mut pa, &info).unwrap();
        let q0 = pa.nfa().initial_state();
        assert!(r.contains(&(PaState::new(q0, s1), PaState::new(q0, b))));
        let q1 = pa.nfa().delta(q0, &label).unwrap()[0];
        assert!(pa.has_edge(PaState::new(q0, s1), PaState::new(q1, b)));
    }

    #[test]
    fn malformed_updates() {
        let mut pa = toy();
        let bad = UpdateInfo {
            delete: vec![(TsState(0), TsState(9))],
            ..Default::default()
        };
        assert!(matches!(
            update_pa(&mut pa, &bad),
            Err(ReallocError::UnknownState(_))
        ));
        let e = TsEdge::new("x", Cost::ONE, 1);
        let both = UpdateInfo {
            add: vec![(TsState(0), TsState(2), e)],
            delete: vec![(TsState(0), TsState(2))],
            ..Default::default()
        };
        assert!(matches!(
            update_pa(&mut pa, &both),
            Err(ReallocError::InvalidUpdate(_))
        ));
        assert_eq!(pa.revision(), 0);
    }
}
