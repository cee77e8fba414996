//! `P = Q (x) T`: the product of the mission automaton with one agent's
//! transition system.
//!
//! The product is stored densely over all of `S_Q x S_T`, not only over the
//! part reachable from `S_0P`: switch and synchronization edges enter an
//! agent's product at arbitrary automaton states. For each `(q, t)` the row
//! holds `delta_Q(q, L(t))`; an edge `(q,t) -> (q',t')` exists iff
//! `(t,t')` is a TS transition and `q'` is in that row.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::ts::{TransitionSystem, TsEdge, TsState};
use super::ModelError;
use crate::ltl::{Letter, Nfa, NfaState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PaState {
    pub q: NfaState,
    pub t: TsState,
}

impl PaState {
    pub fn new(q: NfaState, t: TsState) -> Self {
        PaState { q, t }
    }
}

impl fmt::Display for PaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},t{})", self.q, self.t.0)
    }
}

pub type PaEdge = (PaState, PaState);

type Targets = SmallVec<[NfaState; 1]>;

#[derive(Debug, Clone)]
pub struct ProductAutomaton {
    agent: usize,
    nfa: Arc<Nfa>,
    ts: TransitionSystem,
    letters: Vec<Letter>,
    /// `rows[q][t] = delta_Q(q, L(t))`.
    rows: Vec<Vec<Targets>>,
    revision: u64,
}

/// Builds the product for agent `agent`; revision starts at 0.
pub fn product(
    nfa: Arc<Nfa>,
    ts: TransitionSystem,
    agent: usize,
) -> Result<ProductAutomaton, ModelError> {
    let letters = ts.labels().iter().map(|l| nfa.letter(l)).collect();
    let mut pa = ProductAutomaton {
        agent,
        nfa,
        ts,
        letters,
        rows: Vec::new(),
        revision: 0,
    };
    pa.sync_rows()?;
    Ok(pa)
}

impl ProductAutomaton {
    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn nfa(&self) -> &Arc<Nfa> {
        &self.nfa
    }

    pub fn ts(&self) -> &TransitionSystem {
        &self.ts
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Number of automaton states covered by the stored rows.
    pub fn num_q(&self) -> usize {
        self.rows.len()
    }

    pub fn num_t(&self) -> usize {
        self.ts.num_states()
    }

    pub fn num_states(&self) -> usize {
        self.num_q() * self.num_t()
    }

    pub fn states(&self) -> impl Iterator<Item = PaState> + '_ {
        let nt = self.num_t() as u32;
        (0..self.num_q() as u32)
            .flat_map(move |q| (0..nt).map(move |t| PaState::new(NfaState(q), TsState(t))))
    }

    pub fn initial_states(&self) -> Vec<PaState> {
        self.nfa
            .initial()
            .into_iter()
            .map(|q| PaState::new(q, self.ts.initial()))
            .collect()
    }

    pub fn is_accepting(&self, s: PaState) -> bool {
        self.nfa.is_accepting(s.q)
    }

    pub fn letter(&self, t: TsState) -> Letter {
        self.letters[t.index()]
    }

    /// `delta_Q(q, L(t))`, computed on demand for automaton states that
    /// appeared after the rows were last synchronized.
    pub fn targets(&self, q: NfaState, t: TsState) -> Targets {
        match self.rows.get(q.index()) {
            Some(row) => row[t.index()].clone(),
            None => self
                .nfa
                .delta_letter(q, self.letters[t.index()])
                .expect("progression of an interned state cannot fail")
                .into_iter()
                .collect(),
        }
    }

    /// Outgoing product edges of `s` with the inherited TS attributes, in
    /// `(t', q')` order.
    pub fn successors(&self, s: PaState) -> Vec<(PaState, &TsEdge)> {
        let targets = self.targets(s.q, s.t);
        let mut out = Vec::new();
        for &t2 in self.ts.succ(s.t) {
            let e = self.ts.edge(s.t, t2).expect("succ consistent with edges");
            for &q2 in &targets {
                out.push((PaState::new(q2, t2), e));
            }
        }
        out
    }

    /// Calls `f` for each outgoing edge without allocating.
    pub fn for_each_successor(&self, s: PaState, mut f: impl FnMut(PaState, &TsEdge)) {
        let targets = self.targets(s.q, s.t);
        for &t2 in self.ts.succ(s.t) {
            let e = self.ts.edge(s.t, t2).expect("succ consistent with edges");
            for &q2 in &targets {
                f(PaState::new(q2, t2), e);
            }
        }
    }

    pub fn edge(&self, a: PaState, b: PaState) -> Option<&TsEdge> {
        let e = self.ts.edge(a.t, b.t)?;
        self.targets(a.q, a.t).contains(&b.q).then_some(e)
    }

    pub fn has_edge(&self, a: PaState, b: PaState) -> bool {
        self.edge(a, b).is_some()
    }

    /// Every product edge, sorted.
    pub fn edges(&self) -> BTreeSet<PaEdge> {
        let mut out = BTreeSet::new();
        for s in self.states() {
            self.for_each_successor(s, |s2, _| {
                out.insert((s, s2));
            });
        }
        out
    }

    /// Edges leaving `(., t)` for every automaton state.
    pub fn edges_from_ts(&self, t: TsState) -> BTreeSet<PaEdge> {
        let mut out = BTreeSet::new();
        for q in 0..self.num_q() as u32 {
            let s = PaState::new(NfaState(q), t);
            self.for_each_successor(s, |s2, _| {
                out.insert((s, s2));
            });
        }
        out
    }

    /// States reachable from `S_0P`.
    pub fn reachable(&self) -> BTreeSet<PaState> {
        let mut seen: BTreeSet<PaState> = self.initial_states().into_iter().collect();
        let mut queue: VecDeque<PaState> = seen.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            self.for_each_successor(s, |s2, _| {
                if seen.insert(s2) {
                    queue.push_back(s2);
                }
            });
        }
        seen
    }

    /// Extends the rows to every automaton state, growing the automaton on
    /// demand for labels it has not seen yet.
    pub(crate) fn sync_rows(&mut self) -> Result<(), ModelError> {
        loop {
            let nq = self.nfa.num_states();
            if self.rows.len() >= nq {
                return Ok(());
            }
            for q in self.rows.len()..nq {
                let q = NfaState(q as u32);
                let mut row = Vec::with_capacity(self.letters.len());
                for &a in &self.letters {
                    row.push(self.nfa.delta_letter(q, a)?.into_iter().collect());
                }
                self.rows.push(row);
            }
        }
    }

    /// Recomputes the rows of `t` after its label changed.
    pub(crate) fn refresh_ts_state(&mut self, t: TsState) -> Result<(), ModelError> {
        let a = self.nfa.letter(self.ts.label(t));
        self.letters[t.index()] = a;
        for q in 0..self.rows.len() {
            self.rows[q][t.index()] = self
                .nfa
                .delta_letter(NfaState(q as u32), a)?
                .into_iter()
                .collect();
        }
        self.sync_rows()
    }

    pub(crate) fn ts_mut(&mut self) -> &mut TransitionSystem {
        &mut self.ts
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Moves the TS initial state, so that `S_0P = S_0Q x {s}`.
    pub fn set_initial(&mut self, s: TsState) {
        self.ts.set_initial(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{canonical, parse, PropSet};
    use crate::models::ts::{compose_ts, Cost, LocationMap, MapEdge, OpStateMachine};

    pub(crate) fn toy_ts(start: &str) -> TransitionSystem {
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
        compose_ts(&map, &opsm, start, "idle", &BTreeSet::new()).unwrap()
    }

    fn toy_nfa(ts: &TransitionSystem) -> Arc<Nfa> {
        let f = canonical(&parse("<>a && <>b").unwrap());
        Arc::new(Nfa::build(&f, ts.labels(), 1000).unwrap())
    }

    #[test]
    fn size_bound_and_validity() {
        let ts = toy_ts("s1");
        let nfa = toy_nfa(&ts);
        let pa = product(nfa.clone(), ts.clone(), 0).unwrap();
        assert!(pa.reachable().len() <= nfa.num_states() * ts.num_states());
        assert_eq!(pa.num_states(), nfa.num_states() * ts.num_states());
        for (a, b) in pa.edges() {
            assert!(ts.edge(a.t, b.t).is_some());
            assert!(nfa.delta(a.q, ts.label(a.t)).unwrap().contains(&b.q));
        }
    }

    #[test]
    fn move_from_s1_keeps_progress() {
        let ts = toy_ts("s1");
        let nfa = toy_nfa(&ts);
        let pa = product(nfa.clone(), ts.clone(), 0).unwrap();
        let q0 = nfa.initial_state();
        let s1 = ts.find("s1", "idle").unwrap();
        let a = ts.find("a", "idle").unwrap();
        assert!(pa.has_edge(PaState::new(q0, s1), PaState::new(q0, a)));
        // consuming {a, idle} from a moves the automaton to <>b
        let qb = nfa.lookup(&canonical(&parse("<>b").unwrap())).unwrap();
        assert!(pa.has_edge(PaState::new(q0, a), PaState::new(qb, a)));
    }

    #[test]
    fn accepting_reachable_iff_some_plan_word_satisfies() {
        use crate::ltl::eval_word;
        let f = parse("<>a && <>b").unwrap();
        for start in ["s1", "a", "b"] {
            let ts = toy_ts(start);
            let nfa = toy_nfa(&ts);
            let pa = product(nfa, ts.clone(), 0).unwrap();
            let via_pa = pa.reachable().iter().any(|&s| pa.is_accepting(s));
            // Oracle: enumerate TS runs of <= 6 transitions; the word is the
            // sequence of source labels.
            let mut found = false;
            let mut stack: Vec<(TsState, Vec<PropSet>)> = vec![(ts.initial(), vec![])];
            while let Some((s, w)) = stack.pop() {
                if eval_word(&f, &w) {
                    found = true;
                    break;
                }
                if w.len() < 6 {
                    for &t in ts.succ(s) {
                        let mut w2 = w.clone();
                        w2.push(ts.label(s).clone());
                        stack.push((t, w2));
                    }
                }
            }
            assert_eq!(via_pa, found, "start {start}");
        }
        let f = canonical(&parse("<>zz").unwrap());
        let ts = toy_ts("s1");
        let nfa = Arc::new(Nfa::build(&f, ts.labels(), 100).unwrap());
        let pa = product(nfa, ts, 0).unwrap();
        assert!(!pa.reachable().iter().any(|&s| pa.is_accepting(s)));
    }
}
