//! Progression automaton of a finite-LTL formula.
//!
//! States are canonical residual formulas, interned to dense ids. The
//! transition function is computed on demand and memoized per
//! `(state, letter)`. Letters are projected onto the propositions of the
//! formula first, since progression ignores every other proposition.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::eval::PropSet;
use super::formula::{canonical, empty_sat, Formula};
use super::progress::{progress_with, NotInNnf};

pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NfaError {
    #[error("automaton exceeds the state budget of {cap} states")]
    StateBudgetExceeded { cap: usize },
    #[error("formula mentions {0} propositions; at most 64 are supported")]
    TooManyPropositions(usize),
    #[error(transparent)]
    NotInNnf(#[from] NotInNnf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NfaState(pub u32);

impl NfaState {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NfaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// A letter projected onto the formula's propositions, as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(pub u64);

#[derive(Default)]
struct Inner {
    states: Vec<Formula>,
    index: HashMap<Formula, u32>,
    accepting: Vec<bool>,
    delta: HashMap<(u32, u64), u32>,
    letters: BTreeSet<u64>,
}

impl Inner {
    fn intern(&mut self, f: Formula, cap: usize) -> Result<u32, NfaError> {
        if let Some(&id) = self.index.get(&f) {
            return Ok(id);
        }
        if self.states.len() >= cap {
            return Err(NfaError::StateBudgetExceeded { cap });
        }
        let id = self.states.len() as u32;
        self.accepting.push(empty_sat(&f));
        self.index.insert(f.clone(), id);
        self.states.push(f);
        Ok(id)
    }
}

/// `Q = (S_Q, S_0Q, Sigma, delta_Q, F)` built by formula progression.
pub struct Nfa {
    formula: Formula,
    props: Vec<String>,
    prop_index: HashMap<String, usize>,
    cap: usize,
    inner: RwLock<Inner>,
}

impl fmt::Debug for Nfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nfa")
            .field("formula", &self.formula.to_string())
            .field("states", &self.num_states())
            .finish()
    }
}

impl Nfa {
    /// Empty automaton holding only the initial state.
    pub fn new(formula: &Formula, cap: usize) -> Result<Self, NfaError> {
        let props: Vec<String> = formula.props().into_iter().collect();
        if props.len() > 64 {
            return Err(NfaError::TooManyPropositions(props.len()));
        }
        let prop_index = props
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut inner = Inner::default();
        inner.intern(canonical(formula), cap)?;
        Ok(Nfa {
            formula: formula.clone(),
            props,
            prop_index,
            cap,
            inner: RwLock::new(inner),
        })
    }

    /// Materializes the progression closure of the formula over `letters`.
    pub fn build(formula: &Formula, letters: &[PropSet], cap: usize) -> Result<Self, NfaError> {
        let nfa = Nfa::new(formula, cap)?;
        let letters: Vec<Letter> = letters.iter().map(|l| nfa.letter(l)).collect();
        nfa.close_over(&letters)?;
        Ok(nfa)
    }

    /// Extends the closure so that every known state has a memoized
    /// transition for each of `letters`.
    pub fn close_over(&self, letters: &[Letter]) -> Result<(), NfaError> {
        let mut queue: VecDeque<NfaState> = (0..self.num_states() as u32).map(NfaState).collect();
        let mut seen: BTreeSet<NfaState> = queue.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for &a in letters {
                let t = self.step(q, a)?;
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        Ok(())
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// Propositions the automaton distinguishes, sorted.
    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn initial(&self) -> Vec<NfaState> {
        vec![NfaState(0)]
    }

    pub fn initial_state(&self) -> NfaState {
        NfaState(0)
    }

    pub fn num_states(&self) -> usize {
        self.inner.read().unwrap().states.len()
    }

    pub fn states(&self) -> Vec<NfaState> {
        (0..self.num_states() as u32).map(NfaState).collect()
    }

    pub fn state_formula(&self, q: NfaState) -> Formula {
        self.inner.read().unwrap().states[q.index()].clone()
    }

    pub fn is_accepting(&self, q: NfaState) -> bool {
        self.inner.read().unwrap().accepting[q.index()]
    }

    /// Id of a canonical formula if it is already a state.
    pub fn lookup(&self, f: &Formula) -> Option<NfaState> {
        self.inner
            .read()
            .unwrap()
            .index
            .get(&canonical(f))
            .map(|&i| NfaState(i))
    }

    pub fn letter(&self, set: &PropSet) -> Letter {
        let mut mask = 0u64;
        for p in set.iter() {
            if let Some(&i) = self.prop_index.get(p) {
                mask |= 1 << i;
            }
        }
        Letter(mask)
    }

    pub fn letter_props(&self, a: Letter) -> PropSet {
        self.props
            .iter()
            .enumerate()
            .filter(|(i, _)| a.0 & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect()
    }

    /// Letters for which at least one transition has been memoized.
    pub fn known_letters(&self) -> Vec<Letter> {
        self.inner
            .read()
            .unwrap()
            .letters
            .iter()
            .map(|&m| Letter(m))
            .collect()
    }

    /// Deterministic successor under one letter. Memoized; concurrent callers
    /// computing the same entry insert identical values.
    pub fn step(&self, q: NfaState, a: Letter) -> Result<NfaState, NfaError> {
        let f = {
            let inner = self.inner.read().unwrap();
            if let Some(&t) = inner.delta.get(&(q.0, a.0)) {
                return Ok(NfaState(t));
            }
            inner.states[q.index()].clone()
        };
        let index = &self.prop_index;
        let residual = progress_with(&f, &|p: &str| {
            index.get(p).is_some_and(|&i| a.0 & (1 << i) != 0)
        })?;
        let mut inner = self.inner.write().unwrap();
        if let Some(&t) = inner.delta.get(&(q.0, a.0)) {
            return Ok(NfaState(t));
        }
        let t = inner.intern(residual, self.cap)?;
        inner.delta.insert((q.0, a.0), t);
        inner.letters.insert(a.0);
        Ok(NfaState(t))
    }

    /// Set-valued transition relation `delta_Q(q, A)`. Progression makes it a
    /// singleton, but callers are written against the set signature.
    pub fn delta(&self, q: NfaState, set: &PropSet) -> Result<Vec<NfaState>, NfaError> {
        Ok(vec![self.step(q, self.letter(set))?])
    }

    /// Set-valued transition relation on a projected letter.
    pub fn delta_letter(&self, q: NfaState, a: Letter) -> Result<Vec<NfaState>, NfaError> {
        Ok(vec![self.step(q, a)?])
    }

    /// Runs `w` from the initial states; accepts iff some run ends in `F`.
    pub fn accepts(&self, w: &[PropSet]) -> Result<bool, NfaError> {
        let mut current: BTreeSet<NfaState> = self.initial().into_iter().collect();
        for a in w {
            let a = self.letter(a);
            let mut next = BTreeSet::new();
            for &q in &current {
                next.extend(self.delta_letter(q, a)?);
            }
            current = next;
        }
        Ok(current.iter().any(|&q| self.is_accepting(q)))
    }

    /// Snapshot of all memoized transitions, sorted.
    pub fn transitions(&self) -> Vec<(NfaState, Letter, NfaState)> {
        let inner = self.inner.read().unwrap();
        let mut out: Vec<_> = inner
            .delta
            .iter()
            .map(|(&(q, a), &t)| (NfaState(q), Letter(a), NfaState(t)))
            .collect();
        out.sort();
        out
    }

    /// States that can reach an accepting state using memoized transitions.
    pub fn coreachable(&self) -> BTreeSet<NfaState> {
        let trans = self.transitions();
        let mut rev: HashMap<NfaState, Vec<NfaState>> = HashMap::new();
        for (q, _, t) in &trans {
            rev.entry(*t).or_default().push(*q);
        }
        let mut out: BTreeSet<NfaState> = self
            .states()
            .into_iter()
            .filter(|&q| self.is_accepting(q))
            .collect();
        let mut queue: VecDeque<NfaState> = out.iter().copied().collect();
        while let Some(t) = queue.pop_front() {
            for &q in rev.get(&t).map(Vec::as_slice).unwrap_or(&[]) {
                if out.insert(q) {
                    queue.push_back(q);
                }
            }
        }
        out
    }

    /// States reachable from the initial states using memoized transitions.
    pub fn reachable(&self) -> BTreeSet<NfaState> {
        let trans = self.transitions();
        let mut fwd: HashMap<NfaState, Vec<NfaState>> = HashMap::new();
        for (q, _, t) in &trans {
            fwd.entry(*q).or_default().push(*t);
        }
        let mut out: BTreeSet<NfaState> = self.initial().into_iter().collect();
        let mut queue: VecDeque<NfaState> = out.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for &t in fwd.get(&q).map(Vec::as_slice).unwrap_or(&[]) {
                if out.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        out
    }
}

/// Builds the automaton with the default state budget.
pub fn build_nfa(formula: &Formula, letters: &[PropSet]) -> Result<Nfa, NfaError> {
    Nfa::build(formula, letters, DEFAULT_STATE_CAP)
}

pub fn nfa_accepts(nfa: &Nfa, w: &[PropSet]) -> bool {
    nfa.accepts(w)
        .expect("progression of a canonical formula cannot fail")
}
