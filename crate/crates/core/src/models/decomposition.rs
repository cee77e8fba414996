//! The decomposition set `D`: automaton states at which the mission may be
//! cut into pieces that are accepted in any order.
//!
//! A state `q` is kept when it is reachable, co-reachable and
//! `L(q -> F) . L(S_0 -> q)` is included in `L(Q)`, i.e. the second half of
//! the mission followed by the first half is still accepted. Progression
//! automata are deterministic, so by default inclusion is decided exactly by
//! searches over state pairs. The general method runs a subset construction
//! over the concatenation automaton, backed by a bounded word search when
//! the construction exceeds its budget.
//!
//! Segment words may optionally be restricted to begin with one of a set of
//! letters (the labels agents start from), since every agent's word starts
//! at its own initial state.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ltl::{Letter, Nfa, NfaError, NfaState, PropSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    ProvedByInclusion,
    Assumed,
    Refuted,
}

/// How the inclusion check is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InclusionMethod {
    /// Pair searches over the deterministic automaton; polynomial and exact.
    #[default]
    Product,
    /// Subset construction over the concatenation automaton, with a budget.
    Subset,
}

#[derive(Debug, Clone)]
pub struct DecompositionConfig {
    pub method: InclusionMethod,
    /// Budget on explored subset-construction states per candidate.
    pub subset_cap: usize,
    /// Word length bound of the fallback search.
    pub fallback_len: usize,
    pub initial_letters: Option<BTreeSet<Letter>>,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            method: InclusionMethod::Product,
            subset_cap: 1 << 16,
            fallback_len: 6,
            initial_letters: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecompositionSet {
    tags: BTreeMap<NfaState, Certificate>,
    initial_letters: Option<BTreeSet<Letter>>,
}

impl DecompositionSet {
    /// A hand-picked set, tagged as assumed.
    pub fn from_states(
        states: impl IntoIterator<Item = NfaState>,
        initial_letters: Option<BTreeSet<Letter>>,
    ) -> Self {
        DecompositionSet {
            tags: states
                .into_iter()
                .map(|q| (q, Certificate::Assumed))
                .collect(),
            initial_letters,
        }
    }

    pub fn contains(&self, q: NfaState) -> bool {
        matches!(
            self.tags.get(&q),
            Some(Certificate::ProvedByInclusion | Certificate::Assumed)
        )
    }

    /// Members in id order.
    pub fn members(&self) -> Vec<NfaState> {
        self.tags
            .iter()
            .filter(|(_, c)| **c != Certificate::Refuted)
            .map(|(&q, _)| q)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn certificate(&self, q: NfaState) -> Option<Certificate> {
        self.tags.get(&q).copied()
    }

    pub fn initial_letters(&self) -> Option<&BTreeSet<Letter>> {
        self.initial_letters.as_ref()
    }

    pub fn insert(&mut self, q: NfaState, c: Certificate) {
        self.tags.insert(q, c);
    }
}

struct Graph {
    letters: Vec<Letter>,
    /// `next[q][i] = delta(q, letters[i])`.
    next: Vec<Vec<u32>>,
    accepting: Vec<bool>,
    init_ok: Vec<bool>,
}

impl Graph {
    fn new(nfa: &Nfa, initial_letters: Option<&BTreeSet<Letter>>) -> Result<Self, NfaError> {
        let letters = nfa.known_letters();
        nfa.close_over(&letters)?;
        let n = nfa.num_states();
        let mut next = Vec::with_capacity(n);
        for q in 0..n as u32 {
            let row = letters
                .iter()
                .map(|&a| nfa.step(NfaState(q), a).map(|t| t.0))
                .collect::<Result<Vec<_>, _>>()?;
            next.push(row);
        }
        let accepting = (0..n as u32)
            .map(|q| nfa.is_accepting(NfaState(q)))
            .collect();
        let init_ok = letters
            .iter()
            .map(|a| initial_letters.is_none_or(|s| s.contains(a)))
            .collect();
        Ok(Graph {
            letters,
            next,
            accepting,
            init_ok,
        })
    }

    fn n(&self) -> usize {
        self.next.len()
    }

    fn reach_from(&self, src: u32) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        seen[src as usize] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(q) = queue.pop_front() {
            for &t in &self.next[q as usize] {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// States from which some state in `goal` is reachable.
    fn reach_to(&self, goal: &[bool]) -> Vec<bool> {
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); self.n()];
        for (q, row) in self.next.iter().enumerate() {
            for &t in row {
                rev[t as usize].push(q as u32);
            }
        }
        let mut seen = goal.to_vec();
        let mut queue: VecDeque<u32> = (0..self.n() as u32).filter(|&q| goal[q as usize]).collect();
        while let Some(t) = queue.pop_front() {
            for &q in &rev[t as usize] {
                if !seen[q as usize] {
                    seen[q as usize] = true;
                    queue.push_back(q);
                }
            }
        }
        seen
    }
}

enum Inclusion {
    Holds,
    Fails,
    Budget,
}

// Concatenation-automaton state: (segment, automaton state, fresh).
// `fresh` marks that the segment has not consumed a letter yet.
type CState = (u8, u32, bool);

fn inclusion(g: &Graph, q: u32, coreach: &[bool], to_q: &[bool], cap: usize) -> Inclusion {
    let s0 = 0u32;
    let close = |set: &mut BTreeSet<CState>| {
        let starts = set
            .iter()
            .any(|&(seg, s, _)| seg == 1 && g.accepting[s as usize]);
        if starts && to_q[s0 as usize] {
            set.insert((2, s0, true));
        }
    };
    let mut c0 = BTreeSet::from([(1u8, q, true)]);
    close(&mut c0);
    let start = (c0, BTreeSet::from([s0]));
    let mut seen: HashSet<(BTreeSet<CState>, BTreeSet<u32>)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some((cset, mset)) = queue.pop_front() {
        let c_acc = cset.iter().any(|&(seg, s, _)| seg == 2 && s == q);
        if c_acc && !mset.iter().any(|&m| g.accepting[m as usize]) {
            return Inclusion::Fails;
        }
        for i in 0..g.letters.len() {
            let mut c2 = BTreeSet::new();
            for &(seg, s, fresh) in &cset {
                if fresh && !g.init_ok[i] {
                    continue;
                }
                let t = g.next[s as usize][i];
                let alive = if seg == 1 {
                    coreach[t as usize]
                } else {
                    to_q[t as usize]
                };
                if alive {
                    c2.insert((seg, t, false));
                }
            }
            if c2.is_empty() {
                continue;
            }
            close(&mut c2);
            let m2: BTreeSet<u32> = mset.iter().map(|&m| g.next[m as usize][i]).collect();
            let key = (c2, m2);
            if !seen.contains(&key) {
                if seen.len() >= cap {
                    return Inclusion::Budget;
                }
                seen.insert(key.clone());
                queue.push_back(key);
            }
        }
    }
    Inclusion::Holds
}

/// Searches for `w1: S_0 -> q` and `w2: q -> F`, both of length at most
/// `len`, with `w2 . w1` rejected.
fn bounded_counterexample(g: &Graph, q: u32, len: usize) -> bool {
    // (position of w2's run from q, main run from S_0, fresh)
    let mut after_w2: BTreeSet<u32> = BTreeSet::new();
    let mut layer: BTreeSet<(u32, u32, bool)> = BTreeSet::from([(q, 0, true)]);
    let mut seen = layer.clone();
    for depth in 0..=len {
        for &(s, m, _) in &layer {
            if g.accepting[s as usize] {
                after_w2.insert(m);
            }
        }
        if depth == len {
            break;
        }
        let mut next = BTreeSet::new();
        for &(s, m, fresh) in &layer {
            for i in 0..g.letters.len() {
                if fresh && !g.init_ok[i] {
                    continue;
                }
                let k = (g.next[s as usize][i], g.next[m as usize][i], false);
                if seen.insert(k) {
                    next.insert(k);
                }
            }
        }
        layer = next;
    }
    for &m0 in &after_w2 {
        let mut layer: BTreeSet<(u32, u32, bool)> = BTreeSet::from([(0, m0, true)]);
        let mut seen = layer.clone();
        for depth in 0..=len {
            if layer
                .iter()
                .any(|&(s, m, _)| s == q && !g.accepting[m as usize])
            {
                return true;
            }
            if depth == len {
                break;
            }
            let mut next = BTreeSet::new();
            for &(s, m, fresh) in &layer {
                for i in 0..g.letters.len() {
                    if fresh && !g.init_ok[i] {
                        continue;
                    }
                    let k = (g.next[s as usize][i], g.next[m as usize][i], false);
                    if seen.insert(k) {
                        next.insert(k);
                    }
                }
            }
            layer = next;
        }
    }
    false
}

/// Pair search from `(a, b)` under the same letters; `fresh` applies the
/// initial-letter restriction to the first step. Calls `visit` on every
/// reached pair.
fn pair_search(
    g: &Graph,
    a: u32,
    b: u32,
    mut visit: impl FnMut(u32, u32),
    prune: impl Fn(u32) -> bool,
) {
    let n = g.n();
    let key = |s: u32, m: u32| s as usize * n + m as usize;
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::new();
    visit(a, b);
    // the start pair is the only fresh one
    for i in 0..g.letters.len() {
        if !g.init_ok[i] {
            continue;
        }
        let (s, m) = (g.next[a as usize][i], g.next[b as usize][i]);
        if prune(s) || seen[key(s, m)] {
            continue;
        }
        seen[key(s, m)] = true;
        queue.push_back((s, m));
    }
    while let Some((s, m)) = queue.pop_front() {
        visit(s, m);
        for i in 0..g.letters.len() {
            let (s2, m2) = (g.next[s as usize][i], g.next[m as usize][i]);
            if prune(s2) || seen[key(s2, m2)] {
                continue;
            }
            seen[key(s2, m2)] = true;
            queue.push_back((s2, m2));
        }
    }
}

/// Exact inclusion for a deterministic automaton. `after_w2` collects
/// `delta(S_0, w2)` over words `w2: q -> F`; inclusion fails iff some `w1:
/// S_0 -> q` leads one of them out of `F`. The second search depends only on
/// the start state, so it is shared across candidates via `bad`.
fn inclusion_product(
    g: &Graph,
    q: u32,
    coreach: &[bool],
    bad: &mut HashMap<u32, Vec<bool>>,
) -> bool {
    let mut after_w2 = BTreeSet::new();
    pair_search(
        g,
        q,
        0,
        |s, m| {
            if g.accepting[s as usize] {
                after_w2.insert(m);
            }
        },
        |s| !coreach[s as usize],
    );
    for m in after_w2 {
        let rejected_at = bad.entry(m).or_insert_with(|| {
            let mut out = vec![false; g.n()];
            pair_search(
                g,
                0,
                m,
                |s, m2| {
                    if !g.accepting[m2 as usize] {
                        out[s as usize] = true;
                    }
                },
                |_| false,
            );
            out
        });
        if rejected_at[q as usize] {
            return false;
        }
    }
    true
}

/// Computes `D` over the letters the automaton has seen so far.
pub fn decomposition_set(
    nfa: &Nfa,
    cfg: &DecompositionConfig,
) -> Result<DecompositionSet, NfaError> {
    let g = Graph::new(nfa, cfg.initial_letters.as_ref())?;
    let reach = g.reach_from(0);
    let coreach = g.reach_to(&g.accepting);
    let mut out = DecompositionSet {
        tags: BTreeMap::new(),
        initial_letters: cfg.initial_letters.clone(),
    };
    let mut bad = HashMap::new();
    for q in 0..g.n() as u32 {
        if !reach[q as usize] || !coreach[q as usize] {
            continue;
        }
        if cfg.method == InclusionMethod::Product {
            let tag = if inclusion_product(&g, q, &coreach, &mut bad) {
                Certificate::ProvedByInclusion
            } else {
                Certificate::Refuted
            };
            out.tags.insert(NfaState(q), tag);
            continue;
        }
        let mut goal = vec![false; g.n()];
        goal[q as usize] = true;
        let to_q = g.reach_to(&goal);
        let tag = match inclusion(&g, q, &coreach, &to_q, cfg.subset_cap) {
            Inclusion::Holds => Certificate::ProvedByInclusion,
            Inclusion::Fails => Certificate::Refuted,
            Inclusion::Budget => {
                if bounded_counterexample(&g, q, cfg.fallback_len) {
                    Certificate::Refuted
                } else {
                    Certificate::Assumed
                }
            }
        };
        out.tags.insert(NfaState(q), tag);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Not a reachable automaton state.
    Unreachable(NfaState),
    /// Reachable but cannot reach an accepting state.
    Dead(NfaState),
    /// Cutting the mission at `cut` and reordering the segments as `order`
    /// yields a rejected word.
    Permutation {
        cut: Vec<NfaState>,
        segments: Vec<Vec<PropSet>>,
        order: Vec<usize>,
    },
}

const CLASS_CAP: usize = 50_000;
const CHECK_BUDGET: u64 = 20_000_000;

/// Word classes up to `max_len`, one representative per distinct state
/// transformation; words respect the initial-letter restriction.
fn word_classes(g: &Graph, max_len: usize) -> Vec<(Vec<usize>, Vec<u32>)> {
    let id: Vec<u32> = (0..g.n() as u32).collect();
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    seen.insert(id.clone(), 0);
    let mut classes = vec![(Vec::new(), id)];
    let mut frontier = vec![0usize];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for &c in &frontier {
            for i in 0..g.letters.len() {
                if classes[c].0.is_empty() && !g.init_ok[i] {
                    continue;
                }
                if classes.len() >= CLASS_CAP {
                    return classes;
                }
                let f: Vec<u32> = classes[c]
                    .1
                    .iter()
                    .map(|&s| g.next[s as usize][i])
                    .collect();
                if seen.contains_key(&f) {
                    continue;
                }
                let mut w = classes[c].0.clone();
                w.push(i);
                seen.insert(f.clone(), classes.len());
                next.push(classes.len());
                classes.push((w, f));
            }
        }
        frontier = next;
    }
    classes
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut p2 = p.clone();
            p2.insert(pos, n - 1);
            out.push(p2);
        }
    }
    out.sort();
    out
}

/// Brute-force check of `D`: every split of an accepted word at members of
/// `D` into 2 or 3 segments of length at most `max_len` must stay accepted
/// under every reordering of the segments.
pub fn validate_decomposition(nfa: &Nfa, d: &DecompositionSet, max_len: usize) -> Vec<Violation> {
    let g = Graph::new(nfa, d.initial_letters()).expect("closing over known letters");
    let reach = g.reach_from(0);
    let coreach = g.reach_to(&g.accepting);
    let mut out = Vec::new();
    let mut cuts = Vec::new();
    for q in d.members() {
        if q.index() >= g.n() || !reach[q.index()] {
            out.push(Violation::Unreachable(q));
        } else if !coreach[q.index()] {
            out.push(Violation::Dead(q));
        } else {
            cuts.push(q.0);
        }
    }
    let classes = word_classes(&g, max_len);
    let words_between = |from: u32, to: &dyn Fn(u32) -> bool| -> Vec<usize> {
        (0..classes.len())
            .filter(|&c| to(classes[c].1[from as usize]))
            .collect()
    };
    let word = |c: usize| -> Vec<PropSet> {
        classes[c]
            .0
            .iter()
            .map(|&i| nfa.letter_props(g.letters[i]))
            .collect()
    };
    // Runs the automaton over the concatenation of class functions.
    let accepted = |order: &[usize]| -> bool {
        let mut s = 0u32;
        for &c in order {
            s = classes[c].1[s as usize];
        }
        g.accepting[s as usize]
    };
    let mut budget = CHECK_BUDGET;

    for &q in &cuts {
        let w1 = words_between(0, &|s| s == q);
        let w2 = words_between(q, &|s| g.accepting[s as usize]);
        'pairs: for &a in &w1 {
            for &b in &w2 {
                if budget == 0 {
                    break 'pairs;
                }
                budget -= 1;
                if !accepted(&[b, a]) {
                    out.push(Violation::Permutation {
                        cut: vec![NfaState(q)],
                        segments: vec![word(a), word(b)],
                        order: vec![1, 0],
                    });
                    break 'pairs;
                }
            }
        }
    }

    let perms3 = permutations(3);
    'outer: for &q1 in &cuts {
        let w1 = words_between(0, &|s| s == q1);
        for &q2 in &cuts {
            let w2 = words_between(q1, &|s| s == q2);
            let w3 = words_between(q2, &|s| g.accepting[s as usize]);
            for &a in &w1 {
                for &b in &w2 {
                    for &c in &w3 {
                        if budget == 0 {
                            break 'outer;
                        }
                        budget -= 1;
                        let segs = [a, b, c];
                        for p in &perms3 {
                            let order: Vec<usize> = p.iter().map(|&i| segs[i]).collect();
                            if !accepted(&order) {
                                out.push(Violation::Permutation {
                                    cut: vec![NfaState(q1), NfaState(q2)],
                                    segments: segs.iter().map(|&s| word(s)).collect(),
                                    order: p.clone(),
                                });
                                continue 'outer;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
