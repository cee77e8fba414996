//! Direct finite-trace semantics. This is the ground-truth oracle that the
//! progression automaton is checked against; it deliberately shares no code
//! with progression.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::formula::{empty_sat, to_nnf, Formula};

/// A letter of the alphabet: the set of propositions true at one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropSet(pub BTreeSet<String>);

impl PropSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, p: &str) -> bool {
        self.0.contains(p)
    }

    pub fn insert(&mut self, p: impl Into<String>) {
        self.0.insert(p.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for PropSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        PropSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for PropSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// `w |= f` under finite-trace semantics with strong next. The empty word is
/// accepted iff `empty_sat(nnf(f))`.
pub fn eval_word(f: &Formula, w: &[PropSet]) -> bool {
    if w.is_empty() {
        return empty_sat(&to_nnf(f));
    }
    eval_at(f, w, 0)
}

fn eval_at(f: &Formula, w: &[PropSet], i: usize) -> bool {
    use Formula::*;
    let n = w.len();
    debug_assert!(i < n);
    match f {
        True => true,
        False => false,
        Prop(p) => w[i].contains(p),
        Not(g) => !eval_at(g, w, i),
        And(fs) => fs.iter().all(|g| eval_at(g, w, i)),
        Or(fs) => fs.iter().any(|g| eval_at(g, w, i)),
        Implies(a, b) => !eval_at(a, w, i) || eval_at(b, w, i),
        Iff(a, b) => eval_at(a, w, i) == eval_at(b, w, i),
        Next(g) => i + 1 < n && eval_at(g, w, i + 1),
        WeakNext(g) => i + 1 >= n || eval_at(g, w, i + 1),
        Until(a, b) => {
            for j in i..n {
                if eval_at(b, w, j) {
                    return true;
                }
                if !eval_at(a, w, j) {
                    return false;
                }
            }
            false
        }
        Release(a, b) => {
            for j in i..n {
                if !eval_at(b, w, j) {
                    return false;
                }
                if eval_at(a, w, j) {
                    return true;
                }
            }
            true
        }
        Eventually(g) => (i..n).any(|j| eval_at(g, w, j)),
        Always(g) => (i..n).all(|j| eval_at(g, w, j)),
    }
}

/// Every word of length `0..=max_len` over the given letters, shortest first.
pub fn all_words(letters: &[PropSet], max_len: usize) -> Vec<Vec<PropSet>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * letters.len());
        for w in &frontier {
            for a in letters {
                let mut w2: Vec<PropSet> = w.clone();
                w2.push(a.clone());
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// The full alphabet `2^props`.
pub fn powerset(props: &[&str]) -> Vec<PropSet> {
    (0..1usize << props.len())
        .map(|mask| {
            props
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| p.to_string())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    fn ps(items: &[&str]) -> PropSet {
        items.iter().copied().collect()
    }

    #[test]
    fn spec_examples() {
        let ev_a = parse("<> a").unwrap();
        assert!(eval_word(&ev_a, &[ps(&[]), ps(&["a"])]));
        let g_a = parse("[] a").unwrap();
        assert!(!eval_word(&g_a, &[ps(&["a"]), ps(&[])]));
        let both = parse("<> a && <> b").unwrap();
        assert!(eval_word(&both, &[ps(&["a"]), ps(&["b"])]));
    }

    #[test]
    fn strong_next_fails_at_last_position() {
        let f = parse("X a").unwrap();
        assert!(!eval_word(&f, &[ps(&["a"])]));
        assert!(eval_word(&f, &[ps(&[]), ps(&["a"])]));
        let g = parse("!X !a").unwrap();
        assert!(eval_word(&g, &[ps(&[])]));
    }

    #[test]
    fn empty_word() {
        assert!(eval_word(&parse("[] a").unwrap(), &[]));
        assert!(!eval_word(&parse("<> a").unwrap(), &[]));
        assert!(!eval_word(&parse("!a").unwrap(), &[]));
    }

    #[test]
    fn word_enumeration_counts() {
        let letters = powerset(&["a", "b"]);
        assert_eq!(letters.len(), 4);
        assert_eq!(all_words(&letters, 2).len(), 1 + 4 + 16);
    }
}
