//! Finite-LTL abstract syntax, negation normal form and canonicalization.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Finite-trace LTL formula.
///
/// `And`/`Or` are n-ary so that canonical forms can be flattened and sorted.
/// `WeakNext` never comes out of the parser; it is the negation-normal-form
/// dual of the strong `Next` (`!X f` becomes `WeakNext(!f)`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Prop(String),
    Not(Arc<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Arc<Formula>, Arc<Formula>),
    Iff(Arc<Formula>, Arc<Formula>),
    Next(Arc<Formula>),
    WeakNext(Arc<Formula>),
    Until(Arc<Formula>, Arc<Formula>),
    Release(Arc<Formula>, Arc<Formula>),
    Eventually(Arc<Formula>),
    Always(Arc<Formula>),
}

use Formula::*;

impl Formula {
    pub fn prop(name: impl Into<String>) -> Self {
        Prop(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Not(Arc::new(f))
    }

    pub fn and(fs: impl IntoIterator<Item = Formula>) -> Self {
        And(fs.into_iter().collect())
    }

    pub fn or(fs: impl IntoIterator<Item = Formula>) -> Self {
        Or(fs.into_iter().collect())
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Implies(Arc::new(a), Arc::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Iff(Arc::new(a), Arc::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Next(Arc::new(f))
    }

    pub fn weak_next(f: Formula) -> Self {
        WeakNext(Arc::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Until(Arc::new(a), Arc::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Release(Arc::new(a), Arc::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Eventually(Arc::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Always(Arc::new(f))
    }

    /// Atomic propositions mentioned anywhere in the formula.
    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            True | False => {}
            Prop(p) => {
                out.insert(p.clone());
            }
            Not(f) | Next(f) | WeakNext(f) | Eventually(f) | Always(f) => f.collect_props(out),
            And(fs) | Or(fs) => fs.iter().for_each(|f| f.collect_props(out)),
            Implies(a, b) | Iff(a, b) | Until(a, b) | Release(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }

    /// Literal check: an atom or a negated atom.
    pub fn is_literal(&self) -> bool {
        matches!(self, Prop(_)) || matches!(self, Not(f) if matches!(**f, Prop(_)))
    }

    /// True when negations only wrap atoms and no `->`/`<->` remain.
    pub fn is_nnf(&self) -> bool {
        match self {
            True | False | Prop(_) => true,
            Not(f) => matches!(**f, Prop(_)),
            And(fs) | Or(fs) => fs.iter().all(Formula::is_nnf),
            Implies(..) | Iff(..) => false,
            Next(f) | WeakNext(f) | Eventually(f) | Always(f) => f.is_nnf(),
            Until(a, b) | Release(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }

    /// Operator nesting depth; atoms and constants have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            True | False | Prop(_) => 0,
            Not(f) | Next(f) | WeakNext(f) | Eventually(f) | Always(f) => 1 + f.depth(),
            And(fs) | Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            Implies(a, b) | Iff(a, b) | Until(a, b) | Release(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Negation normal form. Semantics-preserving under finite-trace semantics
/// with strong `X` (whose dual is `WeakNext`).
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, neg: bool) -> Formula {
    match (f, neg) {
        (True, false) | (False, true) => True,
        (True, true) | (False, false) => False,
        (Prop(p), false) => Prop(p.clone()),
        (Prop(p), true) => Formula::not(Prop(p.clone())),
        (Not(g), _) => nnf(g, !neg),
        (And(fs), false) => And(fs.iter().map(|g| nnf(g, false)).collect()),
        (And(fs), true) => Or(fs.iter().map(|g| nnf(g, true)).collect()),
        (Or(fs), false) => Or(fs.iter().map(|g| nnf(g, false)).collect()),
        (Or(fs), true) => And(fs.iter().map(|g| nnf(g, true)).collect()),
        (Implies(a, b), false) => Or(vec![nnf(a, true), nnf(b, false)]),
        (Implies(a, b), true) => And(vec![nnf(a, false), nnf(b, true)]),
        (Iff(a, b), false) => Or(vec![
            And(vec![nnf(a, false), nnf(b, false)]),
            And(vec![nnf(a, true), nnf(b, true)]),
        ]),
        (Iff(a, b), true) => Or(vec![
            And(vec![nnf(a, false), nnf(b, true)]),
            And(vec![nnf(a, true), nnf(b, false)]),
        ]),
        (Next(g), false) => Formula::next(nnf(g, false)),
        (Next(g), true) => Formula::weak_next(nnf(g, true)),
        (WeakNext(g), false) => Formula::weak_next(nnf(g, false)),
        (WeakNext(g), true) => Formula::next(nnf(g, true)),
        (Until(a, b), false) => Formula::until(nnf(a, false), nnf(b, false)),
        (Until(a, b), true) => Formula::release(nnf(a, true), nnf(b, true)),
        (Release(a, b), false) => Formula::release(nnf(a, false), nnf(b, false)),
        (Release(a, b), true) => Formula::until(nnf(a, true), nnf(b, true)),
        (Eventually(g), false) => Formula::eventually(nnf(g, false)),
        (Eventually(g), true) => Formula::always(nnf(g, true)),
        (Always(g), false) => Formula::always(nnf(g, false)),
        (Always(g), true) => Formula::eventually(nnf(g, true)),
    }
}

/// Canonical form: NNF, then bottom-up simplification with flattened,
/// sorted, deduplicated `And`/`Or` and the boolean identities. Idempotent.
pub fn canonical(f: &Formula) -> Formula {
    simplify(&to_nnf(f))
}

/// Simplification of a formula that is already in NNF.
pub(crate) fn simplify(f: &Formula) -> Formula {
    match f {
        True | False | Prop(_) => f.clone(),
        Not(g) => Formula::not(simplify(g)),
        And(fs) => mk_and(fs.iter().map(simplify).collect()),
        Or(fs) => mk_or(fs.iter().map(simplify).collect()),
        Next(g) => Formula::next(simplify(g)),
        WeakNext(g) => Formula::weak_next(simplify(g)),
        Eventually(g) => match simplify(g) {
            False => False,
            g => Formula::eventually(g),
        },
        Always(g) => match simplify(g) {
            True => True,
            g => Formula::always(g),
        },
        Until(a, b) => match (simplify(a), simplify(b)) {
            (_, False) => False,
            (True, b) => Formula::eventually(b),
            (a, b) => Formula::until(a, b),
        },
        Release(a, b) => match (simplify(a), simplify(b)) {
            (_, True) => True,
            (False, b) => Formula::always(b),
            (a, b) => Formula::release(a, b),
        },
        Implies(..) | Iff(..) => simplify(&to_nnf(f)),
    }
}

// Boolean structure is kept in disjunctive normal form over temporal and
// literal atoms, with absorption. Progression residuals then live in the
// finite set of clause sets over the closure, so translation terminates.

/// Clauses of an already-canonical formula.
fn clauses(f: Formula) -> Vec<Vec<Formula>> {
    match f {
        False => vec![],
        True => vec![vec![]],
        Or(cs) => cs
            .into_iter()
            .map(|c| match c {
                And(atoms) => atoms,
                atom => vec![atom],
            })
            .collect(),
        And(atoms) => vec![atoms],
        atom => vec![vec![atom]],
    }
}

fn from_clauses(mut cs: Vec<Vec<Formula>>) -> Formula {
    for c in &mut cs {
        c.sort();
        c.dedup();
    }
    // a && !a: the only complement rule that is sound on the empty trace too
    cs.retain(|c| {
        !c.iter()
            .any(|a| matches!(a, Not(p) if c.binary_search(p).is_ok()))
    });
    cs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cs.dedup();
    let mut kept: Vec<Vec<Formula>> = Vec::with_capacity(cs.len());
    for c in cs {
        if !kept
            .iter()
            .any(|k| k.iter().all(|a| c.binary_search(a).is_ok()))
        {
            kept.push(c);
        }
    }
    let mut disjuncts: Vec<Formula> = kept
        .into_iter()
        .map(|mut c| match c.len() {
            0 => True,
            1 => c.pop().unwrap(),
            _ => And(c),
        })
        .collect();
    if disjuncts.first() == Some(&True) {
        return True;
    }
    disjuncts.sort();
    match disjuncts.len() {
        0 => False,
        1 => disjuncts.pop().unwrap(),
        _ => Or(disjuncts),
    }
}

/// Conjunction of already-canonical children.
pub(crate) fn mk_and(children: Vec<Formula>) -> Formula {
    // single-clause children are moved into a shared base; only the rest
    // are multiplied out
    let mut base = Vec::new();
    let mut multi = Vec::new();
    for c in children {
        let mut cs = clauses(c);
        match cs.len() {
            0 => return False,
            1 => base.append(&mut cs[0]),
            _ => multi.push(cs),
        }
    }
    let mut acc = vec![base];
    for cs in multi {
        acc = acc
            .iter()
            .flat_map(|a| cs.iter().map(move |b| a.iter().chain(b).cloned().collect()))
            .collect();
    }
    from_clauses(acc)
}

/// Disjunction of already-canonical children.
pub(crate) fn mk_or(children: Vec<Formula>) -> Formula {
    from_clauses(children.into_iter().flat_map(clauses).collect())
}

/// Acceptance of the empty trace. Defined on NNF formulas.
pub fn empty_sat(f: &Formula) -> bool {
    match f {
        True => true,
        False | Prop(_) | Not(_) => false,
        And(fs) => fs.iter().all(empty_sat),
        Or(fs) => fs.iter().any(empty_sat),
        Next(_) | Until(..) | Eventually(_) => false,
        WeakNext(_) | Release(..) | Always(_) => true,
        Implies(..) | Iff(..) => empty_sat(&to_nnf(f)),
    }
}

// Printing is fully parenthesized for binary operators so that
// `parse(print(f)) == f` holds structurally.
impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(out: &mut fmt::Formatter<'_>, fs: &[Formula], op: &str) -> fmt::Result {
            write!(out, "(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(out, " {op} ")?;
                }
                write!(out, "{g}")?;
            }
            write!(out, ")")
        }
        match self {
            True => write!(out, "true"),
            False => write!(out, "false"),
            Prop(p) => write!(out, "{p}"),
            Not(g) => write!(out, "!{g}"),
            And(fs) if fs.is_empty() => write!(out, "true"),
            Or(fs) if fs.is_empty() => write!(out, "false"),
            And(fs) if fs.len() == 1 => write!(out, "({} && true)", fs[0]),
            Or(fs) if fs.len() == 1 => write!(out, "({} || false)", fs[0]),
            And(fs) => join(out, fs, "&&"),
            Or(fs) => join(out, fs, "||"),
            Implies(a, b) => write!(out, "({a} -> {b})"),
            Iff(a, b) => write!(out, "({a} <-> {b})"),
            Next(g) => write!(out, "X {g}"),
            WeakNext(g) => write!(out, "!X !{g}"),
            Until(a, b) => write!(out, "({a} U {b})"),
            Release(a, b) => write!(out, "({a} R {b})"),
            Eventually(g) => write!(out, "<> {g}"),
            Always(g) => write!(out, "[] {g}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        Formula::prop(s)
    }

    #[test]
    fn nnf_dualities() {
        let f = Formula::not(Formula::eventually(p("a")));
        assert_eq!(to_nnf(&f), Formula::always(Formula::not(p("a"))));

        let f = Formula::not(Formula::until(p("a"), p("b")));
        assert_eq!(
            to_nnf(&f),
            Formula::release(Formula::not(p("a")), Formula::not(p("b")))
        );

        let f = Formula::not(Formula::not(p("a")));
        assert_eq!(to_nnf(&f), p("a"));

        let f = Formula::not(Formula::next(p("a")));
        assert_eq!(to_nnf(&f), Formula::weak_next(Formula::not(p("a"))));
    }

    #[test]
    fn canonical_flattens_and_sorts() {
        let f = Formula::and([p("b"), Formula::and([p("a"), True, p("b")])]);
        assert_eq!(canonical(&f), Formula::and([p("a"), p("b")]));
        assert_eq!(canonical(&Formula::or([p("a"), True])), True);
        assert_eq!(canonical(&Formula::and([p("a"), False])), False);
        assert_eq!(canonical(&Formula::or([p("a"), False])), p("a"));
        assert_eq!(
            canonical(&Formula::and([p("a"), Formula::not(p("a"))])),
            False
        );
    }

    #[test]
    fn disjunctive_complement_is_kept() {
        // a || !a is false on the empty trace, so it must not become True.
        let f = canonical(&Formula::or([p("a"), Formula::not(p("a"))]));
        assert!(!empty_sat(&f));
    }

    #[test]
    fn empty_sat_table() {
        assert!(empty_sat(&True));
        assert!(!empty_sat(&Formula::eventually(p("a"))));
        assert!(empty_sat(&Formula::always(Formula::not(p("a")))));
        assert!(!empty_sat(&Formula::next(True)));
        assert!(empty_sat(&Formula::weak_next(False)));
        assert!(!empty_sat(&Formula::until(p("a"), p("b"))));
        assert!(empty_sat(&Formula::release(p("a"), p("b"))));
    }

    #[test]
    fn nnf_detection() {
        assert!(to_nnf(&Formula::implies(p("a"), p("b"))).is_nnf());
        assert!(!Formula::not(Formula::next(p("a"))).is_nnf());
    }
}
