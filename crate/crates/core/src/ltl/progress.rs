//! Formula progression: the residual obligation after one letter.

use thiserror::Error;

use super::eval::PropSet;
use super::formula::{empty_sat, mk_and, mk_or, simplify, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula is not in negation normal form: {0}")]
pub struct NotInNnf(pub String);

/// Progresses an NNF formula through one letter and returns the canonical
/// residual. For every word `w`:
/// `eval_word(f, [a] + w) == eval_word(progress(f, a), w)`.
pub fn progress(f: &Formula, letter: &PropSet) -> Result<Formula, NotInNnf> {
    Ok(simplify(&progress_with(f, &|p| letter.contains(p))?))
}

/// Progression against an arbitrary membership predicate.
pub(crate) fn progress_with(
    f: &Formula,
    holds: &dyn Fn(&str) -> bool,
) -> Result<Formula, NotInNnf> {
    use Formula::*;
    Ok(match f {
        True => True,
        False => False,
        Prop(p) => bool_formula(holds(p)),
        Not(g) => match &**g {
            Prop(p) => bool_formula(!holds(p)),
            _ => return Err(NotInNnf(f.to_string())),
        },
        And(fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for g in fs {
                let r = progress_with(g, holds)?;
                if r == False {
                    return Ok(False);
                }
                out.push(r);
            }
            mk_and(out)
        }
        Or(fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for g in fs {
                let r = progress_with(g, holds)?;
                if r == True {
                    return Ok(True);
                }
                out.push(r);
            }
            mk_or(out)
        }
        // The residual of a strong next must reject the empty continuation;
        // the residual of a weak next must accept it.
        Next(g) => {
            if empty_sat(g) {
                mk_and(vec![(**g).clone(), nonempty()])
            } else {
                (**g).clone()
            }
        }
        WeakNext(g) => {
            if empty_sat(g) {
                (**g).clone()
            } else {
                mk_or(vec![(**g).clone(), end_of_trace()])
            }
        }
        Until(a, b) => {
            let pb = progress_with(b, holds)?;
            if pb == True {
                return Ok(True);
            }
            let pa = progress_with(a, holds)?;
            mk_or(vec![pb, mk_and(vec![pa, f.clone()])])
        }
        Release(a, b) => {
            let pb = progress_with(b, holds)?;
            if pb == False {
                return Ok(False);
            }
            let pa = progress_with(a, holds)?;
            mk_and(vec![pb, mk_or(vec![pa, f.clone()])])
        }
        Eventually(g) => {
            let pg = progress_with(g, holds)?;
            mk_or(vec![pg, f.clone()])
        }
        Always(g) => {
            let pg = progress_with(g, holds)?;
            mk_and(vec![pg, f.clone()])
        }
        Implies(..) | Iff(..) => return Err(NotInNnf(f.to_string())),
    })
}

fn bool_formula(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

/// `<> true`: holds on exactly the non-empty words.
fn nonempty() -> Formula {
    Formula::eventually(Formula::True)
}

/// `[] false`: holds on exactly the empty word.
fn end_of_trace() -> Formula {
    Formula::always(Formula::False)
}
