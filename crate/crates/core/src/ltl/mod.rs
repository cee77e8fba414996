//! Finite-LTL: syntax, semantics and translation to an automaton by
//! formula progression.

mod eval;
mod formula;
mod nfa;
mod parse;
mod progress;
mod random;

pub use eval::{all_words, eval_word, powerset, PropSet};
pub use formula::{canonical, empty_sat, to_nnf, Formula};
pub use nfa::{build_nfa, nfa_accepts, Letter, Nfa, NfaError, NfaState, DEFAULT_STATE_CAP};
pub use parse::{parse, SyntaxError};
pub use progress::{progress, NotInNnf};
pub use random::random_formula;
