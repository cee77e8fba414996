//! Agent world models: transition systems, product automata and the
//! decomposition set of the mission automaton.

mod decomposition;
mod product;
mod ts;

use thiserror::Error;

use crate::ltl::NfaError;

pub use decomposition::{
    decomposition_set, validate_decomposition, Certificate, DecompositionConfig, DecompositionSet,
    InclusionMethod, Violation,
};
pub use product::{product, PaEdge, PaState, ProductAutomaton};
pub use ts::{
    capability_allows, compose_ts, state_name, Cost, LocationMap, MapEdge, OpStateMachine,
    OpTransition, TransitionSystem, TsEdge, TsState, TsStateInfo, STAY,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("unknown operating state `{0}`")]
    UnknownOpState(String),
    #[error("unknown transition-system state {0}")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Nfa(#[from] NfaError),
}
