//! Online reallocation: local repair after an unexpected state change or an
//! environmental change, and global reallocation over the synchronized team
//! automaton.

mod global;
mod history;
mod local;
mod planner;
mod update;

use thiserror::Error;

use crate::models::ModelError;
use crate::team::TeamError;

pub use global::{
    global_realloc, mark_agent_failed, refresh_decomposition, start_letters, synchronize,
    SyncReport,
};
pub use history::{last_matched, ExecutionHistory};
pub use local::{
    candidate_initials, local_realloc_env_change, local_realloc_state_change, shortest_in_pa,
    EnvOutcome, LocalOutcome,
};
pub use planner::{
    GlobalReallocRequest, LocalReallocRequest, LocalRequest, PlanDispatch, Planner, PlannerStats,
};
pub use update::{random_update, update_pa, RemovedEdges, UpdateInfo};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReallocError {
    #[error("executed path does not start at the plan's start state")]
    NoMatch,
    #[error("no automaton successor for the jump")]
    EmptyCandidates,
    #[error("no local plan reaches the original terminus")]
    NoLocalPlan,
    #[error("MissionInfeasible")]
    MissionInfeasible,
    #[error("unknown TS state {0}")]
    UnknownState(String),
    #[error("invalid update: {0}")]
    InvalidUpdate(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Team(TeamError),
}

impl From<TeamError> for ReallocError {
    fn from(e: TeamError) -> Self {
        match e {
            TeamError::MissionInfeasible => ReallocError::MissionInfeasible,
            other => ReallocError::Team(other),
        }
    }
}

impl ReallocError {
    /// Errors after which the caller escalates to global reallocation.
    pub fn escalates(&self) -> bool {
        matches!(
            self,
            ReallocError::EmptyCandidates | ReallocError::NoLocalPlan | ReallocError::NoMatch
        )
    }
}
