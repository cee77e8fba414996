//! Global reallocation over the synchronized team automaton.

use std::collections::BTreeSet;

use serde::Serialize;

use super::history::ExecutionHistory;
use super::update::{update_pa, RemovedEdges, UpdateInfo};
use super::ReallocError;
use crate::ltl::{Letter, Nfa};
use crate::models::{decomposition_set, DecompositionConfig};
use crate::team::{project, AgentPlan, AgentSync, GlobalPath, TeamAutomaton, TeamState};

/// Letters agent words can start with: the first consumed label of agents
/// that have moved, the current label of the others.
pub fn start_letters(team: &TeamAutomaton, hists: Option<&[ExecutionHistory]>) -> BTreeSet<Letter> {
    let nfa: &Nfa = team.nfa();
    let mut out = BTreeSet::new();
    for r in 0..team.num_agents() {
        let pa = team.pa(r);
        let first = hists.and_then(|h| h[r].word.first());
        let label = first.unwrap_or_else(|| pa.ts().label(pa.ts().initial()));
        out.insert(nfa.letter(label));
    }
    out
}

/// Recomputes `D` for the team's current start letters.
pub fn refresh_decomposition(
    team: &mut TeamAutomaton,
    hists: Option<&[ExecutionHistory]>,
) -> Result<(), ReallocError> {
    let cfg = DecompositionConfig {
        initial_letters: Some(start_letters(team, hists)),
        ..Default::default()
    };
    let d = decomposition_set(team.nfa(), &cfg).map_err(crate::models::ModelError::from)?;
    team.set_decomposition(d);
    Ok(())
}

/// Deletes every transition of agent `r`, including its stay loops: a
/// failed robot cannot consume labels, so the planner must not route any
/// through it.
pub fn mark_agent_failed(team: &mut TeamAutomaton, r: usize) -> Result<RemovedEdges, ReallocError> {
    let pa = team.pa_mut(r);
    let delete = pa.ts().edges().map(|(a, b, _)| (a, b)).collect();
    let info = UpdateInfo {
        delete,
        t: pa.revision() + 1,
        ..Default::default()
    };
    update_pa(pa, &info)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    /// `xi(t)` from each agent's anchor.
    pub xi: Vec<(TeamState, TeamState)>,
    pub decomposition_size: usize,
}

/// Stop-the-world synchronization: every agent's product restarts at its
/// current TS state, executed words are credited, and `D` and `zeta(t)`
/// are rebuilt against the new initial states.
pub fn synchronize(
    team: &mut TeamAutomaton,
    hists: &[ExecutionHistory],
) -> Result<SyncReport, ReallocError> {
    for h in hists {
        team.pa_mut(h.agent).set_initial(h.current_ts());
        let sync = AgentSync {
            anchor: h.anchor,
            word: h.word.clone(),
        };
        team.set_history(h.agent, Some(sync));
    }
    refresh_decomposition(team, Some(hists))?;
    Ok(SyncReport {
        xi: team.sync_edges(),
        decomposition_size: team.decomposition().len(),
    })
}

/// The offline search run on the synchronized team.
pub fn global_realloc(
    team: &mut TeamAutomaton,
) -> Result<(GlobalPath, Vec<AgentPlan>), ReallocError> {
    let beta = team.plan()?;
    let plans = project(&beta, team.num_agents());
    Ok((beta, plans))
}
