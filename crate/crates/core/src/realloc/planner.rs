//! The single planner authority: owns the team automaton, the dispatched
//! plans and the execution histories, and serializes every reallocation.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::global::{
    global_realloc, mark_agent_failed, refresh_decomposition, synchronize, SyncReport,
};
use super::history::ExecutionHistory;
use super::local::{
    local_realloc_env_change, local_realloc_state_change, EnvOutcome, LocalOutcome,
};
use super::update::{update_pa, RemovedEdges, UpdateInfo};
use super::ReallocError;
use crate::ltl::Nfa;
use crate::models::{product, PaState, TransitionSystem, TsState};
use crate::team::{build_team, project, AgentPlan, GlobalPath, TeamAutomaton};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum LocalRequest {
    StateChange { to: TsState },
    EnvChange { info: UpdateInfo },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalReallocRequest {
    pub agent: usize,
    #[serde(flatten)]
    pub request: LocalRequest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalReallocRequest {
    pub agent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDispatch {
    pub agent: usize,
    pub plan: AgentPlan,
    pub revision: u64,
}

/// Wall-clock bookkeeping; kept out of traces so that traces stay
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub offline_secs: f64,
    pub local_secs: Vec<f64>,
    pub global_secs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Planner {
    team: TeamAutomaton,
    plans: Vec<AgentPlan>,
    hists: Vec<ExecutionHistory>,
    failed: Vec<bool>,
    offline: GlobalPath,
    pub stats: PlannerStats,
}

impl Planner {
    /// Offline allocation: products, decomposition set, team search and
    /// projection.
    pub fn offline(nfa: Arc<Nfa>, tss: Vec<TransitionSystem>) -> Result<Planner, ReallocError> {
        let started = Instant::now();
        let pas = tss
            .into_iter()
            .enumerate()
            .map(|(r, ts)| product(nfa.clone(), ts, r))
            .collect::<Result<Vec<_>, _>>()?;
        let mut team = build_team(pas, Default::default())?;
        refresh_decomposition(&mut team, None)?;
        let beta = team.plan()?;
        let plans = project(&beta, team.num_agents());
        let q0 = nfa.initial_state();
        let hists = plans
            .iter()
            .enumerate()
            .map(|(r, p)| {
                let start = p
                    .start()
                    .unwrap_or(PaState::new(q0, team.pa(r).ts().initial()));
                ExecutionHistory::new(r, start, p.anchor.unwrap_or(q0), 0)
            })
            .collect();
        let n = team.num_agents();
        let stats = PlannerStats {
            offline_secs: started.elapsed().as_secs_f64(),
            ..Default::default()
        };
        Ok(Planner {
            team,
            plans,
            hists,
            failed: vec![false; n],
            offline: beta,
            stats,
        })
    }

    pub fn team(&self) -> &TeamAutomaton {
        &self.team
    }

    pub fn num_agents(&self) -> usize {
        self.plans.len()
    }

    pub fn offline_path(&self) -> &GlobalPath {
        &self.offline
    }

    pub fn plan(&self, r: usize) -> &AgentPlan {
        &self.plans[r]
    }

    pub fn plans(&self) -> &[AgentPlan] {
        &self.plans
    }

    pub fn history(&self, r: usize) -> &ExecutionHistory {
        &self.hists[r]
    }

    pub fn histories(&self) -> &[ExecutionHistory] {
        &self.hists
    }

    pub fn is_failed(&self, r: usize) -> bool {
        self.failed[r]
    }

    pub fn dispatch(&self, r: usize) -> PlanDispatch {
        PlanDispatch {
            agent: r,
            plan: self.plans[r].clone(),
            revision: self.team.pa(r).revision(),
        }
    }

    /// Records an executed transition of agent `r` into `to`.
    pub fn advance(&mut self, r: usize, tick: u64, to: TsState) -> PaState {
        self.hists[r].advance(self.team.pa(r), tick, to)
    }

    /// Local replanning for a jump of agent `r` to `s_jump`. The jump is
    /// recorded whether or not a local plan exists.
    pub fn local_state_change(
        &mut self,
        r: usize,
        tick: u64,
        s_jump: TsState,
    ) -> Result<LocalOutcome, ReallocError> {
        let started = Instant::now();
        let result = if self.plans[r].states.is_empty() {
            Err(ReallocError::NoLocalPlan)
        } else {
            local_realloc_state_change(self.team.pa_mut(r), &self.plans[r], &self.hists[r], s_jump)
        };
        self.hists[r].advance(self.team.pa(r), tick, s_jump);
        if let Ok(out) = &result {
            debug_assert_eq!(out.plan.start(), Some(self.hists[r].current()));
            self.plans[r] = out.plan.clone();
            self.hists[r].restart(tick, None);
        }
        self.stats.local_secs.push(started.elapsed().as_secs_f64());
        result
    }

    /// Local replanning around an update to agent `r`'s world.
    pub fn local_env_change(
        &mut self,
        r: usize,
        tick: u64,
        info: &UpdateInfo,
    ) -> Result<EnvOutcome, ReallocError> {
        let started = Instant::now();
        let result = if self.plans[r].states.is_empty() {
            update_pa(self.team.pa_mut(r), info).map(|removed| EnvOutcome {
                plan: self.plans[r].clone(),
                removed,
                reused: true,
            })
        } else {
            local_realloc_env_change(self.team.pa_mut(r), &self.plans[r], &self.hists[r], info)
        };
        if let Ok(out) = &result {
            self.plans[r] = out.plan.clone();
            self.hists[r].restart(tick, None);
        }
        self.stats.local_secs.push(started.elapsed().as_secs_f64());
        result
    }

    /// Applies an update to agent `r`'s product without replanning.
    pub fn apply_update(
        &mut self,
        r: usize,
        info: &UpdateInfo,
    ) -> Result<RemovedEdges, ReallocError> {
        update_pa(self.team.pa_mut(r), info)
    }

    /// R2: agent `r` can no longer move.
    pub fn fail_agent(&mut self, r: usize) -> Result<(), ReallocError> {
        mark_agent_failed(&mut self.team, r)?;
        self.failed[r] = true;
        Ok(())
    }

    /// Global reallocation. Callers must have halted every agent at a TS
    /// state first. On success all plans are replaced.
    pub fn global(&mut self, tick: u64) -> Result<(GlobalPath, SyncReport), ReallocError> {
        let started = Instant::now();
        let result = synchronize(&mut self.team, &self.hists).and_then(|report| {
            let (beta, plans) = global_realloc(&mut self.team)?;
            Ok((beta, report, plans))
        });
        self.stats.global_secs.push(started.elapsed().as_secs_f64());
        let (beta, report, plans) = result?;
        for (r, p) in plans.iter().enumerate() {
            if let Some(start) = p.start() {
                let h = &mut self.hists[r];
                debug_assert_eq!(start.t, h.current_ts());
                h.path = vec![(tick, start)];
                h.anchor = p.anchor.expect("reached agents have an anchor");
            } else {
                self.hists[r].restart(tick, None);
            }
        }
        self.plans = plans;
        Ok((beta, report))
    }
}
