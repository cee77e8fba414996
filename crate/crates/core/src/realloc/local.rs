//! Local reallocation inside one agent's product: unexpected state change
//! and environmental change.

use std::collections::BTreeSet;

use super::history::{last_matched, ExecutionHistory};
use super::update::{update_pa, RemovedEdges, UpdateInfo};
use super::ReallocError;
use crate::ltl::NfaState;
use crate::models::{PaState, ProductAutomaton, TsState};
use crate::team::{dijkstra, AgentPlan, PlanStep};

/// Cheapest path in `pa` from `from` to any state whose automaton component
/// is `goal`. The plan's terminus is matched on the automaton state: the
/// next agent starts from its own initial state whatever TS state this
/// agent ends in.
pub fn shortest_in_pa(
    pa: &mut ProductAutomaton,
    agent: usize,
    anchor: Option<NfaState>,
    from: PaState,
    goal: NfaState,
) -> Option<AgentPlan> {
    pa.sync_rows().expect("automaton within budget");
    let pa = &*pa;
    let nt = pa.num_t();
    let nq = pa.num_q();
    let index = |s: PaState| s.q.index() * nt + s.t.index();
    let decode = |i: usize| PaState::new(NfaState((i / nt) as u32), TsState((i % nt) as u32));
    let succ = |u: usize, out: &mut Vec<(usize, crate::models::Cost)>| {
        pa.for_each_successor(decode(u), |s2, e| out.push((index(s2), e.cost)));
    };
    let (path, _) = dijkstra(nq * nt, &[index(from)], succ, |i| decode(i).q == goal)?;
    let states: Vec<PaState> = path.iter().map(|&i| decode(i)).collect();
    let steps = states
        .windows(2)
        .map(|w| {
            let e = pa.edge(w[0], w[1]).expect("search follows product edges");
            PlanStep {
                action: e.action.clone(),
                cost: e.cost,
                duration: e.duration,
            }
        })
        .collect();
    Some(AgentPlan {
        agent,
        anchor,
        states,
        steps,
    })
}

/// `S_c = {(q, s_jump) : q in delta_Q(Path_Q(m), L(Path_T(m)))}` in id order.
pub fn candidate_initials(
    pa: &ProductAutomaton,
    plan: &AgentPlan,
    m: usize,
    s_jump: TsState,
) -> Result<Vec<PaState>, ReallocError> {
    if s_jump.index() >= pa.num_t() {
        return Err(ReallocError::UnknownState(format!("#{}", s_jump.0)));
    }
    let at = plan.states[m];
    let set: BTreeSet<NfaState> = pa.targets(at.q, at.t).into_iter().collect();
    if set.is_empty() {
        return Err(ReallocError::EmptyCandidates);
    }
    Ok(set.into_iter().map(|q| PaState::new(q, s_jump)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalOutcome {
    pub plan: AgentPlan,
    /// The plan reuses a suffix of the previous one verbatim.
    pub reused: bool,
    /// Shortest-path searches run.
    pub searches: usize,
}

/// Replans after a jump. `hist` is the executed path up to the jump, which leaves
/// `Path(m)` for `s_jump`. The result ends at the original terminus.
pub fn local_realloc_state_change(
    pa: &mut ProductAutomaton,
    plan: &AgentPlan,
    hist: &ExecutionHistory,
    s_jump: TsState,
) -> Result<LocalOutcome, ReallocError> {
    let acc = plan.acc().ok_or(ReallocError::NoLocalPlan)?;
    let m = last_matched(plan, hist)?;
    let candidates = candidate_initials(pa, plan, m, s_jump)?;
    let mut best: Option<LocalOutcome> = None;
    let mut searches = 0;
    for s in candidates {
        let found = match plan.states.iter().rposition(|&x| x == s) {
            Some(i) => Some((plan.suffix(i), true)),
            None => {
                searches += 1;
                shortest_in_pa(pa, plan.agent, plan.anchor, s, acc.q).map(|p| (p, false))
            }
        };
        if let Some((p, reused)) = found {
            if best.as_ref().is_none_or(|b| p.cost() < b.plan.cost()) {
                best = Some(LocalOutcome {
                    plan: p,
                    reused,
                    searches: 0,
                });
            }
        }
    }
    let mut out = best.ok_or(ReallocError::NoLocalPlan)?;
    out.searches = searches;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvOutcome {
    pub plan: AgentPlan,
    pub removed: RemovedEdges,
    pub reused: bool,
}

/// Replans around an environmental update. The update is applied to `pa` even when no local plan
/// exists, so that a following global reallocation sees it.
pub fn local_realloc_env_change(
    pa: &mut ProductAutomaton,
    plan: &AgentPlan,
    hist: &ExecutionHistory,
    info: &UpdateInfo,
) -> Result<EnvOutcome, ReallocError> {
    let removed = update_pa(pa, info)?;
    let acc = plan.acc().ok_or(ReallocError::NoLocalPlan)?;
    let m = last_matched(plan, hist)?;
    let hit = plan.states[m..]
        .windows(2)
        .any(|w| removed.contains(&(w[0], w[1])));
    if !hit {
        return Ok(EnvOutcome {
            plan: plan.suffix(m),
            removed,
            reused: true,
        });
    }
    match shortest_in_pa(pa, plan.agent, plan.anchor, plan.states[m], acc.q) {
        Some(p) => Ok(EnvOutcome {
            plan: p,
            removed,
            reused: false,
        }),
        None => Err(ReallocError::NoLocalPlan),
    }
}
