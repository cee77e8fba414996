//! What each agent actually executed.

use serde::{Deserialize, Serialize};

use super::ReallocError;
use crate::ltl::{NfaState, PropSet};
use crate::models::{PaState, ProductAutomaton, TsState};
use crate::team::AgentPlan;

/// `ExePath^(r)` since the current plan was dispatched, plus the agent's
/// whole word since the mission started. The word is credited at
/// synchronization; `anchor` is the automaton state the agent's segment was
/// entered at, so `ExePath_Q(init) = anchor` and `ExePath_Q(final)` is the
/// state after replaying the word from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionHistory {
    pub agent: usize,
    pub path: Vec<(u64, PaState)>,
    pub word: Vec<PropSet>,
    pub anchor: NfaState,
}

impl ExecutionHistory {
    pub fn new(agent: usize, start: PaState, anchor: NfaState, tick: u64) -> Self {
        ExecutionHistory {
            agent,
            path: vec![(tick, start)],
            word: Vec::new(),
            anchor,
        }
    }

    pub fn current(&self) -> PaState {
        self.path.last().expect("history never empty").1
    }

    pub fn current_ts(&self) -> TsState {
        self.current().t
    }

    pub fn states(&self) -> Vec<PaState> {
        self.path.iter().map(|(_, s)| *s).collect()
    }

    /// `ExePath_Q`.
    pub fn exe_q(&self) -> Vec<NfaState> {
        self.path.iter().map(|(_, s)| s.q).collect()
    }

    pub fn init_q(&self) -> NfaState {
        self.anchor
    }

    pub fn final_q(&self) -> NfaState {
        self.current().q
    }

    /// Leaves the current TS state for `to`, consuming the current label
    /// under the product's present revision. Used both for executed
    /// transitions and for state jumps.
    pub fn advance(&mut self, pa: &ProductAutomaton, tick: u64, to: TsState) -> PaState {
        let cur = self.current();
        let label = pa.ts().label(cur.t).clone();
        let q = pa
            .nfa()
            .delta(cur.q, &label)
            .expect("progression cannot fail")[0];
        let next = PaState::new(q, to);
        self.word.push(label);
        self.path.push((tick, next));
        next
    }

    /// Starts a new `ExePath` at the current state for a freshly dispatched
    /// plan.
    pub fn restart(&mut self, tick: u64, anchor: Option<NfaState>) {
        let cur = self.current();
        self.path = vec![(tick, cur)];
        if let Some(a) = anchor {
            self.anchor = a;
        }
    }
}

/// Largest `m` such that `plan[0..=m]` is a prefix of the executed path.
pub fn last_matched(plan: &AgentPlan, hist: &ExecutionHistory) -> Result<usize, ReallocError> {
    let mut m = None;
    for (i, (_, s)) in hist.path.iter().enumerate() {
        match plan.states.get(i) {
            Some(p) if p == s => m = Some(i),
            _ => break,
        }
    }
    m.ok_or(ReallocError::NoMatch)
}
