//! The team automaton: agent products chained by switch transitions, the
//! offline allocation search over it, and projection of the resulting global
//! path into per-agent plans.

mod search;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{Nfa, NfaState, PropSet};
use crate::models::{Cost, DecompositionSet, PaState, ProductAutomaton, TsState};

pub(crate) use search::dijkstra;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeamError {
    #[error("agent products reference different mission automata")]
    MismatchedSpecification,
    #[error("MissionInfeasible: no accepting team state is reachable")]
    MissionInfeasible,
    #[error("a team needs at least one agent")]
    NoAgents,
}

/// `(r, q, t)`; ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TeamState {
    pub r: usize,
    pub s: PaState,
}

impl TeamState {
    pub fn new(r: usize, q: NfaState, t: TsState) -> Self {
        TeamState {
            r,
            s: PaState::new(q, t),
        }
    }
}

impl fmt::Display for TeamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r{},{},t{})", self.r, self.s.q, self.s.t.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Intra,
    Switch,
    Sync,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamEdge {
    pub kind: EdgeKind,
    pub action: Option<String>,
    pub cost: Cost,
    pub duration: u32,
}

impl TeamEdge {
    fn free(kind: EdgeKind) -> Self {
        TeamEdge {
            kind,
            action: None,
            cost: Cost::ZERO,
            duration: 0,
        }
    }
}

/// `beta`: `states[i] -edges[i]-> states[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalPath {
    pub states: Vec<TeamState>,
    pub edges: Vec<TeamEdge>,
    pub cost: Cost,
}

impl GlobalPath {
    /// Per-agent words: the source labels of intra-agent edges.
    pub fn words(&self, team: &TeamAutomaton) -> Vec<Vec<PropSet>> {
        let mut out = vec![Vec::new(); team.num_agents()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.kind == EdgeKind::Intra {
                let s = self.states[i];
                out[s.r].push(team.pa(s.r).ts().label(s.s.t).clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    pub cost: Cost,
    pub duration: u32,
}

/// `Path^(r)`: product states with the TS action taken between each pair.
/// The last state is the terminus `Path^(r)(acc)`, where the agent hands
/// over to the next one or the mission is accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPlan {
    pub agent: usize,
    /// Automaton state at which the agent's segment was entered, before its
    /// executed history was replayed.
    pub anchor: Option<NfaState>,
    pub states: Vec<PaState>,
    pub steps: Vec<PlanStep>,
}

impl AgentPlan {
    pub fn empty(agent: usize) -> Self {
        AgentPlan {
            agent,
            anchor: None,
            states: Vec::new(),
            steps: Vec::new(),
        }
    }

    /// No actions to execute.
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn acc(&self) -> Option<PaState> {
        self.states.last().copied()
    }

    pub fn start(&self) -> Option<PaState> {
        self.states.first().copied()
    }

    pub fn cost(&self) -> Cost {
        self.steps.iter().map(|s| s.cost).sum()
    }

    /// `Path(i:)`.
    pub fn suffix(&self, i: usize) -> AgentPlan {
        AgentPlan {
            agent: self.agent,
            anchor: self.anchor,
            states: self.states[i..].to_vec(),
            steps: self.steps[i..].to_vec(),
        }
    }

    pub fn position(&self, s: PaState) -> Option<usize> {
        self.states.iter().position(|&x| x == s)
    }
}

/// Executed history credited to an agent at synchronization: its whole word
/// so far and the automaton state its segment was entered at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSync {
    pub anchor: NfaState,
    pub word: Vec<PropSet>,
}

#[derive(Debug, Clone)]
pub struct TeamAutomaton {
    nfa: Arc<Nfa>,
    pas: Vec<ProductAutomaton>,
    d: DecompositionSet,
    sync: Vec<Option<AgentSync>>,
}

/// `G`: the union of the agent products with switch transitions `zeta`.
pub fn build_team(
    pas: Vec<ProductAutomaton>,
    d: DecompositionSet,
) -> Result<TeamAutomaton, TeamError> {
    let first = pas.first().ok_or(TeamError::NoAgents)?;
    let nfa = first.nfa().clone();
    if pas.iter().any(|p| !Arc::ptr_eq(p.nfa(), &nfa)) {
        return Err(TeamError::MismatchedSpecification);
    }
    let n = pas.len();
    Ok(TeamAutomaton {
        nfa,
        pas,
        d,
        sync: vec![None; n],
    })
}

impl TeamAutomaton {
    pub fn nfa(&self) -> &Arc<Nfa> {
        &self.nfa
    }

    pub fn num_agents(&self) -> usize {
        self.pas.len()
    }

    pub fn pa(&self, r: usize) -> &ProductAutomaton {
        &self.pas[r]
    }

    pub fn pa_mut(&mut self, r: usize) -> &mut ProductAutomaton {
        &mut self.pas[r]
    }

    pub fn pas(&self) -> &[ProductAutomaton] {
        &self.pas
    }

    pub fn decomposition(&self) -> &DecompositionSet {
        &self.d
    }

    pub fn set_decomposition(&mut self, d: DecompositionSet) {
        self.d = d;
    }

    /// `|S_G| = sum_r |S_P^(r)|`.
    pub fn state_count(&self) -> usize {
        self.pas.iter().map(|p| p.num_states()).sum()
    }

    pub fn initial_states(&self) -> Vec<TeamState> {
        self.pas[0]
            .initial_states()
            .into_iter()
            .map(|s| TeamState { r: 0, s })
            .collect()
    }

    /// Credits agent `r` with its executed history (`None` clears it).
    pub fn set_history(&mut self, r: usize, sync: Option<AgentSync>) {
        self.sync[r] = sync.filter(|s| !s.word.is_empty());
    }

    pub fn history(&self, r: usize) -> Option<&AgentSync> {
        self.sync[r].as_ref()
    }

    /// Agents after the last one with a credited history would append
    /// their words after acceptance unchecked, so acceptance is only
    /// allowed from that agent on.
    fn accept_from(&self) -> usize {
        self.sync.iter().rposition(Option::is_some).unwrap_or(0)
    }

    /// `F_G` restricted as above.
    pub fn is_accepting(&self, s: TeamState) -> bool {
        s.r >= self.accept_from() && self.nfa.is_accepting(s.s.q)
    }

    /// Automaton state after replaying agent `r`'s history from `q`.
    pub fn replay(&self, r: usize, q: NfaState) -> NfaState {
        let Some(h) = &self.sync[r] else { return q };
        let mut q = q;
        for a in &h.word {
            q = self.nfa.delta(q, a).expect("progression cannot fail")[0];
        }
        q
    }

    /// `zeta`: `(r, q, t) -> (r+1, q, s_0^(r+1))` for every `q` in `D`.
    pub fn switch_edges(&self) -> Vec<(TeamState, TeamState)> {
        let mut out = Vec::new();
        for r in 0..self.pas.len().saturating_sub(1) {
            let s0 = self.pas[r + 1].ts().initial();
            for q in self.d.members() {
                for t in self.pas[r].ts().states() {
                    out.push((TeamState::new(r, q, t), TeamState::new(r + 1, q, s0)));
                }
            }
        }
        out
    }

    /// `xi`: for each agent with progress, `(r, init, s) -> (r, final, s)`
    /// for every TS state `s`; degenerate edges are omitted.
    pub fn sync_edges(&self) -> Vec<(TeamState, TeamState)> {
        let mut out = Vec::new();
        for r in 0..self.pas.len() {
            let Some(h) = &self.sync[r] else { continue };
            let fin = self.replay(r, h.anchor);
            if fin == h.anchor {
                continue;
            }
            for t in self.pas[r].ts().states() {
                out.push((TeamState::new(r, h.anchor, t), TeamState::new(r, fin, t)));
            }
        }
        out
    }

    /// Brings every product's rows up to the current automaton size.
    fn prepare(&mut self) -> HashMap<(usize, NfaState), NfaState> {
        let mut entries = HashMap::new();
        let q0 = self.nfa.initial_state();
        entries.insert((0, q0), self.replay(0, q0));
        for r in 1..self.pas.len() {
            for q in self.d.members() {
                entries.insert((r, q), self.replay(r, q));
            }
        }
        loop {
            let n = self.nfa.num_states();
            for pa in &mut self.pas {
                pa.sync_rows().expect("automaton within budget");
            }
            if self.nfa.num_states() == n {
                return entries;
            }
        }
    }

    /// Offline allocation: a minimum-cost path from `S_0G` to `F_G`.
    pub fn plan(&mut self) -> Result<GlobalPath, TeamError> {
        let entries = self.prepare();
        let nq = self.nfa.num_states();
        let mut offsets = Vec::with_capacity(self.pas.len() + 1);
        let mut total = 0;
        for pa in &self.pas {
            offsets.push(total);
            total += nq * pa.num_t();
        }
        offsets.push(total);
        let nts: Vec<usize> = self.pas.iter().map(|p| p.num_t()).collect();
        let index = |s: TeamState| offsets[s.r] + s.s.q.index() * nts[s.r] + s.s.t.index();
        let decode = |i: usize| {
            let r = offsets.partition_point(|&o| o <= i) - 1;
            let local = i - offsets[r];
            TeamState::new(
                r,
                NfaState((local / nts[r]) as u32),
                TsState((local % nts[r]) as u32),
            )
        };
        let n = self.pas.len();
        let members: Vec<bool> = {
            let mut m = vec![false; nq];
            for q in self.d.members() {
                if q.index() < nq {
                    m[q.index()] = true;
                }
            }
            m
        };
        let start = self.initial_states()[0];
        let entry0 = TeamState {
            r: 0,
            s: PaState::new(entries[&(0, start.s.q)], start.s.t),
        };
        let succ = |u: usize, out: &mut Vec<(usize, Cost)>| {
            let s = decode(u);
            self.pas[s.r].for_each_successor(s.s, |s2, e| {
                out.push((index(TeamState { r: s.r, s: s2 }), e.cost));
            });
            if s.r + 1 < n && members[s.s.q.index()] {
                let q2 = entries[&(s.r + 1, s.s.q)];
                let t2 = self.pas[s.r + 1].ts().initial();
                out.push((index(TeamState::new(s.r + 1, q2, t2)), Cost::ZERO));
            }
        };
        let accept_from = self.accept_from();
        let is_target = |u: usize| {
            let s = decode(u);
            s.r >= accept_from && self.nfa.is_accepting(s.s.q)
        };
        let (path, cost) = dijkstra(total, &[index(entry0)], succ, is_target)
            .ok_or(TeamError::MissionInfeasible)?;

        let mut states = vec![start];
        let mut edges = Vec::new();
        if entry0 != start {
            edges.push(TeamEdge::free(EdgeKind::Sync));
            states.push(entry0);
        }
        for w in path.windows(2) {
            let (a, b) = (decode(w[0]), decode(w[1]));
            if a.r == b.r {
                let e = self.pas[a.r]
                    .edge(a.s, b.s)
                    .expect("search follows product edges");
                edges.push(TeamEdge {
                    kind: EdgeKind::Intra,
                    action: Some(e.action.clone()),
                    cost: e.cost,
                    duration: e.duration,
                });
                states.push(b);
            } else {
                let via = TeamState {
                    r: b.r,
                    s: PaState::new(a.s.q, b.s.t),
                };
                edges.push(TeamEdge::free(EdgeKind::Switch));
                states.push(via);
                if via != b {
                    edges.push(TeamEdge::free(EdgeKind::Sync));
                    states.push(b);
                }
            }
        }
        Ok(GlobalPath {
            states,
            edges,
            cost,
        })
    }
}

/// Splits `beta` at its switch edges: agent `r` receives the `r`-th segment,
/// starting after any synchronization edge. Agents the path never reaches
/// get empty plans.
pub fn project(beta: &GlobalPath, num_agents: usize) -> Vec<AgentPlan> {
    let mut plans: Vec<AgentPlan> = (0..num_agents).map(AgentPlan::empty).collect();
    let Some(first) = beta.states.first() else {
        return plans;
    };
    plans[first.r].anchor = Some(first.s.q);
    plans[first.r].states.push(first.s);
    for (i, e) in beta.edges.iter().enumerate() {
        let next = beta.states[i + 1];
        let cur = &mut plans[next.r];
        match e.kind {
            EdgeKind::Switch => {
                cur.anchor = Some(next.s.q);
                cur.states = vec![next.s];
            }
            EdgeKind::Sync => {
                cur.states = vec![next.s];
            }
            EdgeKind::Intra => {
                cur.states.push(next.s);
                cur.steps.push(PlanStep {
                    action: e.action.clone().unwrap_or_default(),
                    cost: e.cost,
                    duration: e.duration,
                });
            }
        }
    }
    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{canonical, parse};
    use crate::models::{
        compose_ts, decomposition_set, product, DecompositionConfig, LocationMap, MapEdge,
        OpStateMachine,
    };
    use std::collections::BTreeSet;

    fn toy_pas(formula: &str, starts: &[&str]) -> (Arc<Nfa>, Vec<ProductAutomaton>) {
        let map = LocationMap {
            locations: vec!["s1".into(), "a".into(), "b".into()],
            edges: vec![
                MapEdge {
                    from: "s1".into(),
                    to: "a".into(),
                    cost: Cost::ONE,
                    duration: 1,
                    capability: None,
                },
                MapEdge {
                    from: "a".into(),
                    to: "b".into(),
                    cost: Cost::ONE,
                    duration: 1,
                    capability: None,
                },
            ],
        };
        let opsm = OpStateMachine {
            states: vec!["idle".into()],
            transitions: vec![],
        };
        let tss: Vec<_> = starts
            .iter()
            .map(|s| compose_ts(&map, &opsm, s, "idle", &BTreeSet::new()).unwrap())
            .collect();
        let f = canonical(&parse(formula).unwrap());
        let nfa = Arc::new(Nfa::build(&f, tss[0].labels(), 1000).unwrap());
        let pas = tss
            .into_iter()
            .enumerate()
            .map(|(r, ts)| product(nfa.clone(), ts, r).unwrap())
            .collect();
        (nfa, pas)
    }

    fn team(formula: &str, starts: &[&str]) -> TeamAutomaton {
        let (nfa, pas) = toy_pas(formula, starts);
        let d = decomposition_set(&nfa, &DecompositionConfig::default()).unwrap();
        build_team(pas, d).unwrap()
    }

    #[test]
    fn switch_edges_follow_the_four_conditions() {
        let t = team("<>a && <>b", &["s1", "b"]);
        assert_eq!(t.decomposition().len(), 4);
        let zeta = t.switch_edges();
        let reach = t.pa(0).reachable();
        let from_reachable = zeta.iter().filter(|(a, _)| reach.contains(&a.s)).count();
        let expect = reach
            .iter()
            .filter(|s| t.decomposition().contains(s.q))
            .count();
        assert_eq!(from_reachable, expect);
        for (a, b) in &zeta {
            assert_eq!(b.r, a.r + 1);
            assert_eq!(a.s.q, b.s.q);
            assert_eq!(b.s.t, t.pa(b.r).ts().initial());
            assert!(t.decomposition().contains(a.s.q));
        }
        let single = team("<>a && <>b", &["s1"]);
        assert!(single.switch_edges().is_empty());
        assert_eq!(t.state_count(), t.pa(0).num_states() + t.pa(1).num_states());
    }

    #[test]
    fn mismatched_automata_are_rejected() {
        let (_, mut a) = toy_pas("<>a", &["s1"]);
        let (_, b) = toy_pas("<>a", &["s1"]);
        a.extend(b);
        let err = build_team(a, DecompositionSet::default()).unwrap_err();
        assert_eq!(err, TeamError::MismatchedSpecification);
    }

    #[test]
    fn toy_plan_is_cheapest_split() {
        let mut t = team("<>a && <>b", &["s1", "b"]);
        let beta = t.plan().unwrap();
        // agent 2 walks b -> a -> s1, consuming b then a; agent 1 hands over
        // at once. Agent 1 fetching a and agent 2 staying at b would cost 3.
        assert_eq!(beta.cost, Cost(2000));
        assert_eq!(beta.states[0], t.initial_states()[0]);
        assert!(t.is_accepting(*beta.states.last().unwrap()));
        let plans = project(&beta, 2);
        let total: Cost = plans.iter().map(|p| p.cost()).sum();
        assert_eq!(total, beta.cost);
        assert!(plans[0].is_empty());
        assert_eq!(plans[1].steps.len(), 2);
        for w in beta.states.windows(2) {
            assert!(w[0].r <= w[1].r);
        }
        let words = beta.words(&t);
        assert!(words[0].is_empty());
        assert_eq!(words[1].len(), 2);
    }

    #[test]
    fn stay_loop_consumes_final_label() {
        // an agent standing on a must still take one transition out of a;
        // with a lone location the stay loop is the only one
        let mut t = team("<>a", &["a"]);
        let beta = t.plan().unwrap();
        assert_eq!(beta.cost, Cost::ONE);
        let map = LocationMap {
            locations: vec!["a".into()],
            edges: vec![],
        };
        let opsm = OpStateMachine {
            states: vec!["idle".into()],
            transitions: vec![],
        };
        let ts = compose_ts(&map, &opsm, "a", "idle", &BTreeSet::new()).unwrap();
        let nfa =
            Arc::new(Nfa::build(&canonical(&parse("<>a").unwrap()), ts.labels(), 10).unwrap());
        let pa = product(nfa.clone(), ts, 0).unwrap();
        let d = decomposition_set(&nfa, &DecompositionConfig::default()).unwrap();
        let beta = build_team(vec![pa], d).unwrap().plan().unwrap();
        assert_eq!(beta.edges.len(), 1);
        assert_eq!(beta.edges[0].action.as_deref(), Some(crate::models::STAY));
    }

    #[test]
    fn true_needs_no_motion() {
        let mut t = team("true", &["s1", "a"]);
        let beta = t.plan().unwrap();
        assert_eq!(beta.states.len(), 1);
        assert_eq!(beta.cost, Cost::ZERO);
        let plans = project(&beta, 2);
        assert_eq!(plans[0].states.len(), 1);
        assert!(plans.iter().all(AgentPlan::is_empty));
    }

    #[test]
    fn infeasible_mission() {
        let mut t = team("<>a && [] !a", &["s1", "b"]);
        assert_eq!(t.plan().unwrap_err(), TeamError::MissionInfeasible);
    }

    #[test]
    fn projection_reassembles_the_path() {
        let mut t = team("<>a && <>b", &["s1", "b"]);
        let beta = t.plan().unwrap();
        let plans = project(&beta, 2);
        let mut rebuilt = Vec::new();
        for p in &plans {
            rebuilt.extend(p.states.iter().map(|&s| TeamState { r: p.agent, s }));
        }
        assert_eq!(rebuilt, beta.states);
        let no_switch = GlobalPath {
            states: beta.states[..1].to_vec(),
            edges: vec![],
            cost: Cost::ZERO,
        };
        let plans = project(&no_switch, 2);
        assert_eq!(plans.iter().filter(|p| !p.states.is_empty()).count(), 1);
    }
}
