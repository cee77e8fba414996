//! Agent transition systems and their composition from a topological map and
//! an operating-state machine.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ltl::PropSet;

/// Non-negative edge weight in fixed point (1/1000 resolution), so that sums
/// are exact and comparisons deterministic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(pub u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const ONE: Cost = Cost(1000);
    pub const MAX: Cost = Cost(u64::MAX);

    pub fn from_f64(v: f64) -> Option<Cost> {
        (v.is_finite() && v >= 0.0).then(|| Cost((v * 1000.0).round() as u64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_add(self, o: Cost) -> Cost {
        Cost(self.0.saturating_add(o.0))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost(self.0 + o.0)
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Cost {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Cost::from_f64(v).ok_or_else(|| serde::de::Error::custom("cost must be finite and >= 0"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TsState(pub u32);

impl TsState {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsStateInfo {
    pub name: String,
    pub location: String,
    pub opstate: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsEdge {
    pub action: String,
    pub cost: Cost,
    pub duration: u32,
}

impl TsEdge {
    pub fn new(action: impl Into<String>, cost: Cost, duration: u32) -> Self {
        TsEdge {
            action: action.into(),
            cost,
            duration,
        }
    }

    pub fn stay() -> Self {
        TsEdge::new(STAY, Cost::ONE, 1)
    }
}

pub const STAY: &str = "stay";

/// `T = (S_T, s_0T, A_T, Pi_T, L)`. At most one transition per ordered state
/// pair; `Succ`/`Pred` are kept in sync with the transition map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    states: Vec<TsStateInfo>,
    labels: Vec<PropSet>,
    initial: TsState,
    edges: BTreeMap<(TsState, TsState), TsEdge>,
    succ: Vec<BTreeSet<TsState>>,
    pred: Vec<BTreeSet<TsState>>,
    by_name: HashMap<String, TsState>,
}

impl TransitionSystem {
    pub fn new(states: Vec<(TsStateInfo, PropSet)>, initial: TsState) -> Result<Self, ModelError> {
        if initial.index() >= states.len() {
            return Err(ModelError::UnknownState(format!("#{}", initial.0)));
        }
        let n = states.len();
        let mut by_name = HashMap::new();
        let mut infos = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (i, (info, label)) in states.into_iter().enumerate() {
            if by_name
                .insert(info.name.clone(), TsState(i as u32))
                .is_some()
            {
                return Err(ModelError::Duplicate(info.name));
            }
            infos.push(info);
            labels.push(label);
        }
        Ok(TransitionSystem {
            states: infos,
            labels,
            initial,
            edges: BTreeMap::new(),
            succ: vec![BTreeSet::new(); n],
            pred: vec![BTreeSet::new(); n],
            by_name,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = TsState> {
        (0..self.states.len() as u32).map(TsState)
    }

    pub fn initial(&self) -> TsState {
        self.initial
    }

    pub fn set_initial(&mut self, s: TsState) {
        assert!(s.index() < self.states.len());
        self.initial = s;
    }

    pub fn info(&self, s: TsState) -> &TsStateInfo {
        &self.states[s.index()]
    }

    pub fn name(&self, s: TsState) -> &str {
        &self.states[s.index()].name
    }

    pub fn label(&self, s: TsState) -> &PropSet {
        &self.labels[s.index()]
    }

    pub fn labels(&self) -> &[PropSet] {
        &self.labels
    }

    pub fn state(&self, name: &str) -> Option<TsState> {
        self.by_name.get(name).copied()
    }

    pub fn find(&self, location: &str, opstate: &str) -> Option<TsState> {
        self.state(&state_name(location, opstate))
    }

    /// The proposition universe `Pi_T`: every proposition in some label.
    pub fn props(&self) -> BTreeSet<String> {
        self.labels.iter().flat_map(|l| l.iter().cloned()).collect()
    }

    pub fn succ(&self, s: TsState) -> &BTreeSet<TsState> {
        &self.succ[s.index()]
    }

    pub fn pred(&self, s: TsState) -> &BTreeSet<TsState> {
        &self.pred[s.index()]
    }

    pub fn edge(&self, from: TsState, to: TsState) -> Option<&TsEdge> {
        self.edges.get(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (TsState, TsState, &TsEdge)> {
        self.edges.iter().map(|(&(a, b), e)| (a, b, e))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn check(&self, s: TsState) -> Result<(), ModelError> {
        if s.index() < self.states.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownState(format!("#{}", s.0)))
        }
    }

    /// Inserts or replaces the transition `from -> to`.
    pub fn add_edge(&mut self, from: TsState, to: TsState, edge: TsEdge) -> Result<(), ModelError> {
        self.check(from)?;
        self.check(to)?;
        self.edges.insert((from, to), edge);
        self.succ[from.index()].insert(to);
        self.pred[to.index()].insert(from);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: TsState, to: TsState) -> Option<TsEdge> {
        let e = self.edges.remove(&(from, to))?;
        self.succ[from.index()].remove(&to);
        self.pred[to.index()].remove(&from);
        Some(e)
    }

    pub fn relabel(&mut self, s: TsState, label: PropSet) -> Result<PropSet, ModelError> {
        self.check(s)?;
        Ok(std::mem::replace(&mut self.labels[s.index()], label))
    }

    /// Adds the mandatory `stay` self-loop wherever it is missing.
    pub fn ensure_stay_loops(&mut self) {
        for s in 0..self.states.len() as u32 {
            let s = TsState(s);
            if !self.edges.contains_key(&(s, s)) {
                self.add_edge(s, s, TsEdge::stay()).expect("state in range");
            }
        }
    }

    pub fn has_all_stay_loops(&self) -> bool {
        self.states().all(|s| self.edges.contains_key(&(s, s)))
    }
}

pub fn state_name(location: &str, opstate: &str) -> String {
    format!("{location}:{opstate}")
}

/// Undirected topological map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationMap {
    pub locations: Vec<String>,
    pub edges: Vec<MapEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEdge {
    pub from: String,
    pub to: String,
    #[serde(default = "one_cost")]
    pub cost: Cost,
    #[serde(default = "one_tick")]
    pub duration: u32,
    /// Agent tag required to traverse the edge, e.g. `legged_only`.
    #[serde(default)]
    pub capability: Option<String>,
}

fn one_cost() -> Cost {
    Cost::ONE
}

fn one_tick() -> u32 {
    1
}

/// Operating-state machine of a robot type (e.g. Standby/Loaded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpStateMachine {
    pub states: Vec<String>,
    pub transitions: Vec<OpTransition>,
}

/// An operating-state change. `locations` is the binding rule: when present
/// the action is only available at those locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpTransition {
    pub from: String,
    pub to: String,
    pub action: String,
    #[serde(default)]
    pub locations: Option<Vec<String>>,
    #[serde(default = "one_cost")]
    pub cost: Cost,
    #[serde(default = "one_tick")]
    pub duration: u32,
}

/// Whether an agent carrying `tags` may use an edge requiring `capability`.
pub fn capability_allows(capability: Option<&str>, tags: &BTreeSet<String>) -> bool {
    match capability {
        None => true,
        Some(c) => {
            let c = c.strip_suffix("_only").unwrap_or(c);
            tags.contains(c)
        }
    }
}

/// Composes `locations x operating states`. Movement keeps the operating
/// state fixed; operating-state changes stay in place and obey the binding
/// rules. `L(loc, op) = {loc, op}`.
pub fn compose_ts(
    map: &LocationMap,
    opsm: &OpStateMachine,
    start_location: &str,
    start_opstate: &str,
    tags: &BTreeSet<String>,
) -> Result<TransitionSystem, ModelError> {
    let locs: BTreeSet<&str> = map.locations.iter().map(String::as_str).collect();
    let ops: BTreeSet<&str> = opsm.states.iter().map(String::as_str).collect();
    let known_loc = |l: &str| {
        if locs.contains(l) {
            Ok(())
        } else {
            Err(ModelError::UnknownLocation(l.to_string()))
        }
    };
    let known_op = |o: &str| {
        if ops.contains(o) {
            Ok(())
        } else {
            Err(ModelError::UnknownOpState(o.to_string()))
        }
    };
    known_loc(start_location)?;
    known_op(start_opstate)?;
    for e in &map.edges {
        known_loc(&e.from)?;
        known_loc(&e.to)?;
    }
    for t in &opsm.transitions {
        known_op(&t.from)?;
        known_op(&t.to)?;
        for l in t.locations.iter().flatten() {
            known_loc(l)?;
        }
    }

    let mut states = Vec::new();
    for loc in &map.locations {
        for op in &opsm.states {
            let info = TsStateInfo {
                name: state_name(loc, op),
                location: loc.clone(),
                opstate: op.clone(),
            };
            let label: PropSet = [loc.as_str(), op.as_str()].into_iter().collect();
            states.push((info, label));
        }
    }
    let n_ops = opsm.states.len();
    let loc_ix: HashMap<&str, usize> = map
        .locations
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let op_ix: HashMap<&str, usize> = opsm
        .states
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_str(), i))
        .collect();
    let id = |l: &str, o: &str| TsState((loc_ix[l] * n_ops + op_ix[o]) as u32);

    let mut ts = TransitionSystem::new(states, id(start_location, start_opstate))?;
    for e in &map.edges {
        if !capability_allows(e.capability.as_deref(), tags) || e.from == e.to {
            continue;
        }
        for op in &opsm.states {
            let edge = TsEdge::new(format!("goto_{}", e.to), e.cost, e.duration);
            ts.add_edge(id(&e.from, op), id(&e.to, op), edge)?;
            let back = TsEdge::new(format!("goto_{}", e.from), e.cost, e.duration);
            ts.add_edge(id(&e.to, op), id(&e.from, op), back)?;
        }
    }
    for t in &opsm.transitions {
        if t.from == t.to {
            continue;
        }
        let at: Vec<&str> = match &t.locations {
            Some(ls) => ls.iter().map(String::as_str).collect(),
            None => map.locations.iter().map(String::as_str).collect(),
        };
        for loc in at {
            let edge = TsEdge::new(t.action.clone(), t.cost, t.duration);
            ts.add_edge(id(loc, &t.from), id(loc, &t.to), edge)?;
        }
    }
    ts.ensure_stay_loops();
    Ok(ts)
}
