//! Scenario files: map, agents, operating-state machines and the
//! disturbance schedule.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::AgentKind;
use crate::ltl::{canonical, parse, Formula, Nfa, PropSet};
use crate::models::{compose_ts, Cost, LocationMap, OpStateMachine, TransitionSystem};

/// NFA state budget for scenario missions.
pub const NFA_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{message}", prefix(.path))]
pub struct SchemaError {
    /// Dotted path of the offending field, e.g. `agents[1].start`.
    pub path: String,
    pub message: String,
}

fn prefix(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!("{path}: ")
    }
}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn default_tick_rate() -> u32 {
    10
}

fn default_recovery_secs() -> f64 {
    3.0
}

fn default_budget() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub propositions: Vec<String>,
    pub formula: String,
    pub map: LocationMap,
    /// Operating-state machines by id.
    pub opsms: BTreeMap<String, OpStateMachine>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: u32,
    /// Duration of the recovery stand.
    #[serde(default = "default_recovery_secs")]
    pub recovery_secs: f64,
    #[serde(default = "default_budget")]
    pub tick_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default)]
    pub capabilities: Vec<String>,
    pub start: String,
    /// Defaults to the machine's first state.
    #[serde(default)]
    pub start_op: Option<String>,
    pub opsm: String,
}

impl AgentSpec {
    /// Capability tags checked against map edges: the capabilities plus the
    /// locomotion kind.
    pub fn tags(&self) -> BTreeSet<String> {
        let mut t: BTreeSet<String> = self.capabilities.iter().cloned().collect();
        t.insert(match self.kind {
            AgentKind::Legged => "legged".into(),
            AgentKind::Wheeled => "wheeled".into(),
        });
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trigger {
    At {
        at: u64,
    },
    /// Fires the first time `agent` arrives at `enters`.
    Enters {
        enters: String,
        agent: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    /// The agent learns of the change when it tries a deleted transition.
    #[default]
    OnEncounter,
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddEdge {
    pub from: String,
    pub to: String,
    #[serde(default = "one_cost")]
    pub cost: Cost,
    #[serde(default = "one")]
    pub duration: u32,
}

fn one() -> u32 {
    1
}

fn one_cost() -> Cost {
    Cost::ONE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relabel {
    /// TS state name `location:opstate`.
    pub state: String,
    pub props: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceKind {
    Fall {
        agent: String,
    },
    CriticalFailure {
        agent: String,
    },
    /// Jump to the TS state `to`, or to operating state `to_op` at the
    /// agent's current location.
    StateJump {
        agent: String,
        #[serde(default)]
        to: Option<String>,
        #[serde(default)]
        to_op: Option<String>,
    },
    /// Location-level change. Movement pairs are expanded over all
    /// operating states of each affected agent.
    EnvChange {
        #[serde(default)]
        delete: Vec<(String, String)>,
        #[serde(default)]
        add: Vec<AddEdge>,
        #[serde(default)]
        relabel: Vec<Relabel>,
        /// Agents carrying this tag are unaffected.
        #[serde(default)]
        unless_capability: Option<String>,
        /// Restricts the change to these agents; all when empty.
        #[serde(default)]
        agents: Vec<String>,
        #[serde(default)]
        delivery: Delivery,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub trigger: Trigger,
    #[serde(flatten)]
    pub kind: DisturbanceKind,
}

impl Disturbance {
    pub fn agent(&self) -> Option<&str> {
        match &self.kind {
            DisturbanceKind::Fall { agent }
            | DisturbanceKind::CriticalFailure { agent }
            | DisturbanceKind::StateJump { agent, .. } => Some(agent),
            DisturbanceKind::EnvChange { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            DisturbanceKind::Fall { .. } => "fall",
            DisturbanceKind::CriticalFailure { .. } => "critical_failure",
            DisturbanceKind::StateJump { .. } => "state_jump",
            DisturbanceKind::EnvChange { .. } => "env_change",
        }
    }
}

/// Parses and validates a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::new("", e.to_string()))?;
    parse_scenario(&text)
}

impl Scenario {
    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    pub fn formula(&self) -> Result<Formula, SchemaError> {
        parse(&self.formula)
            .map(|f| canonical(&f))
            .map_err(|e| SchemaError::new("formula", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let f = self.formula()?;
        let universe: BTreeSet<&str> = self.propositions.iter().map(String::as_str).collect();
        for p in f.props() {
            if !universe.contains(p.as_str()) {
                return Err(SchemaError::new(
                    "formula",
                    format!("proposition {p} not in propositions"),
                ));
            }
        }
        let locs: BTreeSet<&str> = self.map.locations.iter().map(String::as_str).collect();
        if locs.len() != self.map.locations.len() {
            return Err(SchemaError::new("map.locations", "duplicate location"));
        }
        for (i, e) in self.map.edges.iter().enumerate() {
            for (field, l) in [("from", &e.from), ("to", &e.to)] {
                if !locs.contains(l.as_str()) {
                    return Err(SchemaError::new(
                        format!("map.edges[{i}].{field}"),
                        format!("unknown location {l}"),
                    ));
                }
            }
        }
        for (id, m) in &self.opsms {
            let ops: BTreeSet<&str> = m.states.iter().map(String::as_str).collect();
            if ops.is_empty() {
                return Err(SchemaError::new(
                    format!("opsms.{id}.states"),
                    "no operating states",
                ));
            }
            for (i, t) in m.transitions.iter().enumerate() {
                for (field, o) in [("from", &t.from), ("to", &t.to)] {
                    if !ops.contains(o.as_str()) {
                        return Err(SchemaError::new(
                            format!("opsms.{id}.transitions[{i}].{field}"),
                            format!("unknown operating state {o}"),
                        ));
                    }
                }
                for l in t.locations.iter().flatten() {
                    if !locs.contains(l.as_str()) {
                        return Err(SchemaError::new(
                            format!("opsms.{id}.transitions[{i}].locations"),
                            format!("unknown location {l}"),
                        ));
                    }
                }
            }
        }
        if self.agents.is_empty() {
            return Err(SchemaError::new("agents", "no agents"));
        }
        let mut names = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if !names.insert(a.name.as_str()) {
                return Err(SchemaError::new(
                    format!("agents[{i}].name"),
                    "duplicate agent",
                ));
            }
            if !locs.contains(a.start.as_str()) {
                return Err(SchemaError::new(
                    format!("agents[{i}].start"),
                    format!("unknown location {}", a.start),
                ));
            }
            let Some(m) = self.opsms.get(&a.opsm) else {
                return Err(SchemaError::new(
                    format!("agents[{i}].opsm"),
                    format!("unknown machine {}", a.opsm),
                ));
            };
            if let Some(op) = &a.start_op {
                if !m.states.contains(op) {
                    return Err(SchemaError::new(
                        format!("agents[{i}].start_op"),
                        format!("unknown operating state {op}"),
                    ));
                }
            }
        }
        if self.tick_rate == 0 {
            return Err(SchemaError::new("tick_rate", "must be positive"));
        }
        if self.recovery_secs.is_nan() || self.recovery_secs < 0.0 {
            return Err(SchemaError::new("recovery_secs", "must be non-negative"));
        }
        for (i, d) in self.disturbances.iter().enumerate() {
            self.validate_disturbance(d).map_err(|e| {
                SchemaError::new(format!("disturbances[{i}].{}", e.path), e.message)
            })?;
        }
        Ok(())
    }

    fn validate_disturbance(&self, d: &Disturbance) -> Result<(), SchemaError> {
        let locs: BTreeSet<&str> = self.map.locations.iter().map(String::as_str).collect();
        let agent = |field: &str, name: &str| {
            self.agent_index(name)
                .ok_or_else(|| SchemaError::new(field, format!("unknown agent {name}")))
        };
        if let Trigger::Enters { enters, agent: a } = &d.trigger {
            agent("trigger.agent", a)?;
            if !locs.contains(enters.as_str()) {
                return Err(SchemaError::new(
                    "trigger.enters",
                    format!("unknown location {enters}"),
                ));
            }
        }
        match &d.kind {
            DisturbanceKind::Fall { agent: a } => {
                let r = agent("agent", a)?;
                if self.agents[r].kind != AgentKind::Legged {
                    return Err(SchemaError::new("agent", "only legged robots fall"));
                }
            }
            DisturbanceKind::CriticalFailure { agent: a } => {
                agent("agent", a)?;
            }
            DisturbanceKind::StateJump {
                agent: a,
                to,
                to_op,
            } => {
                let r = agent("agent", a)?;
                let m = &self.opsms[&self.agents[r].opsm];
                match (to, to_op) {
                    (Some(s), None) => {
                        let ok = s.split_once(':').is_some_and(|(l, o)| {
                            locs.contains(l) && m.states.iter().any(|x| x == o)
                        });
                        if !ok {
                            return Err(SchemaError::new("to", format!("unknown state {s}")));
                        }
                    }
                    (None, Some(o)) => {
                        if !m.states.contains(o) {
                            return Err(SchemaError::new(
                                "to_op",
                                format!("unknown operating state {o}"),
                            ));
                        }
                    }
                    _ => {
                        return Err(SchemaError::new(
                            "to",
                            "exactly one of to and to_op is required",
                        ))
                    }
                }
            }
            DisturbanceKind::EnvChange {
                delete,
                add,
                relabel,
                agents,
                ..
            } => {
                for (i, (a, b)) in delete.iter().enumerate() {
                    if !locs.contains(a.as_str()) || !locs.contains(b.as_str()) {
                        return Err(SchemaError::new(format!("delete[{i}]"), "unknown location"));
                    }
                }
                for (i, e) in add.iter().enumerate() {
                    if !locs.contains(e.from.as_str()) || !locs.contains(e.to.as_str()) {
                        return Err(SchemaError::new(format!("add[{i}]"), "unknown location"));
                    }
                }
                for (i, r) in relabel.iter().enumerate() {
                    if !r
                        .state
                        .split_once(':')
                        .is_some_and(|(l, _)| locs.contains(l))
                    {
                        return Err(SchemaError::new(
                            format!("relabel[{i}].state"),
                            format!("unknown state {}", r.state),
                        ));
                    }
                }
                for (i, a) in agents.iter().enumerate() {
                    agent(&format!("agents[{i}]"), a)?;
                }
            }
        }
        Ok(())
    }

    /// Each agent's transition system.
    pub fn transition_systems(&self) -> Result<Vec<TransitionSystem>, SchemaError> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = &self.opsms[&a.opsm];
                let op = a.start_op.clone().unwrap_or_else(|| m.states[0].clone());
                compose_ts(&self.map, m, &a.start, &op, &a.tags())
                    .map_err(|e| SchemaError::new(format!("agents[{i}]"), e.to_string()))
            })
            .collect()
    }

    /// The mission automaton over every label the agents can produce.
    pub fn automaton(&self, tss: &[TransitionSystem]) -> Result<Arc<Nfa>, SchemaError> {
        let mut letters: BTreeSet<PropSet> = BTreeSet::new();
        for ts in tss {
            letters.extend(ts.labels().iter().cloned());
        }
        for d in &self.disturbances {
            if let DisturbanceKind::EnvChange { relabel, .. } = &d.kind {
                letters.extend(
                    relabel
                        .iter()
                        .map(|r| r.props.iter().cloned().collect::<PropSet>()),
                );
            }
        }
        let letters: Vec<PropSet> = letters.into_iter().collect();
        Nfa::build(&self.formula()?, &letters, NFA_CAP)
            .map(Arc::new)
            .map_err(|e| SchemaError::new("formula", e.to_string()))
    }

    pub fn recovery_ticks(&self) -> u64 {
        (self.recovery_secs * self.tick_rate as f64).round() as u64
    }
}
