//! Behavior-tree runtime: node semantics, the per-agent tree, and the
//! mapping from disturbance flags to recovery strategies.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    /// Resumes at the child that was running.
    Sequence,
    /// Restarts from the first child on every tick.
    ReactiveSequence,
    Fallback,
    /// Ticks its child once per tick until the blackboard reports done.
    Repeat,
    ForceFailure,
    Condition,
    Action,
}

/// What the tree reads and drives. Conditions and actions are looked up by
/// node name.
pub trait Blackboard {
    fn condition(&mut self, name: &str) -> bool;
    fn action(&mut self, name: &str) -> Status;
    /// Stop predicate of `Repeat`.
    fn done(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: Kind,
    pub children: Vec<Node>,
    cursor: usize,
}

impl Node {
    fn composite(kind: Kind, name: &str, children: Vec<Node>) -> Node {
        Node {
            name: name.into(),
            kind,
            children,
            cursor: 0,
        }
    }

    pub fn sequence(name: &str, children: Vec<Node>) -> Node {
        Node::composite(Kind::Sequence, name, children)
    }

    pub fn reactive_sequence(name: &str, children: Vec<Node>) -> Node {
        Node::composite(Kind::ReactiveSequence, name, children)
    }

    pub fn fallback(name: &str, children: Vec<Node>) -> Node {
        Node::composite(Kind::Fallback, name, children)
    }

    pub fn repeat(name: &str, child: Node) -> Node {
        Node::composite(Kind::Repeat, name, vec![child])
    }

    pub fn force_failure(name: &str, child: Node) -> Node {
        Node::composite(Kind::ForceFailure, name, vec![child])
    }

    pub fn condition(name: &str) -> Node {
        Node::composite(Kind::Condition, name, vec![])
    }

    pub fn action(name: &str) -> Node {
        Node::composite(Kind::Action, name, vec![])
    }

    /// Clears all sequence memory below this node.
    pub fn reset(&mut self) {
        self.cursor = 0;
        for c in &mut self.children {
            c.reset();
        }
    }

    /// One depth-first traversal. `path` receives the names from this node
    /// down to the last leaf ticked.
    pub fn tick(&mut self, bb: &mut dyn Blackboard, path: &mut Vec<String>) -> Status {
        path.push(self.name.clone());
        let mark = path.len();
        match self.kind {
            Kind::Condition => {
                if bb.condition(&self.name) {
                    Status::Success
                } else {
                    Status::Failure
                }
            }
            Kind::Action => bb.action(&self.name),
            Kind::Sequence => {
                let mut out = Status::Success;
                while self.cursor < self.children.len() {
                    path.truncate(mark);
                    match self.children[self.cursor].tick(bb, path) {
                        Status::Success => self.cursor += 1,
                        other => {
                            out = other;
                            break;
                        }
                    }
                }
                if out != Status::Running {
                    self.cursor = 0;
                }
                out
            }
            Kind::ReactiveSequence => {
                let mut out = Status::Success;
                for c in &mut self.children {
                    path.truncate(mark);
                    let s = c.tick(bb, path);
                    if s != Status::Success {
                        out = s;
                        break;
                    }
                }
                out
            }
            Kind::Fallback => {
                let mut out = Status::Failure;
                for c in &mut self.children {
                    path.truncate(mark);
                    let s = c.tick(bb, path);
                    if s != Status::Failure {
                        out = s;
                        break;
                    }
                }
                out
            }
            Kind::Repeat => match self.children[0].tick(bb, path) {
                Status::Success if bb.done() => Status::Success,
                Status::Success => Status::Running,
                other => other,
            },
            Kind::ForceFailure => match self.children[0].tick(bb, path) {
                Status::Running => Status::Running,
                _ => Status::Failure,
            },
        }
    }

    /// Names of all nodes in depth-first order.
    pub fn names(&self) -> Vec<&str> {
        let mut out = vec![self.name.as_str()];
        for c in &self.children {
            out.extend(c.names());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Legged,
    Wheeled,
}

/// The four recovery strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    R1,
    R2,
    R3,
    R4,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::R1, Strategy::R2, Strategy::R3, Strategy::R4];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Name of the action node that carries it out.
    pub fn action(self) -> &'static str {
        match self {
            Strategy::R1 => names::RECOVERY_STAND,
            Strategy::R2 => names::GLOBAL_REALLOC,
            Strategy::R3 => names::LOCAL_STATE_REALLOC,
            Strategy::R4 => names::LOCAL_ENV_REALLOC,
        }
    }
}

pub mod names {
    pub const ROOT: &str = "Root";
    pub const MAIN: &str = "Mission";
    pub const EXECUTE: &str = "Execute";
    pub const RECOVERY: &str = "Recovery";
    pub const NO_CRITICAL_FAILURE: &str = "NoCriticalFailure";
    pub const NO_LOCOMOTION_FAILURE: &str = "NoLocomotionFailure";
    pub const NO_STATE_CHANGE: &str = "NoStateChange";
    pub const NO_ENV_CHANGE: &str = "NoEnvChange";
    pub const PRECONDITION: &str = "LTLPreconditionMet";
    pub const EXECUTE_ACTION: &str = "ExecuteCurrentAction";
    pub const ADVANCE: &str = "AdvanceQueue";
    pub const CRITICAL_FAILURE: &str = "CriticalFailure";
    pub const LOSS_OF_BALANCE: &str = "LossOfBalance";
    pub const STATE_CHANGE: &str = "StateChange";
    pub const ENV_CHANGE: &str = "EnvChange";
    pub const RECOVERY_STAND: &str = "RecoveryStand";
    pub const GLOBAL_REALLOC: &str = "GlobalRealloc";
    pub const LOCAL_STATE_REALLOC: &str = "LocalReallocStateChange";
    pub const LOCAL_ENV_REALLOC: &str = "LocalReallocEnvChange";
    pub const UNHANDLED: &str = "Unhandled";
}

/// Disturbance flags as seen by the tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub loss_of_balance: bool,
    pub critical_failure: bool,
    pub state_change: bool,
    pub env_change: bool,
}

/// The strategy a tree of `kind` runs for `flags`, by severity: critical
/// failure, loss of balance, state change, environmental change. Wheeled
/// robots have no locomotion monitor.
pub fn select_strategy(flags: Flags, kind: AgentKind) -> Option<Strategy> {
    if flags.critical_failure {
        Some(Strategy::R2)
    } else if flags.loss_of_balance && kind == AgentKind::Legged {
        Some(Strategy::R1)
    } else if flags.state_change {
        Some(Strategy::R3)
    } else if flags.env_change {
        Some(Strategy::R4)
    } else {
        None
    }
}

fn guarded(flag: &str, strategy: Strategy) -> Node {
    Node::sequence(
        &format!("{strategy:?}"),
        vec![Node::condition(flag), Node::action(strategy.action())],
    )
}

/// Root fallback of the monitored mission sequence and the guarded
/// recovery branches. The precondition sits in a sequence with memory, so
/// it is only checked when a new action is fetched.
pub fn build_agent_tree(kind: AgentKind) -> Node {
    use names::*;
    let mut monitors = vec![Node::condition(NO_CRITICAL_FAILURE)];
    if kind == AgentKind::Legged {
        monitors.push(Node::condition(NO_LOCOMOTION_FAILURE));
    }
    monitors.push(Node::condition(NO_STATE_CHANGE));
    monitors.push(Node::condition(NO_ENV_CHANGE));
    monitors.push(Node::sequence(
        EXECUTE,
        vec![
            Node::condition(PRECONDITION),
            Node::action(EXECUTE_ACTION),
            Node::action(ADVANCE),
        ],
    ));
    let mut branches = vec![guarded(CRITICAL_FAILURE, Strategy::R2)];
    if kind == AgentKind::Legged {
        branches.push(guarded(LOSS_OF_BALANCE, Strategy::R1));
    }
    branches.push(guarded(STATE_CHANGE, Strategy::R3));
    branches.push(guarded(ENV_CHANGE, Strategy::R4));
    branches.push(Node::force_failure(UNHANDLED, Node::condition(UNHANDLED)));
    Node::repeat(
        ROOT,
        Node::fallback(
            "Fallback",
            vec![
                Node::reactive_sequence(MAIN, monitors),
                Node::fallback(RECOVERY, branches),
            ],
        ),
    )
}

#[cfg(test)]
mod tests;
