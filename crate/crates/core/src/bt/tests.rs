use std::collections::{BTreeMap, VecDeque};

use proptest::prelude::{any, prop_assert_eq, proptest};

use super::names::*;
use super::Strategy;
use super::*;

/// Scripted blackboard: fixed condition values, queued action results, and
/// a count of every evaluation.
#[derive(Default)]
struct Script {
    conds: BTreeMap<String, bool>,
    actions: BTreeMap<String, VecDeque<Status>>,
    calls: BTreeMap<String, usize>,
    done: bool,
}

impl Script {
    fn cond(mut self, name: &str, v: bool) -> Self {
        self.conds.insert(name.into(), v);
        self
    }

    fn act(mut self, name: &str, seq: &[Status]) -> Self {
        self.actions
            .insert(name.into(), seq.iter().copied().collect());
        self
    }

    fn calls(&self, name: &str) -> usize {
        self.calls.get(name).copied().unwrap_or(0)
    }
}

impl Blackboard for Script {
    fn condition(&mut self, name: &str) -> bool {
        *self.calls.entry(name.into()).or_default() += 1;
        *self.conds.get(name).unwrap_or(&true)
    }

    fn action(&mut self, name: &str) -> Status {
        *self.calls.entry(name.into()).or_default() += 1;
        self.actions
            .get_mut(name)
            .and_then(|q| q.pop_front())
            .unwrap_or(Status::Success)
    }

    fn done(&self) -> bool {
        self.done
    }
}

fn tick(n: &mut Node, bb: &mut Script) -> Status {
    n.tick(bb, &mut Vec::new())
}

#[test]
fn reactive_sequence_stops_at_failing_condition() {
    let mut n = Node::reactive_sequence("r", vec![Node::condition("c"), Node::action("a")]);
    let mut bb = Script::default().cond("c", false);
    assert_eq!(tick(&mut n, &mut bb), Status::Failure);
    assert_eq!(bb.calls("a"), 0);
}

#[test]
fn sequence_resumes_running_child() {
    let mut n = Node::sequence(
        "s",
        vec![Node::action("a"), Node::action("b"), Node::action("c")],
    );
    let mut bb = Script::default().act("b", &[Status::Running, Status::Success]);
    assert_eq!(tick(&mut n, &mut bb), Status::Running);
    assert_eq!(tick(&mut n, &mut bb), Status::Success);
    assert_eq!((bb.calls("a"), bb.calls("b"), bb.calls("c")), (1, 2, 1));
    // memory is cleared after completion
    tick(&mut n, &mut bb);
    assert_eq!(bb.calls("a"), 2);
}

#[test]
fn force_failure_and_fallback() {
    let mut n = Node::force_failure("f", Node::action("a"));
    let mut bb = Script::default();
    assert_eq!(tick(&mut n, &mut bb), Status::Failure);
    let mut bb = Script::default().act("a", &[Status::Running]);
    assert_eq!(tick(&mut n, &mut bb), Status::Running);

    let mut n = Node::fallback("fb", vec![Node::condition("x"), Node::action("a")]);
    let mut bb = Script::default()
        .cond("x", false)
        .act("a", &[Status::Failure]);
    assert_eq!(tick(&mut n, &mut bb), Status::Failure);
    let mut bb = Script::default().cond("x", true);
    assert_eq!(tick(&mut n, &mut bb), Status::Success);
    assert_eq!(bb.calls("a"), 0);
}

#[test]
fn repeat_runs_until_done() {
    let mut n = Node::repeat("rep", Node::action("a"));
    let mut bb = Script::default();
    assert_eq!(tick(&mut n, &mut bb), Status::Running);
    bb.done = true;
    assert_eq!(tick(&mut n, &mut bb), Status::Success);
}

#[test]
fn tree_shapes() {
    let count = |t: &Node| {
        t.names()
            .iter()
            .filter(|n| {
                [
                    RECOVERY_STAND,
                    GLOBAL_REALLOC,
                    LOCAL_STATE_REALLOC,
                    LOCAL_ENV_REALLOC,
                ]
                .contains(n)
            })
            .count()
    };
    let legged = build_agent_tree(AgentKind::Legged);
    let wheeled = build_agent_tree(AgentKind::Wheeled);
    assert_eq!(count(&legged), 4);
    assert_eq!(count(&wheeled), 3);
    assert!(!wheeled.names().contains(&RECOVERY_STAND));
    assert!(!wheeled.names().contains(&NO_LOCOMOTION_FAILURE));
}

#[test]
fn precondition_only_on_fetch() {
    // an action that runs for three ticks: monitors are checked every tick,
    // the precondition once
    let mut t = build_agent_tree(AgentKind::Legged);
    let mut bb = Script::default().act(
        EXECUTE_ACTION,
        &[Status::Running, Status::Running, Status::Success],
    );
    for _ in 0..3 {
        tick(&mut t, &mut bb);
    }
    for c in [
        NO_CRITICAL_FAILURE,
        NO_LOCOMOTION_FAILURE,
        NO_STATE_CHANGE,
        NO_ENV_CHANGE,
    ] {
        assert_eq!(bb.calls(c), 3, "{c}");
    }
    assert_eq!(bb.calls(PRECONDITION), 1);
    assert_eq!(bb.calls(ADVANCE), 1);
    tick(&mut t, &mut bb);
    assert_eq!(bb.calls(PRECONDITION), 2);
}

#[test]
fn unhandled_failure_fails_the_tree() {
    let mut t = build_agent_tree(AgentKind::Wheeled);
    let mut bb = Script::default().cond(PRECONDITION, false);
    for f in [CRITICAL_FAILURE, STATE_CHANGE, ENV_CHANGE] {
        bb = bb.cond(f, false);
    }
    assert_eq!(tick(&mut t, &mut bb), Status::Failure);
}

/// Blackboard whose monitor conditions mirror `flags`.
fn flagged(flags: Flags) -> Script {
    Script::default()
        .cond(NO_CRITICAL_FAILURE, !flags.critical_failure)
        .cond(NO_LOCOMOTION_FAILURE, !flags.loss_of_balance)
        .cond(NO_STATE_CHANGE, !flags.state_change)
        .cond(NO_ENV_CHANGE, !flags.env_change)
        .cond(CRITICAL_FAILURE, flags.critical_failure)
        .cond(LOSS_OF_BALANCE, flags.loss_of_balance)
        .cond(STATE_CHANGE, flags.state_change)
        .cond(ENV_CHANGE, flags.env_change)
}

proptest! {
    #[test]
    fn tree_runs_the_selected_strategy(bits in 0u8..16, legged in any::<bool>()) {
        let flags = Flags {
            critical_failure: bits & 1 != 0,
            loss_of_balance: bits & 2 != 0,
            state_change: bits & 4 != 0,
            env_change: bits & 8 != 0,
        };
        let kind = if legged { AgentKind::Legged } else { AgentKind::Wheeled };
        let mut t = build_agent_tree(kind);
        let mut bb = flagged(flags);
        tick(&mut t, &mut bb);
        let ran: Vec<Strategy> = Strategy::ALL.into_iter().filter(|s| bb.calls(s.action()) > 0).collect();
        let expect = select_strategy(flags, kind);
        prop_assert_eq!(ran, expect.into_iter().collect::<Vec<_>>());
        // the mission action only runs when nothing the tree monitors is set
        prop_assert_eq!(bb.calls(EXECUTE_ACTION) > 0, expect.is_none());
    }
}

#[test]
fn selection_table() {
    let one = |i: usize| Flags {
        critical_failure: i == 0,
        loss_of_balance: i == 1,
        state_change: i == 2,
        env_change: i == 3,
    };
    let legged: Vec<_> = (0..4)
        .map(|i| select_strategy(one(i), AgentKind::Legged))
        .collect();
    let wheeled: Vec<_> = (0..4)
        .map(|i| select_strategy(one(i), AgentKind::Wheeled))
        .collect();
    assert_eq!(
        legged,
        vec![
            Some(Strategy::R2),
            Some(Strategy::R1),
            Some(Strategy::R3),
            Some(Strategy::R4)
        ]
    );
    assert_eq!(
        wheeled,
        vec![
            Some(Strategy::R2),
            None,
            Some(Strategy::R3),
            Some(Strategy::R4)
        ]
    );
}

#[test]
fn tick_path_ends_at_last_leaf() {
    let mut t = build_agent_tree(AgentKind::Wheeled);
    let mut bb = flagged(Flags {
        state_change: true,
        ..Default::default()
    });
    let mut path = Vec::new();
    t.tick(&mut bb, &mut path);
    assert_eq!(path.first().map(String::as_str), Some(ROOT));
    assert_eq!(path.last().map(String::as_str), Some(LOCAL_STATE_REALLOC));
}
