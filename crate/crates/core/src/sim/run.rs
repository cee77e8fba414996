//! The tick loop: behavior trees drive plan execution, disturbances fire
//! per schedule, and reallocations go through the planner.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::scenario::{Delivery, DisturbanceKind, Scenario, SchemaError, Trigger};
use super::trace::Trace;
use crate::bt::{build_agent_tree, names, AgentKind, Blackboard, Node, Status, Strategy};
use crate::ltl::{eval_word, Formula, PropSet};
use crate::models::{TransitionSystem, TsEdge, TsState};
use crate::realloc::{
    GlobalReallocRequest, LocalReallocRequest, LocalRequest, Planner, ReallocError, UpdateInfo,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Success,
    MissionInfeasible,
    /// Every plan ran out but the executed words do not satisfy the mission.
    Unsatisfied,
    TickBudgetExceeded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub triggered: u32,
    pub local_secs: Vec<f64>,
    pub global_secs: Vec<f64>,
}

/// Run summary. Wall-clock times live here and never in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub strategies: BTreeMap<Strategy, StrategyStats>,
    pub local_calls: u32,
    pub global_calls: u32,
    pub offline_secs: f64,
    pub mean_local_secs: Option<f64>,
    pub mean_global_secs: Option<f64>,
    pub success: bool,
    pub verdict: Verdict,
    pub makespan: u64,
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

impl Metrics {
    fn new(s: &Scenario) -> Self {
        Metrics {
            scenario: s.name.clone(),
            seed: s.seed,
            strategies: Strategy::ALL
                .into_iter()
                .map(|k| (k, StrategyStats::default()))
                .collect(),
            local_calls: 0,
            global_calls: 0,
            offline_secs: 0.0,
            mean_local_secs: None,
            mean_global_secs: None,
            success: false,
            verdict: Verdict::TickBudgetExceeded,
            makespan: 0,
        }
    }

    pub fn triggered(&self, s: Strategy) -> u32 {
        self.strategies.get(&s).map_or(0, |x| x.triggered)
    }

    pub fn all_local_secs(&self) -> Vec<f64> {
        self.strategies
            .values()
            .flat_map(|s| s.local_secs.iter().copied())
            .collect()
    }

    pub fn all_global_secs(&self) -> Vec<f64> {
        self.strategies
            .values()
            .flat_map(|s| s.global_secs.iter().copied())
            .collect()
    }

    fn finish(&mut self) {
        self.mean_local_secs = mean(&self.all_local_secs());
        self.mean_global_secs = mean(&self.all_global_secs());
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Check after every tick that each remaining plan is a path of the
    /// agent's current product.
    pub audit: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: Metrics,
    /// Remaining plans that were not product paths, as `(tick, agent)`.
    pub audit_failures: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    to: TsState,
    remaining: u32,
}

#[derive(Debug, Clone, Default)]
struct AgentRt {
    cursor: usize,
    motion: Option<Motion>,
    recovering: Option<u64>,
    loss_of_balance: bool,
    critical_failure: bool,
    jump: Option<TsState>,
    /// Delivered environmental changes awaiting R4.
    env: VecDeque<UpdateInfo>,
    /// Changes that exist but that the agent has not run into yet.
    undelivered: Vec<UpdateInfo>,
    last_bt: Option<(String, Status)>,
}

struct World<'s> {
    scn: &'s Scenario,
    phi: Formula,
    planner: Planner,
    kinds: Vec<AgentKind>,
    agents: Vec<AgentRt>,
    trace: Trace,
    metrics: Metrics,
    tick: u64,
    recovery_ticks: u64,
    /// Arrivals this tick, checked against `enters` triggers next tick.
    arrivals: Vec<(usize, String)>,
    fired: Vec<bool>,
    halt_all: bool,
    /// Agents whose trees lose their memory after this tick.
    resets: Vec<usize>,
    verdict: Option<Verdict>,
}

impl World<'_> {
    fn ts(&self, r: usize) -> &TransitionSystem {
        self.planner.team().pa(r).ts()
    }

    fn label_json(&self, r: usize, s: TsState) -> Vec<String> {
        self.ts(r).label(s).iter().cloned().collect()
    }

    fn queue_empty(&self, r: usize) -> bool {
        self.agents[r].cursor + 1 >= self.planner.plan(r).states.len()
    }

    fn dispatch(&mut self, r: usize) {
        let a = &mut self.agents[r];
        a.cursor = 0;
        a.motion = None;
        let d = self.planner.dispatch(r);
        self.trace.push(self.tick, Some(r), "dispatch", &d);
    }

    fn strategy(&mut self, r: usize, s: Strategy) {
        self.metrics.strategies.entry(s).or_default().triggered += 1;
        self.trace
            .push(self.tick, Some(r), "strategy", json!({ "name": s }));
    }

    /// Stop-the-world global reallocation requested by agent `r`.
    fn global(&mut self, r: usize, s: Option<Strategy>) -> bool {
        self.trace.push(
            self.tick,
            Some(r),
            "global_request",
            GlobalReallocRequest { agent: r },
        );
        for k in 0..self.agents.len() {
            if self.agents[k].motion.take().is_some() {
                self.trace.push(
                    self.tick,
                    Some(k),
                    "halt",
                    json!({ "at": self.ts(k).name(self.planner.history(k).current_ts()) }),
                );
            }
            // the planner authority knows every change already in effect
            let a = &mut self.agents[k];
            let pending: Vec<UpdateInfo> = a.undelivered.drain(..).chain(a.env.drain(..)).collect();
            for info in pending {
                self.planner
                    .apply_update(k, &info)
                    .expect("updates are validated when built");
                self.trace.push(self.tick, Some(k), "env_applied", &info);
            }
        }
        self.metrics.global_calls += 1;
        let started = Instant::now();
        let result = self.planner.global(self.tick);
        if let Some(s) = s {
            self.metrics
                .strategies
                .entry(s)
                .or_default()
                .global_secs
                .push(started.elapsed().as_secs_f64());
        }
        self.halt_all = true;
        match result {
            Ok((beta, report)) => {
                self.trace.push(
                    self.tick,
                    Some(r),
                    "global_result",
                    json!({ "cost": beta.cost, "xi": report.xi.len(), "decomposition_size": report.decomposition_size }),
                );
                for k in 0..self.agents.len() {
                    self.dispatch(k);
                }
                true
            }
            Err(e) => {
                self.trace.push(
                    self.tick,
                    Some(r),
                    "global_result",
                    json!({ "error": e.to_string() }),
                );
                self.verdict = Some(match e {
                    ReallocError::MissionInfeasible => Verdict::MissionInfeasible,
                    other => panic!("global reallocation failed: {other}"),
                });
                false
            }
        }
    }

    fn local_done(&mut self, s: Strategy, secs: f64) {
        self.metrics.local_calls += 1;
        self.metrics
            .strategies
            .entry(s)
            .or_default()
            .local_secs
            .push(secs);
    }

    fn handle_local<T>(
        &mut self,
        r: usize,
        s: Strategy,
        result: Result<T, ReallocError>,
        reused: impl Fn(&T) -> bool,
    ) -> Status {
        match result {
            Ok(out) => {
                self.trace.push(
                    self.tick,
                    Some(r),
                    "local_result",
                    json!({ "ok": true, "reused": reused(&out) }),
                );
                self.dispatch(r);
                self.resets.push(r);
                Status::Success
            }
            Err(e) if e.escalates() => {
                self.trace.push(
                    self.tick,
                    Some(r),
                    "local_result",
                    json!({ "ok": false, "error": e.to_string() }),
                );
                if self.global(r, Some(s)) {
                    Status::Success
                } else {
                    Status::Failure
                }
            }
            Err(e) => panic!("local reallocation failed: {e}"),
        }
    }

    fn fire(&mut self, i: usize) {
        let scn = self.scn;
        let d = &scn.disturbances[i];
        let agent = d.agent().and_then(|a| scn.agent_index(a));
        if let Some(r) = agent {
            if self.planner.is_failed(r) {
                self.trace.push(
                    self.tick,
                    Some(r),
                    "disturbance",
                    json!({ "index": i, "kind": d.label(), "ignored": "failed agent" }),
                );
                return;
            }
        }
        match &d.kind {
            DisturbanceKind::Fall { .. } => self.agents[agent.unwrap()].loss_of_balance = true,
            DisturbanceKind::CriticalFailure { .. } => {
                self.agents[agent.unwrap()].critical_failure = true
            }
            DisturbanceKind::StateJump { to, to_op, .. } => {
                let r = agent.unwrap();
                let ts = self.ts(r);
                let cur = self.planner.history(r).current_ts();
                let target = match (to, to_op) {
                    (Some(name), _) => ts.state(name),
                    (None, Some(op)) => ts.find(&ts.info(cur).location, op),
                    _ => None,
                };
                match target {
                    Some(t) if t != cur => self.agents[r].jump = Some(t),
                    _ => {
                        self.trace.push(
                            self.tick,
                            Some(r),
                            "disturbance",
                            json!({ "index": i, "kind": d.label(), "ignored": "no change" }),
                        );
                        return;
                    }
                }
            }
            DisturbanceKind::EnvChange {
                delete,
                add,
                relabel,
                unless_capability,
                agents,
                delivery,
            } => {
                for r in 0..self.agents.len() {
                    let spec = &scn.agents[r];
                    if !agents.is_empty() && !agents.contains(&spec.name) {
                        continue;
                    }
                    if unless_capability
                        .as_ref()
                        .is_some_and(|c| spec.tags().contains(c))
                    {
                        continue;
                    }
                    let info = location_update(self.ts(r), delete, add, relabel, self.tick);
                    if info.is_empty() {
                        continue;
                    }
                    if *delivery == Delivery::OnEncounter && !info.delete.is_empty() {
                        self.agents[r].undelivered.push(info);
                    } else {
                        self.agents[r].env.push_back(info);
                    }
                }
            }
        }
        self.trace.push(
            self.tick,
            agent,
            "disturbance",
            json!({ "index": i, "kind": d.label() }),
        );
    }

    fn fire_due(&mut self) {
        let arrivals = std::mem::take(&mut self.arrivals);
        for i in 0..self.scn.disturbances.len() {
            if self.fired[i] {
                continue;
            }
            let due = match &self.scn.disturbances[i].trigger {
                Trigger::At { at } => *at <= self.tick,
                Trigger::Enters { enters, agent } => {
                    let r = self.scn.agent_index(agent);
                    arrivals.iter().any(|(k, l)| Some(*k) == r && l == enters)
                }
            };
            if due {
                self.fired[i] = true;
                self.fire(i);
            }
        }
    }

    fn idle(&self, r: usize) -> bool {
        let a = &self.agents[r];
        self.planner.is_failed(r)
            || (self.queue_empty(r)
                && a.motion.is_none()
                && a.recovering.is_none()
                && !a.loss_of_balance
                && !a.critical_failure
                && a.jump.is_none()
                && a.env.is_empty())
    }

    fn check_done(&mut self) {
        if self.verdict.is_some() || !(0..self.agents.len()).all(|r| self.idle(r)) {
            return;
        }
        let word: Vec<PropSet> = self
            .planner
            .histories()
            .iter()
            .flat_map(|h| h.word.iter().cloned())
            .collect();
        self.verdict = Some(if eval_word(&self.phi, &word) {
            Verdict::Success
        } else {
            Verdict::Unsatisfied
        });
    }
}

/// Location-level change expanded to `ts`'s states.
fn location_update(
    ts: &TransitionSystem,
    delete: &[(String, String)],
    add: &[super::scenario::AddEdge],
    relabel: &[super::scenario::Relabel],
    tick: u64,
) -> UpdateInfo {
    let ops: Vec<String> = {
        let mut o: Vec<String> = ts.states().map(|s| ts.info(s).opstate.clone()).collect();
        o.sort();
        o.dedup();
        o
    };
    let mut info = UpdateInfo {
        t: tick,
        ..Default::default()
    };
    for (x, y) in delete {
        for op in &ops {
            if let (Some(a), Some(b)) = (ts.find(x, op), ts.find(y, op)) {
                if ts.edge(a, b).is_some() {
                    info.delete.push((a, b));
                }
            }
        }
    }
    for e in add {
        for op in &ops {
            if let (Some(a), Some(b)) = (ts.find(&e.from, op), ts.find(&e.to, op)) {
                if ts.edge(a, b).is_none() {
                    info.add.push((
                        a,
                        b,
                        TsEdge::new(format!("goto_{}", e.to), e.cost, e.duration),
                    ));
                }
            }
        }
    }
    for rl in relabel {
        if let Some(s) = ts.state(&rl.state) {
            info.relabel.push((rl.props.iter().cloned().collect(), s));
        }
    }
    info
}

struct Ctx<'w, 's> {
    w: &'w mut World<'s>,
    r: usize,
}

impl Blackboard for Ctx<'_, '_> {
    fn condition(&mut self, name: &str) -> bool {
        let r = self.r;
        let a = &self.w.agents[r];
        match name {
            names::NO_CRITICAL_FAILURE => !a.critical_failure,
            names::NO_LOCOMOTION_FAILURE => !a.loss_of_balance,
            names::NO_STATE_CHANGE => a.jump.is_none(),
            names::NO_ENV_CHANGE => a.env.is_empty(),
            names::CRITICAL_FAILURE => a.critical_failure,
            names::LOSS_OF_BALANCE => a.loss_of_balance,
            names::STATE_CHANGE => a.jump.is_some(),
            names::ENV_CHANGE => !a.env.is_empty(),
            names::PRECONDITION => {
                if self.w.planner.is_failed(r) || self.w.queue_empty(r) || a.motion.is_some() {
                    return true;
                }
                let plan = self.w.planner.plan(r);
                let (from, to) = (plan.states[a.cursor], plan.states[a.cursor + 1]);
                if let Some(i) = a
                    .undelivered
                    .iter()
                    .position(|u| u.delete.contains(&(from.t, to.t)))
                {
                    let info = self.w.agents[r].undelivered.remove(i);
                    let at = self.w.ts(r).name(from.t).to_string();
                    self.w
                        .trace
                        .push(self.w.tick, Some(r), "encounter", json!({ "at": at }));
                    self.w.agents[r].env.push_back(info);
                    return false;
                }
                self.w.planner.team().pa(r).has_edge(from, to)
            }
            _ => false,
        }
    }

    fn action(&mut self, name: &str) -> Status {
        let r = self.r;
        let w = &mut *self.w;
        match name {
            names::EXECUTE_ACTION => {
                if w.planner.is_failed(r) || w.queue_empty(r) {
                    return Status::Success;
                }
                let c = w.agents[r].cursor;
                let plan = w.planner.plan(r);
                let m = w.agents[r].motion.get_or_insert(Motion {
                    to: plan.states[c + 1].t,
                    remaining: plan.steps[c].duration.max(1),
                });
                m.remaining -= 1;
                if m.remaining == 0 {
                    Status::Success
                } else {
                    Status::Running
                }
            }
            names::ADVANCE => {
                let Some(m) = w.agents[r].motion else {
                    return Status::Success;
                };
                if m.remaining > 0 {
                    return Status::Running;
                }
                let from = w.planner.history(r).current_ts();
                let step = &w.planner.plan(r).steps[w.agents[r].cursor];
                let action = step.action.clone();
                let label = w.label_json(r, from);
                w.planner.advance(r, w.tick, m.to);
                let ts = w.ts(r);
                let (fname, tname) = (ts.name(from).to_string(), ts.name(m.to).to_string());
                let (floc, tloc) = (
                    ts.info(from).location.clone(),
                    ts.info(m.to).location.clone(),
                );
                w.trace.push(
                    w.tick,
                    Some(r),
                    "transition",
                    json!({ "from": fname, "to": tname, "action": action, "label": label }),
                );
                w.agents[r].cursor += 1;
                w.agents[r].motion = None;
                if floc != tloc {
                    w.arrivals.push((r, tloc));
                }
                Status::Success
            }
            names::RECOVERY_STAND => {
                let left = match w.agents[r].recovering {
                    Some(n) => n,
                    None => {
                        w.strategy(r, Strategy::R1);
                        w.recovery_ticks
                    }
                };
                let a = &mut w.agents[r];
                if left <= 1 {
                    a.recovering = None;
                    a.loss_of_balance = false;
                    w.trace.push(w.tick, Some(r), "recovered", json!({}));
                    Status::Success
                } else {
                    a.recovering = Some(left - 1);
                    Status::Running
                }
            }
            names::GLOBAL_REALLOC => {
                w.strategy(r, Strategy::R2);
                w.agents[r].critical_failure = false;
                w.agents[r].recovering = None;
                w.agents[r].loss_of_balance = false;
                w.agents[r].jump = None;
                w.planner.fail_agent(r).expect("agent exists");
                w.trace.push(w.tick, Some(r), "failed", json!({}));
                if w.global(r, Some(Strategy::R2)) {
                    Status::Success
                } else {
                    Status::Failure
                }
            }
            names::LOCAL_STATE_REALLOC => {
                w.strategy(r, Strategy::R3);
                let to = w.agents[r].jump.take().expect("guarded by the flag");
                w.agents[r].motion = None;
                let from = w.planner.history(r).current_ts();
                let label = w.label_json(r, from);
                let (fname, tname) = (w.ts(r).name(from).to_string(), w.ts(r).name(to).to_string());
                w.trace.push(
                    w.tick,
                    Some(r),
                    "jump",
                    json!({ "from": fname, "to": tname, "label": label }),
                );
                let req = LocalReallocRequest {
                    agent: r,
                    request: LocalRequest::StateChange { to },
                };
                w.trace.push(w.tick, Some(r), "local_request", &req);
                let started = Instant::now();
                let result = w.planner.local_state_change(r, w.tick, to);
                w.local_done(Strategy::R3, started.elapsed().as_secs_f64());
                w.handle_local(r, Strategy::R3, result, |o| o.reused)
            }
            names::LOCAL_ENV_REALLOC => {
                w.strategy(r, Strategy::R4);
                let info = w.agents[r].env.pop_front().expect("guarded by the flag");
                w.agents[r].motion = None;
                let req = LocalReallocRequest {
                    agent: r,
                    request: LocalRequest::EnvChange { info: info.clone() },
                };
                w.trace.push(w.tick, Some(r), "local_request", &req);
                let started = Instant::now();
                let result = w.planner.local_env_change(r, w.tick, &info);
                w.local_done(Strategy::R4, started.elapsed().as_secs_f64());
                w.handle_local(r, Strategy::R4, result, |o| o.reused)
            }
            _ => Status::Failure,
        }
    }

    fn done(&self) -> bool {
        self.w.queue_empty(self.r) && self.w.agents[self.r].motion.is_none()
    }
}

/// Plans that are not paths of the agent's current product.
fn audit(w: &World) -> Vec<usize> {
    (0..w.agents.len())
        .filter(|&r| {
            let plan = w.planner.plan(r);
            let pa = w.planner.team().pa(r);
            let from = w.agents[r].cursor.min(plan.states.len());
            !plan.states[from..]
                .windows(2)
                .all(|p| pa.has_edge(p[0], p[1]))
        })
        .collect()
}

/// Runs a scenario to its verdict.
pub fn run(scn: &Scenario) -> Result<RunOutput, SchemaError> {
    run_with(scn, RunOptions::default())
}

pub fn run_with(scn: &Scenario, opts: RunOptions) -> Result<RunOutput, SchemaError> {
    scn.validate()?;
    let tss = scn.transition_systems()?;
    let nfa = scn.automaton(&tss)?;
    let phi = scn.formula()?;
    let mut metrics = Metrics::new(scn);
    let mut trace = Trace::default();
    let n = scn.agents.len();
    trace.push(
        0,
        None,
        "start",
        json!({ "scenario": scn.name, "agents": n, "seed": scn.seed }),
    );
    let planner = match Planner::offline(nfa, tss) {
        Ok(p) => p,
        Err(ReallocError::MissionInfeasible) => {
            trace.push(
                0,
                None,
                "verdict",
                json!({ "verdict": Verdict::MissionInfeasible, "makespan": 0 }),
            );
            metrics.verdict = Verdict::MissionInfeasible;
            metrics.finish();
            return Ok(RunOutput {
                trace,
                metrics,
                audit_failures: vec![],
            });
        }
        Err(e) => return Err(SchemaError::new("", e.to_string())),
    };
    metrics.offline_secs = planner.stats.offline_secs;
    trace.push(
        0,
        None,
        "offline_plan",
        json!({ "cost": planner.offline_path().cost }),
    );
    let mut w = World {
        scn,
        phi,
        planner,
        kinds: scn.agents.iter().map(|a| a.kind).collect(),
        agents: vec![AgentRt::default(); n],
        trace,
        metrics,
        tick: 0,
        recovery_ticks: scn.recovery_ticks(),
        arrivals: Vec::new(),
        fired: vec![false; scn.disturbances.len()],
        halt_all: false,
        resets: Vec::new(),
        verdict: None,
    };
    for r in 0..n {
        w.dispatch(r);
    }
    let mut trees: Vec<Node> = w.kinds.iter().map(|&k| build_agent_tree(k)).collect();
    let mut audit_failures = Vec::new();
    w.check_done();
    while w.verdict.is_none() {
        w.tick += 1;
        if w.tick > scn.tick_budget {
            w.verdict = Some(Verdict::TickBudgetExceeded);
            break;
        }
        w.fire_due();
        for r in 0..n {
            let mut path = Vec::new();
            let status = trees[r].tick(&mut Ctx { w: &mut w, r }, &mut path);
            if status == Status::Failure && w.verdict.is_none() {
                // nothing handled the failure: escalate
                w.trace.push(
                    w.tick,
                    Some(r),
                    "unhandled",
                    json!({ "path": path.join("/") }),
                );
                w.global(r, None);
            }
            let leaf = path.join("/");
            if w.agents[r].last_bt.as_ref() != Some(&(leaf.clone(), status)) {
                w.trace.push(
                    w.tick,
                    Some(r),
                    "bt",
                    json!({ "path": leaf, "status": status }),
                );
                w.agents[r].last_bt = Some((leaf, status));
            }
            if w.halt_all {
                w.halt_all = false;
                trees.iter_mut().for_each(Node::reset);
            }
            for k in std::mem::take(&mut w.resets) {
                trees[k].reset();
            }
            if w.verdict.is_some() {
                break;
            }
        }
        if opts.audit {
            audit_failures.extend(audit(&w).into_iter().map(|r| (w.tick, r)));
        }
        w.check_done();
    }
    let verdict = w.verdict.expect("loop exits with a verdict");
    w.metrics.verdict = verdict;
    w.metrics.success = verdict == Verdict::Success;
    w.metrics.makespan = w.tick;
    w.metrics.finish();
    w.trace.push(
        w.tick,
        None,
        "verdict",
        json!({ "verdict": verdict, "makespan": w.tick }),
    );
    Ok(RunOutput {
        trace: w.trace,
        metrics: w.metrics,
        audit_failures,
    })
}
