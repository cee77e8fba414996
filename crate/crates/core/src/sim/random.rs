//! Randomized disturbance batches drawn from the scenario seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{run, RunOutput};
use super::scenario::{
    AddEdge, Delivery, Disturbance, DisturbanceKind, Relabel, Scenario, SchemaError, Trigger,
};
use crate::bt::AgentKind;
use crate::models::Cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomKind {
    Fall,
    CriticalFailure,
    StateJump,
    EnvChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub kinds: Vec<RandomKind>,
    pub per_trial: usize,
    /// Last tick a disturbance may fire at; defaults to the makespan of a
    /// disturbance-free run.
    pub horizon: Option<u64>,
    /// Jumps go to any TS state instead of another operating state at the
    /// same location.
    pub jump_anywhere: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            kinds: vec![
                RandomKind::Fall,
                RandomKind::CriticalFailure,
                RandomKind::StateJump,
                RandomKind::EnvChange,
            ],
            per_trial: 4,
            horizon: None,
            jump_anywhere: false,
        }
    }
}

/// Draws `spec.per_trial` events uniformly over eligible
/// `(kind, agent, tick)` triples.
pub fn random_disturbances(
    scn: &Scenario,
    spec: &RandomSpec,
    horizon: u64,
    rng: &mut impl Rng,
) -> Vec<Disturbance> {
    let mut pairs = Vec::new();
    for &k in &spec.kinds {
        for (r, a) in scn.agents.iter().enumerate() {
            if k == RandomKind::Fall && a.kind != AgentKind::Legged {
                continue;
            }
            pairs.push((k, r));
        }
    }
    if pairs.is_empty() {
        return Vec::new();
    }
    let tss = scn.transition_systems().expect("validated scenario");
    let mut out = Vec::new();
    for _ in 0..spec.per_trial {
        let (k, r) = *pairs.choose(rng).expect("non-empty");
        let at = rng.gen_range(1..=horizon.max(1));
        let agent = scn.agents[r].name.clone();
        let kind = match k {
            RandomKind::Fall => DisturbanceKind::Fall { agent },
            RandomKind::CriticalFailure => DisturbanceKind::CriticalFailure { agent },
            RandomKind::StateJump if spec.jump_anywhere => {
                let ts = &tss[r];
                let s = rng.gen_range(0..ts.num_states());
                let name = ts.states().nth(s).map(|s| ts.name(s).to_string());
                DisturbanceKind::StateJump {
                    agent,
                    to: name,
                    to_op: None,
                }
            }
            RandomKind::StateJump => {
                let ops = &scn.opsms[&scn.agents[r].opsm].states;
                DisturbanceKind::StateJump {
                    agent,
                    to: None,
                    to_op: ops.choose(rng).cloned(),
                }
            }
            RandomKind::EnvChange => random_env(scn, &tss[r], agent, rng),
        };
        out.push(Disturbance {
            trigger: Trigger::At { at },
            kind,
        });
    }
    out.sort_by_key(|d| match d.trigger {
        Trigger::At { at } => at,
        Trigger::Enters { .. } => 0,
    });
    out
}

fn random_env(
    scn: &Scenario,
    ts: &crate::models::TransitionSystem,
    agent: String,
    rng: &mut impl Rng,
) -> DisturbanceKind {
    let locs = &scn.map.locations;
    let env = |delete, add, relabel, delivery| DisturbanceKind::EnvChange {
        delete,
        add,
        relabel,
        unless_capability: None,
        agents: vec![agent.clone()],
        delivery,
    };
    match rng.gen_range(0..3) {
        0 if !scn.map.edges.is_empty() => {
            let e = scn.map.edges.choose(rng).expect("non-empty");
            env(
                vec![
                    (e.from.clone(), e.to.clone()),
                    (e.to.clone(), e.from.clone()),
                ],
                vec![],
                vec![],
                Delivery::OnEncounter,
            )
        }
        1 => {
            let a = locs.choose(rng).expect("locations").clone();
            let b = locs.choose(rng).expect("locations").clone();
            let add = vec![
                AddEdge {
                    from: a.clone(),
                    to: b.clone(),
                    cost: Cost::ONE,
                    duration: 1,
                },
                AddEdge {
                    from: b,
                    to: a,
                    cost: Cost::ONE,
                    duration: 1,
                },
            ];
            env(vec![], add, vec![], Delivery::Immediate)
        }
        _ => {
            let n = ts.num_states();
            let s = ts.states().nth(rng.gen_range(0..n)).expect("in range");
            let donor = ts.states().nth(rng.gen_range(0..n)).expect("in range");
            let relabel = vec![Relabel {
                state: ts.name(s).to_string(),
                props: ts.label(donor).iter().cloned().collect(),
            }];
            env(vec![], vec![], relabel, Delivery::Immediate)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub scenario: Scenario,
    pub output: RunOutput,
}

/// `trials` runs of `scn` with its schedule replaced by random draws. Trial
/// `i` uses the stream seeded by `(scn.seed, i)`.
pub fn random_trials(
    scn: &Scenario,
    spec: &RandomSpec,
    trials: usize,
) -> Result<Vec<Trial>, SchemaError> {
    let horizon = match spec.horizon {
        Some(h) => h,
        None => {
            let mut clean = scn.clone();
            clean.disturbances.clear();
            run(&clean)?.metrics.makespan
        }
    };
    (0..trials)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
            rng.set_stream(i as u64);
            let mut s = scn.clone();
            s.disturbances = random_disturbances(scn, spec, horizon, &mut rng);
            let output = run(&s)?;
            Ok(Trial {
                scenario: s,
                output,
            })
        })
        .collect()
}
