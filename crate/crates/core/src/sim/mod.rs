//! Deterministic tick-driven simulation of a robot team, with scripted or
//! randomized disturbances, trace logging, the global-word check and
//! reporting.

mod random;
mod report;
mod run;
mod scenario;
mod trace;

pub use random::{random_disturbances, random_trials, RandomKind, RandomSpec, Trial};
pub use report::{
    bench, linear_fit, render_bench, render_bench_csv, render_table, replicate, BenchRow,
    LinearFit, REFERENCE_GLOBAL_SECS, REFERENCE_LOCAL_SECS, REFERENCE_TRIGGERED,
};
pub use run::{run, run_with, Metrics, RunOptions, RunOutput, StrategyStats, Verdict};
pub use scenario::{
    load_scenario, parse_scenario, AddEdge, AgentSpec, Delivery, Disturbance, DisturbanceKind,
    Relabel, Scenario, SchemaError, Trigger, NFA_CAP,
};
pub use trace::{agent_words, completion_order, verify_trace, verify_words, Event, Trace};
