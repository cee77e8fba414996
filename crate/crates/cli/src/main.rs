//! `stap`: translate formulas, plan, simulate, verify traces and report.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use stap_core::ltl::{build_nfa, parse, powerset};
use stap_core::realloc::{Planner, ReallocError};
use stap_core::sim::{
    bench, linear_fit, load_scenario, random_trials, render_bench, render_bench_csv, render_table,
    run_with, verify_trace, Metrics, RandomKind, RandomSpec, RunOptions, Scenario, Trace, Verdict,
};

#[derive(Parser)]
#[command(
    name = "stap",
    version,
    about = "Task allocation and planning for robot teams under a finite-LTL mission"
)]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Translate a formula and list the automaton states.
    Translate {
        formula: String,
        /// Also list the transitions for every letter over the formula's
        /// propositions.
        #[arg(long)]
        letters: bool,
    },
    /// Offline allocation; prints each agent's plan.
    Plan { scenario: PathBuf },
    /// Run a scenario, or a batch of randomized trials with `--trials`.
    Simulate {
        scenario: PathBuf,
        /// Write the JSONL trace here (single runs only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write metrics JSON here.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Replace the schedule with this many randomized trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Disturbance kinds drawn in randomized trials.
        #[arg(long, value_delimiter = ',', default_values_t = [Kind::Fall, Kind::CriticalFailure, Kind::StateJump, Kind::EnvChange])]
        kinds: Vec<Kind>,
        /// Disturbances per randomized trial.
        #[arg(long, default_value_t = 4)]
        per_trial: usize,
        /// Last tick a random disturbance may fire at.
        #[arg(long)]
        horizon: Option<u64>,
        /// Random state jumps may land on any TS state.
        #[arg(long)]
        jump_anywhere: bool,
        /// Check after every tick that plans are paths of the current products.
        #[arg(long)]
        audit: bool,
    },
    /// Check a trace against a formula.
    Verify { trace: PathBuf, formula: String },
    /// Planning time against team size.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 9, 15, 30])]
        agents: Vec<usize>,
        #[arg(long, default_value = "scenarios/hospital.json")]
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// CSV rows instead of the table.
        #[arg(long)]
        csv: bool,
    },
    /// Strategy table over metrics files written by `simulate --metrics`.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Fall,
    CriticalFailure,
    StateJump,
    EnvChange,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(
            self.to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        )
    }
}

impl From<Kind> for RandomKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Fall => RandomKind::Fall,
            Kind::CriticalFailure => RandomKind::CriticalFailure,
            Kind::StateJump => RandomKind::StateJump,
            Kind::EnvChange => RandomKind::EnvChange,
        }
    }
}

/// Usage, schema and I/O errors; exit code 2.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type Outcome = Result<bool, UsageError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    let result = match cli.cmd {
        Cmd::Translate { formula, letters } => translate(&formula, letters, json),
        Cmd::Plan { scenario } => plan(&scenario, json),
        Cmd::Simulate {
            scenario,
            trace,
            metrics,
            trials,
            kinds,
            per_trial,
            horizon,
            jump_anywhere,
            audit,
        } => {
            let spec = RandomSpec {
                kinds: kinds.into_iter().map(Into::into).collect(),
                per_trial,
                horizon,
                jump_anywhere,
            };
            simulate(
                &scenario,
                trace.as_deref(),
                metrics.as_deref(),
                trials.map(|n| (n, spec)),
                audit,
                json,
            )
        }
        Cmd::Verify { trace, formula } => verify(&trace, &formula, json),
        Cmd::Bench {
            agents,
            scenario,
            reps,
            csv,
        } => bench_cmd(&scenario, &agents, reps, csv, json),
        Cmd::Report { metrics } => report(&metrics, json),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), UsageError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Loads a scenario; `STAP_SEED` overrides its seed.
fn scenario(path: &Path) -> Result<Scenario, UsageError> {
    let mut s = load_scenario(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    if let Ok(seed) = std::env::var("STAP_SEED") {
        s.seed = seed
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("STAP_SEED is not an integer: {seed:?}")))?;
    }
    Ok(s)
}

fn translate(text: &str, with_letters: bool, json: bool) -> Outcome {
    let f = parse(text)?;
    let props = f.props();
    if props.len() > 16 {
        return Err(UsageError(format!(
            "{} propositions; at most 16 can be enumerated",
            props.len()
        )));
    }
    let names: Vec<&str> = props.iter().map(String::as_str).collect();
    let nfa = build_nfa(&f, &powerset(&names))?;
    let q0 = nfa.initial_state();
    let states: Vec<Value> = nfa
        .states()
        .into_iter()
        .map(|q| {
            json!({
                "id": q.0,
                "formula": nfa.state_formula(q).to_string(),
                "initial": q == q0,
                "accepting": nfa.is_accepting(q),
            })
        })
        .collect();
    let edges: Vec<Value> = nfa
        .transitions()
        .into_iter()
        .map(|(q, a, t)| json!({ "from": q.0, "letter": nfa.letter_props(a), "to": t.0 }))
        .collect();
    if json {
        let mut v = json!({ "props": props, "states": states });
        if with_letters {
            v["edges"] = Value::Array(edges);
        }
        print_json(&v)?;
        return Ok(true);
    }
    println!("{} states over {{{}}}", states.len(), names.join(", "));
    for s in &states {
        let mut tags = Vec::new();
        if s["initial"] == true {
            tags.push("initial");
        }
        if s["accepting"] == true {
            tags.push("accepting");
        }
        let tags = if tags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", tags.join(", "))
        };
        println!(
            "q{}{tags}: {}",
            s["id"],
            s["formula"].as_str().unwrap_or_default()
        );
    }
    if with_letters {
        for (q, a, t) in nfa.transitions() {
            println!("q{} --{}--> q{}", q.0, nfa.letter_props(a), t.0);
        }
    }
    Ok(true)
}

fn plan(path: &Path, json: bool) -> Outcome {
    let s = scenario(path)?;
    let tss = s.transition_systems()?;
    let nfa = s.automaton(&tss)?;
    let planner = match Planner::offline(nfa, tss) {
        Ok(p) => p,
        Err(ReallocError::MissionInfeasible) => {
            if json {
                print_json(&json!({ "verdict": Verdict::MissionInfeasible }))?;
            } else {
                println!("MissionInfeasible");
            }
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let plans: Vec<Value> = planner
        .plans()
        .iter()
        .map(|p| {
            let ts = planner.team().pa(p.agent).ts();
            json!({
                "agent": p.agent,
                "name": s.agents[p.agent].name,
                "actions": p.steps.iter().map(|st| st.action.as_str()).collect::<Vec<_>>(),
                "states": p.states.iter().map(|x| ts.name(x.t)).collect::<Vec<_>>(),
                "cost": p.steps.iter().map(|st| st.cost.as_f64()).sum::<f64>(),
            })
        })
        .collect();
    let cost = planner.offline_path().cost.as_f64();
    if json {
        print_json(&json!({ "cost": cost, "plans": plans }))?;
    } else {
        println!("team plan cost {cost}");
        for p in &plans {
            let actions: Vec<&str> = p["actions"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
                .collect();
            let body = if actions.is_empty() {
                "(idle)".to_string()
            } else {
                actions.join(" ")
            };
            println!(
                "{} (cost {}): {body}",
                p["name"].as_str().unwrap_or_default(),
                p["cost"]
            );
        }
    }
    Ok(true)
}

fn write_metrics(path: &Path, v: &impl serde::Serialize) -> Result<(), UsageError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn simulate(
    path: &Path,
    trace_out: Option<&Path>,
    metrics_out: Option<&Path>,
    trials: Option<(usize, RandomSpec)>,
    audit: bool,
    json: bool,
) -> Outcome {
    let s = scenario(path)?;
    if let Some((n, spec)) = trials {
        if trace_out.is_some() {
            return Err(UsageError(
                "--trace applies to single runs, not --trials".into(),
            ));
        }
        let runs: Vec<Metrics> = random_trials(&s, &spec, n)?
            .into_iter()
            .map(|t| t.output.metrics)
            .collect();
        if let Some(p) = metrics_out {
            write_metrics(p, &runs)?;
        }
        if json {
            print_json(&runs)?;
        } else {
            print!("{}", render_table(&runs));
        }
        return Ok(true);
    }
    let out = run_with(&s, RunOptions { audit })?;
    if let Some(p) = trace_out {
        let mut w = BufWriter::new(File::create(p)?);
        out.trace.write_jsonl(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = metrics_out {
        write_metrics(p, &out.metrics)?;
    }
    let m = &out.metrics;
    if json {
        print_json(m)?;
    } else {
        println!("{}: {:?} at tick {}", s.name, m.verdict, m.makespan);
        println!(
            "local reallocations {}, global reallocations {}",
            m.local_calls, m.global_calls
        );
        for (k, st) in &m.strategies {
            if st.triggered > 0 {
                println!("{k:?} triggered {}", st.triggered);
            }
        }
    }
    if !out.audit_failures.is_empty() {
        eprintln!("audit: plans left the product at {:?}", out.audit_failures);
        return Ok(false);
    }
    Ok(m.verdict == Verdict::Success)
}

fn verify(path: &Path, text: &str, json: bool) -> Outcome {
    let phi = parse(text)?;
    let trace = Trace::read_jsonl(BufReader::new(File::open(path)?))?;
    let ok = verify_trace(&trace, &phi);
    if json {
        print_json(&json!({ "satisfied": ok }))?;
    } else {
        println!("{ok}");
    }
    Ok(ok)
}

fn bench_cmd(path: &Path, sizes: &[usize], reps: usize, csv: bool, json: bool) -> Outcome {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(UsageError("--agents needs positive team sizes".into()));
    }
    let s = scenario(path)?;
    let rows = bench(&s, sizes, reps)?;
    if json {
        let xs: Vec<f64> = rows.iter().map(|r| r.agents as f64).collect();
        let offline = linear_fit(
            &xs,
            &rows.iter().map(|r| r.offline_secs).collect::<Vec<_>>(),
        );
        let global = linear_fit(&xs, &rows.iter().map(|r| r.global_secs).collect::<Vec<_>>());
        print_json(&json!({ "rows": rows, "offline_fit": offline, "global_fit": global }))?;
    } else if csv {
        print!("{}", render_bench_csv(&rows));
    } else {
        print!("{}", render_bench(&rows));
    }
    Ok(true)
}

/// A metrics file holds one object or an array of them.
fn read_metrics(path: &Path) -> Result<Vec<Metrics>, UsageError> {
    let v: Value = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let parsed = match v {
        Value::Array(_) => serde_json::from_value(v),
        v => serde_json::from_value(v).map(|m| vec![m]),
    };
    parsed.map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn report(paths: &[PathBuf], json: bool) -> Outcome {
    let mut runs = Vec::new();
    for p in paths {
        runs.extend(read_metrics(p)?);
    }
    if json {
        print_json(&runs)?;
    } else {
        print!("{}", render_table(&runs));
    }
    Ok(true)
}
