//! Table and scaling reports.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::run::Metrics;
use super::scenario::{AgentSpec, Scenario, SchemaError};
use crate::bt::{AgentKind, Strategy};
use crate::ltl::Nfa;
use crate::models::{TransitionSystem, TsState};
use crate::realloc::Planner;

/// Reference counts and mean times (s) over ten trials, in strategy order
/// R1..R4; `None` where the strategy has no such time.
pub const REFERENCE_TRIGGERED: [u32; 4] = [18, 13, 10, 16];
pub const REFERENCE_LOCAL_SECS: [Option<f64>; 4] = [None, None, Some(0.023), Some(0.018)];
pub const REFERENCE_GLOBAL_SECS: [Option<f64>; 4] = [None, Some(3.31), Some(2.93), Some(3.42)];

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Triggered counts and mean local/global times per strategy over all
/// runs, with the reference values underneath.
pub fn render_table(runs: &[Metrics]) -> String {
    let mut counts = [0u32; 4];
    let mut local = vec![Vec::new(); 4];
    let mut global = vec![Vec::new(); 4];
    for m in runs {
        for s in Strategy::ALL {
            if let Some(st) = m.strategies.get(&s) {
                counts[s.index()] += st.triggered;
                local[s.index()].extend(&st.local_secs);
                global[s.index()].extend(&st.global_secs);
            }
        }
    }
    let mut out = String::new();
    let row = |out: &mut String, name: &str, cells: [String; 4]| {
        let _ = writeln!(
            out,
            "{name:<30}{:>10}{:>10}{:>10}{:>10}",
            cells[0], cells[1], cells[2], cells[3]
        );
    };
    row(
        &mut out,
        "",
        ["R1".into(), "R2".into(), "R3".into(), "R4".into()],
    );
    row(&mut out, "Triggered times", counts.map(|c| c.to_string()));
    row(
        &mut out,
        "Local reallocation time (s)",
        [0, 1, 2, 3].map(|i| cell(mean(&local[i]))),
    );
    row(
        &mut out,
        "Global reallocation time (s)",
        [0, 1, 2, 3].map(|i| cell(mean(&global[i]))),
    );
    let ok = runs.iter().filter(|m| m.success).count();
    let _ = writeln!(out, "Mission success: {ok}/{}", runs.len());
    let _ = writeln!(out, "\nreference (10 trials, for comparison only)");
    row(
        &mut out,
        "Triggered times",
        REFERENCE_TRIGGERED.map(|c| c.to_string()),
    );
    row(
        &mut out,
        "Local reallocation time (s)",
        REFERENCE_LOCAL_SECS.map(cell),
    );
    row(
        &mut out,
        "Global reallocation time (s)",
        REFERENCE_GLOBAL_SECS.map(cell),
    );
    out
}

/// `n` agents cycling through the scenario's agents; the schedule is
/// dropped.
pub fn replicate(scn: &Scenario, n: usize) -> Scenario {
    let mut s = scn.clone();
    s.disturbances.clear();
    s.agents = (0..n)
        .map(|i| {
            let base = &scn.agents[i % scn.agents.len()];
            let round = i / scn.agents.len();
            AgentSpec {
                name: if round == 0 {
                    base.name.clone()
                } else {
                    format!("{}_{round}", base.name)
                },
                ..base.clone()
            }
        })
        .collect();
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub agents: usize,
    pub offline_secs: f64,
    pub local_secs: f64,
    pub global_secs: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// The agent disturbed in the bench: the first wheeled delivery robot with
/// work, else the first agent with work.
fn bench_agent(scn: &Scenario, p: &Planner) -> Option<usize> {
    let busy = |r: &usize| !p.plan(*r).is_empty();
    let delivery = (0..scn.agents.len()).filter(busy).find(|&r| {
        scn.agents[r].kind == AgentKind::Wheeled
            && scn.agents[r].capabilities.iter().any(|c| c == "delivery")
    });
    delivery.or_else(|| (0..scn.agents.len()).find(busy))
}

struct BenchCase {
    scn: Scenario,
    nfa: Arc<Nfa>,
    tss: Vec<TransitionSystem>,
    /// Planner after the disturbed agent's first step, the agent, and
    /// where it jumps to.
    after_step: Option<(Planner, usize, TsState)>,
    offline: Vec<f64>,
    local: Vec<f64>,
    global: Vec<f64>,
}

/// For each team size: median offline allocation time (automaton built
/// beforehand), then on the resulting plans one state jump of a delivery
/// robot (local) and its critical failure (global). Repetitions run
/// round-robin over the sizes so slow stretches of the host hit all of them.
pub fn bench(scn: &Scenario, sizes: &[usize], reps: usize) -> Result<Vec<BenchRow>, SchemaError> {
    let reps = reps.max(1);
    let mut cases = Vec::new();
    for &n in sizes {
        let s = replicate(scn, n);
        let tss = s.transition_systems()?;
        let nfa = s.automaton(&tss)?;
        cases.push(BenchCase {
            scn: s,
            nfa,
            tss,
            after_step: None,
            offline: Vec::new(),
            local: Vec::new(),
            global: Vec::new(),
        });
    }
    for _ in 0..reps {
        for case in &mut cases {
            let nfa = case.nfa.clone();
            let tss = case.tss.clone();
            let started = Instant::now();
            let p = Planner::offline(nfa, tss).map_err(|e| SchemaError::new("", e.to_string()))?;
            case.offline.push(started.elapsed().as_secs_f64());
            if case.after_step.is_none() {
                case.after_step = Some(first_step(&case.scn, p)?);
            }
        }
    }
    for _ in 0..reps {
        for case in &mut cases {
            let (p, r, jump) = case.after_step.as_ref().expect("reps >= 1");
            let mut q = p.clone();
            let started = Instant::now();
            let _ = q.local_state_change(*r, 2, *jump);
            case.local.push(started.elapsed().as_secs_f64());
            let mut q = p.clone();
            let started = Instant::now();
            q.fail_agent(*r).expect("agent exists");
            let _ = q.global(2);
            case.global.push(started.elapsed().as_secs_f64());
        }
    }
    Ok(cases
        .into_iter()
        .zip(sizes)
        .map(|(c, &n)| BenchRow {
            agents: n,
            offline_secs: median(c.offline),
            local_secs: median(c.local),
            global_secs: median(c.global),
        })
        .collect())
}

/// Advances the bench agent one step and picks a jump target off its plan.
fn first_step(s: &Scenario, mut p: Planner) -> Result<(Planner, usize, TsState), SchemaError> {
    let r = bench_agent(s, &p).ok_or_else(|| SchemaError::new("agents", "no agent has work"))?;
    let plan = p.plan(r).clone();
    p.advance(r, 1, plan.states[1].t);
    let back = plan.states[0].t;
    let jump = if back != plan.states[1].t {
        back
    } else {
        p.team()
            .pa(r)
            .ts()
            .states()
            .find(|&t| t != back)
            .unwrap_or(back)
    };
    Ok((p, r, jump))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    LinearFit {
        slope,
        intercept,
        r2,
    }
}

pub fn render_bench(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6}{:>14}{:>14}{:>14}",
        "N", "offline (s)", "local (s)", "global (s)"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>6}{:>14.6}{:>14.6}{:>14.6}",
            r.agents, r.offline_secs, r.local_secs, r.global_secs
        );
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.agents as f64).collect();
    let f = linear_fit(
        &xs,
        &rows.iter().map(|r| r.offline_secs).collect::<Vec<_>>(),
    );
    let g = linear_fit(&xs, &rows.iter().map(|r| r.global_secs).collect::<Vec<_>>());
    let _ = writeln!(
        out,
        "offline fit: {:.6} s/agent + {:.6} s, R^2 = {:.4}",
        f.slope, f.intercept, f.r2
    );
    let _ = writeln!(
        out,
        "global fit:  {:.6} s/agent + {:.6} s, R^2 = {:.4}",
        g.slope, g.intercept, g.r2
    );
    out
}

pub fn render_bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let f = linear_fit(&[3.0, 9.0, 15.0, 30.0], &[1.0, 3.0, 5.0, 10.0]);
        assert!((f.slope - 1.0 / 3.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        // y = x^2 on 1..4: sxy = 25, sxx = 5, syy = 129
        let g = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]);
        assert!((g.slope - 5.0).abs() < 1e-12);
        assert!((g.r2 - 625.0 / (5.0 * 129.0)).abs() < 1e-12);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn table_shows_dash_for_missing_times() {
        let m: Metrics = serde_json::from_value(serde_json::json!({
            "scenario": "x", "seed": 0,
            "strategies": {
                "R1": {"triggered": 2, "local_secs": [], "global_secs": []},
                "R3": {"triggered": 1, "local_secs": [0.5], "global_secs": []}
            },
            "local_calls": 1, "global_calls": 0, "offline_secs": 0.1,
            "mean_local_secs": 0.5, "mean_global_secs": null,
            "success": true, "verdict": "success", "makespan": 10
        }))
        .unwrap();
        let t = render_table(&[m]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[1]
            .split_whitespace()
            .eq(["Triggered", "times", "2", "0", "1", "0"]));
        assert!(lines[2].split_whitespace().eq([
            "Local",
            "reallocation",
            "time",
            "(s)",
            "-",
            "-",
            "0.5000",
            "-"
        ]));
        assert!(lines[3].ends_with("-"));
        assert!(t.contains("3.31"));
        assert!(t.contains("Mission success: 1/1"));
    }

    #[test]
    fn csv_has_header() {
        let rows = [BenchRow {
            agents: 3,
            offline_secs: 1.0,
            local_secs: 0.1,
            global_secs: 0.5,
        }];
        let text = render_bench_csv(&rows);
        assert_eq!(
            text.lines().next(),
            Some("agents,offline_secs,local_secs,global_secs")
        );
    }
}
