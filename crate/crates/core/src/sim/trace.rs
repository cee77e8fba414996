//! Append-only event log and the global-word check.

use std::io::{self, BufRead, Write};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ltl::{eval_word, Formula, PropSet};

/// Events whose payload carries a consumed `label`.
pub const CONSUMING: [&str; 2] = ["transition", "jump"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    pub event: String,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn push(&mut self, t: u64, agent: Option<usize>, event: &str, payload: impl Serialize) {
        debug_assert!(self.events.last().is_none_or(|e| e.t <= t));
        let payload = serde_json::to_value(payload).expect("trace payloads serialize");
        self.events.push(Event {
            t,
            agent,
            event: event.into(),
            payload,
        });
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> io::Result<Trace> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(io::Error::other)?);
        }
        Ok(Trace { events })
    }

    pub fn count(&self, event: &str) -> usize {
        self.events.iter().filter(|e| e.event == event).count()
    }

    /// Number of agents: from the `start` event, else the largest index
    /// seen.
    pub fn num_agents(&self) -> usize {
        let declared = self
            .events
            .iter()
            .find(|e| e.event == "start")
            .and_then(|e| e.payload.get("agents"))
            .and_then(Value::as_u64);
        match declared {
            Some(n) => n as usize,
            None => self
                .events
                .iter()
                .filter_map(|e| e.agent)
                .max()
                .map_or(0, |m| m + 1),
        }
    }
}

/// Each agent's executed word with the tick of its last letter.
pub fn agent_words(trace: &Trace) -> Vec<(Vec<PropSet>, Option<u64>)> {
    let mut out = vec![(Vec::new(), None); trace.num_agents()];
    for e in &trace.events {
        let Some(r) = e.agent else { continue };
        if !CONSUMING.contains(&e.event.as_str()) {
            continue;
        }
        let label: PropSet = e
            .payload
            .get("label")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if r >= out.len() {
            out.resize(r + 1, (Vec::new(), None));
        }
        out[r].0.push(label);
        out[r].1 = Some(e.t);
    }
    out
}

/// Agent order by completion of their last letter; agents that never moved
/// come first, ties by index.
pub fn completion_order(words: &[(Vec<PropSet>, Option<u64>)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by_key(|&r| (words[r].1, r));
    order
}

fn concat(words: &[(Vec<PropSet>, Option<u64>)], order: &[usize]) -> Vec<PropSet> {
    order
        .iter()
        .flat_map(|&r| words[r].0.iter().cloned())
        .collect()
}

/// True iff the agents' executed words satisfy `phi` concatenated in
/// completion order and, for up to `max_perm_agents` agents, in every order.
pub fn verify_words(
    words: &[(Vec<PropSet>, Option<u64>)],
    phi: &Formula,
    max_perm_agents: usize,
) -> bool {
    if !eval_word(phi, &concat(words, &completion_order(words))) {
        return false;
    }
    let n = words.len();
    if n > max_perm_agents {
        return true;
    }
    (0..n)
        .permutations(n)
        .all(|p| eval_word(phi, &concat(words, &p)))
}

/// The global-word check on a trace, with all permutations for `N <= 4`.
pub fn verify_trace(trace: &Trace, phi: &Formula) -> bool {
    verify_words(&agent_words(trace), phi, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;
    use serde_json::json;

    fn step(t: u64, r: usize, label: &[&str]) -> Event {
        Event {
            t,
            agent: Some(r),
            event: "transition".into(),
            payload: json!({ "label": label }),
        }
    }

    #[test]
    fn words_and_verification() {
        let phi = parse("<>a && <>b").unwrap();
        let mut tr = Trace::default();
        tr.push(0, None, "start", json!({ "agents": 2 }));
        tr.events.push(step(1, 1, &["b"]));
        tr.events.push(step(2, 1, &["a"]));
        assert!(verify_trace(&tr, &phi));
        let w = agent_words(&tr);
        assert_eq!(w[0].0.len(), 0);
        assert_eq!(w[1].1, Some(2));
        // cut before b was visited
        let truncated = Trace {
            events: tr.events[..1].to_vec(),
        };
        assert!(!verify_trace(&truncated, &phi));
    }

    #[test]
    fn permutations_are_checked() {
        // a then b across agents holds only in one order
        let phi = parse("<>(a && <>b)").unwrap();
        let mut tr = Trace::default();
        tr.push(0, None, "start", json!({ "agents": 2 }));
        tr.events.push(step(1, 0, &["a"]));
        tr.events.push(step(2, 1, &["b"]));
        assert!(!verify_trace(&tr, &phi));
        assert!(verify_words(&agent_words(&tr), &phi, 0));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut tr = Trace::default();
        tr.push(0, None, "start", json!({ "agents": 1 }));
        tr.push(3, Some(0), "transition", json!({ "label": ["a"] }));
        let text = tr.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.lines().next().unwrap().contains("agent\""));
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, tr);
    }
}
