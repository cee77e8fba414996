//! Dijkstra over dense node ids with deterministic tie-breaking.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::models::Cost;

const NONE: usize = usize::MAX;

/// Shortest path from any of `sources` to the first settled node satisfying
/// `is_target`. Among equal-cost relaxations the smaller predecessor id
/// wins, and among equal-cost targets the smaller id; node ids must
/// therefore be assigned in the intended lexicographic order.
pub(crate) fn dijkstra(
    n: usize,
    sources: &[usize],
    mut succ: impl FnMut(usize, &mut Vec<(usize, Cost)>),
    is_target: impl Fn(usize) -> bool,
) -> Option<(Vec<usize>, Cost)> {
    let mut dist = vec![u64::MAX; n];
    let mut pred = vec![NONE; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            heap.push(Reverse((0u64, s)));
        }
    }
    let mut buf = Vec::new();
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] || d != dist[u] {
            continue;
        }
        done[u] = true;
        if is_target(u) {
            let mut path = vec![u];
            let mut v = u;
            while pred[v] != NONE {
                v = pred[v];
                path.push(v);
            }
            path.reverse();
            return Some((path, Cost(d)));
        }
        buf.clear();
        succ(u, &mut buf);
        for &(v, c) in &buf {
            if done[v] {
                continue;
            }
            let nd = d.saturating_add(c.0);
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = u;
                heap.push(Reverse((nd, v)));
            } else if nd == dist[v] && u < pred[v] {
                pred[v] = u;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(usize, usize, u64)]) -> impl FnMut(usize, &mut Vec<(usize, Cost)>) + '_ {
        move |u, out| {
            for &(a, b, c) in edges {
                if a == u {
                    out.push((b, Cost(c)));
                }
            }
        }
    }

    #[test]
    fn shortest_and_tie_break() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3, both cost 2; prefer predecessor 1.
        let edges = [(0, 2, 1), (0, 1, 1), (2, 3, 1), (1, 3, 1), (0, 3, 5)];
        let (p, c) = dijkstra(4, &[0], graph(&edges), |v| v == 3).unwrap();
        assert_eq!(p, vec![0, 1, 3]);
        assert_eq!(c, Cost(2));
    }

    #[test]
    fn zero_cost_cycles_and_unreachable() {
        let edges = [(0, 1, 0), (1, 0, 0), (1, 2, 0)];
        let (p, c) = dijkstra(4, &[0], graph(&edges), |v| v == 2).unwrap();
        assert_eq!((p, c), (vec![0, 1, 2], Cost(0)));
        assert!(dijkstra(4, &[0], graph(&edges), |v| v == 3).is_none());
        let (p, _) = dijkstra(4, &[0], graph(&edges), |v| v == 0).unwrap();
        assert_eq!(p, vec![0]);
    }
}
