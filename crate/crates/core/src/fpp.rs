//! Flooding Path Probability.
//!
//! Under flooding every node that receives a packet multicasts it once on
//! all of its outgoing links, so `p(a -> v)` is the probability that a
//! directed path of working links joins `a` to `v`. Two evaluators are
//! provided: [`fpp_bruteforce`] sums over every up/down state of the edge
//! set, and [`fpp_fast`] sweeps a vertex cut through the DAG carrying the
//! joint distribution of which cut members hold a copy of the packet.

use crate::error::{Error, Result};
use crate::graph::{Dodag, IntervalDodag, MetricKind, MetricTable, NodeId};

pub const DEFAULT_EDGE_CAP: usize = 20;
pub const DEFAULT_CUT_CAP: usize = 25;
/// Subsets of the cut are `u64` masks; memory runs out long before this.
pub const MAX_CUT_CAP: usize = 40;

fn check_source(g: &Dodag, a: NodeId) -> Result<()> {
    if a >= g.node_count() {
        return Err(Error::UnknownNode { node: a, node_count: g.node_count() });
    }
    Ok(())
}

/// Evaluates the flooding probability by enumerating all `2^E` edge states.
///
/// Cost is `O(E 2^E)`; graphs with more than `edge_cap` edges are refused.
pub fn fpp_bruteforce(g: &Dodag, a: NodeId, edge_cap: usize) -> Result<MetricTable> {
    check_source(g, a)?;
    let m = g.edges().len();
    if m > edge_cap || m >= 63 {
        return Err(Error::EdgeCapExceeded { edges: m, cap: edge_cap.min(62) });
    }
    let order = g.topological_order()?;
    let mut rank = vec![0; g.node_count()];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    // one pass in source order propagates reachability through a DAG
    let mut edge_order: Vec<usize> = (0..m).collect();
    edge_order.sort_by_key(|&e| rank[g.edge(e).from]);

    let mut values = vec![0.0; g.node_count()];
    let mut reached = vec![false; g.node_count()];
    for state in 0u64..(1u64 << m) {
        let mut weight = 1.0;
        for (e, edge) in g.edges().iter().enumerate() {
            weight *= if state >> e & 1 == 1 { edge.p } else { 1.0 - edge.p };
        }
        if weight == 0.0 {
            continue;
        }
        reached.fill(false);
        reached[a] = true;
        for &e in &edge_order {
            let edge = g.edge(e);
            if state >> e & 1 == 1 && reached[edge.from] {
                reached[edge.to] = true;
            }
        }
        for (v, hit) in reached.iter().enumerate() {
            if *hit {
                values[v] += weight;
            }
        }
    }
    values[a] = 1.0;
    Ok(MetricTable::new(MetricKind::Fpp, a, values))
}

/// Snapshot handed to the observer of [`fpp_fast_traced`] after each step.
#[derive(Debug)]
pub struct CutStep<'a> {
    pub step: usize,
    /// Node added to the cut in this step.
    pub added: NodeId,
    /// Cut size right after `added` joined, before exhausted nodes left.
    pub peak: usize,
    /// Cut after exhausted nodes were marginalized out.
    pub cut: &'a [NodeId],
    /// Joint distribution over subsets of `cut`; bit `k` of the index is `cut[k]`.
    pub pmf: &'a [f64],
}

impl CutStep<'_> {
    pub fn pmf_sum(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FppOutcome {
    pub table: MetricTable,
    /// Largest cut the sweep had to carry.
    pub max_cut: usize,
    pub steps: usize,
}

/// Vertex-cut dynamic program; values agree with [`fpp_bruteforce`].
pub fn fpp_fast(g: &Dodag, a: NodeId, cut_cap: usize) -> Result<MetricTable> {
    fpp_fast_traced(g, a, cut_cap, |_| {}).map(|o| o.table)
}

/// [`fpp_fast`] with an observer called after every cut update.
///
/// Nodes unreachable from `a` score 0 and never enter the cut. Each step
/// picks a node `u` of the cut to drain, preferring the one with the
/// fewest live edges into the eligible set (nodes whose every incoming edge
/// starts in the cut, smallest id on ties), then adds the smallest eligible
/// out-neighbor of `u`.
pub fn fpp_fast_traced(
    g: &Dodag,
    a: NodeId,
    cut_cap: usize,
    mut observer: impl FnMut(&CutStep<'_>),
) -> Result<FppOutcome> {
    check_source(g, a)?;
    if cut_cap == 0 || cut_cap > MAX_CUT_CAP {
        return Err(Error::Params(format!("cut cap must be in 1..={MAX_CUT_CAP}, got {cut_cap}")));
    }
    g.topological_order()?;
    let n = g.node_count();

    let mut reach = vec![false; n];
    reach[a] = true;
    let mut stack = vec![a];
    while let Some(u) = stack.pop() {
        for &e in g.out_edges(u) {
            let v = g.edge(e).to;
            if !reach[v] {
                reach[v] = true;
                stack.push(v);
            }
        }
    }

    // Edges out of unreachable nodes never carry a packet, so they are
    // dropped up front. Every edge from a reachable node lands on one.
    let mut alive: Vec<bool> = g.edges().iter().map(|e| reach[e.from]).collect();
    let mut live_out = vec![0usize; n];
    let mut pending_in = vec![0usize; n];
    for (e, edge) in g.edges().iter().enumerate() {
        if alive[e] {
            live_out[edge.from] += 1;
            pending_in[edge.to] += 1;
        }
    }

    let mut values = vec![0.0; n];
    values[a] = 1.0;
    let mut added = vec![false; n];
    added[a] = true;
    for &e in g.out_edges(a) {
        pending_in[g.edge(e).to] -= 1;
    }
    let mut remaining = reach.iter().filter(|&&r| r).count() - 1;

    let mut cut: Vec<NodeId> = vec![a];
    let mut pmf: Vec<f64> = vec![0.0, 1.0];
    let mut max_cut = 1;
    let mut steps = 0;
    let mut target = a;

    let eligible = |v: NodeId, added: &[bool], pending_in: &[usize]| !added[v] && pending_in[v] == 0;

    while remaining > 0 {
        let has_eligible_edge = |u: NodeId, alive: &[bool], added: &[bool], pending_in: &[usize]| {
            g.out_edges(u)
                .iter()
                .any(|&e| alive[e] && eligible(g.edge(e).to, added, pending_in))
        };
        if !cut.contains(&target) || !has_eligible_edge(target, &alive, &added, &pending_in) {
            target = cut
                .iter()
                .filter_map(|&i| {
                    let into_eligible = g
                        .out_edges(i)
                        .iter()
                        .filter(|&&e| alive[e] && eligible(g.edge(e).to, &added, &pending_in))
                        .count();
                    (into_eligible > 0).then_some((into_eligible, i))
                })
                .min()
                .map(|(_, i)| i)
                .expect("a reachable DAG always has an eligible node fed by the cut");
        }
        let v = g
            .out_edges(target)
            .iter()
            .filter(|&&e| alive[e])
            .map(|&e| g.edge(e).to)
            .filter(|&v| eligible(v, &added, &pending_in))
            .min()
            .expect("target has an eligible out-neighbor");

        let width = cut.len() + 1;
        if width > cut_cap {
            return Err(Error::CutCapExceeded { cut: width, cap: cut_cap });
        }
        max_cut = max_cut.max(width);

        // failure factor of the (single) live edge from each cut member into v
        let mut fail = vec![1.0; cut.len()];
        for &e in g.in_edges(v) {
            if alive[e] {
                let edge = g.edge(e);
                let k = cut.iter().position(|&c| c == edge.from).expect("in-edge starts in the cut");
                fail[k] = 1.0 - edge.p;
                alive[e] = false;
                live_out[edge.from] -= 1;
            }
        }

        let half = pmf.len();
        let mut next = vec![0.0; half * 2];
        let mut miss = vec![1.0; half];
        for mask in 0..half {
            if mask > 0 {
                let low = mask.trailing_zeros() as usize;
                miss[mask] = miss[mask & (mask - 1)] * fail[low];
            }
            let p = pmf[mask];
            next[mask] = p * miss[mask];
            next[mask | half] = p * (1.0 - miss[mask]);
        }
        values[v] = next[half..].iter().sum();

        cut.push(v);
        added[v] = true;
        remaining -= 1;
        for &e in g.out_edges(v) {
            if alive[e] {
                pending_in[g.edge(e).to] -= 1;
            }
        }

        pmf = next;
        for k in (0..cut.len()).rev() {
            if live_out[cut[k]] == 0 {
                pmf = marginalize(&pmf, k);
                cut.remove(k);
            }
        }

        steps += 1;
        observer(&CutStep { step: steps, added: v, peak: width, cut: &cut, pmf: &pmf });
    }

    Ok(FppOutcome { table: MetricTable::new(MetricKind::Fpp, a, values), max_cut, steps })
}

/// Sums out bit `bit` of a pmf indexed by subset masks.
fn marginalize(pmf: &[f64], bit: usize) -> Vec<f64> {
    let low_mask = (1usize << bit) - 1;
    (0..pmf.len() / 2)
        .map(|idx| {
            let base = ((idx & !low_mask) << 1) | (idx & low_mask);
            pmf[base] + pmf[base | (1 << bit)]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FppBounds {
    pub lo: MetricTable,
    pub hi: MetricTable,
}

/// Flooding probability is monotone in every link probability, so running
/// the sweep at all-lower and all-upper link values brackets it.
pub fn fpp_bounds(g: &IntervalDodag, a: NodeId, cut_cap: usize) -> Result<FppBounds> {
    let mut lo = fpp_fast(g.lower(), a, cut_cap)?;
    let mut hi = fpp_fast(g.upper(), a, cut_cap)?;
    lo.kind = MetricKind::FppLo;
    hi.kind = MetricKind::FppHi;
    Ok(FppBounds { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, IntervalEdge};

    fn e(from: NodeId, to: NodeId, p: f64) -> Edge {
        Edge { from, to, p }
    }

    fn diamond(p: f64) -> Dodag {
        Dodag::new(4, vec![e(0, 1, p), e(0, 2, p), e(1, 3, p), e(2, 3, p)], 3).unwrap()
    }

    #[test]
    fn single_edge() {
        let g = Dodag::new(2, vec![e(0, 1, 0.7)], 1).unwrap();
        assert!((fpp_bruteforce(&g, 0, 20).unwrap().get(1) - 0.7).abs() < 1e-15);
        assert!((fpp_fast(&g, 0, 25).unwrap().get(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn diamond_value() {
        let g = diamond(0.7);
        let expected = 1.0 - (1.0 - 0.49f64).powi(2);
        assert!((expected - 0.7399).abs() < 1e-12);
        let brute = fpp_bruteforce(&g, 0, 20).unwrap();
        let fast = fpp_fast(&g, 0, 25).unwrap();
        assert!((brute.get(3) - expected).abs() < 1e-12);
        for v in 0..4 {
            assert!((brute.get(v) - fast.get(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_links() {
        // 0 -> 1 -> 2, 3 -> 2 where 3 is unreachable from 0
        let g = Dodag::new(4, vec![e(0, 1, 1.0), e(1, 2, 1.0), e(3, 2, 1.0)], 2).unwrap();
        for t in [fpp_bruteforce(&g, 0, 20).unwrap(), fpp_fast(&g, 0, 25).unwrap()] {
            assert_eq!(t.values, vec![1.0, 1.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn edge_cap_enforced() {
        let edges = (0..21).map(|i| e(i, i + 1, 0.5)).collect();
        let g = Dodag::new(22, edges, 21).unwrap();
        assert!(matches!(
            fpp_bruteforce(&g, 0, 20),
            Err(Error::EdgeCapExceeded { edges: 21, cap: 20 })
        ));
    }

    #[test]
    fn cut_cap_enforced() {
        // fan-out of 4 then fan-in: the cut must hold 0 plus four relays
        let mut edges = Vec::new();
        for r in 1..=4 {
            edges.push(e(0, r, 0.5));
            edges.push(e(r, 5, 0.5));
        }
        let g = Dodag::new(6, edges, 5).unwrap();
        let err = fpp_fast(&g, 0, 3).unwrap_err();
        assert!(matches!(err, Error::CutCapExceeded { cut: 4, cap: 3 }));
        assert_eq!(err.kind(), crate::error::ErrorKind::ResourceCap);
        let ok = fpp_fast_traced(&g, 0, 25, |_| {}).unwrap();
        assert_eq!(ok.max_cut, 5);
    }

    #[test]
    fn pmf_stays_normalized() {
        let g = diamond(0.3);
        let mut sums = Vec::new();
        fpp_fast_traced(&g, 0, 25, |s| sums.push(s.pmf_sum())).unwrap();
        assert_eq!(sums.len(), 3);
        for s in sums {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn source_not_first_in_order() {
        // a=2 feeds 0 and 1; 3 -> 0 is outside a's reach
        let g = Dodag::new(4, vec![e(2, 0, 0.6), e(2, 1, 0.5), e(0, 1, 0.9), e(3, 0, 0.4)], 1)
            .unwrap();
        let brute = fpp_bruteforce(&g, 2, 20).unwrap();
        let fast = fpp_fast(&g, 2, 25).unwrap();
        for v in 0..4 {
            assert!((brute.get(v) - fast.get(v)).abs() < 1e-12, "node {v}");
        }
        assert_eq!(fast.get(3), 0.0);
    }

    #[test]
    fn marginalize_middle_bit() {
        // masks over 3 bits; drop bit 1
        let pmf: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(marginalize(&pmf, 1), vec![0.0 + 2.0, 1.0 + 3.0, 4.0 + 6.0, 5.0 + 7.0]);
    }

    #[test]
    fn bounds_on_diamond() {
        let edges = [(0, 1), (0, 2), (1, 3), (2, 3)]
            .iter()
            .map(|&(from, to)| IntervalEdge { from, to, lo: 0.6, hi: 0.8 })
            .collect();
        let g = IntervalDodag::new(4, edges, 3).unwrap();
        let b = fpp_bounds(&g, 0, 25).unwrap();
        assert!((b.lo.get(3) - 0.5904).abs() < 1e-12);
        assert!((b.hi.get(3) - 0.8704).abs() < 1e-12);
        assert_eq!(b.lo.kind, MetricKind::FppLo);
    }

    #[test]
    fn rejects_cycles_and_bad_source() {
        let g = Dodag::new(3, vec![e(0, 1, 0.5), e(1, 0, 0.5)], 2).unwrap();
        assert!(matches!(fpp_fast(&g, 0, 25), Err(Error::Cycle { .. })));
        assert!(matches!(fpp_bruteforce(&g, 0, 20), Err(Error::Cycle { .. })));
        assert!(matches!(fpp_fast(&diamond(0.5), 9, 25), Err(Error::UnknownNode { .. })));
    }
}
