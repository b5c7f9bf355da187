//! Graph representations shared by every other module.
//!
//! Node ids are dense integers `0..node_count`. All graph values are
//! immutable once constructed; builders assemble edge lists and hand them to
//! the checked constructors here.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Slack allowed on either side of `[0, 1]` before a probability is rejected.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Checks a link probability, clamping values within [`PROBABILITY_SLACK`]
/// of the unit interval.
pub fn checked_probability(u: NodeId, v: NodeId, p: f64) -> Result<f64> {
    if !p.is_finite() || p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::BadProbability { u, v, p });
    }
    Ok(p.clamp(0.0, 1.0))
}

fn check_node(node: NodeId, node_count: usize) -> Result<()> {
    if node >= node_count {
        return Err(Error::UnknownNode { node, node_count });
    }
    Ok(())
}

/// A directed link with its success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub p: f64,
}

/// An undirected candidate link between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub u: NodeId,
    pub v: NodeId,
    pub p: f64,
}

/// Point in the plane, in abstract distance units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Undirected weighted graph of symmetric candidate links.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    positions: Vec<Option<Position>>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl ConnectivityGraph {
    pub fn new(node_count: usize, links: Vec<Link>) -> Result<Self> {
        Self::with_positions(vec![None; node_count], links)
    }

    pub fn with_positions(positions: Vec<Option<Position>>, links: Vec<Link>) -> Result<Self> {
        let n = positions.len();
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        let mut checked = Vec::with_capacity(links.len());
        for link in links {
            check_node(link.u, n)?;
            check_node(link.v, n)?;
            if link.u == link.v {
                return Err(Error::SelfLoop(link.u));
            }
            let key = (link.u.min(link.v), link.u.max(link.v));
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge { u: link.u, v: link.v });
            }
            let p = checked_probability(link.u, link.v, link.p)?;
            adjacency[link.u].push((link.v, p));
            adjacency[link.v].push((link.u, p));
            checked.push(Link { p, ..link });
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(v, _)| v);
        }
        Ok(ConnectivityGraph { positions, links: checked, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn positions(&self) -> &[Option<Position>] {
        &self.positions
    }

    /// Neighbors of `u` with link probabilities, sorted by neighbor id.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[u]
    }

    pub fn link_probability(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.adjacency[u][i].1)
    }

    /// Breadth-first hop distance from `root`; `None` for nodes in other components.
    pub fn hop_distances(&self, root: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        if root >= self.node_count() {
            return dist;
        }
        dist[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &(v, _) in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.hop_distances(0).iter().all(Option::is_some)
    }
}

/// Directed routing topology with a designated sink and optional source.
///
/// Construction checks ids, self-loops, duplicate edges and probabilities.
/// Acyclicity and the outgoing-edge requirement are checked on demand by
/// [`Dodag::validate`], so that malformed inputs can be reported in full.
#[derive(Debug, Clone, PartialEq)]
pub struct Dodag {
    node_count: usize,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    sink: NodeId,
    source: Option<NodeId>,
}

impl Dodag {
    pub fn new(node_count: usize, edges: Vec<Edge>, sink: NodeId) -> Result<Self> {
        check_node(sink, node_count)?;
        let mut seen = BTreeSet::new();
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        let mut checked = Vec::with_capacity(edges.len());
        for (idx, e) in edges.into_iter().enumerate() {
            check_node(e.from, node_count)?;
            check_node(e.to, node_count)?;
            if e.from == e.to {
                return Err(Error::SelfLoop(e.from));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::DuplicateEdge { u: e.from, v: e.to });
            }
            let p = checked_probability(e.from, e.to, e.p)?;
            out_edges[e.from].push(idx);
            in_edges[e.to].push(idx);
            checked.push(Edge { p, ..e });
        }
        Ok(Dodag { node_count, edges: checked, out_edges, in_edges, sink, source: None })
    }

    pub fn with_source(mut self, source: NodeId) -> Result<Self> {
        check_node(source, self.node_count)?;
        self.source = Some(source);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn source(&self) -> Option<NodeId> {
        self.source
    }

    /// Indices (into [`Dodag::edges`]) of the outgoing edges of `u`, in insertion order.
    pub fn out_edges(&self, u: NodeId) -> &[usize] {
        &self.out_edges[u]
    }

    pub fn in_edges(&self, v: NodeId) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_edges[u].len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges[v].len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Probabilities of the outgoing links of `u`, aligned with [`Dodag::out_edges`].
    pub fn out_probabilities(&self, u: NodeId) -> Vec<f64> {
        self.out_edges[u].iter().map(|&e| self.edges[e].p).collect()
    }

    /// Same topology with every probability replaced by `f(edge)`.
    pub fn map_probabilities(&self, mut f: impl FnMut(&Edge) -> f64) -> Result<Dodag> {
        let edges = self.edges.iter().map(|e| Edge { p: f(e), ..*e }).collect();
        let mut g = Dodag::new(self.node_count, edges, self.sink)?;
        g.source = self.source;
        Ok(g)
    }

    pub fn neighbor_sets(&self, v: NodeId) -> Result<Neighborhood> {
        check_node(v, self.node_count)?;
        Ok(Neighborhood {
            upstream: self.in_edges[v].iter().map(|&e| self.edges[e].from).collect(),
            downstream: self.out_edges[v].iter().map(|&e| self.edges[e].to).collect(),
            out_edges: self.out_edges[v].clone(),
        })
    }

    /// Orders nodes so that every edge points from an earlier to a later node.
    ///
    /// Kahn's algorithm with a min-heap on ready nodes, so the order is
    /// deterministic (smallest ready id first).
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let mut pending: Vec<usize> = self.in_edges.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            (0..self.node_count).filter(|&v| pending[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(self.node_count);
        while let Some(Reverse(u)) = ready.pop() {
            order.push(u);
            for &e in &self.out_edges[u] {
                let v = self.edges[e].to;
                pending[v] -= 1;
                if pending[v] == 0 {
                    ready.push(Reverse(v));
                }
            }
        }
        if order.len() == self.node_count {
            Ok(order)
        } else {
            Err(Error::Cycle { witness: self.cycle_witness(&pending) })
        }
    }

    // Every node left with pending > 0 has an in-edge from another such node,
    // so walking predecessors inside that set must revisit a node.
    fn cycle_witness(&self, pending: &[usize]) -> Vec<NodeId> {
        let start = match (0..self.node_count).find(|&v| pending[v] > 0) {
            Some(v) => v,
            None => return Vec::new(),
        };
        let mut pos = vec![usize::MAX; self.node_count];
        let mut walk = Vec::new();
        let mut v = start;
        while pos[v] == usize::MAX {
            pos[v] = walk.len();
            walk.push(v);
            v = self.in_edges[v]
                .iter()
                .map(|&e| self.edges[e].from)
                .find(|&u| pending[u] > 0)
                .expect("stuck node has a stuck predecessor");
        }
        let mut cycle = walk[pos[v]..].to_vec();
        // walked against edge direction
        cycle.reverse();
        cycle
    }

    /// Full structural check. Never fails; collects every violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if let Err(Error::Cycle { witness }) = self.topological_order() {
            violations.push(Violation::Cycle(witness));
        }
        if !self.out_edges[self.sink].is_empty() {
            violations.push(Violation::SinkHasOutEdges {
                sink: self.sink,
                out_degree: self.out_edges[self.sink].len(),
            });
        }
        for v in 0..self.node_count {
            if v != self.sink && self.out_edges[v].is_empty() {
                violations.push(Violation::Orphan(v));
            }
        }
        ValidationReport { violations }
    }

    /// Length in hops of the longest directed path from each node to the sink.
    /// `None` for nodes that cannot reach the sink.
    pub fn longest_path_to_sink(&self) -> Result<Vec<Option<u32>>> {
        let order = self.topological_order()?;
        let mut longest: Vec<Option<u32>> = vec![None; self.node_count];
        longest[self.sink] = Some(0);
        for &u in order.iter().rev() {
            if u == self.sink {
                continue;
            }
            longest[u] = self.out_edges[u]
                .iter()
                .filter_map(|&e| longest[self.edges[e].to])
                .max()
                .map(|d| d + 1);
        }
        Ok(longest)
    }
}

/// Upstream neighbors, downstream neighbors and outgoing edge indices of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub upstream: Vec<NodeId>,
    pub downstream: Vec<NodeId>,
    pub out_edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Nodes of a directed cycle, in edge order.
    Cycle(Vec<NodeId>),
    SinkHasOutEdges { sink: NodeId, out_degree: usize },
    /// A non-sink node with no outgoing edge.
    Orphan(NodeId),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle(nodes) => write!(f, "cycle through {nodes:?}"),
            Violation::SinkHasOutEdges { sink, out_degree } => {
                write!(f, "sink {sink} has {out_degree} outgoing edges")
            }
            Violation::Orphan(v) => write!(f, "node {v} has no outgoing edge"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// No violations at all: a full DODAG.
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Acyclic with a sink that has no outgoing edges. Orphans are tolerated.
    pub fn is_loop_free(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle(_) | Violation::SinkHasOutEdges { .. }))
    }

    pub fn orphans(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.violations.iter().filter_map(|v| match v {
            Violation::Orphan(n) => Some(*n),
            _ => None,
        })
    }
}

/// A directed edge whose probability is only known to lie in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub lo: f64,
    pub hi: f64,
}

/// A routing topology with interval-valued link probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDodag {
    lower: Dodag,
    upper: Dodag,
}

impl IntervalDodag {
    pub fn new(node_count: usize, edges: Vec<IntervalEdge>, sink: NodeId) -> Result<Self> {
        let mut lo_edges = Vec::with_capacity(edges.len());
        let mut hi_edges = Vec::with_capacity(edges.len());
        for e in &edges {
            let lo = checked_probability(e.from, e.to, e.lo)?;
            let hi = checked_probability(e.from, e.to, e.hi)?;
            if lo > hi {
                return Err(Error::BadInterval { u: e.from, v: e.to, lo: e.lo, hi: e.hi });
            }
            lo_edges.push(Edge { from: e.from, to: e.to, p: lo });
            hi_edges.push(Edge { from: e.from, to: e.to, p: hi });
        }
        Ok(IntervalDodag {
            lower: Dodag::new(node_count, lo_edges, sink)?,
            upper: Dodag::new(node_count, hi_edges, sink)?,
        })
    }

    /// Degenerate intervals `[p, p]` around a point-valued topology.
    pub fn from_point(g: &Dodag) -> Self {
        IntervalDodag { lower: g.clone(), upper: g.clone() }
    }

    pub fn with_source(self, source: NodeId) -> Result<Self> {
        Ok(IntervalDodag {
            lower: self.lower.with_source(source)?,
            upper: self.upper.with_source(source)?,
        })
    }

    /// The topology with every link at its lower bound.
    pub fn lower(&self) -> &Dodag {
        &self.lower
    }

    /// The topology with every link at its upper bound.
    pub fn upper(&self) -> &Dodag {
        &self.upper
    }

    pub fn node_count(&self) -> usize {
        self.lower.node_count()
    }

    pub fn sink(&self) -> NodeId {
        self.lower.sink()
    }

    pub fn source(&self) -> Option<NodeId> {
        self.lower.source()
    }

    pub fn edges(&self) -> impl Iterator<Item = IntervalEdge> + '_ {
        self.lower.edges().iter().zip(self.upper.edges()).map(|(l, h)| IntervalEdge {
            from: l.from,
            to: l.to,
            lo: l.p,
            hi: h.p,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Fpp,
    Urf,
    Rrurf,
    FppLo,
    FppHi,
    UrfLo,
    UrfHi,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Fpp => "fpp",
            MetricKind::Urf => "urf",
            MetricKind::Rrurf => "rrurf",
            MetricKind::FppLo => "fpp_lo",
            MetricKind::FppHi => "fpp_hi",
            MetricKind::UrfLo => "urf_lo",
            MetricKind::UrfHi => "urf_hi",
        }
    }
}

/// Per-node reliability values of one kind, rooted at `reference`
/// (the source for flooding tables, the sink for unicast tables).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub kind: MetricKind,
    pub reference: NodeId,
    pub values: Vec<f64>,
    pub hops: Option<Vec<Option<u32>>>,
}

impl MetricTable {
    pub fn new(kind: MetricKind, reference: NodeId, values: Vec<f64>) -> Self {
        MetricTable { kind, reference, values, hops: None }
    }

    pub fn get(&self, v: NodeId) -> f64 {
        self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(from: NodeId, to: NodeId, p: f64) -> Edge {
        Edge { from, to, p }
    }

    // a=0, 1, 2, b=3
    fn diamond() -> Dodag {
        Dodag::new(4, vec![e(0, 1, 0.7), e(0, 2, 0.7), e(1, 3, 0.7), e(2, 3, 0.7)], 3).unwrap()
    }

    #[test]
    fn single_edge_is_ok() {
        let g = Dodag::new(2, vec![e(0, 1, 0.7)], 1).unwrap();
        assert!(g.validate().is_ok());
    }

    #[test]
    fn two_cycle_reported() {
        let g = Dodag::new(2, vec![e(0, 1, 0.5), e(1, 0, 0.5)], 1).unwrap();
        let report = g.validate();
        assert!(!report.is_loop_free());
        let cycle = report
            .violations
            .iter()
            .find_map(|v| match v {
                Violation::Cycle(c) => Some(c.clone()),
                _ => None,
            })
            .unwrap();
        let mut sorted = cycle.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1]);
        assert!(report.violations.contains(&Violation::SinkHasOutEdges { sink: 1, out_degree: 1 }));
        match g.topological_order() {
            Err(Error::Cycle { witness }) => assert_eq!(witness.len(), 2),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_witness_follows_edges() {
        // 0 -> 1 -> 2 -> 3 -> 1, sink 4 unreachable
        let g = Dodag::new(5, vec![e(0, 1, 1.0), e(1, 2, 1.0), e(2, 3, 1.0), e(3, 1, 1.0)], 4)
            .unwrap();
        let Err(Error::Cycle { witness }) = g.topological_order() else { panic!() };
        assert_eq!(witness.len(), 3);
        for i in 0..witness.len() {
            let (u, v) = (witness[i], witness[(i + 1) % witness.len()]);
            assert!(g.edges().iter().any(|x| x.from == u && x.to == v), "{u}->{v} missing");
        }
    }

    #[test]
    fn diamond_is_ok_and_ordered() {
        let g = diamond();
        assert!(g.validate().is_ok());
        let order = g.topological_order().unwrap();
        assert_eq!(order[0], 0);
        assert_eq!(order[3], 3);
    }

    #[test]
    fn chain_order() {
        let g = Dodag::new(3, vec![e(1, 2, 0.7), e(0, 1, 0.7)], 2).unwrap();
        assert_eq!(g.topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn orphan_reported() {
        let g = Dodag::new(3, vec![e(0, 2, 0.7)], 2).unwrap();
        let report = g.validate();
        assert!(report.is_loop_free());
        assert!(!report.is_ok());
        assert_eq!(report.orphans().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn neighbor_sets_of_diamond() {
        let g = diamond();
        let n1 = g.neighbor_sets(1).unwrap();
        assert_eq!(n1.upstream, vec![0]);
        assert_eq!(n1.downstream, vec![3]);
        let na = g.neighbor_sets(0).unwrap();
        assert!(na.upstream.is_empty());
        assert_eq!(na.downstream, vec![1, 2]);
        assert!(g.neighbor_sets(3).unwrap().downstream.is_empty());
        assert!(matches!(g.neighbor_sets(4), Err(Error::UnknownNode { node: 4, .. })));
    }

    #[test]
    fn ingest_rejections() {
        assert!(matches!(Dodag::new(2, vec![e(0, 0, 0.5)], 1), Err(Error::SelfLoop(0))));
        assert!(matches!(
            Dodag::new(2, vec![e(0, 1, 0.5), e(0, 1, 0.6)], 1),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(Dodag::new(2, vec![e(0, 1, 1.1)], 1), Err(Error::BadProbability { .. })));
        assert!(matches!(
            Dodag::new(2, vec![e(0, 1, f64::NAN)], 1),
            Err(Error::BadProbability { .. })
        ));
        assert!(matches!(Dodag::new(2, vec![e(0, 2, 0.5)], 1), Err(Error::UnknownNode { .. })));
        assert!(matches!(
            ConnectivityGraph::new(2, vec![Link { u: 0, v: 1, p: 0.5 }, Link { u: 1, v: 0, p: 0.5 }]),
            Err(Error::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn probability_slack_is_clamped() {
        let g = Dodag::new(3, vec![e(0, 1, 1.0 + 5e-13), e(1, 2, -5e-13)], 2).unwrap();
        assert_eq!(g.edges()[0].p, 1.0);
        assert_eq!(g.edges()[1].p, 0.0);
    }

    #[test]
    fn interval_order_checked() {
        let bad = IntervalDodag::new(2, vec![IntervalEdge { from: 0, to: 1, lo: 0.8, hi: 0.6 }], 1);
        assert!(matches!(bad, Err(Error::BadInterval { .. })));
    }

    #[test]
    fn longest_path_counts_hops() {
        // 0 -> 1 -> 3, 0 -> 3, 2 isolated
        let g = Dodag::new(4, vec![e(0, 1, 0.5), e(1, 3, 0.5), e(0, 3, 0.5)], 3).unwrap();
        assert_eq!(g.longest_path_to_sink().unwrap(), vec![Some(2), Some(1), None, Some(0)]);
    }

    #[test]
    fn connectivity_queries() {
        let cg = ConnectivityGraph::new(
            4,
            vec![Link { u: 0, v: 1, p: 0.9 }, Link { u: 1, v: 2, p: 0.8 }],
        )
        .unwrap();
        assert_eq!(cg.hop_distances(0), vec![Some(0), Some(1), Some(2), None]);
        assert!(!cg.is_connected());
        assert_eq!(cg.link_probability(2, 1), Some(0.8));
        assert_eq!(cg.link_probability(0, 2), None);
    }
}
