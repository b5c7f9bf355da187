//! Test network generators: random geometric connectivity graphs, grid
//! ("ladder") routing DAGs and random DODAGs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{ConnectivityGraph, Dodag, Edge, Link, NodeId, Position};

/// Sink of every generated geometric graph.
pub const GEO_SINK: NodeId = 0;

const PLACEMENT_BUDGET: usize = 100_000;
const CONNECT_ATTEMPTS: u64 = 100;

/// How likely a link is between the always-link and never-link radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandLaw {
    /// `(r2 - d) / (r2 - r1)`, continuous at both radii.
    Linear,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoParams {
    pub nodes: usize,
    pub side: f64,
    pub min_spacing: f64,
    /// Pairs closer than this always share a link.
    pub always_radius: f64,
    /// Pairs farther than this never share a link.
    pub never_radius: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub band: BandLaw,
    pub seed: u64,
}

impl Default for GeoParams {
    fn default() -> Self {
        GeoParams {
            nodes: 40,
            side: 10.0,
            min_spacing: 0.5,
            always_radius: 2.0,
            never_radius: 3.0,
            p_lo: 0.7,
            p_hi: 1.0,
            band: BandLaw::Linear,
            seed: 0,
        }
    }
}

impl GeoParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Params(m.to_string()));
        if self.nodes == 0 {
            return fail("node count must be positive");
        }
        if !(self.side > 0.0) || !(self.min_spacing > 0.0) {
            return fail("side and minimum spacing must be positive");
        }
        if !(0.0 <= self.always_radius && self.always_radius <= self.never_radius) {
            return fail("radii must satisfy 0 <= r1 <= r2");
        }
        if !(0.0 <= self.p_lo && self.p_lo <= self.p_hi && self.p_hi <= 1.0) {
            return fail("probability range must satisfy 0 <= p_lo <= p_hi <= 1");
        }
        if let BandLaw::Constant(q) = self.band {
            if !(0.0..=1.0).contains(&q) {
                return fail("band probability must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn band_probability(&self, d: f64) -> f64 {
        let (r1, r2) = (self.always_radius, self.never_radius);
        if d < r1 {
            1.0
        } else if d > r2 || r1 == r2 {
            0.0
        } else {
            match self.band {
                BandLaw::Linear => (r2 - d) / (r2 - r1),
                BandLaw::Constant(q) => q,
            }
        }
    }
}

fn place(params: &GeoParams, rng: &mut ChaCha8Rng) -> Result<Vec<Position>> {
    let mut placed: Vec<Position> = Vec::with_capacity(params.nodes);
    let mut attempts = 0;
    while placed.len() < params.nodes {
        if attempts == PLACEMENT_BUDGET {
            return Err(Error::Placement { placed: placed.len(), wanted: params.nodes, attempts });
        }
        attempts += 1;
        let p = Position { x: rng.gen::<f64>() * params.side, y: rng.gen::<f64>() * params.side };
        if placed.iter().all(|q| q.distance(&p) >= params.min_spacing) {
            placed.push(p);
        }
    }
    Ok(placed)
}

/// Random geometric connectivity graph; the sink is [`GEO_SINK`].
///
/// Positions are uniform in the square, rejecting points closer than the
/// minimum spacing to an earlier node. Each attempt draws from its own
/// stream of the seed; disconnected draws are retried.
pub fn random_geometric(params: &GeoParams) -> Result<ConnectivityGraph> {
    params.validate()?;
    for attempt in 0..CONNECT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(attempt);
        let positions = place(params, &mut rng)?;
        let mut links = Vec::new();
        for u in 0..positions.len() {
            for v in u + 1..positions.len() {
                let chance = params.band_probability(positions[u].distance(&positions[v]));
                if chance > 0.0 && (chance >= 1.0 || rng.gen::<f64>() < chance) {
                    let p = rng.gen_range(params.p_lo..=params.p_hi);
                    links.push(Link { u, v, p });
                }
            }
        }
        let cg = ConnectivityGraph::with_positions(positions.into_iter().map(Some).collect(), links)?;
        if cg.is_connected() {
            return Ok(cg);
        }
    }
    Err(Error::Disconnected { attempts: CONNECT_ATTEMPTS as usize })
}

/// Coupling between consecutive relay columns of a [`ladder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Wiring {
    /// Every node feeds every node of the next column.
    #[default]
    Interleaved,
    /// Node `r` feeds only node `r` of the next column.
    Disjoint,
}

/// Id of the relay in column `col`, row `row` of a ladder of the given width.
/// The source is node 0 and the sink is node `width * length + 1`.
pub fn ladder_node(width: usize, col: usize, row: usize) -> NodeId {
    1 + col * width + row
}

/// `width × length` grid of relays between a source and a sink, all links
/// of probability `p`, oriented toward the sink.
pub fn ladder(width: usize, length: usize, p: f64, wiring: Wiring) -> Result<Dodag> {
    if width == 0 || length == 0 {
        return Err(Error::Params("ladder width and length must be positive".into()));
    }
    let source = 0;
    let sink = width * length + 1;
    let mut edges = Vec::new();
    for row in 0..width {
        edges.push(Edge { from: source, to: ladder_node(width, 0, row), p });
    }
    for col in 0..length - 1 {
        for row in 0..width {
            let from = ladder_node(width, col, row);
            match wiring {
                Wiring::Interleaved => {
                    edges.extend((0..width).map(|r| Edge { from, to: ladder_node(width, col + 1, r), p }))
                }
                Wiring::Disjoint => edges.push(Edge { from, to: ladder_node(width, col + 1, row), p }),
            }
        }
    }
    for row in 0..width {
        edges.push(Edge { from: ladder_node(width, length - 1, row), to: sink, p });
    }
    Dodag::new(sink + 1, edges, sink)?.with_source(source)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomDagParams {
    pub nodes: usize,
    pub max_out_degree: usize,
    /// Total edge budget; at least `nodes - 1` so every node can reach the sink.
    pub max_edges: Option<usize>,
    pub p_lo: f64,
    pub p_hi: f64,
}

/// Random DODAG with shuffled labels: every non-sink node has at least one
/// outgoing edge, and the source (first in a hidden rank order) is set.
pub fn random_dodag(params: &RandomDagParams, seed: u64) -> Result<Dodag> {
    let n = params.nodes;
    if n < 2 || params.max_out_degree == 0 {
        return Err(Error::Params("need at least two nodes and a positive outdegree".into()));
    }
    if params.max_edges.is_some_and(|m| m < n - 1) {
        return Err(Error::Params("edge budget below nodes - 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label: Vec<NodeId> = (0..n).collect();
    label.shuffle(&mut rng);
    let mut spare = params.max_edges.map_or(usize::MAX, |m| m - (n - 1));
    let mut edges = Vec::new();
    for rank in 0..n - 1 {
        let later = n - 1 - rank;
        let want = rng.gen_range(1..=params.max_out_degree.min(later));
        let degree = want.min(spare.saturating_add(1));
        spare -= degree - 1;
        let mut targets: Vec<usize> = (rank + 1..n).collect();
        targets.shuffle(&mut rng);
        for &t in &targets[..degree] {
            let p = rng.gen_range(params.p_lo..=params.p_hi);
            edges.push(Edge { from: label[rank], to: label[t], p });
        }
    }
    Dodag::new(n, edges, label[n - 1])?.with_source(label[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_respect_spacing() {
        let params = GeoParams { nodes: 2, seed: 3, never_radius: 20.0, always_radius: 20.0, ..Default::default() };
        let cg = random_geometric(&params).unwrap();
        let pos: Vec<Position> = cg.positions().iter().map(|p| p.unwrap()).collect();
        assert!(pos[0].distance(&pos[1]) >= 0.5);
    }

    #[test]
    fn default_graph_is_connected_with_valid_probabilities() {
        let params = GeoParams { seed: 7, ..Default::default() };
        let cg = random_geometric(&params).unwrap();
        assert_eq!(cg.node_count(), 40);
        assert!(cg.is_connected());
        assert!(cg.links().iter().all(|l| (0.7..=1.0).contains(&l.p)));
    }

    #[test]
    fn hard_disk_when_radii_meet() {
        let params = GeoParams { always_radius: 2.5, never_radius: 2.5, seed: 5, ..Default::default() };
        let cg = random_geometric(&params).unwrap();
        let pos: Vec<Position> = cg.positions().iter().map(|p| p.unwrap()).collect();
        for u in 0..pos.len() {
            for v in u + 1..pos.len() {
                let linked = cg.link_probability(u, v).is_some();
                assert_eq!(linked, pos[u].distance(&pos[v]) < 2.5);
            }
        }
    }

    #[test]
    fn infeasible_placement() {
        let params = GeoParams { nodes: 50, side: 1.0, min_spacing: 0.9, ..Default::default() };
        assert!(matches!(random_geometric(&params), Err(Error::Placement { .. })));
    }

    #[test]
    fn disconnected_cap() {
        let params = GeoParams { nodes: 10, side: 1000.0, ..Default::default() };
        assert!(matches!(random_geometric(&params), Err(Error::Disconnected { attempts: 100 })));
    }

    #[test]
    fn bad_params() {
        assert!(GeoParams { always_radius: 3.0, never_radius: 2.0, ..Default::default() }.validate().is_err());
        assert!(GeoParams { p_lo: 0.9, p_hi: 0.8, ..Default::default() }.validate().is_err());
        assert!(GeoParams { min_spacing: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn ladder_shapes() {
        let chain = ladder(1, 1, 0.7, Wiring::Interleaved).unwrap();
        assert_eq!(chain.node_count(), 3);
        assert_eq!(chain.edges().len(), 2);
        let g = ladder(3, 6, 0.7, Wiring::Interleaved).unwrap();
        assert_eq!(g.node_count(), 20);
        assert_eq!(g.edges().len(), 3 + 5 * 9 + 3);
        assert_eq!(g.source(), Some(0));
        assert_eq!(g.sink(), 19);
        let d = ladder(3, 6, 0.7, Wiring::Disjoint).unwrap();
        assert_eq!(d.edges().len(), 3 + 5 * 3 + 3);
        assert!(ladder(0, 3, 0.7, Wiring::Disjoint).is_err());
    }

    #[test]
    fn random_dodag_is_valid() {
        for seed in 0..50 {
            let params = RandomDagParams { nodes: 8, max_out_degree: 3, max_edges: Some(12), p_lo: 0.1, p_hi: 0.9 };
            let g = random_dodag(&params, seed).unwrap();
            assert!(g.validate().is_ok());
            assert!(g.edges().len() <= 12);
            assert!(g.max_out_degree() <= 3);
        }
    }
}
