//! Unicast Retransmission Flow metrics.
//!
//! A relay holding the unicast packet tries its outgoing links one at a
//! time, in uniformly random order, until one succeeds or all have failed.
//! The URF weight of link `(u, v)` is the probability that a packet at `u`
//! leaves over that link. Reliability then propagates linearly through the
//! DAG, either outward from a source or inward from the sink.
//!
//! The RRURF variant tries links in decreasing order of the downstream
//! neighbor's own RRURF value, which turns the weights into a simple
//! "first success in a fixed list" product.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{Dodag, IntervalDodag, MetricKind, MetricTable, NodeId};

/// Outdegree above which [`urf_weights_subset`] refuses to enumerate.
pub const DEFAULT_SUBSET_CAP: usize = 20;

/// URF weights of a node's links by summing over every up/down state of the
/// competing links: a link wins a state with `k` other working links with
/// probability `1 / (k + 1)`.
pub fn subset_weights(probs: &[f64]) -> Vec<f64> {
    let k = probs.len();
    (0..k)
        .map(|l| {
            let others: Vec<f64> = probs.iter().enumerate().filter(|&(i, _)| i != l).map(|(_, &p)| p).collect();
            let mut total = 0.0;
            for state in 0u64..(1u64 << others.len()) {
                let mut weight = 1.0;
                for (i, p) in others.iter().enumerate() {
                    weight *= if state >> i & 1 == 1 { *p } else { 1.0 - p };
                }
                total += weight / (state.count_ones() as f64 + 1.0);
            }
            probs[l] * total
        })
        .collect()
}

/// `∫₀¹ ∏ ((1 - p) + p x) dx` over the given probabilities.
///
/// The product is expanded in powers of `x`; the coefficient of `x^j` is the
/// probability that exactly `j` of the links are up, so every term is
/// non-negative and the term-wise integral needs no compensation.
pub fn flow_integral(others: impl IntoIterator<Item = f64>) -> f64 {
    let mut coeffs = vec![1.0];
    for p in others {
        coeffs.push(0.0);
        for j in (0..coeffs.len()).rev() {
            let stay = coeffs[j] * (1.0 - p);
            let rise = if j > 0 { coeffs[j - 1] * p } else { 0.0 };
            coeffs[j] = stay + rise;
        }
    }
    coeffs.iter().enumerate().map(|(j, c)| c / (j as f64 + 1.0)).sum()
}

/// URF weights of a node's links from the integral form, `O(k^3)` for `k` links.
pub fn poly_weights(probs: &[f64]) -> Vec<f64> {
    (0..probs.len())
        .map(|l| {
            let others = probs.iter().enumerate().filter(|&(i, _)| i != l).map(|(_, &p)| p);
            probs[l] * flow_integral(others)
        })
        .collect()
}

/// Weights when links are tried in the given fixed order.
pub fn ordered_weights(probs_in_order: &[f64]) -> Vec<f64> {
    let mut all_failed = 1.0;
    probs_in_order
        .iter()
        .map(|&p| {
            let w = all_failed * p;
            all_failed *= 1.0 - p;
            w
        })
        .collect()
}

/// Per-edge flow weights, indexed like [`Dodag::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub weights: Vec<f64>,
}

impl WeightTable {
    pub fn get(&self, edge: usize) -> f64 {
        self.weights[edge]
    }

    /// Probability that a packet at `u` is dropped there.
    pub fn drop_probability(&self, g: &Dodag, u: NodeId) -> f64 {
        1.0 - g.out_edges(u).iter().map(|&e| self.weights[e]).sum::<f64>()
    }

    /// URF weights for every edge, from the integral form.
    pub fn urf(g: &Dodag) -> WeightTable {
        let mut weights = vec![0.0; g.edges().len()];
        for u in 0..g.node_count() {
            let w = poly_weights(&g.out_probabilities(u));
            for (&e, w) in g.out_edges(u).iter().zip(w) {
                weights[e] = w;
            }
        }
        WeightTable { weights }
    }
}

fn check_node(g: &Dodag, u: NodeId) -> Result<()> {
    if u >= g.node_count() {
        return Err(Error::UnknownNode { node: u, node_count: g.node_count() });
    }
    Ok(())
}

fn pair_with_targets(g: &Dodag, u: NodeId, weights: Vec<f64>) -> Vec<(NodeId, f64)> {
    g.out_edges(u).iter().map(|&e| g.edge(e).to).zip(weights).collect()
}

/// Weights of `u`'s outgoing links by subset enumeration, as `(downstream, weight)`.
pub fn urf_weights_subset(g: &Dodag, u: NodeId, cap: usize) -> Result<Vec<(NodeId, f64)>> {
    check_node(g, u)?;
    let degree = g.out_degree(u);
    if degree > cap.min(62) {
        return Err(Error::OutDegreeCapExceeded { node: u, degree, cap });
    }
    Ok(pair_with_targets(g, u, subset_weights(&g.out_probabilities(u))))
}

/// Weights of `u`'s outgoing links from the integral form, as `(downstream, weight)`.
pub fn urf_weights_poly(g: &Dodag, u: NodeId) -> Result<Vec<(NodeId, f64)>> {
    check_node(g, u)?;
    Ok(pair_with_targets(g, u, poly_weights(&g.out_probabilities(u))))
}

/// Propagates visit probabilities forward from `a` with the given weights.
pub fn source_recursion(g: &Dodag, a: NodeId, weights: &WeightTable) -> Result<Vec<f64>> {
    check_node(g, a)?;
    let order = g.topological_order()?;
    let mut rho = vec![0.0; g.node_count()];
    rho[a] = 1.0;
    for &u in &order {
        if rho[u] == 0.0 {
            continue;
        }
        for &e in g.out_edges(u) {
            rho[g.edge(e).to] += rho[u] * weights.get(e);
        }
    }
    // a can only be re-entered through a cycle, which was ruled out
    rho[a] = 1.0;
    Ok(rho)
}

/// Delivery probability to the sink for every node, with the given weights.
/// Non-sink nodes without outgoing edges trap the packet and score 0.
pub fn sink_recursion(g: &Dodag, weights: &WeightTable) -> Result<Vec<f64>> {
    let order = g.topological_order()?;
    let mut rho = vec![0.0; g.node_count()];
    for &u in order.iter().rev() {
        rho[u] = if u == g.sink() {
            1.0
        } else {
            g.out_edges(u).iter().map(|&e| weights.get(e) * rho[g.edge(e).to]).sum()
        };
    }
    Ok(rho)
}

/// URF metric `ϱ(a -> v)` for every node `v`.
pub fn urf_source(g: &Dodag, a: NodeId) -> Result<MetricTable> {
    let rho = source_recursion(g, a, &WeightTable::urf(g))?;
    Ok(MetricTable::new(MetricKind::Urf, a, rho))
}

/// URF metric `ϱ(u -> b)` for every node `u`, `b` being the sink of `g`.
pub fn urf_sink(g: &Dodag) -> Result<MetricTable> {
    let rho = sink_recursion(g, &WeightTable::urf(g))?;
    Ok(MetricTable::new(MetricKind::Urf, g.sink(), rho))
}

/// Retry order and resulting weights of the reliability-ordered variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RrurfPlan {
    pub table: MetricTable,
    /// For each node, its outgoing edge indices in the order they are tried.
    pub order: Vec<Vec<usize>>,
    pub weights: WeightTable,
}

fn rr_cmp(g: &Dodag, rho: &[f64], a: usize, b: usize) -> Ordering {
    let (ea, eb) = (g.edge(a), g.edge(b));
    rho[eb.to]
        .total_cmp(&rho[ea.to])
        .then(eb.p.total_cmp(&ea.p))
        .then(ea.to.cmp(&eb.to))
}

/// RRURF metric toward the sink, with the per-node retry order.
///
/// Links are tried by descending downstream RRURF value, then descending
/// link probability, then ascending neighbor id.
pub fn rrurf_plan(g: &Dodag) -> Result<RrurfPlan> {
    let topo = g.topological_order()?;
    let mut rho = vec![0.0; g.node_count()];
    let mut order = vec![Vec::new(); g.node_count()];
    let mut weights = vec![0.0; g.edges().len()];
    for &u in topo.iter().rev() {
        if u == g.sink() {
            rho[u] = 1.0;
            continue;
        }
        let mut links = g.out_edges(u).to_vec();
        links.sort_by(|&x, &y| rr_cmp(g, &rho, x, y));
        let probs: Vec<f64> = links.iter().map(|&e| g.edge(e).p).collect();
        let w = ordered_weights(&probs);
        rho[u] = links.iter().zip(&w).map(|(&e, w)| w * rho[g.edge(e).to]).sum();
        for (&e, w) in links.iter().zip(w) {
            weights[e] = w;
        }
        order[u] = links;
    }
    Ok(RrurfPlan {
        table: MetricTable::new(MetricKind::Rrurf, g.sink(), rho),
        order,
        weights: WeightTable { weights },
    })
}

pub fn rrurf_sink(g: &Dodag) -> Result<MetricTable> {
    rrurf_plan(g).map(|p| p.table)
}

/// Visit probabilities from `a` when every relay uses the RRURF retry order.
pub fn rrurf_source(g: &Dodag, a: NodeId) -> Result<MetricTable> {
    let plan = rrurf_plan(g)?;
    let rho = source_recursion(g, a, &plan.weights)?;
    Ok(MetricTable::new(MetricKind::Rrurf, a, rho))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrfBounds {
    pub lo: MetricTable,
    pub hi: MetricTable,
    /// Nodes whose upper weight bounds sum above 1, where the upper bound is loose.
    pub overweight: Vec<NodeId>,
}

/// Brackets the URF metric toward the sink under interval link probabilities.
///
/// Each weight is bounded by substitution in the integral form: the upper
/// bound takes the link itself at its upper value and its siblings at their
/// lower values, the lower bound the reverse. The metric is monotone in the
/// weights, so the sink recursion over each weight set gives the bounds.
/// The upper metric is capped at 1.
pub fn urf_bounds(g: &IntervalDodag) -> Result<UrfBounds> {
    let (lower, upper) = (g.lower(), g.upper());
    let mut w_lo = vec![0.0; lower.edges().len()];
    let mut w_hi = vec![0.0; lower.edges().len()];
    let mut overweight = Vec::new();
    for u in 0..g.node_count() {
        let links = lower.out_edges(u);
        let mut hi_sum = 0.0;
        for &l in links {
            let siblings = || links.iter().filter(move |&&e| e != l);
            w_hi[l] = upper.edge(l).p * flow_integral(siblings().map(|&e| lower.edge(e).p));
            w_lo[l] = lower.edge(l).p * flow_integral(siblings().map(|&e| upper.edge(e).p));
            hi_sum += w_hi[l];
        }
        if hi_sum > 1.0 + 1e-12 {
            overweight.push(u);
        }
    }
    let lo = sink_recursion(lower, &WeightTable { weights: w_lo })?;
    let hi: Vec<f64> =
        sink_recursion(lower, &WeightTable { weights: w_hi })?.into_iter().map(|v| v.min(1.0)).collect();
    Ok(UrfBounds {
        lo: MetricTable::new(MetricKind::UrfLo, g.sink(), lo),
        hi: MetricTable::new(MetricKind::UrfHi, g.sink(), hi),
        overweight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, IntervalEdge};

    fn e(from: NodeId, to: NodeId, p: f64) -> Edge {
        Edge { from, to, p }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn single_link_weight_is_its_probability() {
        assert_eq!(subset_weights(&[0.9]), vec![0.9]);
        assert!(close(poly_weights(&[0.9])[0], 0.9));
    }

    #[test]
    fn two_equal_links() {
        for w in [subset_weights(&[0.7, 0.7]), poly_weights(&[0.7, 0.7])] {
            assert!(close(w[0], 0.455) && close(w[1], 0.455));
            assert!(close(w[0] + w[1], 0.91));
        }
    }

    #[test]
    fn unequal_links() {
        for w in [subset_weights(&[0.5, 0.9]), poly_weights(&[0.5, 0.9])] {
            assert!(close(w[0], 0.275), "{w:?}");
            assert!(close(w[1], 0.675), "{w:?}");
        }
    }

    #[test]
    fn three_equal_links() {
        let w = poly_weights(&[0.7; 3]);
        let each = 0.7 * (1.0 - 0.7 + 0.49 / 3.0);
        for x in &w {
            assert!(close(*x, each));
        }
        assert!(close(w.iter().sum(), 0.973));
    }

    #[test]
    fn ordered_weights_first_success() {
        let w = ordered_weights(&[0.7, 0.7]);
        assert!(close(w[0], 0.7) && close(w[1], 0.21));
    }

    #[test]
    fn chain_and_diamond() {
        let chain = Dodag::new(3, vec![e(0, 1, 0.7), e(1, 2, 0.7)], 2).unwrap();
        assert!(close(urf_source(&chain, 0).unwrap().get(2), 0.49));
        assert!(close(urf_sink(&chain).unwrap().get(0), 0.49));

        let diamond =
            Dodag::new(4, vec![e(0, 1, 0.7), e(0, 2, 0.7), e(1, 3, 0.7), e(2, 3, 0.7)], 3).unwrap();
        assert!(close(urf_source(&diamond, 0).unwrap().get(3), 0.637));
        assert!(close(urf_sink(&diamond).unwrap().get(0), 0.637));
    }

    #[test]
    fn sink_recursion_mixed_node() {
        // b=0, 1 -> b (0.9), 2 -> b (0.5), 2 -> 1 (0.9)
        let g = Dodag::new(3, vec![e(1, 0, 0.9), e(2, 0, 0.5), e(2, 1, 0.9)], 0).unwrap();
        let t = urf_sink(&g).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert!(close(t.get(1), 0.9));
        assert!(close(t.get(2), 0.275 + 0.675 * 0.9));
        assert!(close(t.get(2), 0.8825));
    }

    #[test]
    fn trapped_node_scores_zero() {
        let g = Dodag::new(3, vec![e(0, 1, 0.9)], 2).unwrap();
        let t = urf_sink(&g).unwrap();
        assert_eq!(t.values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn rrurf_two_links() {
        // u=0 -> 1 (rr 0.9), 0 -> 2 (rr 0.6); 1,2 -> sink 3
        let g = Dodag::new(4, vec![e(0, 2, 0.7), e(0, 1, 0.7), e(1, 3, 0.9), e(2, 3, 0.6)], 3)
            .unwrap();
        let plan = rrurf_plan(&g).unwrap();
        assert!(close(plan.table.get(0), 0.7 * 0.9 + 0.21 * 0.6));
        assert!(close(plan.table.get(0), 0.756));
        // edge 1 (to node 1) is tried first
        assert_eq!(plan.order[0], vec![1, 0]);
    }

    #[test]
    fn rrurf_single_link_and_certain_links() {
        let g = Dodag::new(3, vec![e(0, 1, 0.6), e(1, 2, 0.8)], 2).unwrap();
        assert!(close(rrurf_sink(&g).unwrap().get(0), 0.6 * 0.8));
        let sure =
            Dodag::new(4, vec![e(0, 1, 1.0), e(0, 2, 1.0), e(1, 3, 1.0), e(2, 3, 1.0)], 3).unwrap();
        assert_eq!(rrurf_sink(&sure).unwrap().values, vec![1.0; 4]);
    }

    #[test]
    fn rrurf_tie_break_prefers_probability_then_id() {
        // both neighbors have rr 1 (they are sinks' direct feeders with p=1)
        let g = Dodag::new(4, vec![e(0, 2, 0.5), e(0, 1, 0.5), e(1, 3, 1.0), e(2, 3, 1.0)], 3)
            .unwrap();
        assert_eq!(rrurf_plan(&g).unwrap().order[0], vec![1, 0]);
        let g = Dodag::new(4, vec![e(0, 1, 0.5), e(0, 2, 0.6), e(1, 3, 1.0), e(2, 3, 1.0)], 3)
            .unwrap();
        assert_eq!(rrurf_plan(&g).unwrap().order[0], vec![1, 0]);
    }

    #[test]
    fn subset_cap() {
        let edges = (1..=5).map(|v| e(0, v, 0.5)).collect();
        let g = Dodag::new(6, edges, 5).unwrap();
        assert!(matches!(
            urf_weights_subset(&g, 0, 4),
            Err(Error::OutDegreeCapExceeded { degree: 5, cap: 4, .. })
        ));
        let subset = urf_weights_subset(&g, 0, 20).unwrap();
        let poly = urf_weights_poly(&g, 0).unwrap();
        for ((v1, w1), (v2, w2)) in subset.iter().zip(&poly) {
            assert_eq!(v1, v2);
            assert!(close(*w1, *w2));
        }
    }

    #[test]
    fn bounds_overweight_flag() {
        let edges = vec![
            IntervalEdge { from: 0, to: 1, lo: 0.6, hi: 0.8 },
            IntervalEdge { from: 0, to: 2, lo: 0.6, hi: 0.8 },
            IntervalEdge { from: 1, to: 2, lo: 1.0, hi: 1.0 },
        ];
        let g = IntervalDodag::new(3, edges, 2).unwrap();
        let b = urf_bounds(&g).unwrap();
        assert_eq!(b.overweight, vec![0]);
        // both weights at 0.8 * (1 - 0.6/2) = 0.56 and both neighbors reach b surely
        assert_eq!(b.hi.get(0), 1.0);
        let lo_w = 0.6 * (1.0 - 0.8 / 2.0);
        assert!(close(b.lo.get(0), 2.0 * lo_w));
    }

    #[test]
    fn degenerate_bounds_match_point_metric() {
        let g = Dodag::new(4, vec![e(0, 1, 0.7), e(0, 2, 0.4), e(1, 3, 0.8), e(2, 3, 0.9), e(1, 2, 0.3)], 3)
            .unwrap();
        let point = urf_sink(&g).unwrap();
        let b = urf_bounds(&IntervalDodag::from_point(&g)).unwrap();
        for v in 0..4 {
            assert!(close(b.lo.get(v), point.get(v)));
            assert!(close(b.hi.get(v), point.get(v)));
        }
        assert!(b.overweight.is_empty());
    }
}
