//! Slow reference implementations written straight from the model
//! definitions. They share no code with the library beyond the graph type.
#![allow(dead_code)]

use meshrel::netgen::{random_dodag, RandomDagParams};
use meshrel::{Dodag, NodeId};
use rand::Rng;

/// Flooding reach probabilities from `a`: sum over all edge states, with
/// reachability found by relaxing until nothing changes.
pub fn flood_oracle(g: &Dodag, a: NodeId) -> Vec<f64> {
    let m = g.edges().len();
    assert!(m <= 22, "oracle is exponential in the edge count");
    let mut prob = vec![0.0; g.node_count()];
    for state in 0u64..1 << m {
        let mut weight = 1.0;
        for (i, e) in g.edges().iter().enumerate() {
            weight *= if state >> i & 1 == 1 { e.p } else { 1.0 - e.p };
        }
        let mut reached = vec![false; g.node_count()];
        reached[a] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for (i, e) in g.edges().iter().enumerate() {
                if state >> i & 1 == 1 && reached[e.from] && !reached[e.to] {
                    reached[e.to] = true;
                    changed = true;
                }
            }
        }
        for (v, r) in reached.iter().enumerate() {
            if *r {
                prob[v] += weight;
            }
        }
    }
    prob
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, k - 1);
            out.push(q);
        }
    }
    out
}

/// Random-order unicast weights: average over every retry order and every
/// up/down state of which link carries the packet.
pub fn random_order_oracle(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let orders = permutations(k);
    let mut w = vec![0.0; k];
    for state in 0u64..1 << k {
        let mut weight = 1.0;
        for (i, q) in p.iter().enumerate() {
            weight *= if state >> i & 1 == 1 { *q } else { 1.0 - q };
        }
        for order in &orders {
            if let Some(&first) = order.iter().find(|&&l| state >> l & 1 == 1) {
                w[first] += weight / orders.len() as f64;
            }
        }
    }
    w
}

/// Fixed-order weights by state enumeration.
pub fn fixed_order_oracle(p_in_order: &[f64]) -> Vec<f64> {
    let k = p_in_order.len();
    let mut w = vec![0.0; k];
    for state in 0u64..1 << k {
        let mut weight = 1.0;
        for (i, q) in p_in_order.iter().enumerate() {
            weight *= if state >> i & 1 == 1 { *q } else { 1.0 - q };
        }
        if let Some(first) = (0..k).find(|&l| state >> l & 1 == 1) {
            w[first] += weight;
        }
    }
    w
}

fn memo_sink(g: &Dodag, u: NodeId, memo: &mut Vec<Option<f64>>, weights: &dyn Fn(&Dodag, NodeId, &[f64]) -> Vec<(NodeId, f64)>) -> f64 {
    if let Some(x) = memo[u] {
        return x;
    }
    let x = if u == g.sink() {
        1.0
    } else {
        let down: Vec<f64> = g.out_edges(u).iter().map(|&e| memo_sink(g, g.edge(e).to, memo, weights)).collect();
        weights(g, u, &down).iter().map(|&(v, w)| w * memo_sink(g, v, memo, weights)).sum()
    };
    memo[u] = Some(x);
    x
}

/// URF toward the sink by memoized recursion over the oracle weights.
pub fn urf_oracle(g: &Dodag) -> Vec<f64> {
    let w = |g: &Dodag, u: NodeId, _: &[f64]| {
        let links = g.out_edges(u);
        let p: Vec<f64> = links.iter().map(|&e| g.edge(e).p).collect();
        random_order_oracle(&p).into_iter().zip(links).map(|(w, &e)| (g.edge(e).to, w)).collect()
    };
    let mut memo = vec![None; g.node_count()];
    (0..g.node_count()).map(|u| memo_sink(g, u, &mut memo, &w)).collect()
}

/// RRURF toward the sink: links tried by downstream value, then p, both
/// descending, then neighbor id.
pub fn rrurf_oracle(g: &Dodag) -> Vec<f64> {
    let w = |g: &Dodag, u: NodeId, down: &[f64]| {
        let links = g.out_edges(u);
        let mut idx: Vec<usize> = (0..links.len()).collect();
        idx.sort_by(|&x, &y| {
            let (ex, ey) = (g.edge(links[x]), g.edge(links[y]));
            down[y].partial_cmp(&down[x]).unwrap().then(ey.p.partial_cmp(&ex.p).unwrap()).then(ex.to.cmp(&ey.to))
        });
        let p: Vec<f64> = idx.iter().map(|&i| g.edge(links[i]).p).collect();
        fixed_order_oracle(&p).into_iter().zip(&idx).map(|(w, &i)| (g.edge(links[i]).to, w)).collect()
    };
    let mut memo = vec![None; g.node_count()];
    (0..g.node_count()).map(|u| memo_sink(g, u, &mut memo, &w)).collect()
}

pub fn small_dodag(seed: u64, nodes: usize, max_edges: usize) -> Dodag {
    let params = RandomDagParams { nodes, max_out_degree: 4, max_edges: Some(max_edges), p_lo: 0.05, p_hi: 0.95 };
    random_dodag(&params, seed).unwrap()
}

pub fn random_probs(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen::<f64>()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
