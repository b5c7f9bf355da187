//! Monte-Carlo forwarding simulation, used to cross-check the analytic metrics.
//!
//! Every trial draws one up/down state per edge, then pushes a packet from
//! the source under the chosen forwarding model. Trial `i` uses its own
//! ChaCha8 stream (`rand_chacha` 0.3, seeded with `seed`, stream `i`), so
//! results do not depend on how trials are spread across threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dodag, NodeId};
use crate::urf::rrurf_plan;

/// Name and version of the per-trial generator, recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3), stream = trial index";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardingModel {
    /// Every node rebroadcasts once on all outgoing links.
    Flood,
    /// Unicast, links tried once each in a fresh uniformly random order.
    UrfRandomOrder,
    /// Unicast, links tried by descending downstream RRURF value.
    RrOrdered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialConfig {
    pub trials: u64,
    pub seed: u64,
    pub model: ForwardingModel,
    pub source: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// `sqrt(p̂ (1 - p̂) / n)`.
    pub fn std_error(&self) -> f64 {
        let p = self.value();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Whether `analytic` lies within `sigmas` standard errors of the estimate.
    /// A zero standard error demands an exact match.
    pub fn agrees_with(&self, analytic: f64, sigmas: f64) -> bool {
        let se = self.std_error();
        if se == 0.0 {
            (analytic - self.value()).abs() <= 1e-12
        } else {
            (analytic - self.value()).abs() <= sigmas * se
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub model: ForwardingModel,
    pub source: NodeId,
    pub nodes: Vec<Estimate>,
}

impl EstimateTable {
    pub fn get(&self, v: NodeId) -> &Estimate {
        &self.nodes[v]
    }
}

/// Random stream of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

struct Simulator<'g> {
    g: &'g Dodag,
    topo: Vec<NodeId>,
    rr_order: Option<Vec<Vec<usize>>>,
    cfg: TrialConfig,
}

impl Simulator<'_> {
    /// Runs one trial, marking every node the packet reached.
    fn trial(&self, index: u64, up: &mut [bool], hit: &mut [bool], scratch: &mut Vec<usize>) {
        let mut rng = trial_rng(self.cfg.seed, index);
        for (state, edge) in up.iter_mut().zip(self.g.edges()) {
            *state = rng.gen::<f64>() < edge.p;
        }
        hit.fill(false);
        let a = self.cfg.source;
        hit[a] = true;
        match self.cfg.model {
            ForwardingModel::Flood => flood_into(self.g, &self.topo, up, hit),
            ForwardingModel::UrfRandomOrder | ForwardingModel::RrOrdered => {
                let mut at = a;
                while at != self.g.sink() {
                    scratch.clear();
                    match &self.rr_order {
                        Some(order) => scratch.extend_from_slice(&order[at]),
                        None => {
                            scratch.extend_from_slice(self.g.out_edges(at));
                            scratch.shuffle(&mut rng);
                        }
                    }
                    match scratch.iter().find(|&&e| up[e]) {
                        Some(&e) => {
                            at = self.g.edge(e).to;
                            hit[at] = true;
                        }
                        None => break,
                    }
                }
            }
        }
    }

    fn run_range(&self, range: std::ops::Range<u64>) -> Vec<u64> {
        let n = self.g.node_count();
        let mut counts = vec![0u64; n];
        let mut up = vec![false; self.g.edges().len()];
        let mut hit = vec![false; n];
        let mut scratch = Vec::new();
        for i in range {
            self.trial(i, &mut up, &mut hit, &mut scratch);
            for (c, h) in counts.iter_mut().zip(&hit) {
                *c += *h as u64;
            }
        }
        counts
    }
}

fn flood_into(g: &Dodag, topo: &[NodeId], up: &[bool], hit: &mut [bool]) {
    for &u in topo {
        if hit[u] {
            for &e in g.out_edges(u) {
                if up[e] {
                    hit[g.edge(e).to] = true;
                }
            }
        }
    }
}

/// Nodes reached by flooding from `source` when exactly the edges marked in
/// `up` work.
pub fn flood_reach(g: &Dodag, source: NodeId, up: &[bool]) -> Result<Vec<bool>> {
    if source >= g.node_count() {
        return Err(Error::UnknownNode { node: source, node_count: g.node_count() });
    }
    if up.len() != g.edges().len() {
        return Err(Error::Params(format!("{} edge states for {} edges", up.len(), g.edges().len())));
    }
    let topo = g.topological_order()?;
    let mut hit = vec![false; g.node_count()];
    hit[source] = true;
    flood_into(g, &topo, up, &mut hit);
    Ok(hit)
}

const CHUNK: u64 = 4096;

/// Simulates `cfg.trials` packets from `cfg.source`.
///
/// Per-node hit counts are exact integer sums over trials, so the table is
/// identical for a given `(g, cfg)` regardless of thread count.
pub fn simulate(g: &Dodag, cfg: TrialConfig) -> Result<EstimateTable> {
    if cfg.trials == 0 {
        return Err(Error::Params("trials must be at least 1".into()));
    }
    if cfg.source >= g.node_count() {
        return Err(Error::UnknownNode { node: cfg.source, node_count: g.node_count() });
    }
    let topo = g.topological_order()?;
    let rr_order = match cfg.model {
        ForwardingModel::RrOrdered => Some(rrurf_plan(g)?.order),
        _ => None,
    };
    let sim = Simulator { g, topo, rr_order, cfg };
    let chunks = cfg.trials.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| sim.run_range(c * CHUNK..((c + 1) * CHUNK).min(cfg.trials)))
        .reduce(
            || vec![0u64; g.node_count()],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
                acc
            },
        );
    Ok(EstimateTable {
        model: cfg.model,
        source: cfg.source,
        nodes: counts.into_iter().map(|hits| Estimate { hits, trials: cfg.trials }).collect(),
    })
}
