//! Routing-topology construction from a connectivity graph.
//!
//! Three builders orient (or drop) each undirected link so that packets
//! flow toward the sink:
//!
//! * [`build_minhop`] orients links down the breadth-first hop gradient.
//! * [`build_urf_gg`] is a centralized greedy: the unjoined node with the
//!   best achievable URF value joins next.
//! * [`build_urf_dt`] simulates the distributed round-based procedure in
//!   which a decreasing threshold schedule decides when, and at which mesh
//!   hop count, each node joins.
//!
//! Every node picks its downstream set with [`select_downstream`].

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{ConnectivityGraph, Dodag, Edge, NodeId};
use crate::urf::{poly_weights, urf_sink};

/// Largest candidate set [`SelectMode::Exact`] will enumerate.
pub const EXACT_CAP: usize = 15;

/// Improvement smaller than this does not count as an increase.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectMode {
    /// Enumerate every non-empty subset.
    Exact,
    /// One greedy pass over candidates sorted by `(ϱ, p)` descending.
    #[default]
    Lex,
}

/// A joined neighbor `node` reachable over a link of probability `p`,
/// advertising delivery probability `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub rho: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen downstream neighbors, ascending id.
    pub chosen: Vec<NodeId>,
    pub rho: f64,
}

/// URF delivery probability of a node forwarding over exactly `set`.
pub fn evaluate_set(set: &[Candidate]) -> f64 {
    let probs: Vec<f64> = set.iter().map(|c| c.p).collect();
    poly_weights(&probs).iter().zip(set).map(|(w, c)| w * c.rho).sum()
}

fn cmp_lex(a: &Candidate, b: &Candidate) -> Ordering {
    b.rho.total_cmp(&a.rho).then(b.p.total_cmp(&a.p)).then(a.node.cmp(&b.node))
}

/// Picks the downstream set maximizing the node's URF value.
pub fn select_downstream(candidates: &[Candidate], mode: SelectMode) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Params("no downstream candidates".into()));
    }
    match mode {
        SelectMode::Exact => select_exact(candidates),
        SelectMode::Lex => Ok(select_lex(candidates)),
    }
}

fn select_exact(candidates: &[Candidate]) -> Result<Selection> {
    if candidates.len() > EXACT_CAP {
        return Err(Error::CandidateCapExceeded { count: candidates.len(), cap: EXACT_CAP });
    }
    let mut best: Option<Selection> = None;
    let mut set = Vec::with_capacity(candidates.len());
    for mask in 1u32..(1 << candidates.len()) {
        set.clear();
        set.extend((0..candidates.len()).filter(|i| mask >> i & 1 == 1).map(|i| candidates[i]));
        let rho = evaluate_set(&set);
        let mut ids: Vec<NodeId> = set.iter().map(|c| c.node).collect();
        ids.sort_unstable();
        let better = match &best {
            None => true,
            Some(b) if rho > b.rho + GAIN_EPS => true,
            Some(b) if rho >= b.rho - GAIN_EPS => {
                (ids.len(), &ids) < (b.chosen.len(), &b.chosen)
            }
            Some(_) => false,
        };
        if better {
            best = Some(Selection { chosen: ids, rho });
        }
    }
    Ok(best.expect("at least one subset"))
}

fn select_lex(candidates: &[Candidate]) -> Selection {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(cmp_lex);
    let mut set: Vec<Candidate> = Vec::new();
    let mut rho = 0.0;
    for c in sorted {
        set.push(c);
        let trial = evaluate_set(&set);
        if trial > rho + GAIN_EPS {
            rho = trial;
        } else {
            set.pop();
        }
    }
    let mut chosen: Vec<NodeId> = set.iter().map(|c| c.node).collect();
    chosen.sort_unstable();
    Selection { chosen, rho }
}

/// Join thresholds `τ_1 ≥ τ_2 ≥ … ≥ τ_M` and the number of rounds `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    tau: Vec<f64>,
    rounds: u32,
}

impl ThresholdSchedule {
    pub fn new(tau: Vec<f64>, rounds: u32) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::Schedule("at least one threshold is required".into()));
        }
        if rounds == 0 {
            return Err(Error::Schedule("at least one round is required".into()));
        }
        if let Some(t) = tau.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Schedule(format!("threshold {t} is outside [0, 1]")));
        }
        if let Some(i) = tau.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::Schedule(format!(
                "thresholds must not increase: tau[{}] = {} < tau[{}] = {}",
                i + 1,
                tau[i],
                i + 2,
                tau[i + 1]
            )));
        }
        Ok(ThresholdSchedule { tau, rounds })
    }

    /// Parses `start:step:end` (inclusive range) or a comma-separated list.
    pub fn parse(spec: &str, rounds: u32) -> Result<Self> {
        let bad = |what: &str| Error::Schedule(format!("cannot parse {what:?} in {spec:?}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
        let parts: Vec<&str> = spec.split(':').collect();
        let tau = match parts.as_slice() {
            [start, step, end] => {
                let (start, step, end) = (num(start)?, num(step)?, num(end)?);
                if step == 0.0 || (end - start) * step < 0.0 {
                    return Err(Error::Schedule(format!("step {step} never reaches {end} from {start}")));
                }
                let count = ((end - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| ((start + step * i as f64) * 1e12).round() / 1e12).collect()
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
            _ => return Err(bad(spec)),
        };
        Self::new(tau, rounds)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.tau
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    /// Threshold for joining at hop count `h` in round `k`, i.e. `τ_m` with
    /// `m = k - h + 1`. `None` while `m < 1`; indices past the end reuse `τ_M`.
    pub fn threshold(&self, round: u32, hop: u32) -> Option<f64> {
        let m = round as i64 - hop as i64 + 1;
        if m < 1 {
            return None;
        }
        Some(self.tau[(m as usize).min(self.tau.len()) - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildResult {
    pub topology: Dodag,
    /// Mesh hop count; `None` for nodes that never joined.
    pub hop: Vec<Option<u32>>,
    /// Round (or greedy step) in which each node joined; 0 for the sink.
    pub join_round: Vec<Option<u32>>,
    /// URF delivery probability on the final topology.
    pub rho: Vec<f64>,
    /// Value each node advertised when it joined, from lower-hop links only.
    pub advertised: Vec<Option<f64>>,
}

impl BuildResult {
    pub fn unjoined(&self) -> Vec<NodeId> {
        (0..self.hop.len()).filter(|&v| self.hop[v].is_none()).collect()
    }

    /// Longest path in hops from each node to the sink.
    pub fn max_hops(&self) -> Vec<Option<u32>> {
        self.topology.longest_path_to_sink().expect("builders emit acyclic topologies")
    }
}

fn check_sink(cg: &ConnectivityGraph, b: NodeId) -> Result<()> {
    if b >= cg.node_count() {
        return Err(Error::UnknownNode { node: b, node_count: cg.node_count() });
    }
    Ok(())
}

fn finish(
    cg: &ConnectivityGraph,
    b: NodeId,
    links: Vec<(NodeId, NodeId)>,
    hop: Vec<Option<u32>>,
    join_round: Vec<Option<u32>>,
    advertised: Vec<Option<f64>>,
) -> Result<BuildResult> {
    let edges = links
        .into_iter()
        .map(|(from, to)| Edge { from, to, p: cg.link_probability(from, to).expect("link exists") })
        .collect();
    let topology = Dodag::new(cg.node_count(), edges, b)?;
    let rho = urf_sink(&topology)?.values;
    Ok(BuildResult { topology, hop, join_round, rho, advertised })
}

/// Minimum-hop topology.
///
/// Links between hop levels point down the gradient. A link inside one
/// level points from the node whose best link to the lower level is weaker
/// to the node whose best link is stronger; exact ties are dropped. Nodes
/// outside the sink's component stay unjoined.
pub fn build_minhop(cg: &ConnectivityGraph, b: NodeId) -> Result<BuildResult> {
    check_sink(cg, b)?;
    let hop = cg.hop_distances(b);
    let best_down: Vec<f64> = (0..cg.node_count())
        .map(|u| {
            cg.neighbors(u)
                .iter()
                .filter(|&&(v, _)| matches!((hop[u], hop[v]), (Some(hu), Some(hv)) if hv < hu))
                .map(|&(_, p)| p)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut links = Vec::new();
    for l in cg.links() {
        let (Some(hu), Some(hv)) = (hop[l.u], hop[l.v]) else { continue };
        match hu.cmp(&hv) {
            Ordering::Greater => links.push((l.u, l.v)),
            Ordering::Less => links.push((l.v, l.u)),
            Ordering::Equal => match best_down[l.u].partial_cmp(&best_down[l.v]) {
                Some(Ordering::Less) => links.push((l.u, l.v)),
                Some(Ordering::Greater) => links.push((l.v, l.u)),
                _ => {}
            },
        }
    }
    let advertised = vec![None; cg.node_count()];
    finish(cg, b, links, hop.clone(), hop, advertised)
}

fn joined_candidates(
    cg: &ConnectivityGraph,
    u: NodeId,
    advertised: &[Option<f64>],
    hop: &[Option<u32>],
    below: Option<u32>,
) -> Vec<Candidate> {
    cg.neighbors(u)
        .iter()
        .filter_map(|&(v, p)| {
            let rho = advertised[v]?;
            let h = hop[v]?;
            below.is_none_or(|limit| h < limit).then_some(Candidate { node: v, rho, p })
        })
        .collect()
}

/// Centralized greedy construction.
///
/// Starting from the sink, the unjoined node whose best downstream set
/// gives the highest URF value joins next (smallest id on ties) with that
/// set. Its hop count is one more than the largest among its chosen
/// neighbors. Only nodes adjacent to the last joiner are re-evaluated.
pub fn build_urf_gg(cg: &ConnectivityGraph, b: NodeId, mode: SelectMode) -> Result<BuildResult> {
    check_sink(cg, b)?;
    let n = cg.node_count();
    let mut hop = vec![None; n];
    let mut advertised = vec![None; n];
    let mut join_round = vec![None; n];
    hop[b] = Some(0);
    advertised[b] = Some(1.0);
    join_round[b] = Some(0);

    let mut best: Vec<Option<Selection>> = vec![None; n];
    let mut links = Vec::new();
    let mut last = b;
    for step in 1.. {
        for &(u, _) in cg.neighbors(last) {
            if hop[u].is_none() {
                let cands = joined_candidates(cg, u, &advertised, &hop, None);
                let sel = select_downstream(&cands, mode)?;
                best[u] = (!sel.chosen.is_empty()).then_some(sel);
            }
        }
        let next = (0..n)
            .filter(|&u| hop[u].is_none())
            .filter_map(|u| best[u].as_ref().map(|s| (u, s.rho)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        let Some((u, _)) = next else { break };
        let sel = best[u].take().unwrap();
        hop[u] = Some(1 + sel.chosen.iter().map(|&v| hop[v].unwrap()).max().unwrap());
        advertised[u] = Some(sel.rho);
        join_round[u] = Some(step);
        links.extend(sel.chosen.iter().map(|&v| (u, v)));
        last = u;
    }
    finish(cg, b, links, hop, join_round, advertised)
}

/// When the same-hop cross-link pass of [`build_urf_dt`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossLinks {
    #[default]
    EveryRound,
    AtEnd,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtOptions {
    pub mode: SelectMode,
    pub cross_links: CrossLinks,
}

/// Round-synchronous simulation of the delayed-threshold construction.
///
/// In round `k` each unjoined node with joined neighbors tries hop counts
/// from one above its lowest neighbor to one above its highest, in
/// increasing order. At hop `h` it may only use neighbors below `h`, and it
/// joins at the first `h` whose best value reaches `τ_{k-h+1}`. Decisions in
/// round `k` see only joins from earlier rounds. Joined nodes then add links
/// to same-hop neighbors that advertise a strictly higher value, when the
/// link raises their own value.
pub fn build_urf_dt(
    cg: &ConnectivityGraph,
    b: NodeId,
    schedule: &ThresholdSchedule,
    opts: DtOptions,
) -> Result<BuildResult> {
    check_sink(cg, b)?;
    let n = cg.node_count();
    let mut hop: Vec<Option<u32>> = vec![None; n];
    let mut advertised: Vec<Option<f64>> = vec![None; n];
    let mut join_round = vec![None; n];
    let mut downstream: Vec<Vec<Candidate>> = vec![Vec::new(); n];
    hop[b] = Some(0);
    advertised[b] = Some(1.0);
    join_round[b] = Some(0);
    let mut unjoined = n - 1;

    for k in 1..=schedule.rounds() {
        let mut joins = Vec::new();
        for u in (0..n).filter(|&u| hop[u].is_none()) {
            let nbr_hops = cg.neighbors(u).iter().filter_map(|&(v, _)| hop[v]);
            let (Some(lo), Some(hi)) = (nbr_hops.clone().min(), nbr_hops.max()) else { continue };
            for h in lo + 1..=hi + 1 {
                // larger h only lowers m further
                let Some(tau) = schedule.threshold(k, h) else { break };
                let cands = joined_candidates(cg, u, &advertised, &hop, Some(h));
                let sel = select_downstream(&cands, opts.mode)?;
                if !sel.chosen.is_empty() && sel.rho >= tau {
                    let chosen = cands.into_iter().filter(|c| sel.chosen.contains(&c.node)).collect();
                    joins.push((u, h, sel.rho, chosen));
                    break;
                }
            }
        }
        for (u, h, rho, chosen) in joins {
            hop[u] = Some(h);
            advertised[u] = Some(rho);
            join_round[u] = Some(k);
            downstream[u] = chosen;
            unjoined -= 1;
        }
        if opts.cross_links == CrossLinks::EveryRound {
            cross_link_pass(cg, &hop, &advertised, &mut downstream);
        }
        if unjoined == 0 {
            break;
        }
    }
    if opts.cross_links == CrossLinks::AtEnd {
        cross_link_pass(cg, &hop, &advertised, &mut downstream);
    }

    let links = downstream
        .iter()
        .enumerate()
        .flat_map(|(u, set)| set.iter().map(move |c| (u, c.node)))
        .collect();
    finish(cg, b, links, hop, join_round, advertised)
}

// Nodes go in increasing advertised value; each link points to a strictly
// higher advertised value within one hop level, so no cycle can form.
fn cross_link_pass(
    cg: &ConnectivityGraph,
    hop: &[Option<u32>],
    advertised: &[Option<f64>],
    downstream: &mut [Vec<Candidate>],
) {
    let mut order: Vec<NodeId> = (0..hop.len()).filter(|&u| hop[u].is_some() && hop[u] != Some(0)).collect();
    order.sort_by(|&x, &y| advertised[x].unwrap().total_cmp(&advertised[y].unwrap()).then(x.cmp(&y)));
    for u in order {
        let own = advertised[u].unwrap();
        let mut peers: Vec<Candidate> = cg
            .neighbors(u)
            .iter()
            .filter_map(|&(v, p)| {
                let rho = advertised[v]?;
                (hop[v] == hop[u] && rho > own && !downstream[u].iter().any(|c| c.node == v))
                    .then_some(Candidate { node: v, rho, p })
            })
            .collect();
        peers.sort_by(cmp_lex);
        let mut current = evaluate_set(&downstream[u]);
        for peer in peers {
            downstream[u].push(peer);
            let trial = evaluate_set(&downstream[u]);
            if trial > current + GAIN_EPS {
                current = trial;
            } else {
                downstream[u].pop();
            }
        }
    }
}
