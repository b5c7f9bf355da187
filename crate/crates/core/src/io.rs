//! JSON graph files and canonical number formatting.
//!
//! A graph file looks like
//!
//! ```json
//! {
//!   "directed": true,
//!   "edges": [
//!     {"p": 0.69999999999999996, "u": 0, "v": 1}
//!   ],
//!   "nodes": [
//!     {"id": 0},
//!     {"id": 1, "x": 1.5, "y": 2}
//!   ],
//!   "sink": 1,
//!   "source": 0
//! }
//! ```
//!
//! Node ids may be integers or strings; they are mapped to dense indices in
//! the order the nodes are listed. Edges carry either `p` or the pair
//! `p_lo`/`p_hi`. [`GraphFile::to_canonical_json`] writes sorted keys, one
//! edge or node per line and floats with 17 significant digits, so a parsed
//! canonical file serializes back to the same bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{
    ConnectivityGraph, Dodag, Edge, IntervalDodag, IntervalEdge, Link, NodeId, Position,
};

/// Formats `x` like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (digits as i32 - 1 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds through the 12-significant-digit report format.
pub fn report_round(x: f64) -> f64 {
    format_sig(x, 12).parse().unwrap_or(x)
}

pub fn report_float(x: f64) -> String {
    format_sig(x, 12)
}

fn json_float(x: f64) -> String {
    format_sig(x, 17)
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Params(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl Label {
    fn to_json(&self) -> String {
        match self {
            Label::Int(i) => i.to_string(),
            Label::Str(s) => serde_json::to_string(s).expect("strings serialize"),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEntry {
    pub label: Label,
    pub position: Option<Position>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeProb {
    Point(f64),
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEntry {
    pub u: NodeId,
    pub v: NodeId,
    pub prob: EdgeProb,
}

/// In-memory form of a graph file, with endpoints already mapped to dense ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFile {
    pub directed: bool,
    pub sink: NodeId,
    pub source: Option<NodeId>,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    directed: bool,
    sink: Label,
    #[serde(default)]
    source: Option<Label>,
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: Label,
    x: Option<f64>,
    y: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    u: Label,
    v: Label,
    p: Option<f64>,
    p_lo: Option<f64>,
    p_hi: Option<f64>,
}

impl GraphFile {
    pub fn parse(text: &str) -> Result<GraphFile> {
        let raw: RawFile = serde_json::from_str(text)?;
        let mut index = HashMap::new();
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for (i, n) in raw.nodes.into_iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::Format(format!("node id {} listed twice", n.id)));
            }
            let position = match (n.x, n.y) {
                (Some(x), Some(y)) => Some(Position { x, y }),
                (None, None) => None,
                _ => return Err(Error::Format(format!("node {} has only one coordinate", n.id))),
            };
            nodes.push(NodeEntry { label: n.id, position });
        }
        let lookup = |l: &Label| {
            index.get(l).copied().ok_or_else(|| Error::Format(format!("unknown node id {l}")))
        };
        let mut edges = Vec::with_capacity(raw.edges.len());
        for e in &raw.edges {
            let (u, v) = (lookup(&e.u)?, lookup(&e.v)?);
            let prob = match (e.p, e.p_lo, e.p_hi) {
                (Some(p), None, None) => EdgeProb::Point(p),
                (None, Some(lo), Some(hi)) => EdgeProb::Interval { lo, hi },
                _ => {
                    return Err(Error::Format(format!(
                        "edge {}-{} needs either \"p\" or both \"p_lo\" and \"p_hi\"",
                        e.u, e.v
                    )))
                }
            };
            edges.push(EdgeEntry { u, v, prob });
        }
        let sink = lookup(&raw.sink)?;
        let source = raw.source.as_ref().map(lookup).transpose()?;
        Ok(GraphFile { directed: raw.directed, sink, source, nodes, edges })
    }

    pub fn read(path: &Path) -> Result<GraphFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        GraphFile::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_canonical_json().as_bytes())
    }

    pub fn to_canonical_json(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"directed\": {},", self.directed);
        out.push_str("  \"edges\": [");
        for (i, e) in self.edges.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let (u, v) = (self.nodes[e.u].label.to_json(), self.nodes[e.v].label.to_json());
            match e.prob {
                EdgeProb::Point(p) => {
                    let _ = write!(out, "    {{\"p\": {}, \"u\": {u}, \"v\": {v}}}", json_float(p));
                }
                EdgeProb::Interval { lo, hi } => {
                    let _ = write!(
                        out,
                        "    {{\"p_hi\": {}, \"p_lo\": {}, \"u\": {u}, \"v\": {v}}}",
                        json_float(hi),
                        json_float(lo)
                    );
                }
            }
        }
        out.push_str(if self.edges.is_empty() { "],\n" } else { "\n  ],\n" });
        out.push_str("  \"nodes\": [");
        for (i, n) in self.nodes.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(out, "    {{\"id\": {}", n.label.to_json());
            if let Some(pos) = n.position {
                let _ = write!(out, ", \"x\": {}, \"y\": {}", json_float(pos.x), json_float(pos.y));
            }
            out.push('}');
        }
        out.push_str(if self.nodes.is_empty() { "],\n" } else { "\n  ],\n" });
        let _ = write!(out, "  \"sink\": {}", self.nodes[self.sink].label.to_json());
        if let Some(s) = self.source {
            let _ = write!(out, ",\n  \"source\": {}", self.nodes[s].label.to_json());
        }
        out.push_str("\n}\n");
        out
    }

    pub fn is_interval(&self) -> bool {
        self.edges.iter().any(|e| matches!(e.prob, EdgeProb::Interval { .. }))
    }

    pub fn label(&self, v: NodeId) -> &Label {
        &self.nodes[v].label
    }

    /// Dense id of the node with the given printed label.
    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.label.to_string() == label)
    }

    pub fn positions(&self) -> Vec<Option<Position>> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    fn point_edges(&self, want: &str) -> Result<impl Iterator<Item = (NodeId, NodeId, f64)> + '_> {
        if self.is_interval() {
            return Err(Error::Format(format!(
                "interval-valued file cannot be read as {want}; use the bounds metrics"
            )));
        }
        Ok(self.edges.iter().map(|e| match e.prob {
            EdgeProb::Point(p) => (e.u, e.v, p),
            EdgeProb::Interval { .. } => unreachable!(),
        }))
    }

    pub fn to_dodag(&self) -> Result<Dodag> {
        if !self.directed {
            return Err(Error::Format("expected a directed graph file".into()));
        }
        let edges = self.point_edges("a point-valued topology")?.map(|(from, to, p)| Edge { from, to, p }).collect();
        let g = Dodag::new(self.nodes.len(), edges, self.sink)?;
        match self.source {
            Some(s) => g.with_source(s),
            None => Ok(g),
        }
    }

    pub fn to_interval(&self) -> Result<IntervalDodag> {
        if !self.directed {
            return Err(Error::Format("expected a directed graph file".into()));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| match e.prob {
                EdgeProb::Point(p) => IntervalEdge { from: e.u, to: e.v, lo: p, hi: p },
                EdgeProb::Interval { lo, hi } => IntervalEdge { from: e.u, to: e.v, lo, hi },
            })
            .collect();
        let g = IntervalDodag::new(self.nodes.len(), edges, self.sink)?;
        match self.source {
            Some(s) => g.with_source(s),
            None => Ok(g),
        }
    }

    pub fn to_connectivity(&self) -> Result<ConnectivityGraph> {
        if self.directed {
            return Err(Error::Format("expected an undirected connectivity graph file".into()));
        }
        let links = self.point_edges("a connectivity graph")?.map(|(u, v, p)| Link { u, v, p }).collect();
        ConnectivityGraph::with_positions(self.positions(), links)
    }

    fn integer_nodes(positions: impl IntoIterator<Item = Option<Position>>) -> Vec<NodeEntry> {
        positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| NodeEntry { label: Label::Int(i as i64), position })
            .collect()
    }

    pub fn from_dodag(g: &Dodag, positions: Option<&[Option<Position>]>) -> GraphFile {
        let pos = positions.map_or_else(|| vec![None; g.node_count()], <[_]>::to_vec);
        GraphFile {
            directed: true,
            sink: g.sink(),
            source: g.source(),
            nodes: Self::integer_nodes(pos),
            edges: g.edges().iter().map(|e| EdgeEntry { u: e.from, v: e.to, prob: EdgeProb::Point(e.p) }).collect(),
        }
    }

    pub fn from_interval(g: &IntervalDodag) -> GraphFile {
        GraphFile {
            directed: true,
            sink: g.sink(),
            source: g.source(),
            nodes: Self::integer_nodes(vec![None; g.node_count()]),
            edges: g
                .edges()
                .map(|e| EdgeEntry { u: e.from, v: e.to, prob: EdgeProb::Interval { lo: e.lo, hi: e.hi } })
                .collect(),
        }
    }

    pub fn from_connectivity(cg: &ConnectivityGraph, sink: NodeId) -> GraphFile {
        GraphFile {
            directed: false,
            sink,
            source: None,
            nodes: Self::integer_nodes(cg.positions().iter().copied()),
            edges: cg.links().iter().map(|l| EdgeEntry { u: l.u, v: l.v, prob: EdgeProb::Point(l.p) }).collect(),
        }
    }
}
