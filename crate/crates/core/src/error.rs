use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    ResourceCap,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} is out of range (graph has {node_count} nodes)")]
    UnknownNode { node: NodeId, node_count: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge {u} -> {v}")]
    DuplicateEdge { u: NodeId, v: NodeId },

    #[error("edge {u} -> {v}: probability {p} is outside [0, 1]")]
    BadProbability { u: NodeId, v: NodeId, p: f64 },

    #[error("edge {u} -> {v}: interval [{lo}, {hi}] is not ordered")]
    BadInterval { u: NodeId, v: NodeId, lo: f64, hi: f64 },

    #[error("graph contains a cycle through {witness:?}")]
    Cycle { witness: Vec<NodeId> },

    #[error("{edges} edges exceed the brute-force cap of {cap}")]
    EdgeCapExceeded { edges: usize, cap: usize },

    #[error("vertex cut of size {cut} exceeds the cap of {cap}")]
    CutCapExceeded { cut: usize, cap: usize },

    #[error("node {node} has outdegree {degree}, above the subset-sum cap of {cap}; use the polynomial form")]
    OutDegreeCapExceeded { node: NodeId, degree: usize, cap: usize },

    #[error("{count} candidates exceed the exact-selection cap of {cap}; use lexicographic selection")]
    CandidateCapExceeded { count: usize, cap: usize },

    #[error("invalid threshold schedule: {0}")]
    Schedule(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("could not place {placed} of {wanted} nodes after {attempts} rejection attempts")]
    Placement { placed: usize, wanted: usize, attempts: usize },

    #[error("no connected graph after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("malformed graph file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EdgeCapExceeded { .. }
            | Error::CutCapExceeded { .. }
            | Error::OutDegreeCapExceeded { .. }
            | Error::CandidateCapExceeded { .. } => ErrorKind::ResourceCap,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
