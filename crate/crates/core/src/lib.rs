//! Delivery reliability of mesh routing DAGs and construction of reliable
//! routing topologies.
//!
//! Two forwarding models are scored:
//!
//! * flooding, where every node rebroadcasts once on all outgoing links
//!   ([`fpp`]);
//! * unicast with retries, where a relay tries its outgoing links once
//!   each, in random order or by downstream quality ([`urf`]).
//!
//! [`build`] turns an undirected connectivity graph into a routing DAG,
//! [`sim`] cross-checks the metrics by Monte-Carlo, [`netgen`] makes test
//! networks, and [`io`] / [`experiment`] hold the file formats and the batch
//! comparison.
//!
//! ```
//! use meshrel::{fpp_fast, urf_sink, Dodag, Edge};
//!
//! // a -> {1, 2} -> b, every link 0.7
//! let e = |from, to| Edge { from, to, p: 0.7 };
//! let g = Dodag::new(4, vec![e(0, 1), e(0, 2), e(1, 3), e(2, 3)], 3)?;
//! assert!((fpp_fast(&g, 0, 25)?.get(3) - 0.7399).abs() < 1e-12);
//! assert!((urf_sink(&g)?.get(0) - 0.637).abs() < 1e-12);
//! # Ok::<(), meshrel::Error>(())
//! ```

pub mod build;
pub mod error;
pub mod experiment;
pub mod fpp;
pub mod graph;
pub mod io;
pub mod netgen;
pub mod sim;
pub mod urf;

pub use build::{
    build_minhop, build_urf_dt, build_urf_gg, select_downstream, BuildResult, Candidate, CrossLinks, DtOptions,
    SelectMode, Selection, ThresholdSchedule,
};
pub use error::{Error, ErrorKind, Result};
pub use fpp::{fpp_bounds, fpp_bruteforce, fpp_fast, fpp_fast_traced, CutStep, FppBounds};
pub use graph::{
    ConnectivityGraph, Dodag, Edge, IntervalDodag, IntervalEdge, Link, MetricKind, MetricTable, NodeId, Position,
    ValidationReport, Violation,
};
pub use io::GraphFile;
pub use sim::{simulate, ForwardingModel, TrialConfig};
pub use urf::{rrurf_sink, rrurf_source, urf_bounds, urf_sink, urf_source, UrfBounds};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub mod graphs {}
    #[doc = include_str!("../../../book/src/flooding.md")]
    pub mod flooding {}
    #[doc = include_str!("../../../book/src/unicast.md")]
    pub mod unicast {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/builders.md")]
    pub mod builders {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
