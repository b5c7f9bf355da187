//! Batch comparison of the three builders over random geometric graphs.
//!
//! Run `i` of a batch uses seed `seed + i` for the generator. Each seed is
//! built with every algorithm, scored per node, and written as one CSV row
//! per (seed, algorithm, node). The aggregate table summarizes each
//! algorithm: per-run statistics over the non-sink nodes, averaged over runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::build::{build_minhop, build_urf_dt, build_urf_gg, BuildResult, DtOptions, SelectMode, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::fpp::{fpp_fast, DEFAULT_CUT_CAP};
use crate::graph::NodeId;
use crate::io::{report_float, report_round};
use crate::netgen::{random_geometric, GeoParams, GEO_SINK};
use crate::urf::rrurf_sink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    MinHop,
    UrfDt,
    UrfGg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::MinHop, Algorithm::UrfDt, Algorithm::UrfGg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MinHop => "minhop",
            Algorithm::UrfDt => "urf-dt",
            Algorithm::UrfGg => "urf-gg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Params(format!("unknown algorithm {s:?} (expected minhop, urf-dt or urf-gg)")))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub runs: u64,
    pub seed: u64,
    /// Generator settings; the seed field is overwritten per run.
    pub geo: GeoParams,
    pub schedule: ThresholdSchedule,
    pub dt: DtOptions,
    pub select: SelectMode,
    /// Also score every node with the flooding metric (slower).
    pub with_fpp: bool,
    pub cut_cap: usize,
}

impl ExperimentConfig {
    /// Forty nodes, thresholds from 1 down to 0 in steps of 0.01, 100 rounds.
    pub fn new(runs: u64, seed: u64) -> Self {
        ExperimentConfig {
            runs,
            seed,
            geo: GeoParams::default(),
            schedule: ThresholdSchedule::parse("1:-0.01:0", 100).expect("default schedule is valid"),
            dt: DtOptions::default(),
            select: SelectMode::Lex,
            with_fpp: false,
            cut_cap: DEFAULT_CUT_CAP,
        }
    }
}

/// One node of one built topology. Floats are already rounded to the
/// 12-digit report precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub node: NodeId,
    pub urf: f64,
    pub rrurf: f64,
    /// Flooding probability from the node to the sink; absent when not
    /// requested or when the cut cap was exceeded.
    pub fpp: Option<f64>,
    pub hop: Option<u32>,
    pub max_hop: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub runs: usize,
    /// Non-sink nodes summarized, over all runs.
    pub count: usize,
    pub urf_mean: f64,
    pub urf_median: f64,
    /// Population variance.
    pub urf_variance: f64,
    /// Over joined nodes only.
    pub max_hop_mean: f64,
    pub max_hop_median: f64,
}

pub fn build(algorithm: Algorithm, cfg: &ExperimentConfig, geo_seed: u64) -> Result<BuildResult> {
    let cg = random_geometric(&GeoParams { seed: geo_seed, ..cfg.geo })?;
    match algorithm {
        Algorithm::MinHop => build_minhop(&cg, GEO_SINK),
        Algorithm::UrfGg => build_urf_gg(&cg, GEO_SINK, cfg.select),
        Algorithm::UrfDt => build_urf_dt(&cg, GEO_SINK, &cfg.schedule, DtOptions { mode: cfg.select, ..cfg.dt }),
    }
}

fn rows_for(algorithm: Algorithm, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ReportRow>> {
    let built = build(algorithm, cfg, seed)?;
    let g = &built.topology;
    let rr = rrurf_sink(g)?;
    let max_hop = built.max_hops();
    let mut rows = Vec::with_capacity(g.node_count());
    for v in 0..g.node_count() {
        let fpp = if cfg.with_fpp && built.hop[v].is_some() {
            match fpp_fast(g, v, cfg.cut_cap) {
                Ok(t) => Some(report_round(t.get(g.sink()))),
                Err(Error::CutCapExceeded { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        rows.push(ReportRow {
            seed,
            algorithm,
            node: v,
            urf: report_round(built.rho[v]),
            rrurf: report_round(rr.get(v)),
            fpp,
            hop: built.hop[v],
            max_hop: max_hop[v],
        });
    }
    Ok(rows)
}

/// Runs every seed with every algorithm. Seeds run in parallel; rows come
/// back ordered by seed, then algorithm, then node.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    if cfg.runs == 0 {
        return Err(Error::Params("runs must be at least 1".into()));
    }
    let per_seed: Vec<Vec<ReportRow>> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let mut rows = Vec::new();
            for algorithm in Algorithm::ALL {
                rows.extend(rows_for(algorithm, cfg, seed)?);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    if s.len() % 2 == 1 {
        s[mid]
    } else {
        (s[mid - 1] + s[mid]) / 2.0
    }
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    mean(&xs.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
}

struct Summary {
    urf_mean: f64,
    urf_median: f64,
    urf_variance: f64,
    max_hop_mean: f64,
    max_hop_median: f64,
}

fn summarize(rows: &[&ReportRow]) -> Summary {
    let urf: Vec<f64> = rows.iter().map(|r| r.urf).collect();
    let hops: Vec<f64> = rows.iter().filter_map(|r| r.max_hop).map(f64::from).collect();
    Summary {
        urf_mean: mean(&urf),
        urf_median: median(&urf),
        urf_variance: variance(&urf),
        max_hop_mean: mean(&hops),
        max_hop_median: median(&hops),
    }
}

/// Summary per algorithm, in [`Algorithm::ALL`] order. Each statistic is
/// computed over the non-sink nodes of one run, then averaged over runs.
/// Algorithms without rows are skipped.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for algorithm in Algorithm::ALL {
        let mut runs: BTreeMap<u64, Vec<&ReportRow>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.algorithm == algorithm && r.hop != Some(0)) {
            runs.entry(r.seed).or_default().push(r);
        }
        if runs.is_empty() {
            continue;
        }
        let per_run: Vec<Summary> = runs.values().map(|r| summarize(r)).collect();
        let avg = |f: fn(&Summary) -> f64| mean(&per_run.iter().map(f).collect::<Vec<_>>());
        out.push(AggregateRow {
            algorithm,
            runs: per_run.len(),
            count: runs.values().map(Vec::len).sum(),
            urf_mean: avg(|s| s.urf_mean),
            urf_median: avg(|s| s.urf_median),
            urf_variance: avg(|s| s.urf_variance),
            max_hop_mean: avg(|s| s.max_hop_mean),
            max_hop_median: avg(|s| s.max_hop_median),
        });
    }
    out
}

const ROW_HEADER: [&str; 8] = ["seed", "algorithm", "node", "urf", "rrurf", "fpp", "hop", "max_hop"];
const AGG_HEADER: [&str; 8] =
    ["algorithm", "runs", "count", "urf_mean", "urf_median", "urf_variance", "max_hop_mean", "max_hop_median"];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

pub fn rows_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROW_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.algorithm.to_string(),
            r.node.to_string(),
            report_float(r.urf),
            report_float(r.rrurf),
            opt(r.fpp.map(report_float)),
            opt(r.hop),
            opt(r.max_hop),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

pub fn aggregate_csv(agg: &[AggregateRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGG_HEADER).expect("in-memory write");
    for a in agg {
        w.write_record([
            a.algorithm.to_string(),
            a.runs.to_string(),
            a.count.to_string(),
            report_float(a.urf_mean),
            report_float(a.urf_median),
            report_float(a.urf_variance),
            report_float(a.max_hop_mean),
            report_float(a.max_hop_median),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

fn field<T: FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Format(format!("bad {} value {raw:?}", ROW_HEADER[i])))
}

fn opt_field<T: FromStr>(record: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    match record.get(i) {
        None | Some("") => Ok(None),
        Some(_) => field(record, i).map(Some),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    if *reader.headers().map_err(csv_error)? != csv::StringRecord::from(ROW_HEADER.to_vec()) {
        return Err(Error::Format("unexpected rows header".into()));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            Ok(ReportRow {
                seed: field(&rec, 0)?,
                algorithm: field(&rec, 1)?,
                node: field(&rec, 2)?,
                urf: field(&rec, 3)?,
                rrurf: field(&rec, 4)?,
                fpp: opt_field(&rec, 5)?,
                hop: opt_field(&rec, 6)?,
                max_hop: opt_field(&rec, 7)?,
            })
        })
        .collect()
}

/// Recomputes the aggregate from a rows file and compares it with an
/// aggregate file, byte for byte.
pub fn self_check(rows_text: &str, aggregate_text: &str) -> Result<()> {
    let recomputed = aggregate_csv(&aggregate(&parse_rows_csv(rows_text)?));
    if recomputed != aggregate_text {
        return Err(Error::Format("aggregate does not match the rows it was computed from".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algorithm: Algorithm, node: NodeId, urf: f64, hop: Option<u32>, max_hop: Option<u32>) -> ReportRow {
        ReportRow { seed: 1, algorithm, node, urf, rrurf: urf, fpp: None, hop, max_hop }
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn aggregate_skips_sink_and_keeps_unjoined() {
        let rows = vec![
            row(Algorithm::MinHop, 0, 1.0, Some(0), Some(0)),
            row(Algorithm::MinHop, 1, 0.8, Some(1), Some(1)),
            row(Algorithm::MinHop, 2, 0.6, Some(2), Some(3)),
            row(Algorithm::MinHop, 3, 0.0, None, None),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 1);
        let a = &agg[0];
        assert_eq!(a.count, 3);
        assert!((a.urf_mean - 1.4 / 3.0).abs() < 1e-15);
        assert_eq!(a.urf_median, 0.6);
        assert_eq!(a.max_hop_mean, 2.0);
    }

    #[test]
    fn aggregate_averages_per_run_statistics() {
        let mut rows = vec![
            row(Algorithm::UrfDt, 1, 0.2, Some(1), Some(1)),
            row(Algorithm::UrfDt, 2, 0.4, Some(1), Some(2)),
            row(Algorithm::UrfDt, 1, 0.9, Some(1), Some(4)),
            row(Algorithm::UrfDt, 2, 0.9, Some(1), Some(4)),
        ];
        rows[2].seed = 2;
        rows[3].seed = 2;
        let a = &aggregate(&rows)[0];
        assert_eq!((a.runs, a.count), (2, 4));
        assert!((a.urf_median - (0.3 + 0.9) / 2.0).abs() < 1e-15);
        assert!((a.urf_variance - 0.01 / 2.0).abs() < 1e-15);
        assert_eq!(a.max_hop_median, 2.75);
    }

    #[test]
    fn csv_round_trip_and_self_check() {
        let mut rows = vec![
            row(Algorithm::UrfGg, 0, 1.0, Some(0), Some(0)),
            row(Algorithm::UrfGg, 1, 0.123456789012, Some(1), Some(2)),
        ];
        rows[1].fpp = Some(0.5);
        let text = rows_csv(&rows);
        assert!(text.starts_with("seed,algorithm,node,urf,rrurf,fpp,hop,max_hop\n"));
        assert_eq!(parse_rows_csv(&text).unwrap(), rows);
        let agg = aggregate_csv(&aggregate(&rows));
        self_check(&text, &agg).unwrap();
        assert!(self_check(&text, &agg.replace("urf-gg,1,1", "urf-gg,1,2")).is_err());
    }

    #[test]
    fn small_batch_is_deterministic() {
        let mut cfg = ExperimentConfig::new(2, 5);
        cfg.geo.nodes = 12;
        cfg.geo.side = 5.0;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 3 * 12);
        assert_eq!(a[0].seed, 5);
        assert_eq!(a.last().unwrap().seed, 6);
    }
}
