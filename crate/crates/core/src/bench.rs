//! Recall, throughput and `(K, L)` grid measurements.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{build_entry_index, EntryPointIndex, KMeansParams};
use crate::error::{Error, Result};
use crate::graph::NavGraph;
use crate::io::write_atomic;
use crate::search::{SearchParams, SearchResult, Searcher};
use crate::vectors::{NeighborList, VectorSet};

/// Version of the CSV column set and the manifest layout.
pub const BENCH_SCHEMA_VERSION: u32 = 1;

/// Mean over queries of `|R ∩ R̂| / k`, comparing the first `k` ids of each
/// result with the first `k` ground-truth ids.
pub fn recall_at_k(results: &[NeighborList], gt: &[NeighborList], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if results.len() != gt.len() {
        return Err(Error::usage(format!(
            "{} result lists but {} ground-truth lists",
            results.len(),
            gt.len()
        )));
    }
    if results.is_empty() {
        return Err(Error::usage("no queries"));
    }
    let mut total = 0.0;
    for (i, (r, t)) in results.iter().zip(gt).enumerate() {
        if t.len() < k {
            return Err(Error::usage(format!(
                "ground truth of query {i} has {} ids, fewer than k = {k}",
                t.len()
            )));
        }
        let truth = &t.ids[..k];
        let hits = r.ids.iter().take(k).filter(|id| truth.contains(id)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / results.len() as f64)
}

/// Where each query's search starts.
#[derive(Clone, Copy, Debug)]
pub enum EntryMode<'a> {
    /// The graph's default entry (the medoid).
    Fixed,
    /// The nearest candidate of an entry-point index.
    Adaptive(&'a EntryPointIndex),
}

impl EntryMode<'_> {
    pub fn k(&self) -> usize {
        match self {
            EntryMode::Fixed => 1,
            EntryMode::Adaptive(eps) => eps.k(),
        }
    }
}

fn search_one(s: &mut Searcher<'_>, mode: EntryMode<'_>, q: &[f32], p: &SearchParams) -> Result<SearchResult> {
    match mode {
        EntryMode::Fixed => s.search_default(q, p),
        EntryMode::Adaptive(eps) => s.search_adaptive(eps, q, p),
    }
}

/// Runs every query once and returns the results in query order.
pub fn run_queries(
    graph: &NavGraph,
    set: &VectorSet,
    mode: EntryMode<'_>,
    queries: &VectorSet,
    p: &SearchParams,
) -> Result<Vec<SearchResult>> {
    Searcher::new(graph, set)?;
    set.check_query(queries.row(0))?;
    (0..queries.len())
        .into_par_iter()
        .map_init(
            || Searcher::new(graph, set).expect("checked above"),
            |s, i| search_one(s, mode, queries.row(i), p),
        )
        .collect()
}

/// Throughput of one configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QpsMeasurement {
    /// Mean of the per-repeat throughputs.
    pub qps: f64,
    /// Wall time of every timed repeat.
    pub repeat_seconds: Vec<f64>,
}

/// Times `repeats` passes over `n_queries` queries after one untimed
/// warm-up pass. Each worker owns the state made by `init`; the clock wraps
/// the whole parallel region.
pub fn measure_qps<S, I, F>(init: I, run: F, n_queries: usize, threads: usize, repeats: usize) -> Result<QpsMeasurement>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) + Sync + Send,
{
    if repeats == 0 {
        return Err(Error::usage("repeats must be at least 1"));
    }
    if threads == 0 {
        return Err(Error::usage("threads must be at least 1"));
    }
    if n_queries == 0 {
        return Err(Error::usage("no queries"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let pass = || {
        pool.install(|| {
            (0..n_queries).into_par_iter().for_each_init(&init, |s, i| run(s, i));
        })
    };
    pass();
    let mut repeat_seconds = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        pass();
        repeat_seconds.push(start.elapsed().as_secs_f64().max(1e-9));
    }
    let qps = repeat_seconds.iter().map(|s| n_queries as f64 / s).sum::<f64>() / repeats as f64;
    Ok(QpsMeasurement { qps, repeat_seconds })
}

/// One measured `(K, L)` configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub algorithm: String,
    /// Build parameters and pool definition as compact JSON.
    pub build_meta: String,
    /// Number of entry candidates; 1 means the fixed medoid entry.
    #[serde(rename = "K")]
    pub k_candidates: usize,
    #[serde(rename = "L")]
    pub queue_len: usize,
    pub k: usize,
    pub recall: f64,
    pub qps: f64,
    pub mean_hops: f64,
    pub mean_dist_evals: f64,
    pub threads: usize,
    pub repeats: usize,
    pub kmeans_iters: usize,
}

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 13] = [
    "dataset",
    "algorithm",
    "build_meta",
    "K",
    "L",
    "k",
    "recall",
    "qps",
    "mean_hops",
    "mean_dist_evals",
    "threads",
    "repeats",
    "kmeans_iters",
];

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub dataset: String,
    pub threads: usize,
    pub repeats: usize,
    /// Recorded with every row; the iteration count the indexes were built
    /// with.
    pub kmeans_iters: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dataset: "unnamed".into(),
            threads: 1,
            repeats: 5,
            kmeans_iters: crate::clustering::DEFAULT_KMEANS_ITERS,
        }
    }
}

/// Measures one configuration: a deterministic pass for recall and
/// counters, then timed passes for throughput.
pub fn bench_config(
    graph: &NavGraph,
    set: &VectorSet,
    mode: EntryMode<'_>,
    queries: &VectorSet,
    gt: &[NeighborList],
    p: &SearchParams,
    opts: &SweepOptions,
) -> Result<BenchRecord> {
    let results = run_queries(graph, set, mode, queries, p)?;
    let lists: Vec<NeighborList> = results.iter().map(|r| r.topk.clone()).collect();
    let recall = recall_at_k(&lists, gt, p.k)?;
    let n = results.len() as f64;
    let mean_hops = results.iter().map(|r| r.hops as f64).sum::<f64>() / n;
    let mean_dist_evals = results.iter().map(|r| r.dist_evals as f64).sum::<f64>() / n;
    let m = measure_qps(
        || Searcher::new(graph, set).expect("validated by the recall pass"),
        |s, i| {
            let _ = search_one(s, mode, queries.row(i), p);
        },
        queries.len(),
        opts.threads,
        opts.repeats,
    )?;
    let meta = graph.build_meta();
    Ok(BenchRecord {
        dataset: opts.dataset.clone(),
        algorithm: meta.algorithm.clone(),
        build_meta: serde_json::to_string(meta)?,
        k_candidates: mode.k(),
        queue_len: p.queue_len,
        k: p.k,
        recall,
        qps: m.qps,
        mean_hops,
        mean_dist_evals,
        threads: opts.threads,
        repeats: opts.repeats,
        kmeans_iters: opts.kmeans_iters,
    })
}

/// One record per `(K, L)`, K ascending then L in the given order. The key
/// `1` is measured from the graph's fixed medoid entry whatever index it
/// maps to.
pub fn sweep(
    graph: &NavGraph,
    set: &VectorSet,
    eps_per_k: &BTreeMap<usize, EntryPointIndex>,
    queries: &VectorSet,
    gt: &[NeighborList],
    l_list: &[usize],
    k: usize,
    opts: &SweepOptions,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::with_capacity(eps_per_k.len() * l_list.len());
    for (&kk, eps) in eps_per_k {
        let mode = if kk == 1 { EntryMode::Fixed } else { EntryMode::Adaptive(eps) };
        for &l in l_list {
            let p = SearchParams::new(l, k)?;
            out.push(bench_config(graph, set, mode, queries, gt, &p, opts)?);
        }
    }
    Ok(out)
}

/// Highest QPS among the rows for `k_candidates` whose recall reaches
/// `min_recall`.
pub fn best_qps_at_recall(records: &[BenchRecord], k_candidates: usize, min_recall: f64) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.k_candidates == k_candidates && r.recall >= min_recall)
        .map(|r| r.qps)
        .max_by(f64::total_cmp)
}

/// `(K, L1, L2)` triples where recall dropped although `L2 > L1`.
pub fn recall_drops(records: &[BenchRecord]) -> Vec<(usize, usize, usize)> {
    let mut by_k: BTreeMap<usize, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        by_k.entry(r.k_candidates).or_default().push(r);
    }
    let mut drops = Vec::new();
    for (k, mut rows) in by_k {
        rows.sort_by_key(|r| r.queue_len);
        for w in rows.windows(2) {
            if w[1].queue_len > w[0].queue_len && w[1].recall < w[0].recall {
                drops.push((k, w[0].queue_len, w[1].queue_len));
            }
        }
    }
    drops
}

pub fn records_to_csv(records: &[BenchRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &records_to_csv(records)?)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Memory and preparation cost of an entry-point index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverheadReport {
    #[serde(rename = "K")]
    pub k_candidates: usize,
    pub eps_bytes: u64,
    pub graph_bytes: u64,
    /// `eps_bytes / graph_bytes`.
    pub ratio: f64,
    /// Seconds spent in k-means plus candidate snapping, if measured.
    pub prep_seconds: Option<f64>,
}

pub fn overhead_report(eps: &EntryPointIndex, graph_file_size: u64, prep_seconds: Option<f64>) -> OverheadReport {
    let eps_bytes = EntryPointIndex::encoded_len(eps.k(), eps.dim()) as u64;
    OverheadReport {
        k_candidates: eps.k(),
        eps_bytes,
        graph_bytes: graph_file_size,
        ratio: eps_bytes as f64 / graph_file_size.max(1) as f64,
        prep_seconds,
    }
}

/// Builds an entry-point index and times the whole preparation.
pub fn timed_entry_index(set: &VectorSet, params: &KMeansParams) -> Result<(EntryPointIndex, f64)> {
    let start = Instant::now();
    let (eps, _) = build_entry_index(set, params)?;
    Ok((eps, start.elapsed().as_secs_f64()))
}

/// Host description recorded in run manifests.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}
