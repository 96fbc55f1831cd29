//! Greedy beam search over a navigable graph.
//!
//! The candidate queue `C` keeps the `L` closest nodes seen so far, expanded
//! or not. Each round expands the closest unexpanded member of `C`, evaluates
//! its unvisited neighbors and trims `C` back to `L`; the search stops once
//! every member of `C` has been expanded.
//!
//! Because trimming always drops the farthest entry and a visited node is
//! never evaluated twice, `C` is exactly the `L` best visited nodes. The
//! implementation stores it as a bounded max-heap next to a min-heap of
//! unexpanded nodes, which expands nodes in the same order as a sorted queue
//! while staying cheap for very long queues.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::clustering::{select_entry, EntryPointIndex};
use crate::error::{Error, Result};
use crate::graph::NavGraph;
use crate::vectors::{dist, Neighbor, NeighborList, NodeId, VectorSet};

/// Read access to out-neighbor lists.
pub trait Adjacency: Sync {
    fn num_nodes(&self) -> usize;
    fn neighbors(&self, u: NodeId) -> &[NodeId];
}

impl Adjacency for NavGraph {
    fn num_nodes(&self) -> usize {
        self.len()
    }

    fn neighbors(&self, u: NodeId) -> &[NodeId] {
        NavGraph::neighbors(self, u)
    }
}

impl Adjacency for [Vec<NodeId>] {
    fn num_nodes(&self) -> usize {
        self.len()
    }

    fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self[u as usize]
    }
}

impl Adjacency for Vec<Vec<NodeId>> {
    fn num_nodes(&self) -> usize {
        self.len()
    }

    fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self[u as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Capacity `L` of the candidate queue.
    pub queue_len: usize,
    /// Number of results returned.
    pub k: usize,
    pub capture_trace: bool,
}

impl SearchParams {
    pub fn new(queue_len: usize, k: usize) -> Result<Self> {
        let p = Self {
            queue_len,
            k,
            capture_trace: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_trace(mut self) -> Self {
        self.capture_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.k > self.queue_len {
            return Err(Error::usage(format!(
                "k = {} exceeds the queue length L = {}",
                self.k, self.queue_len
            )));
        }
        Ok(())
    }
}

/// Nodes in the order they were expanded, starting with the entry.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub expanded: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Closest nodes found, ascending by distance.
    pub topk: NeighborList,
    /// Number of expanded nodes.
    pub hops: usize,
    /// Number of query-to-vector distance evaluations.
    pub dist_evals: usize,
    pub trace: Option<SearchTrace>,
}

/// Per-query working memory, reusable across queries on graphs of the same
/// size or smaller.
#[derive(Debug, Default)]
pub struct SearchScratch {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: BinaryHeap<Reverse<Neighbor>>,
    best: BinaryHeap<Neighbor>,
    pub(crate) expanded: Vec<NodeId>,
    pub(crate) visited: Vec<Neighbor>,
}

impl SearchScratch {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            stamp: vec![0; num_nodes],
            ..Self::default()
        }
    }

    fn reset(&mut self, num_nodes: usize) {
        if self.stamp.len() < num_nodes {
            self.stamp.resize(num_nodes, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.frontier.clear();
        self.best.clear();
        self.expanded.clear();
        self.visited.clear();
    }

    #[inline]
    fn visit(&mut self, u: NodeId) -> bool {
        let s = &mut self.stamp[u as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }

    /// The final queue contents, ascending.
    pub(crate) fn sorted_queue(&self) -> Vec<Neighbor> {
        let mut out = self.best.clone().into_vec();
        out.sort_unstable();
        out
    }
}

/// Runs the search, leaving the queue, the expansion order and (if
/// `record_visited`) every evaluated node in `scratch`. Returns the number
/// of distance evaluations.
pub(crate) fn beam_search<A: Adjacency + ?Sized>(
    g: &A,
    set: &VectorSet,
    entry: NodeId,
    q: &[f32],
    queue_len: usize,
    scratch: &mut SearchScratch,
    record_visited: bool,
) -> usize {
    scratch.reset(g.num_nodes());
    let first = Neighbor::new(entry, dist(q, set.row(entry as usize)));
    scratch.visit(entry);
    scratch.frontier.push(Reverse(first));
    scratch.best.push(first);
    if record_visited {
        scratch.visited.push(first);
    }
    let mut evals = 1;

    while let Some(Reverse(c)) = scratch.frontier.pop() {
        if scratch.best.len() >= queue_len && c > *scratch.best.peek().expect("non-empty") {
            // closest unexpanded node is outside C, so all of them are
            break;
        }
        scratch.expanded.push(c.id);
        for &v in g.neighbors(c.id) {
            if !scratch.visit(v) {
                continue;
            }
            let n = Neighbor::new(v, dist(q, set.row(v as usize)));
            evals += 1;
            if record_visited {
                scratch.visited.push(n);
            }
            if scratch.best.len() < queue_len {
                scratch.best.push(n);
                scratch.frontier.push(Reverse(n));
            } else if n < *scratch.best.peek().expect("non-empty") {
                scratch.best.pop();
                scratch.best.push(n);
                scratch.frontier.push(Reverse(n));
            }
        }
    }
    evals
}

/// Reusable searcher bound to one graph and its vectors.
pub struct Searcher<'a> {
    graph: &'a NavGraph,
    set: &'a VectorSet,
    scratch: SearchScratch,
}

impl<'a> Searcher<'a> {
    pub fn new(graph: &'a NavGraph, set: &'a VectorSet) -> Result<Self> {
        if graph.len() != set.len() {
            return Err(Error::usage(format!(
                "graph has {} nodes but the vector set has {} rows",
                graph.len(),
                set.len()
            )));
        }
        Ok(Self {
            graph,
            set,
            scratch: SearchScratch::new(graph.len()),
        })
    }

    pub fn search(&mut self, entry: NodeId, q: &[f32], p: &SearchParams) -> Result<SearchResult> {
        p.validate()?;
        self.set.check_query(q)?;
        if entry as usize >= self.graph.len() {
            return Err(Error::usage(format!("entry {entry} is not a node")));
        }
        let dist_evals = beam_search(self.graph, self.set, entry, q, p.queue_len, &mut self.scratch, false);
        let mut queue = self.scratch.sorted_queue();
        queue.truncate(p.k);
        Ok(SearchResult {
            topk: NeighborList::from_sorted(&queue),
            hops: self.scratch.expanded.len(),
            dist_evals,
            trace: p.capture_trace.then(|| SearchTrace {
                expanded: self.scratch.expanded.clone(),
            }),
        })
    }

    /// Searches from the candidate closest to `q`; the `K` selection
    /// distances are added to `dist_evals`.
    pub fn search_adaptive(&mut self, eps: &EntryPointIndex, q: &[f32], p: &SearchParams) -> Result<SearchResult> {
        let entry = select_entry(q, eps)?;
        let mut r = self.search(entry, q, p)?;
        r.dist_evals += eps.k();
        Ok(r)
    }

    pub fn search_default(&mut self, q: &[f32], p: &SearchParams) -> Result<SearchResult> {
        self.search(self.graph.default_entry(), q, p)
    }
}

/// Beam search from `entry`.
pub fn greedy_search(
    g: &NavGraph,
    set: &VectorSet,
    entry: NodeId,
    q: &[f32],
    p: &SearchParams,
) -> Result<SearchResult> {
    Searcher::new(g, set)?.search(entry, q, p)
}

/// Beam search from the entry candidate closest to `q`.
pub fn adaptive_search(
    g: &NavGraph,
    set: &VectorSet,
    eps: &EntryPointIndex,
    q: &[f32],
    p: &SearchParams,
) -> Result<SearchResult> {
    Searcher::new(g, set)?.search_adaptive(eps, q, p)
}
