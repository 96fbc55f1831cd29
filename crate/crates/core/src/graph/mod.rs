//! Navigable proximity graphs.
//!
//! Node `i` of every graph is row `i` of the vector set it was built over.
//! Builders produce a [`NavGraph`]: immutable CSR adjacency, a degree cap
//! `R`, a default entry (the medoid) and a record of how it was built.

mod connect;
mod knn;
mod nsg;
mod prune;
mod vamana;

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, Reader};
use crate::vectors::{mean_vector, top_k, NodeId, VectorSet};

pub use knn::{build_knn_graph, knn_edge_recall, KnnMethod, NnDescentParams};
pub use nsg::nsg_refine;
pub use prune::{occlusion_prune, robust_prune};
pub use vamana::vamana_refine;

pub const MNSG_MAGIC: &[u8; 4] = b"MNSG";
pub const MNSG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nsg,
    Vamana,
    Knn,
    Brute,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Nsg => "nsg",
            Algorithm::Vamana => "vamana",
            Algorithm::Knn => "knn",
            Algorithm::Brute => "brute",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nsg" => Ok(Algorithm::Nsg),
            "vamana" => Ok(Algorithm::Vamana),
            "knn" => Ok(Algorithm::Knn),
            "brute" => Ok(Algorithm::Brute),
            _ => Err(Error::usage(format!("unknown algorithm `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub algorithm: Algorithm,
    /// Out-degree cap.
    pub r: usize,
    /// Queue length of the searches run during construction.
    pub l: usize,
    /// Cap on the candidate pool handed to pruning.
    pub c: usize,
    pub alpha: f64,
    /// Base graph used by NSG refinement.
    pub knn: NnDescentParams,
    pub seed: u64,
}

impl BuildParams {
    /// R = 32, L = 64, C = 132 over an NN-Descent base graph.
    pub fn nsg() -> Self {
        Self {
            algorithm: Algorithm::Nsg,
            r: 32,
            l: 64,
            c: 132,
            alpha: 1.0,
            knn: NnDescentParams::default(),
            seed: 0,
        }
    }

    /// R = 70, L = 125, alpha = 1.2, C = 750.
    pub fn vamana() -> Self {
        Self {
            algorithm: Algorithm::Vamana,
            r: 70,
            l: 125,
            c: 750,
            alpha: 1.2,
            knn: NnDescentParams::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.l == 0 || self.c == 0 {
            return Err(Error::usage("R, L and C must be positive"));
        }
        if self.l < self.r {
            return Err(Error::usage(format!("L = {} is smaller than R = {}", self.l, self.r)));
        }
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(Error::usage(format!("alpha = {} must be at least 1", self.alpha)));
        }
        self.knn.validate()
    }
}

/// How a graph was produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub algorithm: String,
    pub params: Option<BuildParams>,
    /// How candidate pools were collected before pruning.
    pub pool: String,
    /// Edges added by the reachability repair pass.
    pub grafted_edges: usize,
    pub build_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct NavGraph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    max_degree: usize,
    default_entry: NodeId,
    meta: BuildMeta,
}

impl PartialEq for NavGraph {
    /// Compares structure only; build metadata is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
            && self.neighbors == other.neighbors
            && self.max_degree == other.max_degree
            && self.default_entry == other.default_entry
    }
}

impl NavGraph {
    /// Builds a graph from adjacency lists and checks its structure: ids in
    /// range, no self-loops, no duplicate neighbors, degrees at most
    /// `max_degree`.
    pub fn from_adjacency(
        lists: Vec<Vec<NodeId>>,
        max_degree: usize,
        default_entry: NodeId,
        meta: BuildMeta,
    ) -> Result<Self> {
        let n = lists.len();
        if n == 0 {
            return Err(Error::Invalid("a graph needs at least one node".into()));
        }
        if n > NodeId::MAX as usize {
            return Err(Error::Invalid(format!("{n} nodes exceed the id range")));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            neighbors.extend_from_slice(&l);
            offsets.push(neighbors.len());
        }
        let g = Self {
            offsets,
            neighbors,
            max_degree,
            default_entry,
            meta,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.default_entry as usize >= n {
            return Err(Error::Invalid(format!("default entry {} out of range", self.default_entry)));
        }
        let mut seen = vec![u32::MAX; n];
        for u in 0..n {
            let adj = self.neighbors(u as NodeId);
            if adj.len() > self.max_degree {
                return Err(Error::Invalid(format!(
                    "node {u} has degree {} above the cap {}",
                    adj.len(),
                    self.max_degree
                )));
            }
            for &v in adj {
                if v as usize >= n {
                    return Err(Error::Invalid(format!("node {u} links to missing node {v}")));
                }
                if v as usize == u {
                    return Err(Error::Invalid(format!("node {u} links to itself")));
                }
                if seen[v as usize] == u as u32 {
                    return Err(Error::Invalid(format!("node {u} links to {v} twice")));
                }
                seen[v as usize] = u as u32;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    /// The degree cap `R`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Largest actual out-degree.
    pub fn max_out_degree(&self) -> usize {
        (0..self.len()).map(|u| self.degree(u as NodeId)).max().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn default_entry(&self) -> NodeId {
        self.default_entry
    }

    pub fn build_meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn set_build_meta(&mut self, meta: BuildMeta) {
        self.meta = meta;
    }

    pub fn to_adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.len()).map(|u| self.neighbors(u as NodeId).to_vec()).collect()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).contains(&v)
    }

    /// BFS hop distance from `from` to every node; `None` if unreachable.
    pub fn bfs_hops(&self, from: NodeId) -> Vec<Option<u32>> {
        let mut hops = vec![None; self.len()];
        let mut queue = VecDeque::new();
        hops[from as usize] = Some(0);
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            let h = hops[u as usize].expect("queued nodes have a hop count");
            for &v in self.neighbors(u) {
                if hops[v as usize].is_none() {
                    hops[v as usize] = Some(h + 1);
                    queue.push_back(v);
                }
            }
        }
        hops
    }

    /// Number of nodes reachable from `from`, including itself.
    pub fn reachable_count(&self, from: NodeId) -> usize {
        self.bfs_hops(from).iter().filter(|h| h.is_some()).count()
    }

    pub fn all_reachable_from_entry(&self) -> bool {
        self.reachable_count(self.default_entry) == self.len()
    }

    /// Exact encoded size of a graph with `n` nodes and `edges` edges.
    pub fn encoded_len(n: usize, edges: usize) -> usize {
        4 + 4 + 8 + 4 + 8 + 8 * (n + 1) + 4 * edges
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(self.len(), self.num_edges()));
        out.extend_from_slice(MNSG_MAGIC);
        out.extend_from_slice(&MNSG_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.max_degree as u32).to_le_bytes());
        out.extend_from_slice(&(self.default_entry as u64).to_le_bytes());
        for &o in &self.offsets {
            out.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &v in &self.neighbors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes and validates a graph. Build metadata is not part of the
    /// format; the result carries an empty [`BuildMeta`].
    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.expect_magic(MNSG_MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != MNSG_VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        let at = r.offset();
        let n = r.u64("node count")?;
        if n == 0 || n > NodeId::MAX as u64 {
            return Err(Error::format(at, format!("node count {n} out of range")));
        }
        let n = n as usize;
        let max_degree = r.u32("degree cap")? as usize;
        let at = r.offset();
        let entry = r.u64("default entry")?;
        if entry >= n as u64 {
            return Err(Error::format(at, format!("default entry {entry} out of range")));
        }
        if r.remaining() / 8 < n + 1 {
            return Err(Error::format(
                r.offset(),
                format!("offset table needs {} bytes, {} left", 8 * (n + 1), r.remaining()),
            ));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let at = r.offset();
            let o = r.u64("offset")?;
            let prev = offsets.last().copied().unwrap_or(0);
            if (i == 0 && o != 0) || (o as usize) < prev || o - prev as u64 > max_degree as u64 {
                return Err(Error::format(at, format!("bad offset {o} for node {i}")));
            }
            offsets.push(o as usize);
        }
        let edges = offsets[n];
        let base = r.offset();
        let block = r.bytes(4 * edges, "adjacency block")?;
        let mut neighbors = Vec::with_capacity(edges);
        for (j, c) in block.chunks_exact(4).enumerate() {
            let v = u32::from_le_bytes(c.try_into().expect("chunk of 4"));
            if v as usize >= n {
                return Err(Error::format(base + 4 * j as u64, format!("neighbor id {v} out of range")));
            }
            neighbors.push(v);
        }
        r.finish()?;
        let g = Self {
            offsets,
            neighbors,
            max_degree,
            default_entry: entry as NodeId,
            meta: BuildMeta::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

pub fn save_graph(g: &NavGraph, path: impl AsRef<Path>) -> Result<()> {
    g.save(path)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<NavGraph> {
    NavGraph::load(path)
}

/// The row nearest to the mean of the set (ties to the lower id).
pub fn central_entry(set: &VectorSet) -> Result<NodeId> {
    let mean = mean_vector(set)?;
    Ok(top_k(&mean, set, 1)[0].id)
}

/// Builds a graph according to `params.algorithm`.
pub fn build_graph(set: &VectorSet, params: &BuildParams) -> Result<NavGraph> {
    params.validate()?;
    match params.algorithm {
        Algorithm::Nsg => {
            let base = build_knn_graph(set, params.knn.k, KnnMethod::NnDescent(params.knn.clone()), params.seed)?;
            nsg_refine(&base, set, params)
        }
        Algorithm::Vamana => vamana_refine(set, params),
        Algorithm::Knn => build_knn_graph(set, params.r, KnnMethod::NnDescent(params.knn.clone()), params.seed),
        Algorithm::Brute => build_knn_graph(set, params.r, KnnMethod::Brute, params.seed),
    }
}
