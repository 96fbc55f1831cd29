//! Base k-nearest-neighbor graphs: exact, or approximate via NN-Descent.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{central_entry, BuildMeta, NavGraph};
use crate::error::{Error, Result};
use crate::vectors::{dist, top_k, NodeId, VectorSet};

/// NN-Descent parameters: output degree `k`, pool size `l`, reverse-list
/// cap `r`, new-sample size `s`, and the maximum iteration count. An
/// iteration that changes fewer than `delta * N * k` pool entries ends the
/// descent early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnDescentParams {
    pub k: usize,
    pub l: usize,
    pub r: usize,
    pub s: usize,
    pub iter: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.001
}

impl Default for NnDescentParams {
    fn default() -> Self {
        Self {
            k: 64,
            l: 114,
            r: 100,
            s: 10,
            iter: 10,
            delta: default_delta(),
        }
    }
}

impl NnDescentParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.r == 0 || self.s == 0 {
            return Err(Error::usage("NN-Descent K, L, R and S must be positive"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::usage(format!("NN-Descent delta = {} must lie in [0, 1)", self.delta)));
        }
        if self.l < self.k {
            return Err(Error::usage(format!(
                "NN-Descent pool size L = {} is smaller than K = {}",
                self.l, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KnnMethod {
    Brute,
    NnDescent(NnDescentParams),
}

/// Directed k-NN graph: every node links to its `k` nearest other rows.
///
/// The degree cap of the result is `k` and its default entry is the medoid.
/// NN-Descent output is deterministic for a fixed seed regardless of thread
/// count.
pub fn build_knn_graph(set: &VectorSet, k: usize, method: KnnMethod, seed: u64) -> Result<NavGraph> {
    let n = set.len();
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if k >= n {
        return Err(Error::usage(format!("k = {k} must be smaller than the set size {n}")));
    }
    let start = Instant::now();
    let (lists, algorithm, pool) = match &method {
        KnnMethod::Brute => (brute_lists(set, k), "brute", "exact k nearest rows".to_string()),
        KnnMethod::NnDescent(p) => {
            p.validate()?;
            let p = NnDescentParams { k, ..p.clone() };
            let pool = format!(
                "nn-descent K={} L={} R={} S={} iter={}",
                p.k, p.l, p.r, p.s, p.iter
            );
            (nn_descent(set, &p, seed), "knn", pool)
        }
    };
    let meta = BuildMeta {
        algorithm: algorithm.into(),
        params: None,
        pool,
        grafted_edges: 0,
        build_seconds: start.elapsed().as_secs_f64(),
    };
    NavGraph::from_adjacency(lists, k, central_entry(set)?, meta)
}

fn brute_lists(set: &VectorSet, k: usize) -> Vec<Vec<NodeId>> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            top_k(set.row(i), set, k + 1)
                .into_iter()
                .filter(|nb| nb.id as usize != i)
                .take(k)
                .map(|nb| nb.id)
                .collect()
        })
        .collect()
}

/// Mean fraction of each node's exact neighbors present in `approx`.
pub fn knn_edge_recall(approx: &NavGraph, exact: &NavGraph) -> f64 {
    let n = exact.len().min(approx.len());
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n as NodeId)
        .into_par_iter()
        .map(|u| {
            let truth = exact.neighbors(u);
            if truth.is_empty() {
                return 1.0;
            }
            let got = approx.neighbors(u);
            truth.iter().filter(|v| got.contains(v)).count() as f64 / truth.len() as f64
        })
        .sum();
    total / n as f64
}

#[derive(Clone, Copy, Debug)]
struct Cand {
    dist: f32,
    id: NodeId,
    new: bool,
}

impl Cand {
    #[inline]
    fn key(&self) -> (f32, NodeId) {
        (self.dist, self.id)
    }
}

#[inline]
fn less(a: (f32, NodeId), b: (f32, NodeId)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt()
}

/// Candidate neighbors of one node, ascending by `(dist, id)`, at most `cap`.
struct Pool {
    items: Vec<Cand>,
    /// Length of the prefix from which new entries are sampled.
    window: usize,
}

impl Pool {
    /// Keeps the best `cap` entries of everything ever offered, so the final
    /// contents do not depend on the order of offers.
    fn offer(&mut self, id: NodeId, d: f32, cap: usize) -> bool {
        let key = (d, id);
        if self.items.len() == cap && !less(key, self.items[cap - 1].key()) {
            return false;
        }
        let pos = self.items.partition_point(|c| less(c.key(), key));
        if pos < self.items.len() && self.items[pos].id == id {
            return false;
        }
        self.items.insert(pos, Cand { dist: d, id, new: true });
        self.items.truncate(cap);
        true
    }

    /// Distance above which offers are rejected.
    fn bound(&self, cap: usize) -> f32 {
        if self.items.len() < cap {
            f32::INFINITY
        } else {
            self.worst()
        }
    }

    fn worst(&self) -> f32 {
        self.items.last().map_or(f32::INFINITY, |c| c.dist)
    }
}

fn nn_descent(set: &VectorSet, p: &NnDescentParams, seed: u64) -> Vec<Vec<NodeId>> {
    let n = set.len();
    let cap = p.l.min(n - 1);

    let pools: Vec<Mutex<Pool>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let picks = rand::seq::index::sample(&mut rng, n - 1, cap);
            let mut items: Vec<Cand> = picks
                .into_iter()
                .map(|j| {
                    let j = if j >= i { j + 1 } else { j } as NodeId;
                    Cand {
                        dist: dist(set.row(i), set.row(j as usize)),
                        id: j,
                        new: true,
                    }
                })
                .collect();
            items.sort_unstable_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
            Mutex::new(Pool { items, window: p.s })
        })
        .collect();

    // Upper bound on every pool's worst distance, readable without locking.
    // Offers strictly beyond it can never enter the pool.
    let worst: Vec<AtomicU32> = pools
        .iter()
        .map(|m| AtomicU32::new(m.lock().expect("lock").bound(cap).to_bits()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xD1B5_4A32_D192_ED03));
    for _ in 0..p.iter {
        let (new_lists, old_lists) = sample_lists(&pools, p, &mut rng);
        let updates: usize = (0..n)
            .into_par_iter()
            .map(|u| local_join(set, &pools, &worst, &new_lists[u], &old_lists[u], cap))
            .sum();
        if updates == 0 || (updates as f64) < p.delta * n as f64 * p.k as f64 {
            break;
        }
    }

    pools
        .into_iter()
        .map(|m| {
            let pool = m.into_inner().expect("no poisoned pool");
            pool.items.iter().take(p.k).map(|c| c.id).collect()
        })
        .collect()
}

/// Chooses the new and old join partners of every node, including reverse
/// neighbors. Sequential so that reservoir sampling of reverse lists is
/// deterministic.
fn sample_lists(
    pools: &[Mutex<Pool>],
    p: &NnDescentParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<NodeId>>, Vec<Vec<NodeId>>) {
    let n = pools.len();
    let worst: Vec<f32> = pools.iter().map(|m| m.lock().expect("lock").worst()).collect();
    let mut new_lists = vec![Vec::new(); n];
    let mut old_lists = vec![Vec::new(); n];
    let mut rev_new: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut rev_old: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut seen_new = vec![0usize; n];
    let mut seen_old = vec![0usize; n];

    let reservoir = |list: &mut Vec<NodeId>, seen: &mut usize, id: NodeId, rng: &mut ChaCha8Rng| {
        *seen += 1;
        if list.len() < p.r {
            list.push(id);
        } else {
            let j = rng.random_range(0..*seen);
            if j < p.r {
                list[j] = id;
            }
        }
    };

    for u in 0..n {
        let mut pool = pools[u].lock().expect("lock");
        let limit = (pool.window + p.s).min(pool.items.len());
        let (mut taken, mut l) = (0, 0);
        while l < limit && taken < p.s {
            if pool.items[l].new {
                taken += 1;
            }
            l += 1;
        }
        pool.window = l;
        for c in pool.items[..l].iter_mut() {
            let v = c.id as usize;
            let reverse_useful = c.dist > worst[v];
            if c.new {
                new_lists[u].push(c.id);
                if reverse_useful {
                    reservoir(&mut rev_new[v], &mut seen_new[v], u as NodeId, rng);
                }
                c.new = false;
            } else {
                old_lists[u].push(c.id);
                if reverse_useful {
                    reservoir(&mut rev_old[v], &mut seen_old[v], u as NodeId, rng);
                }
            }
        }
    }

    for u in 0..n {
        new_lists[u].append(&mut rev_new[u]);
        new_lists[u].sort_unstable();
        new_lists[u].dedup();
        old_lists[u].append(&mut rev_old[u]);
        old_lists[u].sort_unstable();
        old_lists[u].dedup();
        old_lists[u].retain(|v| new_lists[u].binary_search(v).is_err());
        old_lists[u].truncate(2 * p.r);
    }
    (new_lists, old_lists)
}

fn local_join(
    set: &VectorSet,
    pools: &[Mutex<Pool>],
    worst: &[AtomicU32],
    new: &[NodeId],
    old: &[NodeId],
    cap: usize,
) -> usize {
    let mut updates = 0;
    let offer = |to: NodeId, id: NodeId, d: f32| -> usize {
        let bound = &worst[to as usize];
        if d > f32::from_bits(bound.load(Ordering::Relaxed)) {
            return 0;
        }
        let mut pool = pools[to as usize].lock().expect("lock");
        let added = pool.offer(id, d, cap);
        bound.store(pool.bound(cap).to_bits(), Ordering::Relaxed);
        added as usize
    };
    let mut pair = |a: NodeId, b: NodeId| {
        let d = dist(set.row(a as usize), set.row(b as usize));
        if d > f32::from_bits(worst[a as usize].load(Ordering::Relaxed))
            && d > f32::from_bits(worst[b as usize].load(Ordering::Relaxed))
        {
            return;
        }
        updates += offer(a, b, d) + offer(b, a, d);
    };
    for (i, &a) in new.iter().enumerate() {
        for &b in &new[i + 1..] {
            pair(a, b);
        }
        for &b in old {
            if a != b {
                pair(a, b);
            }
        }
    }
    updates
}
