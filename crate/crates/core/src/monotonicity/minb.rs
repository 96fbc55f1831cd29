use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NavGraph;
use crate::vectors::{l2_exact, NodeId, VectorSet};

const NONE: u32 = u32::MAX;

/// Incoming edges of every node.
struct Reverse {
    offsets: Vec<usize>,
    sources: Vec<NodeId>,
}

impl Reverse {
    fn of(g: &NavGraph) -> Self {
        let n = g.len();
        let mut offsets = vec![0usize; n + 1];
        for u in 0..n as NodeId {
            for &v in g.neighbors(u) {
                offsets[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut sources = vec![0; g.num_edges()];
        for u in 0..n as NodeId {
            for &v in g.neighbors(u) {
                sources[fill[v as usize]] = u;
                fill[v as usize] += 1;
            }
        }
        Self { offsets, sources }
    }

    fn incoming(&self, v: NodeId) -> &[NodeId] {
        &self.sources[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }
}

/// Minimum backward-hop counts from every node to one target, with a
/// witness path for each.
///
/// Among the paths with the fewest backward hops, the witness has the
/// fewest hops and, among those, the lexicographically smallest node
/// sequence.
#[derive(Clone, Debug)]
pub struct BTable {
    pub target: NodeId,
    b: Vec<u32>,
    hops: Vec<u32>,
    next: Vec<NodeId>,
}

impl BTable {
    fn compute(g: &NavGraph, rev: &Reverse, set: &VectorSet, t: NodeId) -> Self {
        let n = g.len();
        let xt = set.row(t as usize);
        let dt: Vec<f64> = set.rows().map(|r| l2_exact(r, xt)).collect();
        // an edge u -> v is backward when it increases the distance to t
        let weight = |u: NodeId, v: NodeId| (dt[v as usize] > dt[u as usize]) as u32;

        let mut b = vec![NONE; n];
        b[t as usize] = 0;
        let mut deque = VecDeque::new();
        deque.push_back((t, 0u32));
        while let Some((v, bv)) = deque.pop_front() {
            if bv > b[v as usize] {
                continue;
            }
            for &u in rev.incoming(v) {
                let w = weight(u, v);
                let cand = bv + w;
                if cand < b[u as usize] {
                    b[u as usize] = cand;
                    if w == 0 {
                        deque.push_front((u, cand));
                    } else {
                        deque.push_back((u, cand));
                    }
                }
            }
        }

        let tight = |u: NodeId, v: NodeId| {
            b[v as usize] != NONE && b[u as usize] == b[v as usize] + weight(u, v)
        };
        let mut hops = vec![NONE; n];
        hops[t as usize] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &u in rev.incoming(v) {
                if hops[u as usize] == NONE && tight(u, v) {
                    hops[u as usize] = hops[v as usize] + 1;
                    queue.push_back(u);
                }
            }
        }

        let next = (0..n as NodeId)
            .map(|u| {
                if u == t || hops[u as usize] == NONE {
                    return NONE;
                }
                let want = hops[u as usize] - 1;
                g.neighbors(u)
                    .iter()
                    .copied()
                    .filter(|&v| hops[v as usize] == want && tight(u, v))
                    .min()
                    .expect("a reached node has a tight successor")
            })
            .collect();
        Self { target: t, b, hops, next }
    }

    /// Minimum backward hops from `s`, or `None` if `s` cannot reach the
    /// target.
    pub fn b(&self, s: NodeId) -> Option<u32> {
        let v = self.b[s as usize];
        (v != NONE).then_some(v)
    }

    /// Hop count of the witness path from `s`.
    pub fn hops(&self, s: NodeId) -> Option<u32> {
        let v = self.hops[s as usize];
        (v != NONE).then_some(v)
    }

    /// The witness path from `s` to the target, both included.
    pub fn path(&self, s: NodeId) -> Option<Vec<NodeId>> {
        self.hops(s)?;
        let mut path = vec![s];
        let mut u = s;
        while u != self.target {
            u = self.next[u as usize];
            path.push(u);
        }
        Some(path)
    }
}

/// Result of [`min_b`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinB {
    pub b: u32,
    pub path: Vec<NodeId>,
}

fn check(g: &NavGraph, set: &VectorSet) -> Result<()> {
    if g.len() != set.len() {
        return Err(Error::usage(format!(
            "graph has {} nodes but the set has {} rows",
            g.len(),
            set.len()
        )));
    }
    Ok(())
}

/// Fewest backward hops over all paths from `s` to `t`, with a witness.
/// `Ok(None)` means `t` is unreachable from `s`.
pub fn min_b(g: &NavGraph, set: &VectorSet, s: NodeId, t: NodeId) -> Result<Option<MinB>> {
    check(g, set)?;
    for v in [s, t] {
        if v as usize >= g.len() {
            return Err(Error::usage(format!("node {v} is out of range")));
        }
    }
    let table = BTable::compute(g, &Reverse::of(g), set, t);
    Ok(table.b(s).map(|b| MinB {
        b,
        path: table.path(s).expect("reachable"),
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Graphs with at most this many nodes are certified over all pairs.
    pub exact_threshold: usize,
    /// Ordered pairs to examine on larger graphs. Whole target columns are
    /// sampled, so the count is rounded up to a multiple of `N - 1`.
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            exact_threshold: 2000,
            pair_budget: 1_000_000,
            seed: 0,
        }
    }
}

/// The smallest `B` for which the examined pairs satisfy the B-MSNET
/// condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsnetCertificate {
    #[serde(rename = "B")]
    pub b_max: u32,
    pub node_count: usize,
    /// `true` when every ordered pair was examined; otherwise `b_max` is a
    /// lower bound on the graph's constant.
    pub exact: bool,
    /// Ordered pairs `(s, t)` with `s != t` that were examined.
    pub pairs_checked: u64,
    /// Examined pairs with no path; these are excluded from `b_max`.
    pub unreached_pairs: u64,
    pub unreached_examples: Vec<(NodeId, NodeId)>,
    /// `b_histogram[b]` counts examined pairs whose minimum is `b`.
    pub b_histogram: Vec<u64>,
    /// A pair attaining `b_max` and its witness path.
    pub worst_pair: Option<(NodeId, NodeId)>,
    pub worst_path: Option<Vec<NodeId>>,
    #[serde(skip)]
    tables: Vec<BTable>,
}

impl MsnetCertificate {
    /// Tables for every examined target.
    pub fn tables(&self) -> &[BTable] {
        &self.tables
    }

    /// The table for target `t`, if it was examined.
    pub fn table(&self, t: NodeId) -> Option<&BTable> {
        if self.exact {
            self.tables.get(t as usize)
        } else {
            self.tables.iter().find(|tb| tb.target == t)
        }
    }

    pub fn min_b(&self, s: NodeId, t: NodeId) -> Option<u32> {
        self.table(t)?.b(s)
    }

    pub fn witness(&self, s: NodeId, t: NodeId) -> Option<Vec<NodeId>> {
        self.table(t)?.path(s)
    }

    /// `true` when every ordered pair was examined and joined by a path.
    pub fn is_complete(&self) -> bool {
        self.exact && self.unreached_pairs == 0
    }
}

/// Computes `B` over all ordered pairs (graphs up to the exact threshold)
/// or over sampled target columns.
pub fn certify_bmsnet(g: &NavGraph, set: &VectorSet, opts: &CertifyOptions) -> Result<MsnetCertificate> {
    check(g, set)?;
    let n = g.len();
    let exact = n <= opts.exact_threshold;
    let targets: Vec<NodeId> = if exact {
        (0..n as NodeId).collect()
    } else {
        let columns = opts.pair_budget.div_ceil(n.saturating_sub(1).max(1)).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut t: Vec<NodeId> = rand::seq::index::sample(&mut rng, n, columns)
            .into_iter()
            .map(|i| i as NodeId)
            .collect();
        t.sort_unstable();
        t
    };
    let rev = Reverse::of(g);
    let tables: Vec<BTable> = targets
        .par_iter()
        .map(|&t| BTable::compute(g, &rev, set, t))
        .collect();

    let mut cert = MsnetCertificate {
        b_max: 0,
        node_count: n,
        exact,
        pairs_checked: 0,
        unreached_pairs: 0,
        unreached_examples: Vec::new(),
        b_histogram: Vec::new(),
        worst_pair: None,
        worst_path: None,
        tables: Vec::new(),
    };
    for table in &tables {
        let t = table.target;
        for s in 0..n as NodeId {
            if s == t {
                continue;
            }
            cert.pairs_checked += 1;
            match table.b(s) {
                None => {
                    cert.unreached_pairs += 1;
                    if cert.unreached_examples.len() < 16 {
                        cert.unreached_examples.push((s, t));
                    }
                }
                Some(b) => {
                    if cert.b_histogram.len() <= b as usize {
                        cert.b_histogram.resize(b as usize + 1, 0);
                    }
                    cert.b_histogram[b as usize] += 1;
                    if cert.worst_pair.is_none() || b > cert.b_max {
                        cert.b_max = b;
                        cert.worst_pair = Some((s, t));
                    }
                }
            }
        }
    }
    cert.tables = tables;
    cert.worst_path = cert.worst_pair.and_then(|(s, t)| cert.witness(s, t));
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BuildMeta;

    fn graph(lists: Vec<Vec<NodeId>>) -> NavGraph {
        let r = lists.iter().map(Vec::len).max().unwrap_or(0);
        NavGraph::from_adjacency(lists, r, 0, BuildMeta::default()).unwrap()
    }

    #[test]
    fn self_pair_is_trivial() {
        let set = VectorSet::from_rows(&[[0.0f32], [1.0]]).unwrap();
        let g = graph(vec![vec![1], vec![0]]);
        assert_eq!(min_b(&g, &set, 1, 1).unwrap(), Some(MinB { b: 0, path: vec![1] }));
    }

    #[test]
    fn complete_graph_is_an_msnet() {
        let set = VectorSet::from_rows(&[[0.0f32, 0.0], [3.0, 1.0], [-2.0, 4.0], [5.0, 5.0], [1.0, -3.0]]).unwrap();
        let lists = (0..5).map(|u| (0..5).filter(|&v| v != u).collect()).collect();
        let g = graph(lists);
        let cert = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.b_max, 0);
        assert!(cert.is_complete());
        assert_eq!(cert.pairs_checked, 20);
        for s in 0..5 {
            for t in 0..5 {
                if s != t {
                    assert_eq!(cert.witness(s, t).unwrap(), vec![s, t]);
                }
            }
        }
    }

    #[test]
    fn forward_cycle_on_a_line() {
        // points 0..6 on a line, edges i -> i+1 mod 6
        let n = 6;
        let set = VectorSet::new(1, (0..n).map(|i| i as f32).collect()).unwrap();
        let g = graph((0..n).map(|i| vec![((i + 1) % n) as NodeId]).collect());
        // 1 -> 2 -> ... -> 5 -> 0: hops 1..4 move away from 0, the last one
        // approaches it
        let r = min_b(&g, &set, 1, 0).unwrap().unwrap();
        assert_eq!(r.path, vec![1, 2, 3, 4, 5, 0]);
        assert_eq!(r.b, 4);
        let cert = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.b_max, 4);
        assert!(cert.b_max >= 1);
    }

    #[test]
    fn unreachable_pairs_are_reported() {
        let set = VectorSet::from_rows(&[[0.0f32], [1.0], [2.0]]).unwrap();
        let g = graph(vec![vec![1], vec![], vec![1]]);
        assert_eq!(min_b(&g, &set, 1, 0).unwrap(), None);
        let cert = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.unreached_pairs, 4);
        assert!(!cert.is_complete());
    }

    #[test]
    fn ties_prefer_fewer_hops_then_smaller_ids() {
        // 0 -> {1, 2, 3}, 1 -> 3, 2 -> 3; target 3 at distance 0
        let set = VectorSet::from_rows(&[[3.0f32, 0.0], [0.0, 2.0], [2.0, 0.0], [0.0, 0.0]]).unwrap();
        let g = graph(vec![vec![2, 1, 3], vec![3], vec![3], vec![]]);
        assert_eq!(min_b(&g, &set, 0, 3).unwrap().unwrap().path, vec![0, 3]);
        let g = graph(vec![vec![2, 1], vec![3], vec![3], vec![]]);
        assert_eq!(min_b(&g, &set, 0, 3).unwrap().unwrap().path, vec![0, 1, 3]);
    }

    fn enumerate_min_b(g: &NavGraph, set: &VectorSet, s: NodeId, t: NodeId) -> Option<usize> {
        fn walk(g: &NavGraph, set: &VectorSet, path: &mut Vec<NodeId>, t: NodeId, best: &mut Option<usize>) {
            let u = *path.last().unwrap();
            if u == t {
                let b = crate::monotonicity::r_profile(set, path, t).map_or(0, |p| p.b());
                *best = Some(best.map_or(b, |x: usize| x.min(b)));
                return;
            }
            for &v in g.neighbors(u) {
                if !path.contains(&v) {
                    path.push(v);
                    walk(g, set, path, t, best);
                    path.pop();
                }
            }
        }
        let mut best = None;
        walk(g, set, &mut vec![s], t, &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        use rand::Rng;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let data: Vec<f32> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let set = VectorSet::new(3, data).unwrap();
            let lists: Vec<Vec<NodeId>> = (0..n as NodeId)
                .map(|u| (0..n as NodeId).filter(|&v| v != u && rng.random_bool(0.3)).collect())
                .collect();
            let g = graph(lists);
            let cert = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
            for s in 0..n as NodeId {
                for t in 0..n as NodeId {
                    let want = enumerate_min_b(&g, &set, s, t);
                    assert_eq!(cert.min_b(s, t).map(|b| b as usize), want, "seed {seed} pair {s}->{t}");
                    if let Some(path) = cert.witness(s, t) {
                        assert_eq!(path[0], s);
                        for w in path.windows(2) {
                            assert!(g.has_edge(w[0], w[1]));
                        }
                        if s != t {
                            let p = crate::monotonicity::r_profile(&set, &path, t).unwrap();
                            assert_eq!(Some(p.b()), want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_certificate_is_a_lower_bound() {
        let n = 40;
        let set = VectorSet::new(1, (0..n).map(|i| i as f32).collect()).unwrap();
        let g = graph((0..n).map(|i| vec![((i + 1) % n) as NodeId]).collect());
        let exact = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
        let opts = CertifyOptions {
            exact_threshold: 10,
            pair_budget: 100,
            seed: 3,
        };
        let sampled = certify_bmsnet(&g, &set, &opts).unwrap();
        assert!(!sampled.exact);
        assert_eq!(sampled.pairs_checked, 3 * 39);
        assert!(sampled.b_max <= exact.b_max);
        assert_eq!(exact.b_max, n as u32 - 2);
    }
}
