mod common;

use adaptive_ep::graph::NavGraph;
use adaptive_ep::monotonicity::{certify_bmsnet, min_b, r_profile, CertifyOptions};
use adaptive_ep::search::{greedy_search, SearchParams};
use adaptive_ep::vectors::{l2_exact, NodeId};
use common::{config, graph_from, real_set, strongly_connected, vector_set};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config())]

    #[test]
    fn r_values_telescope(
        set in real_set(2..30usize, 16..129usize),
        path in prop::collection::vec(any::<prop::sample::Index>(), 2..51),
    ) {
        let path: Vec<NodeId> = path.iter().map(|i| i.index(set.len()) as NodeId).collect();
        let t = *path.last().unwrap();
        let p = r_profile(&set, &path, t).unwrap();
        let d = l2_exact(set.row(path[0] as usize), set.row(t as usize));
        prop_assert!((p.sum() - d).abs() <= 1e-4 * d.max(1.0));
        prop_assert_eq!(p.r_plus.len() + p.r_minus.len(), p.hops());
        prop_assert!(p.r_minus.iter().all(|&i| p.r[i] < 0.0));
        prop_assert!(p.r_plus.iter().all(|&i| p.r[i] >= 0.0));
    }

    #[test]
    fn witnesses_are_valid_and_no_worse_than_search_paths(
        (set, g) in (2usize..30).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), strongly_connected(n, 3))),
        t in any::<prop::sample::Index>(),
        l in 1usize..8,
    ) {
        let t = t.index(set.len()) as NodeId;
        let cert = certify_bmsnet(&g, &set, &CertifyOptions::default()).unwrap();
        prop_assert!(cert.is_complete());
        for s in 0..set.len() as NodeId {
            let b = cert.min_b(s, t).unwrap();
            prop_assert!(b <= cert.b_max);
            let w = cert.witness(s, t).unwrap();
            prop_assert_eq!(w[0], s);
            prop_assert_eq!(*w.last().unwrap(), t);
            for e in w.windows(2) {
                prop_assert!(g.has_edge(e[0], e[1]));
            }
            if s != t {
                prop_assert_eq!(r_profile(&set, &w, t).unwrap().b() as u32, b);
            }
        }
        // a greedy search toward t that reaches t traces a walk; the
        // expansion order contains a path whose b bounds min_b from below
        let p = SearchParams::new(l, 1).unwrap().with_trace();
        let r = greedy_search(&g, &set, 0, set.row(t as usize), &p).unwrap();
        if r.topk.ids[0] == t {
            let walk = shortest_walk(&g, &r.trace.unwrap().expanded, 0, t);
            if let Some(walk) = walk {
                if walk.len() >= 2 {
                    let b = r_profile(&set, &walk, t).unwrap().b() as u32;
                    prop_assert!(cert.min_b(0, t).unwrap() <= b);
                }
            }
        }
    }

    #[test]
    fn monotone_edges_give_zero(
        (set, lists) in (2usize..25).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), common::adjacency(n, 4))),
        t in any::<prop::sample::Index>(),
    ) {
        let n = set.len();
        let t = t.index(n) as NodeId;
        let dt = |v: NodeId| l2_exact(set.row(v as usize), set.row(t as usize));
        // keep only edges that do not move away from t
        let lists: Vec<Vec<NodeId>> = lists
            .into_iter()
            .enumerate()
            .map(|(u, l)| l.into_iter().filter(|&v| dt(v) <= dt(u as NodeId)).collect())
            .collect();
        let g = graph_from(lists, 0);
        for s in 0..n as NodeId {
            if let Some(m) = min_b(&g, &set, s, t).unwrap() {
                prop_assert_eq!(m.b, 0);
            }
        }
    }
}

/// Shortest path from `s` to `t` using only edges between expanded nodes
/// and into `t`.
fn shortest_walk(g: &NavGraph, expanded: &[NodeId], s: NodeId, t: NodeId) -> Option<Vec<NodeId>> {
    use std::collections::{HashMap, VecDeque};
    let allowed: std::collections::HashSet<NodeId> = expanded.iter().copied().chain([t]).collect();
    let mut prev = HashMap::new();
    let mut queue = VecDeque::from([s]);
    prev.insert(s, s);
    while let Some(u) = queue.pop_front() {
        if u == t {
            let mut path = vec![t];
            let mut v = t;
            while v != s {
                v = prev[&v];
                path.push(v);
            }
            path.reverse();
            return Some(path);
        }
        for &v in g.neighbors(u) {
            if allowed.contains(&v) && !prev.contains_key(&v) {
                prev.insert(v, u);
                queue.push_back(v);
            }
        }
    }
    None
}
