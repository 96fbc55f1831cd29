#![allow(dead_code)]

use adaptive_ep::graph::{BuildMeta, NavGraph};
use adaptive_ep::vectors::{NodeId, VectorSet};
use proptest::prelude::*;

pub const CASES: u32 = 1000;

pub fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// `n` rows of dimension `d` with small integer-valued coordinates, so that
/// exact ties occur.
pub fn vector_set(n: impl Strategy<Value = usize>, d: impl Strategy<Value = usize>) -> impl Strategy<Value = VectorSet> {
    (n, d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-8i8..8, n * d)
            .prop_map(move |v| VectorSet::new(d, v.into_iter().map(f32::from).collect()).unwrap())
    })
}

/// Like [`vector_set`] but with continuous coordinates.
pub fn real_set(n: impl Strategy<Value = usize>, d: impl Strategy<Value = usize>) -> impl Strategy<Value = VectorSet> {
    (n, d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f32..10.0, n * d).prop_map(move |v| VectorSet::new(d, v).unwrap())
    })
}

/// Random adjacency lists without self-loops or duplicates.
pub fn adjacency(n: usize, max_degree: usize) -> impl Strategy<Value = Vec<Vec<NodeId>>> {
    prop::collection::vec(prop::collection::btree_set(0..n as NodeId, 0..=max_degree.min(n)), n).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(u, s)| s.into_iter().filter(|&v| v as usize != u).collect())
            .collect()
    })
}

pub fn graph_from(lists: Vec<Vec<NodeId>>, entry: NodeId) -> NavGraph {
    let r = lists.iter().map(Vec::len).max().unwrap_or(0).max(1);
    NavGraph::from_adjacency(lists, r, entry, BuildMeta::default()).unwrap()
}

/// Random graph whose nodes all lie on a cycle through node 0, so every
/// node is reachable from every other.
pub fn strongly_connected(n: usize, extra: usize) -> impl Strategy<Value = NavGraph> {
    adjacency(n, extra).prop_map(move |mut lists| {
        for (u, l) in lists.iter_mut().enumerate() {
            let next = ((u + 1) % n) as NodeId;
            if next as usize != u && !l.contains(&next) {
                l.push(next);
            }
        }
        graph_from(lists, 0)
    })
}
