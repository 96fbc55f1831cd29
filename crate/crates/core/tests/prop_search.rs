mod common;

use adaptive_ep::clustering::EntryPointIndex;
use adaptive_ep::search::{adaptive_search, greedy_search, SearchParams};
use adaptive_ep::vectors::{brute_force_knn, NodeId};
use common::{config, strongly_connected, vector_set};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config())]

    #[test]
    fn results_are_sorted_unique_and_bounded(
        (set, g) in (2usize..50).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), strongly_connected(n, 4))),
        q in prop::collection::vec(-8.0f32..8.0, 3),
        l in 1usize..20,
        k in 1usize..20,
        entry in any::<prop::sample::Index>(),
    ) {
        prop_assume!(k <= l);
        let q = &q[..set.dim()];
        let entry = entry.index(set.len()) as NodeId;
        let p = SearchParams::new(l, k).unwrap().with_trace();
        let r = greedy_search(&g, &set, entry, q, &p).unwrap();
        prop_assert_eq!(r.topk.len(), k.min(set.len()));
        prop_assert!(r.topk.dists.windows(2).all(|w| w[0] <= w[1]));
        let mut ids = r.topk.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), r.topk.len());
        let trace = r.trace.unwrap().expanded;
        prop_assert_eq!(trace.len(), r.hops);
        prop_assert_eq!(trace[0], entry);
        let mut t = trace.clone();
        t.sort_unstable();
        t.dedup();
        prop_assert_eq!(t.len(), trace.len());
        prop_assert!(r.dist_evals <= set.len());
    }

    #[test]
    fn full_queue_is_exact_on_connected_graphs(
        (set, g) in (2usize..40).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), strongly_connected(n, 3))),
        q in prop::collection::vec(-8.0f32..8.0, 3),
        k in 1usize..10,
    ) {
        let q = &q[..set.dim()];
        let n = set.len();
        let k = k.min(n);
        let p = SearchParams::new(n.max(k), k).unwrap();
        let r = greedy_search(&g, &set, 0, q, &p).unwrap();
        let want = brute_force_knn(q, &set, k).unwrap();
        prop_assert_eq!(r.topk.ids, want.ids);
        prop_assert_eq!(r.dist_evals, n);
    }

    #[test]
    fn single_candidate_matches_fixed_entry(
        (set, g) in (2usize..40).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), strongly_connected(n, 4))),
        q in prop::collection::vec(-8.0f32..8.0, 3),
        entry in any::<prop::sample::Index>(),
        l in 1usize..16,
    ) {
        let q = &q[..set.dim()];
        let entry = entry.index(set.len()) as NodeId;
        let p = SearchParams::new(l, 1).unwrap().with_trace();
        let fixed = greedy_search(&g, &set, entry, q, &p).unwrap();
        let eps = EntryPointIndex::single(&set, entry);
        let adaptive = adaptive_search(&g, &set, &eps, q, &p).unwrap();
        prop_assert_eq!(&adaptive.topk, &fixed.topk);
        prop_assert_eq!(adaptive.hops, fixed.hops);
        prop_assert_eq!(&adaptive.trace, &fixed.trace);
        prop_assert_eq!(adaptive.dist_evals, fixed.dist_evals + 1);
    }

    #[test]
    fn search_is_deterministic(
        (set, g) in (2usize..50).prop_flat_map(|n| (vector_set(Just(n), 1..4usize), strongly_connected(n, 5))),
        q in prop::collection::vec(-8.0f32..8.0, 3),
        l in 1usize..12,
    ) {
        let q = &q[..set.dim()];
        let p = SearchParams::new(l, 1).unwrap().with_trace();
        let a = greedy_search(&g, &set, 0, q, &p).unwrap();
        let b = greedy_search(&g, &set, 0, q, &p).unwrap();
        prop_assert_eq!(a.topk, b.topk);
        prop_assert_eq!(a.trace, b.trace);
    }
}
