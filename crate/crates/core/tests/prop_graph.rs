mod common;

use adaptive_ep::graph::{
    build_graph, build_knn_graph, occlusion_prune, robust_prune, Algorithm, BuildParams, KnnMethod, NavGraph,
    NnDescentParams,
};
use adaptive_ep::vectors::{dist, Neighbor, NodeId, VectorSet};
use common::{adjacency, config, graph_from, real_set, vector_set};
use proptest::prelude::*;

fn small_params(algorithm: Algorithm, seed: u64) -> BuildParams {
    BuildParams {
        algorithm,
        r: 6,
        l: 12,
        c: 40,
        alpha: if algorithm == Algorithm::Vamana { 1.2 } else { 1.0 },
        knn: NnDescentParams {
            k: 8,
            l: 12,
            r: 10,
            s: 4,
            iter: 4,
            delta: 0.001,
        },
        seed,
    }
}

fn check_structure(g: &NavGraph, r: usize) -> Result<(), TestCaseError> {
    for u in 0..g.len() as NodeId {
        let ns = g.neighbors(u);
        prop_assert!(ns.len() <= r, "degree {} > {}", ns.len(), r);
        prop_assert!(!ns.contains(&u));
        let mut s = ns.to_vec();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), ns.len());
    }
    Ok(())
}

fn sorted_candidates(set: &VectorSet, p: NodeId) -> Vec<Neighbor> {
    let mut c: Vec<Neighbor> = (0..set.len() as NodeId)
        .map(|i| Neighbor::new(i, dist(set.row(p as usize), set.row(i as usize))))
        .collect();
    c.sort();
    c
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn refined_graphs_are_bounded_and_reachable(
        set in vector_set(12..70usize, 1..5usize),
        vamana in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let algo = if vamana { Algorithm::Vamana } else { Algorithm::Nsg };
        let params = small_params(algo, seed);
        let g = build_graph(&set, &params).unwrap();
        prop_assert_eq!(g.len(), set.len());
        check_structure(&g, params.r)?;
        prop_assert!(g.all_reachable_from_entry());
        prop_assert_eq!(&build_graph(&set, &params).unwrap(), &g);
    }

    #[test]
    fn knn_graphs_hold_k_distinct_neighbors(set in real_set(10..60usize, 1..6usize), k in 1usize..9, seed in 0u64..1000) {
        let exact = build_knn_graph(&set, k, KnnMethod::Brute, seed).unwrap();
        check_structure(&exact, k)?;
        for u in 0..set.len() as NodeId {
            prop_assert_eq!(exact.degree(u), k);
        }
        let p = NnDescentParams { k, l: k + 4, r: 10, s: 4, iter: 4, delta: 0.001 };
        let approx = build_knn_graph(&set, k, KnnMethod::NnDescent(p.clone()), seed).unwrap();
        check_structure(&approx, k)?;
        prop_assert_eq!(&build_knn_graph(&set, k, KnnMethod::NnDescent(p), seed).unwrap(), &approx);
    }

    #[test]
    fn mnsg_round_trip((n, lists) in (1usize..40).prop_flat_map(|n| (Just(n), adjacency(n, 5)))) {
        let g = graph_from(lists, (n / 2) as NodeId);
        let bytes = g.encode();
        prop_assert_eq!(bytes.len(), NavGraph::encoded_len(g.len(), g.num_edges()));
        let back = NavGraph::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_adjacency(), g.to_adjacency());
    }

    #[test]
    fn corrupted_graph_files_never_panic(n in 1usize..20, flip in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let g = graph_from((0..n).map(|u| vec![((u + 1) % n) as NodeId].into_iter().filter(|&v| v as usize != u).collect()).collect(), 0);
        let mut bytes = g.encode();
        let i = flip.index(bytes.len());
        bytes[i] = byte;
        let _ = NavGraph::decode(&bytes);
        let _ = NavGraph::decode(&bytes[..i]);
    }

    #[test]
    fn pruning_keeps_a_bounded_subset(set in vector_set(2..40usize, 1..4usize), alpha in 1.0f64..2.0, r in 1usize..10) {
        let cands = sorted_candidates(&set, 0);
        for kept in [occlusion_prune(&set, 0, &cands, r, cands.len()), robust_prune(&set, 0, &cands, alpha, r, cands.len())] {
            prop_assert!(kept.len() <= r);
            prop_assert!(!kept.contains(&0));
            let mut s = kept.clone();
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), kept.len());
            // the nearest candidate other than p always survives
            if let Some(first) = cands.iter().find(|c| c.id != 0) {
                prop_assert_eq!(kept.first(), Some(&first.id));
            }
        }
    }

    #[test]
    fn occlusion_discards_only_occluded(set in real_set(2..40usize, 1..4usize), r in 1usize..10) {
        let cands = sorted_candidates(&set, 0);
        let kept = occlusion_prune(&set, 0, &cands, r, cands.len());
        if kept.len() < r {
            let p = set.row(0);
            for c in cands.iter().filter(|c| c.id != 0 && !kept.contains(&c.id)) {
                let w = set.row(c.id as usize);
                let occluded = kept.iter().any(|&v| dist(set.row(v as usize), w) < dist(p, w));
                prop_assert!(occluded, "candidate {} dropped without an occluder", c.id);
            }
        }
    }
}
