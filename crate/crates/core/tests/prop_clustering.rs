mod common;

use adaptive_ep::clustering::{
    build_entry_index, kmeans, select_entry, voronoi_assign, EntryPointIndex, KMeansParams,
};
use adaptive_ep::vectors::{dist, NodeId};
use common::{config, real_set, vector_set};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config())]

    #[test]
    fn kmeans_is_deterministic_and_converging(set in real_set(1..60usize, 1..5usize), k in 1usize..8, seed in 0u64..100) {
        let params = KMeansParams::new(k, 10, seed);
        let a = kmeans(&set, &params);
        if k > set.len() {
            prop_assert!(a.is_err());
            return Ok(());
        }
        let a = a.unwrap();
        let b = kmeans(&set, &params).unwrap();
        prop_assert_eq!(&a.centers, &b.centers);
        prop_assert_eq!(&a.assignment, &b.assignment);
        prop_assert!(a.inertia_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-9));
        prop_assert!(a.assignment.iter().all(|&c| (c as usize) < k));
    }

    #[test]
    fn candidates_are_database_rows(set in vector_set(1..60usize, 1..4usize), k in 1usize..8, seed in 0u64..100) {
        prop_assume!(k <= set.len());
        let (eps, _) = build_entry_index(&set, &KMeansParams::new(k, 10, seed)).unwrap();
        prop_assert!(eps.k() >= 1 && eps.k() <= k);
        for (j, &id) in eps.ids().iter().enumerate() {
            prop_assert_eq!(eps.vectors().row(j), set.row(id as usize));
        }
        prop_assert!(eps.validate_against(&set).is_ok());
        let bytes = eps.encode();
        prop_assert_eq!(bytes.len(), EntryPointIndex::encoded_len(eps.k(), eps.dim()));
        prop_assert_eq!(EntryPointIndex::decode(&bytes).unwrap(), eps);
    }

    #[test]
    fn selection_and_partition_agree(
        set in vector_set(1..40usize, 1..4usize),
        ids in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        q in prop::collection::vec(-8.0f32..8.0, 3),
    ) {
        let q = &q[..set.dim()];
        let ids: Vec<NodeId> = ids.iter().map(|i| i.index(set.len()) as NodeId).collect();
        let eps = EntryPointIndex::new(ids.clone(), set.select(&ids)).unwrap();
        let chosen = select_entry(q, &eps).unwrap();
        let best = ids.iter().map(|&i| dist(q, set.row(i as usize))).fold(f32::INFINITY, f32::min);
        prop_assert_eq!(dist(q, set.row(chosen as usize)), best);
        let part = voronoi_assign(&set, eps.vectors()).unwrap();
        prop_assert_eq!(part.cell_of.len(), set.len());
        prop_assert_eq!(part.cell_sizes().iter().sum::<usize>(), set.len());
        for (i, &c) in part.cell_of.iter().enumerate() {
            let d = dist(set.row(i), eps.vectors().row(c as usize));
            for j in 0..eps.k() {
                let dj = dist(set.row(i), eps.vectors().row(j));
                prop_assert!(d < dj || (d == dj && c as usize <= j));
            }
        }
    }
}
