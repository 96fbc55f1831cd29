use adaptive_ep::graph::{
    build_graph, central_entry, load_graph, save_graph, Algorithm, BuildMeta, BuildParams, NavGraph,
};
use adaptive_ep::search::{greedy_search, SearchParams};
use adaptive_ep::synth::MixtureSpec;
use adaptive_ep::vectors::{ground_truth, VectorSet};
use adaptive_ep::bench::recall_at_k;

/// A single standard Gaussian.
fn gauss(n: usize, dim: usize) -> (VectorSet, VectorSet) {
    MixtureSpec {
        dim,
        components: 1,
        center_std: 0.0,
        ..MixtureSpec::gauss(n, 200, 11)
    }
    .generate()
    .unwrap()
}

#[test]
fn central_entry_cases() {
    let pair = VectorSet::from_rows(&[[0.0f32, 0.0], [2.0, 0.0]]).unwrap();
    assert_eq!(central_entry(&pair).unwrap(), 0);
    let one = VectorSet::from_rows(&[[5.0f32, 5.0]]).unwrap();
    assert_eq!(central_entry(&one).unwrap(), 0);
    let mut rows: Vec<[f32; 2]> = (0..25).map(|i| [(i % 5) as f32 - 2.0, (i / 5) as f32 - 2.0]).collect();
    rows.push([1000.0, 1000.0]);
    let blob = VectorSet::from_rows(&rows).unwrap();
    let c = central_entry(&blob).unwrap();
    assert_ne!(c, 25);
    // the mean is pulled toward the outlier; the closest blob point is the
    // upper-right corner
    assert_eq!(c, 24);
}

#[test]
fn nsg_at_paper_parameters_is_accurate() {
    let (base, queries) = gauss(10_000, 32);
    let g = build_graph(&base, &BuildParams::nsg()).unwrap();
    assert!(g.max_out_degree() <= 32);
    assert!(g.all_reachable_from_entry());
    assert_eq!(g.default_entry(), central_entry(&base).unwrap());
    let gt = ground_truth(&queries, &base, 10).unwrap();
    let p = SearchParams::new(64, 10).unwrap();
    let res: Vec<_> = queries
        .rows()
        .map(|q| greedy_search(&g, &base, g.default_entry(), q, &p).unwrap().topk)
        .collect();
    let recall = recall_at_k(&res, &gt, 10).unwrap();
    assert!(recall >= 0.85, "recall {recall}");
}

#[test]
fn vamana_respects_its_degree_cap() {
    let (base, _) = gauss(10_000, 32);
    let params = BuildParams::vamana();
    assert_eq!((params.r, params.l, params.alpha), (70, 125, 1.2));
    let g = build_graph(&base, &params).unwrap();
    assert!(g.max_out_degree() <= 70);
    assert!(g.all_reachable_from_entry());
    assert_eq!(g.build_meta().algorithm, "vamana");
}

#[test]
fn builds_are_deterministic_per_seed() {
    let (base, _) = gauss(2_000, 16);
    for algo in [Algorithm::Nsg, Algorithm::Vamana] {
        let params = BuildParams { algorithm: algo, ..BuildParams::nsg() }.with_seed(7);
        let a = build_graph(&base, &params).unwrap();
        let b = build_graph(&base, &params).unwrap();
        assert_eq!(a.encode(), b.encode());
    }
}

#[test]
fn saved_graphs_load_back() {
    let (base, _) = gauss(500, 8);
    let g = build_graph(&base, &BuildParams::nsg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.mnsg");
    save_graph(&g, &path).unwrap();
    let back = load_graph(&path).unwrap();
    assert_eq!(back.to_adjacency(), g.to_adjacency());
    assert_eq!(back.default_entry(), g.default_entry());
    assert_eq!(std::fs::read(&path).unwrap().len(), NavGraph::encoded_len(g.len(), g.num_edges()));
}

#[test]
fn corrupt_graph_files_are_rejected() {
    let g = NavGraph::from_adjacency(vec![vec![1], vec![2], vec![0]], 1, 0, BuildMeta::default()).unwrap();
    let bytes = g.encode();
    // last neighbor id out of range
    let mut bad = bytes.clone();
    let at = bad.len() - 4;
    bad[at..].copy_from_slice(&7u32.to_le_bytes());
    let err = NavGraph::decode(&bad).unwrap_err();
    assert!(err.to_string().contains("out of range"), "{err}");
    // truncated adjacency block
    let err = NavGraph::decode(&bytes[..bytes.len() - 2]).unwrap_err();
    assert!(err.to_string().contains("truncated adjacency block"), "{err}");
    // wrong magic
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(NavGraph::decode(&bad).is_err());
}
