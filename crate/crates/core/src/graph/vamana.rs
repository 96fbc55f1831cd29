//! Vamana graph construction.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::connect::graft;
use super::prune::{normalize_pool, robust_prune};
use super::{central_entry, Algorithm, BuildMeta, BuildParams, NavGraph};
use crate::error::{Error, Result};
use crate::search::{beam_search, SearchScratch};
use crate::vectors::{dist, Neighbor, NodeId, VectorSet};

/// Builds a Vamana graph: a random `R`-regular start, then one pass with
/// `alpha = 1` and one with `params.alpha`, each visiting the nodes in a
/// seeded random order. A node's new edges are the alpha-pruned union of the
/// nodes expanded while searching for it from the medoid and its current
/// edges; reverse edges are added and re-pruned on overflow.
pub fn vamana_refine(set: &VectorSet, params: &BuildParams) -> Result<NavGraph> {
    params.validate()?;
    let start = Instant::now();
    let n = set.len();
    let medoid = central_entry(set)?;
    let (r, l, c) = (params.r, params.l, params.c);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut adj: Vec<Vec<NodeId>> = (0..n)
        .map(|i| {
            let picks = rand::seq::index::sample(&mut rng, n - 1, r.min(n - 1));
            picks
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j } as NodeId)
                .collect()
        })
        .collect();

    let mut scratch = SearchScratch::new(n);
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    for alpha in [1.0, params.alpha] {
        order.shuffle(&mut rng);
        for &p in &order {
            let row = set.row(p as usize);
            beam_search(&adj, set, medoid, row, l, &mut scratch, false);
            let mut pool: Vec<Neighbor> = scratch
                .expanded
                .iter()
                .chain(&adj[p as usize])
                .map(|&v| Neighbor::new(v, dist(row, set.row(v as usize))))
                .collect();
            normalize_pool(&mut pool);
            let out = robust_prune(set, p, &pool, alpha, r, c);
            for &j in &out {
                let back = &adj[j as usize];
                if back.contains(&p) {
                    continue;
                }
                if back.len() < r {
                    adj[j as usize].push(p);
                } else {
                    let jrow = set.row(j as usize);
                    let mut pool: Vec<Neighbor> = back
                        .iter()
                        .chain(std::iter::once(&p))
                        .map(|&v| Neighbor::new(v, dist(jrow, set.row(v as usize))))
                        .collect();
                    normalize_pool(&mut pool);
                    adj[j as usize] = robust_prune(set, j, &pool, alpha, r, usize::MAX);
                }
            }
            adj[p as usize] = out;
        }
    }

    let grafted = graft(&mut adj, set, medoid, r, l, &mut rng)?;
    let meta = BuildMeta {
        algorithm: Algorithm::Vamana.to_string(),
        params: Some(params.clone()),
        pool: format!(
            "nodes expanded by a medoid-seeded search with queue L={l} plus current edges; \
             nearest C={c} considered"
        ),
        grafted_edges: grafted,
        build_seconds: start.elapsed().as_secs_f64(),
    };
    let g = NavGraph::from_adjacency(adj, r, medoid, meta)?;
    if !g.all_reachable_from_entry() {
        return Err(Error::Internal("nodes unreachable after grafting".into()));
    }
    Ok(g)
}
