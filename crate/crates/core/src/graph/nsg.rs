//! NSG refinement of a base k-NN graph.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::connect::graft;
use super::prune::{normalize_pool, occlusion_prune};
use super::{central_entry, Algorithm, BuildMeta, BuildParams, NavGraph};
use crate::error::{Error, Result};
use crate::search::{beam_search, SearchScratch};
use crate::vectors::{dist, Neighbor, NodeId, VectorSet};

/// Refines `knn` into a navigating spreading-out graph.
///
/// For every node a search for it from the medoid over the base graph, with
/// queue length `L`, yields a pool of every evaluated node plus the node's
/// base neighbors; the nearest `C` of them go through occlusion pruning to
/// at most `R` edges. Reverse edges are then added, re-pruning any list that
/// would exceed `R`, and a spanning tree from the medoid restores
/// reachability.
pub fn nsg_refine(knn: &NavGraph, set: &VectorSet, params: &BuildParams) -> Result<NavGraph> {
    params.validate()?;
    let n = set.len();
    if knn.len() != n {
        return Err(Error::usage(format!(
            "base graph has {} nodes but the set has {} rows",
            knn.len(),
            n
        )));
    }
    let start = Instant::now();
    let medoid = central_entry(set)?;
    let (r, l, c) = (params.r, params.l, params.c);

    let pruned: Vec<Vec<NodeId>> = (0..n)
        .into_par_iter()
        .map_init(
            || SearchScratch::new(n),
            |scratch, i| {
                let row = set.row(i);
                beam_search(knn, set, medoid, row, l, scratch, true);
                let mut pool = std::mem::take(&mut scratch.visited);
                for &v in knn.neighbors(i as NodeId) {
                    pool.push(Neighbor::new(v, dist(row, set.row(v as usize))));
                }
                normalize_pool(&mut pool);
                let kept = occlusion_prune(set, i as NodeId, &pool, r, c);
                pool.clear();
                scratch.visited = pool;
                kept
            },
        )
        .collect();

    let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (i, out) in pruned.iter().enumerate() {
        for &j in out {
            incoming[j as usize].push(i as NodeId);
        }
    }
    let mut lists: Vec<Vec<NodeId>> = pruned
        .par_iter()
        .zip(incoming.par_iter())
        .enumerate()
        .map(|(j, (out, inc))| {
            let extra: Vec<NodeId> = inc.iter().copied().filter(|i| !out.contains(i)).collect();
            if out.len() + extra.len() <= r {
                let mut all = out.clone();
                all.extend(extra);
                return all;
            }
            let row = set.row(j);
            let mut pool: Vec<Neighbor> = out
                .iter()
                .chain(&extra)
                .map(|&v| Neighbor::new(v, dist(row, set.row(v as usize))))
                .collect();
            normalize_pool(&mut pool);
            occlusion_prune(set, j as NodeId, &pool, r, usize::MAX)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let grafted = graft(&mut lists, set, medoid, r, l, &mut rng)?;

    let meta = BuildMeta {
        algorithm: Algorithm::Nsg.to_string(),
        params: Some(params.clone()),
        pool: format!(
            "nodes evaluated by a medoid-seeded search with queue L={l} over the base graph, \
             plus the node's base neighbors; nearest C={c} considered"
        ),
        grafted_edges: grafted,
        build_seconds: knn.build_meta().build_seconds + start.elapsed().as_secs_f64(),
    };
    let g = NavGraph::from_adjacency(lists, r, medoid, meta)?;
    if !g.all_reachable_from_entry() {
        return Err(Error::Internal("nodes unreachable after grafting".into()));
    }
    Ok(g)
}
