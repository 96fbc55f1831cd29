//! Reachability repair: attaches every node the default entry cannot reach.

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::search::{beam_search, SearchScratch};
use crate::vectors::{NodeId, VectorSet};

fn mark_from(adj: &[Vec<NodeId>], from: NodeId, reached: &mut [bool]) {
    if reached[from as usize] {
        return;
    }
    reached[from as usize] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for &v in &adj[u as usize] {
            if !reached[v as usize] {
                reached[v as usize] = true;
                stack.push(v);
            }
        }
    }
}

/// Grows a spanning tree from `entry`. Each unreached node (lowest id first)
/// is linked from the closest reached node with spare degree found by a
/// search for it, or else from a random reached node with spare degree.
/// When every reached node is full, the nearest one's last edge `u -> w`
/// is routed through the new node as `u -> id -> w`.
/// Returns the number of edges added.
pub(crate) fn graft(
    adj: &mut [Vec<NodeId>],
    set: &VectorSet,
    entry: NodeId,
    max_degree: usize,
    queue_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let n = adj.len();
    let mut reached = vec![false; n];
    mark_from(adj, entry, &mut reached);
    let mut scratch = SearchScratch::new(n);
    let mut added = 0;
    let mut scan = 0;
    loop {
        while scan < n && reached[scan] {
            scan += 1;
        }
        if scan == n {
            return Ok(added);
        }
        let id = scan as NodeId;
        beam_search(&*adj, set, entry, set.row(scan), queue_len, &mut scratch, true);
        let mut pool = scratch.visited.clone();
        pool.sort_unstable();
        let root = pool
            .iter()
            .map(|nb| nb.id)
            .find(|&v| adj[v as usize].len() < max_degree);
        match root {
            Some(v) => adj[v as usize].push(id),
            None => {
                let open: Vec<NodeId> = (0..n as NodeId)
                    .filter(|&v| reached[v as usize] && adj[v as usize].len() < max_degree)
                    .collect();
                match open.choose(rng) {
                    Some(&v) => adj[v as usize].push(id),
                    None => splice(adj, pool[0].id, id, max_degree)?,
                }
            }
        }
        added += 1;
        mark_from(adj, id, &mut reached);
    }
}

fn splice(adj: &mut [Vec<NodeId>], u: NodeId, id: NodeId, max_degree: usize) -> Result<()> {
    let w = match adj[u as usize].last_mut() {
        Some(slot) => std::mem::replace(slot, id),
        None => return Err(Error::Internal("no reached node can link the unreached node".into())),
    };
    let out = &mut adj[id as usize];
    if !out.contains(&w) {
        if out.len() < max_degree {
            out.push(w);
        } else if let Some(last) = out.last_mut() {
            *last = w;
        }
    }
    Ok(())
}
