//! Edge-selection rules applied to a node's candidate pool.

use crate::vectors::{dist, Neighbor, NodeId, VectorSet};

/// Monotonic occlusion: walks candidates nearest-first and keeps `w` unless
/// an already kept `v` satisfies `d(v, w) < d(p, w)`.
///
/// `candidates` must be sorted ascending by distance to `p`; `p` itself and
/// repeated ids are skipped. At most `c` candidates are considered and at
/// most `r` kept.
pub fn occlusion_prune(set: &VectorSet, p: NodeId, candidates: &[Neighbor], r: usize, c: usize) -> Vec<NodeId> {
    select(set, p, candidates, r, c, |d_vw, d_pw| d_vw < d_pw)
}

/// The alpha rule: drops `w` once a kept `v` satisfies
/// `alpha * d(v, w) <= d(p, w)`. Same conventions as [`occlusion_prune`].
pub fn robust_prune(set: &VectorSet, p: NodeId, candidates: &[Neighbor], alpha: f64, r: usize, c: usize) -> Vec<NodeId> {
    select(set, p, candidates, r, c, |d_vw, d_pw| alpha * d_vw as f64 <= d_pw as f64)
}

fn select(
    set: &VectorSet,
    p: NodeId,
    candidates: &[Neighbor],
    r: usize,
    c: usize,
    occludes: impl Fn(f32, f32) -> bool,
) -> Vec<NodeId> {
    debug_assert!(candidates.windows(2).all(|w| w[0] <= w[1]));
    let mut kept: Vec<NodeId> = Vec::with_capacity(r);
    let mut considered = 0;
    let mut last = None;
    for w in candidates {
        if kept.len() >= r || considered >= c {
            break;
        }
        if w.id == p || last == Some(w.id) {
            continue;
        }
        last = Some(w.id);
        considered += 1;
        let row = set.row(w.id as usize);
        if kept.iter().all(|&v| !occludes(dist(set.row(v as usize), row), w.dist)) {
            kept.push(w.id);
        }
    }
    kept
}

/// Sorts a pool by `(dist, id)` and removes repeated ids.
pub(crate) fn normalize_pool(pool: &mut Vec<Neighbor>) {
    pool.sort_unstable();
    pool.dedup_by_key(|n| n.id);
}
