//! Dense vector storage, the L2 kernel and the exact brute-force oracle.
//!
//! Vectors are stored row-major in single precision. Every distance and mean
//! is accumulated in double precision and rounded once at the end, so the
//! same pair always yields the same `f32` distance regardless of which code
//! path asked for it. All rankings order by `(distance, id)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node identifier. Node `i` of a graph is row `i` of its [`VectorSet`].
pub type NodeId = u32;

/// An immutable `N x d` collection of finite `f32` vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    /// Wraps row-major `data`. Fails if `dim` is zero, the length is not a
    /// multiple of `dim`, or any value is NaN or infinite.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::usage(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite value in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        if data.len() / dim > u32::MAX as usize {
            return Err(Error::usage("more rows than fit in a 32-bit node id"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::usage("cannot infer dimension from zero rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::usage(format!(
                    "row {i} has dimension {} but row 0 has {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    /// An empty set with a fixed dimension.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Rows `ids` copied into a new set, in the given order.
    pub fn select(&self, ids: &[NodeId]) -> Self {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            data.extend_from_slice(self.row(id as usize));
        }
        Self {
            dim: self.dim,
            data,
        }
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: &VectorSet) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::usage(format!(
                "cannot append {}-dim rows to a {}-dim set",
                other.dim, self.dim
            )));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub(crate) fn check_query(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::usage(format!(
                "query has dimension {} but the set has {}",
                q.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Squared Euclidean distance.
///
/// Sixteen independent `f32` lanes let the compiler vectorize the loop
/// without reassociating a single running sum; the relative error stays
/// around `1e-6` for typical embedding dimensions.
#[inline]
pub fn l2_squared_unchecked(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 16];
    let chunks_a = a.chunks_exact(16);
    let chunks_b = b.chunks_exact(16);
    let (rem_a, rem_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for j in 0..16 {
            let d = ca[j] - cb[j];
            acc[j] += d * d;
        }
    }
    let mut tail = 0f32;
    for (x, y) in rem_a.iter().zip(rem_b) {
        let d = x - y;
        tail += d * d;
    }
    let mut sum = 0f32;
    for j in 0..8 {
        sum += acc[j] + acc[j + 8];
    }
    (sum + tail) as f64
}

/// Euclidean distance accumulated in `f64`, for analysis code that compares
/// sums of distances rather than rankings.
pub fn l2_exact(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (rem_a, rem_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for j in 0..4 {
            let d = ca[j] as f64 - cb[j] as f64;
            acc[j] += d * d;
        }
    }
    let mut tail = 0f64;
    for (x, y) in rem_a.iter().zip(rem_b) {
        let d = *x as f64 - *y as f64;
        tail += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail).sqrt()
}

/// Euclidean distance in `f64` without a dimension check.
#[inline]
pub fn l2_unchecked(a: &[f32], b: &[f32]) -> f64 {
    l2_squared_unchecked(a, b).sqrt()
}

/// Euclidean distance rounded to `f32`. This is the value every ranking in
/// the crate sorts on.
#[inline]
pub fn dist(a: &[f32], b: &[f32]) -> f32 {
    l2_unchecked(a, b) as f32
}

/// Euclidean distance between two equal-length vectors.
pub fn l2_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(l2_exact(a, b))
}

/// A `(distance, id)` pair with a total order: distance first (IEEE total
/// order), then ascending id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub dist: f32,
    pub id: NodeId,
}

impl Neighbor {
    #[inline]
    pub fn new(id: NodeId, dist: f32) -> Self {
        Self { dist, id }
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

/// A ranked result: distinct ids with ascending distances.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub ids: Vec<NodeId>,
    pub dists: Vec<f32>,
}

impl NeighborList {
    pub fn from_sorted(neighbors: &[Neighbor]) -> Self {
        Self {
            ids: neighbors.iter().map(|n| n.id).collect(),
            dists: neighbors.iter().map(|n| n.dist).collect(),
        }
    }

    /// A list with ids only (e.g. ground truth read from an ivecs file).
    /// Distances are left empty.
    pub fn from_ids(ids: Vec<NodeId>) -> Self {
        Self {
            ids,
            dists: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Exact top-`k` of `q` over `set`, ties broken by ascending id.
pub fn brute_force_knn(q: &[f32], set: &VectorSet, k: usize) -> Result<NeighborList> {
    set.check_query(q)?;
    if k == 0 {
        return Err(Error::usage("k must be positive"));
    }
    if k > set.len() {
        return Err(Error::usage(format!(
            "k = {k} exceeds the set size {}",
            set.len()
        )));
    }
    Ok(NeighborList::from_sorted(&top_k(q, set, k)))
}

pub(crate) fn top_k(q: &[f32], set: &VectorSet, k: usize) -> Vec<Neighbor> {
    let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
    for (i, row) in set.rows().enumerate() {
        let n = Neighbor::new(i as NodeId, dist(q, row));
        if heap.len() < k {
            heap.push(n);
        } else if n < *heap.peek().expect("non-empty heap") {
            heap.pop();
            heap.push(n);
        }
    }
    heap.into_sorted_vec()
}

/// Exact top-`k` for every row of `queries`, computed in parallel.
pub fn ground_truth(queries: &VectorSet, set: &VectorSet, k: usize) -> Result<Vec<NeighborList>> {
    if queries.dim() != set.dim() {
        return Err(Error::usage(format!(
            "queries have dimension {} but the set has {}",
            queries.dim(),
            set.dim()
        )));
    }
    if k == 0 || k > set.len() {
        return Err(Error::usage(format!(
            "k = {k} must be in 1..={}",
            set.len()
        )));
    }
    Ok((0..queries.len())
        .into_par_iter()
        .map(|i| NeighborList::from_sorted(&top_k(queries.row(i), set, k)))
        .collect())
}

/// Component-wise mean, accumulated in `f64`.
pub fn mean_vector(set: &VectorSet) -> Result<Vec<f32>> {
    if set.is_empty() {
        return Err(Error::usage("mean of an empty set"));
    }
    let mut acc = vec![0f64; set.dim()];
    for row in set.rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += *v as f64;
        }
    }
    let n = set.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}
