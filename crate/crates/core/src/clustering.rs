//! k-means, entry-point candidates and Voronoi partitions.
//!
//! Candidate generation clusters the database with Lloyd's algorithm and
//! snaps every center to its nearest database vector; the snapped ids form
//! an [`EntryPointIndex`]. At query time [`select_entry`] scans the `K`
//! candidates linearly and hands the closest one to the graph search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Reader;
use crate::vectors::{dist, l2_exact, top_k, NodeId, VectorSet};

/// Default number of Lloyd iterations.
pub const DEFAULT_KMEANS_ITERS: usize = 25;

pub const MEPS_MAGIC: &[u8; 4] = b"MEPS";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub n_iter: usize,
    pub seed: u64,
    /// Train on a seeded subsample of at most `k * max_points_per_centroid`
    /// rows. `None` trains on every row.
    pub max_points_per_centroid: Option<usize>,
}

impl KMeansParams {
    pub fn new(k: usize, n_iter: usize, seed: u64) -> Self {
        Self {
            k,
            n_iter,
            seed,
            max_points_per_centroid: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub centers: VectorSet,
    /// Cell of every training row.
    pub assignment: Vec<u32>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
    /// Row ids the model was trained on (all rows unless subsampled).
    pub training_rows: Option<Vec<NodeId>>,
}

/// Lloyd's algorithm from a seeded k-means++ initialization.
///
/// Runs at most `n_iter` assignment/update rounds and stops early once no
/// assignment changes. The assignment step keeps Hamerly's distance bounds
/// so most points skip the full `K`-way scan; a point only keeps its center
/// without a scan when the bounds prove it strictly nearest, so the result
/// equals plain Lloyd with `(distance, index)` tie-breaking.
pub fn lloyd_kmeans(set: &VectorSet, k: usize, n_iter: usize, seed: u64) -> Result<KMeansResult> {
    kmeans(set, &KMeansParams::new(k, n_iter, seed))
}

pub fn kmeans(set: &VectorSet, params: &KMeansParams) -> Result<KMeansResult> {
    let k = params.k;
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if k > set.len() {
        return Err(Error::usage(format!("k = {k} exceeds the set size {}", set.len())));
    }
    if params.n_iter == 0 {
        return Err(Error::usage("n_iter must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let (train, training_rows) = match params.max_points_per_centroid {
        Some(m) if k.saturating_mul(m) < set.len() => {
            let n = k * m;
            let ids = rand::seq::index::sample(&mut rng, set.len(), n);
            let mut ids: Vec<NodeId> = ids.into_iter().map(|i| i as NodeId).collect();
            ids.sort_unstable();
            (set.select(&ids), Some(ids))
        }
        _ => (set.clone(), None),
    };

    let dim = train.dim();
    let n = train.len();
    let mut centers = plus_plus_init(&train, k, &mut rng);

    let mut state = Hamerly::new(n);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut last_inertia;

    loop {
        let half_sep = half_separation(&centers, k, dim);
        let changed = state.assign(&train, &centers, &half_sep, k);
        repair_empty(&train, &mut centers, &mut state, k, dim);
        last_inertia = state.exact_inertia(&train, &centers, dim);
        history.push(last_inertia);
        if iterations == params.n_iter || (iterations > 0 && changed == 0) {
            break;
        }
        let moved = update_centers(&train, &mut centers, &state.assign, k, dim);
        state.shift_bounds(&moved);
        iterations += 1;
    }

    let centers = VectorSet::new(dim, centers.iter().map(|&c| c as f32).collect())?;
    Ok(KMeansResult {
        centers,
        assignment: state.assign,
        inertia: last_inertia,
        iterations_run: iterations,
        inertia_history: history,
        training_rows,
    })
}

/// k-means++ seeding. A point whose current nearest center lies at least
/// twice its distance away from the new center cannot move closer, so its
/// distance is not recomputed.
fn plus_plus_init(set: &VectorSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = set.len();
    let dim = set.dim();
    let mut centers = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.extend(set.row(first).iter().map(|&v| v as f64));
    let mut d2: Vec<f64> = set
        .rows()
        .map(|r| sq_to_center(r, &centers[..dim]))
        .collect();
    let mut nearest = vec![0u32; n];
    for m in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
                pick = Some(i);
            }
            pick.expect("positive total weight")
        } else {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.extend(set.row(pick).iter().map(|&v| v as f64));
        let c = &centers[m * dim..];
        let gap: Vec<f64> = (0..m).map(|j| center_dist(c, &centers[j * dim..(j + 1) * dim])).collect();
        d2.par_iter_mut()
            .zip(nearest.par_iter_mut())
            .zip(set.as_slice().par_chunks_exact(dim))
            .for_each(|((w, near), r)| {
                if gap[*near as usize] * (1.0 - BOUND_SLACK) >= 2.0 * w.sqrt() {
                    return;
                }
                let d = sq_to_center(r, c);
                if d < *w {
                    *w = d;
                    *near = m as u32;
                }
            });
    }
    centers
}

#[inline]
fn sq_to_center(x: &[f32], c: &[f64]) -> f64 {
    let mut acc = [0f64; 4];
    let cx = x.chunks_exact(4);
    let cc = c.chunks_exact(4);
    let (rx, rc) = (cx.remainder(), cc.remainder());
    for (a, b) in cx.zip(cc) {
        for j in 0..4 {
            let d = a[j] as f64 - b[j];
            acc[j] += d * d;
        }
    }
    let mut tail = 0.0;
    for (a, b) in rx.iter().zip(rc) {
        let d = *a as f64 - b;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn center_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Half the distance from each center to its closest other center.
fn half_separation(centers: &[f64], k: usize, dim: usize) -> Vec<f64> {
    (0..k)
        .into_par_iter()
        .map(|j| {
            let cj = &centers[j * dim..(j + 1) * dim];
            let mut best = f64::INFINITY;
            for o in 0..k {
                if o != j {
                    best = best.min(center_dist(cj, &centers[o * dim..(o + 1) * dim]));
                }
            }
            0.5 * best
        })
        .collect()
}

// Bounds are compared with a relative margin so rounding can never let a
// point skip a scan that would have changed (or tie-broken) its center.
const BOUND_SLACK: f64 = 1e-9;

struct Hamerly {
    assign: Vec<u32>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl Hamerly {
    fn new(n: usize) -> Self {
        Self {
            assign: vec![u32::MAX; n],
            upper: vec![f64::INFINITY; n],
            lower: vec![0.0; n],
        }
    }

    /// Returns how many points changed cell.
    fn assign(&mut self, set: &VectorSet, centers: &[f64], half_sep: &[f64], k: usize) -> usize {
        let dim = set.dim();
        self.assign
            .par_iter_mut()
            .zip(self.upper.par_iter_mut())
            .zip(self.lower.par_iter_mut())
            .zip(set.as_slice().par_chunks_exact(dim))
            .map(|(((a, u), l), x)| {
                if *a != u32::MAX {
                    let bound = half_sep[*a as usize].max(*l);
                    if *u * (1.0 + BOUND_SLACK) < bound {
                        return 0;
                    }
                    let ca = &centers[*a as usize * dim..(*a as usize + 1) * dim];
                    *u = sq_to_center(x, ca).sqrt();
                    if *u * (1.0 + BOUND_SLACK) < bound {
                        return 0;
                    }
                }
                let (mut b1, mut d1, mut d2) = (0u32, f64::INFINITY, f64::INFINITY);
                for j in 0..k {
                    let d = sq_to_center(x, &centers[j * dim..(j + 1) * dim]);
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                        b1 = j as u32;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                let changed = (*a != b1) as usize;
                *a = b1;
                *u = d1.sqrt();
                *l = d2.sqrt();
                changed
            })
            .sum()
    }

    fn shift_bounds(&mut self, moved: &[f64]) {
        let (mut m1, mut m1_idx, mut m2) = (0f64, usize::MAX, 0f64);
        for (j, &m) in moved.iter().enumerate() {
            if m > m1 {
                m2 = m1;
                m1 = m;
                m1_idx = j;
            } else if m > m2 {
                m2 = m;
            }
        }
        self.upper
            .par_iter_mut()
            .zip(self.lower.par_iter_mut())
            .zip(self.assign.par_iter())
            .for_each(|((u, l), &a)| {
                *u += moved[a as usize];
                let other = if a as usize == m1_idx { m2 } else { m1 };
                *l = (*l - other).max(0.0);
            });
    }

    fn exact_inertia(&self, set: &VectorSet, centers: &[f64], dim: usize) -> f64 {
        self.assign
            .par_iter()
            .zip(set.as_slice().par_chunks_exact(dim))
            .map(|(&a, x)| sq_to_center(x, &centers[a as usize * dim..(a as usize + 1) * dim]))
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

/// Gives every empty cluster the point farthest from its current center.
fn repair_empty(set: &VectorSet, centers: &mut [f64], state: &mut Hamerly, k: usize, dim: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in &state.assign {
            counts[a as usize] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (usize::MAX, -1.0f64);
        for (i, (&a, x)) in state.assign.iter().zip(set.rows()).enumerate() {
            if counts[a as usize] < 2 {
                continue;
            }
            let d = sq_to_center(x, &centers[a as usize * dim..(a as usize + 1) * dim]);
            if d > far.1 {
                far = (i, d);
            }
        }
        let (i, _) = far;
        if i == usize::MAX {
            return;
        }
        state.assign[i] = empty as u32;
        state.upper[i] = 0.0;
        state.lower[i] = 0.0;
        for (c, &v) in centers[empty * dim..(empty + 1) * dim].iter_mut().zip(set.row(i)) {
            *c = v as f64;
        }
    }
}

/// Moves every center to the mean of its cell; returns how far each moved.
fn update_centers(set: &VectorSet, centers: &mut [f64], assign: &[u32], k: usize, dim: usize) -> Vec<f64> {
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (&a, x) in assign.iter().zip(set.rows()) {
        let a = a as usize;
        counts[a] += 1;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
            *s += v as f64;
        }
    }
    let mut moved = vec![0f64; k];
    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let inv = 1.0 / counts[j] as f64;
        let new: Vec<f64> = sums[j * dim..(j + 1) * dim].iter().map(|s| s * inv).collect();
        moved[j] = center_dist(&centers[j * dim..(j + 1) * dim], &new);
        centers[j * dim..(j + 1) * dim].copy_from_slice(&new);
    }
    moved
}

/// The candidate set: `K` database ids and bit-exact copies of their rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryPointIndex {
    ids: Vec<NodeId>,
    vectors: VectorSet,
}

impl EntryPointIndex {
    pub fn new(ids: Vec<NodeId>, vectors: VectorSet) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::usage("an entry-point index needs at least one candidate"));
        }
        if ids.len() != vectors.len() {
            return Err(Error::usage(format!(
                "{} ids but {} candidate vectors",
                ids.len(),
                vectors.len()
            )));
        }
        Ok(Self { ids, vectors })
    }

    /// A single-candidate index holding `id`.
    pub fn single(set: &VectorSet, id: NodeId) -> Self {
        Self {
            ids: vec![id],
            vectors: set.select(&[id]),
        }
    }

    pub fn k(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn vectors(&self) -> &VectorSet {
        &self.vectors
    }

    /// Index of the closest candidate, ties broken by node id and then by
    /// position. Linear in `K * d`.
    pub fn nearest_candidate(&self, q: &[f32]) -> usize {
        let mut best = 0;
        let mut best_d = dist(q, self.vectors.row(0));
        for j in 1..self.ids.len() {
            let d = dist(q, self.vectors.row(j));
            if d < best_d || (d == best_d && self.ids[j] < self.ids[best]) {
                best = j;
                best_d = d;
            }
        }
        best
    }

    /// Exact encoded size: 12 header bytes, `8K` id bytes, `4Kd` vector bytes.
    pub fn encoded_len(k: usize, dim: usize) -> usize {
        12 + 8 * k + 4 * k * dim
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(self.k(), self.dim()));
        out.extend_from_slice(MEPS_MAGIC);
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for &id in &self.ids {
            out.extend_from_slice(&(id as u64).to_le_bytes());
        }
        for v in self.vectors.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.expect_magic(MEPS_MAGIC)?;
        let at = r.offset();
        let k = r.u32("K")? as usize;
        if k == 0 {
            return Err(Error::format(at, "K is zero"));
        }
        let at = r.offset();
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::format(at, "dimension is zero"));
        }
        let mut ids = Vec::with_capacity(k.min(r.remaining() / 8));
        for _ in 0..k {
            let at = r.offset();
            let id = r.u64("candidate id")?;
            let id = NodeId::try_from(id).map_err(|_| Error::format(at, format!("id {id} out of range")))?;
            ids.push(id);
        }
        let mut data = Vec::new();
        r.f32s(k * dim, &mut data, "candidate vectors")?;
        r.finish()?;
        Self::new(ids, VectorSet::new(dim, data)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::io::write_atomic(path, &self.encode())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Checks that every candidate row equals the database row it names.
    pub fn validate_against(&self, set: &VectorSet) -> Result<()> {
        if self.dim() != set.dim() {
            return Err(Error::Invalid(format!(
                "entry index has dimension {} but the database has {}",
                self.dim(),
                set.dim()
            )));
        }
        for (j, &id) in self.ids.iter().enumerate() {
            if id as usize >= set.len() {
                return Err(Error::Invalid(format!("candidate id {id} out of range")));
            }
            if self.vectors.row(j) != set.row(id as usize) {
                return Err(Error::Invalid(format!("candidate {j} does not match row {id}")));
            }
        }
        Ok(())
    }
}

/// Snaps every center to its nearest database row. Duplicate ids are kept,
/// so the index always has exactly one candidate per center.
pub fn make_entry_candidates(set: &VectorSet, centers: &VectorSet) -> Result<EntryPointIndex> {
    if centers.is_empty() {
        return Err(Error::usage("no centers"));
    }
    if centers.dim() != set.dim() {
        return Err(Error::usage(format!(
            "centers have dimension {} but the set has {}",
            centers.dim(),
            set.dim()
        )));
    }
    if set.is_empty() {
        return Err(Error::usage("empty database"));
    }
    let ids: Vec<NodeId> = (0..centers.len())
        .into_par_iter()
        .map(|j| top_k(centers.row(j), set, 1)[0].id)
        .collect();
    let vectors = set.select(&ids);
    EntryPointIndex::new(ids, vectors)
}

/// k-means followed by snapping: the complete candidate-generation phase.
pub fn build_entry_index(set: &VectorSet, params: &KMeansParams) -> Result<(EntryPointIndex, KMeansResult)> {
    let km = kmeans(set, params)?;
    let eps = make_entry_candidates(set, &km.centers)?;
    Ok((eps, km))
}

/// The candidate closest to `q`.
pub fn select_entry(q: &[f32], eps: &EntryPointIndex) -> Result<NodeId> {
    if q.len() != eps.dim() {
        return Err(Error::usage(format!(
            "query has dimension {} but the index has {}",
            q.len(),
            eps.dim()
        )));
    }
    Ok(eps.ids[eps.nearest_candidate(q)])
}

/// Nearest-site assignment of a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    pub num_cells: usize,
    /// Cell of point `i`, in `0..num_cells`.
    pub cell_of: Vec<u32>,
}

impl VoronoiPartition {
    pub fn members(&self, cell: usize) -> Vec<usize> {
        self.cell_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c as usize == cell)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_cells];
        for &c in &self.cell_of {
            sizes[c as usize] += 1;
        }
        sizes
    }
}

/// Assigns each point to its nearest site, using the same distance as
/// [`select_entry`]; equal distances go to the lower site index.
pub fn voronoi_assign(points: &VectorSet, sites: &VectorSet) -> Result<VoronoiPartition> {
    if sites.is_empty() {
        return Err(Error::usage("no sites"));
    }
    if points.dim() != sites.dim() {
        return Err(Error::usage(format!(
            "points have dimension {} but sites have {}",
            points.dim(),
            sites.dim()
        )));
    }
    let cell_of = points
        .as_slice()
        .par_chunks_exact(points.dim())
        .map(|p| {
            let mut best = (0u32, f32::INFINITY);
            for (j, s) in sites.rows().enumerate() {
                let d = dist(p, s);
                if d < best.1 {
                    best = (j as u32, d);
                }
            }
            best.0
        })
        .collect();
    Ok(VoronoiPartition {
        num_cells: sites.len(),
        cell_of,
    })
}

/// Largest pairwise distance among the given rows, in double precision; 0
/// for fewer than two.
pub fn diameter(points: &VectorSet, members: &[usize]) -> f64 {
    members
        .par_iter()
        .enumerate()
        .map(|(a, &i)| {
            let mut best = 0f64;
            for &j in &members[a + 1..] {
                best = best.max(l2_exact(points.row(i), points.row(j)));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Diameter of one Voronoi cell over the partitioned point set.
pub fn cell_diameter(points: &VectorSet, partition: &VoronoiPartition, cell: usize) -> f64 {
    diameter(points, &partition.members(cell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectors::{brute_force_knn, l2_unchecked, mean_vector};
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[[f32; 2]], per: usize, spread: f32, seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, spread).unwrap();
        let mut data = Vec::new();
        for c in centers {
            for _ in 0..per {
                data.push(c[0] + noise.sample(&mut rng));
                data.push(c[1] + noise.sample(&mut rng));
            }
        }
        VectorSet::new(2, data).unwrap()
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, 1.0).unwrap();
        VectorSet::new(d, (0..n * d).map(|_| noise.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn single_cluster_center_is_the_mean() {
        let set = gaussian(200, 5, 3);
        let km = lloyd_kmeans(&set, 1, 10, 0).unwrap();
        let mean = mean_vector(&set).unwrap();
        for (a, b) in km.centers.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn two_blobs_are_recovered() {
        let set = blobs(&[[0.0, 0.0], [20.0, 5.0]], 300, 1.0, 9);
        let km = lloyd_kmeans(&set, 2, 25, 1).unwrap();
        let blob_a = set.select(&(0..300).collect::<Vec<_>>());
        let blob_b = set.select(&(300..600).collect::<Vec<_>>());
        let (ma, mb) = (mean_vector(&blob_a).unwrap(), mean_vector(&blob_b).unwrap());
        let mut centers: Vec<&[f32]> = km.centers.rows().collect();
        centers.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!(l2_unchecked(centers[0], &ma) < 0.1);
        assert!(l2_unchecked(centers[1], &mb) < 0.1);
    }

    #[test]
    fn k_equal_n_has_zero_inertia() {
        let set = gaussian(30, 3, 4);
        let km = lloyd_kmeans(&set, 30, 5, 2).unwrap();
        assert_eq!(km.inertia, 0.0);
        let mut a = km.assignment.clone();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 30);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let set = gaussian(3, 2, 5);
        assert!(lloyd_kmeans(&set, 4, 5, 0).unwrap_err().is_usage());
    }

    #[test]
    fn inertia_never_increases_and_assignment_is_nearest() {
        for seed in 0..5 {
            let set = gaussian(500, 8, 100 + seed);
            let km = lloyd_kmeans(&set, 12, 25, seed).unwrap();
            for w in km.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
            }
            if km.iterations_run < 25 {
                for (i, row) in set.rows().enumerate() {
                    let a = km.assignment[i] as usize;
                    let da = l2_unchecked(row, km.centers.row(a));
                    for c in km.centers.rows() {
                        assert!(da <= l2_unchecked(row, c) + 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn bounded_assignment_matches_plain_lloyd() {
        // plain Lloyd written out naively, same seeding
        let set = gaussian(400, 6, 21);
        let k = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut centers = plus_plus_init(&set, k, &mut rng);
        let dim = set.dim();
        let mut assign = vec![0u32; set.len()];
        for _ in 0..25 {
            let mut changed = false;
            for (i, x) in set.rows().enumerate() {
                let mut best = (0u32, f64::INFINITY);
                for j in 0..k {
                    let d = sq_to_center(x, &centers[j * dim..(j + 1) * dim]);
                    if d < best.1 {
                        best = (j as u32, d);
                    }
                }
                changed |= assign[i] != best.0;
                assign[i] = best.0;
            }
            if !changed {
                break;
            }
            update_centers(&set, &mut centers, &assign, k, dim);
        }
        let km = lloyd_kmeans(&set, k, 25, 3).unwrap();
        assert_eq!(km.assignment, assign);
    }

    #[test]
    fn candidate_on_a_database_point() {
        let set = gaussian(50, 4, 6);
        let centers = set.select(&[17]);
        let eps = make_entry_candidates(&set, &centers).unwrap();
        assert_eq!(eps.ids(), &[17]);
    }

    #[test]
    fn single_center_at_the_mean_snaps_to_the_medoid() {
        let set = gaussian(300, 4, 8);
        let mean = VectorSet::from_rows(&[mean_vector(&set).unwrap()]).unwrap();
        let eps = make_entry_candidates(&set, &mean).unwrap();
        let medoid = brute_force_knn(mean.row(0), &set, 1).unwrap().ids[0];
        assert_eq!(eps.ids(), &[medoid]);
    }

    #[test]
    fn three_blob_centers_snap_one_per_blob() {
        let set = blobs(&[[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]], 100, 1.0, 12);
        let km = lloyd_kmeans(&set, 3, 25, 0).unwrap();
        let eps = make_entry_candidates(&set, &km.centers).unwrap();
        let mut blobs_hit: Vec<u32> = eps.ids().iter().map(|id| id / 100).collect();
        blobs_hit.sort_unstable();
        assert_eq!(blobs_hit, vec![0, 1, 2]);
        for (j, &id) in eps.ids().iter().enumerate() {
            // brute-force the snapping per center
            let expect = brute_force_knn(km.centers.row(j), &set, 1).unwrap().ids[0];
            assert_eq!(id, expect);
            assert_eq!(eps.vectors().row(j), set.row(id as usize));
        }
    }

    #[test]
    fn duplicate_snaps_are_kept() {
        let set = VectorSet::from_rows(&[[0.0f32, 0.0], [10.0, 0.0]]).unwrap();
        let centers = VectorSet::from_rows(&[[0.1f32, 0.0], [-0.1, 0.0], [9.0, 0.0]]).unwrap();
        let eps = make_entry_candidates(&set, &centers).unwrap();
        assert_eq!(eps.ids(), &[0, 0, 1]);
    }

    #[test]
    fn select_entry_cases() {
        let set = gaussian(40, 3, 13);
        let ids: Vec<NodeId> = vec![3, 9, 12, 20, 25, 30, 33, 7];
        let eps = EntryPointIndex::new(ids.clone(), set.select(&ids)).unwrap();
        assert_eq!(select_entry(set.row(7), &eps).unwrap(), 7);
        let single = EntryPointIndex::single(&set, 5);
        assert_eq!(select_entry(set.row(30), &single).unwrap(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q: Vec<f32> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let oracle = ids
                .iter()
                .map(|&id| (l2_unchecked(&q, set.row(id as usize)), id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(select_entry(&q, &eps).unwrap(), oracle);
        }
    }

    #[test]
    fn meps_round_trip_and_size() {
        let set = gaussian(20, 7, 14);
        let eps = EntryPointIndex::new(vec![1, 4, 4], set.select(&[1, 4, 4])).unwrap();
        let bytes = eps.encode();
        assert_eq!(bytes.len(), EntryPointIndex::encoded_len(3, 7));
        assert_eq!(EntryPointIndex::decode(&bytes).unwrap(), eps);
        assert!(EntryPointIndex::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn voronoi_tie_goes_to_lower_site() {
        let sites = VectorSet::from_rows(&[[9.0f32, 9.0], [8.0, 8.0], [-1.0, 0.0], [5.0, 5.0], [6.0, 6.0], [1.0, 0.0]]).unwrap();
        let points = VectorSet::from_rows(&[[0.0f32, 0.0]]).unwrap();
        assert_eq!(voronoi_assign(&points, &sites).unwrap().cell_of, vec![2]);
    }

    #[test]
    fn voronoi_sites_equal_points() {
        let set = gaussian(25, 2, 15);
        let p = voronoi_assign(&set, &set).unwrap();
        assert_eq!(p.cell_of, (0..25).collect::<Vec<u32>>());
    }

    #[test]
    fn voronoi_grid_splits_at_the_bisector() {
        let sites = VectorSet::from_rows(&[[-1.0f32, 0.5], [2.0, -0.5]]).unwrap();
        let mut rows = Vec::new();
        for i in 0..21 {
            for j in 0..21 {
                rows.push([i as f32 * 0.25 - 2.5, j as f32 * 0.25 - 2.5]);
            }
        }
        let points = VectorSet::from_rows(&rows).unwrap();
        let p = voronoi_assign(&points, &sites).unwrap();
        for (i, r) in rows.iter().enumerate() {
            // side of the perpendicular bisector: sign of (x - m) . (s1 - s0)
            let (mx, my) = (0.5f64, 0.0f64);
            let side = (r[0] as f64 - mx) * 3.0 + (r[1] as f64 - my) * -1.0;
            let expect = if side > 0.0 { 1 } else { 0 };
            assert_eq!(p.cell_of[i], expect, "point {r:?}");
        }
    }

    #[test]
    fn diameters() {
        let one = VectorSet::from_rows(&[[1.0f32, 1.0]]).unwrap();
        assert_eq!(diameter(&one, &[0]), 0.0);
        let tri = VectorSet::from_rows(&[[0.0f32, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((diameter(&tri, &[0, 1, 2]) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(diameter(&tri, &[]), 0.0);

        let set = gaussian(200, 6, 16);
        let all: Vec<usize> = (0..200).collect();
        let mut oracle = 0f64;
        for i in 0..200 {
            for j in 0..200 {
                let mut s = 0f64;
                for c in 0..6 {
                    let d = set.row(i)[c] as f64 - set.row(j)[c] as f64;
                    s += d * d;
                }
                oracle = oracle.max(s.sqrt());
            }
        }
        assert!((diameter(&set, &all) - oracle).abs() < 1e-9);
    }

    #[test]
    fn cell_diameters_do_not_exceed_the_global_one() {
        let set = gaussian(300, 4, 17);
        let km = lloyd_kmeans(&set, 6, 10, 0).unwrap();
        let eps = make_entry_candidates(&set, &km.centers).unwrap();
        let part = voronoi_assign(&set, eps.vectors()).unwrap();
        let global = diameter(&set, &(0..300).collect::<Vec<_>>());
        for c in 0..6 {
            assert!(cell_diameter(&set, &part, c) <= global);
        }
    }
}
