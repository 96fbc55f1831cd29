//! Adversarial instances: three dense islands and a tiny, distant cluster
//! holding every query's ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::{voronoi_assign, EntryPointIndex};
use crate::error::{Error, Result};
use crate::vectors::{brute_force_knn, dist, ground_truth, NeighborList, NodeId, VectorSet};

/// Geometry of a hard instance. Coordinates beyond the second are zero
/// before noise is added.
///
/// The islands lie on a line with the middle one at the origin, so the
/// medoid falls inside it. The ground-truth cluster sits off to one side of
/// the middle island and the queries further out on another, with the
/// cluster still their nearest neighbors. Links into the cluster land on
/// the side of the middle island facing the cluster, while a greedy search
/// toward a query settles on the side facing the query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    pub n_total: usize,
    pub dim: usize,
    pub island_centers: [[f64; 2]; 3],
    pub island_spread: f64,
    pub gt_cluster_size: usize,
    /// Center of the ground-truth cluster.
    pub gt_offset: [f64; 2],
    pub gt_spread: f64,
    /// Query center relative to the ground-truth center.
    pub query_offset: [f64; 2],
    pub query_noise: f64,
    pub n_queries: usize,
    pub seed: u64,
}

impl Default for HardInstanceSpec {
    fn default() -> Self {
        Self {
            n_total: 100_000,
            dim: 2,
            island_centers: [[-400.0, 0.0], [0.0, 0.0], [400.0, 0.0]],
            island_spread: 1.0,
            gt_cluster_size: 10,
            gt_offset: [147.0, 30.0],
            gt_spread: 0.1,
            query_offset: [-147.0, 570.0],
            query_noise: 0.05,
            n_queries: 10,
            seed: 0,
        }
    }
}

impl HardInstanceSpec {
    pub fn gt_center(&self) -> [f64; 2] {
        self.gt_offset
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::usage("hard instances need at least two dimensions"));
        }
        if self.gt_cluster_size == 0 || self.n_queries == 0 {
            return Err(Error::usage("cluster size and query count must be positive"));
        }
        if self.n_total < self.gt_cluster_size + 3 {
            return Err(Error::usage(format!(
                "n_total = {} leaves no room for three islands",
                self.n_total
            )));
        }
        let finite = [self.island_spread, self.gt_spread, self.query_noise]
            .iter()
            .all(|x| x.is_finite() && *x >= 0.0);
        if !finite {
            return Err(Error::usage("spreads must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A generated instance with its verified ground truth.
#[derive(Clone, Debug)]
pub struct HardInstance {
    pub base: VectorSet,
    pub queries: VectorSet,
    /// Top-`gt_cluster_size` neighbors of every query, by brute force.
    pub ground_truth: Vec<NeighborList>,
    /// Ids of the planted cluster; the last `gt_cluster_size` rows.
    pub gt_ids: Vec<NodeId>,
}

fn blob(rng: &mut ChaCha8Rng, center: [f64; 2], spread: f64, dim: usize, count: usize, out: &mut Vec<f32>) {
    let noise = Normal::new(0.0, spread).expect("spread is finite");
    for _ in 0..count {
        for j in 0..dim {
            let c = if j < 2 { center[j] } else { 0.0 };
            out.push((c + noise.sample(rng)) as f32);
        }
    }
}

/// Generates the database, the queries and their ground truth.
///
/// Fails with a usage error if the ground-truth cluster comes within five
/// island spreads of an island point, or if some query's brute-force
/// neighbors are not exactly the planted cluster.
pub fn gen_hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let island_total = spec.n_total - spec.gt_cluster_size;
    let mut data = Vec::with_capacity(spec.n_total * d);
    for (i, &c) in spec.island_centers.iter().enumerate() {
        let count = island_total / 3 + usize::from(i < island_total % 3);
        blob(&mut rng, c, spec.island_spread, d, count, &mut data);
    }
    blob(&mut rng, spec.gt_center(), spec.gt_spread, d, spec.gt_cluster_size, &mut data);
    let base = VectorSet::new(d, data)?;

    let gt_ids: Vec<NodeId> = (island_total..spec.n_total).map(|i| i as NodeId).collect();
    let cluster = base.select(&gt_ids);
    let islands = VectorSet::new(d, base.as_slice()[..island_total * d].to_vec())?;
    let gap = cluster
        .rows()
        .map(|p| brute_force_knn(p, &islands, 1).map(|nn| nn.dists[0]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f32::INFINITY, f32::min) as f64;
    if gap <= 5.0 * spec.island_spread {
        return Err(Error::usage(format!(
            "ground-truth cluster is {gap:.3} from the islands, within five spreads"
        )));
    }

    let q = spec.gt_center();
    let qc = [q[0] + spec.query_offset[0], q[1] + spec.query_offset[1]];
    let mut qdata = Vec::with_capacity(spec.n_queries * d);
    blob(&mut rng, qc, spec.query_noise, d, spec.n_queries, &mut qdata);
    let queries = VectorSet::new(d, qdata)?;

    let gt = ground_truth(&queries, &base, spec.gt_cluster_size)?;
    for (i, nn) in gt.iter().enumerate() {
        let mut ids = nn.ids.clone();
        ids.sort_unstable();
        if ids != gt_ids {
            return Err(Error::usage(format!(
                "query {i}: brute-force neighbors are not the planted cluster"
            )));
        }
    }
    Ok(HardInstance {
        base,
        queries,
        ground_truth: gt,
        gt_ids,
    })
}

/// Cells of the queries and the ground-truth points under the candidate
/// partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiOverlay {
    pub k: usize,
    pub query_cells: Vec<u32>,
    /// `(id, cell)` for every planted ground-truth point.
    pub gt_cells: Vec<(NodeId, u32)>,
    /// Whether each query shares a cell with its nearest neighbor.
    pub same_cell: Vec<bool>,
}

impl VoronoiOverlay {
    pub fn all_same(&self) -> bool {
        self.same_cell.iter().all(|&b| b)
    }

    pub fn none_same(&self) -> bool {
        !self.same_cell.iter().any(|&b| b)
    }
}

pub fn voronoi_overlay(
    base: &VectorSet,
    eps: &EntryPointIndex,
    queries: &VectorSet,
    gt_ids: &[NodeId],
) -> Result<VoronoiOverlay> {
    let sites = eps.vectors();
    let query_cells = voronoi_assign(queries, sites)?.cell_of;
    let gt_points = base.select(gt_ids);
    let gt_cells = gt_ids
        .iter()
        .copied()
        .zip(voronoi_assign(&gt_points, sites)?.cell_of)
        .collect();
    let nearest = |p: &[f32]| {
        let mut best = (0u32, f32::INFINITY);
        for (j, s) in sites.rows().enumerate() {
            let d = dist(p, s);
            if d < best.1 {
                best = (j as u32, d);
            }
        }
        best.0
    };
    let same_cell = queries
        .rows()
        .zip(&query_cells)
        .map(|(q, &c)| {
            let nn = brute_force_knn(q, base, 1)?.ids[0];
            Ok(nearest(base.row(nn as usize)) == c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VoronoiOverlay {
        k: eps.k(),
        query_cells,
        gt_cells,
        same_cell,
    })
}
