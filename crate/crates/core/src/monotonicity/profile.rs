use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::{l2_exact, NodeId, VectorSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileTarget {
    Node(NodeId),
    Vector(Vec<f32>),
}

/// Per-hop distance changes of a path toward a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRProfile {
    pub path: Vec<NodeId>,
    pub target: ProfileTarget,
    /// `r[i]` is the decrease in distance to the target over hop `i`.
    pub r: Vec<f64>,
    /// Hops with `r >= 0`.
    pub r_plus: Vec<usize>,
    /// Hops with `r < 0`.
    pub r_minus: Vec<usize>,
    /// Distance from the first node to the target.
    pub start_distance: f64,
    /// Distance from the last node to the target.
    pub end_distance: f64,
}

impl PathRProfile {
    /// Number of backward hops.
    pub fn b(&self) -> usize {
        self.r_minus.len()
    }

    pub fn hops(&self) -> usize {
        self.r.len()
    }

    pub fn sum(&self) -> f64 {
        self.r.iter().sum()
    }

    /// `|Σr − (start_distance − end_distance)|`; when the path ends at the
    /// target this is the deviation from `Σr = ‖x_s − x_t‖`.
    pub fn telescoping_error(&self) -> f64 {
        (self.sum() - (self.start_distance - self.end_distance)).abs()
    }

    /// Smallest non-negative `r`, if any.
    pub fn min_forward(&self) -> Option<f64> {
        self.r_plus.iter().map(|&i| self.r[i]).min_by(f64::total_cmp)
    }

    /// Largest `|r|` over backward hops, if any.
    pub fn max_backward(&self) -> Option<f64> {
        self.r_minus.iter().map(|&i| -self.r[i]).max_by(f64::total_cmp)
    }
}

fn build(set: &VectorSet, path: &[NodeId], target: ProfileTarget, t: &[f32]) -> Result<PathRProfile> {
    if path.len() < 2 {
        return Err(Error::usage(format!("a path needs at least 2 nodes, got {}", path.len())));
    }
    if let Some(&bad) = path.iter().find(|&&v| v as usize >= set.len()) {
        return Err(Error::usage(format!("path node {bad} is out of range")));
    }
    let d: Vec<f64> = path.iter().map(|&v| l2_exact(set.row(v as usize), t)).collect();
    let r: Vec<f64> = d.windows(2).map(|w| w[0] - w[1]).collect();
    let (r_plus, r_minus): (Vec<usize>, Vec<usize>) = (0..r.len()).partition(|&i| r[i] >= 0.0);
    Ok(PathRProfile {
        path: path.to_vec(),
        target,
        r,
        r_plus,
        r_minus,
        start_distance: d[0],
        end_distance: d[d.len() - 1],
    })
}

/// Profile of `path` toward database row `target`. The path need not end
/// at the target.
pub fn r_profile(set: &VectorSet, path: &[NodeId], target: NodeId) -> Result<PathRProfile> {
    if target as usize >= set.len() {
        return Err(Error::usage(format!("target {target} is out of range")));
    }
    build(set, path, ProfileTarget::Node(target), set.row(target as usize))
}

/// Profile of `path` toward an arbitrary vector, such as a query.
pub fn r_profile_to_vector(set: &VectorSet, path: &[NodeId], target: &[f32]) -> Result<PathRProfile> {
    set.check_query(target)?;
    build(set, path, ProfileTarget::Vector(target.to_vec()), target)
}
