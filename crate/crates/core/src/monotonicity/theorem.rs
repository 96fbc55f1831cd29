use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::minb::MsnetCertificate;
use crate::clustering::{diameter, voronoi_assign, EntryPointIndex, VoronoiPartition};
use crate::error::{Error, Result};
use crate::graph::NavGraph;
use crate::vectors::{brute_force_knn, l2_exact, NodeId, VectorSet};

/// Which of the theorem's two cases a query falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// The query and its ground truth share a cell.
    I,
    /// Different cells, and `Δ_q ≤ R̄ − R̄_j`.
    Ii,
    Neither,
}

/// Everything the report is computed from.
pub struct TheoremInput<'a> {
    pub graph: &'a NavGraph,
    pub set: &'a VectorSet,
    pub queries: &'a VectorSet,
    pub eps: &'a EntryPointIndex,
    /// Must cover every ordered pair.
    pub certificate: &'a MsnetCertificate,
    /// Extra paths added to the family, e.g. search traces. Each path's
    /// target is its last node; paths with more than `B` backward hops are
    /// ignored.
    pub extra_paths: &'a [Vec<NodeId>],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalQuantities {
    /// Diameter of the database and the queries together.
    pub r_bar: f64,
    /// Smallest forward `r` over the family; `None` if there is none.
    pub r_plus: Option<f64>,
    /// Largest backward `|r|` over the family; 0 if there is none.
    pub r_minus: f64,
    /// Hop bound from the fixed entry; `None` unless `r_plus > 0`.
    pub l_bar0: Option<f64>,
    pub paths: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellQuantities {
    pub cell: usize,
    /// Database node at the cell's site.
    pub site: NodeId,
    pub db_members: usize,
    pub query_members: usize,
    pub r_bar: f64,
    pub r_plus: Option<f64>,
    pub r_minus: f64,
    /// `None` marks an undefined cell: fewer than two database members or
    /// no positive forward hop in its family.
    pub l_bar: Option<f64>,
    /// Cell-internal paths in the family.
    pub paths: u64,
    /// `R̄_j ≤ R̄`, `r̄₊ ≤ r̄₊ⱼ` and `r̄₋ ≥ r̄₋ⱼ`.
    pub inequalities_hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query: usize,
    pub cell: usize,
    pub gt: NodeId,
    pub gt_cell: usize,
    /// Distance from the query to its ground truth.
    pub delta: f64,
    pub condition: Condition,
    /// Bound for the adaptive entry; `None` for [`Condition::Neither`] or
    /// when the quantities it needs are undefined.
    pub l_bar: Option<f64>,
    pub l_bar0: Option<f64>,
    /// `l_bar ≤ l_bar0`, when both exist.
    pub bound_holds: Option<bool>,
    /// Hops of the witness path from the cell's entry to the ground truth.
    pub entry_witness_hops: Option<u32>,
    /// Hops of the witness path from the fixed entry to the ground truth.
    pub fixed_witness_hops: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Identifies the path family the quantities are taken over.
    pub family: String,
    #[serde(rename = "B")]
    pub b: u32,
    pub global: GlobalQuantities,
    pub cells: Vec<CellQuantities>,
    pub queries: Vec<QueryReport>,
}

impl TheoremReport {
    pub fn count(&self, c: Condition) -> usize {
        self.queries.iter().filter(|q| q.condition == c).count()
    }

    /// Human-readable descriptions of every failed ordering or inequality.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !c.inequalities_hold {
                out.push(format!("cell {}: cell and global quantities are out of order", c.cell));
            }
        }
        for q in &self.queries {
            if q.bound_holds == Some(false) {
                out.push(format!(
                    "query {}: l_bar {:?} exceeds l_bar0 {:?}",
                    q.query, q.l_bar, q.l_bar0
                ));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Acc {
    plus: f64,
    minus: f64,
    paths: u64,
}

impl Acc {
    const EMPTY: Acc = Acc {
        plus: f64::INFINITY,
        minus: 0.0,
        paths: 0,
    };

    fn add(&mut self, r: &[f64]) {
        for &x in r {
            if x >= 0.0 {
                self.plus = self.plus.min(x);
            } else {
                self.minus = self.minus.max(-x);
            }
        }
        self.paths += 1;
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.plus = self.plus.min(o.plus);
        self.minus = self.minus.max(o.minus);
        self.paths += o.paths;
        self
    }

    fn r_plus(&self) -> Option<f64> {
        self.plus.is_finite().then_some(self.plus)
    }
}

fn bound(r_bar: f64, r_plus: Option<f64>, r_minus: f64, b: u32) -> Option<f64> {
    let rp = r_plus.filter(|&x| x > 0.0)?;
    Some(r_bar / rp + b as f64 * (1.0 + r_minus / rp))
}

fn path_r(path: &[NodeId], dt: &[f64]) -> Vec<f64> {
    path.windows(2).map(|w| dt[w[0] as usize] - dt[w[1] as usize]).collect()
}

fn distances_to(set: &VectorSet, t: NodeId) -> Vec<f64> {
    let xt = set.row(t as usize);
    set.rows().map(|r| l2_exact(r, xt)).collect()
}

/// Evaluates the hop bounds for the adaptive entry (`l̄`) and for the fixed
/// entry (`l̄₀`), per Voronoi cell and per query.
///
/// Cells are the Voronoi partition of the database and the queries around
/// the candidate vectors. The path family is the certificate's witness path
/// for every ordered pair, plus `extra_paths`.
pub fn theorem_quantities(input: &TheoremInput<'_>) -> Result<TheoremReport> {
    let TheoremInput {
        graph: g,
        set,
        queries,
        eps,
        certificate: cert,
        extra_paths,
    } = *input;
    let n = set.len();
    if g.len() != n || cert.node_count != n {
        return Err(Error::usage("graph, vectors and certificate disagree on the node count"));
    }
    if !cert.exact {
        return Err(Error::usage("the theorem report needs a certificate over all pairs"));
    }
    if queries.dim() != set.dim() || eps.dim() != set.dim() {
        return Err(Error::usage("queries, candidates and vectors must share a dimension"));
    }
    eps.validate_against(set)?;
    let b_max = cert.b_max;

    let mut points = set.clone();
    points.extend(queries)?;
    let partition: VoronoiPartition = voronoi_assign(&points, eps.vectors())?;
    let k = partition.num_cells;
    let cell_of = |i: usize| partition.cell_of[i] as usize;

    let (global, cells) = cert
        .tables()
        .par_iter()
        .map(|table| {
            let t = table.target;
            let dt = distances_to(set, t);
            let mut global = Acc::EMPTY;
            let mut cells = vec![Acc::EMPTY; k];
            for s in 0..n as NodeId {
                if s == t {
                    continue;
                }
                let Some(path) = table.path(s) else { continue };
                let r = path_r(&path, &dt);
                global.add(&r);
                if cell_of(s as usize) == cell_of(t as usize) {
                    cells[cell_of(s as usize)].add(&r);
                }
            }
            (global, cells)
        })
        .reduce(
            || (Acc::EMPTY, vec![Acc::EMPTY; k]),
            |(ga, ca), (gb, cb)| (ga.merge(gb), ca.into_iter().zip(cb).map(|(a, b)| a.merge(b)).collect()),
        );
    let (mut global, mut cells) = (global, cells);

    let mut extra_count = 0;
    for path in extra_paths {
        if path.len() < 2 {
            continue;
        }
        if let Some(&bad) = path.iter().find(|&&v| v as usize >= n) {
            return Err(Error::usage(format!("path node {bad} is out of range")));
        }
        let t = *path.last().unwrap();
        let r = path_r(path, &distances_to(set, t));
        if r.iter().filter(|&&x| x < 0.0).count() > b_max as usize {
            continue;
        }
        extra_count += 1;
        global.add(&r);
        if cell_of(path[0] as usize) == cell_of(t as usize) {
            cells[cell_of(t as usize)].add(&r);
        }
    }

    let all: Vec<usize> = (0..points.len()).collect();
    let r_bar = diameter(&points, &all);
    let global_q = GlobalQuantities {
        r_bar,
        r_plus: global.r_plus(),
        r_minus: global.minus,
        l_bar0: bound(r_bar, global.r_plus(), global.minus, b_max),
        paths: global.paths,
    };

    let mut members = vec![Vec::new(); k];
    for i in 0..points.len() {
        members[cell_of(i)].push(i);
    }
    let cells_q: Vec<CellQuantities> = (0..k)
        .map(|j| {
            let db_members = members[j].iter().filter(|&&i| i < n).count();
            let acc = cells[j];
            let r_bar_j = diameter(&points, &members[j]);
            let l_bar = if db_members >= 2 {
                bound(r_bar_j, acc.r_plus(), acc.minus, b_max)
            } else {
                None
            };
            let plus_ok = match (global_q.r_plus, acc.r_plus()) {
                (Some(g), Some(c)) => g <= c,
                _ => true,
            };
            CellQuantities {
                cell: j,
                site: eps.ids()[j],
                db_members,
                query_members: members[j].len() - db_members,
                r_bar: r_bar_j,
                r_plus: acc.r_plus(),
                r_minus: acc.minus,
                l_bar,
                paths: acc.paths,
                inequalities_hold: r_bar_j <= r_bar && plus_ok && acc.minus <= global_q.r_minus,
            }
        })
        .collect();

    let fixed = g.default_entry();
    let queries_q = (0..queries.len())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let gt = brute_force_knn(q, set, 1)?.ids[0];
            let delta = l2_exact(q, set.row(gt as usize));
            let cell = cell_of(n + qi);
            let gt_cell = cell_of(gt as usize);
            let condition = if cell == gt_cell {
                Condition::I
            } else if delta <= r_bar - cells_q[cell].r_bar {
                Condition::Ii
            } else {
                Condition::Neither
            };
            let l_bar = match condition {
                Condition::I => cells_q[cell].l_bar,
                Condition::Ii => bound(cells_q[cell].r_bar + delta, global_q.r_plus, global_q.r_minus, b_max),
                Condition::Neither => None,
            };
            let l_bar0 = global_q.l_bar0;
            let bound_holds = match (condition, l_bar, l_bar0) {
                (Condition::Neither, _, _) => None,
                (_, Some(a), Some(b)) => Some(a <= b),
                _ => None,
            };
            let table = cert.table(gt).expect("exact certificates hold every target");
            Ok(QueryReport {
                query: qi,
                cell,
                gt,
                gt_cell,
                delta,
                condition,
                l_bar,
                l_bar0,
                bound_holds,
                entry_witness_hops: table.hops(eps.ids()[cell]),
                fixed_witness_hops: table.hops(fixed),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let family = if extra_count > 0 {
        format!("min_b_witnesses+{extra_count}_paths")
    } else {
        "min_b_witnesses".to_string()
    };
    Ok(TheoremReport {
        family,
        b: b_max,
        global: global_q,
        cells: cells_q,
        queries: queries_q,
    })
}
