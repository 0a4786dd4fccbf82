//! Complete stochastic graph over the sites.
//!
//! Each unordered site pair becomes an edge carrying the set of cells sensed
//! while traversing it, a mean reward (sum of sensed cell densities), and a
//! mean cost proportional to its length. With normalization on, rewards and
//! costs are rescaled so each family peaks at 10 and the cost cap is 10.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::env::{sensed_cells, CellId, InfoMap, Point2D};
use crate::error::{Error, Result};

/// Value both reward and cost families are rescaled to peak at.
pub const NORMALIZED_MAX: f64 = 10.0;

/// Model of one undirected edge; `endpoints.0 < endpoints.1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeModel {
    pub endpoints: (usize, usize),
    /// Cells observed while traversing this edge, sorted.
    pub sensed: Vec<CellId>,
    pub reward_mean: f64,
    pub cost_mean: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphStats {
    /// Most cells sensed by any single edge.
    pub max_points_per_edge: usize,
    pub max_edge_length: f64,
    pub reward_scale: f64,
    pub cost_scale: f64,
}

/// Immutable complete graph with stochastic edge models.
#[derive(Debug, Clone)]
pub struct StochasticGraph {
    pub vertices: Vec<Point2D>,
    pub edges: Vec<EdgeModel>,
    /// Upper bound C on every edge cost.
    pub cost_cap: f64,
    /// Reward variance coefficient v_r: cell variance = v_r * cell mean.
    pub reward_var_coeff: f64,
    /// Cost variance coefficient v_c: edge cost variance = v_c * (C - c(e)).
    pub cost_var_coeff: f64,
    pub sensing_radius: f64,
    pub stats: GraphStats,
    /// Sorted catalog of every cell sensed by any edge.
    cell_ids: Vec<CellId>,
    /// Scaled mean reward per catalog cell; sums over an edge's cells give
    /// exactly that edge's `reward_mean`.
    cell_means: Vec<f64>,
    /// Per-edge sorted indices into the cell catalog.
    edge_cells: Vec<Vec<u32>>,
    digest: u64,
}

impl StochasticGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Index of the undirected edge between `u` and `v` in canonical order
    /// (0,1), (0,2), ..., (0,n-1), (1,2), ...
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let n = self.vertex_count();
        if u == v || u >= n || v >= n {
            return None;
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Some(a * (2 * n - a - 1) / 2 + (b - a - 1))
    }

    pub fn cell_count(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn cell_id(&self, dense: usize) -> CellId {
        self.cell_ids[dense]
    }

    /// Scaled mean reward of a catalog cell.
    pub fn cell_mean(&self, dense: usize) -> f64 {
        self.cell_means[dense]
    }

    pub fn cell_means(&self) -> &[f64] {
        &self.cell_means
    }

    /// Sorted catalog indices of the cells sensed by edge `e`.
    pub fn edge_cells(&self, e: usize) -> &[u32] {
        &self.edge_cells[e]
    }

    /// Variances of edge `e`: reward variance `v_r * r(e)` and cost variance
    /// `v_c * (C - c(e))`.
    pub fn edge_variances(&self, e: usize) -> Result<(f64, f64)> {
        let edge = self
            .edges
            .get(e)
            .ok_or(Error::InvalidEdgeIndex(e, self.edges.len()))?;
        Ok((
            self.reward_var_coeff * edge.reward_mean,
            self.cost_var_coeff * (self.cost_cap - edge.cost_mean),
        ))
    }

    /// Stable digest of the graph's defining data, used to detect mixing
    /// results that came from different graphs.
    pub fn fingerprint(&self) -> u64 {
        self.digest
    }

    fn compute_digest(
        vertices: &[Point2D],
        edges: &[EdgeModel],
        cost_cap: f64,
        v_r: f64,
        v_c: f64,
    ) -> u64 {
        let mut h = Fnv::new();
        h.write_usize(vertices.len());
        for p in vertices {
            h.write_f64(p.x);
            h.write_f64(p.y);
        }
        h.write_f64(cost_cap);
        h.write_f64(v_r);
        h.write_f64(v_c);
        for e in edges {
            h.write_f64(e.reward_mean);
            h.write_f64(e.cost_mean);
        }
        h.finish()
    }

    /// Reassembles a graph from its serialized parts, rebuilding caches.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        vertices: Vec<Point2D>,
        edges: Vec<EdgeModel>,
        cost_cap: f64,
        reward_var_coeff: f64,
        cost_var_coeff: f64,
        sensing_radius: f64,
        stats: GraphStats,
        cells: Vec<(CellId, f64)>,
    ) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::TooFewSites(n));
        }
        if edges.len() != n * (n - 1) / 2 {
            return Err(Error::MalformedFile {
                what: "graph".into(),
                detail: format!("expected {} edges, got {}", n * (n - 1) / 2, edges.len()),
            });
        }
        let cell_ids: Vec<CellId> = cells.iter().map(|(id, _)| *id).collect();
        if cell_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedFile {
                what: "graph".into(),
                detail: "cell catalog must be strictly sorted".into(),
            });
        }
        let cell_means: Vec<f64> = cells.iter().map(|(_, m)| *m).collect();
        let edge_cells = edges
            .iter()
            .map(|e| {
                e.sensed
                    .iter()
                    .map(|c| {
                        cell_ids.binary_search(c).map(|i| i as u32).map_err(|_| {
                            Error::MalformedFile {
                                what: "graph".into(),
                                detail: format!(
                                    "sensed cell ({}, {}) missing from catalog",
                                    c.col, c.row
                                ),
                            }
                        })
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let digest = Self::compute_digest(
            &vertices,
            &edges,
            cost_cap,
            reward_var_coeff,
            cost_var_coeff,
        );
        Ok(Self {
            vertices,
            edges,
            cost_cap,
            reward_var_coeff,
            cost_var_coeff,
            sensing_radius,
            stats,
            cell_ids,
            cell_means,
            edge_cells,
            digest,
        })
    }

    /// Exposes the cell catalog, e.g. for serialization.
    pub fn cell_catalog(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        self.cell_ids
            .iter()
            .copied()
            .zip(self.cell_means.iter().copied())
    }
}

/// Builds the complete stochastic graph over `sites`.
///
/// With `normalize` on, reward means and cost means are rescaled so each
/// family peaks at [`NORMALIZED_MAX`], and the cost cap C equals that value;
/// otherwise raw values are kept and C is the longest edge's cost.
pub fn build_graph(
    map: &InfoMap,
    sites: &[Point2D],
    r: f64,
    v_r: f64,
    v_c: f64,
    normalize: bool,
) -> Result<StochasticGraph> {
    let n = sites.len();
    if n < 3 {
        return Err(Error::TooFewSites(n));
    }
    if !(v_r >= 0.0) || !(v_c >= 0.0) {
        return Err(Error::InvalidVarianceCoeff { v_r, v_c });
    }
    for (i, s) in sites.iter().enumerate() {
        if !map.contains_point(s) {
            return Err(Error::PointOutsideMap { x: s.x, y: s.y });
        }
        for (j, t) in sites.iter().enumerate().skip(i + 1) {
            if s.x == t.x && s.y == t.y {
                return Err(Error::DuplicateSites(i, j));
            }
        }
    }

    // Sense every unordered pair in canonical edge order.
    let mut sensed_sets: Vec<BTreeSet<CellId>> = Vec::with_capacity(n * (n - 1) / 2);
    let mut lengths = Vec::with_capacity(n * (n - 1) / 2);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            sensed_sets.push(sensed_cells(&sites[u], &sites[v], r, map)?);
            lengths.push(sites[u].dist(&sites[v]));
            pairs.push((u, v));
        }
    }

    // Catalog of all sensed cells, sorted.
    let mut catalog = BTreeSet::new();
    for s in &sensed_sets {
        catalog.extend(s.iter().copied());
    }
    let cell_ids: Vec<CellId> = catalog.into_iter().collect();

    let raw_reward_sum = |cells: &BTreeSet<CellId>| -> f64 {
        cells
            .iter()
            .map(|c| map.density[map.index(*c)])
            .sum::<f64>()
    };
    let max_raw_reward = sensed_sets
        .iter()
        .map(raw_reward_sum)
        .fold(0.0_f64, f64::max);
    let max_length = lengths.iter().copied().fold(0.0_f64, f64::max);

    // Scaling as value/max * NORMALIZED_MAX keeps the maximum exact and
    // every other value strictly below the cap.
    let scale_rewards = normalize && max_raw_reward > 0.0;
    let cell_means: Vec<f64> = cell_ids
        .iter()
        .map(|c| {
            let d = map.density[map.index(*c)];
            if scale_rewards {
                d / max_raw_reward * NORMALIZED_MAX
            } else {
                d
            }
        })
        .collect();
    let cost_cap = if normalize {
        NORMALIZED_MAX
    } else {
        max_length
    };

    let mut edges = Vec::with_capacity(pairs.len());
    let mut edge_cells = Vec::with_capacity(pairs.len());
    let mut max_points = 0usize;
    for (i, (u, v)) in pairs.iter().copied().enumerate() {
        let dense: Vec<u32> = sensed_sets[i]
            .iter()
            .map(|c| cell_ids.binary_search(c).unwrap() as u32)
            .collect();
        let reward_mean: f64 = dense.iter().map(|&d| cell_means[d as usize]).sum();
        let cost_mean = if normalize {
            lengths[i] / max_length * NORMALIZED_MAX
        } else {
            lengths[i]
        };
        max_points = max_points.max(dense.len());
        edges.push(EdgeModel {
            endpoints: (u, v),
            sensed: sensed_sets[i].iter().copied().collect(),
            reward_mean,
            cost_mean,
            length: lengths[i],
        });
        edge_cells.push(dense);
    }

    let stats = GraphStats {
        max_points_per_edge: max_points,
        max_edge_length: max_length,
        reward_scale: if scale_rewards {
            NORMALIZED_MAX / max_raw_reward
        } else {
            1.0
        },
        cost_scale: if normalize {
            NORMALIZED_MAX / max_length
        } else {
            1.0
        },
    };

    let digest = StochasticGraph::compute_digest(sites, &edges, cost_cap, v_r, v_c);
    Ok(StochasticGraph {
        vertices: sites.to_vec(),
        edges,
        cost_cap,
        reward_var_coeff: v_r,
        cost_var_coeff: v_c,
        sensing_radius: r,
        stats,
        cell_ids,
        cell_means,
        edge_cells,
        digest,
    })
}

/// FNV-1a, used for graph fingerprints.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn write_f64(&mut self, x: f64) {
        self.write(&x.to_bits().to_le_bytes());
    }

    fn write_usize(&mut self, x: usize) {
        self.write(&(x as u64).to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
