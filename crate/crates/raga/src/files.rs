//! JSON file formats for maps, graphs, solve results and verification
//! reports.
//!
//! Floating-point values are written as shortest-round-trip decimal text, so
//! a load of a saved file reproduces every value bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{CellId, InfoMap, Point2D};
use crate::error::{Error, Result};
use crate::graph::{EdgeModel, GraphStats, StochasticGraph};
use crate::risk::EdgeSet;
use crate::solver::{tour_vertices, SolveResult, SolverConfig, TraceEntry};

pub fn save_map(map: &InfoMap, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string(map)?)?;
    Ok(())
}

pub fn load_map(path: &Path) -> Result<InfoMap> {
    let raw: InfoMap = serde_json::from_str(&fs::read_to_string(path)?)?;
    // Revalidate invariants on the parsed values.
    InfoMap::new(raw.width, raw.height, raw.cell_size, raw.density)
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    u: usize,
    v: usize,
    reward_mean: f64,
    cost_mean: f64,
    sensed: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    sites: Vec<(f64, f64)>,
    #[serde(rename = "R")]
    r: f64,
    v_r: f64,
    v_c: f64,
    cost_cap: f64,
    edges: Vec<EdgeFile>,
    /// Catalog of every sensed cell with its scaled mean reward; needed to
    /// rebuild noise panels from a loaded graph.
    cells: Vec<(usize, usize, f64)>,
    stats: GraphStats,
}

pub fn save_graph(graph: &StochasticGraph, path: &Path) -> Result<()> {
    let file = GraphFile {
        sites: graph.vertices.iter().map(|p| (p.x, p.y)).collect(),
        r: graph.sensing_radius,
        v_r: graph.reward_var_coeff,
        v_c: graph.cost_var_coeff,
        cost_cap: graph.cost_cap,
        edges: graph
            .edges
            .iter()
            .map(|e| EdgeFile {
                u: e.endpoints.0,
                v: e.endpoints.1,
                reward_mean: e.reward_mean,
                cost_mean: e.cost_mean,
                sensed: e.sensed.iter().map(|c| (c.col, c.row)).collect(),
            })
            .collect(),
        cells: graph
            .cell_catalog()
            .map(|(c, m)| (c.col, c.row, m))
            .collect(),
        stats: graph.stats,
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<StochasticGraph> {
    let file: GraphFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let vertices: Vec<Point2D> = file
        .sites
        .iter()
        .map(|&(x, y)| Point2D::new(x, y))
        .collect();
    let n = vertices.len();
    let malformed = |detail: String| Error::MalformedFile {
        what: "graph".into(),
        detail,
    };
    let mut edges = Vec::with_capacity(file.edges.len());
    let mut expected = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            expected.push((u, v));
        }
    }
    if file.edges.len() != expected.len() {
        return Err(malformed(format!(
            "expected {} edges for {} sites, got {}",
            expected.len(),
            n,
            file.edges.len()
        )));
    }
    for (e, (u, v)) in file.edges.iter().zip(expected) {
        if (e.u, e.v) != (u, v) {
            return Err(malformed(format!(
                "edge {},{} out of canonical order (expected {},{})",
                e.u, e.v, u, v
            )));
        }
        let mut sensed: Vec<CellId> = e.sensed.iter().map(|&(c, r)| CellId::new(c, r)).collect();
        sensed.sort_unstable();
        edges.push(EdgeModel {
            endpoints: (u, v),
            sensed,
            reward_mean: e.reward_mean,
            cost_mean: e.cost_mean,
            length: vertices[u].dist(&vertices[v]),
        });
    }
    let cells: Vec<(CellId, f64)> = file
        .cells
        .iter()
        .map(|&(c, r, m)| (CellId::new(c, r), m))
        .collect();
    StochasticGraph::from_parts(
        vertices,
        edges,
        file.cost_cap,
        file.v_r,
        file.v_c,
        file.r,
        file.stats,
        cells,
    )
}

#[derive(Serialize, Deserialize)]
pub struct ResultFile {
    /// Tour as an ordered vertex cycle starting at vertex 0.
    pub tour: Vec<usize>,
    /// Tour edges as vertex pairs, in selection order.
    pub edges: Vec<(usize, usize)>,
    pub tau: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub trace: Vec<TraceEntry>,
    pub config: SolverConfig,
    pub seed: u64,
    pub iterations_run: usize,
    pub graph_fingerprint: u64,
}

impl ResultFile {
    pub fn from_result(result: &SolveResult, graph: &StochasticGraph) -> Result<Self> {
        Ok(Self {
            tour: tour_vertices(&result.tour, graph)?,
            edges: result
                .tour
                .iter()
                .map(|e| graph.edges[e].endpoints)
                .collect(),
            tau: result.tau,
            h: result.h_max,
            trace: result.trace.clone(),
            config: result.config,
            seed: result.config.seed,
            iterations_run: result.iterations_run,
            graph_fingerprint: result.provenance.graph_fingerprint,
        })
    }

    /// Rebuilds the edge set against a graph.
    pub fn edge_set(&self, graph: &StochasticGraph) -> Result<EdgeSet> {
        let mut set = EdgeSet::new();
        for &(u, v) in &self.edges {
            let e = graph.edge_index(u, v).ok_or_else(|| Error::MalformedFile {
                what: "result".into(),
                detail: format!("edge ({u}, {v}) does not exist in the graph"),
            })?;
            set.insert(e)?;
        }
        Ok(set)
    }
}

pub fn save_result(result: &SolveResult, graph: &StochasticGraph, path: &Path) -> Result<()> {
    let file = ResultFile::from_result(result, graph)?;
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_result(path: &Path) -> Result<ResultFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// One instance's verification outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(rename = "H_greedy")]
    pub h_greedy: f64,
    #[serde(rename = "H_opt")]
    pub h_opt: f64,
    pub k: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    pub config: SolverConfig,
    pub tau_greedy: f64,
    pub tau_opt: f64,
    pub curvature_tau: f64,
    pub inert_edges: Vec<usize>,
    pub submodularity_clean: bool,
    pub submodularity_violation: Option<String>,
}

pub fn save_verify_reports(reports: &[VerifyReport], path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(reports)?)?;
    Ok(())
}
