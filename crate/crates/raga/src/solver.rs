//! Greedy tour construction and the full risk-aware solve.
//!
//! For each grid value of `tau`, a Hamiltonian tour is assembled greedily:
//! every remaining candidate edge is scored by the marginal gain of the
//! sampled auxiliary function, the best-scoring edge is checked against the
//! degree and subtour constraints (depth-first traversal over the selected
//! paths), infeasible winners are discarded from the candidate pool, and
//! feasible ones are committed. The best `(tour, tau)` pair across the grid
//! is kept, and the sweep stops early once a completed tour's `H` value goes
//! negative, which by concavity in `tau` cannot recover.
//!
//! Candidate gains within one selection round are scored in parallel; each
//! candidate reads only the immutable panel and its own state, and the
//! winner is chosen by a total order on (gain, edge index), so parallel and
//! serial runs pick identical tours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::StochasticGraph;
use crate::risk::{self, make_noise_panel, EdgeSet, NoisePanel, PanelProvenance, RiskConfig};

/// Full solve configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Upper bound on `tau` (the grid cap).
    pub gamma_cap: f64,
    /// Grid step for `tau`.
    pub gamma_step: f64,
    /// Monte-Carlo samples in the noise panel.
    pub samples: usize,
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults for the bundled 8-site demo instance.
    pub fn default_config(seed: u64) -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            gamma_cap: 200.0,
            gamma_step: 1.0,
            samples: 250,
            seed,
        }
    }

    pub fn risk(&self) -> RiskConfig {
        RiskConfig {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.risk().validate()?;
        risk::tau_grid_len(self.gamma_cap, self.gamma_step)?;
        if self.samples < 1 {
            return Err(Error::InvalidSampleCount);
        }
        Ok(())
    }
}

/// State of one greedy construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TourState {
    /// Selected edges in selection order.
    pub edges: EdgeSet,
    /// Per-vertex degree in the selected set; always 0, 1 or 2.
    pub degrees: Vec<u8>,
    /// Sampled auxiliary value of the selected set at this iteration's tau.
    pub h_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tau: f64,
    /// Tour edges as vertex pairs, in selection order.
    pub edges: Vec<(usize, usize)>,
    pub h: f64,
}

/// Outcome of a full solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Best tour found.
    pub tour: EdgeSet,
    /// Grid value of tau the best tour was found at.
    pub tau: f64,
    pub h_max: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations_run: usize,
    pub config: SolverConfig,
    pub provenance: PanelProvenance,
}

/// Whether edge `e` can be added to the partial tour: both endpoints must
/// have degree below two and the edge must not close a cycle on fewer than
/// `|V|` vertices. The closing edge of a full Hamiltonian cycle is feasible.
pub fn is_feasible(state: &TourState, e: usize, graph: &StochasticGraph) -> bool {
    if e >= graph.edge_count() || state.edges.contains(e) {
        return false;
    }
    let n = graph.vertex_count();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for sel in state.edges.iter() {
        let (a, b) = graph.edges[sel].endpoints;
        adj[a].push(b as u32);
        adj[b].push(a as u32);
    }
    let (u, v) = graph.edges[e].endpoints;
    feasible_in(&adj, &state.degrees, u, v, n)
}

fn feasible_in(adj: &[Vec<u32>], degrees: &[u8], u: usize, v: usize, n: usize) -> bool {
    if degrees[u] >= 2 || degrees[v] >= 2 {
        return false;
    }
    match cycle_closure_size(adj, u, v) {
        None => true,
        Some(size) => size == n,
    }
}

/// Depth-first walk along the selected paths from `u`. If `v` is reachable,
/// adding the edge `(u, v)` would close a cycle covering the returned number
/// of vertices.
fn cycle_closure_size(adj: &[Vec<u32>], u: usize, v: usize) -> Option<usize> {
    let mut prev = usize::MAX;
    let mut cur = u;
    let mut count = 1usize;
    loop {
        let next = adj[cur].iter().map(|&w| w as usize).find(|&w| w != prev)?;
        prev = cur;
        cur = next;
        count += 1;
        if cur == v {
            return Some(count);
        }
    }
}

/// Precomputed per-edge panel aggregates shared across tau iterations.
struct EvalBase {
    /// Per-edge, per-sample sum of sensed cell rewards.
    edge_reward: Vec<Vec<f64>>,
    /// Per-edge, per-sample cost term `beta * (C - cost)`; never negative.
    cost_slack: Vec<Vec<f64>>,
    /// Edges incident to each vertex.
    incident: Vec<Vec<usize>>,
}

impl EvalBase {
    fn new(graph: &StochasticGraph, panel: &NoisePanel, cfg: &RiskConfig) -> Result<Self> {
        if !panel.matches(graph) {
            return Err(Error::PanelMismatch);
        }
        let n_s = panel.sample_count();
        let edge_reward: Vec<Vec<f64>> = (0..graph.edge_count())
            .into_par_iter()
            .map(|e| {
                let mut acc = vec![0.0; n_s];
                for &d in graph.edge_cells(e) {
                    let row = panel.cell_reward_row(d as usize);
                    for (a, &x) in acc.iter_mut().zip(row) {
                        *a += x;
                    }
                }
                acc
            })
            .collect();
        let beta = cfg.beta;
        let cap = graph.cost_cap;
        let cost_slack: Vec<Vec<f64>> = (0..graph.edge_count())
            .map(|e| {
                panel
                    .edge_cost_row(e)
                    .iter()
                    .map(|&c| beta * (cap - c))
                    .collect()
            })
            .collect();
        let mut incident = vec![Vec::new(); graph.vertex_count()];
        for (e, edge) in graph.edges.iter().enumerate() {
            incident[edge.endpoints.0].push(e);
            incident[edge.endpoints.1].push(e);
        }
        Ok(Self {
            edge_reward,
            cost_slack,
            incident,
        })
    }
}

/// Per-candidate state within one tau iteration.
struct Candidate {
    alive: bool,
    /// Sensed cells not yet observed by the selected set, sorted.
    new_cells: Vec<u32>,
    /// Per-sample reward those cells would add.
    delta_reward: Vec<f64>,
}

/// Greedily builds a tour for one value of `tau`. On a complete graph the
/// result is always a Hamiltonian cycle.
pub fn greedy_tour(
    graph: &StochasticGraph,
    panel: &NoisePanel,
    cfg: &RiskConfig,
    tau: f64,
) -> Result<TourState> {
    cfg.validate()?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTau(tau));
    }
    if graph.vertex_count() < 3 {
        return Err(Error::TooFewVertices(graph.vertex_count()));
    }
    let base = EvalBase::new(graph, panel, cfg)?;
    Ok(greedy_with_base(graph, panel, cfg, tau, &base))
}

fn greedy_with_base(
    graph: &StochasticGraph,
    panel: &NoisePanel,
    cfg: &RiskConfig,
    tau: f64,
    base: &EvalBase,
) -> TourState {
    let n = graph.vertex_count();
    let n_edges = graph.edge_count();
    let n_s = panel.sample_count();
    let reward_w = 1.0 - cfg.beta;
    let inv_mass = 1.0 / (cfg.alpha * n_s as f64);

    let mut cands: Vec<Candidate> = (0..n_edges)
        .map(|e| Candidate {
            alive: true,
            new_cells: graph.edge_cells(e).to_vec(),
            delta_reward: base.edge_reward[e].clone(),
        })
        .collect();
    let mut alive_count = n_edges;
    let mut observed = vec![false; graph.cell_count()];
    // Per-sample utility of the selected set.
    let mut f = vec![0.0; n_s];

    let mut edges = EdgeSet::new();
    let mut degrees = vec![0u8; n];
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n_edges);
    while edges.len() < n && alive_count > 0 {
        // Score H(S + e) for every remaining candidate; the ranking equals
        // the marginal-gain ranking because H(S) is a shared constant.
        scored.clear();
        scored.par_extend(cands.par_iter().enumerate().filter_map(|(e, c)| {
            if !c.alive {
                return None;
            }
            let slack = &base.cost_slack[e];
            let mut shortfall = 0.0;
            for j in 0..n_s {
                let fj = f[j] + reward_w * c.delta_reward[j] + slack[j];
                shortfall += (tau - fj).max(0.0);
            }
            Some((tau - shortfall * inv_mass, e))
        }));
        scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut added = None;
        for &(_, e) in scored.iter() {
            if !cands[e].alive {
                continue;
            }
            let (u, v) = graph.edges[e].endpoints;
            if feasible_in(&adj, &degrees, u, v, n) {
                added = Some(e);
                break;
            }
            // Infeasible argmax: drop it from this iteration's pool.
            cands[e].alive = false;
            alive_count -= 1;
        }
        let Some(e_star) = added else { break };

        let (u, v) = graph.edges[e_star].endpoints;
        edges.insert(e_star).expect("edge selected twice");
        degrees[u] += 1;
        degrees[v] += 1;
        adj[u].push(v as u32);
        adj[v].push(u as u32);
        for (j, fj) in f.iter_mut().enumerate() {
            *fj += reward_w * cands[e_star].delta_reward[j] + base.cost_slack[e_star][j];
        }
        let newly = std::mem::take(&mut cands[e_star].new_cells);
        cands[e_star].alive = false;
        alive_count -= 1;
        for &d in &newly {
            observed[d as usize] = true;
        }
        // Edges touching a saturated vertex can never be added, so stop
        // scoring and updating them.
        for w in [u, v] {
            if degrees[w] == 2 {
                for &dead in &base.incident[w] {
                    if cands[dead].alive {
                        cands[dead].alive = false;
                        alive_count -= 1;
                    }
                }
            }
        }
        // Remove newly observed cells from the remaining candidates.
        cands.par_iter_mut().for_each(|c| {
            if !c.alive || c.new_cells.is_empty() {
                return;
            }
            let mut kept = 0;
            for i in 0..c.new_cells.len() {
                let d = c.new_cells[i];
                if observed[d as usize] {
                    let row = panel.cell_reward_row(d as usize);
                    for (acc, &x) in c.delta_reward.iter_mut().zip(row) {
                        *acc -= x;
                    }
                } else {
                    c.new_cells[kept] = d;
                    kept += 1;
                }
            }
            c.new_cells.truncate(kept);
            if c.new_cells.is_empty() {
                c.delta_reward.iter_mut().for_each(|x| *x = 0.0);
            } else {
                // Guard against sub-ulp negatives from cancellation.
                c.delta_reward.iter_mut().for_each(|x| *x = x.max(0.0));
            }
        });
    }

    debug_assert_eq!(edges.len(), n, "greedy dead-ended on a complete graph");

    // Canonical evaluation so the reported value is order-independent and
    // comparable across solver and oracle paths.
    let samples =
        risk::utility_samples(&edges, panel, graph, cfg).expect("selected edges are valid");
    let h_value = risk::h_from_samples(&samples, tau, cfg.alpha);
    TourState {
        edges,
        degrees,
        h_value,
    }
}

/// Runs the full tau sweep with a panel built from `(graph, samples, seed)`.
pub fn raga_solve(graph: &StochasticGraph, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if graph.vertex_count() < 3 {
        return Err(Error::TooFewVertices(graph.vertex_count()));
    }
    let panel = make_noise_panel(graph, cfg.samples, cfg.seed)?;
    raga_solve_with_panel(graph, cfg, &panel)
}

/// Like [`raga_solve`], but reuses an existing panel (which must have been
/// built from the same graph, sample count and seed).
pub fn raga_solve_with_panel(
    graph: &StochasticGraph,
    cfg: &SolverConfig,
    panel: &NoisePanel,
) -> Result<SolveResult> {
    cfg.validate()?;
    if graph.vertex_count() < 3 {
        return Err(Error::TooFewVertices(graph.vertex_count()));
    }
    let expected = PanelProvenance {
        graph_fingerprint: graph.fingerprint(),
        sample_count: cfg.samples,
        seed: cfg.seed,
    };
    if panel.provenance() != expected {
        return Err(Error::PanelMismatch);
    }
    let risk_cfg = cfg.risk();
    let base = EvalBase::new(graph, panel, &risk_cfg)?;
    let grid_len = risk::tau_grid_len(cfg.gamma_cap, cfg.gamma_step)?;

    let mut best: Option<(EdgeSet, f64)> = None;
    let mut h_max = 0.0_f64;
    let mut trace = Vec::with_capacity(grid_len);
    let mut iterations_run = 0usize;
    for i in 0..grid_len {
        let tau = i as f64 * cfg.gamma_step;
        let state = greedy_with_base(graph, panel, &risk_cfg, tau, &base);
        iterations_run += 1;
        trace.push(TraceEntry {
            tau,
            edges: state
                .edges
                .iter()
                .map(|e| graph.edges[e].endpoints)
                .collect(),
            h: state.h_value,
        });
        // ">=" means later tau iterations win exact ties.
        if state.h_value >= h_max {
            h_max = state.h_value;
            best = Some((state.edges, tau));
        }
        if state.h_value < 0.0 {
            break;
        }
    }
    let (tour, tau) = best.expect("the tau = 0 iteration always yields H = 0 >= H_max");
    Ok(SolveResult {
        tour,
        tau,
        h_max,
        trace,
        iterations_run,
        config: *cfg,
        provenance: panel.provenance(),
    })
}

/// Whether `s` forms a single cycle through every vertex of the graph.
pub fn is_hamiltonian_cycle(s: &EdgeSet, graph: &StochasticGraph) -> bool {
    tour_vertices(s, graph).is_ok()
}

/// Orders a Hamiltonian cycle as a vertex sequence starting at vertex 0,
/// walking toward its smaller-indexed neighbor.
pub fn tour_vertices(s: &EdgeSet, graph: &StochasticGraph) -> Result<Vec<usize>> {
    let n = graph.vertex_count();
    if s.len() != n {
        return Err(Error::NotHamiltonian);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in s.iter() {
        if e >= graph.edge_count() {
            return Err(Error::InvalidEdgeIndex(e, graph.edge_count()));
        }
        let (u, v) = graph.edges[e].endpoints;
        adj[u].push(v);
        adj[v].push(u);
    }
    if adj.iter().any(|a| a.len() != 2) {
        return Err(Error::NotHamiltonian);
    }
    // Walk the cycle; revisiting a vertex before covering all n means the
    // edge set splits into several disjoint cycles.
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut cycle = Vec::with_capacity(n);
    cycle.push(0usize);
    let mut cur = 0usize;
    let mut next = adj[0][0].min(adj[0][1]);
    for _ in 1..n {
        if visited[next] {
            return Err(Error::NotHamiltonian);
        }
        visited[next] = true;
        cycle.push(next);
        let step = if adj[next][0] == cur {
            adj[next][1]
        } else {
            adj[next][0]
        };
        cur = next;
        next = step;
    }
    // A single cycle returns to the start after visiting all n vertices.
    if next != 0 {
        return Err(Error::NotHamiltonian);
    }
    Ok(cycle)
}
