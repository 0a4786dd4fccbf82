//! Stochastic utility evaluation and risk measures.
//!
//! A [`NoisePanel`] is a fixed panel of sampled noise realizations (common
//! random numbers). Holding the panel fixed makes the sampled auxiliary
//! function `H(S, tau) = tau - (1/alpha) * mean((tau - f(S, y))^+)` a
//! deterministic set function of the edge set `S`, so greedy selection,
//! submodularity checks and brute-force comparisons are all reproducible.
//!
//! Reward noise is sampled per cell, not per edge: per-edge noise would break
//! set-function semantics wherever two edges sense the same cell, while
//! per-cell noise with variance proportional to the cell mean gives edge-level
//! reward variance proportional to the edge mean and keeps every realization
//! monotone submodular.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::StochasticGraph;

/// Risk level `alpha` in (0, 1] and reward/cost weighting `beta` in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl RiskConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let cfg = Self { alpha, beta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

/// Set of edge indices preserving insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeSet {
    edges: Vec<usize>,
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I: IntoIterator<Item = usize>>(edges: I) -> Result<Self> {
        let mut set = Self::new();
        for e in edges {
            set.insert(e)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, e: usize) -> Result<()> {
        if self.contains(e) {
            return Err(Error::EdgeAlreadySelected(e));
        }
        self.edges.push(e);
        Ok(())
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.contains(&e)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.edges
    }

    /// Edges in ascending index order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.edges.clone();
        v.sort_unstable();
        v
    }
}

/// Identifies the (graph, sample count, seed) triple a panel was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelProvenance {
    pub graph_fingerprint: u64,
    pub sample_count: usize,
    pub seed: u64,
}

/// Fixed panel of noise realizations.
///
/// Cell rewards are truncated Gaussians on `[0, inf)` with mean equal to the
/// (scaled) cell mean and variance `v_r * mean`; edge costs are truncated
/// Gaussians on `[0, C]` with mean `c(e)` and variance `v_c * (C - c(e))`.
/// Sample `j` of each cell or edge comes from an independent substream keyed
/// by `(seed, kind, entity, j)`, so generation order does not affect values.
#[derive(Debug, Clone)]
pub struct NoisePanel {
    n_s: usize,
    seed: u64,
    graph_fingerprint: u64,
    /// Flattened `[cell][sample]`.
    cell_rewards: Vec<f64>,
    /// Flattened `[edge][sample]`.
    edge_costs: Vec<f64>,
}

const STREAM_CELL: u64 = 1;
const STREAM_EDGE: u64 = 2;

fn substream(seed: u64, kind: u64, entity: u64, j: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&kind.to_le_bytes());
    key[16..24].copy_from_slice(&entity.to_le_bytes());
    key[24..32].copy_from_slice(&j.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

impl NoisePanel {
    pub fn sample_count(&self) -> usize {
        self.n_s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> PanelProvenance {
        PanelProvenance {
            graph_fingerprint: self.graph_fingerprint,
            sample_count: self.n_s,
            seed: self.seed,
        }
    }

    pub fn matches(&self, graph: &StochasticGraph) -> bool {
        self.graph_fingerprint == graph.fingerprint()
    }

    #[inline]
    pub fn cell_reward(&self, dense: usize, j: usize) -> f64 {
        self.cell_rewards[dense * self.n_s + j]
    }

    /// All samples of one catalog cell.
    #[inline]
    pub fn cell_reward_row(&self, dense: usize) -> &[f64] {
        &self.cell_rewards[dense * self.n_s..(dense + 1) * self.n_s]
    }

    #[inline]
    pub fn edge_cost(&self, e: usize, j: usize) -> f64 {
        self.edge_costs[e * self.n_s + j]
    }

    #[inline]
    pub fn edge_cost_row(&self, e: usize) -> &[f64] {
        &self.edge_costs[e * self.n_s..(e + 1) * self.n_s]
    }
}

/// Builds the noise panel for `graph` with `n_s` samples, deterministic in
/// `seed`.
pub fn make_noise_panel(graph: &StochasticGraph, n_s: usize, seed: u64) -> Result<NoisePanel> {
    if n_s < 1 {
        return Err(Error::InvalidSampleCount);
    }
    let v_r = graph.reward_var_coeff;
    let v_c = graph.cost_var_coeff;
    let cap = graph.cost_cap;

    let mut cell_rewards = vec![0.0; graph.cell_count() * n_s];
    cell_rewards
        .par_chunks_mut(n_s)
        .enumerate()
        .for_each(|(dense, row)| {
            let id = graph.cell_id(dense);
            let entity = (id.col as u64) << 32 | id.row as u64;
            let mean = graph.cell_mean(dense);
            let sigma = (v_r * mean).sqrt();
            for (j, slot) in row.iter_mut().enumerate() {
                let mut rng = substream(seed, STREAM_CELL, entity, j as u64);
                *slot = truncated_normal(&mut rng, mean, sigma, 0.0, f64::INFINITY);
            }
        });

    let mut edge_costs = vec![0.0; graph.edge_count() * n_s];
    edge_costs
        .par_chunks_mut(n_s)
        .enumerate()
        .for_each(|(e, row)| {
            let mean = graph.edges[e].cost_mean;
            let sigma = (v_c * (cap - mean)).sqrt();
            for (j, slot) in row.iter_mut().enumerate() {
                let mut rng = substream(seed, STREAM_EDGE, e as u64, j as u64);
                *slot = truncated_normal(&mut rng, mean, sigma, 0.0, cap);
            }
        });

    Ok(NoisePanel {
        n_s,
        seed,
        graph_fingerprint: graph.fingerprint(),
        cell_rewards,
        edge_costs,
    })
}

/// Draws from a Gaussian truncated to `[lo, hi]`.
///
/// Rejection from the untruncated Gaussian, falling back to inverse-CDF
/// sampling when the acceptance region holds less than 1% of the mass.
pub(crate) fn truncated_normal<R: Rng>(
    rng: &mut R,
    mean: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if sigma == 0.0 {
        return mean.clamp(lo, hi);
    }
    let std = Normal::standard();
    let z_lo = (lo - mean) / sigma;
    let z_hi = (hi - mean) / sigma;
    let p_lo = if z_lo.is_infinite() {
        0.0
    } else {
        std.cdf(z_lo)
    };
    let p_hi = if z_hi.is_infinite() {
        1.0
    } else {
        std.cdf(z_hi)
    };
    let mass = p_hi - p_lo;
    if mass >= 0.01 {
        // Expected iterations <= 100; the cap only guards degenerate input.
        for _ in 0..10_000 {
            let z: f64 = rng.sample(StandardNormal);
            let x = mean + sigma * z;
            if x >= lo && x <= hi {
                return x;
            }
        }
    }
    let u = rng.random_range(p_lo..=p_hi);
    let x = mean + sigma * std.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16));
    x.clamp(lo, hi)
}

/// Collects the union of sensed cells of `s` as sorted catalog indices.
pub(crate) fn union_cells(s: &EdgeSet, graph: &StochasticGraph) -> Vec<u32> {
    let mut cells: Vec<u32> = s
        .iter()
        .flat_map(|e| graph.edge_cells(e).iter().copied())
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

fn validate_panel(s: &EdgeSet, panel: &NoisePanel, graph: &StochasticGraph) -> Result<()> {
    if !panel.matches(graph) {
        return Err(Error::PanelMismatch);
    }
    for e in s.iter() {
        if e >= graph.edge_count() {
            return Err(Error::InvalidEdgeIndex(e, graph.edge_count()));
        }
    }
    Ok(())
}

/// Utility of edge set `S` under realization `j`:
/// `(1 - beta) * r(S) + beta * (|S| * C - c(S))`, where `r` sums the sampled
/// rewards of all distinct sensed cells and `c` sums the sampled edge costs.
pub fn utility(
    s: &EdgeSet,
    panel: &NoisePanel,
    j: usize,
    graph: &StochasticGraph,
    cfg: &RiskConfig,
) -> Result<f64> {
    if j >= panel.sample_count() {
        return Err(Error::InvalidSampleIndex(j, panel.sample_count()));
    }
    validate_panel(s, panel, graph)?;
    let cells = union_cells(s, graph);
    let edges = s.sorted();
    let mut reward = 0.0;
    for &d in &cells {
        reward += panel.cell_reward(d as usize, j);
    }
    let mut cost = 0.0;
    for &e in &edges {
        cost += panel.edge_cost(e, j);
    }
    Ok((1.0 - cfg.beta) * reward + cfg.beta * (s.len() as f64 * graph.cost_cap - cost))
}

/// Reward and cost parts of the utility for every sample:
/// `f_r(S, y) = r(S, y_r)` and `f_c(S, y) = |S| * C - c(S, y_c)`.
pub fn utility_parts_samples(
    s: &EdgeSet,
    panel: &NoisePanel,
    graph: &StochasticGraph,
) -> Result<(Vec<f64>, Vec<f64>)> {
    validate_panel(s, panel, graph)?;
    let n_s = panel.sample_count();
    let cells = union_cells(s, graph);
    let edges = s.sorted();
    let mut reward = vec![0.0; n_s];
    for &d in &cells {
        let row = panel.cell_reward_row(d as usize);
        for (acc, &x) in reward.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let mut cost = vec![0.0; n_s];
    for &e in &edges {
        let row = panel.edge_cost_row(e);
        for (acc, &x) in cost.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let slack = s.len() as f64 * graph.cost_cap;
    let fc: Vec<f64> = cost.iter().map(|&c| slack - c).collect();
    Ok((reward, fc))
}

/// Utility of `S` under every realization of the panel. Accumulation order is
/// canonical (sorted cells, sorted edges), so any `EdgeSet` holding the same
/// edges yields bitwise-identical values.
pub fn utility_samples(
    s: &EdgeSet,
    panel: &NoisePanel,
    graph: &StochasticGraph,
    cfg: &RiskConfig,
) -> Result<Vec<f64>> {
    let (fr, fc) = utility_parts_samples(s, panel, graph)?;
    Ok(fr
        .iter()
        .zip(&fc)
        .map(|(&r, &c)| (1.0 - cfg.beta) * r + cfg.beta * c)
        .collect())
}

fn quantile_index(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if n == 0 {
        return Err(Error::EmptyValues);
    }
    let k = (alpha * n as f64).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// Empirical value-at-risk: the `ceil(alpha * n)`-th smallest value.
pub fn empirical_var(values: &[f64], alpha: f64) -> Result<f64> {
    let k = quantile_index(values.len(), alpha)?;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// Empirical conditional value-at-risk: mean of the `ceil(alpha * n)`
/// smallest values.
pub fn empirical_cvar(values: &[f64], alpha: f64) -> Result<f64> {
    let k = quantile_index(values.len(), alpha)?;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Auxiliary value `tau - (1 / (alpha * n)) * sum_j (tau - f_j)^+` from
/// precomputed utility samples.
pub fn h_from_samples(samples: &[f64], tau: f64, alpha: f64) -> f64 {
    let mut shortfall = 0.0;
    for &f in samples {
        shortfall += (tau - f).max(0.0);
    }
    tau - shortfall / (alpha * samples.len() as f64)
}

/// Sampled auxiliary function
/// `H(S, tau) = tau - (1 / (alpha * n_s)) * sum_j (tau - f(S, y_j))^+`.
pub fn estimate_h(
    s: &EdgeSet,
    tau: f64,
    panel: &NoisePanel,
    graph: &StochasticGraph,
    cfg: &RiskConfig,
) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTau(tau));
    }
    let samples = utility_samples(s, panel, graph, cfg)?;
    Ok(h_from_samples(&samples, tau, cfg.alpha))
}

/// Number of grid points in `{0, step, ..., ceil(cap/step) * step}`.
pub fn tau_grid_len(gamma_cap: f64, gamma_step: f64) -> Result<usize> {
    if !(gamma_cap >= 0.0)
        || !gamma_cap.is_finite()
        || !(gamma_step > 0.0)
        || !gamma_step.is_finite()
    {
        return Err(Error::InvalidTauGrid {
            cap: gamma_cap,
            step: gamma_step,
        });
    }
    if gamma_cap > 0.0 && gamma_step > gamma_cap {
        return Err(Error::InvalidTauGrid {
            cap: gamma_cap,
            step: gamma_step,
        });
    }
    // Small guard so caps that are exact multiples of the step do not gain a
    // spurious extra grid point from floating-point division.
    let iters = ((gamma_cap / gamma_step) - 1e-9).ceil().max(0.0) as usize;
    Ok(iters + 1)
}

/// Maximizes the sampled auxiliary function over the grid
/// `tau in {0, step, 2*step, ..., ceil(cap/step)*step}`, returning the
/// maximizing `(tau, H)`. Ties resolve to the smallest `tau`.
pub fn max_h_over_tau(
    s: &EdgeSet,
    panel: &NoisePanel,
    graph: &StochasticGraph,
    cfg: &RiskConfig,
    gamma_cap: f64,
    gamma_step: f64,
) -> Result<(f64, f64)> {
    let len = tau_grid_len(gamma_cap, gamma_step)?;
    let samples = utility_samples(s, panel, graph, cfg)?;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..len {
        let tau = i as f64 * gamma_step;
        let h = h_from_samples(&samples, tau, cfg.alpha);
        if h > best.1 {
            best = (tau, h);
        }
    }
    Ok(best)
}
