//! Ground-truth machinery for small instances.
//!
//! Everything here exists to check the solver from the outside: exhaustive
//! Hamiltonian-tour enumeration, an exact-on-panel optimal solve, curvature
//! of the sampled auxiliary function, the greedy approximation bound, and
//! exhaustive monotonicity/submodularity checks.
//!
//! The set-function checks are zero-tolerance, so they run in integer
//! fixed-point arithmetic (scale 2^-40) derived from the panel: coverage and
//! modular structure hold exactly over the integers, which keeps genuine
//! structural bugs distinguishable from f64 round-off. The float path is
//! separately required to agree with the fixed-point model to 1e-9.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::StochasticGraph;
use crate::risk::{
    self, estimate_h, make_noise_panel, utility_samples, EdgeSet, NoisePanel, PanelProvenance,
    RiskConfig,
};
use crate::solver::{SolveResult, SolverConfig};

/// Largest vertex count accepted by the tour-enumeration oracles.
pub const ENUMERATION_LIMIT: usize = 9;

/// Largest ground-set size for which subset checks run exhaustively.
pub const EXHAUSTIVE_EDGE_LIMIT: usize = 12;

/// Yields every Hamiltonian cycle of the complete graph exactly once
/// (vertex 0 fixed, one canonical direction), in lexicographic order.
pub fn enumerate_tours(graph: &StochasticGraph) -> Result<impl Iterator<Item = EdgeSet> + '_> {
    let n = graph.vertex_count();
    if !(3..=ENUMERATION_LIMIT).contains(&n) {
        return Err(Error::EnumerationGuard(n));
    }
    let iter = (1..n)
        .permutations(n - 1)
        .filter(move |p| p[0] < p[n - 2])
        .map(move |p| {
            let mut edges = EdgeSet::new();
            let mut prev = 0usize;
            for &v in &p {
                edges
                    .insert(graph.edge_index(prev, v).expect("valid pair"))
                    .expect("tour edges are distinct");
                prev = v;
            }
            edges
                .insert(graph.edge_index(prev, 0).expect("valid pair"))
                .expect("closing edge is distinct");
            edges
        });
    Ok(iter)
}

/// Optimum of the sampled auxiliary function over all tours and the tau grid.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Optimal tour.
    pub tour: EdgeSet,
    /// Grid tau attaining the optimum.
    pub tau: f64,
    /// Optimal value.
    pub h: f64,
    pub tours_enumerated: usize,
    pub config: SolverConfig,
    pub provenance: PanelProvenance,
}

/// Exhaustively maximizes the sampled auxiliary function over every
/// Hamiltonian tour and every grid value of tau, on the same panel
/// construction as the greedy solve. Ties resolve to the first tour in
/// enumeration order, then the smallest tau.
pub fn brute_force_solve(graph: &StochasticGraph, cfg: &SolverConfig) -> Result<BruteForceResult> {
    cfg.validate()?;
    let panel = make_noise_panel(graph, cfg.samples, cfg.seed)?;
    brute_force_solve_with_panel(graph, cfg, &panel)
}

/// Like [`brute_force_solve`] but reuses a panel built from the same
/// `(graph, samples, seed)` triple.
pub fn brute_force_solve_with_panel(
    graph: &StochasticGraph,
    cfg: &SolverConfig,
    panel: &NoisePanel,
) -> Result<BruteForceResult> {
    cfg.validate()?;
    let expected = PanelProvenance {
        graph_fingerprint: graph.fingerprint(),
        sample_count: cfg.samples,
        seed: cfg.seed,
    };
    if panel.provenance() != expected {
        return Err(Error::PanelMismatch);
    }
    let grid_len = risk::tau_grid_len(cfg.gamma_cap, cfg.gamma_step)?;
    let risk_cfg = cfg.risk();
    let tours: Vec<EdgeSet> = enumerate_tours(graph)?.collect();
    let per_tour: Vec<(f64, f64)> = tours
        .par_iter()
        .map(|tour| {
            let samples =
                utility_samples(tour, panel, graph, &risk_cfg).expect("enumerated tours are valid");
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..grid_len {
                let tau = i as f64 * cfg.gamma_step;
                let h = risk::h_from_samples(&samples, tau, cfg.alpha);
                if h > best.0 {
                    best = (h, tau);
                }
            }
            best
        })
        .collect();
    let (best_idx, &(h, tau)) = per_tour
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.0.total_cmp(&b.0).then(ib.cmp(ia)))
        .expect("at least one tour");
    Ok(BruteForceResult {
        tour: tours[best_idx].clone(),
        tau,
        h,
        tours_enumerated: tours.len(),
        config: *cfg,
        provenance: panel.provenance(),
    })
}

/// Curvature of the normalized sampled auxiliary function over the tour
/// system, with the witnesses attaining the minimal marginal ratio.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    /// Curvature in [0, 1]; 0 is modular.
    pub k: f64,
    pub min_ratio: f64,
    /// Edge indices of the tour attaining the minimal ratio.
    pub witness_tour: Vec<usize>,
    /// The removed element attaining the minimal ratio.
    pub witness_edge: usize,
    pub tau_used: f64,
    /// Edges whose singleton normalized value is zero; they contribute
    /// nothing anywhere, so they are excluded from the ratio.
    pub inert_edges: Vec<usize>,
}

/// Computes the curvature `k = 1 - min (Hn(S) - Hn(S \ {s})) / Hn({s})` over
/// all tours `S` and elements `s`, where `Hn(X) = H(X, tau) - H({}, tau)` is
/// the normalized auxiliary function.
pub fn curvature(
    graph: &StochasticGraph,
    panel: &NoisePanel,
    cfg: &RiskConfig,
    tau: f64,
) -> Result<CurvatureReport> {
    cfg.validate()?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTau(tau));
    }
    let h_empty = estimate_h(&EdgeSet::new(), tau, panel, graph, cfg)?;
    let singleton: Vec<f64> = (0..graph.edge_count())
        .map(|e| {
            let s = EdgeSet::from_edges([e]).expect("singleton");
            estimate_h(&s, tau, panel, graph, cfg).map(|h| h - h_empty)
        })
        .collect::<Result<_>>()?;
    let inert_edges: Vec<usize> = (0..graph.edge_count())
        .filter(|&e| singleton[e] == 0.0)
        .collect();
    if inert_edges.len() == graph.edge_count() {
        return Err(Error::AllSingletonsInert(tau));
    }

    let tours: Vec<EdgeSet> = enumerate_tours(graph)?.collect();
    let per_tour: Vec<Option<(f64, usize, usize)>> = tours
        .par_iter()
        .enumerate()
        .map(|(t, tour)| {
            let hn_full = estimate_h(tour, tau, panel, graph, cfg).expect("valid tour") - h_empty;
            let mut best: Option<(f64, usize, usize)> = None;
            for s in tour.iter() {
                if singleton[s] == 0.0 {
                    continue;
                }
                let reduced =
                    EdgeSet::from_edges(tour.iter().filter(|&e| e != s)).expect("distinct edges");
                let hn_reduced =
                    estimate_h(&reduced, tau, panel, graph, cfg).expect("valid subset") - h_empty;
                let ratio = (hn_full - hn_reduced) / singleton[s];
                if best.is_none_or(|(r, _, _)| ratio < r) {
                    best = Some((ratio, t, s));
                }
            }
            best
        })
        .collect();
    let (min_ratio, tour_idx, edge) = per_tour
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("some tour has a non-inert element");
    Ok(CurvatureReport {
        k: (1.0 - min_ratio).clamp(0.0, 1.0),
        min_ratio,
        witness_tour: tours[tour_idx].as_slice().to_vec(),
        witness_edge: edge,
        tau_used: tau,
        inert_edges,
    })
}

/// Outcome of an approximation-bound check.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub holds: bool,
    /// `H_greedy - rhs`; non-negative when the bound holds.
    pub margin: f64,
    pub rhs: f64,
    pub h_greedy: f64,
    pub h_opt: f64,
    pub k: f64,
}

/// Checks the greedy guarantee
/// `H_greedy >= (H_opt - step) / (2 + k)
///             + (1 + k) / (2 + k) * cap * (1 - 1/alpha) - epsilon`
/// for results computed on the same panel.
///
/// For very small alpha (roughly below 0.05) the `cap * (1 - 1/alpha)` term
/// makes the right-hand side vacuously negative; the check still runs but
/// carries no information there.
pub fn verify_bound(
    greedy: &SolveResult,
    opt: &BruteForceResult,
    k: f64,
    cfg: &SolverConfig,
    epsilon: f64,
) -> Result<BoundCheck> {
    let expected = PanelProvenance {
        graph_fingerprint: greedy.provenance.graph_fingerprint,
        sample_count: cfg.samples,
        seed: cfg.seed,
    };
    if greedy.provenance != opt.provenance || greedy.provenance != expected {
        return Err(Error::PanelMismatch);
    }
    if !(0.0..=1.0).contains(&k) || !(epsilon >= 0.0) {
        return Err(Error::MalformedFile {
            what: "bound parameters".into(),
            detail: format!("k = {k}, epsilon = {epsilon}"),
        });
    }
    let denom = 2.0 + k;
    let rhs = (opt.h - cfg.gamma_step) / denom
        + (1.0 + k) / denom * cfg.gamma_cap * (1.0 - 1.0 / cfg.alpha)
        - epsilon;
    let margin = greedy.h_max - rhs;
    Ok(BoundCheck {
        holds: margin >= 0.0,
        margin,
        rhs,
        h_greedy: greedy.h_max,
        h_opt: opt.h,
        k,
    })
}

/// Report of the exhaustive set-function checks.
#[derive(Debug, Clone)]
pub struct SubmodularityReport {
    pub ground_edges: Vec<usize>,
    pub tau: f64,
    pub sets_checked: usize,
    pub pairs_checked: usize,
    /// `H(S + e) < H(S)` events in the fixed-point model.
    pub h_monotonicity_violations: usize,
    /// `H(S) + H(T) < H(S|T) + H(S&T)` events in the fixed-point model.
    pub h_submodularity_violations: usize,
    /// Per-realization utility monotonicity violations.
    pub realization_monotonicity_violations: usize,
    /// Per-realization reward-part submodularity violations.
    pub reward_submodularity_violations: usize,
    /// Worst float additivity error of the cost part over checked pairs.
    pub cost_modularity_max_abs_err: f64,
    /// Worst disagreement between the float utility and the fixed-point
    /// model, in utility units.
    pub float_agreement_max_abs_err: f64,
    /// Human-readable witness of the first violation, if any.
    pub first_violation: Option<String>,
}

impl SubmodularityReport {
    /// No structural violations, modular cost part to 1e-12, float path
    /// agreeing with the fixed-point model to 1e-9.
    pub fn is_clean(&self) -> bool {
        self.h_monotonicity_violations == 0
            && self.h_submodularity_violations == 0
            && self.realization_monotonicity_violations == 0
            && self.reward_submodularity_violations == 0
            && self.cost_modularity_max_abs_err <= 1e-12
            && self.float_agreement_max_abs_err <= 1e-9
    }
}

const FIXED_POINT_SCALE: f64 = (1u64 << 40) as f64;

/// Integer fixed-point view of the panel restricted to a ground edge set.
struct FixedPointModel {
    n_s: usize,
    tau_int: i64,
    /// Distinct cell cover patterns (bitmask over ground edges).
    patterns: Vec<u64>,
    /// Per-pattern, per-sample reward weight, already `(1 - beta)`-scaled.
    pattern_rewards: Vec<Vec<i64>>,
    /// Per-ground-edge, per-sample cost term, already `beta`-scaled.
    cost_terms: Vec<Vec<i64>>,
}

impl FixedPointModel {
    fn new(
        graph: &StochasticGraph,
        panel: &NoisePanel,
        cfg: &RiskConfig,
        tau: f64,
        ground: &[usize],
    ) -> Self {
        let n_s = panel.sample_count();
        let to_int = |x: f64| (x * FIXED_POINT_SCALE).round() as i64;
        // Cover pattern of every cell sensed by some ground edge.
        let mut cover: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
        for (i, &e) in ground.iter().enumerate() {
            for &d in graph.edge_cells(e) {
                *cover.entry(d).or_insert(0) |= 1 << i;
            }
        }
        let mut by_pattern: std::collections::BTreeMap<u64, Vec<u32>> =
            std::collections::BTreeMap::new();
        for (d, p) in cover {
            by_pattern.entry(p).or_default().push(d);
        }
        let mut patterns = Vec::with_capacity(by_pattern.len());
        let mut pattern_rewards = Vec::with_capacity(by_pattern.len());
        let rw = 1.0 - cfg.beta;
        for (p, cells) in by_pattern {
            let mut acc = vec![0i64; n_s];
            for d in cells {
                let row = panel.cell_reward_row(d as usize);
                for (a, &x) in acc.iter_mut().zip(row) {
                    *a += to_int(rw * x);
                }
            }
            patterns.push(p);
            pattern_rewards.push(acc);
        }
        let cost_terms = ground
            .iter()
            .map(|&e| {
                panel
                    .edge_cost_row(e)
                    .iter()
                    .map(|&c| to_int(cfg.beta * (graph.cost_cap - c)))
                    .collect()
            })
            .collect();
        Self {
            n_s,
            tau_int: to_int(tau),
            patterns,
            pattern_rewards,
            cost_terms,
        }
    }

    /// Per-sample reward part of the subset `mask`.
    fn rewards(&self, mask: u64) -> Vec<i64> {
        let mut acc = vec![0i64; self.n_s];
        for (p, row) in self.patterns.iter().zip(&self.pattern_rewards) {
            if p & mask != 0 {
                for (a, &x) in acc.iter_mut().zip(row) {
                    *a += x;
                }
            }
        }
        acc
    }

    /// Per-sample cost part of the subset `mask`.
    fn costs(&self, mask: u64) -> Vec<i64> {
        let mut acc = vec![0i64; self.n_s];
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            for (a, &x) in acc.iter_mut().zip(&self.cost_terms[i]) {
                *a += x;
            }
        }
        acc
    }

    /// Shortfall sum `G = sum_j (tau - f_j)^+`. Since
    /// `H = tau - G / (alpha * n_s)`, ordering checks on `H` reduce to
    /// reversed ordering checks on `G`.
    fn shortfall(&self, rewards: &[i64], costs: &[i64]) -> i128 {
        let mut g: i128 = 0;
        for j in 0..self.n_s {
            let f = rewards[j] + costs[j];
            if self.tau_int > f {
                g += (self.tau_int - f) as i128;
            }
        }
        g
    }
}

/// Exhaustive monotonicity/submodularity checks over all subsets of
/// `ground`, which must hold at most [`EXHAUSTIVE_EDGE_LIMIT`] edges.
#[allow(clippy::needless_range_loop)] // index loops mirror the bitmask math
pub fn check_submodular_on(
    graph: &StochasticGraph,
    panel: &NoisePanel,
    tau: f64,
    cfg: &RiskConfig,
    ground: &[usize],
) -> Result<SubmodularityReport> {
    cfg.validate()?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTau(tau));
    }
    if !panel.matches(graph) {
        return Err(Error::PanelMismatch);
    }
    let m = ground.len();
    if m > EXHAUSTIVE_EDGE_LIMIT {
        return Err(Error::ExhaustiveGuard {
            edges: m,
            limit: EXHAUSTIVE_EDGE_LIMIT,
        });
    }
    for &e in ground {
        if e >= graph.edge_count() {
            return Err(Error::InvalidEdgeIndex(e, graph.edge_count()));
        }
    }
    let model = FixedPointModel::new(graph, panel, cfg, tau, ground);
    let n_masks = 1usize << m;
    let rewards: Vec<Vec<i64>> = (0..n_masks as u64)
        .into_par_iter()
        .map(|mask| model.rewards(mask))
        .collect();
    let costs: Vec<Vec<i64>> = (0..n_masks as u64).map(|mask| model.costs(mask)).collect();
    let shortfalls: Vec<i128> = (0..n_masks)
        .into_par_iter()
        .map(|mask| model.shortfall(&rewards[mask], &costs[mask]))
        .collect();

    let mut report = SubmodularityReport {
        ground_edges: ground.to_vec(),
        tau,
        sets_checked: n_masks,
        pairs_checked: 0,
        h_monotonicity_violations: 0,
        h_submodularity_violations: 0,
        realization_monotonicity_violations: 0,
        reward_submodularity_violations: 0,
        cost_modularity_max_abs_err: 0.0,
        float_agreement_max_abs_err: 0.0,
        first_violation: None,
    };
    fn note(slot: &mut Option<String>, msg: String) {
        if slot.is_none() {
            *slot = Some(msg);
        }
    }

    // Monotonicity: adding one edge never lowers H (never raises G) and
    // never lowers any realization's utility.
    for mask in 0..n_masks {
        for i in 0..m {
            if mask & (1 << i) != 0 {
                continue;
            }
            let sup = mask | (1 << i);
            if shortfalls[sup] > shortfalls[mask] {
                report.h_monotonicity_violations += 1;
                note(
                    &mut report.first_violation,
                    format!("H monotonicity: mask {mask:#b} + edge {}", ground[i]),
                );
            }
            for j in 0..model.n_s {
                if rewards[sup][j] + costs[sup][j] < rewards[mask][j] + costs[mask][j] {
                    report.realization_monotonicity_violations += 1;
                    note(
                        &mut report.first_violation,
                        format!("utility monotonicity: mask {mask:#b}, sample {j}"),
                    );
                }
            }
        }
    }

    // Submodularity over every subset pair.
    for s in 0..n_masks {
        for t in 0..n_masks {
            let union = s | t;
            let inter = s & t;
            report.pairs_checked += 1;
            if shortfalls[s] + shortfalls[t] > shortfalls[union] + shortfalls[inter] {
                report.h_submodularity_violations += 1;
                note(
                    &mut report.first_violation,
                    format!("H submodularity: S {s:#b}, T {t:#b}"),
                );
            }
            for j in 0..model.n_s {
                if rewards[s][j] + rewards[t][j] < rewards[union][j] + rewards[inter][j] {
                    report.reward_submodularity_violations += 1;
                    note(
                        &mut report.first_violation,
                        format!("reward submodularity: S {s:#b}, T {t:#b}, sample {j}"),
                    );
                }
            }
        }
    }

    // Float-path checks: cost-part additivity and agreement with the
    // fixed-point model.
    let edge_set_of = |mask: usize| {
        EdgeSet::from_edges((0..m).filter(|i| mask & (1 << i) != 0).map(|i| ground[i]))
            .expect("ground edges are distinct")
    };
    let fc: Vec<Vec<f64>> = (0..n_masks)
        .map(|mask| {
            let s = edge_set_of(mask);
            let (_, fc) = risk::utility_parts_samples(&s, panel, graph)?;
            Ok(fc)
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(panel.seed() ^ 0x5b7e);
    let pair_samples = 4096.min(n_masks * n_masks);
    for _ in 0..pair_samples {
        let s = rng.random_range(0..n_masks);
        let t = rng.random_range(0..n_masks);
        let (union, inter) = (s | t, s & t);
        for j in 0..model.n_s {
            let beta_err = cfg.beta * ((fc[s][j] + fc[t][j]) - (fc[union][j] + fc[inter][j])).abs();
            report.cost_modularity_max_abs_err = report.cost_modularity_max_abs_err.max(beta_err);
        }
    }
    for mask in (0..n_masks).step_by((n_masks / 64).max(1)) {
        let s = edge_set_of(mask);
        let float_f = utility_samples(&s, panel, graph, cfg)?;
        for j in 0..model.n_s {
            let fixed = (rewards[mask][j] + costs[mask][j]) as f64 / FIXED_POINT_SCALE;
            report.float_agreement_max_abs_err = report
                .float_agreement_max_abs_err
                .max((float_f[j] - fixed).abs());
        }
    }
    Ok(report)
}

/// [`check_submodular_on`] over the whole edge set when it is small enough,
/// otherwise over a deterministic random sample of
/// [`EXHAUSTIVE_EDGE_LIMIT`] edges.
pub fn check_submodular_exhaustive(
    graph: &StochasticGraph,
    panel: &NoisePanel,
    tau: f64,
    cfg: &RiskConfig,
) -> Result<SubmodularityReport> {
    let m = graph.edge_count();
    if m <= EXHAUSTIVE_EDGE_LIMIT {
        let ground: Vec<usize> = (0..m).collect();
        return check_submodular_on(graph, panel, tau, cfg, &ground);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(panel.seed() ^ 0x90ce);
    let mut ground: Vec<usize> = (0..m).collect();
    for i in 0..EXHAUSTIVE_EDGE_LIMIT {
        let pick = rng.random_range(i..m);
        ground.swap(i, pick);
    }
    ground.truncate(EXHAUSTIVE_EDGE_LIMIT);
    ground.sort_unstable();
    check_submodular_on(graph, panel, tau, cfg, &ground)
}
