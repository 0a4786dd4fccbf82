//! Acceptance suite: one pass/fail line per criterion, run sequentially so
//! the timing-sensitive checks are not perturbed by parallel tests.
//!
//! Run with `cargo test -p raga --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raga::cli::{cmd_hcurve, HcurveArgs, SolveFlags};
use raga::env::{generate_map, random_blobs};
use raga::files::save_graph;
use raga::graph::{build_graph, StochasticGraph};
use raga::oracle::{
    brute_force_solve_with_panel, check_submodular_exhaustive, check_submodular_on, curvature,
    verify_bound,
};
use raga::presets::{demo_graph, random_instance, random_sites, scalability_graph};
use raga::risk::{
    empirical_cvar, empirical_var, make_noise_panel, max_h_over_tau, utility_samples, EdgeSet,
    RiskConfig,
};
use raga::solver::{
    is_feasible, is_hamiltonian_cycle, raga_solve, raga_solve_with_panel, SolverConfig, TourState,
};

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Result<String, String>,
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion {
            id: 1,
            name: "CVaR estimators vs independent sort-and-average oracle",
            limit: Duration::from_secs(1),
            run: criterion_1_cvar_estimators,
        },
        Criterion {
            id: 2,
            name: "max_tau H equals empirical CVaR (Rockafellar equivalence)",
            limit: Duration::from_secs(30),
            run: criterion_2_rockafellar,
        },
        Criterion {
            id: 3,
            name: "H is exactly monotone and submodular in S",
            limit: Duration::from_secs(120),
            run: criterion_3_h_properties,
        },
        Criterion {
            id: 4,
            name: "hcurve columns are concave in tau",
            limit: Duration::from_secs(10),
            run: criterion_4_concavity,
        },
        Criterion {
            id: 5,
            name: "per-realization utility: monotone, submodular reward, modular cost",
            limit: Duration::from_secs(60),
            run: criterion_5_realizations,
        },
        Criterion {
            id: 6,
            name: "greedy approximation bound vs brute force",
            limit: Duration::from_secs(600),
            run: criterion_6_bound,
        },
        Criterion {
            id: 7,
            name: "risk-neutral reduction to deterministic weight greedy",
            limit: Duration::from_secs(60),
            run: criterion_7_risk_neutral,
        },
        Criterion {
            id: 8,
            name: "smaller alpha exits earlier and runs no slower",
            limit: Duration::from_secs(120),
            run: criterion_8_early_exit,
        },
        Criterion {
            id: 9,
            name: "study-scale and scalability configurations complete",
            limit: Duration::from_secs(960),
            run: criterion_9_scale,
        },
    ];

    let mut failures = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let timed_out = elapsed > c.limit;
        match (&outcome, timed_out) {
            (Ok(detail), false) => {
                println!(
                    "criterion {:>2} PASS ({:>7.2?}) {} — {}",
                    c.id, elapsed, c.name, detail
                );
            }
            (Ok(_), true) => {
                println!(
                    "criterion {:>2} FAIL ({:>7.2?}) {} — exceeded runtime limit {:?}",
                    c.id, elapsed, c.name, c.limit
                );
                failures.push(c.id);
            }
            (Err(reason), _) => {
                println!(
                    "criterion {:>2} FAIL ({:>7.2?}) {} — {}",
                    c.id, elapsed, c.name, reason
                );
                failures.push(c.id);
            }
        }
    }
    println!(
        "criterion 10 N/A  exact study-table values are not reproducible without the \
         original map and RNG; covered qualitatively by criteria 6-8"
    );
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// --- criterion 1 -----------------------------------------------------------

/// Test-local merge sort, independent of the library's sorting path.
fn merge_sorted(values: &[f64]) -> Vec<f64> {
    if values.len() <= 1 {
        return values.to_vec();
    }
    let mid = values.len() / 2;
    let left = merge_sorted(&values[..mid]);
    let right = merge_sorted(&values[mid..]);
    let mut out = Vec::with_capacity(values.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            out.push(left[i]);
            i += 1;
        } else {
            out.push(right[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&left[i..]);
    out.extend_from_slice(&right[j..]);
    out
}

fn criterion_1_cvar_estimators() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=400);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let alpha: f64 = rng.random_range(0.001..=1.0);
        let sorted = merge_sorted(&values);
        // Smallest k with k >= alpha * n, derived by counting.
        let mut k = 1usize;
        while (k as f64) < alpha * n as f64 && k < n {
            k += 1;
        }
        let var_oracle = sorted[k - 1];
        let cvar_oracle = sorted[..k].iter().sum::<f64>() / k as f64;
        let var = empirical_var(&values, alpha).map_err(err)?;
        let cvar = empirical_cvar(&values, alpha).map_err(err)?;
        worst = worst
            .max((var - var_oracle).abs())
            .max((cvar - cvar_oracle).abs());
        ensure((var - var_oracle).abs() <= 1e-12, || {
            format!("case {case}: VaR {var} vs oracle {var_oracle}")
        })?;
        ensure((cvar - cvar_oracle).abs() <= 1e-12, || {
            format!("case {case}: CVaR {cvar} vs oracle {cvar_oracle}")
        })?;
    }
    Ok(format!("1000 vectors, worst abs error {worst:.2e}"))
}

// --- criterion 2 -----------------------------------------------------------

fn criterion_2_rockafellar() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let step = 0.01;
    let mut worst: f64 = 0.0;
    for pair in 0..50u64 {
        let n_vertices = 4 + (pair % 3) as usize;
        let g = random_instance(n_vertices, 25, 1000 + pair).map_err(err)?;
        // 250 samples keep alpha * n_s integral for the tested alphas.
        let panel = make_noise_panel(&g, 250, 77 + pair).map_err(err)?;
        let beta = [0.0, 0.3, 0.5, 0.8, 1.0][(pair % 5) as usize];
        let m = g.edge_count();
        let size = rng.random_range(1..=m);
        let mut picks: Vec<usize> = (0..m).collect();
        for i in 0..size {
            let j = rng.random_range(i..m);
            picks.swap(i, j);
        }
        let s = EdgeSet::from_edges(picks[..size].iter().copied()).map_err(err)?;
        for alpha in [0.2, 0.5, 1.0] {
            let cfg = RiskConfig::new(alpha, beta).map_err(err)?;
            let f = utility_samples(&s, &panel, &g, &cfg).map_err(err)?;
            let cvar = empirical_cvar(&f, alpha).map_err(err)?;
            let cap = f.iter().copied().fold(0.0, f64::max) + 1.0;
            let (_, h_star) = max_h_over_tau(&s, &panel, &g, &cfg, cap, step).map_err(err)?;
            let tol = 1.5 * step * (1.0 / alpha - 1.0) + 1e-9;
            let diff = (h_star - cvar).abs();
            worst = worst.max(diff - tol);
            ensure(diff <= tol, || {
                format!("pair {pair}, alpha {alpha}: |H* - CVaR| = {diff} > {tol}")
            })?;
        }
    }
    Ok(format!("50 edge sets x 3 alphas, worst slack {worst:.2e}"))
}

// --- criterion 3 -----------------------------------------------------------

fn criterion_3_h_properties() -> Result<String, String> {
    let ground = [0usize, 2, 4, 5, 7, 9];
    let mut pairs = 0usize;
    for seed in 0..20u64 {
        let g = random_instance(5, 25, 2000 + seed).map_err(err)?;
        let panel = make_noise_panel(&g, 100, 31 + seed).map_err(err)?;
        for beta in [0.0, 0.5, 1.0] {
            let cfg = RiskConfig::new(0.4, beta).map_err(err)?;
            for tau in [1.0, 10.0, 50.0] {
                let report = check_submodular_on(&g, &panel, tau, &cfg, &ground).map_err(err)?;
                pairs += report.pairs_checked;
                ensure(
                    report.h_monotonicity_violations == 0 && report.h_submodularity_violations == 0,
                    || {
                        format!(
                            "seed {seed}, beta {beta}, tau {tau}: {:?}",
                            report.first_violation
                        )
                    },
                )?;
                ensure(report.is_clean(), || {
                    format!(
                        "seed {seed}, beta {beta}, tau {tau}: float checks failed: {:?}",
                        report.first_violation
                    )
                })?;
            }
        }
    }
    Ok(format!(
        "20 graphs x 3 betas x 3 taus, {pairs} subset pairs, zero violations"
    ))
}

// --- criterion 4 -----------------------------------------------------------

fn criterion_4_concavity() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let graph_path = dir.path().join("graph.json");
    save_graph(&demo_graph(42), &graph_path).map_err(err)?;
    let out = dir.path().join("hcurve.csv");
    let args = HcurveArgs {
        graph: graph_path,
        tour: None,
        alphas: (1..=10).map(|i| i as f64 / 10.0).collect(),
        flags: SolveFlags {
            alpha: 0.5,
            beta: 0.5,
            gamma_cap: 200.0,
            gamma_step: 1.0,
            samples: 250,
            seed: 42,
        },
        out: out.clone(),
    };
    cmd_hcurve(&args).map_err(err)?;
    let csv = std::fs::read_to_string(&out).map_err(err)?;
    let mut columns: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        columns
            .entry(fields[0].to_string())
            .or_default()
            .push(fields[2].parse().map_err(err)?);
    }
    let mut worst = f64::NEG_INFINITY;
    for (alpha, col) in &columns {
        ensure(col[0] == 0.0, || {
            format!("alpha {alpha}: H(0) = {}", col[0])
        })?;
        for (i, w) in col.windows(3).enumerate() {
            let second = w[2] - 2.0 * w[1] + w[0];
            worst = worst.max(second);
            ensure(second <= 1e-9, || {
                format!("alpha {alpha}, grid {i}: second difference {second}")
            })?;
        }
    }
    Ok(format!(
        "{} columns x 201 grid points, max second difference {worst:.2e}",
        columns.len()
    ))
}

// --- criterion 5 -----------------------------------------------------------

fn criterion_5_realizations() -> Result<String, String> {
    let mut worst_cost: f64 = 0.0;
    for seed in 0..5u64 {
        let g = random_instance(4, 25, 3000 + seed).map_err(err)?;
        let panel = make_noise_panel(&g, 60, 17 + seed).map_err(err)?;
        for beta in [0.0, 0.5, 1.0] {
            let cfg = RiskConfig::new(0.5, beta).map_err(err)?;
            let report = check_submodular_exhaustive(&g, &panel, 10.0, &cfg).map_err(err)?;
            worst_cost = worst_cost.max(report.cost_modularity_max_abs_err);
            ensure(report.realization_monotonicity_violations == 0, || {
                format!(
                    "seed {seed}, beta {beta}: utility not monotone: {:?}",
                    report.first_violation
                )
            })?;
            ensure(report.reward_submodularity_violations == 0, || {
                format!(
                    "seed {seed}, beta {beta}: reward not submodular: {:?}",
                    report.first_violation
                )
            })?;
            ensure(report.cost_modularity_max_abs_err <= 1e-12, || {
                format!(
                    "seed {seed}, beta {beta}: cost additivity error {}",
                    report.cost_modularity_max_abs_err
                )
            })?;
        }
    }
    Ok(format!(
        "5 seeds x 3 betas exhaustive over 6 edges, worst cost additivity error {worst_cost:.2e}"
    ))
}

// --- criterion 6 -----------------------------------------------------------

fn criterion_6_bound() -> Result<String, String> {
    let mut checked = 0usize;
    let mut min_margin = f64::INFINITY;
    for n in [4usize, 5, 6] {
        for seed in 0..20u64 {
            let g = random_instance(n, 30, 4000 + n as u64 * 100 + seed).map_err(err)?;
            let base = SolverConfig {
                alpha: 1.0,
                beta: 0.5,
                gamma_cap: 50.0,
                gamma_step: 1.0,
                samples: 100,
                seed: 7 + seed,
            };
            // One panel per instance: every (alpha, beta) pair shares the
            // same common random numbers, so epsilon = 0 in the bound.
            let panel = make_noise_panel(&g, base.samples, base.seed).map_err(err)?;
            for alpha in [0.3, 0.5, 1.0] {
                for beta in [0.0, 0.5, 1.0] {
                    let cfg = SolverConfig {
                        alpha,
                        beta,
                        ..base
                    };
                    let greedy = raga_solve_with_panel(&g, &cfg, &panel).map_err(err)?;
                    let opt = brute_force_solve_with_panel(&g, &cfg, &panel).map_err(err)?;
                    ensure(opt.h >= greedy.h_max, || {
                        format!("n {n} seed {seed}: optimum below greedy")
                    })?;
                    let tau_k = if opt.tau > 0.0 {
                        opt.tau
                    } else {
                        cfg.gamma_step
                    };
                    let k = curvature(&g, &panel, &cfg.risk(), tau_k).map_err(err)?.k;
                    let check = verify_bound(&greedy, &opt, k, &cfg, 0.0).map_err(err)?;
                    min_margin = min_margin.min(check.margin);
                    ensure(check.holds, || {
                        format!(
                            "n {n} seed {seed} alpha {alpha} beta {beta}: H {} < rhs {} (k = {k})",
                            check.h_greedy, check.rhs
                        )
                    })?;
                    checked += 1;
                }
            }
        }
    }
    ensure(checked == 540, || {
        format!("expected 540 checks, ran {checked}")
    })?;
    Ok(format!("540 bound checks, min margin {min_margin:.4}"))
}

// --- criterion 7 -----------------------------------------------------------

/// Deterministic greedy on weights `C - c(e)`, written independently of the
/// solver internals: repeatedly takes the feasible maximum-weight edge.
fn weight_greedy(g: &StochasticGraph) -> EdgeSet {
    let n = g.vertex_count();
    let mut remaining: Vec<usize> = (0..g.edge_count()).collect();
    let mut state = TourState {
        edges: EdgeSet::new(),
        degrees: vec![0; n],
        h_value: 0.0,
    };
    while state.edges.len() < n && !remaining.is_empty() {
        let pos = (0..remaining.len())
            .max_by(|&a, &b| {
                let wa = g.cost_cap - g.edges[remaining[a]].cost_mean;
                let wb = g.cost_cap - g.edges[remaining[b]].cost_mean;
                wa.total_cmp(&wb).then(remaining[b].cmp(&remaining[a]))
            })
            .unwrap();
        let e = remaining.remove(pos);
        if is_feasible(&state, e, g) {
            let (u, v) = g.edges[e].endpoints;
            state.edges.insert(e).unwrap();
            state.degrees[u] += 1;
            state.degrees[v] += 1;
        }
    }
    state.edges
}

fn criterion_7_risk_neutral() -> Result<String, String> {
    for seed in 0..20u64 {
        let map =
            generate_map(40, 40, 1.0, &random_blobs(4, 40.0, 40.0, seed), seed).map_err(err)?;
        let sites = random_sites(6, 40.0, 40.0, 900 + seed);
        let g = build_graph(&map, &sites, 2.0, 0.0, 0.0, true).map_err(err)?;
        let cfg = SolverConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma_cap: 200.0,
            gamma_step: 1.0,
            samples: 10,
            seed,
        };
        let res = raga_solve(&g, &cfg).map_err(err)?;
        let oracle = weight_greedy(&g);
        ensure(res.tour.sorted() == oracle.sorted(), || {
            format!(
                "seed {seed}: solver tour {:?} != weight-greedy tour {:?}",
                res.tour.sorted(),
                oracle.sorted()
            )
        })?;
    }
    Ok("20 zero-variance instances match the deterministic greedy".into())
}

// --- criterion 8 -----------------------------------------------------------

fn criterion_8_early_exit() -> Result<String, String> {
    let g = demo_graph(42);
    let mut low_times = Vec::new();
    let mut high_times = Vec::new();
    for seed in 0..10u64 {
        let mut iterations = [0usize; 2];
        for (slot, alpha) in [0.1, 0.9].into_iter().enumerate() {
            let cfg = SolverConfig {
                alpha,
                beta: 0.5,
                gamma_cap: 200.0,
                gamma_step: 1.0,
                samples: 250,
                seed,
            };
            let start = Instant::now();
            let res = raga_solve(&g, &cfg).map_err(err)?;
            let dt = start.elapsed().as_secs_f64();
            iterations[slot] = res.iterations_run;
            if slot == 0 {
                low_times.push(dt);
            } else {
                high_times.push(dt);
            }
        }
        ensure(iterations[0] <= iterations[1], || {
            format!(
                "seed {seed}: iterations(alpha 0.1) = {} > iterations(alpha 0.9) = {}",
                iterations[0], iterations[1]
            )
        })?;
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let low = median(&mut low_times);
    let high = median(&mut high_times);
    ensure(low <= high, || {
        format!("median wall-clock: alpha 0.1 took {low:.3}s > alpha 0.9 {high:.3}s")
    })?;
    Ok(format!(
        "10 seeds; median wall-clock {low:.3}s (alpha 0.1) vs {high:.3}s (alpha 0.9)"
    ))
}

// --- criterion 9 -----------------------------------------------------------

fn criterion_9_scale() -> Result<String, String> {
    let start = Instant::now();
    let g8 = demo_graph(42);
    let res8 = raga_solve(&g8, &SolverConfig::default_config(42)).map_err(err)?;
    let t8 = start.elapsed();
    ensure(is_hamiltonian_cycle(&res8.tour, &g8), || {
        "8-site run returned a non-Hamiltonian edge set".into()
    })?;
    ensure(t8 <= Duration::from_secs(60), || {
        format!("8-site configuration took {t8:.2?} (limit 60s)")
    })?;

    let start = Instant::now();
    let g20 = scalability_graph(42);
    let cfg20 = SolverConfig {
        alpha: 0.1,
        beta: 0.8,
        gamma_cap: 200.0,
        gamma_step: 1.0,
        samples: 250,
        seed: 42,
    };
    let res20 = raga_solve(&g20, &cfg20).map_err(err)?;
    let t20 = start.elapsed();
    ensure(is_hamiltonian_cycle(&res20.tour, &g20), || {
        "20-site run returned a non-Hamiltonian edge set".into()
    })?;
    ensure(t20 <= Duration::from_secs(900), || {
        format!("20-site configuration took {t20:.2?} (limit 15min)")
    })?;
    Ok(format!(
        "8 sites in {t8:.2?} (H = {:.2}), 20 sites in {t20:.2?} (H = {:.2})",
        res8.h_max, res20.h_max
    ))
}
