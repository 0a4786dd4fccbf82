//! Property tests for the geometric, statistical and set-function
//! invariants.

use proptest::prelude::*;

use raga::env::{generate_map, random_blobs, sensed_cells, sensed_cells_exhaustive, Point2D};
use raga::graph::build_graph;
use raga::presets::{random_instance, random_sites};
use raga::risk::{
    empirical_cvar, empirical_var, estimate_h, make_noise_panel, max_h_over_tau, utility_samples,
    EdgeSet, RiskConfig,
};
use raga::solver::{is_hamiltonian_cycle, raga_solve, SolverConfig};

fn segment_strategy(extent: f64) -> impl Strategy<Value = (Point2D, Point2D, f64)> {
    (
        0.0..extent,
        0.0..extent,
        0.0..extent,
        0.0..extent,
        0.3..4.0f64,
    )
        .prop_map(|(ax, ay, bx, by, r)| (Point2D::new(ax, ay), Point2D::new(bx, by), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sensing_matches_exhaustive_scan_and_is_symmetric(
        (a, b, r) in segment_strategy(20.0),
        seed in 0u64..1000,
    ) {
        let map = generate_map(20, 20, 1.0, &random_blobs(2, 20.0, 20.0, seed), seed).unwrap();
        let fast = sensed_cells(&a, &b, r, &map).unwrap();
        let scan = sensed_cells_exhaustive(&a, &b, r, &map).unwrap();
        prop_assert_eq!(&fast, &scan);
        let swapped = sensed_cells(&b, &a, r, &map).unwrap();
        prop_assert_eq!(&fast, &swapped);
    }

    #[test]
    fn sensing_is_monotone_in_radius(
        (a, b, r) in segment_strategy(20.0),
        extra in 0.1..3.0f64,
    ) {
        let map = generate_map(20, 20, 1.0, &[], 0).unwrap();
        let small = sensed_cells(&a, &b, r, &map).unwrap();
        let large = sensed_cells(&a, &b, r + extra, &map).unwrap();
        prop_assert!(small.is_subset(&large));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn var_cvar_relations(
        values in prop::collection::vec(-100.0..100.0f64, 1..200),
        alpha in 0.01..=1.0f64,
    ) {
        let var = empirical_var(&values, alpha).unwrap();
        let cvar = empirical_cvar(&values, alpha).unwrap();
        // CVaR averages the tail below VaR.
        prop_assert!(cvar <= var);
        // VaR is one of the observed values.
        prop_assert!(values.contains(&var));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let full = empirical_cvar(&values, 1.0).unwrap();
        prop_assert!((full - mean).abs() <= 1e-9);
        // VaR grows with the quantile level.
        let higher = empirical_var(&values, (alpha + 0.3).min(1.0)).unwrap();
        prop_assert!(var <= higher);
    }
}

fn small_config(seed: u64) -> SolverConfig {
    SolverConfig {
        alpha: 0.4,
        beta: 0.5,
        gamma_cap: 40.0,
        gamma_step: 1.0,
        samples: 60,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h_is_monotone_in_the_edge_set(
        seed in 0u64..500,
        beta in 0.0..=1.0f64,
        tau in 0.0..60.0f64,
    ) {
        let g = random_instance(5, 25, seed).unwrap();
        let panel = make_noise_panel(&g, 40, seed).unwrap();
        let cfg = RiskConfig::new(0.5, beta).unwrap();
        let mut set = EdgeSet::new();
        let mut last = estimate_h(&set, tau, &panel, &g, &cfg).unwrap();
        for e in [0usize, 3, 1, 7, 9, 4] {
            set.insert(e).unwrap();
            let h = estimate_h(&set, tau, &panel, &g, &cfg).unwrap();
            prop_assert!(h >= last, "H fell from {} to {} adding edge {}", last, h, e);
            last = h;
        }
    }

    #[test]
    fn h_has_diminishing_marginal_gains(
        seed in 0u64..500,
        beta in 0.0..=1.0f64,
        tau in 1.0..50.0f64,
    ) {
        let g = random_instance(5, 25, seed).unwrap();
        let panel = make_noise_panel(&g, 40, seed).unwrap();
        let cfg = RiskConfig::new(0.5, beta).unwrap();
        let small = EdgeSet::from_edges([0, 4]).unwrap();
        let large = EdgeSet::from_edges([0, 4, 2, 6, 8]).unwrap();
        let extra = 9usize;
        let h = |s: &EdgeSet| estimate_h(s, tau, &panel, &g, &cfg).unwrap();
        let with = |s: &EdgeSet| {
            let mut t = s.clone();
            t.insert(extra).unwrap();
            h(&t)
        };
        let gain_small = with(&small) - h(&small);
        let gain_large = with(&large) - h(&large);
        // Exactness of the inequality is covered by the fixed-point checker;
        // this float path allows round-off slack.
        prop_assert!(gain_small >= gain_large - 1e-9);
    }

    #[test]
    fn h_is_concave_in_tau(
        seed in 0u64..500,
        alpha_idx in 0usize..3,
    ) {
        let alpha = [0.25, 0.5, 1.0][alpha_idx];
        let g = random_instance(4, 25, seed).unwrap();
        let panel = make_noise_panel(&g, 50, seed).unwrap();
        let cfg = RiskConfig::new(alpha, 0.5).unwrap();
        let s = EdgeSet::from_edges([0, 2, 5]).unwrap();
        let samples = utility_samples(&s, &panel, &g, &cfg).unwrap();
        let h: Vec<f64> = (0..80)
            .map(|i| {
                let tau = i as f64 * 0.5;
                raga::risk::h_from_samples(&samples, tau, alpha)
            })
            .collect();
        for w in h.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-9);
        }
    }

    #[test]
    fn max_h_tracks_empirical_cvar(
        seed in 0u64..500,
        alpha_idx in 0usize..3,
        beta in 0.0..=1.0f64,
    ) {
        // Alphas chosen so alpha * n_s is an integer.
        let alpha = [0.25, 0.5, 1.0][alpha_idx];
        let n_s = 80usize;
        let g = random_instance(4, 25, seed).unwrap();
        let panel = make_noise_panel(&g, n_s, seed).unwrap();
        let cfg = RiskConfig::new(alpha, beta).unwrap();
        let s = EdgeSet::from_edges([1, 3, 4]).unwrap();
        let samples = utility_samples(&s, &panel, &g, &cfg).unwrap();
        let cvar = empirical_cvar(&samples, alpha).unwrap();
        let hi = samples.iter().copied().fold(0.0, f64::max) + 1.0;
        let step = 0.05;
        let (_, h_star) = max_h_over_tau(&s, &panel, &g, &cfg, hi, step).unwrap();
        let tol = step * (1.0 / alpha - 1.0).max(1.0) + 1e-9;
        prop_assert!((h_star - cvar).abs() <= tol, "H* {} vs CVaR {}", h_star, cvar);
    }

    #[test]
    fn solver_returns_hamiltonian_cycles(seed in 0u64..300) {
        let g = random_instance(5, 25, seed).unwrap();
        let res = raga_solve(&g, &small_config(seed)).unwrap();
        prop_assert!(is_hamiltonian_cycle(&res.tour, &g));
        prop_assert!(res.h_max >= 0.0);
    }
}

/// After an early exit at tau_e, re-evaluating every trace tour at every
/// later grid tau never beats the recorded best by more than one grid step
/// of slope.
#[test]
fn early_exit_is_sound() {
    let mut exits = 0;
    for seed in 0..12u64 {
        for alpha in [0.1, 0.2, 0.3] {
            let g = random_instance(5, 25, seed).unwrap();
            let cfg = SolverConfig {
                alpha,
                beta: 0.5,
                gamma_cap: 120.0,
                gamma_step: 1.0,
                samples: 80,
                seed,
            };
            let res = raga_solve(&g, &cfg).unwrap();
            let grid = raga::risk::tau_grid_len(cfg.gamma_cap, cfg.gamma_step).unwrap();
            if res.iterations_run >= grid {
                continue;
            }
            exits += 1;
            let tau_exit = (res.iterations_run - 1) as f64 * cfg.gamma_step;
            assert!(res.trace.last().unwrap().h < 0.0);
            let panel = make_noise_panel(&g, cfg.samples, cfg.seed).unwrap();
            let slack = cfg.gamma_step * (1.0 / alpha - 1.0) + 1e-9;
            for entry in &res.trace {
                let s = EdgeSet::from_edges(
                    entry
                        .edges
                        .iter()
                        .map(|&(u, v)| g.edge_index(u, v).unwrap()),
                )
                .unwrap();
                for i in 0..grid {
                    let tau = i as f64 * cfg.gamma_step;
                    if tau <= tau_exit {
                        continue;
                    }
                    let h = estimate_h(&s, tau, &panel, &g, &cfg.risk()).unwrap();
                    assert!(
                        h <= res.h_max + slack,
                        "seed {seed} alpha {alpha}: H({tau}) = {h} beats H_max = {}",
                        res.h_max
                    );
                }
            }
        }
    }
    assert!(
        exits > 10,
        "the configurations must actually trigger early exits"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn normalization_caps_and_preserves_argmax(seed in 0u64..400) {
        let map = generate_map(30, 30, 1.0, &random_blobs(3, 30.0, 30.0, seed), seed).unwrap();
        let sites = random_sites(5, 30.0, 30.0, seed.wrapping_add(9));
        let raw = build_graph(&map, &sites, 2.0, 0.1, 0.1, false).unwrap();
        let scaled = build_graph(&map, &sites, 2.0, 0.1, 0.1, true).unwrap();
        let max_cost = scaled.edges.iter().map(|e| e.cost_mean).fold(0.0, f64::max);
        prop_assert_eq!(max_cost, 10.0);
        prop_assert!(scaled
            .edges
            .iter()
            .all(|e| e.cost_mean > 0.0 && e.cost_mean <= scaled.cost_cap));
        let max_reward = scaled.edges.iter().map(|e| e.reward_mean).fold(0.0, f64::max);
        prop_assert!((max_reward - 10.0).abs() < 1e-9);
        let argmax = |g: &raga::graph::StochasticGraph| {
            (0..g.edge_count())
                .max_by(|&a, &b| g.edges[a].reward_mean.total_cmp(&g.edges[b].reward_mean))
                .unwrap()
        };
        prop_assert_eq!(argmax(&raw), argmax(&scaled));
        // Cost variance stays non-negative on every edge.
        for e in 0..scaled.edge_count() {
            let (_, cv) = scaled.edge_variances(e).unwrap();
            prop_assert!(cv >= 0.0);
        }
    }
}
