//! Command-line experiment harness.
//!
//! Subcommands: `gen-map`, `build-graph`, `solve`, `sweep`, `hcurve`,
//! `bench`, `verify`. Exit codes: 0 success, 1 verification-check failure,
//! 2 usage or I/O error. Every command takes `--seed` and regenerates its
//! outputs deterministically (benchmark wall-clock columns excepted).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::env::{generate_map, random_blobs};
use crate::error::{Error, Result};
use crate::files::{
    load_graph, load_map, load_result, save_graph, save_map, save_result, save_verify_reports,
    VerifyReport,
};
use crate::graph::{build_graph, StochasticGraph};
use crate::oracle::{
    brute_force_solve_with_panel, check_submodular_exhaustive, curvature, verify_bound,
    ENUMERATION_LIMIT,
};
use crate::presets;
use crate::risk::{
    empirical_cvar, h_from_samples, make_noise_panel, tau_grid_len, utility_parts_samples, EdgeSet,
    RiskConfig,
};
use crate::solver::{raga_solve, raga_solve_with_panel, tour_vertices, SolverConfig};

#[derive(Parser, Debug)]
#[command(
    name = "raga",
    version,
    about = "Risk-aware greedy solver for the stochastic travelling salesperson problem"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an information-density map
    GenMap(GenMapArgs),
    /// Build the complete stochastic graph over random or given sites
    BuildGraph(BuildGraphArgs),
    /// Run the risk-aware greedy solve on a graph file
    Solve(SolveArgs),
    /// Sweep alpha x beta x seed and tabulate out-of-sample utilities
    Sweep(SweepArgs),
    /// Emit H-vs-tau curves for a tour
    Hcurve(HcurveArgs),
    /// Time solves across instance sizes
    Bench(BenchArgs),
    /// Check the greedy result against brute force on small instances
    Verify(VerifyArgs),
}

/// Shared solver flags.
#[derive(Args, Debug, Clone, Copy)]
pub struct SolveFlags {
    /// Risk level alpha in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Reward/cost weighting beta in [0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Upper bound on the tau grid
    #[arg(long = "gamma-cap", default_value_t = 200.0)]
    pub gamma_cap: f64,
    /// Tau grid step
    #[arg(long = "gamma-step", default_value_t = 1.0)]
    pub gamma_step: f64,
    /// Monte-Carlo samples in the noise panel
    #[arg(long, default_value_t = 250)]
    pub samples: usize,
    /// RNG seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl SolveFlags {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma_cap: self.gamma_cap,
            gamma_step: self.gamma_step,
            samples: self.samples,
            seed: self.seed,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum MapPreset {
    /// 100x100 map, four random blobs
    Demo,
    /// 500x500 map, six random blobs
    Scale,
}

#[derive(Args, Debug)]
pub struct GenMapArgs {
    #[arg(long, default_value_t = 100)]
    pub width: usize,
    #[arg(long, default_value_t = 100)]
    pub height: usize,
    #[arg(long = "cell-size", default_value_t = 1.0)]
    pub cell_size: f64,
    /// Number of random Gaussian blobs
    #[arg(long, default_value_t = 4)]
    pub blobs: usize,
    /// Use a bundled configuration instead of the explicit dimensions
    #[arg(long, value_enum)]
    pub preset: Option<MapPreset>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "map.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildGraphArgs {
    /// Map file written by gen-map
    #[arg(long)]
    pub map: PathBuf,
    /// Number of random sites
    #[arg(long, default_value_t = 8)]
    pub sites: usize,
    /// JSON file with explicit site coordinates [[x, y], ...]
    #[arg(long = "sites-file")]
    pub sites_file: Option<PathBuf>,
    /// Sensing radius in meters
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Reward variance coefficient
    #[arg(long = "v-r", default_value_t = presets::DEFAULT_VAR_COEFF)]
    pub v_r: f64,
    /// Cost variance coefficient
    #[arg(long = "v-c", default_value_t = presets::DEFAULT_VAR_COEFF)]
    pub v_c: f64,
    /// Keep raw reward/cost scales instead of rescaling to a maximum of 10
    #[arg(long = "no-normalize")]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "graph.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Graph file written by build-graph
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub flags: SolveFlags,
    #[arg(long, default_value = "result.json")]
    pub out: PathBuf,
}

/// Cells of an alpha x beta x seed sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Fresh utility samples drawn per cell for the reported distributions.
    pub eval_samples: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() || self.seeds.is_empty() {
            return Err(Error::EmptyValues);
        }
        if self.eval_samples < 1 {
            return Err(Error::InvalidSampleCount);
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated risk levels
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0])]
    pub alphas: Vec<f64>,
    /// Comma-separated weighting parameters
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 1.0])]
    pub betas: Vec<f64>,
    /// Comma-separated seeds; each gets its own panel and evaluation draw
    #[arg(long, value_delimiter = ',', default_values_t = vec![42])]
    pub seeds: Vec<u64>,
    /// Out-of-sample draws per cell
    #[arg(long = "eval-samples", default_value_t = 5000)]
    pub eval_samples: usize,
    #[arg(long = "gamma-cap", default_value_t = 200.0)]
    pub gamma_cap: f64,
    #[arg(long = "gamma-step", default_value_t = 1.0)]
    pub gamma_step: f64,
    #[arg(long, default_value_t = 250)]
    pub samples: usize,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    /// Where to dump the raw per-cell sample vectors; defaults to the table
    /// path with a `_samples.json` suffix
    #[arg(long = "samples-out")]
    pub samples_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HcurveArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Result file whose tour is evaluated; solved on the fly when absent
    #[arg(long)]
    pub tour: Option<PathBuf>,
    /// Comma-separated risk levels, one curve per value
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub flags: SolveFlags,
    #[arg(long, default_value = "hcurve.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated instance sizes (vertex counts)
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 6, 7, 8])]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
    pub alphas: Vec<f64>,
    /// Repetitions per size
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Map side length in cells for the generated instances
    #[arg(long = "map-cells", default_value_t = 60)]
    pub map_cells: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long = "gamma-cap", default_value_t = 200.0)]
    pub gamma_cap: f64,
    #[arg(long = "gamma-step", default_value_t = 1.0)]
    pub gamma_step: f64,
    #[arg(long, default_value_t = 250)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Verify a specific graph file instead of random instances
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Vertex count of randomly generated instances
    #[arg(long, default_value_t = 5)]
    pub random: usize,
    /// Number of random instances
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    /// Map side length in cells for random instances
    #[arg(long = "map-cells", default_value_t = 30)]
    pub map_cells: usize,
    /// Sampling-error allowance in the bound (0 under common random numbers)
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Tau at which curvature is measured; defaults to the brute-force tau
    #[arg(long = "k-tau")]
    pub k_tau: Option<f64>,
    #[command(flatten)]
    pub flags: SolveFlags,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailure,
}

/// Executes a parsed command, mapping outcomes to exit codes.
pub fn run(cli: &Cli) -> u8 {
    match execute(&cli.command) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailure) => 1,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::GenMap(args) => cmd_gen_map(args),
        Command::BuildGraph(args) => cmd_build_graph(args),
        Command::Solve(args) => cmd_solve(args).map(|_| Outcome::Success),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Hcurve(args) => cmd_hcurve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn cmd_gen_map(args: &GenMapArgs) -> Result<Outcome> {
    let map = match args.preset {
        Some(MapPreset::Demo) => presets::demo_map(args.seed),
        Some(MapPreset::Scale) => generate_map(
            500,
            500,
            1.0,
            &random_blobs(6, 500.0, 500.0, args.seed),
            args.seed,
        )?,
        None => {
            let w = args.width as f64 * args.cell_size;
            let h = args.height as f64 * args.cell_size;
            generate_map(
                args.width,
                args.height,
                args.cell_size,
                &random_blobs(args.blobs, w, h, args.seed),
                args.seed,
            )?
        }
    };
    save_map(&map, &args.out)?;
    println!(
        "map {}x{} (cell {} m) -> {}",
        map.width,
        map.height,
        map.cell_size,
        args.out.display()
    );
    Ok(Outcome::Success)
}

pub fn cmd_build_graph(args: &BuildGraphArgs) -> Result<Outcome> {
    let map = load_map(&args.map)?;
    let sites = match &args.sites_file {
        Some(path) => {
            let raw: Vec<(f64, f64)> = serde_json::from_str(&fs::read_to_string(path)?)?;
            raw.iter()
                .map(|&(x, y)| crate::env::Point2D::new(x, y))
                .collect()
        }
        None => presets::random_sites(
            args.sites,
            map.width as f64 * map.cell_size,
            map.height as f64 * map.cell_size,
            args.seed,
        ),
    };
    let graph = build_graph(
        &map,
        &sites,
        args.radius,
        args.v_r,
        args.v_c,
        !args.no_normalize,
    )?;
    save_graph(&graph, &args.out)?;
    println!(
        "graph |V| = {}, |E| = {}, max sensed cells per edge = {}, cost cap = {} -> {}",
        graph.vertex_count(),
        graph.edge_count(),
        graph.stats.max_points_per_edge,
        graph.cost_cap,
        args.out.display()
    );
    Ok(Outcome::Success)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<crate::solver::SolveResult> {
    let graph = load_graph(&args.graph)?;
    let cfg = args.flags.config();
    let result = raga_solve(&graph, &cfg)?;
    save_result(&result, &graph, &args.out)?;
    let cycle = tour_vertices(&result.tour, &graph)?;
    println!(
        "tour {} | tau = {} | H = {:.6} | iterations = {}",
        cycle
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        result.tau,
        result.h_max,
        result.iterations_run
    );
    Ok(result)
}

#[derive(Serialize)]
struct SweepSamples {
    alpha: f64,
    beta: f64,
    seed: u64,
    tour: String,
    f_r: Vec<f64>,
    f_c: Vec<f64>,
    f: Vec<f64>,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    let mut spec = SweepSpec {
        alphas: args.alphas.clone(),
        betas: args.betas.clone(),
        seeds: args.seeds.clone(),
        eval_samples: args.eval_samples,
    };
    spec.validate()?;
    // Rows come out sorted regardless of the flag order.
    spec.alphas.sort_by(f64::total_cmp);
    spec.betas.sort_by(f64::total_cmp);
    spec.seeds.sort_unstable();
    let graph = load_graph(&args.graph)?;
    let samples_path = args.samples_out.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
        args.out.with_file_name(format!("{stem}_samples.json"))
    });

    let mut rows = String::from("alpha,beta,seed,mean_f_r,mean_f_c,mean_f,cvar,tour\n");
    let mut dumps: Vec<SweepSamples> = Vec::new();
    for &alpha in &spec.alphas {
        for &beta in &spec.betas {
            for &seed in &spec.seeds {
                let cfg = SolverConfig {
                    alpha,
                    beta,
                    gamma_cap: args.gamma_cap,
                    gamma_step: args.gamma_step,
                    samples: args.samples,
                    seed,
                };
                let result = raga_solve(&graph, &cfg)?;
                // Out-of-sample distribution of the chosen tour: a fresh
                // panel on an independent seed stream.
                let eval_panel =
                    make_noise_panel(&graph, spec.eval_samples, derive_seed(seed, 0xe7a1))?;
                let (f_r, f_c) = utility_parts_samples(&result.tour, &eval_panel, &graph)?;
                let f: Vec<f64> = f_r
                    .iter()
                    .zip(&f_c)
                    .map(|(&r, &c)| (1.0 - beta) * r + beta * c)
                    .collect();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let tour_id = tour_vertices(&result.tour, &graph)?
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("-");
                writeln!(
                    rows,
                    "{},{},{},{},{},{},{},{}",
                    alpha,
                    beta,
                    seed,
                    mean(&f_r),
                    mean(&f_c),
                    mean(&f),
                    empirical_cvar(&f, alpha)?,
                    tour_id
                )
                .expect("writing to string");
                dumps.push(SweepSamples {
                    alpha,
                    beta,
                    seed,
                    tour: tour_id,
                    f_r,
                    f_c,
                    f,
                });
            }
        }
    }
    fs::write(&args.out, rows)?;
    fs::write(&samples_path, serde_json::to_string(&dumps)?)?;
    println!(
        "sweep {} alphas x {} betas x {} seeds -> {}",
        spec.alphas.len(),
        spec.betas.len(),
        spec.seeds.len(),
        args.out.display()
    );
    Ok(Outcome::Success)
}

pub fn cmd_hcurve(args: &HcurveArgs) -> Result<Outcome> {
    if args.alphas.is_empty() {
        return Err(Error::EmptyValues);
    }
    let graph = load_graph(&args.graph)?;
    let cfg = args.flags.config();
    cfg.validate()?;
    let tour: EdgeSet = match &args.tour {
        Some(path) => load_result(path)?.edge_set(&graph)?,
        None => raga_solve(&graph, &cfg)?.tour,
    };
    let panel = make_noise_panel(&graph, cfg.samples, cfg.seed)?;
    let grid = tau_grid_len(cfg.gamma_cap, cfg.gamma_step)?;
    let mut rows = String::from("alpha,tau,H\n");
    for &alpha in &args.alphas {
        let risk_cfg = RiskConfig::new(alpha, cfg.beta)?;
        let samples = crate::risk::utility_samples(&tour, &panel, &graph, &risk_cfg)?;
        for i in 0..grid {
            let tau = i as f64 * cfg.gamma_step;
            writeln!(
                rows,
                "{},{},{}",
                alpha,
                tau,
                h_from_samples(&samples, tau, alpha)
            )
            .expect("writing to string");
        }
    }
    fs::write(&args.out, rows)?;
    println!(
        "hcurve {} alphas x {} grid points -> {}",
        args.alphas.len(),
        grid,
        args.out.display()
    );
    Ok(Outcome::Success)
}

/// Least-squares slope of ln(y) against ln(x).
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome> {
    if args.sizes.is_empty() || args.alphas.is_empty() || args.reps == 0 {
        return Err(Error::EmptyValues);
    }
    if args.sizes.iter().any(|&n| n < 3) {
        return Err(Error::TooFewVertices(*args.sizes.iter().min().unwrap()));
    }
    let mut rows = String::from("size,alpha,rep,seconds,iterations,H,tour\n");
    let mut timings: Vec<(usize, f64, f64)> = Vec::new();
    for &n in &args.sizes {
        for rep in 0..args.reps {
            let inst_seed = derive_seed(args.seed, (n as u64) << 16 | rep as u64);
            let graph = presets::random_instance(n, args.map_cells, inst_seed)?;
            for &alpha in &args.alphas {
                let cfg = SolverConfig {
                    alpha,
                    beta: args.beta,
                    gamma_cap: args.gamma_cap,
                    gamma_step: args.gamma_step,
                    samples: args.samples,
                    seed: inst_seed,
                };
                let start = Instant::now();
                let result = raga_solve(&graph, &cfg)?;
                let seconds = start.elapsed().as_secs_f64();
                let tour_id = tour_vertices(&result.tour, &graph)?
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("-");
                writeln!(
                    rows,
                    "{},{},{},{},{},{},{}",
                    n, alpha, rep, seconds, result.iterations_run, result.h_max, tour_id
                )
                .expect("writing to string");
                timings.push((n, alpha, seconds));
            }
        }
    }
    fs::write(&args.out, rows)?;
    for &alpha in &args.alphas {
        let points: Vec<(f64, f64)> = args
            .sizes
            .iter()
            .map(|&n| {
                let mut per: Vec<f64> = timings
                    .iter()
                    .filter(|&&(tn, ta, _)| tn == n && ta == alpha)
                    .map(|&(_, _, s)| s)
                    .collect();
                per.sort_by(f64::total_cmp);
                (n as f64, per[per.len() / 2].max(1e-9))
            })
            .collect();
        if points.len() >= 2 {
            println!(
                "alpha = {}: log-log runtime slope = {:.3}",
                alpha,
                loglog_slope(&points)
            );
        }
    }
    println!("bench -> {}", args.out.display());
    Ok(Outcome::Success)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let cfg = args.flags.config();
    cfg.validate()?;
    if !(args.epsilon >= 0.0) {
        return Err(Error::MalformedFile {
            what: "epsilon".into(),
            detail: format!("{}", args.epsilon),
        });
    }
    let instances: Vec<StochasticGraph> = match &args.graph {
        Some(path) => vec![load_graph(path)?],
        None => (0..args.instances)
            .map(|i| {
                presets::random_instance(args.random, args.map_cells, args.flags.seed + i as u64)
            })
            .collect::<Result<_>>()?,
    };
    for g in &instances {
        if g.vertex_count() > ENUMERATION_LIMIT {
            return Err(Error::EnumerationGuard(g.vertex_count()));
        }
    }

    let mut reports = Vec::with_capacity(instances.len());
    let mut all_ok = true;
    for (i, graph) in instances.iter().enumerate() {
        let panel = make_noise_panel(graph, cfg.samples, cfg.seed)?;
        let greedy = raga_solve_with_panel(graph, &cfg, &panel)?;
        let opt = brute_force_solve_with_panel(graph, &cfg, &panel)?;
        let k_tau = args.k_tau.unwrap_or(if opt.tau > 0.0 {
            opt.tau
        } else {
            cfg.gamma_step
        });
        let curv = curvature(graph, &panel, &cfg.risk(), k_tau)?;
        let bound = verify_bound(&greedy, &opt, curv.k, &cfg, args.epsilon)?;
        let submod = check_submodular_exhaustive(graph, &panel, k_tau, &cfg.risk())?;
        let ok = bound.holds && submod.is_clean() && opt.h >= greedy.h_max;
        all_ok &= ok;
        println!(
            "instance {i}: holds = {}, H_greedy = {:.6}, H_opt = {:.6}, k = {:.4}, margin = {:.6}, submodular = {}",
            bound.holds,
            bound.h_greedy,
            bound.h_opt,
            curv.k,
            bound.margin,
            submod.is_clean()
        );
        reports.push(VerifyReport {
            h_greedy: bound.h_greedy,
            h_opt: bound.h_opt,
            k: curv.k,
            rhs: bound.rhs,
            margin: bound.margin,
            holds: bound.holds,
            config: cfg,
            tau_greedy: greedy.tau,
            tau_opt: opt.tau,
            curvature_tau: curv.tau_used,
            inert_edges: curv.inert_edges.clone(),
            submodularity_clean: submod.is_clean(),
            submodularity_violation: submod.first_violation.clone(),
        });
    }
    save_verify_reports(&reports, &args.out)?;
    if all_ok {
        println!(
            "all {} instance(s) verified -> {}",
            reports.len(),
            args.out.display()
        );
        Ok(Outcome::Success)
    } else {
        eprintln!("verification FAILED; details in {}", args.out.display());
        Ok(Outcome::CheckFailure)
    }
}
