//! Bundled instance generators.
//!
//! Everything here is deterministic in the seed, so the quickstart, the
//! benchmarks and the verification runs are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{generate_map, random_blobs, InfoMap, Point2D};
use crate::error::Result;
use crate::graph::{build_graph, StochasticGraph};

/// Default variance coefficients for bundled instances.
pub const DEFAULT_VAR_COEFF: f64 = 0.1;

/// Uniformly random sites with a margin from the border and a minimum
/// pairwise separation.
pub fn random_sites(count: usize, width_m: f64, height_m: f64, seed: u64) -> Vec<Point2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = (width_m.min(height_m) * 0.05).max(1.0);
    let min_sep = (width_m.min(height_m) * 0.04).max(1.0);
    let mut sites: Vec<Point2D> = Vec::with_capacity(count);
    while sites.len() < count {
        let p = Point2D::new(
            rng.random_range(margin..width_m - margin),
            rng.random_range(margin..height_m - margin),
        );
        if sites.iter().all(|s| s.dist(&p) >= min_sep) {
            sites.push(p);
        }
    }
    sites
}

/// 100m x 100m density map with four random blobs.
pub fn demo_map(seed: u64) -> InfoMap {
    generate_map(100, 100, 1.0, &random_blobs(4, 100.0, 100.0, seed), seed)
        .expect("fixed dimensions are valid")
}

/// The bundled 8-site demo instance: 100x100 map, sensing radius 2,
/// normalized rewards and costs.
pub fn demo_graph(seed: u64) -> StochasticGraph {
    let map = demo_map(seed);
    let sites = random_sites(8, 100.0, 100.0, seed.wrapping_add(1));
    build_graph(
        &map,
        &sites,
        2.0,
        DEFAULT_VAR_COEFF,
        DEFAULT_VAR_COEFF,
        true,
    )
    .expect("preset sites are valid")
}

/// The 20-site scalability instance: 500x500 map, sensing radius 1.
pub fn scalability_graph(seed: u64) -> StochasticGraph {
    let map = generate_map(500, 500, 1.0, &random_blobs(6, 500.0, 500.0, seed), seed)
        .expect("fixed dimensions are valid");
    let sites = random_sites(20, 500.0, 500.0, seed.wrapping_add(1));
    build_graph(
        &map,
        &sites,
        1.0,
        DEFAULT_VAR_COEFF,
        DEFAULT_VAR_COEFF,
        true,
    )
    .expect("preset sites are valid")
}

/// Random small instance used by verification runs and benchmarks.
pub fn random_instance(sites: usize, map_cells: usize, seed: u64) -> Result<StochasticGraph> {
    let size = map_cells as f64;
    let map = generate_map(
        map_cells,
        map_cells,
        1.0,
        &random_blobs(4, size, size, seed),
        seed,
    )?;
    let pts = random_sites(sites, size, size, seed.wrapping_add(1));
    build_graph(&map, &pts, 2.0, DEFAULT_VAR_COEFF, DEFAULT_VAR_COEFF, true)
}
