//! Information-density environment and sensing geometry.
//!
//! The environment is a 2-D grid of mean information density. A robot
//! traversing the segment between two sites observes every grid cell whose
//! center lies within the sensing radius of that segment; the observed set
//! is what turns an edge traversal into a coverage reward.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Grid cell address: `col` grows with x, `row` with y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub col: usize,
    pub row: usize,
}

impl CellId {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Isotropic Gaussian density bump used by the map generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianBlob {
    pub center: Point2D,
    pub amplitude: f64,
    pub sigma: f64,
}

/// 2-D grid of mean information density, in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMap {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub density: Vec<f64>,
}

impl InfoMap {
    /// Validates dimensions and density values.
    pub fn new(width: usize, height: usize, cell_size: f64, density: Vec<f64>) -> Result<Self> {
        if width < 1 || height < 1 || !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidMapDimensions {
                width,
                height,
                cell_size,
            });
        }
        if density.len() != width * height || density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::MalformedFile {
                what: "density grid".into(),
                detail: format!(
                    "expected {} finite non-negative values, got {}",
                    width * height,
                    density.len()
                ),
            });
        }
        Ok(Self {
            width,
            height,
            cell_size,
            density,
        })
    }

    #[inline]
    pub fn index(&self, cell: CellId) -> usize {
        cell.row * self.width + cell.col
    }

    /// Center of a cell in meters.
    #[inline]
    pub fn cell_center(&self, cell: CellId) -> Point2D {
        Point2D::new(
            (cell.col as f64 + 0.5) * self.cell_size,
            (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        cell.col < self.width && cell.row < self.height
    }

    /// Whether a point lies inside the mapped area.
    pub fn contains_point(&self, p: &Point2D) -> bool {
        p.x.is_finite()
            && p.y.is_finite()
            && p.x >= 0.0
            && p.y >= 0.0
            && p.x <= self.width as f64 * self.cell_size
            && p.y <= self.height as f64 * self.cell_size
    }

    /// Mean reward for observing a cell: the density value stored there.
    pub fn cell_reward_mean(&self, cell: CellId) -> Result<f64> {
        if !self.contains_cell(cell) {
            return Err(Error::CellOutOfBounds {
                col: cell.col,
                row: cell.row,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.density[self.index(cell)])
    }
}

/// Builds a density map as a sum of isotropic Gaussian blobs evaluated at
/// cell centers. Deterministic; `_seed` is reserved for optional jitter,
/// which is currently off.
pub fn generate_map(
    width: usize,
    height: usize,
    cell_size: f64,
    blobs: &[GaussianBlob],
    _seed: u64,
) -> Result<InfoMap> {
    if width < 1 || height < 1 || !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidMapDimensions {
            width,
            height,
            cell_size,
        });
    }
    for blob in blobs {
        if !(blob.sigma > 0.0) || !blob.sigma.is_finite() {
            return Err(Error::InvalidSigma(blob.sigma));
        }
    }
    let mut density = vec![0.0; width * height];
    for row in 0..height {
        for col in 0..width {
            let center = Point2D::new(
                (col as f64 + 0.5) * cell_size,
                (row as f64 + 0.5) * cell_size,
            );
            let mut d = 0.0;
            for blob in blobs {
                let dx = center.x - blob.center.x;
                let dy = center.y - blob.center.y;
                d +=
                    blob.amplitude * (-(dx * dx + dy * dy) / (2.0 * blob.sigma * blob.sigma)).exp();
            }
            density[row * width + col] = d;
        }
    }
    InfoMap::new(width, height, cell_size, density)
}

/// Draws `count` random blobs over a `width_m` x `height_m` area.
///
/// Sigmas are broad enough that the summed density is strictly positive
/// everywhere, so no edge ever senses a region of identically-zero reward.
pub fn random_blobs(count: usize, width_m: f64, height_m: f64, seed: u64) -> Vec<GaussianBlob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = width_m.min(height_m);
    (0..count)
        .map(|_| GaussianBlob {
            center: Point2D::new(
                rng.random_range(0.0..width_m),
                rng.random_range(0.0..height_m),
            ),
            amplitude: rng.random_range(1.0..10.0),
            sigma: rng.random_range(span / 8.0..span / 3.0),
        })
        .collect()
}

/// Distance from point `p` to the closed segment `[a, b]`.
fn dist_point_segment(p: &Point2D, a: &Point2D, b: &Point2D) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0);
    let proj = Point2D::new(a.x + t * abx, a.y + t * aby);
    p.dist(&proj)
}

/// Cells whose centers lie within distance `r` of the closed segment `[a, b]`.
///
/// Scans only the segment's r-inflated bounding box; the result matches
/// [`sensed_cells_exhaustive`] on every input.
pub fn sensed_cells(a: &Point2D, b: &Point2D, r: f64, map: &InfoMap) -> Result<BTreeSet<CellId>> {
    validate_sensing_args(a, b, r, map)?;
    let cs = map.cell_size;
    // Cell centers live at (i + 0.5) * cs; inflate by r plus one cell of slack.
    let lo_x = (a.x.min(b.x) - r) / cs - 1.0;
    let hi_x = (a.x.max(b.x) + r) / cs + 1.0;
    let lo_y = (a.y.min(b.y) - r) / cs - 1.0;
    let hi_y = (a.y.max(b.y) + r) / cs + 1.0;
    let col_lo = lo_x.floor().max(0.0) as usize;
    let col_hi = (hi_x.ceil() as usize).min(map.width.saturating_sub(1));
    let row_lo = lo_y.floor().max(0.0) as usize;
    let row_hi = (hi_y.ceil() as usize).min(map.height.saturating_sub(1));

    let mut cells = BTreeSet::new();
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let cell = CellId::new(col, row);
            if dist_point_segment(&map.cell_center(cell), a, b) <= r {
                cells.insert(cell);
            }
        }
    }
    Ok(cells)
}

/// Reference implementation: scans every cell of the map. Correctness of
/// [`sensed_cells`] is defined by agreement with this scan.
pub fn sensed_cells_exhaustive(
    a: &Point2D,
    b: &Point2D,
    r: f64,
    map: &InfoMap,
) -> Result<BTreeSet<CellId>> {
    validate_sensing_args(a, b, r, map)?;
    let mut cells = BTreeSet::new();
    for row in 0..map.height {
        for col in 0..map.width {
            let cell = CellId::new(col, row);
            if dist_point_segment(&map.cell_center(cell), a, b) <= r {
                cells.insert(cell);
            }
        }
    }
    Ok(cells)
}

fn validate_sensing_args(a: &Point2D, b: &Point2D, r: f64, map: &InfoMap) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidRadius(r));
    }
    for p in [a, b] {
        if !map.contains_point(p) {
            return Err(Error::PointOutsideMap { x: p.x, y: p.y });
        }
    }
    Ok(())
}
