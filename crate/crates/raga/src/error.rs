//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map dimensions must be at least 1x1 with positive cell size (got {width}x{height}, cell_size {cell_size})")]
    InvalidMapDimensions {
        width: usize,
        height: usize,
        cell_size: f64,
    },

    #[error("blob sigma must be positive (got {0})")]
    InvalidSigma(f64),

    #[error("sensing radius must be positive (got {0})")]
    InvalidRadius(f64),

    #[error("point ({x}, {y}) lies outside the map bounds")]
    PointOutsideMap { x: f64, y: f64 },

    #[error("cell ({col}, {row}) is out of bounds for a {width}x{height} map")]
    CellOutOfBounds {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
    },

    #[error("graph construction needs at least 3 sites (got {0})")]
    TooFewSites(usize),

    #[error("sites {0} and {1} coincide")]
    DuplicateSites(usize, usize),

    #[error("variance coefficients must be non-negative (v_r={v_r}, v_c={v_c})")]
    InvalidVarianceCoeff { v_r: f64, v_c: f64 },

    #[error("edge index {0} out of range ({1} edges)")]
    InvalidEdgeIndex(usize, usize),

    #[error("sample index {0} out of range ({1} samples)")]
    InvalidSampleIndex(usize, usize),

    #[error("sample count must be at least 1")]
    InvalidSampleCount,

    #[error("risk level alpha must lie in (0, 1] (got {0})")]
    InvalidAlpha(f64),

    #[error("weighting parameter beta must lie in [0, 1] (got {0})")]
    InvalidBeta(f64),

    #[error("tau must be non-negative and finite (got {0})")]
    InvalidTau(f64),

    #[error("invalid tau grid: cap {cap}, step {step}")]
    InvalidTauGrid { cap: f64, step: f64 },

    #[error("empty value list")]
    EmptyValues,

    #[error("edge {0} is already selected")]
    EdgeAlreadySelected(usize),

    #[error("solver needs at least 3 vertices (got {0})")]
    TooFewVertices(usize),

    #[error("tour enumeration is limited to 3..=9 vertices (got {0})")]
    EnumerationGuard(usize),

    #[error("exhaustive subset checks are limited to {limit} edges (got {edges}); use a pre-selected edge subset")]
    ExhaustiveGuard { edges: usize, limit: usize },

    #[error("curvature is undefined: every singleton has zero normalized value at tau {0}")]
    AllSingletonsInert(f64),

    #[error("results come from different panels (graph/sample-count/seed mismatch)")]
    PanelMismatch,

    #[error("edge set is not a Hamiltonian cycle")]
    NotHamiltonian,

    #[error("malformed {what}: {detail}")]
    MalformedFile { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
