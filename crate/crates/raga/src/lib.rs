//! Risk-aware greedy solver for the stochastic travelling salesperson
//! problem.
//!
//! Edge rewards and costs are random; instead of optimizing the expected
//! utility of a tour, the solver maximizes its Conditional-Value-at-Risk
//! (CVaR) at a user-chosen risk level. CVaR maximization reduces to
//! maximizing an auxiliary function `H(S, tau)` that is monotone submodular
//! in the edge set `S` and concave in the scalar `tau`; the solver sweeps a
//! `tau` grid and greedily assembles a Hamiltonian tour at each grid point,
//! keeping the best pair found.
//!
//! Module map:
//! - [`mod@env`]: information-density maps and segment sensing geometry
//! - [`graph`]: the complete stochastic graph over the sites
//! - [`risk`]: noise panels, the utility `f(S, y)`, VaR/CVaR, `H(S, tau)`
//! - [`solver`]: greedy tour construction and the full tau sweep
//! - [`oracle`]: brute-force enumeration, curvature, bound verification
//! - [`presets`]: bundled instance generators
//! - [`files`]: JSON file formats for maps, graphs, results and reports
//! - [`cli`]: the command-line experiment harness

// Validations are written as `!(x > 0.0)` so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod env;
pub mod error;
pub mod files;
pub mod graph;
pub mod oracle;
pub mod presets;
pub mod risk;
pub mod solver;

pub use error::{Error, Result};
