//! Graphical model selection from block-wise non-stationary Gaussian data.
//!
//! The crate covers the whole pipeline:
//!
//! * [`graph_model`]: random sparse graphs and block precision/covariance families with a
//!   controlled covariance spectrum,
//! * [`sampler`]: seeded, schedule-independent Gaussian block sampling,
//! * [`regression`]: the exhaustive penalized neighbourhood-regression estimator,
//! * [`decorrelation`]: a DFT front-end turning a stationary record into approximately
//!   independent frequency blocks,
//! * [`concentration`]: the quadratic-form tail bound and its Monte Carlo validators,
//! * [`experiment`]: declarative Monte Carlo sweeps with CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod decorrelation;
pub mod error;
pub mod experiment;
pub mod graph_model;
pub mod linalg;
pub mod regression;
pub mod rng;
pub mod sampler;
pub mod textio;

pub use error::{Error, Result};
pub use graph_model::{build_block_model, partial_correlation, random_cig, verify_assumptions, BlockModel, Cig, ModelReport};
pub use regression::{
    default_lambda, estimate_graph, estimate_neighborhood, project_complement, residual_statistic,
    rho_condition_holds, sample_size_bound, CombineRule, EstimatorConfig, NeighborhoodEstimate,
};
pub use sampler::{cholesky_factor, sample_factors, sample_process, BlockFactors, SampleBlocks};
