//! Bayesian estimation in the indirect Gaussian sequence space model
//! `Y_j = λ_j θ_j + √ε ξ_j` with sieve and hierarchical priors.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hierarchical;
pub mod io;
pub mod lab;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod rng;
pub mod select;
pub mod serde_ext;

pub use error::{Error, Result};
pub use hierarchical::{
    adaptive_estimate, dimension_posterior, dimension_prior, sample_hierarchical_posterior,
    AdaptiveEstimate, DimensionDistribution, DistributionKind,
};
pub use lab::MCEstimate;
pub use model::{
    class_bias_bound, make_operator, simulate_observation, Decay, Observation, OperatorSequence,
    ParameterSequence, WeightedClass,
};
pub use posterior::{
    coordinate_posterior, sample_sieve_posterior, sieve_posterior_mean, PosteriorSummary,
    PriorRule, PriorSpec, PriorVariance,
};
pub use select::{
    bracket_dimensions, check_assumptions, max_dimension, minimax_dimension, oracle_dimension,
    risk_decomposition, AssumptionReport, BracketMode, CompositeConstants, RiskDecomposition,
    SelectionKind, SelectionResult,
};
