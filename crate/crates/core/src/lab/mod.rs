//! Monte Carlo verification: tail-bound audits, MISE and posterior
//! concentration estimates, and log-log rate regression.
//!
//! Outer replications run on the rayon pool. Replication `r` always uses
//! stream index `r`, and results are reduced in index order, so estimates do
//! not depend on the thread count.

mod concentration;
mod mise;
mod rates;
mod tail;

use serde::{Deserialize, Serialize};

use crate::numeric::Moments;

pub use concentration::{
    deviation_thresholds, mc_concentration, mc_dimension_escape, mc_posterior_event,
    DeviationThresholds, DistanceEvent, PosteriorKind,
};
pub use mise::{mc_mise, mc_mise_losses, mc_mise_many, EstimatorKind};
pub use rates::{rate_regression, RateFit, RateRegime, RateReport, RateRow};
pub use tail::{audit_tail_bounds, random_tail_suite, AuditRow, TailAudit, TailBoundConfig};

/// A Monte Carlo mean with its standard error `sd / √n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replications: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Summarizes samples in the order given.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let mut m = Moments::default();
        for &x in samples {
            m.push(x);
        }
        Self {
            estimate: m.mean(),
            std_error: m.std_error(),
            replications: m.count(),
            seed,
        }
    }
}

/// Whether a sequence of estimates (ordered by decreasing `ε`) is
/// non-decreasing, allowing each step to fall back by `slack` combined
/// standard errors `√(se_i² + se_{i+1}²)`.
pub fn non_decreasing(estimates: &[MCEstimate], slack: f64) -> bool {
    estimates.windows(2).all(|w| {
        let se = w[0].std_error.hypot(w[1].std_error);
        w[1].estimate >= w[0].estimate - slack * se
    })
}

/// Mirror image of [`non_decreasing`].
pub fn non_increasing(estimates: &[MCEstimate], slack: f64) -> bool {
    estimates.windows(2).all(|w| {
        let se = w[0].std_error.hypot(w[1].std_error);
        w[1].estimate <= w[0].estimate + slack * se
    })
}
