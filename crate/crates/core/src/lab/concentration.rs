use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MCEstimate;
use crate::error::{check_dim, Error, Result};
use crate::hierarchical::{posterior_log_weights, DimensionDistribution, DistributionKind};
use crate::model::{simulate_prefix, OperatorSequence, ParameterSequence};
use crate::posterior::{posterior_prefix, PriorSpec};
use crate::rng::{self, Purpose};
use crate::select::{max_dimension, Brackets, RiskDecomposition, RiskProfile};

/// Which posterior the draws come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorKind {
    /// Sieve posterior of a fixed dimension.
    Sieve(usize),
    /// Hierarchical mixture posterior.
    Hierarchical { c_lambda: f64 },
}

/// An event on the squared distance `‖Θ − θ°‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceEvent {
    /// `lower ≤ ‖Θ − θ°‖² ≤ upper`
    Within { lower: f64, upper: f64 },
    /// `‖Θ − θ°‖² > t`
    Above(f64),
    /// `‖Θ − θ°‖² < t`
    Below(f64),
}

impl DistanceEvent {
    fn contains(self, x: f64) -> bool {
        match self {
            Self::Within { lower, upper } => lower <= x && x <= upper,
            Self::Above(t) => x > t,
            Self::Below(t) => x < t,
        }
    }
}

/// Estimates `E_θ° P_{Θ|Y}(event)` by nested Monte Carlo: `reps`
/// observations, each with `draws` posterior samples. Each replication
/// contributes the fraction of its draws in the event.
#[allow(clippy::too_many_arguments)]
pub fn mc_posterior_event(
    kind: PosteriorKind,
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    event: DistanceEvent,
    reps: usize,
    draws: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if reps == 0 || draws == 0 {
        return Err(Error::InvalidArgument(
            "replications and draws must be positive".into(),
        ));
    }
    let profile = RiskProfile::new(theta0, prior, op, eps)?;
    let span = match kind {
        PosteriorKind::Sieve(m) => {
            check_dim(m, op.len())?;
            m
        }
        PosteriorKind::Hierarchical { c_lambda } => {
            if !(c_lambda.is_finite() && c_lambda >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "C_λ must be a finite value ≥ 1, got {c_lambda}"
                )));
            }
            max_dimension(op, eps)?
        }
    };
    let theta = theta0.values();
    let fractions: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut obs_rng = rng::stream(seed, Purpose::Observation, r as u64);
            let mut draw_rng = rng::stream(seed, Purpose::PosteriorDraws, r as u64);
            let y = simulate_prefix(theta, op.lambda(), eps, span, &mut obs_rng);
            let (var, mean) = posterior_prefix(prior, op, &y, eps, span);
            let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
            let shift: Vec<f64> = mean.iter().zip(theta).map(|(m, t)| m - t).collect();
            let dist = match kind {
                PosteriorKind::Sieve(_) => None,
                PosteriorKind::Hierarchical { c_lambda } => {
                    let lw = posterior_log_weights(&var, &mean, prior.means(), c_lambda, span);
                    Some(
                        DimensionDistribution::from_log_weights(DistributionKind::Posterior, lw)
                            .expect("finite log-weights"),
                    )
                }
            };
            let mut hits = 0usize;
            for _ in 0..draws {
                let m = match &dist {
                    None => span,
                    Some(d) => d.sample(&mut draw_rng),
                };
                let mut sq = profile.bias(m);
                for j in 0..m {
                    let z: f64 = draw_rng.sample(StandardNormal);
                    sq += (shift[j] + sd[j] * z).powi(2);
                }
                if event.contains(sq) {
                    hits += 1;
                }
            }
            hits as f64 / draws as f64
        })
        .collect();
    Ok(MCEstimate::from_samples(&fractions, seed))
}

/// Estimates `E_θ° P_{Θ|Y}(K⁻¹ rate ≤ ‖Θ − θ°‖² ≤ K rate)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_concentration(
    kind: PosteriorKind,
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    k: f64,
    rate: f64,
    reps: usize,
    draws: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if !(k >= 1.0) {
        return Err(Error::InvalidArgument(format!("K must be ≥ 1, got {k}")));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rate must be > 0, got {rate}"
        )));
    }
    let event = DistanceEvent::Within {
        lower: rate / k,
        upper: k * rate,
    };
    mc_posterior_event(kind, theta0, prior, op, eps, event, reps, draws, seed)
}

/// Estimates `E_θ° [P_{M|Y}(M < m⁻) + P_{M|Y}(M > m⁺)]`.
#[allow(clippy::too_many_arguments)]
pub fn mc_dimension_escape(
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    c_lambda: f64,
    brackets: &Brackets,
    reps: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if reps == 0 {
        return Err(Error::InvalidArgument(
            "replications must be positive".into(),
        ));
    }
    if !(c_lambda.is_finite() && c_lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "C_λ must be a finite value ≥ 1, got {c_lambda}"
        )));
    }
    if theta0.len() != op.len() || prior.len() != op.len() {
        return Err(Error::LengthMismatch {
            expected: op.len(),
            found: theta0.len().min(prior.len()),
        });
    }
    let span = max_dimension(op, eps)?;
    let theta = theta0.values();
    let masses: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, Purpose::Observation, r as u64);
            let y = simulate_prefix(theta, op.lambda(), eps, span, &mut rng);
            let (var, mean) = posterior_prefix(prior, op, &y, eps, span);
            let lw = posterior_log_weights(&var, &mean, prior.means(), c_lambda, span);
            DimensionDistribution::from_log_weights(DistributionKind::Posterior, lw)
                .expect("finite log-weights")
                .mass_outside(brackets.lower, brackets.upper)
        })
        .collect();
    Ok(MCEstimate::from_samples(&masses, seed))
}

/// Thresholds of the finite-sample deviation bounds for a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationThresholds {
    /// `b_m + 3Σσ + (3/2) m max σ + 4ρ_m`
    pub upper: f64,
    /// `2 exp(−m/36)`
    pub upper_probability: f64,
    /// `b_m + Σσ − 4c(m max σ + ρ_m)`
    pub lower: f64,
    /// `2 exp(−c² m / 2)`
    pub lower_probability: f64,
}

pub fn deviation_thresholds(risk: &RiskDecomposition, c: f64) -> Result<DeviationThresholds> {
    if !(c > 0.0 && c < 0.2) {
        return Err(Error::InvalidArgument(format!(
            "c must lie in (0, 1/5), got {c}"
        )));
    }
    let m = risk.m as f64;
    let sum = risk.posterior_variance_sum;
    let max = risk.posterior_variance_max;
    let rho = risk.mean_shift;
    Ok(DeviationThresholds {
        upper: risk.bias + 3.0 * sum + 1.5 * m * max + 4.0 * rho,
        upper_probability: 2.0 * (-m / 36.0).exp(),
        lower: risk.bias + sum - 4.0 * c * (m * max + rho),
        lower_probability: 2.0 * (-c * c * m / 2.0).exp(),
    })
}
