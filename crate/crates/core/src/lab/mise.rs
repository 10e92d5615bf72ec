use rayon::prelude::*;

use super::MCEstimate;
use crate::error::{Error, Result};
use crate::hierarchical::{posterior_log_weights, shrink};
use crate::model::{simulate_prefix, OperatorSequence, ParameterSequence, WeightedClass};
use crate::numeric::softmax;
use crate::posterior::{posterior_prefix, PriorSpec};
use crate::rng::{self, Purpose};
use crate::select::{max_dimension, minimax_dimension, RiskProfile};

/// Which Bayes estimator to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorKind {
    /// Sieve posterior mean of a fixed dimension.
    Fixed(usize),
    /// Sieve posterior mean at the oracle dimension `m*_ε`.
    Oracle,
    /// Sieve posterior mean at the minimax dimension `m°_ε` of the class.
    Minimax(WeightedClass),
    /// Hierarchical posterior mean.
    Adaptive { c_lambda: f64 },
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            Self::Fixed(m) => format!("fixed_{m}"),
            Self::Oracle => "oracle".into(),
            Self::Minimax(_) => "minimax".into(),
            Self::Adaptive { .. } => "adaptive".into(),
        }
    }
}

enum Resolved {
    Sieve(usize),
    Adaptive { c_lambda: f64, max_dim: usize },
}

impl Resolved {
    fn span(&self) -> usize {
        match *self {
            Self::Sieve(m) => m,
            Self::Adaptive { max_dim, .. } => max_dim,
        }
    }
}

fn resolve(
    kinds: &[EstimatorKind],
    profile: &RiskProfile,
    op: &OperatorSequence,
    eps: f64,
) -> Result<Vec<Resolved>> {
    kinds
        .iter()
        .map(|k| match k {
            EstimatorKind::Fixed(m) => {
                crate::error::check_dim(*m, op.len())?;
                Ok(Resolved::Sieve(*m))
            }
            EstimatorKind::Oracle => Ok(Resolved::Sieve(profile.oracle().dimension)),
            EstimatorKind::Minimax(class) => Ok(Resolved::Sieve(
                minimax_dimension(class, op, eps)?.dimension,
            )),
            EstimatorKind::Adaptive { c_lambda } => {
                if !(c_lambda.is_finite() && *c_lambda >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "C_λ must be a finite value ≥ 1, got {c_lambda}"
                    )));
                }
                let max_dim = max_dimension(op, eps)?;
                let m_star = profile.oracle().dimension;
                if m_star > max_dim {
                    return Err(Error::Infeasible(format!(
                        "oracle dimension {m_star} exceeds M_ε = {max_dim} at ε = {eps}"
                    )));
                }
                Ok(Resolved::Adaptive {
                    c_lambda: *c_lambda,
                    max_dim,
                })
            }
        })
        .collect()
}

/// Squared losses `‖θ̂ − θ°‖²` per estimator (outer) and replication
/// (inner). All estimators share each replication's observation.
///
/// Only the first `K` coordinates are simulated, where `K` is the largest
/// dimension any estimator looks at; beyond `K` every estimator equals the
/// prior mean, so the loss there is the deterministic bias `b_K` (including
/// the analytic tail beyond the truncation).
pub fn mc_mise_losses(
    kinds: &[EstimatorKind],
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if reps < 50 {
        return Err(Error::InvalidArgument(format!(
            "MISE estimation needs at least 50 replications, got {reps}"
        )));
    }
    let profile = RiskProfile::new(theta0, prior, op, eps)?;
    let plan = resolve(kinds, &profile, op, eps)?;
    let span = plan.iter().map(Resolved::span).max().unwrap_or(1);
    let theta = theta0.values();
    let means = prior.means();
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, Purpose::Observation, r as u64);
            let y = simulate_prefix(theta, op.lambda(), eps, span, &mut rng);
            let (var, mean) = posterior_prefix(prior, op, &y, eps, span);
            // Prefix sums of squared errors of the posterior means.
            let mut sq = Vec::with_capacity(span + 1);
            sq.push(0.0);
            let mut acc = 0.0;
            for j in 0..span {
                acc += (mean[j] - theta[j]).powi(2);
                sq.push(acc);
            }
            plan.iter()
                .map(|p| match *p {
                    Resolved::Sieve(m) => sq[m] + profile.bias(m),
                    Resolved::Adaptive { c_lambda, max_dim } => {
                        let lw = posterior_log_weights(&var, &mean, means, c_lambda, max_dim);
                        let probs = softmax(&lw);
                        let (est, _) = shrink(&mean[..max_dim], &means[..max_dim], &probs);
                        est.iter()
                            .zip(theta)
                            .map(|(e, t)| (e - t).powi(2))
                            .sum::<f64>()
                            + profile.bias(max_dim)
                    }
                })
                .collect()
        })
        .collect();
    Ok((0..plan.len())
        .map(|k| per_rep.iter().map(|row| row[k]).collect())
        .collect())
}

/// MISE estimates for several estimators on paired observations.
pub fn mc_mise_many(
    kinds: &[EstimatorKind],
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    Ok(mc_mise_losses(kinds, theta0, prior, op, eps, reps, seed)?
        .iter()
        .map(|l| MCEstimate::from_samples(l, seed))
        .collect())
}

/// Estimates `E_θ° ‖θ̂ − θ°‖²` over `reps` fresh observations.
pub fn mc_mise(
    kind: &EstimatorKind,
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<MCEstimate> {
    Ok(mc_mise_many(
        std::slice::from_ref(kind),
        theta0,
        prior,
        op,
        eps,
        reps,
        seed,
    )?[0])
}
