//! Prior and posterior on the random threshold `M`, the adaptive Bayes
//! estimator and draws from the hierarchical mixture posterior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_eps, Error, Result};
use crate::model::{OperatorSequence, ParameterSequence};
use crate::numeric::{log_sum_exp, softmax};
use crate::posterior::{draw_sieve_head, PosteriorSummary, PriorSpec};
use crate::rng::{self, Purpose, StreamRng};
use crate::select::max_dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Prior,
    Posterior,
}

/// A distribution on `{1, …, M_ε}` kept in log-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionDistribution {
    kind: DistributionKind,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
}

impl DimensionDistribution {
    /// Normalizes unnormalized log-weights `ℓ_1, …, ℓ_M`.
    pub fn from_log_weights(kind: DistributionKind, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::InvalidArgument("empty dimension support".into()));
        }
        if log_weights
            .iter()
            .any(|l| l.is_nan() || *l == f64::INFINITY)
        {
            return Err(Error::InvalidArgument("log-weights must be < +inf".into()));
        }
        if !log_sum_exp(&log_weights).is_finite() {
            return Err(Error::InvalidArgument("all log-weights are -inf".into()));
        }
        let probs = softmax(&log_weights);
        Ok(Self {
            kind,
            log_weights,
            probs,
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest supported dimension `M_ε`.
    pub fn support_max(&self) -> usize {
        self.probs.len()
    }

    /// `P(M = m)` for `m ≥ 1`, zero outside the support.
    pub fn prob(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.probs.get(m - 1).copied().unwrap_or(0.0)
        }
    }

    /// `ω_j = P(j ≤ M)` for `j = 1..=M_ε`.
    pub fn tail_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.probs.len()];
        let mut acc = 0.0;
        for (o, p) in out.iter_mut().zip(&self.probs).rev() {
            acc += p;
            *o = acc;
        }
        out
    }

    /// `P(M < lower) + P(M > upper)`.
    pub fn mass_outside(&self, lower: usize, upper: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 < lower || i + 1 > upper)
            .map(|(_, p)| p)
            .sum()
    }

    /// Inverse-CDF draw in increasing `m` order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        // Rounding can leave the total just below 1; fall back to the last
        // dimension carrying mass.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) + 1
    }
}

fn check_summary(
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    op: &OperatorSequence,
) -> Result<()> {
    for found in [summary.len(), prior.len()] {
        if found != op.len() {
            return Err(Error::LengthMismatch {
                expected: op.len(),
                found,
            });
        }
    }
    Ok(())
}

fn check_c(c_lambda: f64) -> Result<()> {
    if c_lambda.is_finite() && c_lambda >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "C_λ must be a finite value ≥ 1, got {c_lambda}"
        )))
    }
}

/// Prior on `M`: `ℓ_m = −(3/2) C_λ m + ½ Σ_{j≤m} log(1 + ς_j λ_j² / ε)`.
/// Undefined for an improper prior.
pub fn dimension_prior(
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    c_lambda: f64,
) -> Result<DimensionDistribution> {
    check_eps(eps)?;
    check_c(c_lambda)?;
    if prior.len() != op.len() {
        return Err(Error::LengthMismatch {
            expected: op.len(),
            found: prior.len(),
        });
    }
    let max_dim = max_dimension(op, eps)?;
    if let Some(index) = prior.first_improper(max_dim) {
        return Err(Error::ImproperPrior { index });
    }
    let mut acc = 0.0;
    let log_weights = (0..max_dim)
        .map(|j| {
            let v = match prior.variances()[j] {
                crate::posterior::PriorVariance::Proper(v) => v,
                crate::posterior::PriorVariance::Improper => unreachable!(),
            };
            acc += 0.5 * (v * op.lambda_sq()[j] / eps).ln_1p();
            acc - 1.5 * c_lambda * (j + 1) as f64
        })
        .collect();
    DimensionDistribution::from_log_weights(DistributionKind::Prior, log_weights)
}

/// Log-weights `ℓ_m = ½ Σ_{j≤m} (θ_j^Y − μ_j)²/σ_j − (3/2) C_λ m` for
/// `m = 1..=max_dim`.
pub(crate) fn posterior_log_weights(
    post_var: &[f64],
    post_mean: &[f64],
    means: &[f64],
    c_lambda: f64,
    max_dim: usize,
) -> Vec<f64> {
    let mut acc = 0.0;
    (0..max_dim)
        .map(|j| {
            acc += 0.5 * (post_mean[j] - means[j]).powi(2) / post_var[j];
            acc - 1.5 * c_lambda * (j + 1) as f64
        })
        .collect()
}

/// Posterior on `M` given the data.
pub fn dimension_posterior(
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    c_lambda: f64,
) -> Result<DimensionDistribution> {
    check_eps(eps)?;
    check_c(c_lambda)?;
    check_summary(summary, prior, op)?;
    let max_dim = max_dimension(op, eps)?;
    let lw = posterior_log_weights(
        summary.post_var(),
        summary.post_mean(),
        prior.means(),
        c_lambda,
        max_dim,
    );
    DimensionDistribution::from_log_weights(DistributionKind::Posterior, lw)
}

/// The posterior mean under the hierarchical prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEstimate {
    values: Vec<f64>,
    omega: Vec<f64>,
}

impl AdaptiveEstimate {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Shrinkage weights `ω_j` for `j ≤ M_ε`.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn to_sequence(&self) -> ParameterSequence {
        ParameterSequence::explicit(self.values.clone())
    }
}

/// `θ̂_j = μ_j ω_j^c + θ_j^Y ω_j` for `j ≤ M_ε`, `μ_j` beyond. The
/// complement `ω_j^c = Σ_{m<j} p_m` is summed directly rather than formed as
/// `1 − ω_j`, which keeps it accurate when `ω_j` is close to one.
pub(crate) fn shrink(post_mean: &[f64], means: &[f64], probs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = probs.len();
    let mut omega = vec![0.0; k];
    let mut acc = 0.0;
    for j in (0..k).rev() {
        acc += probs[j];
        omega[j] = acc;
    }
    let mut values = means.to_vec();
    let mut head = 0.0;
    for j in 0..k {
        values[j] = means[j] * head + post_mean[j] * omega[j];
        head += probs[j];
    }
    (values, omega)
}

/// The adaptive Bayes estimator `Σ_m p_{M|Y}(m) θ̂^m`.
pub fn adaptive_estimate(
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    c_lambda: f64,
) -> Result<AdaptiveEstimate> {
    let dist = dimension_posterior(summary, prior, op, eps, c_lambda)?;
    Ok(estimate_from_distribution(summary, prior, &dist))
}

/// The mixture mean for a given distribution of `M`.
pub fn estimate_from_distribution(
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    dist: &DimensionDistribution,
) -> AdaptiveEstimate {
    let (values, omega) = shrink(summary.post_mean(), prior.means(), dist.probs());
    AdaptiveEstimate { values, omega }
}

/// One draw from the hierarchical posterior together with its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalDraw {
    pub dimension: usize,
    pub theta: ParameterSequence,
}

pub(crate) fn draw_hierarchical(
    dist: &DimensionDistribution,
    summary: &PosteriorSummary,
    means: &[f64],
    rng: &mut StreamRng,
    out: &mut [f64],
) -> usize {
    let m = dist.sample(rng);
    out.copy_from_slice(means);
    draw_sieve_head(m, summary, rng, &mut out[..m]);
    m
}

/// Draws `M ~ p_{M|Y}` and then `Θ^M` from the sieve posterior.
pub fn sample_hierarchical_posterior(
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    c_lambda: f64,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<HierarchicalDraw>> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
    }
    let dist = dimension_posterior(summary, prior, op, eps, c_lambda)?;
    let mut rng = rng::stream(seed, Purpose::PosteriorDraws, 0);
    Ok((0..n_draws)
        .map(|_| {
            let mut buf = vec![0.0; prior.len()];
            let m = draw_hierarchical(&dist, summary, prior.means(), &mut rng, &mut buf);
            HierarchicalDraw {
                dimension: m,
                theta: ParameterSequence::explicit(buf),
            }
        })
        .collect())
}
