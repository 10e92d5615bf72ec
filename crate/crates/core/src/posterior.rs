//! Conjugate per-coordinate posterior calculus and the fixed-dimension sieve
//! posterior.
//!
//! Given `θ_j ~ N(μ_j, ς_j)` and `Y_j = λ_j θ_j + √ε ξ_j` the posterior is
//! `N(θ_j^Y, σ_j)` with
//!
//! ```text
//! σ_j   = (λ_j² ε⁻¹ + ς_j⁻¹)⁻¹
//! θ_j^Y = σ_j (ς_j⁻¹ μ_j + λ_j ε⁻¹ Y_j)
//! ```
//!
//! The improper prior (`μ_j = 0`, `ς_j = ∞`) is its own variant with
//! `σ_j = ε Λ_j` and `θ_j^Y = Y_j / λ_j`; it is never approximated by a
//! large variance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_eps, Error, Result};
use crate::model::{Observation, OperatorSequence, ParameterSequence};
use crate::rng::{self, Purpose, StreamRng};

/// Prior variance of a single coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorVariance {
    Proper(f64),
    Improper,
}

impl PriorVariance {
    /// `ς_j / σ_j = 1 + ς_j λ_j² ε⁻¹`; `None` when improper.
    pub fn variance_ratio(self, lambda_sq: f64, eps: f64) -> Option<f64> {
        match self {
            PriorVariance::Proper(v) => Some(1.0 + v * lambda_sq / eps),
            PriorVariance::Improper => None,
        }
    }

    /// `σ_j / ς_j = (1 + ς_j λ_j² ε⁻¹)⁻¹`, which is zero for an improper
    /// coordinate.
    pub fn shrink_ratio(self, lambda_sq: f64, eps: f64) -> f64 {
        match self.variance_ratio(lambda_sq, eps) {
            Some(r) => 1.0 / r,
            None => 0.0,
        }
    }
}

/// Sieve prior means and variances, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    means: Vec<f64>,
    variances: Vec<PriorVariance>,
}

impl PriorSpec {
    pub fn new(means: Vec<f64>, variances: Vec<PriorVariance>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::LengthMismatch {
                expected: means.len(),
                found: variances.len(),
            });
        }
        for (i, (m, v)) in means.iter().zip(&variances).enumerate() {
            if !m.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "prior mean {} is not finite",
                    i + 1
                )));
            }
            match *v {
                PriorVariance::Proper(s) if !(s > 0.0 && s.is_finite()) => {
                    return Err(Error::NonPositive {
                        index: i + 1,
                        value: s,
                    });
                }
                PriorVariance::Improper if *m != 0.0 => {
                    return Err(Error::InvalidArgument(format!(
                        "improper coordinate {} must have zero prior mean",
                        i + 1
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { means, variances })
    }

    /// `μ ≡ 0`, `ς ≡ ∞`.
    pub fn improper(n: usize) -> Self {
        Self {
            means: vec![0.0; n],
            variances: vec![PriorVariance::Improper; n],
        }
    }

    pub fn constant(mean: f64, variance: f64, n: usize) -> Result<Self> {
        Self::new(vec![mean; n], vec![PriorVariance::Proper(variance); n])
    }

    /// Smallest variances meeting `ς_j ≥ d · max(√(εΛ_j), εΛ_j)`.
    pub fn variance_floor(
        means: Vec<f64>,
        op: &OperatorSequence,
        eps: f64,
        d: f64,
    ) -> Result<Self> {
        check_eps(eps)?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "floor constant d must be positive, got {d}"
            )));
        }
        let variances = op
            .big_lambda()
            .iter()
            .map(|bl| {
                let x = eps * bl;
                PriorVariance::Proper(d * x.sqrt().max(x))
            })
            .collect();
        Self::new(means, variances)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[PriorVariance] {
        &self.variances
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// First improper coordinate among `1..=m`, if any.
    pub fn first_improper(&self, m: usize) -> Option<usize> {
        self.variances[..m.min(self.len())]
            .iter()
            .position(|v| matches!(v, PriorVariance::Improper))
            .map(|i| i + 1)
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        check_dim(n, self.len())?;
        Ok(Self {
            means: self.means[..n].to_vec(),
            variances: self.variances[..n].to_vec(),
        })
    }
}

/// Prior means as a function of the truncation length.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanRule {
    Constant(f64),
    Explicit(Vec<f64>),
}

/// Prior variances as a function of the operator and noise level.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceRule {
    Improper,
    Constant(f64),
    /// `ς_j = d · max(√(εΛ_j), εΛ_j)`
    Floor {
        d: f64,
    },
    Explicit(Vec<PriorVariance>),
}

/// A prior that may depend on `ε` and `N`; materialised per experiment
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorRule {
    pub mean: MeanRule,
    pub variance: VarianceRule,
}

impl PriorRule {
    pub fn improper() -> Self {
        Self {
            mean: MeanRule::Constant(0.0),
            variance: VarianceRule::Improper,
        }
    }

    pub fn fixed(spec: &PriorSpec) -> Self {
        Self {
            mean: MeanRule::Explicit(spec.means.clone()),
            variance: VarianceRule::Explicit(spec.variances.clone()),
        }
    }

    pub fn is_improper(&self) -> bool {
        matches!(self.variance, VarianceRule::Improper)
    }

    pub fn materialize(&self, op: &OperatorSequence, eps: f64) -> Result<PriorSpec> {
        let n = op.len();
        let explicit_len = |len: usize| {
            if len < n {
                Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                })
            } else {
                Ok(())
            }
        };
        let means = match &self.mean {
            MeanRule::Constant(c) => vec![*c; n],
            MeanRule::Explicit(v) => {
                explicit_len(v.len())?;
                v[..n].to_vec()
            }
        };
        match &self.variance {
            VarianceRule::Improper => PriorSpec::new(means, vec![PriorVariance::Improper; n]),
            VarianceRule::Constant(v) => PriorSpec::new(means, vec![PriorVariance::Proper(*v); n]),
            VarianceRule::Floor { d } => PriorSpec::variance_floor(means, op, eps, *d),
            VarianceRule::Explicit(v) => {
                explicit_len(v.len())?;
                PriorSpec::new(means, v[..n].to_vec())
            }
        }
    }
}

/// Per-coordinate posterior variances `σ_j` and means `θ_j^Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    post_var: Vec<f64>,
    post_mean: Vec<f64>,
}

impl PosteriorSummary {
    pub fn new(post_var: Vec<f64>, post_mean: Vec<f64>) -> Result<Self> {
        if post_var.len() != post_mean.len() {
            return Err(Error::LengthMismatch {
                expected: post_var.len(),
                found: post_mean.len(),
            });
        }
        if let Some(i) = post_var.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::NonPositive {
                index: i + 1,
                value: post_var[i],
            });
        }
        Ok(Self {
            post_var,
            post_mean,
        })
    }

    pub fn post_var(&self) -> &[f64] {
        &self.post_var
    }

    pub fn post_mean(&self) -> &[f64] {
        &self.post_mean
    }

    pub fn len(&self) -> usize {
        self.post_var.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post_var.is_empty()
    }
}

fn check_lengths(prior: &PriorSpec, op: &OperatorSequence, n: usize) -> Result<()> {
    for found in [prior.len(), op.len()] {
        if found != n {
            return Err(Error::LengthMismatch { expected: n, found });
        }
    }
    Ok(())
}

/// Closed-form posterior of every coordinate.
pub fn coordinate_posterior(
    prior: &PriorSpec,
    op: &OperatorSequence,
    obs: &Observation,
) -> Result<PosteriorSummary> {
    check_eps(obs.eps)?;
    check_lengths(prior, op, obs.len())?;
    let (post_var, post_mean) = posterior_prefix(prior, op, &obs.y, obs.eps, obs.len());
    Ok(PosteriorSummary {
        post_var,
        post_mean,
    })
}

/// Posterior of the first `len` coordinates; lengths are the caller's
/// responsibility.
pub(crate) fn posterior_prefix(
    prior: &PriorSpec,
    op: &OperatorSequence,
    y: &[f64],
    eps: f64,
    len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut post_var = Vec::with_capacity(len);
    let mut post_mean = Vec::with_capacity(len);
    #[allow(clippy::needless_range_loop)]
    for j in 0..len {
        let (lam, lam_sq, big) = (op.lambda()[j], op.lambda_sq()[j], op.big_lambda()[j]);
        let projected = y[j] / lam;
        match prior.variances[j] {
            PriorVariance::Improper => {
                post_var.push(eps * big);
                post_mean.push(projected);
            }
            PriorVariance::Proper(v) => {
                // r = ς λ² / ε; σ = ς / (1 + r), θ^Y = (μ + r Y/λ) / (1 + r)
                let r = v * lam_sq / eps;
                post_var.push(v / (1.0 + r));
                post_mean.push((prior.means[j] + r * projected) / (1.0 + r));
            }
        }
    }
    (post_var, post_mean)
}

/// Posterior mean under the sieve prior of dimension `m`: `θ_j^Y` for
/// `j ≤ m` and `μ_j` beyond.
pub fn sieve_posterior_mean(
    m: usize,
    summary: &PosteriorSummary,
    prior: &PriorSpec,
) -> Result<ParameterSequence> {
    check_dim(m, summary.len())?;
    if prior.len() != summary.len() {
        return Err(Error::LengthMismatch {
            expected: summary.len(),
            found: prior.len(),
        });
    }
    let mut values = prior.means.clone();
    values[..m].copy_from_slice(&summary.post_mean[..m]);
    Ok(ParameterSequence::explicit(values))
}

/// Independent draws from the sieve posterior of dimension `m`. All draws
/// come from one stream of `seed`.
pub fn sample_sieve_posterior(
    m: usize,
    summary: &PosteriorSummary,
    prior: &PriorSpec,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<ParameterSequence>> {
    check_dim(m, summary.len())?;
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
    }
    if prior.len() != summary.len() {
        return Err(Error::LengthMismatch {
            expected: summary.len(),
            found: prior.len(),
        });
    }
    let mut rng = rng::stream(seed, Purpose::PosteriorDraws, 0);
    Ok((0..n_draws)
        .map(|_| {
            let mut values = prior.means.clone();
            draw_sieve_head(m, summary, &mut rng, &mut values[..m]);
            ParameterSequence::explicit(values)
        })
        .collect())
}

/// Fills `out[..m]` with one draw of coordinates `1..=m`.
pub(crate) fn draw_sieve_head(
    m: usize,
    summary: &PosteriorSummary,
    rng: &mut StreamRng,
    out: &mut [f64],
) {
    let moments = summary.post_mean.iter().zip(&summary.post_var);
    for (slot, (mean, var)) in out[..m].iter_mut().zip(moments) {
        let z: f64 = rng.sample(StandardNormal);
        *slot = mean + var.sqrt() * z;
    }
}
