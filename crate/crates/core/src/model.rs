//! Sequences, operator and weight families, and the data-generating model
//! `Y_j = λ_j θ_j + √ε ξ_j`.
//!
//! All sequences are finite truncations of length `N`. Family-tagged
//! parameter sequences carry an analytic bound on their energy beyond `N`
//! so that bias computations never treat truncation as zero bias.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_eps, Error, Result};
use crate::rng::{self, Purpose, StreamRng};

/// Decay rule for a parametric operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// `λ_j² = j^{-2a}`
    Polynomial,
    /// `λ_j² = exp(-j^{2a} + 1)`
    Exponential,
    /// `λ_j = 1`
    Constant,
}

/// How an operator sequence was generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum OperatorTag {
    Parametric { decay: Decay, a: f64 },
    Explicit,
}

/// Operator coefficients `λ_j` together with the cached inverse squares
/// `Λ_j = λ_j⁻²`, their running maxima and running sums.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSequence {
    tag: OperatorTag,
    lambda: Vec<f64>,
    lambda_sq: Vec<f64>,
    big_lambda: Vec<f64>,
    prefix_max: Vec<f64>,
    prefix_sum: Vec<f64>,
}

/// `log Λ_j` for a parametric family, evaluated without forming `λ_j`.
fn log_big_lambda(decay: Decay, a: f64, j: usize) -> f64 {
    let jf = j as f64;
    match decay {
        Decay::Polynomial => 2.0 * a * jf.ln(),
        Decay::Exponential => jf.powf(2.0 * a) - 1.0,
        Decay::Constant => 0.0,
    }
}

fn big_lambda_value(decay: Decay, a: f64, j: usize) -> Result<f64> {
    let value = match decay {
        // powf keeps integer powers exact, which the submultiplicativity
        // check relies on.
        Decay::Polynomial => (j as f64).powf(2.0 * a),
        Decay::Exponential => log_big_lambda(decay, a, j).exp(),
        Decay::Constant => 1.0,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow { index: j })
    }
}

/// Builds `λ` for `j = 1..=n` from a decay family.
pub fn make_operator(decay: Decay, a: f64, n: usize) -> Result<OperatorSequence> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::Decay(a));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "operator length must be at least 1".into(),
        ));
    }
    let mut big_lambda = Vec::with_capacity(n);
    for j in 1..=n {
        big_lambda.push(big_lambda_value(decay, a, j)?);
    }
    let (lambda, lambda_sq): (Vec<f64>, Vec<f64>) = (1..=n)
        .map(|j| match decay {
            Decay::Polynomial => {
                let jf = j as f64;
                (jf.powf(-a), jf.powf(-2.0 * a))
            }
            Decay::Exponential => {
                let l = log_big_lambda(decay, a, j);
                ((-0.5 * l).exp(), (-l).exp())
            }
            Decay::Constant => (1.0, 1.0),
        })
        .unzip();
    Ok(OperatorSequence::assemble(
        OperatorTag::Parametric { decay, a },
        lambda,
        lambda_sq,
        big_lambda,
    ))
}

impl OperatorSequence {
    /// An operator given by explicit positive values.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "operator length must be at least 1".into(),
            ));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositive {
                    index: i + 1,
                    value: v,
                });
            }
        }
        let lambda_sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let mut big_lambda = Vec::with_capacity(values.len());
        for (i, l2) in lambda_sq.iter().enumerate() {
            let v = 1.0 / l2;
            if !v.is_finite() {
                return Err(Error::Overflow { index: i + 1 });
            }
            big_lambda.push(v);
        }
        Ok(Self::assemble(
            OperatorTag::Explicit,
            values,
            lambda_sq,
            big_lambda,
        ))
    }

    fn assemble(
        tag: OperatorTag,
        lambda: Vec<f64>,
        lambda_sq: Vec<f64>,
        big_lambda: Vec<f64>,
    ) -> Self {
        let mut prefix_max = Vec::with_capacity(big_lambda.len());
        let mut prefix_sum = Vec::with_capacity(big_lambda.len());
        let (mut mx, mut sum) = (0.0f64, 0.0f64);
        for &v in &big_lambda {
            mx = mx.max(v);
            sum += v;
            prefix_max.push(mx);
            prefix_sum.push(sum);
        }
        Self {
            tag,
            lambda,
            lambda_sq,
            big_lambda,
            prefix_max,
            prefix_sum,
        }
    }

    /// Keeps the first `n` coordinates.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        check_dim(n, self.len())?;
        Ok(Self {
            tag: self.tag,
            lambda: self.lambda[..n].to_vec(),
            lambda_sq: self.lambda_sq[..n].to_vec(),
            big_lambda: self.big_lambda[..n].to_vec(),
            prefix_max: self.prefix_max[..n].to_vec(),
            prefix_sum: self.prefix_sum[..n].to_vec(),
        })
    }

    pub fn tag(&self) -> OperatorTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_sq(&self) -> &[f64] {
        &self.lambda_sq
    }

    /// `Λ_j = λ_j⁻²`, 0-based slice.
    pub fn big_lambda(&self) -> &[f64] {
        &self.big_lambda
    }

    /// `Λ_m^max = max_{j≤m} Λ_j` for `1 ≤ m ≤ N`.
    pub fn big_lambda_max(&self, m: usize) -> f64 {
        self.prefix_max[m - 1]
    }

    /// `Σ_{j≤m} Λ_j = m Λ̄_m`.
    pub fn big_lambda_sum(&self, m: usize) -> f64 {
        self.prefix_sum[m - 1]
    }

    /// `Λ̄_m = m⁻¹ Σ_{j≤m} Λ_j`.
    pub fn big_lambda_mean(&self, m: usize) -> f64 {
        self.prefix_sum[m - 1] / m as f64
    }

    /// `Λ_j` for any `j ≥ 1`, extending parametric families past `N`.
    /// Explicit operators return `None` beyond their length.
    pub fn big_lambda_at(&self, j: usize) -> Option<Result<f64>> {
        if j == 0 {
            return None;
        }
        if j <= self.len() {
            return Some(Ok(self.big_lambda[j - 1]));
        }
        match self.tag {
            OperatorTag::Parametric { decay, a } => Some(big_lambda_value(decay, a, j)),
            OperatorTag::Explicit => None,
        }
    }

    /// `Λ_m^max` for any `m ≥ 1`, extending parametric families past `N`.
    pub fn big_lambda_max_at(&self, m: usize) -> Option<Result<f64>> {
        if m <= self.len() {
            return Some(Ok(self.big_lambda_max(m)));
        }
        let mut mx = self.big_lambda_max(self.len());
        for j in self.len() + 1..=m {
            match self.big_lambda_at(j)? {
                Ok(v) => mx = mx.max(v),
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(mx))
    }

    /// `sup_j λ_j` over the truncation.
    pub fn sup_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }
}

/// How a parameter sequence continues beyond its truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ParameterTail {
    /// `θ_j = scale · j^{-decay}` with `decay > 1/2`.
    Polynomial { scale: f64, decay: f64 },
    /// `θ_j = scale · exp(-rate · j)` with `rate > 0`.
    Exponential { scale: f64, rate: f64 },
    /// Zero beyond the stored values.
    Explicit,
}

/// A truncated parameter sequence `θ_1..θ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSequence {
    values: Vec<f64>,
    tail: ParameterTail,
}

impl ParameterSequence {
    pub fn polynomial(scale: f64, decay: f64, n: usize) -> Result<Self> {
        if !(decay > 0.5 && decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "polynomial parameter decay must exceed 1/2 for square summability, got {decay}"
            )));
        }
        if !scale.is_finite() {
            return Err(Error::InvalidArgument("scale must be finite".into()));
        }
        let values = (1..=n).map(|j| scale * (j as f64).powf(-decay)).collect();
        Ok(Self {
            values,
            tail: ParameterTail::Polynomial { scale, decay },
        })
    }

    pub fn exponential(scale: f64, rate: f64, n: usize) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) || !scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "exponential parameter needs a positive finite rate, got {rate}"
            )));
        }
        let values = (1..=n).map(|j| scale * (-rate * j as f64).exp()).collect();
        Ok(Self {
            values,
            tail: ParameterTail::Exponential { scale, rate },
        })
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            values,
            tail: ParameterTail::Explicit,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::explicit(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail(&self) -> ParameterTail {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Upper bound on `Σ_{j>N} θ_j²`.
    ///
    /// Polynomial: `scale² ∫_N^∞ x^{-2q} dx = scale² N^{1-2q} / (2q-1)`.
    /// Exponential: the geometric remainder, which is exact.
    pub fn tail_energy(&self) -> f64 {
        let n = self.values.len() as f64;
        match self.tail {
            ParameterTail::Polynomial { scale, decay } => {
                if self.values.is_empty() {
                    // The integral bound needs N ≥ 1; fall back to ζ(2q) ≤ 1 + 1/(2q-1).
                    return scale * scale * (1.0 + 1.0 / (2.0 * decay - 1.0));
                }
                scale * scale * n.powf(1.0 - 2.0 * decay) / (2.0 * decay - 1.0)
            }
            ParameterTail::Exponential { scale, rate } => {
                let q = (-2.0 * rate).exp();
                scale * scale * (-2.0 * rate * (n + 1.0)).exp() / (1.0 - q)
            }
            ParameterTail::Explicit => 0.0,
        }
    }

    /// Regenerates the same family at a different truncation length.
    /// Explicit sequences are cut or zero-padded.
    pub fn with_len(&self, n: usize) -> Result<Self> {
        match self.tail {
            ParameterTail::Polynomial { scale, decay } => Self::polynomial(scale, decay, n),
            ParameterTail::Exponential { scale, rate } => Self::exponential(scale, rate, n),
            ParameterTail::Explicit => {
                let mut v = self.values.clone();
                v.resize(n, 0.0);
                Ok(Self::explicit(v))
            }
        }
    }
}

/// How a weight sequence was generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum WeightTag {
    /// `w_j = j^{-2p}`
    Polynomial {
        p: f64,
    },
    /// `w_j = exp(-j^{2p} + 1)`
    Exponential {
        p: f64,
    },
    Explicit,
}

/// The ellipsoid `{θ : Σ_j (θ_j − μ_j)² / w_j ≤ r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedClass {
    weights: Vec<f64>,
    radius: f64,
    tag: WeightTag,
}

impl WeightedClass {
    pub fn polynomial(p: f64, radius: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight exponent p must be positive, got {p}"
            )));
        }
        let w = (1..=n).map(|j| (j as f64).powf(-2.0 * p)).collect();
        Self::build(w, radius, WeightTag::Polynomial { p })
    }

    pub fn exponential(p: f64, radius: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight exponent p must be positive, got {p}"
            )));
        }
        let w = (1..=n)
            .map(|j| (-(j as f64).powf(2.0 * p) + 1.0).exp())
            .collect();
        Self::build(w, radius, WeightTag::Exponential { p })
    }

    pub fn explicit(weights: Vec<f64>, radius: f64) -> Result<Self> {
        Self::build(weights, radius, WeightTag::Explicit)
    }

    fn build(weights: Vec<f64>, radius: f64, tag: WeightTag) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("weight sequence is empty".into()));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius must be non-negative, got {radius}"
            )));
        }
        if weights[0] != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "w_1 must equal 1, got {}",
                weights[0]
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) {
                return Err(Error::NonPositive {
                    index: i + 1,
                    value: w,
                });
            }
            if i > 0 && w > weights[i - 1] {
                return Err(Error::InvalidArgument(format!(
                    "weights must be non-increasing (w_{} > w_{})",
                    i + 1,
                    i
                )));
            }
        }
        if weights.len() > 1 && weights[weights.len() - 1] >= 1.0 {
            return Err(Error::InvalidArgument(
                "weights must decrease towards zero; a constant sequence is not a class".into(),
            ));
        }
        Ok(Self {
            weights,
            radius,
            tag,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, m: usize) -> f64 {
        self.weights[m - 1]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn tag(&self) -> WeightTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ_{j≤N} (θ_j − μ_j)² / w_j`.
    pub fn weighted_distance(&self, theta: &[f64], mean: &[f64]) -> Result<f64> {
        if theta.len() != self.len() || mean.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: theta.len().min(mean.len()),
            });
        }
        Ok(theta
            .iter()
            .zip(mean)
            .zip(&self.weights)
            .map(|((t, m), w)| (t - m).powi(2) / w)
            .sum())
    }

    pub fn contains(&self, theta: &[f64], mean: &[f64]) -> Result<bool> {
        Ok(self.weighted_distance(theta, mean)? <= self.radius)
    }
}

/// Uniform bias bound `w_m · r` over the ellipsoid.
pub fn class_bias_bound(class: &WeightedClass, m: usize) -> Result<f64> {
    check_dim(m, class.len())?;
    Ok(class.weight(m) * class.radius())
}

/// One realisation of the sequence space model.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub eps: f64,
    pub seed: u64,
}

impl Observation {
    pub fn new(y: Vec<f64>, eps: f64, seed: u64) -> Result<Self> {
        check_eps(eps)?;
        if y.is_empty() {
            return Err(Error::InvalidArgument("observation must have N ≥ 1".into()));
        }
        Ok(Self { y, eps, seed })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws `Y_j = λ_j θ_j + √ε ξ_j` for all coordinates from replication
/// stream 0 of `seed`.
pub fn simulate_observation(
    theta0: &ParameterSequence,
    op: &OperatorSequence,
    eps: f64,
    seed: u64,
) -> Result<Observation> {
    check_eps(eps)?;
    if theta0.len() != op.len() {
        return Err(Error::LengthMismatch {
            expected: op.len(),
            found: theta0.len(),
        });
    }
    let mut rng = rng::stream(seed, Purpose::Observation, 0);
    let y = simulate_prefix(theta0.values(), op.lambda(), eps, op.len(), &mut rng);
    Observation::new(y, eps, seed)
}

/// The first `len` coordinates of an observation. Coordinates are drawn in
/// order, so a prefix equals the start of a longer draw from the same stream.
pub(crate) fn simulate_prefix(
    theta: &[f64],
    lambda: &[f64],
    eps: f64,
    len: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let sd = eps.sqrt();
    theta[..len]
        .iter()
        .zip(&lambda[..len])
        .map(|(t, l)| {
            let xi: f64 = rng.sample(StandardNormal);
            l * t + sd * xi
        })
        .collect()
}
