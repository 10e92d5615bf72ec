//! Bias/variance functionals, oracle and minimax dimension selection, the
//! maximal dimension `M_ε`, bracket dimensions and the assumption checker.
//!
//! Every selector is an exhaustive scan returning the smallest minimiser.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_eps, Error, Result};
use crate::model::{OperatorSequence, ParameterSequence, WeightedClass};
use crate::numeric::{floor_inv, smallest_argmin};
use crate::posterior::{PriorRule, PriorSpec, PriorVariance};

/// The five risk functionals at one dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    pub m: usize,
    /// `b_m = Σ_{j>m} (θ_j − μ_j)²`, including the analytic tail beyond `N`.
    pub bias: f64,
    /// `ε m Λ̄_m`
    pub variance_proxy: f64,
    /// `Σ_{j≤m} σ_j`
    pub posterior_variance_sum: f64,
    /// `max_{j≤m} σ_j`
    pub posterior_variance_max: f64,
    /// `ρ_m = Σ_{j≤m} (σ_j/ς_j)² (μ_j − θ_j)²`
    pub mean_shift: f64,
    /// `Φ_ε^m = max(b_m, ε m Λ̄_m)`
    pub rate: f64,
}

/// Posterior variances `σ_j`, which do not depend on the data.
pub fn posterior_variances(prior: &PriorSpec, op: &OperatorSequence, eps: f64) -> Vec<f64> {
    prior
        .variances()
        .iter()
        .zip(op.lambda_sq())
        .zip(op.big_lambda())
        .map(|((v, l2), big)| match *v {
            PriorVariance::Proper(s) => s / (1.0 + s * l2 / eps),
            PriorVariance::Improper => eps * big,
        })
        .collect()
}

fn check_triple(
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
) -> Result<()> {
    for found in [theta0.len(), prior.len()] {
        if found != op.len() {
            return Err(Error::LengthMismatch {
                expected: op.len(),
                found,
            });
        }
    }
    Ok(())
}

/// Bias and variance proxy for every `m = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskProfile {
    eps: f64,
    bias: Vec<f64>,
    variance_proxy: Vec<f64>,
    tail: f64,
}

impl RiskProfile {
    pub fn new(
        theta0: &ParameterSequence,
        prior: &PriorSpec,
        op: &OperatorSequence,
        eps: f64,
    ) -> Result<Self> {
        check_eps(eps)?;
        check_triple(theta0, prior, op)?;
        let n = op.len();
        let tail = theta0.tail_energy();
        // Suffix sums accumulated from the far end keep small tails accurate.
        let mut bias = vec![0.0; n];
        let mut acc = tail;
        for j in (0..n).rev() {
            bias[j] = acc;
            acc += (theta0.values()[j] - prior.means()[j]).powi(2);
        }
        let variance_proxy = (1..=n).map(|m| eps * op.big_lambda_sum(m)).collect();
        Ok(Self {
            eps,
            bias,
            variance_proxy,
            tail,
        })
    }

    pub fn len(&self) -> usize {
        self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn bias(&self, m: usize) -> f64 {
        self.bias[m - 1]
    }

    pub fn variance_proxy(&self, m: usize) -> f64 {
        self.variance_proxy[m - 1]
    }

    pub fn rate(&self, m: usize) -> f64 {
        self.bias(m).max(self.variance_proxy(m))
    }

    /// The analytic bound used for `Σ_{j>N} θ_j²`.
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    pub fn oracle(&self) -> SelectionResult {
        let rates: Vec<f64> = (1..=self.len()).map(|m| self.rate(m)).collect();
        let idx = smallest_argmin(&rates).expect("non-empty profile");
        SelectionResult {
            dimension: idx + 1,
            rate: rates[idx],
            kind: SelectionKind::Oracle,
        }
    }
}

/// `‖θ° − μ‖²` over the truncation plus the analytic tail.
pub fn distance_sq(theta0: &ParameterSequence, prior: &PriorSpec) -> f64 {
    theta0
        .values()
        .iter()
        .zip(prior.means())
        .map(|(t, m)| (t - m).powi(2))
        .sum::<f64>()
        + theta0.tail_energy()
}

/// All five risk functionals at dimension `m`.
pub fn risk_decomposition(
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    m: usize,
) -> Result<RiskDecomposition> {
    check_eps(eps)?;
    check_triple(theta0, prior, op)?;
    check_dim(m, op.len())?;
    let bias = theta0.values()[m..]
        .iter()
        .zip(&prior.means()[m..])
        .rev()
        .fold(theta0.tail_energy(), |acc, (t, mu)| acc + (t - mu).powi(2));
    let sigma = posterior_variances(&prior.truncated(m)?, &op.truncated(m)?, eps);
    let mean_shift = (0..m)
        .map(|j| {
            let ratio = prior.variances()[j].shrink_ratio(op.lambda_sq()[j], eps);
            (ratio * (prior.means()[j] - theta0.values()[j])).powi(2)
        })
        .sum();
    let variance_proxy = eps * op.big_lambda_sum(m);
    Ok(RiskDecomposition {
        m,
        bias,
        variance_proxy,
        posterior_variance_sum: sigma.iter().sum(),
        posterior_variance_max: sigma.iter().copied().fold(0.0, f64::max),
        mean_shift,
        rate: bias.max(variance_proxy),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Oracle,
    Minimax,
}

/// A selected dimension and the rate it attains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dimension: usize,
    pub rate: f64,
    pub kind: SelectionKind,
}

/// `m*_ε = argmin_m max(b_m, ε m Λ̄_m)` and `Φ*_ε`.
pub fn oracle_dimension(
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
) -> Result<SelectionResult> {
    Ok(RiskProfile::new(theta0, prior, op, eps)?.oracle())
}

/// `m°_ε = argmin_m max(w_m, ε m Λ̄_m)` and `Φ°_ε`.
pub fn minimax_dimension(
    class: &WeightedClass,
    op: &OperatorSequence,
    eps: f64,
) -> Result<SelectionResult> {
    check_eps(eps)?;
    let n = class.len().min(op.len());
    let rates: Vec<f64> = (1..=n)
        .map(|m| class.weight(m).max(eps * op.big_lambda_sum(m)))
        .collect();
    let idx = smallest_argmin(&rates).expect("non-empty class");
    Ok(SelectionResult {
        dimension: idx + 1,
        rate: rates[idx],
        kind: SelectionKind::Minimax,
    })
}

/// `M_ε = max{1 ≤ m ≤ ⌊ε⁻¹⌋ : ε Λ_m^max ≤ Λ_1}`, additionally capped at the
/// truncation length `N`.
pub fn max_dimension(op: &OperatorSequence, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let limit = floor_inv(eps).min(op.len());
    let first = op.big_lambda()[0];
    // Λ^max is non-decreasing, so the feasible set is an initial segment.
    let mut m = 1;
    while m < limit && eps * op.big_lambda_max(m + 1) <= first {
        m += 1;
    }
    Ok(m)
}

/// Constants consumed by the bracket dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketConstants {
    #[serde(with = "crate::serde_ext")]
    pub d: f64,
    pub c_lambda: f64,
    pub l_lambda: f64,
}

impl BracketConstants {
    pub fn from_report(report: &AssumptionReport) -> Self {
        Self {
            d: report.d,
            c_lambda: report.c_lambda,
            l_lambda: report.l_lambda,
        }
    }
}

/// Whether brackets are centred on the oracle or the minimax dimension.
#[derive(Debug, Clone, Copy)]
pub enum BracketMode<'a> {
    Oracle,
    Minimax(&'a WeightedClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Brackets {
    pub lower: usize,
    pub center: usize,
    pub upper: usize,
    pub max_dimension: usize,
}

/// `m⁻ = min{m ≤ m* : b_m ≤ 8 L C (1+1/d) Φ*}` and
/// `m⁺ = max{m* ≤ m ≤ M_ε : m ≤ 5 L (ε Λ^max_{m*})⁻¹ Φ*}`; the minimax mode
/// centres on `m°` and uses `(1 ∨ r) Φ°` in place of `Φ*`.
pub fn bracket_dimensions(
    theta0: &ParameterSequence,
    prior: &PriorSpec,
    op: &OperatorSequence,
    eps: f64,
    mode: BracketMode<'_>,
    constants: &BracketConstants,
) -> Result<Brackets> {
    let profile = RiskProfile::new(theta0, prior, op, eps)?;
    let (center, rate) = match mode {
        BracketMode::Oracle => {
            let sel = profile.oracle();
            (sel.dimension, sel.rate)
        }
        BracketMode::Minimax(class) => {
            let sel = minimax_dimension(class, op, eps)?;
            (sel.dimension, class.radius().max(1.0) * sel.rate)
        }
    };
    let max_dim = max_dimension(op, eps)?;
    if center > max_dim {
        return Err(Error::Infeasible(format!(
            "selected dimension {center} exceeds M_ε = {max_dim} at ε = {eps}"
        )));
    }
    let inv_d = 1.0 / constants.d;
    let bias_threshold = 8.0 * constants.l_lambda * constants.c_lambda * (1.0 + inv_d) * rate;
    let lower = (1..=center)
        .find(|&m| profile.bias(m) <= bias_threshold)
        .unwrap_or(center);
    let dim_threshold = 5.0 * constants.l_lambda * rate / (eps * op.big_lambda_max(center));
    let upper = (center..=max_dim)
        .rev()
        .find(|&m| m as f64 <= dim_threshold)
        .unwrap_or(center);
    Ok(Brackets {
        lower,
        center,
        upper,
        max_dimension: max_dim,
    })
}

/// Result of the all-pairs check `Λ^max_{kl} ≤ Λ^max_k Λ^max_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Submultiplicativity {
    /// All pairs with `k·l ≤ verified_up_to` were examined.
    pub verified_up_to: usize,
    /// First violating pair, if any.
    pub violation: Option<(usize, usize)>,
}

impl Submultiplicativity {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

/// Exhaustive submultiplicativity check over `k·l ≤ N`. A relative slack
/// of `1e-12` absorbs rounding in the cached `Λ` values.
pub fn check_submultiplicativity(op: &OperatorSequence) -> Submultiplicativity {
    let n = op.len();
    for k in 1..=n {
        if k * k > n {
            break;
        }
        for l in k..=n / k {
            let lhs = op.big_lambda_max(k * l);
            let rhs = op.big_lambda_max(k) * op.big_lambda_max(l);
            if lhs > rhs * (1.0 + 1e-12) {
                return Submultiplicativity {
                    verified_up_to: n,
                    violation: Some((k, l)),
                };
            }
        }
    }
    Submultiplicativity {
        verified_up_to: n,
        violation: None,
    }
}

/// `C_λ = max_k max_{j>k} λ_j² / min_{j≤k} λ_j²`, clamped below at 1, with
/// the maximising `k`.
pub fn c_lambda(op: &OperatorSequence) -> (f64, Option<usize>) {
    let l2 = op.lambda_sq();
    let n = l2.len();
    let mut suffix_max = vec![0.0f64; n + 1];
    for j in (0..n).rev() {
        suffix_max[j] = suffix_max[j + 1].max(l2[j]);
    }
    let mut best = 1.0;
    let mut witness = None;
    let mut prefix_min = f64::INFINITY;
    for k in 1..n {
        prefix_min = prefix_min.min(l2[k - 1]);
        let ratio = suffix_max[k] / prefix_min;
        if ratio > best {
            best = ratio;
            witness = Some(k);
        }
    }
    (best, witness)
}

/// `L_λ = max_k Λ_k^max / Λ̄_k` with the maximising `k`.
pub fn l_lambda(op: &OperatorSequence) -> (f64, usize) {
    let mut best = 1.0;
    let mut arg = 1;
    for k in 1..=op.len() {
        let r = op.big_lambda_max(k) / op.big_lambda_mean(k);
        if r > best {
            best = r;
            arg = k;
        }
    }
    (best, arg)
}

/// Per-noise-level part of the assumption report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub eps: f64,
    pub max_dimension: usize,
    pub oracle: SelectionResult,
    pub minimax: Option<SelectionResult>,
    /// `m*_ε ≤ M_ε`
    pub oracle_feasible: bool,
    pub minimax_feasible: Option<bool>,
    /// `min(b_{m*}, ε m* Λ̄_{m*}) / Φ*`
    pub kappa_oracle: f64,
    pub kappa_minimax: Option<f64>,
    /// `ε m* Λ^max_{m*} / Φ*`
    pub l_oracle: f64,
    pub l_minimax: Option<f64>,
    /// Smallest `ς_j / max(√(εΛ_j), εΛ_j)` over `j ≤ M_ε`.
    #[serde(with = "crate::serde_ext")]
    pub d: f64,
}

/// Certified constants for every assumption, with violation witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub eps_grid: Vec<f64>,
    pub truncation: usize,
    /// Largest `d` meeting the prior-variance condition; `inf` for an
    /// improper prior.
    #[serde(with = "crate::serde_ext")]
    pub d: f64,
    /// `(j, ε)` where the minimum defining `d` is attained.
    pub d_witness: Option<(usize, f64)>,
    pub c_lambda: f64,
    pub c_lambda_witness: Option<usize>,
    pub submultiplicativity: Submultiplicativity,
    pub l_lambda: f64,
    pub l_lambda_witness: usize,
    pub assumption3_holds: bool,
    pub kappa_oracle: f64,
    pub kappa_minimax: Option<f64>,
    pub l_oracle: f64,
    pub l_minimax: Option<f64>,
    /// `‖θ° − μ‖²` including the tail beyond `N`.
    pub distance_sq: f64,
    pub radius: Option<f64>,
    pub grid: Vec<GridPoint>,
}

/// Checks every assumption over a finite `ε` grid. The prior is rebuilt at
/// each grid point, so `ε`-dependent prior variances are supported.
pub fn check_assumptions(
    theta0: &ParameterSequence,
    prior: &PriorRule,
    op: &OperatorSequence,
    class: Option<&WeightedClass>,
    eps_grid: &[f64],
) -> Result<AssumptionReport> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument("ε grid is empty".into()));
    }
    for &eps in eps_grid {
        check_eps(eps)?;
    }
    let (c_lam, c_witness) = c_lambda(op);
    let (l_lam, l_witness) = l_lambda(op);
    let submult = check_submultiplicativity(op);
    let mut grid = Vec::with_capacity(eps_grid.len());
    let mut d = f64::INFINITY;
    let mut d_witness = None;
    let mut distance = None;
    for &eps in eps_grid {
        let spec = prior.materialize(op, eps)?;
        if distance.is_none() {
            distance = Some(distance_sq(theta0, &spec));
        }
        let max_dim = max_dimension(op, eps)?;
        let mut d_eps = f64::INFINITY;
        for j in 0..max_dim {
            if let PriorVariance::Proper(s) = spec.variances()[j] {
                let x = eps * op.big_lambda()[j];
                let ratio = s / x.sqrt().max(x);
                if ratio < d_eps {
                    d_eps = ratio;
                }
                if ratio < d {
                    d = ratio;
                    d_witness = Some((j + 1, eps));
                }
            }
        }
        let profile = RiskProfile::new(theta0, &spec, op, eps)?;
        let oracle = profile.oracle();
        let m = oracle.dimension;
        let kappa_oracle = profile.bias(m).min(profile.variance_proxy(m)) / oracle.rate;
        let l_oracle = eps * m as f64 * op.big_lambda_max(m) / oracle.rate;
        let (minimax, kappa_minimax, l_minimax) = match class {
            Some(c) => {
                let sel = minimax_dimension(c, op, eps)?;
                let mm = sel.dimension;
                let var = eps * op.big_lambda_sum(mm);
                (
                    Some(sel),
                    Some(c.weight(mm).min(var) / sel.rate),
                    Some(eps * mm as f64 * op.big_lambda_max(mm) / sel.rate),
                )
            }
            None => (None, None, None),
        };
        grid.push(GridPoint {
            eps,
            max_dimension: max_dim,
            oracle,
            minimax,
            oracle_feasible: m <= max_dim,
            minimax_feasible: minimax.map(|s| s.dimension <= max_dim),
            kappa_oracle,
            kappa_minimax,
            l_oracle,
            l_minimax,
            d: d_eps,
        });
    }
    let fold_min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let kappa_oracle = fold_min(&mut grid.iter().map(|g| g.kappa_oracle));
    let l_oracle = fold_max(&mut grid.iter().map(|g| g.l_oracle));
    let kappa_minimax = class.map(|_| fold_min(&mut grid.iter().filter_map(|g| g.kappa_minimax)));
    let l_minimax = class.map(|_| fold_max(&mut grid.iter().filter_map(|g| g.l_minimax)));
    Ok(AssumptionReport {
        eps_grid: eps_grid.to_vec(),
        truncation: op.len(),
        d,
        d_witness,
        c_lambda: c_lam,
        c_lambda_witness: c_witness,
        submultiplicativity: submult,
        l_lambda: l_lam,
        l_lambda_witness: l_witness,
        assumption3_holds: submult.holds(),
        kappa_oracle,
        kappa_minimax,
        l_oracle,
        l_minimax,
        distance_sq: distance.unwrap_or(0.0),
        radius: class.map(|c| c.radius()),
        grid,
    })
}

/// Composite constants of the rate theorems, derived from a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeConstants {
    /// Oracle sieve posterior: `10 ((1+1/d) ∨ ‖θ°−μ‖²/d²) L*`.
    pub oracle_sieve: f64,
    /// Oracle Bayes estimator upper factor: `2 + ‖θ°−μ‖²/d²`.
    pub oracle_estimator_upper: f64,
    /// Lower factor over all fixed dimensions: `(1+1/d)⁻²`.
    pub oracle_estimator_lower: f64,
    /// Minimax sieve posterior: `10 ((1+1/d) ∨ r/d²)(1∨r) L°/κ°`.
    #[serde(with = "crate::serde_ext::option")]
    pub minimax_sieve: Option<f64>,
    /// Minimax Bayes estimator factor: `(2 + r/d²)(1∨r)`.
    #[serde(with = "crate::serde_ext::option")]
    pub minimax_estimator_upper: Option<f64>,
    /// Hierarchical posterior, oracle rate:
    /// `10 ((1+1/d) ∨ ‖θ°−μ‖²/d²) L_λ² (8 C_λ (1+1/d) ∨ D* Λ^max_{D*})`,
    /// `D* = ⌈5 L_λ / κ*⌉`.
    #[serde(with = "crate::serde_ext::option")]
    pub oracle_hierarchical: Option<f64>,
    /// Hierarchical posterior, minimax rate: as above with `16`, `r`, `κ°`
    /// and an extra `(1∨r)`.
    #[serde(with = "crate::serde_ext::option")]
    pub minimax_hierarchical: Option<f64>,
}

impl CompositeConstants {
    pub fn from_report(report: &AssumptionReport, op: &OperatorSequence) -> Self {
        let inv_d = 1.0 / report.d;
        let inv_d2 = inv_d * inv_d;
        let dist = report.distance_sq;
        let base_oracle = (1.0 + inv_d).max(dist * inv_d2);
        let l2 = report.l_lambda * report.l_lambda;
        let c = report.c_lambda;
        let hier = |kappa: f64| -> Option<f64> {
            if !(kappa > 0.0) {
                return None;
            }
            let big_d = (5.0 * report.l_lambda / kappa).ceil() as usize;
            let lam_max = op.big_lambda_max_at(big_d.max(1))?.ok()?;
            Some(l2 * (8.0 * c * (1.0 + inv_d)).max(big_d as f64 * lam_max))
        };
        let (minimax_sieve, minimax_estimator_upper, minimax_hierarchical) =
            match (report.radius, report.kappa_minimax, report.l_minimax) {
                (Some(r), Some(kappa), Some(l)) => {
                    let base = (1.0 + inv_d).max(r * inv_d2);
                    let r1 = r.max(1.0);
                    (
                        Some(10.0 * base * r1 * l / kappa),
                        Some((2.0 + r * inv_d2) * r1),
                        hier(kappa).map(|h| 16.0 * base * h * r1),
                    )
                }
                _ => (None, None, None),
            };
        Self {
            oracle_sieve: 10.0 * base_oracle * report.l_oracle,
            oracle_estimator_upper: 2.0 + dist * inv_d2,
            oracle_estimator_lower: (1.0 + inv_d).powi(-2),
            minimax_sieve,
            minimax_estimator_upper,
            oracle_hierarchical: hier(report.kappa_oracle).map(|h| 10.0 * base_oracle * h),
            minimax_hierarchical,
        }
    }
}
