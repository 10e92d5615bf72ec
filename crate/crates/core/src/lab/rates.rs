use serde::{Deserialize, Serialize};

use super::MCEstimate;
use crate::error::{check_eps, Error, Result};
use crate::numeric::fit_line;
use crate::select::CompositeConstants;

/// Decay regimes of the class weights `w` and the operator `λ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RateRegime {
    /// `w_j ≍ j^{-2p}`, `λ_j² ≍ j^{-2a}`: rate `ε^{2p/(2a+2p+1)}`.
    PolyPoly { p: f64, a: f64 },
    /// `w_j ≍ exp(−j^{2p}+1)`, `λ_j² ≍ j^{-2a}`: rate `ε |log ε|^{(2a+1)/(2p)}`.
    ExpPoly { p: f64, a: f64 },
    /// `w_j ≍ j^{-2p}`, `λ_j² ≍ exp(−j^{2a}+1)`: rate `|log ε|^{-p/a}`.
    PolyExp { p: f64, a: f64 },
}

impl RateRegime {
    /// Exponent of `ε` in the rate, or `None` for the logarithmic regime.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Self::PolyPoly { p, a } => Some(2.0 * p / (2.0 * a + 2.0 * p + 1.0)),
            Self::ExpPoly { .. } => Some(1.0),
            Self::PolyExp { .. } => None,
        }
    }

    /// Power of `|log ε|` multiplying `ε^exponent`.
    pub fn log_power(&self) -> f64 {
        match *self {
            Self::PolyPoly { .. } => 0.0,
            Self::ExpPoly { p, a } => (2.0 * a + 1.0) / (2.0 * p),
            Self::PolyExp { p, a } => -p / a,
        }
    }

    /// The rate up to constants.
    pub fn rate(&self, eps: f64) -> f64 {
        eps.powf(self.exponent().unwrap_or(0.0)) * eps.ln().abs().powf(self.log_power())
    }
}

/// Least-squares fit of `log MISE` on `log ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    /// Slope after dividing out the `|log ε|` factor of the regime.
    pub log_adjusted_slope: Option<f64>,
    /// Theoretical exponent; `None` when the comparison is suppressed.
    pub theoretical: Option<f64>,
    pub regime: Option<RateRegime>,
}

impl RateFit {
    /// Whether the fitted slope (log-adjusted when the regime has a log
    /// factor) lies within `tol` of the theoretical exponent. `None` when
    /// there is nothing to compare against.
    pub fn within(&self, tol: f64) -> Option<bool> {
        let slope = self.log_adjusted_slope.unwrap_or(self.slope);
        self.theoretical.map(|t| (slope - t).abs() <= tol)
    }
}

/// Fits `log value = intercept + slope · log ε`. Requires at least four
/// points spanning at least three decades of `ε`.
pub fn rate_regression(eps: &[f64], values: &[f64], regime: Option<RateRegime>) -> Result<RateFit> {
    if eps.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: eps.len(),
            found: values.len(),
        });
    }
    if eps.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "rate regression needs at least 4 noise levels, got {}",
            eps.len()
        )));
    }
    for &e in eps {
        check_eps(e)?;
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "MISE values must be positive".into(),
        ));
    }
    let lo = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < 3.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "noise levels span {:.2} decades, at least 3 are needed",
            (hi / lo).log10()
        )));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&xs, &ys);
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - fit.intercept - fit.slope * x)
        .collect();
    let log_adjusted_slope = match regime {
        Some(r @ RateRegime::ExpPoly { .. }) => {
            let adj: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| y - r.log_power() * x.abs().ln())
                .collect();
            Some(fit_line(&xs, &adj).slope)
        }
        _ => None,
    };
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residuals,
        max_abs_residual: fit.max_abs_residual,
        log_adjusted_slope,
        theoretical: regime.and_then(|r| r.exponent()),
        regime,
    })
}

/// One MISE estimate in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub estimator: String,
    pub dimension: Option<usize>,
    pub mise: MCEstimate,
}

/// A sweep over noise levels with per-estimator fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub eps_grid: Vec<f64>,
    pub rows: Vec<RateRow>,
    pub fits: Vec<(String, RateFit)>,
    pub regime: Option<RateRegime>,
    pub constants: Option<CompositeConstants>,
}

impl RateReport {
    /// Fits every estimator present in `rows`, in first-appearance order.
    pub fn from_rows(
        eps_grid: Vec<f64>,
        rows: Vec<RateRow>,
        regime: Option<RateRegime>,
        constants: Option<CompositeConstants>,
    ) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        for r in &rows {
            if !names.contains(&r.estimator) {
                names.push(r.estimator.clone());
            }
        }
        let mut fits = Vec::with_capacity(names.len());
        for name in names {
            let (e, v): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.estimator == name)
                .map(|r| (r.eps, r.mise.estimate))
                .unzip();
            fits.push((name, rate_regression(&e, &v, regime)?));
        }
        Ok(Self {
            eps_grid,
            rows,
            fits,
            regime,
            constants,
        })
    }

    pub fn fit(&self, estimator: &str) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|(n, _)| n == estimator)
            .map(|(_, f)| f)
    }
}
