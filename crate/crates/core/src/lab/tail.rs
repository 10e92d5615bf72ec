//! Audits of the Gaussian quadratic-form tail bounds for
//! `S_m = Σ_{j≤m} X_j²`, `X_j ~ N(α_j, β_j²)` independent.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MCEstimate;
use crate::error::{Error, Result};
use crate::numeric::Moments;
use crate::rng::{self, Purpose};

/// Means, standard deviations and the envelope constants
/// `v ≥ Σβ²`, `t ≥ max β²`, `r ≥ Σα²` at deviation scale `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundConfig {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    v: f64,
    t: f64,
    r: f64,
    c: f64,
}

impl TailBoundConfig {
    /// Uses the tightest envelopes.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, c: f64) -> Result<Self> {
        let v = beta.iter().map(|b| b * b).sum();
        let t = beta.iter().map(|b| b * b).fold(0.0, f64::max);
        let r = alpha.iter().map(|a| a * a).sum();
        Self::with_envelopes(alpha, beta, v, t, r, c)
    }

    pub fn with_envelopes(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        v: f64,
        t: f64,
        r: f64,
        c: f64,
    ) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::InvalidArgument(
                "α and β must be non-empty and of equal length".into(),
            ));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be ≥ 0, got {c}")));
        }
        if alpha.iter().chain(&beta).any(|x| !x.is_finite()) || beta.iter().any(|&b| b < 0.0) {
            return Err(Error::InvalidArgument("β_j must be finite and ≥ 0".into()));
        }
        let sum_b2: f64 = beta.iter().map(|b| b * b).sum();
        let max_b2 = beta.iter().map(|b| b * b).fold(0.0, f64::max);
        let sum_a2: f64 = alpha.iter().map(|a| a * a).sum();
        if !(t > 0.0) {
            return Err(Error::InvalidArgument("t must be > 0".into()));
        }
        if v < sum_b2 || t < max_b2 || r < sum_a2 {
            return Err(Error::InvalidArgument(
                "envelopes must dominate Σβ², max β², Σα²".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            v,
            t,
            r,
            c,
        })
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `E S = Σ (α² + β²)`
    pub fn mean(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a * a + b * b)
            .sum()
    }

    fn scale(&self) -> f64 {
        self.v + 2.0 * self.r
    }

    /// `exp(−c (c∧1)(v + 2r) / (4t))`, shared by both probability bounds.
    pub fn probability_bound(&self) -> f64 {
        (-self.c * self.c.min(1.0) * self.scale() / (4.0 * self.t)).exp()
    }

    /// `6t exp(−c (v + 2r) / (4t))`, audited only for `c ≥ 1`.
    pub fn expectation_bound(&self) -> Option<f64> {
        (self.c >= 1.0).then(|| 6.0 * self.t * (-self.c * self.scale() / (4.0 * self.t)).exp())
    }

    /// `c (v + 2r)`, the lower deviation.
    pub fn lower_deviation(&self) -> f64 {
        self.c * self.scale()
    }

    /// `(3c/2)(v + 2r)`, the upper deviation.
    pub fn upper_deviation(&self) -> f64 {
        1.5 * self.c * self.scale()
    }
}

/// One audited inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub empirical: MCEstimate,
    pub bound: f64,
    pub pass: bool,
}

impl AuditRow {
    fn new(empirical: MCEstimate, bound: f64) -> Self {
        Self {
            empirical,
            bound,
            pass: empirical.estimate <= bound + 3.0 * empirical.std_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailAudit {
    /// `P(S − ES ≤ −c(v+2r))`
    pub lower: AuditRow,
    /// `P(S − ES ≥ (3c/2)(v+2r))`
    pub upper: AuditRow,
    /// `E(S − ES − (3c/2)(v+2r))₊`; `None` when `c < 1`.
    pub expectation: Option<AuditRow>,
}

impl TailAudit {
    pub fn pass(&self) -> bool {
        self.lower.pass && self.upper.pass && self.expectation.is_none_or(|e| e.pass)
    }
}

const BLOCK: usize = 4096;

/// Estimates both tail probabilities and the excess expectation from `reps`
/// independent draws of `S_m`.
pub fn audit_tail_bounds(cfg: &TailBoundConfig, reps: usize, seed: u64) -> Result<TailAudit> {
    if reps < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "tail audits need at least 10⁴ draws, got {reps}"
        )));
    }
    let es = cfg.mean();
    let lo = cfg.lower_deviation();
    let hi = cfg.upper_deviation();
    let blocks = reps.div_ceil(BLOCK);
    let partial: Vec<[Moments; 3]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, Purpose::TailAudit, b as u64);
            let n = BLOCK.min(reps - b * BLOCK);
            let mut acc = [Moments::default(); 3];
            for _ in 0..n {
                let s: f64 = cfg
                    .alpha
                    .iter()
                    .zip(&cfg.beta)
                    .map(|(a, b)| {
                        let z: f64 = rng.sample(StandardNormal);
                        (a + b * z).powi(2)
                    })
                    .sum();
                let dev = s - es;
                acc[0].push(f64::from(u8::from(dev <= -lo)));
                acc[1].push(f64::from(u8::from(dev >= hi)));
                acc[2].push((dev - hi).max(0.0));
            }
            acc
        })
        .collect();
    let mut total = [Moments::default(); 3];
    for block in &partial {
        for (t, p) in total.iter_mut().zip(block) {
            t.merge(p);
        }
    }
    let est = |m: &Moments| MCEstimate {
        estimate: m.mean(),
        std_error: m.std_error(),
        replications: m.count(),
        seed,
    };
    let bound = cfg.probability_bound();
    Ok(TailAudit {
        lower: AuditRow::new(est(&total[0]), bound),
        upper: AuditRow::new(est(&total[1]), bound),
        expectation: cfg
            .expectation_bound()
            .map(|b| AuditRow::new(est(&total[2]), b)),
    })
}

/// A reproducible suite of `n` configurations. The first is the central
/// chi-square case `α ≡ 0, β ≡ 1, m = 10, c = 1`; the rest mix central and
/// noncentral forms, loose and tight envelopes, and `c` on both sides of 1.
pub fn random_tail_suite(n: usize, seed: u64) -> Vec<TailBoundConfig> {
    let mut rng = rng::stream(seed, Purpose::Config, 0);
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(TailBoundConfig::new(vec![0.0; 10], vec![1.0; 10], 1.0).expect("valid"));
    const CS: [f64; 7] = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.5];
    while out.len() < n {
        let m = rng.random_range(1..=40);
        let central = rng.random_bool(0.3);
        let alpha: Vec<f64> = (0..m)
            .map(|_| {
                if central {
                    0.0
                } else {
                    rng.random_range(-2.0..2.0)
                }
            })
            .collect();
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..2.0)).collect();
        let c = CS[rng.random_range(0..CS.len())];
        let cfg = TailBoundConfig::new(alpha, beta, c).expect("valid");
        let cfg = if rng.random_bool(0.3) {
            let inflate = rng.random_range(1.0..1.5);
            TailBoundConfig::with_envelopes(
                cfg.alpha.clone(),
                cfg.beta.clone(),
                cfg.v * inflate,
                cfg.t * inflate,
                cfg.r * inflate,
                c,
            )
            .expect("valid")
        } else {
            cfg
        };
        out.push(cfg);
    }
    out
}
