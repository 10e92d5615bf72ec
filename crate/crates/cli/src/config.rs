//! Experiment configuration: a JSON document with a fixed schema. Unknown
//! keys are rejected and numeric ranges are checked at load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassConfig>,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub mc: McConfig,
    /// Overrides the certified `C_λ` in the dimension prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditConfig>,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub operator: OperatorConfig,
    /// Fixed truncation length; defaults to `⌈1/ε⌉` per noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Polynomial {
        a: f64,
    },
    Exponential {
        a: f64,
    },
    Constant,
    /// Single-column CSV of `λ_j`, relative to the config file.
    Explicit {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    /// `θ_j = scale · j^{-decay}`
    Polynomial {
        scale: f64,
        decay: f64,
    },
    /// `θ_j = scale · exp(−rate · j)`
    Exponential {
        scale: f64,
        rate: f64,
    },
    Explicit {
        file: PathBuf,
    },
    /// `θ° = μ`
    PriorMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub mean: MeanConfig,
    pub variance: VarianceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanConfig {
    Constant(f64),
    File { file: PathBuf },
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceConfig {
    Improper,
    Constant(f64),
    /// `ς_j = d · max(√(εΛ_j), εΛ_j)`
    Floor {
        d: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassConfig {
    /// `w_j = j^{-2p}`
    Polynomial { p: f64, radius: f64 },
    /// `w_j = exp(−j^{2p} + 1)`
    Exponential { p: f64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Fixed(usize),
    Oracle,
    Minimax,
    Adaptive,
}

impl EstimatorConfig {
    pub fn label(&self) -> String {
        match self {
            Self::Fixed(m) => format!("fixed_{m}"),
            Self::Oracle => "oracle".into(),
            Self::Minimax => "minimax".into(),
            Self::Adaptive => "adaptive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_reps")]
    pub replications: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: default_reps(),
        }
    }
}

fn default_reps() -> usize {
    200
}

fn default_draws() -> usize {
    500
}

fn default_floor() -> f64 {
    0.9
}

fn default_escape_ceiling() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Required coverage at the smallest noise level.
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Allowed bracket escape mass at the smallest noise level.
    #[serde(default = "default_escape_ceiling")]
    pub escape_ceiling: f64,
}

fn default_suite() -> usize {
    50
}

fn default_audit_draws() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default = "default_suite")]
    pub suite_size: usize,
    #[serde(default = "default_audit_draws")]
    pub draws: usize,
}

fn default_tolerance() -> f64 {
    0.08
}

fn default_slope_estimators() -> Vec<String> {
    vec!["minimax".into(), "adaptive".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_slope_estimators")]
    pub slope_estimators: Vec<String>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            slope_tolerance: default_tolerance(),
            slope_estimators: default_slope_estimators(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_eps_value(what: &str, eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what}: noise level {eps} must lie in ε ∈ (0,1)"
        )))
    }
}

fn positive(what: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what} must be positive and finite, got {x}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Whether the model, truth and prior blocks are all present.
    pub fn has_model(&self) -> bool {
        self.model.is_some() && self.truth.is_some() && self.prior.is_some()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for &e in &self.eps_grid {
            check_eps_value("eps_grid", e)?;
        }
        let partial = self.model.is_some() || self.truth.is_some() || self.prior.is_some();
        if partial && !self.has_model() {
            return Err(invalid("model, truth and prior must be given together"));
        }
        let needs_model = !self.eps_grid.is_empty()
            || !self.estimators.is_empty()
            || self.concentration.is_some();
        if needs_model && !self.has_model() {
            return Err(invalid(
                "eps_grid, estimators and concentration need a model",
            ));
        }
        if !self.estimators.is_empty() && self.eps_grid.is_empty() {
            return Err(invalid("estimators need a non-empty eps_grid"));
        }
        if let Some(model) = &self.model {
            match &model.operator {
                OperatorConfig::Polynomial { a } | OperatorConfig::Exponential { a } => {
                    if !(*a >= 0.0 && a.is_finite()) {
                        return Err(invalid(format!("operator decay a must be ≥ 0, got {a}")));
                    }
                }
                OperatorConfig::Constant | OperatorConfig::Explicit { .. } => {}
            }
            if model.truncation == Some(0) {
                return Err(invalid("truncation must be at least 1"));
            }
        }
        match &self.truth {
            Some(TruthConfig::Polynomial { scale, decay }) => {
                if !scale.is_finite() || !(*decay > 0.5 && decay.is_finite()) {
                    return Err(invalid(
                        "polynomial truth needs finite scale and decay > 1/2",
                    ));
                }
            }
            Some(TruthConfig::Exponential { scale, rate }) => {
                if !scale.is_finite() {
                    return Err(invalid("exponential truth needs a finite scale"));
                }
                positive("exponential truth rate", *rate)?;
            }
            _ => {}
        }
        if let Some(prior) = &self.prior {
            match prior.variance {
                VarianceConfig::Improper => {
                    if prior.mean != MeanConfig::Constant(0.0) {
                        return Err(invalid("an improper prior needs mean 0"));
                    }
                }
                VarianceConfig::Constant(v) => positive("prior variance", v)?,
                VarianceConfig::Floor { d } => positive("variance floor d", d)?,
            }
            if let MeanConfig::Constant(m) = prior.mean {
                if !m.is_finite() {
                    return Err(invalid("prior mean must be finite"));
                }
            }
        }
        match &self.class {
            Some(
                ClassConfig::Polynomial { p, radius } | ClassConfig::Exponential { p, radius },
            ) => {
                positive("class p", *p)?;
                positive("class radius", *radius)?;
            }
            None => {
                if self.estimators.contains(&EstimatorConfig::Minimax) {
                    return Err(invalid("the minimax estimator needs a class block"));
                }
            }
        }
        for e in &self.estimators {
            if *e == EstimatorConfig::Fixed(0) {
                return Err(invalid("fixed dimension must be at least 1"));
            }
        }
        if self.mc.replications < 50 {
            return Err(invalid(format!(
                "mc.replications must be at least 50, got {}",
                self.mc.replications
            )));
        }
        if let Some(c) = self.c_lambda {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(invalid(format!("c_lambda must be ≥ 1, got {c}")));
            }
        }
        if let Some(conc) = &self.concentration {
            if conc.eps_grid.is_empty() {
                return Err(invalid("concentration.eps_grid must not be empty"));
            }
            for &e in &conc.eps_grid {
                check_eps_value("concentration.eps_grid", e)?;
            }
            if conc.replications == 0 || conc.draws == 0 {
                return Err(invalid(
                    "concentration replications and draws must be positive",
                ));
            }
            if !(0.0..=1.0).contains(&conc.floor) || !(0.0..=1.0).contains(&conc.escape_ceiling) {
                return Err(invalid(
                    "concentration floor and escape_ceiling must lie in [0,1]",
                ));
            }
        }
        if let Some(audit) = &self.audit {
            if audit.suite_size == 0 {
                return Err(invalid("audit.suite_size must be at least 1"));
            }
            if audit.draws < 10_000 {
                return Err(invalid("audit.draws must be at least 10000"));
            }
        }
        positive("checks.slope_tolerance", self.checks.slope_tolerance)?;
        Ok(())
    }

    /// SHA-256 of the canonical serialization, after command-line overrides.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// A validated configuration together with the directory that relative
/// file references resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let config = ExperimentConfig::from_json(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }
}
