//! Turns a configuration into model objects at each noise level.

use std::fs::File;

use igssm::lab::RateRegime;
use igssm::model::{make_operator, Decay, OperatorSequence, ParameterSequence, WeightedClass};
use igssm::numeric::ceil_inv;
use igssm::posterior::{MeanRule, PriorRule, PriorSpec, VarianceRule};
use igssm::select::{check_assumptions, AssumptionReport};

use crate::config::{
    ClassConfig, ExperimentConfig, LoadedConfig, MeanConfig, OperatorConfig, TruthConfig,
    VarianceConfig,
};
use crate::error::CliError;

/// Model objects at one noise level.
#[derive(Debug, Clone)]
pub struct Setup {
    pub eps: f64,
    pub op: OperatorSequence,
    pub theta: ParameterSequence,
    pub prior: PriorSpec,
    pub class: Option<WeightedClass>,
}

/// A loaded configuration with its explicit sequences read from disk.
#[derive(Debug, Clone)]
pub struct Experiment {
    loaded: LoadedConfig,
    lambda: Option<Vec<f64>>,
    theta: Option<Vec<f64>>,
    means: Option<Vec<f64>>,
}

fn read_column(loaded: &LoadedConfig, file: &std::path::Path) -> Result<Vec<f64>, CliError> {
    let path = loaded.resolve(file);
    let f = File::open(&path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    igssm::io::read_values(f).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl Experiment {
    pub fn new(loaded: LoadedConfig) -> Result<Self, CliError> {
        let cfg = &loaded.config;
        let lambda = match cfg.model.as_ref().map(|m| &m.operator) {
            Some(OperatorConfig::Explicit { file }) => Some(read_column(&loaded, file)?),
            _ => None,
        };
        let theta = match &cfg.truth {
            Some(TruthConfig::Explicit { file }) => Some(read_column(&loaded, file)?),
            _ => None,
        };
        let means = match cfg.prior.as_ref().map(|p| &p.mean) {
            Some(MeanConfig::File { file }) => Some(read_column(&loaded, file)?),
            _ => None,
        };
        if let (Some(l), Some(n)) = (&lambda, cfg.model.as_ref().and_then(|m| m.truncation)) {
            if n > l.len() {
                return Err(CliError::Config(format!(
                    "truncation {n} exceeds the {} explicit operator values",
                    l.len()
                )));
            }
        }
        Ok(Self {
            loaded,
            lambda,
            theta,
            means,
        })
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;
        Self::new(LoadedConfig {
            config,
            base_dir: Default::default(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }

    pub fn config_mut(&mut self) -> &mut ExperimentConfig {
        &mut self.loaded.config
    }

    fn model_required(&self) -> Result<(), CliError> {
        if self.config().has_model() {
            Ok(())
        } else {
            Err(CliError::Config(
                "this command needs model, truth and prior blocks".into(),
            ))
        }
    }

    /// Truncation length at noise level `eps`.
    pub fn truncation(&self, eps: f64) -> usize {
        let model = self.config().model.as_ref();
        let fixed = model.and_then(|m| m.truncation);
        match &self.lambda {
            Some(l) => fixed.unwrap_or(l.len()),
            None => fixed.unwrap_or_else(|| ceil_inv(eps)),
        }
    }

    pub fn operator(&self, n: usize) -> Result<OperatorSequence, CliError> {
        self.model_required()?;
        let model = self.config().model.as_ref().expect("checked");
        Ok(match &model.operator {
            OperatorConfig::Polynomial { a } => make_operator(Decay::Polynomial, *a, n)?,
            OperatorConfig::Exponential { a } => make_operator(Decay::Exponential, *a, n)?,
            OperatorConfig::Constant => make_operator(Decay::Constant, 0.0, n)?,
            OperatorConfig::Explicit { .. } => {
                let l = self.lambda.as_ref().expect("loaded");
                OperatorSequence::explicit(l[..n].to_vec())?
            }
        })
    }

    pub fn prior_rule(&self) -> Result<PriorRule, CliError> {
        self.model_required()?;
        let prior = self.config().prior.as_ref().expect("checked");
        let mean = match &prior.mean {
            MeanConfig::Constant(c) => MeanRule::Constant(*c),
            MeanConfig::File { .. } => MeanRule::Explicit(self.means.clone().expect("loaded")),
        };
        let variance = match prior.variance {
            VarianceConfig::Improper => VarianceRule::Improper,
            VarianceConfig::Constant(v) => VarianceRule::Constant(v),
            VarianceConfig::Floor { d } => VarianceRule::Floor { d },
        };
        Ok(PriorRule { mean, variance })
    }

    fn truth(&self, n: usize, prior: &PriorSpec) -> Result<ParameterSequence, CliError> {
        Ok(match self.config().truth.as_ref().expect("checked") {
            TruthConfig::Polynomial { scale, decay } => {
                ParameterSequence::polynomial(*scale, *decay, n)?
            }
            TruthConfig::Exponential { scale, rate } => {
                ParameterSequence::exponential(*scale, *rate, n)?
            }
            TruthConfig::Explicit { .. } => {
                ParameterSequence::explicit(self.theta.clone().expect("loaded")).with_len(n)?
            }
            TruthConfig::PriorMean => ParameterSequence::explicit(prior.means().to_vec()),
        })
    }

    pub fn class(&self, n: usize) -> Result<Option<WeightedClass>, CliError> {
        Ok(match &self.config().class {
            Some(ClassConfig::Polynomial { p, radius }) => {
                Some(WeightedClass::polynomial(*p, *radius, n)?)
            }
            Some(ClassConfig::Exponential { p, radius }) => {
                Some(WeightedClass::exponential(*p, *radius, n)?)
            }
            None => None,
        })
    }

    /// Model objects with truncation `n`.
    pub fn setup_with_len(&self, eps: f64, n: usize) -> Result<Setup, CliError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CliError::Config(format!(
                "noise level {eps} must lie in ε ∈ (0,1)"
            )));
        }
        let op = self.operator(n)?;
        let prior = self.prior_rule()?.materialize(&op, eps)?;
        let theta = self.truth(n, &prior)?;
        let class = self.class(n)?;
        Ok(Setup {
            eps,
            op,
            theta,
            prior,
            class,
        })
    }

    pub fn setup(&self, eps: f64) -> Result<Setup, CliError> {
        self.setup_with_len(eps, self.truncation(eps))
    }

    /// Assumption report over `grid`, computed at the largest truncation
    /// any grid point uses.
    pub fn assumption_report(&self, grid: &[f64]) -> Result<(AssumptionReport, Setup), CliError> {
        let smallest = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let n = grid.iter().map(|&e| self.truncation(e)).max().unwrap_or(1);
        let setup = self.setup_with_len(smallest, n)?;
        let report = check_assumptions(
            &setup.theta,
            &self.prior_rule()?,
            &setup.op,
            setup.class.as_ref(),
            grid,
        )?;
        Ok((report, setup))
    }

    /// Rate regime implied by the operator and class families.
    pub fn regime(&self) -> Option<RateRegime> {
        let op = &self.config().model.as_ref()?.operator;
        let class = self.config().class.as_ref()?;
        match (op, class) {
            (OperatorConfig::Polynomial { a }, ClassConfig::Polynomial { p, .. }) => {
                Some(RateRegime::PolyPoly { p: *p, a: *a })
            }
            (OperatorConfig::Constant, ClassConfig::Polynomial { p, .. }) => {
                Some(RateRegime::PolyPoly { p: *p, a: 0.0 })
            }
            (OperatorConfig::Polynomial { a }, ClassConfig::Exponential { p, .. }) => {
                Some(RateRegime::ExpPoly { p: *p, a: *a })
            }
            (OperatorConfig::Constant, ClassConfig::Exponential { p, .. }) => {
                Some(RateRegime::ExpPoly { p: *p, a: 0.0 })
            }
            (OperatorConfig::Exponential { a }, ClassConfig::Polynomial { p, .. }) => {
                Some(RateRegime::PolyExp { p: *p, a: *a })
            }
            _ => None,
        }
    }
}
