//! Single-step commands. Each reads only its configuration and files
//! written by earlier steps into the same directory.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use igssm::hierarchical::dimension_posterior;
use igssm::io;
use igssm::model::simulate_observation;
use igssm::posterior::coordinate_posterior;
use igssm::select::{
    bracket_dimensions, c_lambda, max_dimension, minimax_dimension, oracle_dimension,
    AssumptionReport, BracketConstants, BracketMode, Brackets, CompositeConstants, SelectionResult,
};
use igssm::{hierarchical, Error};

use crate::error::CliError;
use crate::experiment::Experiment;
use crate::output::Artifact;

pub const OBSERVATION: &str = "observation.csv";
pub const POSTERIOR: &str = "posterior.csv";
pub const DIMENSION: &str = "dimension.csv";
pub const ESTIMATE: &str = "estimate.csv";
pub const SELECTION: &str = "selection.json";

/// The noise level of a single-point command: `--eps`, else the first grid
/// point.
pub fn pick_eps(exp: &Experiment, eps: Option<f64>) -> Result<f64, CliError> {
    match eps.or_else(|| exp.config().eps_grid.first().copied()) {
        Some(e) if e > 0.0 && e < 1.0 => Ok(e),
        Some(e) => Err(CliError::Config(format!(
            "noise level {e} must lie in ε ∈ (0,1)"
        ))),
        None => Err(CliError::Config(
            "no noise level: pass --eps or set eps_grid".into(),
        )),
    }
}

fn open(dir: &Path, name: &str) -> Result<File, CliError> {
    let path = dir.join(name);
    File::open(&path).map_err(|e| {
        CliError::Config(format!(
            "cannot open {} (run the earlier step first): {e}",
            path.display()
        ))
    })
}

pub fn simulate(exp: &Experiment, eps: f64) -> Result<Vec<Artifact>, CliError> {
    let s = exp.setup(eps)?;
    let obs = simulate_observation(&s.theta, &s.op, eps, exp.config().seed)?;
    Ok(vec![Artifact::from_writer(OBSERVATION, |w| {
        io::write_observation(w, &obs)
    })?])
}

fn read_observation(
    exp: &Experiment,
    dir: &Path,
) -> Result<(igssm::Observation, crate::experiment::Setup), CliError> {
    let obs = io::read_observation(open(dir, OBSERVATION)?)?;
    let s = exp.setup_with_len(obs.eps, obs.len())?;
    Ok((obs, s))
}

pub fn posterior(exp: &Experiment, dir: &Path) -> Result<Vec<Artifact>, CliError> {
    let (obs, s) = read_observation(exp, dir)?;
    let summary = coordinate_posterior(&s.prior, &s.op, &obs)?;
    Ok(vec![Artifact::from_writer(POSTERIOR, |w| {
        io::write_summary(w, &summary)
    })?])
}

pub fn adapt(exp: &Experiment, dir: &Path) -> Result<Vec<Artifact>, CliError> {
    let (obs, s) = read_observation(exp, dir)?;
    let summary = io::read_summary(open(dir, POSTERIOR)?)?;
    if summary.len() != obs.len() {
        return Err(Error::LengthMismatch {
            expected: obs.len(),
            found: summary.len(),
        }
        .into());
    }
    let c = exp.config().c_lambda.unwrap_or_else(|| c_lambda(&s.op).0);
    let dist = dimension_posterior(&summary, &s.prior, &s.op, obs.eps, c)?;
    let est = hierarchical::estimate_from_distribution(&summary, &s.prior, &dist);
    Ok(vec![
        Artifact::from_writer(DIMENSION, |w| io::write_distribution(w, &dist))?,
        Artifact::from_writer(ESTIMATE, |w| io::write_estimate(w, &est))?,
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub eps: f64,
    pub truncation: usize,
    pub max_dimension: usize,
    pub oracle: SelectionResult,
    pub minimax: Option<SelectionResult>,
    /// `None` when the oracle dimension exceeds `M_ε`.
    pub oracle_brackets: Option<Brackets>,
    pub minimax_brackets: Option<Brackets>,
    pub assumptions: AssumptionReport,
    pub constants: CompositeConstants,
}

pub fn select(exp: &Experiment, eps: f64) -> Result<Vec<Artifact>, CliError> {
    let mut grid = exp.config().eps_grid.clone();
    if !grid.contains(&eps) {
        grid.push(eps);
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    let (report, big) = exp.assumption_report(&grid)?;
    let constants = CompositeConstants::from_report(&report, &big.op);
    let s = exp.setup(eps)?;
    let oracle = oracle_dimension(&s.theta, &s.prior, &s.op, eps)?;
    let minimax = s
        .class
        .as_ref()
        .map(|c| minimax_dimension(c, &s.op, eps))
        .transpose()?;
    let bc = BracketConstants::from_report(&report);
    let feasible = |r: igssm::Result<Brackets>| match r {
        Ok(b) => Ok(Some(b)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let oracle_brackets = feasible(bracket_dimensions(
        &s.theta,
        &s.prior,
        &s.op,
        eps,
        BracketMode::Oracle,
        &bc,
    ))?;
    let minimax_brackets = match &s.class {
        Some(c) => feasible(bracket_dimensions(
            &s.theta,
            &s.prior,
            &s.op,
            eps,
            BracketMode::Minimax(c),
            &bc,
        ))?,
        None => None,
    };
    let selection = Selection {
        eps,
        truncation: s.op.len(),
        max_dimension: max_dimension(&s.op, eps)?,
        oracle,
        minimax,
        oracle_brackets,
        minimax_brackets,
        assumptions: report,
        constants,
    };
    Ok(vec![Artifact::json(SELECTION, &selection)])
}
