//! Experiment sections: rate sweep, concentration, tail audit, and the
//! checks that turn them into pass/fail verdicts.

use serde::Serialize;

use igssm::lab::{
    audit_tail_bounds, mc_concentration, mc_dimension_escape, mc_mise_many, non_decreasing,
    non_increasing, random_tail_suite, EstimatorKind, MCEstimate, PosteriorKind, RateReport,
    RateRow,
};
use igssm::select::{
    bracket_dimensions, max_dimension, minimax_dimension, oracle_dimension, AssumptionReport,
    BracketConstants, BracketMode, CompositeConstants,
};

use crate::config::EstimatorConfig;
use crate::error::CliError;
use crate::experiment::Experiment;
use crate::output::Artifact;

/// Slack, in combined standard errors, allowed between consecutive points
/// of a monotone-trend check.
pub const TREND_SLACK: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct RatesCsvRow {
    pub eps: f64,
    pub m_star: usize,
    pub phi_star: f64,
    pub m_circ: Option<usize>,
    pub phi_circ: Option<f64>,
    pub d: f64,
    #[serde(rename = "C_lambda")]
    pub c_lambda: f64,
    #[serde(rename = "L_lambda")]
    pub l_lambda: f64,
    pub kappa: f64,
}

pub const RATES_HEADER: [&str; 9] = [
    "eps", "m_star", "phi_star", "m_circ", "phi_circ", "d", "C_lambda", "L_lambda", "kappa",
];

#[derive(Debug, Clone, Serialize)]
pub struct MiseCsvRow {
    pub eps: f64,
    pub estimator: String,
    pub dimension: Option<usize>,
    pub mise: f64,
    pub std_error: f64,
    pub replications: u64,
    pub seed: u64,
}

pub const MISE_HEADER: [&str; 7] = [
    "eps",
    "estimator",
    "dimension",
    "mise",
    "std_error",
    "replications",
    "seed",
];

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationCsvRow {
    pub eps: f64,
    pub posterior: String,
    pub k: Option<f64>,
    pub rate: Option<f64>,
    pub m_lower: Option<usize>,
    pub m_upper: Option<usize>,
    pub estimate: f64,
    pub std_error: f64,
    pub replications: u64,
    pub draws: Option<usize>,
}

pub const CONCENTRATION_HEADER: [&str; 10] = [
    "eps",
    "posterior",
    "k",
    "rate",
    "m_lower",
    "m_upper",
    "estimate",
    "std_error",
    "replications",
    "draws",
];

#[derive(Debug, Clone, Serialize)]
pub struct AuditCsvRow {
    pub config: usize,
    pub m: usize,
    pub c: f64,
    pub bound_type: &'static str,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

pub const AUDIT_HEADER: [&str; 8] = [
    "config",
    "m",
    "c",
    "bound_type",
    "empirical",
    "std_error",
    "bound",
    "pass",
];

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Noise levels used for the assumption report: the rate grid and the
/// concentration grid, in decreasing order.
pub fn report_grid(exp: &Experiment) -> Vec<f64> {
    let cfg = exp.config();
    let mut grid = cfg.eps_grid.clone();
    if let Some(c) = &cfg.concentration {
        grid.extend_from_slice(&c.eps_grid);
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    grid
}

/// The `C_λ` used by the dimension prior.
pub fn effective_c_lambda(exp: &Experiment, report: &AssumptionReport) -> f64 {
    exp.config().c_lambda.unwrap_or(report.c_lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSection {
    pub rates: Vec<RatesCsvRow>,
    pub mise: Vec<MiseCsvRow>,
    pub report: Option<RateReport>,
}

fn regression_possible(grid: &[f64]) -> bool {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(0.0, f64::max);
    grid.len() >= 4 && (hi / lo).log10() >= 3.0 - 1e-9
}

pub fn rate_section(
    exp: &Experiment,
    report: &AssumptionReport,
    constants: &CompositeConstants,
) -> Result<RateSection, CliError> {
    let cfg = exp.config();
    let c_lambda = effective_c_lambda(exp, report);
    let mut rates = Vec::new();
    let mut mise = Vec::new();
    let mut rows = Vec::new();
    for &eps in &cfg.eps_grid {
        let s = exp.setup(eps)?;
        let oracle = oracle_dimension(&s.theta, &s.prior, &s.op, eps)?;
        let minimax = s
            .class
            .as_ref()
            .map(|c| minimax_dimension(c, &s.op, eps))
            .transpose()?;
        let point = report
            .grid
            .iter()
            .find(|g| g.eps == eps)
            .expect("grid point present");
        rates.push(RatesCsvRow {
            eps,
            m_star: oracle.dimension,
            phi_star: oracle.rate,
            m_circ: minimax.map(|m| m.dimension),
            phi_circ: minimax.map(|m| m.rate),
            d: point.d,
            c_lambda: report.c_lambda,
            l_lambda: report.l_lambda,
            kappa: point.kappa_oracle,
        });
        if cfg.estimators.is_empty() {
            continue;
        }
        let kinds: Vec<EstimatorKind> = cfg
            .estimators
            .iter()
            .map(|e| match e {
                EstimatorConfig::Fixed(m) => EstimatorKind::Fixed(*m),
                EstimatorConfig::Oracle => EstimatorKind::Oracle,
                EstimatorConfig::Minimax => {
                    EstimatorKind::Minimax(s.class.clone().expect("validated"))
                }
                EstimatorConfig::Adaptive => EstimatorKind::Adaptive { c_lambda },
            })
            .collect();
        let estimates = mc_mise_many(
            &kinds,
            &s.theta,
            &s.prior,
            &s.op,
            eps,
            cfg.mc.replications,
            cfg.seed,
        )?;
        for (e, est) in cfg.estimators.iter().zip(estimates) {
            let dimension = match e {
                EstimatorConfig::Fixed(m) => Some(*m),
                EstimatorConfig::Oracle => Some(oracle.dimension),
                EstimatorConfig::Minimax => minimax.map(|m| m.dimension),
                EstimatorConfig::Adaptive => None,
            };
            mise.push(MiseCsvRow {
                eps,
                estimator: e.label(),
                dimension,
                mise: est.estimate,
                std_error: est.std_error,
                replications: est.replications,
                seed: est.seed,
            });
            rows.push(RateRow {
                eps,
                estimator: e.label(),
                dimension,
                mise: est,
            });
        }
    }
    let report = if !rows.is_empty() && regression_possible(&cfg.eps_grid) {
        Some(RateReport::from_rows(
            cfg.eps_grid.clone(),
            rows,
            exp.regime(),
            Some(*constants),
        )?)
    } else {
        None
    };
    Ok(RateSection {
        rates,
        mise,
        report,
    })
}

pub fn slope_checks(exp: &Experiment, report: &RateReport) -> Vec<CheckResult> {
    let checks = &exp.config().checks;
    checks
        .slope_estimators
        .iter()
        .filter_map(|name| {
            let fit = report.fit(name)?;
            let ok = fit.within(checks.slope_tolerance)?;
            Some(CheckResult {
                name: format!("slope:{name}"),
                pass: ok,
                detail: format!(
                    "fitted {:.4}, theoretical {:.4} ± {}",
                    fit.log_adjusted_slope.unwrap_or(fit.slope),
                    fit.theoretical.unwrap_or(f64::NAN),
                    checks.slope_tolerance
                ),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationSection {
    pub rows: Vec<ConcentrationCsvRow>,
    pub checks: Vec<CheckResult>,
}

pub fn concentration_section(
    exp: &Experiment,
    report: &AssumptionReport,
    constants: &CompositeConstants,
) -> Result<Option<ConcentrationSection>, CliError> {
    let cfg = exp.config();
    let Some(conc) = &cfg.concentration else {
        return Ok(None);
    };
    let c_lambda = effective_c_lambda(exp, report);
    let bc = BracketConstants::from_report(report);
    let mut grid = conc.eps_grid.clone();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    let mut sieve = Vec::new();
    let mut hier = Vec::new();
    let mut escape = Vec::new();
    for &eps in &grid {
        let s = exp.setup(eps)?;
        let oracle = oracle_dimension(&s.theta, &s.prior, &s.op, eps)?;
        let max_dim = max_dimension(&s.op, eps)?;
        if oracle.dimension > max_dim {
            return Err(igssm::Error::Infeasible(format!(
                "oracle dimension {} exceeds M_ε = {max_dim} at ε = {eps}",
                oracle.dimension
            ))
            .into());
        }
        let k = constants.oracle_sieve;
        let est = mc_concentration(
            PosteriorKind::Sieve(oracle.dimension),
            &s.theta,
            &s.prior,
            &s.op,
            eps,
            k,
            oracle.rate,
            conc.replications,
            conc.draws,
            cfg.seed,
        )?;
        rows.push(conc_row(
            eps,
            "oracle_sieve",
            Some(k),
            Some(oracle.rate),
            None,
            &est,
            conc.draws,
        ));
        sieve.push(est);
        if let Some(k) = constants.oracle_hierarchical {
            let est = mc_concentration(
                PosteriorKind::Hierarchical { c_lambda },
                &s.theta,
                &s.prior,
                &s.op,
                eps,
                k,
                oracle.rate,
                conc.replications,
                conc.draws,
                cfg.seed,
            )?;
            rows.push(conc_row(
                eps,
                "hierarchical",
                Some(k),
                Some(oracle.rate),
                None,
                &est,
                conc.draws,
            ));
            hier.push(est);
        }
        let br = bracket_dimensions(&s.theta, &s.prior, &s.op, eps, BracketMode::Oracle, &bc)?;
        let est = mc_dimension_escape(
            &s.theta,
            &s.prior,
            &s.op,
            eps,
            c_lambda,
            &br,
            conc.replications,
            cfg.seed,
        )?;
        let mut row = conc_row(
            eps,
            "dimension_escape",
            None,
            None,
            Some((br.lower, br.upper)),
            &est,
            0,
        );
        row.draws = None;
        rows.push(row);
        escape.push(est);
    }
    let mut checks = Vec::new();
    for (name, series) in [("oracle_sieve", &sieve), ("hierarchical", &hier)] {
        if let Some(last) = series.last() {
            let trend = non_decreasing(series, TREND_SLACK);
            let floor = last.estimate >= conc.floor;
            checks.push(CheckResult {
                name: format!("concentration:{name}"),
                pass: trend && floor,
                detail: format!(
                    "non-decreasing: {trend}; final {:.4} vs floor {}",
                    last.estimate, conc.floor
                ),
            });
        }
    }
    if let Some(last) = escape.last() {
        let trend = non_increasing(&escape, TREND_SLACK);
        let ceiling = last.estimate <= conc.escape_ceiling;
        checks.push(CheckResult {
            name: "dimension_escape".into(),
            pass: trend && ceiling,
            detail: format!(
                "non-increasing: {trend}; final {:.3e} vs ceiling {}",
                last.estimate, conc.escape_ceiling
            ),
        });
    }
    Ok(Some(ConcentrationSection { rows, checks }))
}

fn conc_row(
    eps: f64,
    posterior: &str,
    k: Option<f64>,
    rate: Option<f64>,
    brackets: Option<(usize, usize)>,
    est: &MCEstimate,
    draws: usize,
) -> ConcentrationCsvRow {
    ConcentrationCsvRow {
        eps,
        posterior: posterior.into(),
        k,
        rate,
        m_lower: brackets.map(|b| b.0),
        m_upper: brackets.map(|b| b.1),
        estimate: est.estimate,
        std_error: est.std_error,
        replications: est.replications,
        draws: Some(draws),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditSection {
    pub rows: Vec<AuditCsvRow>,
    pub check: CheckResult,
}

pub fn audit_section(exp: &Experiment) -> Result<Option<AuditSection>, CliError> {
    let cfg = exp.config();
    let Some(audit) = &cfg.audit else {
        return Ok(None);
    };
    let suite = random_tail_suite(audit.suite_size, cfg.seed);
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, tc) in suite.iter().enumerate() {
        let a = audit_tail_bounds(tc, audit.draws, cfg.seed.wrapping_add(i as u64))?;
        let entries = [
            ("lower", Some(a.lower)),
            ("upper", Some(a.upper)),
            ("expectation", a.expectation),
        ];
        for (bound_type, row) in entries {
            let Some(row) = row else { continue };
            if !row.pass {
                failures += 1;
            }
            rows.push(AuditCsvRow {
                config: i,
                m: tc.dimension(),
                c: tc.c(),
                bound_type,
                empirical: row.empirical.estimate,
                std_error: row.empirical.std_error,
                bound: row.bound,
                pass: row.pass,
            });
        }
    }
    Ok(Some(AuditSection {
        check: CheckResult {
            name: "audit".into(),
            pass: failures == 0,
            detail: format!(
                "{} of {} audited bounds hold",
                rows.len() - failures,
                rows.len()
            ),
        },
        rows,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub config_sha256: String,
    pub assumptions: Option<AssumptionReport>,
    pub constants: Option<CompositeConstants>,
    pub c_lambda_used: Option<f64>,
    pub rates: Option<RateReport>,
    pub checks: Vec<CheckResult>,
}

/// Everything a run produces, rendered but not yet written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub report: RunReport,
}

impl RunOutput {
    pub fn failed_checks(&self) -> Vec<&CheckResult> {
        self.report.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Which sections to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Rates, MISE, concentration and audit.
    Full,
    /// Rates and MISE only.
    Sweep,
}

pub fn run_experiment(exp: &Experiment, scope: Scope) -> Result<RunOutput, CliError> {
    let cfg = exp.config();
    let mut checks = Vec::new();
    let mut assumptions = None;
    let mut constants = None;
    let mut c_used = None;
    let mut rate_report = None;
    let mut rates = Vec::new();
    let mut mise = Vec::new();
    let mut conc_rows = Vec::new();
    let grid = report_grid(exp);
    let with_conc = scope == Scope::Full && cfg.concentration.is_some();
    if !cfg.eps_grid.is_empty() || with_conc {
        let (report, big) = exp.assumption_report(&grid)?;
        let consts = CompositeConstants::from_report(&report, &big.op);
        let section = rate_section(exp, &report, &consts)?;
        if let Some(r) = &section.report {
            checks.extend(slope_checks(exp, r));
        }
        rates = section.rates;
        mise = section.mise;
        rate_report = section.report;
        if with_conc {
            if let Some(c) = concentration_section(exp, &report, &consts)? {
                conc_rows = c.rows;
                checks.extend(c.checks);
            }
        }
        c_used = Some(effective_c_lambda(exp, &report));
        assumptions = Some(report);
        constants = Some(consts);
    }
    let mut audit_rows = Vec::new();
    if scope == Scope::Full {
        if let Some(a) = audit_section(exp)? {
            audit_rows = a.rows;
            checks.push(a.check);
        }
    }
    let report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        assumptions,
        constants,
        c_lambda_used: c_used,
        rates: rate_report,
        checks,
    };
    let mut artifacts = vec![
        Artifact::csv("rates.csv", &RATES_HEADER, &rates),
        Artifact::csv("mise.csv", &MISE_HEADER, &mise),
    ];
    if scope == Scope::Full {
        artifacts.push(Artifact::csv(
            "concentration.csv",
            &CONCENTRATION_HEADER,
            &conc_rows,
        ));
        artifacts.push(Artifact::csv("audit.csv", &AUDIT_HEADER, &audit_rows));
    }
    artifacts.push(Artifact::json("report.json", &report));
    Ok(RunOutput { artifacts, report })
}

/// Runs only the tail-bound audit.
pub fn run_audit(exp: &Experiment) -> Result<RunOutput, CliError> {
    let cfg = exp.config();
    let section = match audit_section(exp)? {
        Some(s) => s,
        None => {
            return Err(CliError::Config(
                "the audit command needs an audit block".into(),
            ));
        }
    };
    let report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        assumptions: None,
        constants: None,
        c_lambda_used: None,
        rates: None,
        checks: vec![section.check],
    };
    Ok(RunOutput {
        artifacts: vec![
            Artifact::csv("audit.csv", &AUDIT_HEADER, &section.rows),
            Artifact::json("report.json", &report),
        ],
        report,
    })
}
