//! Fixtures shared by the benchmarks.

use igssm::model::{make_operator, Decay, OperatorSequence, ParameterSequence};
use igssm::posterior::PriorSpec;
use igssm::{coordinate_posterior, simulate_observation, PosteriorSummary};

/// The polynomial illustration at noise level `eps` with truncation `1/ε`.
pub struct Fixture {
    pub eps: f64,
    pub op: OperatorSequence,
    pub theta: ParameterSequence,
    pub prior: PriorSpec,
    pub summary: PosteriorSummary,
}

impl Fixture {
    pub fn polynomial(eps: f64) -> Self {
        let n = (1.0 / eps).round() as usize;
        let op = make_operator(Decay::Polynomial, 1.0, n).expect("valid operator");
        let theta = ParameterSequence::polynomial(0.42, 1.6, n).expect("valid truth");
        let prior = PriorSpec::variance_floor(vec![0.0; n], &op, eps, 1.0).expect("valid prior");
        let obs = simulate_observation(&theta, &op, eps, 1).expect("valid observation");
        let summary = coordinate_posterior(&prior, &op, &obs).expect("consistent lengths");
        Self {
            eps,
            op,
            theta,
            prior,
            summary,
        }
    }
}
