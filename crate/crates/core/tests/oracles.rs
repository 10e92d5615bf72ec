//! Closed-form and brute-force oracles checked against the library.

use igssm::hierarchical::estimate_from_distribution;
use igssm::lab::{
    audit_tail_bounds, mc_concentration, mc_mise, mc_mise_many, EstimatorKind, PosteriorKind,
    TailBoundConfig,
};
use igssm::model::{make_operator, Decay, Observation, OperatorSequence, ParameterSequence};
use igssm::posterior::{PriorSpec, PriorVariance};
use igssm::select::{bracket_dimensions, BracketConstants, BracketMode};
use igssm::{
    coordinate_posterior, dimension_posterior, max_dimension, minimax_dimension, oracle_dimension,
    sample_hierarchical_posterior, sample_sieve_posterior, simulate_observation, WeightedClass,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Posterior mean and variance of one coordinate by trapezoid integration of
/// prior × likelihood: a coarse pass over a wide window locates the mass, a
/// fine pass over ±14 sd around it computes centred moments.
fn grid_posterior(eps: f64, lam: f64, var: f64, mu: f64, y: f64) -> (f64, f64) {
    let log_density =
        |t: f64| -(t - mu).powi(2) / (2.0 * var) - (y - lam * t).powi(2) / (2.0 * eps);
    let moments = |lo: f64, hi: f64, n: usize, centre: f64| {
        let h = (hi - lo) / (n - 1) as f64;
        let peak = log_density(centre);
        let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let t = lo + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let f = w * (log_density(t) - peak).exp();
            z += f;
            s1 += f * (t - centre);
            s2 += f * (t - centre).powi(2);
        }
        let shift = s1 / z;
        (centre + shift, s2 / z - shift * shift)
    };
    let spread = 12.0 * (var.sqrt() + eps.sqrt() / lam);
    let lo = mu.min(y / lam) - spread;
    let hi = mu.max(y / lam) + spread;
    let n = 400_001;
    let h = (hi - lo) / (n - 1) as f64;
    let mode = (0..n)
        .map(|i| lo + i as f64 * h)
        .max_by(|a, b| log_density(*a).total_cmp(&log_density(*b)))
        .unwrap();
    let (m, v) = moments(lo, hi, n, mode);
    let sd = v.sqrt();
    moments(m - 14.0 * sd, m + 14.0 * sd, 20_001, m)
}

#[test]
fn conjugate_posterior_matches_numerical_integration() {
    let (mean, var) = grid_posterior(0.01, 1.0, 1.0, 0.0, 2.0);
    assert!((var - 1.0 / 101.0).abs() < 1e-6);
    assert!((mean - 200.0 / 101.0).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let eps = 10f64.powf(rng.random_range(-4.0..-0.3));
        let lam = rng.random_range(0.1..2.0);
        let var = 10f64.powf(rng.random_range(-2.0..1.0));
        let mu = rng.random_range(-2.0..2.0);
        let y = rng.random_range(-3.0..3.0);
        let op = OperatorSequence::explicit(vec![lam]).unwrap();
        let prior = PriorSpec::new(vec![mu], vec![PriorVariance::Proper(var)]).unwrap();
        let obs = Observation::new(vec![y], eps, 0).unwrap();
        let s = coordinate_posterior(&prior, &op, &obs).unwrap();
        let (gm, gv) = grid_posterior(eps, lam, var, mu, y);
        assert!(
            (s.post_mean()[0] - gm).abs() <= 1e-6,
            "{eps} {lam} {var} {mu} {y}"
        );
        assert!((s.post_var()[0] - gv).abs() <= 1e-6 * gv.max(1.0));
    }
}

#[test]
fn observation_moments() {
    let n = 100_000;
    let op = make_operator(Decay::Constant, 0.0, n).unwrap();
    let obs = simulate_observation(&ParameterSequence::zeros(n), &op, 0.25, 3).unwrap();
    let sq: Vec<f64> = obs.y.iter().map(|y| y * y).collect();
    let (m, se) = mean_sd(&sq);
    assert!((m - 0.25).abs() <= 3.0 * se, "{m} ± {se}");

    let theta = ParameterSequence::explicit(vec![0.7; n]);
    let op = OperatorSequence::explicit(vec![0.5; n]).unwrap();
    let obs = simulate_observation(&theta, &op, 0.1, 4).unwrap();
    let (m, se) = mean_sd(&obs.y);
    assert!((m - 0.35).abs() <= 3.0 * se);
    let centred: Vec<f64> = obs.y.iter().map(|y| (y - 0.35).powi(2)).collect();
    let (v, se) = mean_sd(&centred);
    assert!((v - 0.1).abs() <= 3.0 * se);
}

#[test]
fn vanishing_noise_recovers_parameter_over_many_seeds() {
    // With ε = 1e-12 and Λ ≤ 10, ‖Y/λ − θ‖² is εΣΛ_j times a χ²₁₀ variable,
    // so it exceeds 1e-8 only if that variable exceeds 1e4/ΣΛ.
    let op = make_operator(Decay::Polynomial, 0.5, 10).unwrap();
    let theta = ParameterSequence::polynomial(1.0, 1.0, 10).unwrap();
    let big: f64 = op.big_lambda().iter().sum();
    let tail = ChiSquared::new(10.0).unwrap().sf(1e-8 / (1e-12 * big));
    assert!(tail < 1e-3);
    let failures = (0..1000)
        .filter(|&seed| {
            let obs = simulate_observation(&theta, &op, 1e-12, seed).unwrap();
            let err: f64 = obs
                .y
                .iter()
                .zip(op.lambda())
                .zip(theta.values())
                .map(|((y, l), t)| (y / l - t).powi(2))
                .sum();
            err.sqrt() >= 1e-4
        })
        .count();
    assert!(failures <= 1);
}

#[test]
fn sieve_draws_match_conditional_decomposition() {
    let n = 30;
    let m = 12;
    let eps = 0.02;
    let op = make_operator(Decay::Polynomial, 0.5, n).unwrap();
    let theta = ParameterSequence::polynomial(1.0, 1.2, n).unwrap();
    let prior = PriorSpec::variance_floor(vec![0.1; n], &op, eps, 1.0).unwrap();
    let obs = simulate_observation(&theta, &op, eps, 5).unwrap();
    let s = coordinate_posterior(&prior, &op, &obs).unwrap();
    let draws = sample_sieve_posterior(m, &s, &prior, 20_000, 6).unwrap();
    let t = theta.values();
    let dist: Vec<f64> = draws
        .iter()
        .map(|d| d.values().iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let bias: f64 = (m..n).map(|j| (0.1 - t[j]).powi(2)).sum();
    let var: f64 = s.post_var()[..m].iter().sum();
    let shift: f64 = (0..m).map(|j| (s.post_mean()[j] - t[j]).powi(2)).sum();
    let (mean, se) = mean_sd(&dist);
    assert!((mean - (bias + var + shift)).abs() <= 3.0 * se);
    for d in &draws {
        assert_eq!(&d.values()[m..], &prior.means()[m..]);
    }
}

/// `max(b_m, ε Σ_{j≤m} Λ_j)` with `b_m` summed directly.
fn brute_rates(theta: &[f64], mu: &[f64], big: &[f64], eps: f64) -> Vec<f64> {
    (1..=theta.len())
        .map(|m| {
            let b: f64 = (m..theta.len()).map(|j| (theta[j] - mu[j]).powi(2)).sum();
            let v: f64 = eps * big[..m].iter().sum::<f64>();
            b.max(v)
        })
        .collect()
}

fn first_min(xs: &[f64]) -> usize {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    xs.iter().position(|&x| x == min).unwrap() + 1
}

#[test]
fn oracle_dimension_matches_brute_force_scan() {
    let n = 1000;
    let theta: Vec<f64> = (1..=n).map(|j| 1.0 / j as f64).collect();
    let op = make_operator(Decay::Constant, 0.0, n).unwrap();
    let prior = PriorSpec::improper(n);
    let sel = oracle_dimension(
        &ParameterSequence::explicit(theta.clone()),
        &prior,
        &op,
        1e-3,
    )
    .unwrap();
    let rates = brute_rates(&theta, &vec![0.0; n], op.big_lambda(), 1e-3);
    let m = first_min(&rates);
    assert_eq!(sel.dimension, m);
    assert!((sel.rate - rates[m - 1]).abs() <= 1e-12 * rates[m - 1]);
}

#[test]
fn oracle_dimension_sits_at_the_crossing() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = 2000;
        let a = rng.random_range(0.0..2.0);
        let q = rng.random_range(0.6..3.0);
        let scale = rng.random_range(0.2..3.0);
        let eps = 10f64.powf(rng.random_range(-5.0..-2.0));
        let op = make_operator(Decay::Polynomial, a, n).unwrap();
        let theta: Vec<f64> = (1..=n).map(|j| scale * (j as f64).powf(-q)).collect();
        let sel = oracle_dimension(
            &ParameterSequence::explicit(theta.clone()),
            &PriorSpec::improper(n),
            &op,
            eps,
        )
        .unwrap();
        let big = op.big_lambda();
        let crossing = (1..=n)
            .find(|&m| {
                let b: f64 = theta[m..].iter().map(|t| t * t).sum();
                b <= eps * big[..m].iter().sum::<f64>()
            })
            .expect("variance overtakes bias");
        assert!(sel.dimension.abs_diff(crossing) <= 1, "{a} {q} {eps}");
    }
}

#[test]
fn minimax_dimension_scales_like_the_illustration() {
    let n = 1_000_000;
    let op = make_operator(Decay::Polynomial, 1.0, n).unwrap();
    let class = WeightedClass::polynomial(1.0, 1.0, n).unwrap();
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&e| {
            let m = minimax_dimension(&class, &op, e).unwrap().dimension;
            (e.ln(), (m as f64).ln())
        })
        .unzip();
    let fit = igssm::numeric::fit_line(&xs, &ys);
    assert!((fit.slope + 0.2).abs() < 0.03, "slope {}", fit.slope);
    let rates: Vec<f64> = grid
        .iter()
        .map(|&e| minimax_dimension(&class, &op, e).unwrap().rate)
        .collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn brackets_match_direct_scan() {
    let n = 1000;
    let eps = 1e-3;
    let theta: Vec<f64> = (1..=n).map(|j| 1.0 / j as f64).collect();
    let op = make_operator(Decay::Constant, 0.0, n).unwrap();
    let constants = BracketConstants {
        d: 1.0,
        c_lambda: 1.0,
        l_lambda: 1.0,
    };
    let br = bracket_dimensions(
        &ParameterSequence::explicit(theta.clone()),
        &PriorSpec::improper(n),
        &op,
        eps,
        BracketMode::Oracle,
        &constants,
    )
    .unwrap();
    let rates = brute_rates(&theta, &vec![0.0; n], op.big_lambda(), eps);
    let star = first_min(&rates);
    let phi = rates[star - 1];
    let bias = |m: usize| -> f64 { theta[m..].iter().map(|t| t * t).sum() };
    let lower = (1..=star).find(|&m| bias(m) <= 16.0 * phi).unwrap();
    let upper = (star..=n)
        .rev()
        .find(|&m| m as f64 <= 5.0 * phi / eps)
        .unwrap();
    assert_eq!((br.lower, br.center, br.upper), (lower, star, upper));
    assert!(br.lower <= br.center && br.center <= br.upper);
}

#[test]
fn central_chi_square_audit_against_exact_survival() {
    let cfg = TailBoundConfig::new(vec![0.0; 10], vec![1.0; 10], 1.0).unwrap();
    let audit = audit_tail_bounds(&cfg, 100_000, 1).unwrap();
    let exact = ChiSquared::new(10.0).unwrap().sf(25.0);
    assert!((exact - 0.0053).abs() < 1e-4);
    let up = audit.upper.empirical;
    assert!((up.estimate - exact).abs() <= 3.0 * up.std_error + 1e-4);
    assert!((audit.upper.bound - (-2.5f64).exp()).abs() < 1e-15);
    assert!(audit.pass());

    let vacuous = TailBoundConfig::new(vec![0.0; 4], vec![1.0; 4], 0.0).unwrap();
    let audit = audit_tail_bounds(&vacuous, 10_000, 1).unwrap();
    assert_eq!((audit.lower.bound, audit.upper.bound), (1.0, 1.0));
    assert!(audit.pass());
}

#[test]
fn noncentral_audit_respects_formula() {
    let cfg = TailBoundConfig::new(vec![1.0; 5], vec![1.0; 5], 0.5).unwrap();
    // v = 5, r = 5, t = 1: exp(−0.5·0.5·15/4)
    let bound = (-0.25f64 * 15.0 / 4.0).exp();
    let audit = audit_tail_bounds(&cfg, 100_000, 8).unwrap();
    assert!((audit.lower.bound - bound).abs() < 1e-15);
    assert!((audit.upper.bound - bound).abs() < 1e-15);
    assert!(audit.expectation.is_none());
    assert!(audit.pass());
}

fn improper_setup(
    n: usize,
    eps: f64,
    seed: u64,
) -> (OperatorSequence, PriorSpec, igssm::PosteriorSummary) {
    let op = make_operator(Decay::Polynomial, 0.5, n).unwrap();
    let theta = ParameterSequence::polynomial(1.0, 1.0, n).unwrap();
    let prior = PriorSpec::improper(n);
    let obs = simulate_observation(&theta, &op, eps, seed).unwrap();
    let s = coordinate_posterior(&prior, &op, &obs).unwrap();
    (op, prior, s)
}

#[test]
fn hierarchical_draws_follow_the_mixture() {
    let eps = 0.02;
    let (op, prior, s) = improper_setup(40, eps, 12);
    let dist = dimension_posterior(&s, &prior, &op, eps, 1.0).unwrap();
    let est = estimate_from_distribution(&s, &prior, &dist);
    let n_draws = 100_000;
    let draws = sample_hierarchical_posterior(&s, &prior, &op, eps, 1.0, n_draws, 13).unwrap();
    for m in 1..=dist.support_max() {
        let hits: Vec<f64> = draws
            .iter()
            .map(|d| f64::from(u8::from(d.dimension == m)))
            .collect();
        let (p, se) = mean_sd(&hits);
        let p_true = dist.prob(m);
        let se = se.max((p_true * (1.0 - p_true) / n_draws as f64).sqrt());
        assert!((p - p_true).abs() <= 3.0 * se + 1e-12, "m = {m}");
    }
    for j in [0, 2, 5] {
        let xs: Vec<f64> = draws.iter().map(|d| d.theta.values()[j]).collect();
        let (mean, se) = mean_sd(&xs);
        assert!((mean - est.values()[j]).abs() <= 3.0 * se, "coordinate {j}");
    }
}

#[test]
fn extra_signal_moves_mass_upward() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..50 {
        let eps = 10f64.powf(rng.random_range(-3.0..-1.0));
        let (op, prior, s) = improper_setup(60, eps, trial);
        let base = dimension_posterior(&s, &prior, &op, eps, 1.0).unwrap();
        let k = rng.random_range(1..=base.support_max());
        let mut mean = s.post_mean().to_vec();
        mean[k - 1] += mean[k - 1].signum() * rng.random_range(0.01..1.0);
        let bumped = igssm::PosteriorSummary::new(s.post_var().to_vec(), mean).unwrap();
        let after = dimension_posterior(&bumped, &prior, &op, eps, 1.0).unwrap();
        let tail = |d: &igssm::DimensionDistribution| {
            (k..=d.support_max()).map(|m| d.prob(m)).sum::<f64>()
        };
        assert!(tail(&after) >= tail(&base) - 1e-12);
    }
}

#[test]
fn pure_variance_mise() {
    let n = 100;
    let eps = 1e-8;
    let op = make_operator(Decay::Constant, 0.0, n).unwrap();
    let theta = ParameterSequence::explicit(vec![0.3; n]);
    let est = mc_mise(
        &EstimatorKind::Fixed(n),
        &theta,
        &PriorSpec::improper(n),
        &op,
        eps,
        400,
        3,
    )
    .unwrap();
    assert!((est.estimate - eps * n as f64).abs() <= 3.0 * est.std_error);
}

#[test]
fn oracle_mise_at_prior_mean() {
    let n = 1000;
    let eps = 1e-3;
    let op = make_operator(Decay::Polynomial, 1.0, n).unwrap();
    let prior = PriorSpec::variance_floor(vec![0.0; n], &op, eps, 1.0).unwrap();
    let theta = ParameterSequence::zeros(n);
    let phi = oracle_dimension(&theta, &prior, &op, eps).unwrap().rate;
    let est = mc_mise(&EstimatorKind::Oracle, &theta, &prior, &op, eps, 500, 4).unwrap();
    assert!(est.estimate <= 2.0 * phi + 3.0 * est.std_error);
}

#[test]
fn adaptive_tracks_oracle_on_paired_seeds() {
    for eps in [1e-2, 1e-3, 1e-4] {
        let n = (1.0 / eps) as usize;
        let op = make_operator(Decay::Polynomial, 1.0, n).unwrap();
        let prior = PriorSpec::variance_floor(vec![0.0; n], &op, eps, 1.0).unwrap();
        let theta = ParameterSequence::polynomial(0.42, 1.6, n).unwrap();
        let est = mc_mise_many(
            &[
                EstimatorKind::Oracle,
                EstimatorKind::Adaptive { c_lambda: 1.0 },
            ],
            &theta,
            &prior,
            &op,
            eps,
            200,
            5,
        )
        .unwrap();
        let ratio = est[1].estimate / est[0].estimate;
        assert!(ratio > 0.2 && ratio < 5.0, "ε = {eps}: ratio {ratio}");
    }
}

#[test]
fn concentration_extremes() {
    let n = 100;
    let eps = 0.01;
    let op = make_operator(Decay::Polynomial, 1.0, n).unwrap();
    let prior = PriorSpec::variance_floor(vec![0.0; n], &op, eps, 1.0).unwrap();
    let theta = ParameterSequence::polynomial(0.42, 1.6, n).unwrap();
    let sel = oracle_dimension(&theta, &prior, &op, eps).unwrap();
    let kind = PosteriorKind::Sieve(sel.dimension);
    let wide = mc_concentration(kind, &theta, &prior, &op, eps, 1e6, sel.rate, 50, 100, 1).unwrap();
    assert!(wide.estimate > 0.999);
    let empty = mc_concentration(
        kind,
        &theta,
        &prior,
        &op,
        eps,
        1.0,
        100.0 * sel.rate,
        50,
        100,
        1,
    )
    .unwrap();
    assert_eq!(empty.estimate, 0.0);
    let hier = PosteriorKind::Hierarchical { c_lambda: 1.0 };
    let wide = mc_concentration(hier, &theta, &prior, &op, eps, 1e6, sel.rate, 50, 100, 1).unwrap();
    assert!(wide.estimate > 0.999);
}

#[test]
fn max_dimension_for_inverse_square_operator() {
    let op = make_operator(Decay::Polynomial, 1.0, 1000).unwrap();
    assert_eq!(max_dimension(&op, 1e-2).unwrap(), 10);
}
