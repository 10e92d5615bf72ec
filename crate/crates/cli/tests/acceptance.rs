//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Run with
//! `cargo test --release -p igssm-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use igssm::hierarchical::estimate_from_distribution;
use igssm::lab::{
    audit_tail_bounds, deviation_thresholds, mc_mise_many, mc_posterior_event, non_decreasing,
    non_increasing, random_tail_suite, DistanceEvent, EstimatorKind, PosteriorKind,
};
use igssm::model::{make_operator, Decay, Observation, OperatorSequence, ParameterSequence};
use igssm::numeric::ceil_inv;
use igssm::posterior::{PriorSpec, PriorVariance};
use igssm::select::{c_lambda, check_submultiplicativity, distance_sq, l_lambda};
use igssm::{
    check_assumptions, coordinate_posterior, dimension_posterior, max_dimension, oracle_dimension,
    risk_decomposition, sieve_posterior_mean, simulate_observation, CompositeConstants, MCEstimate,
    PriorRule,
};
use igssm_cli::run::{concentration_section, report_grid, run_experiment, Scope, TREND_SLACK};
use igssm_cli::{Experiment, LoadedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLOPE_TOLERANCE: f64 = 0.08;
const CONCENTRATION_FLOOR: f64 = 0.9;
const ESCAPE_CEILING: f64 = 0.1;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn experiment(name: &str) -> Experiment {
    Experiment::new(LoadedConfig::load(&configs().join(name)).expect("bundled config"))
        .expect("bundled config")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mixture_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(1..=200);
        let eps = 10f64.powf(rng.random_range(-4.0..-0.5));
        let op = make_operator(Decay::Polynomial, rng.random_range(0.0..1.0), n).unwrap();
        let theta = ParameterSequence::polynomial(
            rng.random_range(0.1..3.0),
            rng.random_range(0.6..2.5),
            n,
        )
        .unwrap();
        let improper_share = rng.random_range(0.0..1.0);
        let (mut means, mut vars) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            if rng.random_bool(improper_share) {
                means.push(0.0);
                vars.push(PriorVariance::Improper);
            } else {
                means.push(rng.random_range(-0.5..0.5));
                vars.push(PriorVariance::Proper(
                    10f64.powf(rng.random_range(-3.0..1.0)),
                ));
            }
        }
        let prior = PriorSpec::new(means, vars).unwrap();
        let obs = simulate_observation(&theta, &op, eps, i).unwrap();
        let s = coordinate_posterior(&prior, &op, &obs).unwrap();
        let c = rng.random_range(1.0..3.0);
        let dist = dimension_posterior(&s, &prior, &op, eps, c).unwrap();
        let est = estimate_from_distribution(&s, &prior, &dist);
        let mut mixture = vec![0.0; n];
        for (m, &p) in dist.probs().iter().enumerate() {
            let sieve = sieve_posterior_mean(m + 1, &s, &prior).unwrap();
            for (acc, v) in mixture.iter_mut().zip(sieve.values()) {
                *acc += p * v;
            }
        }
        let gap = mixture
            .iter()
            .zip(est.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(gap);
    }
    check(
        worst <= 1e-12,
        format!("max ‖θ̂ − Σ p_m θ̂^m‖ = {worst:.2e} over 100 configs (≤ 1e-12)"),
    )
}

/// Trapezoid-rule posterior moments of one coordinate: a coarse pass finds
/// the mass, a fine pass over ±14 sd computes centred moments.
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

fn conjugacy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let eps = 10f64.powf(rng.random_range(-4.0..-0.3));
        let lam = rng.random_range(0.1..2.0);
        let var = 10f64.powf(rng.random_range(-2.0..1.0));
        let mu = rng.random_range(-2.0..2.0);
        let y = rng.random_range(-3.0..3.0);
        let op = OperatorSequence::explicit(vec![lam]).unwrap();
        let prior = PriorSpec::new(vec![mu], vec![PriorVariance::Proper(var)]).unwrap();
        let s =
            coordinate_posterior(&prior, &op, &Observation::new(vec![y], eps, 0).unwrap()).unwrap();
        let (gm, gv) = grid_posterior(eps, lam, var, mu, y);
        worst = worst
            .max((s.post_mean()[0] - gm).abs())
            .max((s.post_var()[0] - gv).abs());
    }
    check(
        worst <= 1e-6,
        format!("max |closed form − quadrature| = {worst:.2e} over 50 tuples (≤ 1e-6)"),
    )
}

fn tail_audit() -> Outcome {
    let suite = random_tail_suite(50, 7);
    let central = &suite[0];
    let central_ok = central.dimension() == 10
        && central.c() == 1.0
        && (central.probability_bound() - (-2.5f64).exp()).abs() < 1e-15;
    let mut failures = Vec::new();
    for (i, cfg) in suite.iter().enumerate() {
        let audit = audit_tail_bounds(cfg, 100_000, 7 + i as u64).unwrap();
        if !(audit.lower.pass && audit.upper.pass) {
            failures.push(i);
        }
    }
    check(
        central_ok && failures.is_empty(),
        format!(
            "{} configs × 1e5 draws, central bound {:.4}; failing configs {failures:?}",
            suite.len(),
            central.probability_bound()
        ),
    )
}

fn deviation_bounds() -> Outcome {
    let c = 0.1;
    let mut lines = Vec::new();
    let mut ok = true;
    for eps in [1e-2, 1e-3] {
        let n = ceil_inv(eps);
        let op = make_operator(Decay::Constant, 0.0, n).unwrap();
        let theta = ParameterSequence::polynomial(1.0, 1.0, n).unwrap();
        let prior = PriorSpec::improper(n);
        for m in [5, 10, 20] {
            let risk = risk_decomposition(&theta, &prior, &op, eps, m).unwrap();
            let t = deviation_thresholds(&risk, c).unwrap();
            let kind = PosteriorKind::Sieve(m);
            let run = |event| {
                mc_posterior_event(kind, &theta, &prior, &op, eps, event, 200, 500, 404).unwrap()
            };
            let above = run(DistanceEvent::Above(t.upper));
            let below = run(DistanceEvent::Below(t.lower));
            let pass = above.estimate <= t.upper_probability + 3.0 * above.std_error
                && below.estimate <= t.lower_probability + 3.0 * below.std_error;
            ok &= pass;
            lines.push(format!(
                "(m={m}, ε={eps:.0e}): {:.3} ≤ {:.3}, {:.3} ≤ {:.3}",
                above.estimate, t.upper_probability, below.estimate, t.lower_probability
            ));
        }
    }
    check(ok, lines.join("; "))
}

fn rate_reproduction() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (config, target) in [("pp_p1_a1.json", 0.4), ("direct_p1.json", 2.0 / 3.0)] {
        let exp = experiment(config);
        let out = run_experiment(&exp, Scope::Sweep).map_err(|e| e.to_string())?;
        let rates = out.report.rates.ok_or("no rate report")?;
        for name in ["minimax", "adaptive"] {
            let fit = rates.fit(name).ok_or(format!("no {name} fit"))?;
            let slope = fit.log_adjusted_slope.unwrap_or(fit.slope);
            let pass = (slope - target).abs() <= SLOPE_TOLERANCE;
            ok &= pass;
            lines.push(format!("{config} {name} {slope:.3} (target {target:.3})"));
        }
    }
    check(ok, lines.join("; "))
}

fn oracle_sandwich() -> Outcome {
    let exp = experiment("pp_p1_a1.json");
    let (report, _) = exp
        .assumption_report(&report_grid(&exp))
        .map_err(|e| e.to_string())?;
    let d = report.d;
    let mut ok = true;
    let mut lines = Vec::new();
    for eps in [1e-3, 1e-4] {
        let s = exp.setup(eps).map_err(|e| e.to_string())?;
        let star = oracle_dimension(&s.theta, &s.prior, &s.op, eps).unwrap();
        let max_dim = max_dimension(&s.op, eps).unwrap();
        let mut kinds = vec![EstimatorKind::Oracle];
        kinds.extend((1..=max_dim).map(EstimatorKind::Fixed));
        let est = mc_mise_many(&kinds, &s.theta, &s.prior, &s.op, eps, 200, 606).unwrap();
        let upper = (2.0 + distance_sq(&s.theta, &s.prior) / (d * d)) * star.rate;
        let lower = star.rate / (1.0 + 1.0 / d).powi(2);
        let best = est[1..]
            .iter()
            .min_by(|a, b| a.estimate.total_cmp(&b.estimate))
            .unwrap();
        let pass = est[0].estimate <= upper + 3.0 * est[0].std_error
            && best.estimate >= lower - 3.0 * best.std_error;
        ok &= pass;
        lines.push(format!(
            "ε={eps:.0e}: oracle {:.4e} ≤ {upper:.4e}, min fixed {:.4e} ≥ {lower:.4e}",
            est[0].estimate, best.estimate
        ));
    }
    check(ok, lines.join("; "))
}

/// Concentration rows of the bundled configuration, by posterior label.
fn concentration_series(label: &str) -> Result<Vec<MCEstimate>, String> {
    let exp = experiment("pp_p1_a1.json");
    let (report, big) = exp
        .assumption_report(&report_grid(&exp))
        .map_err(|e| e.to_string())?;
    let consts = CompositeConstants::from_report(&report, &big.op);
    let section = concentration_section(&exp, &report, &consts)
        .map_err(|e| e.to_string())?
        .ok_or("no concentration block")?;
    let mut rows: Vec<_> = section
        .rows
        .into_iter()
        .filter(|r| r.posterior == label)
        .collect();
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let grid: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    if grid != [1e-2, 1e-3, 1e-4] {
        return Err(format!("unexpected grid {grid:?}"));
    }
    Ok(rows
        .iter()
        .map(|r| MCEstimate {
            estimate: r.estimate,
            std_error: r.std_error,
            replications: r.replications,
            seed: 0,
        })
        .collect())
}

fn fmt_series(xs: &[MCEstimate]) -> String {
    xs.iter()
        .map(|x| format!("{:.3e}±{:.1e}", x.estimate, x.std_error))
        .collect::<Vec<_>>()
        .join(", ")
}

fn dimension_escape() -> Outcome {
    let xs = concentration_series("dimension_escape")?;
    let ok = non_increasing(&xs, TREND_SLACK) && xs[2].estimate <= ESCAPE_CEILING;
    check(ok, format!("escape mass {}", fmt_series(&xs)))
}

fn posterior_concentration() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for label in ["oracle_sieve", "hierarchical"] {
        let xs = concentration_series(label)?;
        ok &= non_decreasing(&xs, TREND_SLACK) && xs[2].estimate >= CONCENTRATION_FLOOR;
        lines.push(format!("{label}: {}", fmt_series(&xs)));
    }
    check(ok, lines.join("; "))
}

fn assumption_certification() -> Outcome {
    let op = make_operator(Decay::Polynomial, 1.0, 1_000_000).unwrap();
    let (c, _) = c_lambda(&op);
    let sub = check_submultiplicativity(&op);
    let (l, _) = l_lambda(&op);
    let poly_ok = c == 1.0 && sub.holds() && sub.verified_up_to >= 1_000_000 && l <= 3.0;

    let op = make_operator(Decay::Exponential, 0.5, 50).unwrap();
    let theta = ParameterSequence::polynomial(1.0, 1.0, 50).unwrap();
    let report = check_assumptions(&theta, &PriorRule::improper(), &op, None, &[1e-2]).unwrap();
    let witness = report.submultiplicativity.violation;
    // Λ_j = e^{j−1}, so Λ^max_{kl} > Λ^max_k Λ^max_l iff (k−1)(l−1) > 0.
    let witness_ok = witness.is_some_and(|(k, l)| {
        let big = |m: usize| ((m - 1) as f64).exp();
        k * l <= 50 && big(k * l) > big(k) * big(l)
    });
    check(
        poly_ok && !report.assumption3_holds && witness_ok,
        format!(
            "j⁻²: C = {c}, submultiplicative up to {}, L = {l:.4}; exp(1−j): witness {witness:?}",
            sub.verified_up_to
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("igssm-acceptance-{}", std::process::id()));
    let mut names: Vec<PathBuf> = fs::read_dir(configs())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for cfg in &names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let dirs = [tmp.join(format!("{stem}.a")), tmp.join(format!("{stem}.b"))];
        for dir in &dirs {
            let status = Command::new(env!("CARGO_BIN_EXE_igssm"))
                .arg("run")
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(dir)
                .arg("--quiet")
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("{stem}: run exited with {status}"));
            }
        }
        for entry in fs::read_dir(&dirs[0]).map_err(|e| e.to_string())? {
            let name = entry.unwrap().file_name();
            if !name.to_string_lossy().ends_with(".csv") {
                continue;
            }
            compared += 1;
            if fs::read(dirs[0].join(&name)).ok() != fs::read(dirs[1].join(&name)).ok() {
                mismatched.push(format!("{stem}/{}", name.to_string_lossy()));
            }
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    check(
        mismatched.is_empty() && compared > 0,
        format!(
            "{} configs, {compared} CSV pairs compared, mismatches {mismatched:?}",
            names.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "1 mixture identity",
            Duration::from_secs(10),
            mixture_identity,
        ),
        (
            "2 conjugacy oracle",
            Duration::from_secs(30),
            conjugacy_oracle,
        ),
        ("3 tail-bound audit", Duration::from_secs(120), tail_audit),
        (
            "4 deviation bounds",
            Duration::from_secs(300),
            deviation_bounds,
        ),
        (
            "5 rate reproduction",
            Duration::from_secs(600),
            rate_reproduction,
        ),
        (
            "6 oracle sandwich",
            Duration::from_secs(300),
            oracle_sandwich,
        ),
        (
            "7 dimension concentration",
            Duration::from_secs(300),
            dimension_escape,
        ),
        (
            "8 posterior concentration",
            Duration::from_secs(600),
            posterior_concentration,
        ),
        (
            "9 assumption certification",
            Duration::from_secs(30),
            assumption_certification,
        ),
        ("10 determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = if budget == Duration::MAX {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!(
            "{} {name} [{timing}]: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!pass);
    }
    if failed == 0 {
        println!("all 10 acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
