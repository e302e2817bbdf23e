//! Self-check suites run by `seqregret validate`.
//!
//! Each suite draws its own random instances from a seed, measures a few
//! statistics and reports pass or fail. Reports print as a single
//! `suite=<name> status=pass|fail key=value …` line.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::divergence::{expected_quantities, kl_divergence, tv_distance, Mode};
use crate::error::{invalid, Result};
use crate::impossibility::{
    build_instance, choose_parameters, closed_form_kl, closed_form_vt, verify_lower_bound,
    SearchCaps,
};
use crate::io::format_float;
use crate::loss::LossFunction;
use crate::markov::{
    laplace_mixture_predictive, mcmc_mixture_predictive, sample_theta, McmcConfig,
};
use crate::pmf::{Alphabet, Pmf};
use crate::predictor::{
    cross_entropy_argmin_check, mismatched_policy, optimal_policy, policy_matches_selector,
    q_from_policy_classification, Policy,
};
use crate::process::SequentialDistribution;
use crate::regret::{
    binomial_slack, empirical_coverage, monte_carlo_traces, run_episode_traced, CoverageCriterion,
};
use crate::rng::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Pinsker,
    Tensorization,
    ClosedForms,
    Mixture,
    Coverage,
    Representation,
    LowerBound,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Pinsker,
        Suite::Tensorization,
        Suite::ClosedForms,
        Suite::Mixture,
        Suite::Coverage,
        Suite::Representation,
        Suite::LowerBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Pinsker => "pinsker",
            Suite::Tensorization => "tensorization",
            Suite::ClosedForms => "closed-forms",
            Suite::Mixture => "mixture",
            Suite::Coverage => "coverage",
            Suite::Representation => "representation",
            Suite::LowerBound => "lower-bound",
        }
    }

    /// Trial count used when none is given.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Pinsker => 100_000,
            Suite::Tensorization => 50,
            Suite::ClosedForms => 1,
            Suite::Mixture => 20,
            Suite::Coverage => 10_000,
            Suite::Representation => 100,
            Suite::LowerBound => 10_000,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| invalid(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub trials: Option<usize>,
    /// Restricts the coverage suite to one confidence level.
    pub delta: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub stats: Vec<(String, String)>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            passed: true,
            stats: Vec::new(),
        }
    }

    fn stat(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.stats.push((key.into(), value.to_string()));
    }

    fn float(&mut self, key: impl Into<String>, value: f64) {
        self.stat(key, format_float(value));
    }

    fn require(&mut self, ok: bool) {
        self.passed &= ok;
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite={} status={}",
            self.suite.name(),
            if self.passed { "pass" } else { "fail" }
        )?;
        for (k, v) in &self.stats {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Uniform draw from the probability simplex.
pub fn random_pmf<R: Rng + ?Sized>(alphabet: Alphabet, rng: &mut R) -> Pmf {
    let w: Vec<f64> = (0..alphabet.size()).map(|_| Exp1.sample(rng)).collect();
    Pmf::from_weights(w).expect("exponential draws are positive")
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<SuiteReport> {
    let trials = opts.trials.unwrap_or(suite.default_trials());
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let seed = StreamSeed::new(opts.seed, suite as u64);
    match suite {
        Suite::Pinsker => pinsker(trials, seed),
        Suite::Tensorization => tensorization(trials, seed),
        Suite::ClosedForms => closed_forms(),
        Suite::Mixture => mixture(trials, seed),
        Suite::Coverage => coverage(trials, opts.delta, seed),
        Suite::Representation => representation(trials, seed),
        Suite::LowerBound => lower_bound(trials, opts.seed),
    }
}

fn pinsker(trials: usize, seed: StreamSeed) -> Result<SuiteReport> {
    let mut rng = seed.rng();
    let mut report = SuiteReport::new(Suite::Pinsker);
    let mut max_gap = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for _ in 0..trials {
        let a = Alphabet::new(rng.random_range(2..=8))?;
        let (p, q) = (random_pmf(a, &mut rng), random_pmf(a, &mut rng));
        let gap = tv_distance(&p, &q)? - (kl_divergence(&p, &q)? / 2.0).sqrt();
        max_gap = max_gap.max(gap);
        violations += (gap > 0.0) as usize;
    }
    report.stat("trials", trials);
    report.stat("violations", violations);
    report.float("max_gap", max_gap);
    report.require(violations == 0);
    Ok(report)
}

fn random_tabular<R: Rng + ?Sized>(
    alphabet: Alphabet,
    horizon: usize,
    rng: &mut R,
) -> Result<SequentialDistribution> {
    SequentialDistribution::tabular_from_fn(alphabet, horizon, |_| Ok(random_pmf(alphabet, rng)))
}

fn tensorization(trials: usize, seed: StreamSeed) -> Result<SuiteReport> {
    const TOL: f64 = 1e-9;
    let mut rng = seed.rng();
    let mut report = SuiteReport::new(Suite::Tensorization);
    let mut max_err: f64 = 0.0;
    for _ in 0..trials {
        let a = Alphabet::new(rng.random_range(2..=3))?;
        let t = rng.random_range(1..=6);
        let p = random_tabular(a, t, &mut rng)?;
        let q = random_tabular(a, t, &mut rng)?;
        let e = expected_quantities(&p, &q, Mode::Enumerate)?;
        max_err = max_err.max((e.joint_kl - t as f64 * e.d_expected).abs());
    }
    report.stat("pairs", trials);
    report.float("max_abs_error", max_err);
    report.float("tolerance", TOL);
    report.require(max_err <= TOL);
    Ok(report)
}

fn closed_forms() -> Result<SuiteReport> {
    const TOL: f64 = 1e-9;
    let (phi, psi, t) = (0.25, 0.125, 9);
    let inst = build_instance(phi, psi, t)?;
    let e = expected_quantities(&inst.p, &inst.q, Mode::Enumerate)?;
    let vt_err = (e.v_expected - closed_form_vt(phi, psi, t)).abs();
    let kl_err = (e.joint_kl - closed_form_kl(phi, psi, t)).abs();
    let mut report = SuiteReport::new(Suite::ClosedForms);
    report.float("v_t", e.v_expected);
    report.float("kl", e.joint_kl);
    report.float("v_t_error", vt_err);
    report.float("kl_error", kl_err);
    report.require(vt_err <= TOL && kl_err <= TOL);
    Ok(report)
}

/// Posterior-mean kernel of the current context by midpoint quadrature over
/// that context's row; binary alphabet only.
fn quadrature_predictive(memory: usize, history: &[usize], points: usize) -> Pmf {
    let contexts = 1usize << memory;
    let mut contexts_seen = Vec::with_capacity(history.len());
    let mut ctx = 0usize;
    for &z in history {
        contexts_seen.push(ctx);
        ctx = (ctx * 2 + z) % contexts;
    }
    let (mut n0, mut n1) = (0i32, 0i32);
    for (&c, &z) in contexts_seen.iter().zip(history) {
        if c == ctx {
            if z == 0 {
                n0 += 1;
            } else {
                n1 += 1;
            }
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..points {
        let x = (k as f64 + 0.5) / points as f64;
        let w = x.powi(n0) * (1.0 - x).powi(n1);
        num += x * w;
        den += w;
    }
    let p0 = num / den;
    Pmf::from_weights(vec![p0, 1.0 - p0]).expect("quadrature mass is positive")
}

fn mixture(trials: usize, seed: StreamSeed) -> Result<SuiteReport> {
    const QUAD_TOL: f64 = 1e-4;
    const TV_TOL: f64 = 0.02;
    let a = Alphabet::new(2)?;
    let mut rng = seed.rng();
    let mut report = SuiteReport::new(Suite::Mixture);
    let (mut quad_err, mut tv_max): (f64, f64) = (0.0, 0.0);
    let mut acceptance = 0.0;
    let config = McmcConfig::default();
    for h in 0..trials {
        let memory = 1 + h % 2;
        let len = rng.random_range(0..=40);
        let history: Vec<usize> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let exact = laplace_mixture_predictive(memory, a, &history)?;
        let quad = quadrature_predictive(memory, &history, 10_000);
        for (x, y) in exact.probs().iter().zip(quad.probs()) {
            quad_err = quad_err.max((x - y).abs());
        }
        for s in 0..3 {
            let cfg = McmcConfig {
                seed: seed.child((3 * h + s) as u64).base,
                ..config
            };
            let est = mcmc_mixture_predictive(memory, a, &history, &cfg)?;
            tv_max = tv_max.max(tv_distance(&est.pmf, &exact)?);
            acceptance += est.acceptance_rate;
        }
    }
    report.stat("histories", trials);
    report.float("max_quadrature_error", quad_err);
    report.float("max_mcmc_tv", tv_max);
    report.float("mean_acceptance_rate", acceptance / (3 * trials) as f64);
    report.require(quad_err <= QUAD_TOL && tv_max <= TV_TOL);
    Ok(report)
}

/// `pairs` random memory-1 chains on three symbols, paired up as `(P, Q)`.
pub fn random_markov_pairs(
    pairs: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<(SequentialDistribution, SequentialDistribution)>> {
    let a = Alphabet::new(3)?;
    (0..pairs as u64)
        .map(|i| {
            let p = sample_theta(1, a, StreamSeed::new(seed, 2 * i).child(0).base)?;
            let q = sample_theta(1, a, StreamSeed::new(seed, 2 * i + 1).child(0).base)?;
            Ok((
                SequentialDistribution::markov(p, horizon)?,
                SequentialDistribution::markov(q, horizon)?,
            ))
        })
        .collect()
}

fn coverage(episodes: usize, delta: Option<f64>, seed: StreamSeed) -> Result<SuiteReport> {
    const PAIRS: usize = 5;
    const HORIZON: usize = 50;
    let deltas: Vec<f64> = match delta {
        Some(d) if d > 0.0 && d < 1.0 => vec![d],
        Some(d) => return Err(invalid(format!("delta must lie in (0, 1), got {d}"))),
        None => vec![0.01, 0.05, 0.1, 0.25],
    };
    let mut report = SuiteReport::new(Suite::Coverage);
    report.stat("pairs", PAIRS);
    report.stat("horizon", HORIZON);
    report.stat("episodes", episodes);
    let loss = LossFunction::classification(Alphabet::new(3)?);
    let l = loss.bound();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for (i, (p, q)) in random_markov_pairs(PAIRS, HORIZON, seed.base ^ seed.stream)?
        .into_iter()
        .enumerate()
    {
        let exact = expected_quantities(&p, &q, Mode::Exact)?;
        let learner = mismatched_policy(q.clone(), loss.clone())?;
        let optimal = optimal_policy(p.clone(), loss.clone())?;
        let traces = monte_carlo_traces(episodes, seed.child(i as u64).base, |s| {
            run_episode_traced(&p, &q, &learner, &optimal, &loss, s)
        })?;
        for &d in &deltas {
            let criteria = [
                (
                    "pathwise-tv",
                    CoverageCriterion::PathwiseTv {
                        loss_bound: l,
                        delta: d,
                    },
                ),
                (
                    "highprob-tv",
                    CoverageCriterion::HighProbTv {
                        loss_bound: l,
                        delta: d,
                        v_expected: exact.v_expected,
                    },
                ),
                (
                    "highprob-kl",
                    CoverageCriterion::HighProbKl {
                        loss_bound: l,
                        delta: d,
                        joint_kl: exact.joint_kl,
                    },
                ),
                (
                    "tail-tv",
                    CoverageCriterion::TailTv {
                        delta: d,
                        v_expected: exact.v_expected,
                    },
                ),
                (
                    "tail-kl",
                    CoverageCriterion::TailKl {
                        delta: d,
                        d_expected: exact.d_expected,
                    },
                ),
            ];
            let slack = binomial_slack(d, episodes, 3.0);
            for (name, c) in criteria {
                let frac = empirical_coverage(&traces, &c)?;
                report.require(frac <= d + slack);
                // excess over the allowed level; negative means inside it
                let excess = frac - d - slack;
                match worst.iter_mut().find(|(n, _)| *n == name) {
                    Some((_, w)) => *w = w.max(excess),
                    None => worst.push((name, excess)),
                }
                if deltas.len() == 1 {
                    report.float(format!("{name}.pair{i}.violation_fraction"), frac);
                }
            }
        }
    }
    for &d in &deltas {
        report.float(format!("slack@{d}"), binomial_slack(d, episodes, 3.0));
    }
    for (name, w) in worst {
        report.float(format!("{name}.max_excess"), w);
    }
    Ok(report)
}

fn representation(trials: usize, seed: StreamSeed) -> Result<SuiteReport> {
    const DEPTH: usize = 3;
    let a = Alphabet::new(3)?;
    let loss = LossFunction::classification(a);
    let mut rng = seed.rng();
    let mut report = SuiteReport::new(Suite::Representation);
    let mut recovered = 0usize;
    for _ in 0..trials {
        let policy = random_table_policy(a, DEPTH, &mut rng);
        let q = q_from_policy_classification(policy.clone(), 0.6, 0.4, a, DEPTH + 1)?;
        let induced = mismatched_policy(q.clone(), loss.clone())?;
        let same = policy_matches_selector(&q, &policy, &loss, DEPTH)?
            && crate::predictor::verify_policy_representation(&q, &induced, &loss, DEPTH)?;
        recovered += same as usize;
    }
    let ce_trials = 10 * trials;
    let mut selected = 0usize;
    for _ in 0..ce_trials {
        let alph = Alphabet::new(rng.random_range(2..=6))?;
        let p = random_pmf(alph, &mut rng);
        let k = rng.random_range(1..=8);
        let pos = rng.random_range(0..=k);
        let mut cands: Vec<Pmf> = (0..k).map(|_| random_pmf(alph, &mut rng)).collect();
        cands.insert(pos, p.clone());
        selected += (cross_entropy_argmin_check(&p, &cands)? == pos) as usize;
    }
    report.stat("policies", trials);
    report.stat("recovered", recovered);
    report.stat("cross_entropy_trials", ce_trials);
    report.stat("cross_entropy_selected", selected);
    report.require(recovered == trials && selected == ce_trials);
    Ok(report)
}

/// A policy given by an independent uniform choice on every history of
/// length `0..=depth`; longer histories reuse their length-`depth` prefix.
pub fn random_table_policy<R: Rng + ?Sized>(
    alphabet: Alphabet,
    depth: usize,
    rng: &mut R,
) -> Policy {
    let s = alphabet.size();
    let total: usize = (0..=depth).map(|k| s.pow(k as u32)).sum();
    let table: Vec<usize> = (0..total).map(|_| rng.random_range(0..s)).collect();
    Policy::from_fn("random table", s, move |h| {
        let h = &h[..h.len().min(depth)];
        let offset: usize = (0..h.len()).map(|k| s.pow(k as u32)).sum();
        table[offset + h.iter().fold(0, |acc, &z| acc * s + z)]
    })
}

fn lower_bound(episodes: usize, seed: u64) -> Result<SuiteReport> {
    let eps = |t: u64, _d: f64| 1.0 / (t as f64).sqrt();
    let witness = choose_parameters(1.0, 0.5, 0.25, &eps, SearchCaps::default())?;
    let v = verify_lower_bound(&witness, episodes, seed)?;
    let mut report = SuiteReport::new(Suite::LowerBound);
    report.stat("n", witness.n);
    report.stat("horizon", witness.horizon);
    report.float("delta", witness.delta);
    report.float("r1", witness.r1);
    report.float("r2", witness.r2);
    report.float("exact_probability", v.exact_probability_r1);
    report.float("simulated_frequency", v.simulated_r1);
    report.float("slack", v.slack);
    report.require(v.passed);
    Ok(report)
}
