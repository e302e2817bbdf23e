//! Episode simulation, regret accounting, regret-bound evaluators, and
//! empirical coverage of the high-probability bounds.
//!
//! One episode draws `Z_1..Z_T` from `P`; before each symbol is revealed
//! the learner and the `P`-optimal policy both predict from the same
//! prefix. The cumulative regret after `t` rounds is
//! `Δ_t = Σ_{t' ≤ t} ℓ(B_t', Z_t') − ℓ(B*_t', Z_t')` and the average
//! per-round regret is `Δ = Δ_T / T`.
//!
//! Bound evaluators (natural logarithms throughout):
//!
//! ```text
//! expected, TV:        E Δ ≤ L V_T
//! expected, KL:        E Δ ≤ L √(KL / 2T)
//! path-wise, w.p. 1-δ: Δ < 2L V̂_T + (2√2 L / √T) √ln(1/δ)
//! w.p. 1-δ:            Δ < 4L V_T / δ + (2√2 L / √T) √ln(2/δ)
//! w.p. 1-δ:            Δ < 2L √(KL/T) / √δ + (2√2 L / √T) √ln(2/δ)
//! ```

use std::fmt;

use rayon::prelude::*;

use crate::divergence::{DivergenceTrace, TraceRecorder};
use crate::error::{invalid, Result};
use crate::loss::LossFunction;
use crate::predictor::Policy;
use crate::process::SequentialDistribution;
use crate::rng::StreamSeed;

/// Quantile levels reported per round.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// One episode's losses and regret.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub sequence: Vec<usize>,
    pub losses_learner: Vec<f64>,
    pub losses_optimal: Vec<f64>,
    /// `Δ_t` for `t = 1..=T`.
    pub cumulative: Vec<f64>,
    /// `Δ = Δ_T / T`.
    pub average: f64,
    pub divergence: Option<DivergenceTrace>,
    pub seed: StreamSeed,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.cumulative.len()
    }

    /// `Δ_t / t` for every round.
    pub fn running_average(&self) -> impl Iterator<Item = f64> + '_ {
        self.cumulative
            .iter()
            .enumerate()
            .map(|(i, c)| c / (i + 1) as f64)
    }
}

fn check_episode_inputs(
    p: &SequentialDistribution,
    learner: &Policy,
    optimal: &Policy,
    loss: &LossFunction,
) -> Result<()> {
    if loss.alphabet() != p.alphabet() {
        return Err(invalid("loss alphabet differs from the process alphabet"));
    }
    for pol in [learner, optimal] {
        if pol.num_predictions() != loss.num_predictions() {
            return Err(invalid(format!(
                "policy '{}' predicts over {} values, the loss over {}",
                pol.description(),
                pol.num_predictions(),
                loss.num_predictions()
            )));
        }
    }
    Ok(())
}

/// Plays one episode of the prediction game against a draw from `P`.
pub fn run_episode(
    p: &SequentialDistribution,
    learner: &Policy,
    optimal: &Policy,
    loss: &LossFunction,
    seed: StreamSeed,
) -> Result<RegretTrace> {
    episode(p, None, learner, optimal, loss, seed)
}

/// As [`run_episode`], also recording `v_t` and `d_t` between `P` and `Q`
/// along the drawn sequence.
pub fn run_episode_traced(
    p: &SequentialDistribution,
    q: &SequentialDistribution,
    learner: &Policy,
    optimal: &Policy,
    loss: &LossFunction,
    seed: StreamSeed,
) -> Result<RegretTrace> {
    p.check_compatible(q)?;
    episode(p, Some(q), learner, optimal, loss, seed)
}

fn episode(
    p: &SequentialDistribution,
    q: Option<&SequentialDistribution>,
    learner: &Policy,
    optimal: &Policy,
    loss: &LossFunction,
    seed: StreamSeed,
) -> Result<RegretTrace> {
    check_episode_inputs(p, learner, optimal, loss)?;
    let horizon = p.horizon();
    let mut rng = seed.rng();
    let mut nature = p.cursor();
    let mut surrogate = q.map(|q| q.cursor());
    let mut recorder = q.map(|_| TraceRecorder::with_capacity(horizon));
    let mut lr = learner.runner();
    let mut opt = optimal.runner();

    let mut losses_learner = Vec::with_capacity(horizon);
    let mut losses_optimal = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut running = 0.0;
    for _ in 0..horizon {
        let kernel = nature.pmf()?;
        if let (Some(sc), Some(rec)) = (&surrogate, &mut recorder) {
            rec.record(&kernel, &sc.pmf()?);
        }
        let b = lr.decide()?;
        let b_star = opt.decide()?;
        let z = kernel.sample_with(rand::Rng::random(&mut rng));
        let (l, l_star) = (loss.eval(b, z), loss.eval(b_star, z));
        running += l - l_star;
        losses_learner.push(l);
        losses_optimal.push(l_star);
        cumulative.push(running);
        nature.push(z);
        if let Some(sc) = &mut surrogate {
            sc.push(z);
        }
        lr.push(z);
        opt.push(z);
    }
    Ok(RegretTrace {
        sequence: nature.into_history(),
        losses_learner,
        losses_optimal,
        average: running / horizon as f64,
        cumulative,
        divergence: recorder.map(TraceRecorder::finish),
        seed,
    })
}

/// Runs `runs` episodes in parallel; episode `i` uses stream `(base_seed, i)`.
/// The result is in run-index order regardless of scheduling.
pub fn monte_carlo_traces<F>(runs: usize, base_seed: u64, episode: F) -> Result<Vec<RegretTrace>>
where
    F: Fn(StreamSeed) -> Result<RegretTrace> + Sync,
{
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    (0..runs as u64)
        .into_par_iter()
        .map(|i| episode(StreamSeed::new(base_seed, i)))
        .collect()
}

/// Per-round statistics of `Δ_t / t` across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub t: usize,
    pub mean: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSummary {
    pub rounds: Vec<RoundSummary>,
    pub runs: usize,
    pub base_seed: u64,
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

impl RegretSummary {
    /// Aggregates running-average regret curves, all of the same length.
    pub fn from_traces(traces: &[RegretTrace], base_seed: u64) -> Result<Self> {
        let horizon = traces
            .first()
            .map(RegretTrace::horizon)
            .ok_or_else(|| invalid("no traces"))?;
        if traces.iter().any(|t| t.horizon() != horizon) {
            return Err(invalid("traces have different horizons"));
        }
        let n = traces.len() as f64;
        let rounds = (0..horizon)
            .into_par_iter()
            .map(|i| {
                let denom = (i + 1) as f64;
                let mut col: Vec<f64> = traces.iter().map(|tr| tr.cumulative[i] / denom).collect();
                let mean = col.iter().sum::<f64>() / n;
                col.sort_by(f64::total_cmp);
                let quantiles = QUANTILE_LEVELS.map(|q| quantile_sorted(&col, q));
                RoundSummary {
                    t: i + 1,
                    mean,
                    quantiles,
                }
            })
            .collect();
        Ok(Self {
            rounds,
            runs: traces.len(),
            base_seed,
        })
    }
}

/// Runs `runs` episodes of the fixed problem and summarises them.
pub fn monte_carlo_summary(
    p: &SequentialDistribution,
    learner: &Policy,
    optimal: &Policy,
    loss: &LossFunction,
    runs: usize,
    base_seed: u64,
) -> Result<RegretSummary> {
    let traces = monte_carlo_traces(runs, base_seed, |seed| {
        run_episode(p, learner, optimal, loss, seed)
    })?;
    RegretSummary::from_traces(&traces, base_seed)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

fn check_horizon(t: usize) -> Result<()> {
    if t == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    Ok(())
}

fn deviation_term(l: f64, t: usize, log_arg: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * l / (t as f64).sqrt() * log_arg.ln().max(0.0).sqrt()
}

/// `L · V_T`.
pub fn bound_expected_tv(l: f64, v_expected: f64) -> f64 {
    l * v_expected
}

/// `L √(KL / 2T)`; infinite when `KL` is.
pub fn bound_expected_kl(l: f64, t: usize, kl: f64) -> f64 {
    if kl.is_infinite() {
        return f64::INFINITY;
    }
    l * (kl / (2.0 * t as f64)).sqrt()
}

/// `2L V̂_T + (2√2 L/√T) √ln(1/δ)`.
pub fn bound_pathwise_tv(l: f64, t: usize, delta: f64, v_hat: f64) -> Result<f64> {
    check_delta(delta)?;
    check_horizon(t)?;
    Ok(2.0 * l * v_hat + deviation_term(l, t, 1.0 / delta))
}

/// `4L V_T / δ + (2√2 L/√T) √ln(2/δ)`.
pub fn bound_highprob_tv(l: f64, t: usize, delta: f64, v_expected: f64) -> Result<f64> {
    check_delta(delta)?;
    check_horizon(t)?;
    Ok(4.0 * l * v_expected / delta + deviation_term(l, t, 2.0 / delta))
}

/// `2L √(KL/T) / √δ + (2√2 L/√T) √ln(2/δ)`; infinite when `KL` is.
pub fn bound_highprob_kl(l: f64, t: usize, delta: f64, kl: f64) -> Result<f64> {
    check_delta(delta)?;
    check_horizon(t)?;
    if kl.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * l * (kl / t as f64).sqrt() / delta.sqrt() + deviation_term(l, t, 2.0 / delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    ExpectedTv,
    ExpectedKl,
    PathwiseTv,
    HighProbTv,
    HighProbKl,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExpectedTv => "expected-tv",
            Self::ExpectedKl => "expected-kl",
            Self::PathwiseTv => "pathwise-tv",
            Self::HighProbTv => "highprob-tv",
            Self::HighProbKl => "highprob-kl",
        })
    }
}

/// Quantities a bound may depend on; unused fields stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundInputs {
    pub loss_bound: f64,
    pub horizon: usize,
    pub delta: Option<f64>,
    pub v_expected: Option<f64>,
    pub v_hat: Option<f64>,
    pub joint_kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub inputs: BoundInputs,
    pub value: f64,
    pub violation_fraction: Option<f64>,
}

impl BoundReport {
    /// Evaluates `kind` from `inputs`, failing when a needed input is absent.
    pub fn evaluate(kind: BoundKind, inputs: BoundInputs) -> Result<Self> {
        let need =
            |x: Option<f64>, name: &str| x.ok_or_else(|| invalid(format!("{kind} needs {name}")));
        let l = inputs.loss_bound;
        if !(l >= 0.0) {
            return Err(invalid(format!("loss bound must be non-negative, got {l}")));
        }
        check_horizon(inputs.horizon)?;
        let t = inputs.horizon;
        let value = match kind {
            BoundKind::ExpectedTv => bound_expected_tv(l, need(inputs.v_expected, "V_T")?),
            BoundKind::ExpectedKl => bound_expected_kl(l, t, need(inputs.joint_kl, "KL")?),
            BoundKind::PathwiseTv => bound_pathwise_tv(
                l,
                t,
                need(inputs.delta, "delta")?,
                need(inputs.v_hat, "V-hat")?,
            )?,
            BoundKind::HighProbTv => bound_highprob_tv(
                l,
                t,
                need(inputs.delta, "delta")?,
                need(inputs.v_expected, "V_T")?,
            )?,
            BoundKind::HighProbKl => bound_highprob_kl(
                l,
                t,
                need(inputs.delta, "delta")?,
                need(inputs.joint_kl, "KL")?,
            )?,
        };
        Ok(Self {
            kind,
            inputs,
            value,
            violation_fraction: None,
        })
    }
}

/// A high-probability statement checked against a batch of traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageCriterion {
    /// `Δ < 2L V̂_T + …`; needs divergence traces.
    PathwiseTv { loss_bound: f64, delta: f64 },
    HighProbTv {
        loss_bound: f64,
        delta: f64,
        v_expected: f64,
    },
    HighProbKl {
        loss_bound: f64,
        delta: f64,
        joint_kl: f64,
    },
    /// `V̂_T < V_T / δ`; needs divergence traces.
    TailTv { delta: f64, v_expected: f64 },
    /// `V̂_T < √(D_T / 2δ)`; needs divergence traces.
    TailKl { delta: f64, d_expected: f64 },
}

impl CoverageCriterion {
    pub fn delta(&self) -> f64 {
        match *self {
            Self::PathwiseTv { delta, .. }
            | Self::HighProbTv { delta, .. }
            | Self::HighProbKl { delta, .. }
            | Self::TailTv { delta, .. }
            | Self::TailKl { delta, .. } => delta,
        }
    }

    /// Whether this trace falls outside the statement. Boundary values count
    /// as violations since the statements are strict inequalities.
    pub fn violated_by(&self, trace: &RegretTrace) -> Result<bool> {
        let t = trace.horizon();
        let v_hat = || {
            trace
                .divergence
                .as_ref()
                .map(|d| d.avg_v)
                .ok_or_else(|| invalid("coverage criterion needs a trace with divergence data"))
        };
        Ok(match *self {
            Self::PathwiseTv { loss_bound, delta } => {
                trace.average >= bound_pathwise_tv(loss_bound, t, delta, v_hat()?)?
            }
            Self::HighProbTv {
                loss_bound,
                delta,
                v_expected,
            } => trace.average >= bound_highprob_tv(loss_bound, t, delta, v_expected)?,
            Self::HighProbKl {
                loss_bound,
                delta,
                joint_kl,
            } => trace.average >= bound_highprob_kl(loss_bound, t, delta, joint_kl)?,
            Self::TailTv { delta, v_expected } => {
                check_delta(delta)?;
                v_hat()? >= v_expected / delta
            }
            Self::TailKl { delta, d_expected } => {
                check_delta(delta)?;
                v_hat()? >= (d_expected / (2.0 * delta)).sqrt()
            }
        })
    }
}

/// Fraction of traces violating `criterion`.
pub fn empirical_coverage(traces: &[RegretTrace], criterion: &CoverageCriterion) -> Result<f64> {
    if traces.is_empty() {
        return Err(invalid("no traces"));
    }
    let mut violations = 0usize;
    for tr in traces {
        violations += criterion.violated_by(tr)? as usize;
    }
    Ok(violations as f64 / traces.len() as f64)
}

/// `k · √(p(1−p)/n)`, the binomial slack used when comparing an observed
/// frequency against a probability `p`.
pub fn binomial_slack(p: f64, n: usize, k: f64) -> f64 {
    k * (p * (1.0 - p) / n as f64).sqrt()
}
