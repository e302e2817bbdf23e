//! A prediction problem on `{0, 1, 2}` showing that the `1/δ` and `1/√δ`
//! factors in the high-probability regret bounds cannot be improved
//! order-wise.
//!
//! `Q` draws i.i.d. from `(φ, 1−φ−ψ, ψ)`. `P` draws its first symbol from
//! the same marginal; if that symbol is 0 every later symbol is 2, otherwise
//! the remaining symbols are i.i.d. like `Q`. With `φ + ψ < 1/2` the
//! mismatched learner always predicts 1 while the optimal predictor
//! switches to 2 after a leading 0, so the average regret is `(T−1)/T` with
//! probability `φ` and 0 otherwise. Closed forms:
//!
//! ```text
//! V_T     = ((T−1)/T) φ (1−ψ)
//! KL(P‖Q) = (T−1) φ ln(1/ψ)
//! ```
//!
//! [`choose_parameters`] instantiates the construction for given `(C, α, β, ε)`
//! with `ψ = 1/8` and `φ = δ_n = 1/(n+3)`, searching for the first `n` at
//! which both lower-bound right-hand sides fall below `(T_n−1)/T_n`.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::loss::LossFunction;
use crate::pmf::{Alphabet, Pmf};
use crate::predictor::{mismatched_policy, optimal_policy, Policy};
use crate::process::SequentialDistribution;
use crate::regret::{binomial_slack, monte_carlo_traces, run_episode};

/// `ψ` used by the parameter choice.
pub const PSI_CHOICE: f64 = 0.125;

/// A fully built instance of the lower-bound problem.
#[derive(Debug, Clone)]
pub struct ImpossibilityInstance {
    pub phi: f64,
    pub psi: f64,
    pub horizon: usize,
    pub p: SequentialDistribution,
    pub q: SequentialDistribution,
}

fn check_params(phi: f64, psi: f64) -> Result<()> {
    if !(phi > 0.0 && phi < 0.5) {
        return Err(invalid(format!("phi must lie in (0, 1/2), got {phi}")));
    }
    if !(psi > 0.0 && psi < 0.5 - phi) {
        return Err(invalid(format!(
            "psi must lie in (0, 1/2 - phi) = (0, {}), got {psi}",
            0.5 - phi
        )));
    }
    Ok(())
}

/// Builds `P` and `Q` over `{0, 1, 2}` with horizon `T`.
pub fn build_instance(phi: f64, psi: f64, horizon: usize) -> Result<ImpossibilityInstance> {
    check_params(phi, psi)?;
    let marginal = Pmf::new(vec![phi, 1.0 - phi - psi, psi])?;
    Ok(ImpossibilityInstance {
        phi,
        psi,
        horizon,
        p: SequentialDistribution::impossibility_p(marginal.clone(), horizon)?,
        q: SequentialDistribution::impossibility_q(marginal, horizon)?,
    })
}

impl ImpossibilityInstance {
    pub fn alphabet(&self) -> Alphabet {
        self.p.alphabet()
    }

    pub fn loss(&self) -> LossFunction {
        LossFunction::classification(self.alphabet())
    }

    /// `(learner, optimal)` under classification loss.
    pub fn policies(&self) -> Result<(Policy, Policy)> {
        Ok((
            mismatched_policy(self.q.clone(), self.loss())?,
            optimal_policy(self.p.clone(), self.loss())?,
        ))
    }
}

/// `((T−1)/T) φ (1−ψ)`.
pub fn closed_form_vt(phi: f64, psi: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    (t - 1.0) / t * phi * (1.0 - psi)
}

/// `(T−1) φ ln(1/ψ)`.
pub fn closed_form_kl(phi: f64, psi: f64, horizon: usize) -> f64 {
    (horizon as f64 - 1.0) * phi * (1.0 / psi).ln()
}

/// Average per-round regret as a function of the first symbol.
pub fn regret_closed_form(first_symbol: usize, horizon: usize) -> Result<f64> {
    if first_symbol > 2 {
        return Err(invalid(format!(
            "first symbol must be 0, 1 or 2, got {first_symbol}"
        )));
    }
    let t = horizon as f64;
    Ok(if first_symbol == 0 {
        (t - 1.0) / t
    } else {
        0.0
    })
}

/// `ε(T, δ)`; any non-negative function vanishing in `T` for fixed `δ`.
pub type Epsilon<'a> = &'a (dyn Fn(u64, f64) -> f64 + Sync);

/// Search limits for [`choose_parameters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchCaps {
    pub max_n: u64,
    pub max_horizon: u64,
}

impl Default for SearchCaps {
    fn default() -> Self {
        Self {
            max_n: 100_000,
            max_horizon: 10_000_000,
        }
    }
}

/// The instantiated lower-bound problem together with every intermediate
/// value of the parameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundWitness {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n: u64,
    /// `δ_n = 1/(n+3)`; also the value of `φ`.
    pub delta: f64,
    /// `T_n`.
    pub horizon: u64,
    pub psi: f64,
    /// `ε(T_n, δ_n)`.
    pub epsilon: f64,
    /// `C · (7/8) · ((T_n−1)/T_n) · δ_n^{1−α} + ε(T_n, δ_n)`.
    pub r1: f64,
    /// `C · √(((T_n−1)/T_n) ln 8) · δ_n^{1/2−β} + ε(T_n, δ_n)`.
    pub r2: f64,
    /// `(T_n−1)/T_n`, the regret on the high-regret event.
    pub high_regret: f64,
    /// `T_1, …, T_n` as visited by the search.
    pub horizons: Vec<u64>,
}

impl fmt::Display for LowerBoundWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "C={} alpha={} beta={}", self.c, self.alpha, self.beta)?;
        writeln!(
            f,
            "n={} delta_n={} T_n={} phi={} psi={}",
            self.n, self.delta, self.horizon, self.delta, self.psi
        )?;
        writeln!(f, "epsilon(T_n,delta_n)={}", self.epsilon)?;
        writeln!(
            f,
            "R1={} R2={} (T_n-1)/T_n={}",
            self.r1, self.r2, self.high_regret
        )
    }
}

/// Right-hand sides `(R1, R2)` at `(T, δ)` with `ψ = 1/8`, `φ = δ`.
pub fn lower_bound_rhs(
    c: f64,
    alpha: f64,
    beta: f64,
    horizon: u64,
    delta: f64,
    eps: f64,
) -> (f64, f64) {
    let ratio = (horizon as f64 - 1.0) / horizon as f64;
    let r1 = c * (1.0 - PSI_CHOICE) * ratio * delta.powf(1.0 - alpha) + eps;
    let r2 = c * (ratio * (1.0 / PSI_CHOICE).ln()).sqrt() * delta.powf(0.5 - beta) + eps;
    (r1, r2)
}

/// Searches `n = 1, 2, …` for the first index at which both right-hand sides
/// drop below `(T_n−1)/T_n`.
///
/// `T_n` is the smallest `T` (strictly above `T_{n−1}` for `n > 1`) with
/// `ε(T, δ_n) < 1/n`.
pub fn choose_parameters(
    c: f64,
    alpha: f64,
    beta: f64,
    epsilon: Epsilon<'_>,
    caps: SearchCaps,
) -> Result<LowerBoundWitness> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid(format!("C must be positive and finite, got {c}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if !(0.0..0.5).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1/2), got {beta}")));
    }
    let mut horizons = Vec::new();
    let mut prev: Option<u64> = None;
    for n in 1..=caps.max_n {
        let delta = 1.0 / (n as f64 + 3.0);
        let target = 1.0 / n as f64;
        let start = prev.map_or(1, |p| p + 1);
        let mut horizon = None;
        let mut t = start;
        while t <= caps.max_horizon {
            let e = epsilon(t, delta);
            if !(e >= 0.0) {
                return Err(invalid(format!(
                    "epsilon({t}, {delta}) = {e} is not a non-negative number"
                )));
            }
            if e < target {
                horizon = Some((t, e));
                break;
            }
            t += 1;
        }
        let (t_n, eps) = horizon.ok_or_else(|| {
            Error::Capacity(format!(
                "no T in [{start}, {}] with epsilon(T, {delta}) < 1/{n}; reached n={n} (this does not show the construction fails)",
                caps.max_horizon
            ))
        })?;
        horizons.push(t_n);
        prev = Some(t_n);
        let high_regret = (t_n as f64 - 1.0) / t_n as f64;
        let (r1, r2) = lower_bound_rhs(c, alpha, beta, t_n, delta, eps);
        if r1 < high_regret && r2 < high_regret {
            return Ok(LowerBoundWitness {
                c,
                alpha,
                beta,
                n,
                delta,
                horizon: t_n,
                psi: PSI_CHOICE,
                epsilon: eps,
                r1,
                r2,
                high_regret,
                horizons,
            });
        }
    }
    Err(Error::Capacity(format!(
        "no admissible n up to {}",
        caps.max_n
    )))
}

/// Outcome of checking a witness.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundVerification {
    /// `P(Δ ≥ R1)`, computed by summing over the first symbol.
    pub exact_probability_r1: f64,
    /// `P(Δ ≥ R2)`.
    pub exact_probability_r2: f64,
    pub episodes: usize,
    /// Observed frequency of `Δ ≥ R1` (equal to that of `Δ ≥ R2` here).
    pub simulated_r1: f64,
    pub simulated_r2: f64,
    /// `3 √(δ(1−δ)/episodes)`.
    pub slack: f64,
    pub passed: bool,
}

/// Checks that `P(Δ ≥ R_i) = δ_n` exactly, and that a simulation of
/// `episodes` runs observes `Δ ≥ R_i` with frequency within three binomial
/// standard deviations of `δ_n`.
pub fn verify_lower_bound(
    witness: &LowerBoundWitness,
    episodes: usize,
    base_seed: u64,
) -> Result<LowerBoundVerification> {
    if !(witness.r1 < witness.high_regret && witness.r2 < witness.high_regret) {
        return Err(Error::Verification(format!(
            "malformed witness: R1={} R2={} must both be below (T_n-1)/T_n={}",
            witness.r1, witness.r2, witness.high_regret
        )));
    }
    let horizon =
        usize::try_from(witness.horizon).map_err(|_| invalid("horizon does not fit in memory"))?;
    let inst = build_instance(witness.delta, witness.psi, horizon)?;
    let first = inst.p.kernel_eval(&[])?;

    let exact = |r: f64| -> Result<f64> {
        let mut prob = 0.0;
        for z in 0..3 {
            if regret_closed_form(z, horizon)? >= r {
                prob += first.prob(z);
            }
        }
        Ok(prob)
    };
    let exact_probability_r1 = exact(witness.r1)?;
    let exact_probability_r2 = exact(witness.r2)?;

    let (learner, optimal) = inst.policies()?;
    let loss = inst.loss();
    let traces = monte_carlo_traces(episodes, base_seed, |seed| {
        run_episode(&inst.p, &learner, &optimal, &loss, seed)
    })?;
    let n = traces.len() as f64;
    let simulated_r1 = traces.iter().filter(|t| t.average >= witness.r1).count() as f64 / n;
    let simulated_r2 = traces.iter().filter(|t| t.average >= witness.r2).count() as f64 / n;
    let slack = binomial_slack(witness.delta, episodes, 3.0);
    let exact_ok = (exact_probability_r1 - witness.delta).abs() <= 1e-12
        && (exact_probability_r2 - witness.delta).abs() <= 1e-12;
    let sim_ok = (simulated_r1 - witness.delta).abs() <= slack
        && (simulated_r2 - witness.delta).abs() <= slack;
    Ok(LowerBoundVerification {
        exact_probability_r1,
        exact_probability_r2,
        episodes,
        simulated_r1,
        simulated_r2,
        slack,
        passed: exact_ok && sim_ok,
    })
}
