//! Memory-`m` Markov chains over `S` states and the uniform-prior mixture
//! over all of them.
//!
//! Contexts are the last `m` symbols `(s_1, …, s_m) = (z_{t-m}, …, z_{t-1})`,
//! indexed lexicographically with `s_1` most significant. Positions before
//! the start of the sequence are padded with symbol 0 (the first state).
//!
//! The parameter space is the product over contexts of the probability
//! simplex on `S` states. A uniform density on it is a flat Dirichlet per
//! context, so the mixture's next-symbol kernel in context `c` is the
//! add-one rule `(n(s|c) + 1) / (n(c) + S)`. [`mcmc_mixture_predictive`]
//! approximates the same integral with a random-walk Metropolis-Hastings
//! chain over the parameters and exists to cross-check the closed form.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::pmf::{Alphabet, Pmf, PMF_TOLERANCE};
use crate::rng::StreamSeed;

/// Number of contexts `S^m`, or an error when it does not fit comfortably
/// in memory.
pub fn context_count(memory: usize, alphabet: Alphabet) -> Result<usize> {
    const MAX_CONTEXTS: usize = 1 << 24;
    let mut n: usize = 1;
    for _ in 0..memory {
        n = n
            .checked_mul(alphabet.size())
            .filter(|n| *n <= MAX_CONTEXTS)
            .ok_or_else(|| Error::Capacity(format!("S^m exceeds {MAX_CONTEXTS} contexts")))?;
    }
    Ok(n)
}

/// Tracks the current context index while symbols are appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextTracker {
    states: usize,
    contexts: usize,
    current: usize,
}

impl ContextTracker {
    /// Starts in the all-padding context (index 0).
    pub fn new(memory: usize, alphabet: Alphabet) -> Result<Self> {
        Ok(Self {
            states: alphabet.size(),
            contexts: context_count(memory, alphabet)?,
            current: 0,
        })
    }

    #[inline]
    pub fn current(&self) -> usize {
        self.current
    }

    #[inline]
    pub fn push(&mut self, symbol: usize) {
        self.current = (self.current * self.states + symbol) % self.contexts;
    }

    #[inline]
    pub fn next_index(&self, context: usize, symbol: usize) -> usize {
        (context * self.states + symbol) % self.contexts
    }

    /// Context in effect after `history` has been observed.
    pub fn after(memory: usize, alphabet: Alphabet, history: &[usize]) -> Result<usize> {
        let mut tracker = Self::new(memory, alphabet)?;
        let start = history.len().saturating_sub(memory);
        history[start..].iter().for_each(|&z| tracker.push(z));
        Ok(tracker.current)
    }
}

/// Transition tensor `λ(s | s_1, …, s_m)` stored as `S^m` rows of length `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovParams {
    memory: usize,
    alphabet: Alphabet,
    transitions: Vec<f64>,
}

impl MarkovParams {
    /// `rows[c]` is the next-symbol distribution in context `c`.
    pub fn new(memory: usize, alphabet: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        if memory == 0 {
            return Err(invalid("memory must be at least 1"));
        }
        let contexts = context_count(memory, alphabet)?;
        if rows.len() != contexts {
            return Err(invalid(format!(
                "expected {contexts} context rows, got {}",
                rows.len()
            )));
        }
        let mut transitions = Vec::with_capacity(contexts * alphabet.size());
        for (c, row) in rows.into_iter().enumerate() {
            if row.len() != alphabet.size() {
                return Err(invalid(format!(
                    "context row {c} has {} entries",
                    row.len()
                )));
            }
            let pmf = Pmf::new(row).map_err(|e| invalid(format!("context row {c}: {e}")))?;
            transitions.extend_from_slice(pmf.probs());
        }
        Ok(Self {
            memory,
            alphabet,
            transitions,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn contexts(&self) -> usize {
        self.transitions.len() / self.alphabet.size()
    }

    #[inline]
    pub fn row(&self, context: usize) -> &[f64] {
        let s = self.alphabet.size();
        &self.transitions[context * s..(context + 1) * s]
    }

    pub fn row_pmf(&self, context: usize) -> Pmf {
        Pmf::from_normalized(self.row(context).to_vec())
    }

    /// Next-symbol distribution after `history`, with initial padding.
    pub fn kernel(&self, history: &[usize]) -> Result<Pmf> {
        self.alphabet.check_sequence(history)?;
        let c = ContextTracker::after(self.memory, self.alphabet, history)?;
        Ok(self.row_pmf(c))
    }

    /// Parses the plain-text parameter format: one context per line in
    /// lexicographic order, `S` whitespace-separated probabilities per line.
    /// Blank lines and lines starting with `#` are ignored. `S` is taken
    /// from the first row and `m` from the number of rows.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut row = Vec::new();
            for (col, field) in trimmed.split_whitespace().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    column: col + 1,
                    message: format!("not a number: {field:?}"),
                })?;
                row.push(v);
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        column: row.len().min(w) + 1,
                        message: format!("expected {w} probabilities, found {}", row.len()),
                    })
                }
                _ => {}
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: format!("row is not a probability vector (sum {total})"),
                });
            }
            rows.push(row);
        }
        let states = width.ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "no parameter rows".into(),
        })?;
        let alphabet = Alphabet::new(states).map_err(|_| Error::Parse {
            line: 1,
            column: 1,
            message: format!("need at least 2 states per row, found {states}"),
        })?;
        let mut memory = 0;
        let mut n = 1usize;
        while n < rows.len() {
            n = n.saturating_mul(states);
            memory += 1;
        }
        if n != rows.len() || memory == 0 {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("{} rows is not a positive power of {states}", rows.len()),
            });
        }
        Self::new(memory, alphabet, rows)
    }

    /// Serialises in the format read by [`MarkovParams::parse`], with
    /// shortest round-trip float formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in 0..self.contexts() {
            let row: Vec<String> = self.row(c).iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Sufficient statistics `n(s | c)` of an observed history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCounts {
    alphabet: Alphabet,
    counts: Vec<u64>,
    totals: Vec<u64>,
    tracker: ContextTracker,
    observed: u64,
}

impl ContextCounts {
    pub fn new(memory: usize, alphabet: Alphabet) -> Result<Self> {
        let tracker = ContextTracker::new(memory, alphabet)?;
        let contexts = tracker.contexts;
        Ok(Self {
            alphabet,
            counts: vec![0; contexts * alphabet.size()],
            totals: vec![0; contexts],
            tracker,
            observed: 0,
        })
    }

    pub fn from_history(memory: usize, alphabet: Alphabet, history: &[usize]) -> Result<Self> {
        alphabet.check_sequence(history)?;
        let mut counts = Self::new(memory, alphabet)?;
        history.iter().for_each(|&z| counts.observe(z));
        Ok(counts)
    }

    /// Records `symbol` as the outcome in the current context, then
    /// advances the context.
    #[inline]
    pub fn observe(&mut self, symbol: usize) {
        let c = self.tracker.current();
        self.counts[c * self.alphabet.size() + symbol] += 1;
        self.totals[c] += 1;
        self.observed += 1;
        self.tracker.push(symbol);
    }

    pub fn current_context(&self) -> usize {
        self.tracker.current()
    }

    #[inline]
    pub fn count(&self, context: usize, symbol: usize) -> u64 {
        self.counts[context * self.alphabet.size() + symbol]
    }

    pub fn total(&self, context: usize) -> u64 {
        self.totals[context]
    }

    /// Number of observed outcomes; equals the sum of all counts.
    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub fn contexts(&self) -> usize {
        self.totals.len()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Add-one predictive in the current context.
    pub fn laplace_predictive(&self) -> Pmf {
        let c = self.current_context();
        let s = self.alphabet.size();
        let denom = (self.totals[c] + s as u64) as f64;
        Pmf::from_normalized(
            (0..s)
                .map(|z| (self.count(c, z) + 1) as f64 / denom)
                .collect(),
        )
    }

    /// `Σ_c Σ_s n(s|c) ln λ(s|c)`, the log-likelihood of the history under
    /// `theta` (row-major, same layout as [`MarkovParams`]).
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (&n, &p) in self.counts.iter().zip(theta) {
            if n > 0 {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += n as f64 * p.ln();
            }
        }
        ll
    }
}

/// Exact next-symbol distribution of the uniform-prior mixture over all
/// memory-`m` chains, given `history`.
pub fn laplace_mixture_predictive(
    memory: usize,
    alphabet: Alphabet,
    history: &[usize],
) -> Result<Pmf> {
    Ok(ContextCounts::from_history(memory, alphabet, history)?.laplace_predictive())
}

/// Metropolis-Hastings settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Half-width of the uniform step applied to each free coordinate.
    pub proposal_scale: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chain_length: 100_000,
            burn_in: 10_000,
            thinning: 5,
            proposal_scale: 0.25,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chain_length <= self.burn_in {
            return Err(invalid("chain_length must exceed burn_in"));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning must be at least 1"));
        }
        if !(self.proposal_scale >= 0.0) || !self.proposal_scale.is_finite() {
            return Err(invalid("proposal_scale must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Result of one chain: the averaged kernel plus mixing diagnostics.
#[derive(Debug, Clone)]
pub struct McmcEstimate {
    pub pmf: Pmf,
    /// Fraction of proposals accepted.
    pub acceptance_rate: f64,
    /// Mean L1 displacement of the free coordinates per iteration.
    pub mean_move: f64,
    /// Number of retained (post burn-in, thinned) states.
    pub samples: usize,
}

/// Approximates the mixture's next-symbol kernel by averaging
/// [`MarkovParams::kernel`] over a Metropolis-Hastings chain targeting the
/// posterior over parameters given `history`.
///
/// The chain walks the free coordinates `λ(0..S-1 | c)` of every context with
/// independent symmetric uniform steps; proposals leaving the simplex are
/// rejected. It starts from the all-uniform parameter.
pub fn mcmc_mixture_predictive(
    memory: usize,
    alphabet: Alphabet,
    history: &[usize],
    config: &McmcConfig,
) -> Result<McmcEstimate> {
    config.validate()?;
    let counts = ContextCounts::from_history(memory, alphabet, history)?;
    run_chain(
        &counts,
        config,
        StreamSeed::new(config.seed, history.len() as u64),
    )
}

pub(crate) fn run_chain(
    counts: &ContextCounts,
    config: &McmcConfig,
    seed: StreamSeed,
) -> Result<McmcEstimate> {
    config.validate()?;
    let s = counts.alphabet.size();
    let contexts = counts.contexts();
    let target = counts.current_context();
    let mut rng = seed.rng();

    let mut theta = vec![1.0 / s as f64; contexts * s];
    let mut proposal = theta.clone();
    let mut ll = counts.log_likelihood(&theta);
    let mut accepted = 0usize;
    let mut total_move = 0.0;
    let mut acc = vec![0.0; s];
    let mut kept = 0usize;
    let w = config.proposal_scale;

    for iter in 0..config.chain_length {
        let mut inside = true;
        for c in 0..contexts {
            let row = &theta[c * s..(c + 1) * s];
            let out = &mut proposal[c * s..(c + 1) * s];
            let mut free_sum = 0.0;
            for i in 0..s - 1 {
                let u: f64 = rng.random();
                let v = row[i] + w * (2.0 * u - 1.0);
                out[i] = v;
                free_sum += v;
                inside &= v >= 0.0;
            }
            out[s - 1] = 1.0 - free_sum;
            inside &= out[s - 1] >= 0.0;
        }
        // the uniform draw is consumed even for rejected-by-support proposals
        // so the random stream does not depend on the geometry
        let u: f64 = rng.random();
        if inside {
            let ll_new = counts.log_likelihood(&proposal);
            if ll_new.is_finite() && u.ln() < ll_new - ll {
                let moved: f64 = (0..contexts)
                    .flat_map(|c| (0..s - 1).map(move |i| c * s + i))
                    .map(|k| (proposal[k] - theta[k]).abs())
                    .sum();
                total_move += moved;
                std::mem::swap(&mut theta, &mut proposal);
                ll = ll_new;
                accepted += 1;
            }
        }
        if iter >= config.burn_in && (iter - config.burn_in).is_multiple_of(config.thinning) {
            for (a, &p) in acc.iter_mut().zip(&theta[target * s..(target + 1) * s]) {
                *a += p;
            }
            kept += 1;
        }
    }

    let pmf = Pmf::from_weights(acc)
        .map_err(|e| Error::Degenerate(format!("chain produced no mass: {e}")))?;
    Ok(McmcEstimate {
        pmf,
        acceptance_rate: accepted as f64 / config.chain_length as f64,
        mean_move: total_move / config.chain_length as f64,
        samples: kept,
    })
}

/// Seed for the `draw`-th ground-truth parameter of an experiment with base
/// seed `base`. Kept apart from the episode streams `(base, 0..runs)`.
pub fn theta_seed(base: u64, draw: u64) -> u64 {
    StreamSeed::new(base, u64::MAX).child(draw).base
}

/// Draws every context row independently and uniformly from the simplex.
pub fn sample_theta(memory: usize, alphabet: Alphabet, seed: u64) -> Result<MarkovParams> {
    let contexts = context_count(memory, alphabet)?;
    let mut rng = StreamSeed::new(seed, 0).rng();
    let s = alphabet.size();
    let rows = (0..contexts)
        .map(|_| {
            let mut row: Vec<f64> = (0..s).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= total);
            row
        })
        .collect();
    let params = MarkovParams::new(memory, alphabet, rows)?;
    debug_assert!((0..params.contexts())
        .all(|c| (params.row(c).iter().sum::<f64>() - 1.0).abs() <= PMF_TOLERANCE));
    Ok(params)
}
