//! Horizon-`T` processes over a finite alphabet, described by their
//! next-symbol kernels.
//!
//! A [`SequentialDistribution`] maps every history of length `0..T` to a
//! [`Pmf`]; the probability of a full sequence is the product of kernel
//! values along it. The empty history yields the first-symbol marginal.
//!
//! Kernels are evaluated either from scratch ([`SequentialDistribution::kernel_eval`])
//! or incrementally through a [`Cursor`], which keeps whatever running
//! state the model needs (current Markov context, context counts) so that
//! walking a length-`T` sequence costs `O(T)` rather than `O(T²)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::markov::{self, ContextCounts, ContextTracker, MarkovParams, McmcConfig};
use crate::pmf::{Alphabet, Pmf};
use crate::predictor::Policy;
use crate::rng::StreamSeed;

/// Model family of a [`SequentialDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionTag {
    Product,
    MarkovMemory,
    ImpossibilityP,
    ImpossibilityQ,
    Tabular,
    Mixture,
    McmcMixture,
    PolicyInduced,
}

impl fmt::Display for DistributionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Product => "product",
            Self::MarkovMemory => "markov-memory",
            Self::ImpossibilityP => "impossibility-P",
            Self::ImpossibilityQ => "impossibility-Q",
            Self::Tabular => "tabular",
            Self::Mixture => "mixture",
            Self::McmcMixture => "mcmc-mixture",
            Self::PolicyInduced => "policy-induced",
        };
        f.write_str(s)
    }
}

/// One kernel per history, stored in breadth-first order: all histories of
/// length 0, then length 1, and so on, each level in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularKernels {
    kernels: Vec<Pmf>,
}

#[derive(Clone)]
enum Model {
    Product(Pmf),
    Markov(Arc<MarkovParams>),
    /// First symbol from `marginal`; afterwards Dirac at 2 if the first
    /// symbol was 0, otherwise `marginal` again.
    ImpossibilityP {
        marginal: Pmf,
    },
    Tabular(Arc<TabularKernels>),
    Mixture {
        memory: usize,
    },
    McmcMixture {
        memory: usize,
        config: McmcConfig,
    },
    PolicyInduced {
        policy: Policy,
        q: f64,
    },
}

/// A distribution over `Z^T` given by its Markov kernels.
#[derive(Clone)]
pub struct SequentialDistribution {
    horizon: usize,
    alphabet: Alphabet,
    tag: DistributionTag,
    model: Model,
}

impl fmt::Debug for SequentialDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequentialDistribution")
            .field("tag", &self.tag)
            .field("horizon", &self.horizon)
            .field("alphabet", &self.alphabet.size())
            .finish_non_exhaustive()
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    Ok(())
}

/// Offset of the first history of length `len` in breadth-first order.
fn level_offset(states: usize, len: usize) -> usize {
    (0..len).map(|k| states.pow(k as u32)).sum()
}

fn history_rank(states: usize, history: &[usize]) -> usize {
    history.iter().fold(0, |acc, &z| acc * states + z)
}

const MAX_TABULAR_HISTORIES: usize = 5_000_000;

impl SequentialDistribution {
    /// I.i.d. draws from `marginal`.
    pub fn product(marginal: Pmf, horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            horizon,
            alphabet: marginal.alphabet(),
            tag: DistributionTag::Product,
            model: Model::Product(marginal),
        })
    }

    pub fn uniform_iid(alphabet: Alphabet, horizon: usize) -> Result<Self> {
        Self::product(Pmf::uniform(alphabet), horizon)
    }

    pub fn markov(params: MarkovParams, horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            horizon,
            alphabet: params.alphabet(),
            tag: DistributionTag::MarkovMemory,
            model: Model::Markov(Arc::new(params)),
        })
    }

    /// Uniform-prior mixture over all memory-`m` chains, predicting with
    /// the add-one rule.
    pub fn laplace_mixture(memory: usize, alphabet: Alphabet, horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        markov::context_count(memory, alphabet)?;
        Ok(Self {
            horizon,
            alphabet,
            tag: DistributionTag::Mixture,
            model: Model::Mixture { memory },
        })
    }

    /// The same mixture, with every kernel estimated by a Metropolis-Hastings
    /// chain. Each evaluation runs a fresh chain seeded from
    /// `(config.seed, history length)`.
    pub fn mcmc_mixture(
        memory: usize,
        alphabet: Alphabet,
        horizon: usize,
        config: McmcConfig,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        config.validate()?;
        markov::context_count(memory, alphabet)?;
        Ok(Self {
            horizon,
            alphabet,
            tag: DistributionTag::McmcMixture,
            model: Model::McmcMixture { memory, config },
        })
    }

    /// Builds a tabular distribution from an explicit kernel for every
    /// history of length `< horizon`.
    pub fn tabular_from_fn<F>(alphabet: Alphabet, horizon: usize, mut kernel: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Result<Pmf>,
    {
        check_horizon(horizon)?;
        let s = alphabet.size();
        let total = level_offset(s, horizon);
        if total > MAX_TABULAR_HISTORIES {
            return Err(Error::Capacity(format!(
                "tabular distribution would store {total} kernels"
            )));
        }
        let mut kernels = Vec::with_capacity(total);
        let mut history = Vec::with_capacity(horizon);
        for len in 0..horizon {
            history.clear();
            history.resize(len, 0);
            loop {
                let k = kernel(&history)?;
                if k.len() != s {
                    return Err(invalid(format!(
                        "kernel for {history:?} has {} entries",
                        k.len()
                    )));
                }
                kernels.push(k);
                if !increment(&mut history, s) {
                    break;
                }
            }
        }
        Ok(Self {
            horizon,
            alphabet,
            tag: DistributionTag::Tabular,
            model: Model::Tabular(Arc::new(TabularKernels { kernels })),
        })
    }

    /// Tabular distribution from a joint pmf over all `S^T` sequences
    /// (lexicographic order). Conditionals after a zero-probability prefix
    /// are set to uniform.
    pub fn tabular_from_joint(alphabet: Alphabet, horizon: usize, joint: &[f64]) -> Result<Self> {
        check_horizon(horizon)?;
        let s = alphabet.size();
        let n = s
            .checked_pow(horizon as u32)
            .filter(|n| *n <= MAX_TABULAR_HISTORIES);
        if n != Some(joint.len()) {
            return Err(invalid(format!(
                "joint table must have S^T = {s}^{horizon} entries, got {}",
                joint.len()
            )));
        }
        Pmf::new(joint.to_vec())?;
        Self::tabular_from_fn(alphabet, horizon, |history| {
            let block = s.pow((horizon - history.len()) as u32);
            let sub = block / s;
            let start = history_rank(s, history) * block;
            let weights: Vec<f64> = (0..s)
                .map(|z| joint[start + z * sub..start + (z + 1) * sub].iter().sum())
                .collect();
            if weights.iter().sum::<f64>() > 0.0 {
                Pmf::from_weights(weights)
            } else {
                Ok(Pmf::uniform(alphabet))
            }
        })
    }

    /// Process whose first symbol follows `marginal`; if that symbol is 0,
    /// every later symbol is 2, otherwise later symbols are again i.i.d.
    /// `marginal`. Used by the lower-bound construction.
    pub(crate) fn impossibility_p(marginal: Pmf, horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        if marginal.len() != 3 {
            return Err(invalid(
                "impossibility process lives on a 3-symbol alphabet",
            ));
        }
        Ok(Self {
            horizon,
            alphabet: marginal.alphabet(),
            tag: DistributionTag::ImpossibilityP,
            model: Model::ImpossibilityP { marginal },
        })
    }

    pub(crate) fn impossibility_q(marginal: Pmf, horizon: usize) -> Result<Self> {
        let mut d = Self::product(marginal, horizon)?;
        d.tag = DistributionTag::ImpossibilityQ;
        Ok(d)
    }

    pub(crate) fn policy_induced(
        policy: Policy,
        q: f64,
        alphabet: Alphabet,
        horizon: usize,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            horizon,
            alphabet,
            tag: DistributionTag::PolicyInduced,
            model: Model::PolicyInduced { policy, q },
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn tag(&self) -> DistributionTag {
        self.tag
    }

    /// Next-symbol distribution given `history`.
    pub fn kernel_eval(&self, history: &[usize]) -> Result<Pmf> {
        if history.len() >= self.horizon {
            return Err(invalid(format!(
                "history of length {} is too long for horizon {}",
                history.len(),
                self.horizon
            )));
        }
        self.alphabet.check_sequence(history)?;
        self.kernel_unchecked(history)
    }

    fn kernel_unchecked(&self, history: &[usize]) -> Result<Pmf> {
        Ok(match &self.model {
            Model::Product(p) => p.clone(),
            Model::Markov(params) => {
                let c = ContextTracker::after(params.memory(), self.alphabet, history)?;
                params.row_pmf(c)
            }
            Model::ImpossibilityP { marginal } => match history.first() {
                Some(0) => Pmf::dirac(self.alphabet, 2)?,
                _ => marginal.clone(),
            },
            Model::Tabular(t) => {
                let s = self.alphabet.size();
                t.kernels[level_offset(s, history.len()) + history_rank(s, history)].clone()
            }
            Model::Mixture { memory } => {
                markov::laplace_mixture_predictive(*memory, self.alphabet, history)?
            }
            Model::McmcMixture { memory, config } => {
                markov::mcmc_mixture_predictive(*memory, self.alphabet, history, config)?.pmf
            }
            Model::PolicyInduced { policy, q } => {
                policy_kernel(self.alphabet, policy.decide(history)?, *q)
            }
        })
    }

    /// Chain-rule probability of a full-length sequence.
    pub fn sequence_prob(&self, seq: &[usize]) -> Result<f64> {
        if seq.len() != self.horizon {
            return Err(invalid(format!(
                "sequence length {} differs from horizon {}",
                seq.len(),
                self.horizon
            )));
        }
        self.alphabet.check_sequence(seq)?;
        let mut cursor = self.cursor();
        let mut prob = 1.0;
        for &z in seq {
            prob *= cursor.pmf()?.prob(z);
            if prob == 0.0 {
                return Ok(0.0);
            }
            cursor.push(z);
        }
        Ok(prob)
    }

    /// Draws one sequence of length `T`, extending the prefix one symbol at
    /// a time from the kernel.
    pub fn sample_sequence(&self, seed: StreamSeed) -> Result<Vec<usize>> {
        let mut rng = seed.rng();
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        let mut cursor = self.cursor();
        for _ in 0..self.horizon {
            let z = cursor.pmf()?.sample_with(rng.random());
            cursor.push(z);
        }
        Ok(cursor.into_history())
    }

    /// Incremental kernel evaluator starting from the empty history.
    pub fn cursor(&self) -> Cursor<'_> {
        let state = match &self.model {
            Model::Markov(p) => CursorState::Context(
                ContextTracker::new(p.memory(), self.alphabet).expect("checked at construction"),
            ),
            Model::Mixture { memory } | Model::McmcMixture { memory, .. } => CursorState::Counts(
                ContextCounts::new(*memory, self.alphabet).expect("checked at construction"),
            ),
            _ => CursorState::History,
        };
        Cursor {
            dist: self,
            history: Vec::with_capacity(self.horizon),
            state,
        }
    }

    /// Finite-state description when the kernel depends on the history only
    /// through a small automaton state. Used for exact expectations without
    /// enumerating `S^T` sequences.
    pub(crate) fn automaton(&self) -> Option<Automaton<'_>> {
        match &self.model {
            Model::Product(p) => Some(Automaton::Product(p)),
            Model::Markov(params) => Some(Automaton::Markov(params)),
            Model::ImpossibilityP { marginal } => Some(Automaton::FirstSymbolSwitch(marginal)),
            _ => None,
        }
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.alphabet != other.alphabet {
            return Err(invalid(format!(
                "alphabet sizes differ: {} vs {}",
                self.alphabet.size(),
                other.alphabet.size()
            )));
        }
        if self.horizon != other.horizon {
            return Err(invalid(format!(
                "horizons differ: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        Ok(())
    }
}

pub(crate) fn policy_kernel(alphabet: Alphabet, decision: usize, q: f64) -> Pmf {
    let s = alphabet.size();
    let rest = (1.0 - q) / (s - 1) as f64;
    Pmf::from_normalized(
        (0..s)
            .map(|z| if z == decision { q } else { rest })
            .collect(),
    )
}

/// Advances `digits` as a base-`base` counter; returns false on wrap-around.
pub(crate) fn increment(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

enum CursorState {
    History,
    Context(ContextTracker),
    Counts(ContextCounts),
}

/// Walks a distribution's kernels along a growing history.
pub struct Cursor<'a> {
    dist: &'a SequentialDistribution,
    history: Vec<usize>,
    state: CursorState,
}

impl<'a> Cursor<'a> {
    /// Kernel at the current history.
    pub fn pmf(&self) -> Result<Pmf> {
        debug_assert!(self.history.len() < self.dist.horizon);
        match (&self.state, &self.dist.model) {
            (CursorState::Context(t), Model::Markov(p)) => Ok(p.row_pmf(t.current())),
            (CursorState::Counts(c), Model::Mixture { .. }) => Ok(c.laplace_predictive()),
            (CursorState::Counts(c), Model::McmcMixture { config, .. }) => Ok(markov::run_chain(
                c,
                config,
                StreamSeed::new(config.seed, self.history.len() as u64),
            )?
            .pmf),
            _ => self.dist.kernel_unchecked(&self.history),
        }
    }

    pub fn push(&mut self, symbol: usize) {
        debug_assert!(self.dist.alphabet.contains(symbol));
        match &mut self.state {
            CursorState::History => {}
            CursorState::Context(t) => t.push(symbol),
            CursorState::Counts(c) => c.observe(symbol),
        }
        self.history.push(symbol);
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn into_history(self) -> Vec<usize> {
        self.history
    }

    pub fn distribution(&self) -> &'a SequentialDistribution {
        self.dist
    }
}

impl Clone for Cursor<'_> {
    fn clone(&self) -> Self {
        let state = match &self.state {
            CursorState::History => CursorState::History,
            CursorState::Context(t) => CursorState::Context(*t),
            CursorState::Counts(c) => CursorState::Counts(c.clone()),
        };
        Self {
            dist: self.dist,
            history: self.history.clone(),
            state,
        }
    }
}

/// Kernel as a function of a finite automaton state.
pub(crate) enum Automaton<'a> {
    Product(&'a Pmf),
    Markov(&'a MarkovParams),
    /// state 0: start, 1: first symbol was 0, 2: first symbol was not 0
    FirstSymbolSwitch(&'a Pmf),
}

impl Automaton<'_> {
    pub fn states(&self) -> usize {
        match self {
            Self::Product(_) => 1,
            Self::Markov(p) => p.contexts(),
            Self::FirstSymbolSwitch(_) => 3,
        }
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn next(&self, state: usize, symbol: usize) -> usize {
        match self {
            Self::Product(_) => 0,
            Self::Markov(p) => (state * p.alphabet().size() + symbol) % p.contexts(),
            Self::FirstSymbolSwitch(_) => match state {
                0 if symbol == 0 => 1,
                0 => 2,
                s => s,
            },
        }
    }

    pub fn kernel(&self, state: usize) -> Pmf {
        match self {
            Self::Product(p) => (*p).clone(),
            Self::Markov(p) => p.row_pmf(state),
            Self::FirstSymbolSwitch(m) => {
                if state == 1 {
                    Pmf::from_normalized(vec![0.0, 0.0, 1.0])
                } else {
                    (*m).clone()
                }
            }
        }
    }
}
