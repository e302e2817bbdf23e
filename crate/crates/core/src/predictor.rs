//! Prediction policies: Bayes-optimal decisions under a sequential
//! distribution, arbitrary deterministic policies, and the constructions
//! that represent an arbitrary policy as the Bayes decision of some
//! distribution.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::loss::LossFunction;
use crate::pmf::{Alphabet, Pmf};
use crate::process::{increment, Cursor, SequentialDistribution};

type DecideFn = dyn Fn(&[usize]) -> usize + Send + Sync;

#[derive(Clone)]
enum PolicyKind {
    /// Minimise expected loss under the distribution's kernel.
    Bayes {
        dist: Arc<SequentialDistribution>,
        loss: Arc<LossFunction>,
    },
    Custom {
        decide: Arc<DecideFn>,
        predictions: usize,
    },
}

/// A deterministic map from histories to predictions.
#[derive(Clone)]
pub struct Policy {
    kind: PolicyKind,
    description: String,
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Policy")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

/// Policy that predicts `argmin_b E[ℓ(b, Z_t) | history]` under `dist`,
/// ties broken toward the smallest prediction index.
pub fn optimal_policy(dist: SequentialDistribution, loss: LossFunction) -> Result<Policy> {
    bayes_policy(dist, loss, "optimal")
}

/// The same rule driven by a surrogate distribution `Q`.
pub fn mismatched_policy(q: SequentialDistribution, loss: LossFunction) -> Result<Policy> {
    bayes_policy(q, loss, "mismatched")
}

fn bayes_policy(dist: SequentialDistribution, loss: LossFunction, role: &str) -> Result<Policy> {
    if loss.alphabet() != dist.alphabet() {
        return Err(invalid("loss and distribution alphabets differ"));
    }
    let description = format!("{role}: bayes decision under {}", dist.tag());
    Ok(Policy {
        kind: PolicyKind::Bayes {
            dist: Arc::new(dist),
            loss: Arc::new(loss),
        },
        description,
    })
}

impl Policy {
    /// Wraps an arbitrary decision function with outputs in `0..predictions`.
    pub fn from_fn<F>(description: impl Into<String>, predictions: usize, decide: F) -> Self
    where
        F: Fn(&[usize]) -> usize + Send + Sync + 'static,
    {
        Self {
            kind: PolicyKind::Custom {
                decide: Arc::new(decide),
                predictions,
            },
            description: description.into(),
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Size of the prediction domain `B`.
    pub fn num_predictions(&self) -> usize {
        match &self.kind {
            PolicyKind::Bayes { loss, .. } => loss.num_predictions(),
            PolicyKind::Custom { predictions, .. } => *predictions,
        }
    }

    pub fn decide(&self, history: &[usize]) -> Result<usize> {
        match &self.kind {
            PolicyKind::Bayes { dist, loss } => {
                Ok(loss.bayes_prediction(&dist.kernel_eval(history)?))
            }
            PolicyKind::Custom {
                decide,
                predictions,
            } => {
                let b = decide(history);
                if b >= *predictions {
                    return Err(invalid(format!(
                        "policy returned {b}, outside its domain of {predictions}"
                    )));
                }
                Ok(b)
            }
        }
    }

    /// Incremental evaluator over a growing history.
    pub fn runner(&self) -> PolicyRunner<'_> {
        match &self.kind {
            PolicyKind::Bayes { dist, loss } => PolicyRunner::Bayes {
                cursor: dist.cursor(),
                loss,
            },
            PolicyKind::Custom { .. } => PolicyRunner::Replay {
                policy: self,
                history: Vec::new(),
            },
        }
    }
}

pub enum PolicyRunner<'a> {
    Bayes {
        cursor: Cursor<'a>,
        loss: &'a LossFunction,
    },
    Replay {
        policy: &'a Policy,
        history: Vec<usize>,
    },
}

impl PolicyRunner<'_> {
    pub fn decide(&self) -> Result<usize> {
        match self {
            Self::Bayes { cursor, loss } => Ok(loss.bayes_prediction(&cursor.pmf()?)),
            Self::Replay { policy, history } => policy.decide(history),
        }
    }

    pub fn push(&mut self, symbol: usize) {
        match self {
            Self::Bayes { cursor, .. } => cursor.push(symbol),
            Self::Replay { history, .. } => history.push(symbol),
        }
    }
}

/// Builds `Q` whose kernel puts mass `q` on the policy's decision and
/// `r / (S-1)` on every other symbol, so that the Bayes decision under `Q`
/// with classification loss is the policy itself.
pub fn q_from_policy_classification(
    policy: Policy,
    q: f64,
    r: f64,
    alphabet: Alphabet,
    horizon: usize,
) -> Result<SequentialDistribution> {
    let s = alphabet.size();
    if !(q > 0.0 && q < 1.0 && r > 0.0 && r < 1.0) {
        return Err(invalid(format!(
            "q and r must lie in (0,1), got q={q}, r={r}"
        )));
    }
    if (q + r - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("q + r must equal 1, got {}", q + r)));
    }
    if q <= r / (s - 1) as f64 {
        return Err(invalid(format!(
            "need q > r/(S-1): {q} <= {}",
            r / (s - 1) as f64
        )));
    }
    if policy.num_predictions() != s {
        return Err(invalid(
            "classification policies predict symbols of the alphabet",
        ));
    }
    SequentialDistribution::policy_induced(policy, q, alphabet, horizon)
}

const MAX_REPRESENTATION_HISTORIES: usize = 100_000;

/// Visits every history of length `0..=max_depth` in breadth-first order.
fn for_each_history(
    alphabet: Alphabet,
    max_depth: usize,
    mut f: impl FnMut(&[usize]) -> Result<bool>,
) -> Result<bool> {
    let s = alphabet.size();
    let fits = (0..=max_depth)
        .try_fold(0usize, |acc, k| {
            s.checked_pow(k as u32).and_then(|n| acc.checked_add(n))
        })
        .is_some_and(|n| n <= MAX_REPRESENTATION_HISTORIES);
    if !fits {
        return Err(Error::Capacity(format!(
            "more than {MAX_REPRESENTATION_HISTORIES} histories up to depth {max_depth}"
        )));
    }
    let mut history = Vec::with_capacity(max_depth);
    for len in 0..=max_depth {
        history.clear();
        history.resize(len, 0);
        loop {
            if !f(&history)? {
                return Ok(false);
            }
            if !increment(&mut history, s) {
                break;
            }
        }
    }
    Ok(true)
}

fn representation_depth_check(q: &SequentialDistribution, max_depth: usize) -> Result<()> {
    if max_depth >= q.horizon() {
        return Err(invalid(format!(
            "max_depth {max_depth} must be below the horizon {}",
            q.horizon()
        )));
    }
    Ok(())
}

/// True iff, on every history up to `max_depth`, the policy's decision
/// attains the minimum `Q`-expected loss (within 1e-12). This is argmin
/// membership: any tie-breaking the policy uses is accepted.
pub fn verify_policy_representation(
    q: &SequentialDistribution,
    policy: &Policy,
    loss: &LossFunction,
    max_depth: usize,
) -> Result<bool> {
    representation_depth_check(q, max_depth)?;
    for_each_history(q.alphabet(), max_depth, |h| {
        let pmf = q.kernel_eval(h)?;
        let chosen = loss.expected(policy.decide(h)?, &pmf);
        let best = (0..loss.num_predictions())
            .map(|b| loss.expected(b, &pmf))
            .fold(f64::INFINITY, f64::min);
        Ok(chosen <= best + 1e-12)
    })
}

/// Stricter check: the policy's decision equals the smallest-index Bayes
/// decision under `Q` on every history up to `max_depth`, i.e.
/// `mismatched_policy(Q)` and the policy produce identical traces.
pub fn policy_matches_selector(
    q: &SequentialDistribution,
    policy: &Policy,
    loss: &LossFunction,
    max_depth: usize,
) -> Result<bool> {
    representation_depth_check(q, max_depth)?;
    for_each_history(q.alphabet(), max_depth, |h| {
        Ok(policy.decide(h)? == loss.bayes_prediction(&q.kernel_eval(h)?))
    })
}

/// `-Σ_z p(z) ln b(z)`, with `0 · ln 0 = 0`.
pub fn cross_entropy(p: &Pmf, b: &Pmf) -> f64 {
    p.probs()
        .iter()
        .zip(b.probs())
        .filter(|(pz, _)| **pz > 0.0)
        .map(|(pz, bz)| {
            if *bz > 0.0 {
                -pz * bz.ln()
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Index of the candidate with the smallest self-information loss in
/// expectation under `p`; the first one on ties.
pub fn cross_entropy_argmin_check(p: &Pmf, candidates: &[Pmf]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(invalid("no candidates"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.len() != p.len() {
            return Err(invalid(format!(
                "candidate {i} has {} entries, expected {}",
                c.len(),
                p.len()
            )));
        }
        let h = cross_entropy(p, c);
        if h.is_finite() && best.is_none_or(|(_, bh)| h < bh) {
            best = Some((i, h));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Degenerate("every candidate has infinite cross-entropy".into()))
}
