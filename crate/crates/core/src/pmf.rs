//! Finite alphabets and probability mass functions over them.

use std::fmt;

use crate::error::{invalid, Result};

/// Tolerance on `Σ p = 1` for a stored [`Pmf`].
pub const PMF_TOLERANCE: f64 = 1e-12;

/// Inputs further than this from summing to one are rejected rather than
/// renormalised.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// A finite alphabet `{0, …, size-1}` with at least two symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(invalid(format!(
                "alphabet size must be at least 2, got {size}"
            )));
        }
        Ok(Self(size))
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0
    }

    #[inline]
    pub fn contains(self, symbol: usize) -> bool {
        symbol < self.0
    }

    pub(crate) fn check_sequence(self, seq: &[usize]) -> Result<()> {
        match seq.iter().position(|&z| z >= self.0) {
            Some(i) => Err(invalid(format!(
                "symbol {} at position {i} is outside the alphabet of size {}",
                seq[i], self.0
            ))),
            None => Ok(()),
        }
    }
}

/// A probability mass function over an [`Alphabet`].
///
/// Entries are non-negative and sum to one within [`PMF_TOLERANCE`].
#[derive(Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Validates `probs`. Totals within [`PMF_TOLERANCE`] of one are kept
    /// as given; totals within [`RENORMALIZE_TOLERANCE`] are renormalised.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(invalid(format!(
                "a pmf needs at least 2 entries, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0) || !p.is_finite())
        {
            return Err(invalid(format!("pmf entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(invalid(format!("pmf entries sum to {total}")));
        }
        if (total - 1.0).abs() <= PMF_TOLERANCE {
            return Ok(Self(probs));
        }
        Ok(Self::from_weights_unchecked(probs, total))
    }

    /// Normalises non-negative weights with a positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(invalid("a pmf needs at least 2 entries"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("weights sum to zero"));
        }
        Ok(Self::from_weights_unchecked(weights, total))
    }

    fn from_weights_unchecked(mut probs: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Self(probs)
    }

    /// Constructor for values the caller has already normalised exactly
    /// (closed-form kernels). Checked in debug builds only.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|p| *p >= 0.0));
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-10,
            "{probs:?}"
        );
        Self(probs)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let s = alphabet.size();
        Self(vec![1.0 / s as f64; s])
    }

    pub fn dirac(alphabet: Alphabet, symbol: usize) -> Result<Self> {
        if !alphabet.contains(symbol) {
            return Err(invalid(format!("symbol {symbol} outside alphabet")));
        }
        let mut p = vec![0.0; alphabet.size()];
        p[symbol] = 1.0;
        Ok(Self(p))
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn prob(&self, symbol: usize) -> f64 {
        self.0[symbol]
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet(self.0.len())
    }

    /// Index of the largest entry, smallest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        // u landed in the rounding gap above the accumulated total
        last_positive
    }
}

impl fmt::Debug for Pmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pmf").field(&self.0).finish()
    }
}

impl AsRef<[f64]> for Pmf {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
