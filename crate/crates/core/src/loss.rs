//! Bounded loss functions `ℓ: B × Z → [0, L]` on finite domains.

use crate::error::{invalid, Result};
use crate::pmf::{Alphabet, Pmf};

#[derive(Debug, Clone, PartialEq)]
enum LossKind {
    /// `ℓ(b, z) = 1{b ≠ z}` with `B = Z`.
    Classification,
    /// Row `b` holds `ℓ(b, ·)`.
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    kind: LossKind,
    alphabet: Alphabet,
    bound: f64,
}

impl LossFunction {
    /// Misclassification loss; the prediction domain is the alphabet and `L = 1`.
    pub fn classification(alphabet: Alphabet) -> Self {
        Self {
            kind: LossKind::Classification,
            alphabet,
            bound: 1.0,
        }
    }

    /// A loss given as a `|B| × S` table with every entry in `[0, bound]`.
    pub fn table(alphabet: Alphabet, table: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(invalid(format!(
                "loss bound must be finite and non-negative, got {bound}"
            )));
        }
        if table.is_empty() {
            return Err(invalid("loss table needs at least one prediction row"));
        }
        for (b, row) in table.iter().enumerate() {
            if row.len() != alphabet.size() {
                return Err(invalid(format!(
                    "loss row {b} has {} entries, alphabet has {}",
                    row.len(),
                    alphabet.size()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0 && **v <= bound)) {
                return Err(invalid(format!("loss entry {v} outside [0, {bound}]")));
            }
        }
        Ok(Self {
            kind: LossKind::Table(table),
            alphabet,
            bound,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// `L`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `|B|`.
    pub fn num_predictions(&self) -> usize {
        match &self.kind {
            LossKind::Classification => self.alphabet.size(),
            LossKind::Table(t) => t.len(),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.kind, LossKind::Classification)
    }

    #[inline]
    pub fn eval(&self, prediction: usize, outcome: usize) -> f64 {
        match &self.kind {
            LossKind::Classification => {
                if prediction == outcome {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Table(t) => t[prediction][outcome],
        }
    }

    /// `Σ_z pmf(z) ℓ(b, z)`.
    pub fn expected(&self, prediction: usize, pmf: &Pmf) -> f64 {
        match &self.kind {
            LossKind::Classification => 1.0 - pmf.prob(prediction),
            LossKind::Table(t) => t[prediction]
                .iter()
                .zip(pmf.probs())
                .map(|(l, p)| l * p)
                .sum(),
        }
    }

    /// Minimiser of the expected loss under `pmf`; ties go to the smallest
    /// prediction index.
    pub fn bayes_prediction(&self, pmf: &Pmf) -> usize {
        match &self.kind {
            LossKind::Classification => pmf.mode(),
            LossKind::Table(_) => {
                let mut best = 0;
                let mut best_loss = self.expected(0, pmf);
                for b in 1..self.num_predictions() {
                    let l = self.expected(b, pmf);
                    if l < best_loss {
                        best = b;
                        best_loss = l;
                    }
                }
                best
            }
        }
    }
}
