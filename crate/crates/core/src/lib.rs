//! Mismatched and universal prediction of sequences over finite alphabets.
//!
//! A learner predicts each symbol of a sequence drawn from an unknown
//! process `P` by acting optimally for a surrogate `Q`. This crate models
//! both processes through their next-symbol kernels, plays the prediction
//! game, measures regret against the `P`-optimal predictor, evaluates the
//! variational-distance and Kullback-Leibler quantities that control it,
//! and checks the corresponding expectation and high-probability bounds.
//!
//! Modules:
//!
//! - [`pmf`], [`loss`], [`process`]: alphabets, kernels, sequence
//!   probabilities and sampling.
//! - [`divergence`]: per-round and expected TV / KL between two processes.
//! - [`predictor`]: Bayes-optimal and mismatched policies, and the
//!   constructions representing an arbitrary policy as a Bayes decision.
//! - [`markov`]: memory-`m` Markov chains, the uniform-prior mixture over
//!   them, and its Metropolis-Hastings approximation.
//! - [`regret`]: episodes, summaries, bound evaluators, coverage.
//! - [`impossibility`]: the lower-bound construction and its parameter search.
//! - [`io`]: CSV and `key=value` file formats.
//! - [`validation`]: self-check suites run by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod error;
pub mod impossibility;
pub mod io;
pub mod loss;
pub mod markov;
pub mod pmf;
pub mod predictor;
pub mod process;
pub mod regret;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
pub use loss::LossFunction;
pub use pmf::{Alphabet, Pmf};
pub use predictor::Policy;
pub use process::SequentialDistribution;
pub use rng::StreamSeed;
