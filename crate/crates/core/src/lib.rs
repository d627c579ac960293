//! Adaptive relation modeling for tabular data.
//!
//! The library trains and explains models that capture multiplicative
//! feature interactions ("cross features") over categorical/numerical
//! attribute fields. The centerpiece is a network of exponential neurons:
//! each neuron computes `exp(sum_j w_ij e_j)` over field embeddings, with
//! the interaction weights `w_i` produced per input by a multi-head gated
//! attention mechanism whose gates come from the sparse softmax (entmax)
//! family. Sparse gates deactivate fields outright, so every neuron
//! captures an explicit interaction term of input-dependent order, which
//! is what the attribution and interaction-catalog tooling reads back out.
//!
//! Everything is plain `f64` math with hand-derived backward passes; a
//! central-finite-difference oracle ([`numeric::finite_diff_grad`]) gates
//! every gradient in the test suites.
//!
//! Module map:
//! - [`data`] — schemas, dataset loading/splitting, synthetic generation
//! - [`numeric`] — tensors, the seeded PRNG, parameter store, Adam
//! - [`entmax`] — softmax / alpha-entmax forward and Jacobian products
//! - [`model`] — the attention network, DNN, ensemble, LR/FM baselines
//! - [`train`] — logloss/AUC metrics and the early-stopping train loop
//! - [`interpret`] — global/local attribution and the interaction catalog
//! - [`bench`] — inference throughput measurement

pub mod bench;
pub mod data;
pub mod entmax;
pub mod error;
pub mod interpret;
pub mod model;
pub mod numeric;
pub mod train;

pub use error::{Error, Result};
