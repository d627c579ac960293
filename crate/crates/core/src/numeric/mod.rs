//! Dense tensors, the seeded PRNG, parameter storage, Adam, and the
//! finite-difference gradient oracle.

mod finite_diff;
mod params;
mod rng;
mod tensor;

pub use finite_diff::finite_diff_grad;
pub use params::{AdamConfig, ParamStore};
pub use rng::Prng;
pub use tensor::{matvec, matvec_t, Tensor2};

/// Relative-error metric used by every gradient check in the repo:
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

/// Numerically stable sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
