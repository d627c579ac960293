//! Seeded train/valid/test partitioning.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Prng;

/// Shuffle and partition a dataset. Validation and test take
/// `floor(ratio * N)` instances each; the remainder goes to train.
/// Deterministic for a fixed seed.
pub fn split(
    dataset: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(Error::Argument("split ratios must be positive".into()));
    }
    if (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "split ratios must sum to 1, got {}",
            rt + rv + rs
        )));
    }
    let n = dataset.len();
    if n < 3 {
        return Err(Error::Argument(format!(
            "cannot split {n} instances three ways"
        )));
    }
    let n_valid = (rv * n as f64).floor() as usize;
    let n_test = (rs * n as f64).floor() as usize;
    let n_train = n - n_valid - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Prng::new(seed);
    rng.shuffle(&mut order);

    let take = |range: std::ops::Range<usize>| -> Dataset {
        Dataset::new(
            dataset.schema.clone(),
            range
                .map(|i| dataset.instances[order[i]].clone())
                .collect(),
        )
    };
    let train = take(0..n_train);
    let valid = take(n_train..n_train + n_valid);
    let test = take(n_train + n_valid..n);
    Ok((train, valid, test))
}
