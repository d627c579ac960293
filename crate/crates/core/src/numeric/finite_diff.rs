//! Central-difference gradient oracle. This is the ground truth every
//! hand-derived backward pass in the crate is checked against; it only ever
//! reads parameter values, never gradients, so it stays independent of the
//! analytic path.

use crate::error::{Error, Result};
use crate::numeric::{ParamStore, Tensor2};

/// Central differences `(f(theta+h) - f(theta-h)) / 2h` for every coordinate
/// of every parameter in `store`. `f` must be deterministic.
///
/// Returns `(name, gradient)` pairs in the store's parameter order.
pub fn finite_diff_grad<F>(
    store: &mut ParamStore,
    h: f64,
    mut f: F,
) -> Result<Vec<(String, Tensor2)>>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::Argument(format!("finite_diff: h must be > 0, got {h}")));
    }
    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let (rows, cols) = {
            let t = store.value(&name);
            (t.rows(), t.cols())
        };
        let mut grad = Tensor2::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let orig = store.value(&name).at(r, c);
                store.value_mut(&name).set(r, c, orig + h);
                let up = f(store)?;
                store.value_mut(&name).set(r, c, orig - h);
                let down = f(store)?;
                store.value_mut(&name).set(r, c, orig);
                if !up.is_finite() || !down.is_finite() {
                    return Err(Error::Numeric(format!(
                        "finite_diff: objective returned non-finite value near '{name}'[{r},{c}]"
                    )));
                }
                grad.set(r, c, (up - down) / (2.0 * h));
            }
        }
        out.push((name, grad));
    }
    Ok(out)
}
