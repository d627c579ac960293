//! Shared dense-stack machinery: Xavier init, forward with ReLU + inverted
//! dropout, and the matching backward. Layers live in a [`ParamStore`] under
//! `"{prefix}.{i}.w"` / `"{prefix}.{i}.b"`.

use crate::error::{Error, Result};
use crate::model::Mode;
use crate::numeric::{matvec, matvec_t, ParamStore, Prng, Tensor2};

/// Initialize `dims.len() - 1` layers: weights Xavier-uniform
/// (`+-sqrt(6 / (fan_in + fan_out))`), biases zero.
pub fn init_layers(store: &mut ParamStore, prefix: &str, dims: &[usize], rng: &mut Prng) {
    for i in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[i], dims[i + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        store.insert(
            &format!("{prefix}.{i}.w"),
            Tensor2::from_vec(fan_out, fan_in, w).unwrap(),
        );
        store.insert(&format!("{prefix}.{i}.b"), Tensor2::zeros(fan_out, 1));
    }
}

#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// `activations[0]` is the input, `activations[L]` the output.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pub preacts: Vec<Vec<f64>>,
    /// Inverted-dropout scale per unit (`None` when dropout is off or the
    /// layer is linear).
    masks: Vec<Option<Vec<f64>>>,
    /// Whether the last layer skipped the ReLU.
    final_linear: bool,
    /// Min |preactivation| over ReLU units: distance to the nearest kink.
    pub relu_margin: f64,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.preacts.len()
    }
}

/// Run the stack. `final_linear` leaves the last layer without ReLU or
/// dropout (used for direct logit heads).
pub fn forward(
    store: &ParamStore,
    prefix: &str,
    n_layers: usize,
    final_linear: bool,
    input: Vec<f64>,
    mode: Mode,
    dropout: f64,
    mut rng: Option<&mut Prng>,
) -> Result<MlpTrace> {
    let mut activations = Vec::with_capacity(n_layers + 1);
    let mut preacts = Vec::with_capacity(n_layers);
    let mut masks = Vec::with_capacity(n_layers);
    let mut relu_margin = f64::INFINITY;
    activations.push(input);
    for i in 0..n_layers {
        let w = store.value(&format!("{prefix}.{i}.w"));
        let b = store.value(&format!("{prefix}.{i}.b"));
        let mut u = matvec(w, activations.last().unwrap())?;
        for (x, bi) in u.iter_mut().zip(b.as_slice()) {
            *x += bi;
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Forward {
                layer: format!("{prefix}.{i}"),
            });
        }
        let linear = final_linear && i == n_layers - 1;
        let mut a = if linear {
            u.clone()
        } else {
            for &x in &u {
                relu_margin = relu_margin.min(x.abs());
            }
            u.iter().map(|&x| x.max(0.0)).collect::<Vec<f64>>()
        };
        let mask = if !linear && mode == Mode::Train && dropout > 0.0 {
            let rng = rng
                .as_deref_mut()
                .ok_or_else(|| Error::Contract("dropout requires an rng in train mode".into()))?;
            let keep = 1.0 / (1.0 - dropout);
            let m: Vec<f64> = a
                .iter()
                .map(|_| if rng.uniform01() >= dropout { keep } else { 0.0 })
                .collect();
            for (x, s) in a.iter_mut().zip(&m) {
                *x *= s;
            }
            Some(m)
        } else {
            None
        };
        preacts.push(u);
        masks.push(mask);
        activations.push(a);
    }
    Ok(MlpTrace {
        activations,
        preacts,
        masks,
        final_linear,
        relu_margin,
    })
}

/// Accumulate layer gradients from `dout` and return the gradient w.r.t.
/// the stack input.
pub fn backward(
    store: &mut ParamStore,
    prefix: &str,
    trace: &MlpTrace,
    dout: &[f64],
) -> Result<Vec<f64>> {
    let n_layers = trace.layer_count();
    let mut d = dout.to_vec();
    for i in (0..n_layers).rev() {
        if let Some(mask) = &trace.masks[i] {
            for (x, s) in d.iter_mut().zip(mask) {
                *x *= s;
            }
        }
        let linear = trace.final_linear && i == n_layers - 1;
        if !linear {
            for (x, &u) in d.iter_mut().zip(&trace.preacts[i]) {
                if u <= 0.0 {
                    *x = 0.0;
                }
            }
        }
        let a_prev = &trace.activations[i];
        {
            let gw = store.grad_mut(&format!("{prefix}.{i}.w"));
            for (r, &du) in d.iter().enumerate() {
                if du == 0.0 {
                    continue;
                }
                let row = gw.row_mut(r);
                for (g, &a) in row.iter_mut().zip(a_prev) {
                    *g += du * a;
                }
            }
        }
        {
            let gb = store.grad_mut(&format!("{prefix}.{i}.b"));
            for (r, &du) in d.iter().enumerate() {
                gb.add_at(r, 0, du);
            }
        }
        let w = store.value(&format!("{prefix}.{i}.w"));
        d = matvec_t(w, &d)?;
    }
    Ok(d)
}
