//! Logistic regression, the factorization machine, and FM augmented with a
//! bank of exponential neurons over its own embeddings.

use crate::data::{FeatureValue, FieldKind, Instance, Schema};
use crate::error::{Error, Result};
use crate::model::arm::ArmNet;
use crate::numeric::{ParamStore, Prng, Tensor2};

/// Active table row and multiplier for each field: categorical fields
/// contribute weight 1 at their category's row, numerical fields their
/// scaled value at the field row.
fn active_rows(schema: &Schema, inst: &Instance) -> Result<(Vec<usize>, Vec<f64>)> {
    let layout = schema.embedding_layout();
    let m = schema.field_count();
    if inst.features.len() != m {
        return Err(Error::Contract(format!(
            "instance has {} features, schema declares {m}",
            inst.features.len()
        )));
    }
    let mut rows = Vec::with_capacity(m);
    let mut vals = Vec::with_capacity(m);
    for (j, f) in inst.features.iter().enumerate() {
        match (f, &schema.field(j).kind) {
            (FeatureValue::Categorical(idx), FieldKind::Categorical { .. }) => {
                rows.push(layout.categorical_row(j, *idx));
                vals.push(1.0);
            }
            (FeatureValue::Numerical(x), FieldKind::Numerical { .. }) => {
                rows.push(layout.numerical_row(j));
                vals.push(*x);
            }
            _ => {
                return Err(Error::Contract(format!(
                    "feature kind mismatch at field {j}"
                )))
            }
        }
    }
    Ok((rows, vals))
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Lr {
    pub schema: Schema,
}

#[derive(Clone, Debug)]
pub struct LrTrace {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Lr {
    pub fn new(schema: Schema) -> Self {
        Lr { schema }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        self.init_into(&mut store, &mut rng);
        store
    }

    pub(crate) fn init_into(&self, store: &mut ParamStore, rng: &mut Prng) {
        let layout = self.schema.embedding_layout();
        let w = (0..layout.total_rows()).map(|_| rng.normal(0.0, 0.01)).collect();
        store.insert("lr.w", Tensor2::from_vec(layout.total_rows(), 1, w).unwrap());
        store.insert("lr.b", Tensor2::zeros(1, 1));
    }

    pub fn forward(&self, store: &ParamStore, inst: &Instance) -> Result<LrTrace> {
        let (rows, vals) = active_rows(&self.schema, inst)?;
        let w = store.value("lr.w");
        let mut z = store.value("lr.b").at(0, 0);
        for (&r, &v) in rows.iter().zip(&vals) {
            z += v * w.at(r, 0);
        }
        Ok(LrTrace {
            rows,
            vals,
            logits: vec![z],
        })
    }

    pub fn backward(&self, store: &mut ParamStore, trace: &LrTrace, dlogits: &[f64]) -> Result<()> {
        let d = single(dlogits)?;
        let gw = store.grad_mut("lr.w");
        for (&r, &v) in trace.rows.iter().zip(&trace.vals) {
            gw.add_at(r, 0, d * v);
        }
        store.grad_mut("lr.b").add_at(0, 0, d);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Factorization machine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Fm {
    pub schema: Schema,
    pub emb_dim: usize,
}

#[derive(Clone, Debug)]
pub struct FmTrace {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
    /// Per-dimension sums `S_t = sum_j val_j v[row_j][t]`.
    pub sums: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Fm {
    pub fn new(schema: Schema, emb_dim: usize) -> Self {
        Fm { schema, emb_dim }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        self.init_into(&mut store, &mut rng);
        store
    }

    pub(crate) fn init_into(&self, store: &mut ParamStore, rng: &mut Prng) {
        Lr::new(self.schema.clone()).init_into(store, rng);
        let layout = self.schema.embedding_layout();
        let data = (0..layout.total_rows() * self.emb_dim)
            .map(|_| rng.normal(0.0, 0.01))
            .collect();
        store.insert(
            "fm.v",
            Tensor2::from_vec(layout.total_rows(), self.emb_dim, data).unwrap(),
        );
    }

    /// Linear part plus the pairwise term via the square-of-sums identity:
    /// `0.5 * sum_t (S_t^2 - sum_j (val_j v_jt)^2)`.
    pub fn forward(&self, store: &ParamStore, inst: &Instance) -> Result<FmTrace> {
        let lr = Lr::new(self.schema.clone()).forward(store, inst)?;
        let v = store.value("fm.v");
        let mut sums = vec![0.0; self.emb_dim];
        let mut sq = 0.0;
        for (&r, &val) in lr.rows.iter().zip(&lr.vals) {
            for (t, s) in sums.iter_mut().enumerate() {
                let e = val * v.at(r, t);
                *s += e;
                sq += e * e;
            }
        }
        let pairwise = 0.5 * (sums.iter().map(|s| s * s).sum::<f64>() - sq);
        Ok(FmTrace {
            rows: lr.rows,
            vals: lr.vals,
            sums,
            logits: vec![lr.logits[0] + pairwise],
        })
    }

    pub fn backward(&self, store: &mut ParamStore, trace: &FmTrace, dlogits: &[f64]) -> Result<()> {
        let d = single(dlogits)?;
        {
            let gw = store.grad_mut("lr.w");
            for (&r, &v) in trace.rows.iter().zip(&trace.vals) {
                gw.add_at(r, 0, d * v);
            }
            store.grad_mut("lr.b").add_at(0, 0, d);
        }
        let v = store.value("fm.v").clone();
        let gv = store.grad_mut("fm.v");
        for (&r, &val) in trace.rows.iter().zip(&trace.vals) {
            for (t, &s) in trace.sums.iter().enumerate() {
                gv.add_at(r, t, d * val * (s - val * v.at(r, t)));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// FM + exponential neurons
// ---------------------------------------------------------------------------

/// FM whose logit is augmented by a linear readout over a trainable bank of
/// exponential neurons fed by the FM embeddings. With zero neurons this is
/// exactly FM.
#[derive(Clone, Debug)]
pub struct FmPlus {
    pub schema: Schema,
    pub emb_dim: usize,
    pub neurons: usize,
    pub exp_clamp: f64,
}

#[derive(Clone, Debug)]
pub struct FmPlusTrace {
    pub fm: FmTrace,
    /// Field embeddings `val_j * v[row_j]` (m x n_e).
    pub e_x: Tensor2,
    /// Neuron outputs (neurons x n_e).
    pub outputs: Tensor2,
    pub clamp_mask: Vec<bool>,
    pub clamp_margin: f64,
    pub logits: Vec<f64>,
}

impl FmPlus {
    pub fn new(schema: Schema, emb_dim: usize, neurons: usize, exp_clamp: f64) -> Self {
        FmPlus {
            schema,
            emb_dim,
            neurons,
            exp_clamp,
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        Fm::new(self.schema.clone(), self.emb_dim).init_into(&mut store, &mut rng);
        let m = self.schema.field_count();
        let w = (0..self.neurons * m).map(|_| rng.normal(0.0, 0.01)).collect();
        store.insert(
            "fmp.w",
            Tensor2::from_vec(self.neurons, m, w).unwrap(),
        );
        let r = (0..self.neurons * self.emb_dim)
            .map(|_| rng.normal(0.0, 0.01))
            .collect();
        store.insert(
            "fmp.r",
            Tensor2::from_vec(self.neurons, self.emb_dim, r).unwrap(),
        );
        store
    }

    pub fn forward(&self, store: &ParamStore, inst: &Instance) -> Result<FmPlusTrace> {
        let fm = Fm::new(self.schema.clone(), self.emb_dim).forward(store, inst)?;
        let m = self.schema.field_count();
        let v = store.value("fm.v");
        let mut e_x = Tensor2::zeros(m, self.emb_dim);
        for (j, (&r, &val)) in fm.rows.iter().zip(&fm.vals).enumerate() {
            for t in 0..self.emb_dim {
                e_x.set(j, t, val * v.at(r, t));
            }
        }
        let (outputs, clamp_mask, clamp_margin, readout) = if self.neurons > 0 {
            let bank = ArmNet::exponential_neurons(&e_x, store.value("fmp.w"), self.exp_clamp)?;
            let r = store.value("fmp.r");
            let mut readout = 0.0;
            for (a, b) in bank.outputs.as_slice().iter().zip(r.as_slice()) {
                readout += a * b;
            }
            (bank.outputs, bank.clamp_mask, bank.margin, readout)
        } else {
            (
                Tensor2::zeros(0, self.emb_dim),
                Vec::new(),
                f64::INFINITY,
                0.0,
            )
        };
        let logits = vec![fm.logits[0] + readout];
        Ok(FmPlusTrace {
            fm,
            e_x,
            outputs,
            clamp_mask,
            clamp_margin,
            logits,
        })
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: &FmPlusTrace,
        dlogits: &[f64],
    ) -> Result<()> {
        let d = single(dlogits)?;
        // FM part first (shares lr.* and fm.v).
        Fm::new(self.schema.clone(), self.emb_dim).backward(store, &trace.fm, dlogits)?;
        if self.neurons == 0 {
            return Ok(());
        }
        let n_e = self.emb_dim;
        let m = self.schema.field_count();
        // d readout / d r = Y; dY = d * r, through exp: dS = dY . Y (clamp-stopped).
        let mut d_sums = Tensor2::zeros(self.neurons, n_e);
        {
            let r = store.value("fmp.r").clone();
            let gr = store.grad_mut("fmp.r");
            for i in 0..self.neurons {
                for t in 0..n_e {
                    let y = trace.outputs.at(i, t);
                    gr.add_at(i, t, d * y);
                    if !trace.clamp_mask[i * n_e + t] {
                        d_sums.set(i, t, d * r.at(i, t) * y);
                    }
                }
            }
        }
        // S = W e_x: dW = dS e_x^T, de_x = W^T dS.
        let dw = d_sums.matmul_bt(&trace.e_x)?;
        {
            let gw = store.grad_mut("fmp.w");
            for (g, &x) in gw.as_mut_slice().iter_mut().zip(dw.as_slice()) {
                *g += x;
            }
        }
        let d_e_x = store.value("fmp.w").matmul_at(&d_sums)?;
        // e_x[j] = val_j * v[row_j].
        let gv = store.grad_mut("fm.v");
        for j in 0..m {
            let row = trace.fm.rows[j];
            let val = trace.fm.vals[j];
            for t in 0..n_e {
                gv.add_at(row, t, val * d_e_x.at(j, t));
            }
        }
        Ok(())
    }
}

fn single(dlogits: &[f64]) -> Result<f64> {
    if dlogits.len() != 1 {
        return Err(Error::Shape(format!(
            "baseline models are single-logit, got {} gradients",
            dlogits.len()
        )));
    }
    Ok(dlogits[0])
}
