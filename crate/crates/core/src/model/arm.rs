//! The adaptive relation modeling network.
//!
//! Forward pipeline per instance:
//! 1. embed every field into `n_e` dimensions (`E_x`, m x n_e);
//! 2. per head, score fields against each neuron's query through a shared
//!    bilinear form, gate the scores with entmax, and recalibrate the
//!    neuron's global value vector: `w_i = entmax(q_i^T W_att E_x^T) . v_i`;
//! 3. each exponential neuron emits `y_i = exp(clamp(sum_j w_ij e_j))`,
//!    equal to the product of exponentiated embeddings raised to the gated
//!    weights - an explicit cross feature whose order is the gate support;
//! 4. the concatenated neuron outputs feed an MLP and a linear prediction
//!    layer producing raw logits.
//!
//! Backward is hand-derived; the exponential-neuron block uses
//! `dY/de_j = diag(w_ij y_i)` and `dY/dw_ij = y_i . e_j`, coordinates
//! stopped by the clamp get zero gradient, and the entmax gates
//! backpropagate through [`entmax_jvp`].

use crate::data::{FeatureValue, Instance, Schema};
use crate::entmax::{entmax_jvp, entmax_with_margin};
use crate::error::{Error, Result};
use crate::model::{mlp, ArmConfig, MlpTrace, Mode};
use crate::numeric::{matvec, matvec_t, ParamStore, Prng, Tensor2};

#[derive(Clone, Debug)]
pub struct ArmNet {
    pub schema: Schema,
    pub cfg: ArmConfig,
}

/// Gate stage output for one head.
#[derive(Clone, Debug)]
pub struct GateOutput {
    /// Raw alignment scores (o x m).
    pub scores: Tensor2,
    /// Entmax of each score row (o x m, simplex rows).
    pub gates: Tensor2,
    /// Gated interaction weights `w = z . v` (o x m).
    pub weights: Tensor2,
    /// Distance of any score to its row's support threshold.
    pub margin: f64,
}

/// Exponential-neuron stage output.
#[derive(Clone, Debug)]
pub struct NeuronOutput {
    /// `exp` of the clamped inner sums (o x n_e).
    pub outputs: Tensor2,
    /// True where the clamp bound stopped the sum (row-major o x n_e).
    pub clamp_mask: Vec<bool>,
    /// Distance of any |sum| to the clamp bound.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct HeadTrace {
    /// Precomputed query alignment `P = Q^T W_att` (o x n_e).
    pub projection: Tensor2,
    pub scores: Tensor2,
    pub gates: Tensor2,
    pub weights: Tensor2,
    pub outputs: Tensor2,
    pub clamp_mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct ArmTrace {
    pub mode: Mode,
    /// Raw feature values, kept for the embedding-gradient scatter.
    pub features: Vec<FeatureValue>,
    pub e_x: Tensor2,
    pub heads: Vec<HeadTrace>,
    /// Concatenation of all vectorized neuron outputs (K*o*n_e).
    pub y_concat: Vec<f64>,
    pub mlp: MlpTrace,
    pub logits: Vec<f64>,
    /// Min distance to any gradient kink seen during the pass.
    pub stability_margin: f64,
}

impl ArmTrace {
    /// MLP output h (n_h).
    pub fn hidden(&self) -> &[f64] {
        self.mlp.output()
    }
}

/// Eval-time cache of the per-head query alignments, so inference costs
/// `O(K o m n_e)` instead of `O(K o m n_e^2)`. Produces bit-identical
/// logits to the uncached path because the cached product is computed by
/// the same routine the forward pass uses.
#[derive(Clone, Debug)]
pub struct EvalCache {
    projections: Vec<Tensor2>,
}

impl ArmNet {
    pub fn new(schema: Schema, cfg: ArmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ArmNet { schema, cfg })
    }

    fn mlp_dims(&self) -> Vec<usize> {
        let c = &self.cfg;
        let mut dims = vec![c.heads * c.neurons_per_head * c.emb_dim];
        dims.extend_from_slice(&c.mlp_widths);
        dims.push(c.mlp_out);
        dims
    }

    fn mlp_layer_count(&self) -> usize {
        self.mlp_dims().len() - 1
    }

    /// Seed every tensor: embeddings and attention vectors `N(0, 0.01)`,
    /// dense layers Xavier-uniform, biases zero. Creation order is fixed,
    /// so a seed pins every draw.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        self.init_into(&mut store, &mut rng);
        store
    }

    pub(crate) fn init_into(&self, store: &mut ParamStore, rng: &mut Prng) {
        let c = &self.cfg;
        let layout = self.schema.embedding_layout();
        store.insert(
            "embed",
            gaussian_tensor(layout.total_rows(), c.emb_dim, rng),
        );
        for k in 0..c.heads {
            store.insert(
                &format!("head{k}.q"),
                gaussian_tensor(c.emb_dim, c.neurons_per_head, rng),
            );
            store.insert(
                &format!("head{k}.v"),
                gaussian_tensor(self.schema.field_count(), c.neurons_per_head, rng),
            );
            store.insert(
                &format!("head{k}.w_att"),
                gaussian_tensor(c.emb_dim, c.emb_dim, rng),
            );
        }
        mlp::init_layers(store, "mlp", &self.mlp_dims(), rng);
        mlp::init_layers(store, "pred", &[c.mlp_out, c.out_dim], rng);
    }

    /// Field embeddings for one instance (m x n_e): a column lookup for
    /// categorical fields, the scaled field embedding `x_j * e_j` for
    /// numerical ones.
    pub fn embed_fields(&self, store: &ParamStore, inst: &Instance) -> Result<Tensor2> {
        embed_with(&self.schema, store.value("embed"), inst, self.cfg.emb_dim)
    }

    /// Query alignment `P = Q^T W_att` for one head (o x n_e).
    pub fn attention_projection(&self, store: &ParamStore, head: usize) -> Result<Tensor2> {
        let q = store.value(&format!("head{head}.q"));
        let w_att = store.value(&format!("head{head}.w_att"));
        q.matmul_at(w_att)
    }

    /// Score, gate, and recalibrate one head's value vectors against the
    /// instance embeddings.
    pub fn gated_attention(
        &self,
        store: &ParamStore,
        e_x: &Tensor2,
        head: usize,
    ) -> Result<GateOutput> {
        let p = self.attention_projection(store, head)?;
        self.gated_attention_with(store, &p, e_x, head)
    }

    fn gated_attention_with(
        &self,
        store: &ParamStore,
        projection: &Tensor2,
        e_x: &Tensor2,
        head: usize,
    ) -> Result<GateOutput> {
        let v = store.value(&format!("head{head}.v"));
        let scores = projection.matmul_bt(e_x)?; // o x m
        let o = scores.rows();
        let m = scores.cols();
        let mut gates = Tensor2::zeros(o, m);
        let mut weights = Tensor2::zeros(o, m);
        let mut margin = f64::INFINITY;
        for i in 0..o {
            let (gate, row_margin) = entmax_with_margin(scores.row(i), self.cfg.alpha)?;
            margin = margin.min(row_margin);
            for j in 0..m {
                let z = gate.as_slice()[j];
                gates.set(i, j, z);
                weights.set(i, j, z * v.at(j, i));
            }
        }
        Ok(GateOutput {
            scores,
            gates,
            weights,
            margin,
        })
    }

    /// `y_i = exp(clamp(sum_j w_ij e_j))` for a bank of neurons. With no
    /// clamping this equals the elementwise product of `exp(e_j)^(w_ij)`.
    pub fn exponential_neurons(
        e_x: &Tensor2,
        weights: &Tensor2,
        clamp: f64,
    ) -> Result<NeuronOutput> {
        let sums = weights.matmul(e_x)?; // o x n_e
        let mut outputs = Tensor2::zeros(sums.rows(), sums.cols());
        let mut clamp_mask = vec![false; sums.len()];
        let mut margin = f64::INFINITY;
        for r in 0..sums.rows() {
            for c in 0..sums.cols() {
                let s = sums.at(r, c);
                margin = margin.min((s.abs() - clamp).abs());
                let clamped = s.clamp(-clamp, clamp);
                clamp_mask[r * sums.cols() + c] = s != clamped;
                outputs.set(r, c, clamped.exp());
            }
        }
        Ok(NeuronOutput {
            outputs,
            clamp_mask,
            margin,
        })
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        inst: &Instance,
        mode: Mode,
        rng: Option<&mut Prng>,
    ) -> Result<ArmTrace> {
        self.forward_inner(store, inst, mode, rng, None)
    }

    pub fn eval_cache(&self, store: &ParamStore) -> Result<EvalCache> {
        let projections = (0..self.cfg.heads)
            .map(|k| self.attention_projection(store, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalCache { projections })
    }

    /// Eval-mode logits using precomputed query alignments.
    pub fn logits_cached(
        &self,
        store: &ParamStore,
        cache: &EvalCache,
        inst: &Instance,
    ) -> Result<Vec<f64>> {
        let trace = self.forward_inner(store, inst, Mode::Eval, None, Some(cache))?;
        Ok(trace.logits)
    }

    fn forward_inner(
        &self,
        store: &ParamStore,
        inst: &Instance,
        mode: Mode,
        mut rng: Option<&mut Prng>,
        cache: Option<&EvalCache>,
    ) -> Result<ArmTrace> {
        let c = &self.cfg;
        let e_x = self.embed_fields(store, inst)?;
        let mut heads = Vec::with_capacity(c.heads);
        let mut y_concat = Vec::with_capacity(c.heads * c.neurons_per_head * c.emb_dim);
        let mut stability_margin = f64::INFINITY;
        for k in 0..c.heads {
            let projection = match cache {
                Some(cache) => cache.projections[k].clone(),
                None => self.attention_projection(store, k)?,
            };
            let gate = self.gated_attention_with(store, &projection, &e_x, k)?;
            let neurons = Self::exponential_neurons(&e_x, &gate.weights, c.exp_clamp)?;
            stability_margin = stability_margin.min(gate.margin).min(neurons.margin);
            for i in 0..c.neurons_per_head {
                y_concat.extend_from_slice(neurons.outputs.row(i));
            }
            heads.push(HeadTrace {
                projection,
                scores: gate.scores,
                gates: gate.gates,
                weights: gate.weights,
                outputs: neurons.outputs,
                clamp_mask: neurons.clamp_mask,
            });
        }
        let mlp_trace = mlp::forward(
            store,
            "mlp",
            self.mlp_layer_count(),
            false,
            y_concat.clone(),
            mode,
            c.dropout,
            rng.as_deref_mut(),
        )?;
        stability_margin = stability_margin.min(mlp_trace.relu_margin);
        let w_p = store.value("pred.0.w");
        let b_p = store.value("pred.0.b");
        let mut logits = matvec(w_p, mlp_trace.output())?;
        for (l, b) in logits.iter_mut().zip(b_p.as_slice()) {
            *l += b;
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Forward {
                layer: "pred".into(),
            });
        }
        Ok(ArmTrace {
            mode,
            features: inst.features.clone(),
            e_x,
            heads,
            y_concat,
            mlp: mlp_trace,
            logits,
            stability_margin,
        })
    }

    /// Accumulate gradients for every tensor from a train-mode trace.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: &ArmTrace,
        dlogits: &[f64],
    ) -> Result<()> {
        let c = &self.cfg;
        if trace.mode != Mode::Train {
            return Err(Error::Contract(
                "backward requires a train-mode trace".into(),
            ));
        }
        if dlogits.len() != c.out_dim {
            return Err(Error::Shape(format!(
                "dlogits has {} entries, expected {}",
                dlogits.len(),
                c.out_dim
            )));
        }
        if trace.heads.len() != c.heads {
            return Err(Error::Contract("trace is missing head intermediates".into()));
        }

        // Prediction layer.
        let h = trace.hidden().to_vec();
        {
            let gw = store.grad_mut("pred.0.w");
            for (r, &d) in dlogits.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = gw.row_mut(r);
                for (g, &a) in row.iter_mut().zip(&h) {
                    *g += d * a;
                }
            }
            let gb = store.grad_mut("pred.0.b");
            for (r, &d) in dlogits.iter().enumerate() {
                gb.add_at(r, 0, d);
            }
        }
        let dh = matvec_t(store.value("pred.0.w"), dlogits)?;

        // Interaction MLP.
        let dy = mlp::backward(store, "mlp", &trace.mlp, &dh)?;

        // Heads, in reverse of nothing in particular (they are independent).
        let mut d_e_x = Tensor2::zeros(trace.e_x.rows(), trace.e_x.cols());
        let o = c.neurons_per_head;
        let n_e = c.emb_dim;
        for (k, head) in trace.heads.iter().enumerate() {
            // Slice this head's portion of dy into dY (o x n_e).
            let base = k * o * n_e;
            let mut d_out = Tensor2::zeros(o, n_e);
            for i in 0..o {
                d_out
                    .row_mut(i)
                    .copy_from_slice(&dy[base + i * n_e..base + (i + 1) * n_e]);
            }
            // Through the exponential: dS = dY . Y, zero where clamped.
            let mut d_sums = Tensor2::zeros(o, n_e);
            for i in 0..o {
                for t in 0..n_e {
                    if !head.clamp_mask[i * n_e + t] {
                        d_sums.set(i, t, d_out.at(i, t) * head.outputs.at(i, t));
                    }
                }
            }
            // S = W E_x, so dW = dS E_x^T and dE_x += W^T dS.
            let d_weights = d_sums.matmul_bt(&trace.e_x)?; // o x m
            let de_from_neurons = head.weights.matmul_at(&d_sums)?; // m x n_e
            accumulate(&mut d_e_x, &de_from_neurons);

            // w = z . v.
            let v_name = format!("head{k}.v");
            let m = self.schema.field_count();
            let mut d_gates = Tensor2::zeros(o, m);
            {
                let v = store.value(&v_name).clone();
                let gv = store.grad_mut(&v_name);
                for i in 0..o {
                    for j in 0..m {
                        let dw = d_weights.at(i, j);
                        d_gates.set(i, j, dw * v.at(j, i));
                        gv.add_at(j, i, dw * head.gates.at(i, j));
                    }
                }
            }
            // Gates back through entmax.
            let mut d_scores = Tensor2::zeros(o, m);
            for i in 0..o {
                let dz = entmax_jvp(head.gates.row(i), c.alpha, d_gates.row(i))?;
                d_scores.row_mut(i).copy_from_slice(&dz);
            }
            // scores = P E_x^T: dP = dscores E_x, dE_x += dscores^T P.
            let d_projection = d_scores.matmul(&trace.e_x)?; // o x n_e
            let de_from_attention = d_scores.matmul_at(&head.projection)?; // m x n_e
            accumulate(&mut d_e_x, &de_from_attention);
            // P = Q^T W_att: dQ = W_att dP^T, dW_att = Q dP.
            let q_name = format!("head{k}.q");
            let w_att_name = format!("head{k}.w_att");
            let dq = store.value(&w_att_name).matmul_bt(&d_projection)?;
            accumulate(store.grad_mut(&q_name), &dq);
            let dw_att = store.value(&q_name).matmul(&d_projection)?;
            accumulate(store.grad_mut(&w_att_name), &dw_att);
        }

        // Embedding table.
        let layout = self.schema.embedding_layout();
        let g_embed = store.grad_mut("embed");
        scatter_embedding_grads(&layout, &trace.features, &d_e_x, g_embed);
        Ok(())
    }
}

fn accumulate(into: &mut Tensor2, from: &Tensor2) {
    debug_assert_eq!(into.rows(), from.rows());
    debug_assert_eq!(into.cols(), from.cols());
    for (a, b) in into.as_mut_slice().iter_mut().zip(from.as_slice()) {
        *a += b;
    }
}

/// Shared by the attention net and the DNN (which has its own table).
pub(crate) fn embed_with(
    schema: &Schema,
    table: &Tensor2,
    inst: &Instance,
    emb_dim: usize,
) -> Result<Tensor2> {
    let layout = schema.embedding_layout();
    let m = schema.field_count();
    if inst.features.len() != m {
        return Err(Error::Contract(format!(
            "instance has {} features, schema declares {m}",
            inst.features.len()
        )));
    }
    let mut e_x = Tensor2::zeros(m, emb_dim);
    for (j, feature) in inst.features.iter().enumerate() {
        match (feature, &schema.field(j).kind) {
            (
                FeatureValue::Categorical(idx),
                crate::data::FieldKind::Categorical { cardinality },
            ) => {
                if let Some(i) = idx {
                    if *i as usize >= *cardinality {
                        return Err(Error::Contract(format!(
                            "embedding lookup out of range: field {j} index {i} (cardinality {cardinality})"
                        )));
                    }
                }
                let row = layout.categorical_row(j, *idx);
                e_x.row_mut(j).copy_from_slice(table.row(row));
            }
            (FeatureValue::Numerical(x), crate::data::FieldKind::Numerical { .. }) => {
                let row = layout.numerical_row(j);
                for (out, &e) in e_x.row_mut(j).iter_mut().zip(table.row(row)) {
                    *out = x * e;
                }
            }
            _ => {
                return Err(Error::Contract(format!(
                    "feature kind mismatch at field {j}"
                )))
            }
        }
    }
    Ok(e_x)
}

/// Route dE_x rows into the embedding table; numerical fields scale the
/// gradient by the feature value (the embedding enters as `x * e`).
pub(crate) fn scatter_embedding_grads(
    layout: &crate::data::EmbeddingLayout,
    features: &[FeatureValue],
    d_e_x: &Tensor2,
    g_embed: &mut Tensor2,
) {
    for (j, feature) in features.iter().enumerate() {
        match feature {
            FeatureValue::Categorical(idx) => {
                let row = layout.categorical_row(j, *idx);
                let g_row = g_embed.row_mut(row);
                for (g, &d) in g_row.iter_mut().zip(d_e_x.row(j)) {
                    *g += d;
                }
            }
            FeatureValue::Numerical(x) => {
                let row = layout.numerical_row(j);
                let g_row = g_embed.row_mut(row);
                for (g, &d) in g_row.iter_mut().zip(d_e_x.row(j)) {
                    *g += x * d;
                }
            }
        }
    }
}

fn gaussian_tensor(rows: usize, cols: usize, rng: &mut Prng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.normal(0.0, 0.01)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FieldKind, FieldSpec};
    use crate::entmax::SimplexVector;

    fn cat_schema(cards: &[usize]) -> Schema {
        Schema::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &c)| FieldSpec {
                    field_id: i,
                    name: format!("f{i}"),
                    kind: FieldKind::Categorical { cardinality: c },
                })
                .collect(),
        )
        .unwrap()
    }

    fn cat_inst(indices: &[u32]) -> Instance {
        Instance {
            features: indices
                .iter()
                .map(|&i| FeatureValue::Categorical(Some(i)))
                .collect(),
            label: true,
        }
    }

    fn tiny_cfg(heads: usize, neurons: usize, emb: usize, alpha: f64) -> ArmConfig {
        ArmConfig {
            emb_dim: emb,
            heads,
            neurons_per_head: neurons,
            alpha,
            mlp_widths: vec![5],
            mlp_out: 4,
            out_dim: 1,
            exp_clamp: 15.0,
            dnn_widths: vec![4],
            dropout: 0.0,
        }
    }

    #[test]
    fn numerical_embedding_scales_the_field_vector() {
        let schema = Schema::new(vec![FieldSpec {
            field_id: 0,
            name: "x".into(),
            kind: FieldKind::Numerical { range: (0.0, 1.0) },
        }])
        .unwrap();
        let arm = ArmNet::new(schema, tiny_cfg(1, 1, 3, 2.0)).unwrap();
        let store = arm.init_params(5);
        let e_hat: Vec<f64> = store.value("embed").row(0).to_vec();

        let full = arm
            .embed_fields(
                &store,
                &Instance {
                    features: vec![FeatureValue::Numerical(1.0)],
                    label: false,
                },
            )
            .unwrap();
        assert_eq!(full.row(0), &e_hat[..]);

        let half = arm
            .embed_fields(
                &store,
                &Instance {
                    features: vec![FeatureValue::Numerical(0.5)],
                    label: false,
                },
            )
            .unwrap();
        for (h, e) in half.row(0).iter().zip(&e_hat) {
            assert_eq!(*h, 0.5 * e);
        }
    }

    #[test]
    fn categorical_embedding_matches_direct_row_read() {
        let schema = cat_schema(&[4, 3]);
        let arm = ArmNet::new(schema.clone(), tiny_cfg(1, 1, 3, 2.0)).unwrap();
        let store = arm.init_params(5);
        let layout = schema.embedding_layout();
        let e_x = arm.embed_fields(&store, &cat_inst(&[2, 0])).unwrap();
        assert_eq!(e_x.row(0), store.value("embed").row(layout.categorical_row(0, Some(2))));
        assert_eq!(e_x.row(1), store.value("embed").row(layout.categorical_row(1, Some(0))));
    }

    #[test]
    fn zero_attention_matrix_gives_uniform_gates_and_v_over_m() {
        let schema = cat_schema(&[2, 2, 2]);
        let arm = ArmNet::new(schema, tiny_cfg(1, 2, 3, 1.7)).unwrap();
        let mut store = arm.init_params(9);
        store.value_mut("head0.w_att").fill(0.0);
        let e_x = arm.embed_fields(&store, &cat_inst(&[0, 1, 0])).unwrap();
        let gate = arm.gated_attention(&store, &e_x, 0).unwrap();
        let m = 3.0;
        let v = store.value("head0.v").clone();
        for i in 0..2 {
            for j in 0..3 {
                assert!((gate.gates.at(i, j) - 1.0 / m).abs() < 1e-12);
                assert!((gate.weights.at(i, j) - v.at(j, i) / m).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dominant_score_with_sparsemax_gives_one_hot_gate() {
        let schema = cat_schema(&[2, 2, 2]);
        let arm = ArmNet::new(schema, tiny_cfg(1, 2, 2, 2.0)).unwrap();
        let mut store = arm.init_params(3);
        // Identity bilinear form; queries select coordinate 0.
        *store.value_mut("head0.w_att") = Tensor2::identity(2);
        *store.value_mut("head0.q") =
            Tensor2::from_vec(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        // Field embeddings with a margin > 1 on field 0.
        let e_x = Tensor2::from_vec(3, 2, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let gate = arm.gated_attention(&store, &e_x, 0).unwrap();
        let v = store.value("head0.v").clone();
        for i in 0..2 {
            // Closed-form sparsemax of [3, 0, 1]: threshold 2, one-hot on field 0.
            assert_eq!(gate.gates.row(i), &[1.0, 0.0, 0.0]);
            assert_eq!(gate.weights.at(i, 0), v.at(0, i));
            assert_eq!(gate.weights.at(i, 1), 0.0);
            assert_eq!(gate.weights.at(i, 2), 0.0);
        }
    }

    #[test]
    fn permuting_fields_permutes_gate_and_weight_columns() {
        let schema = cat_schema(&[2, 2, 2, 2]);
        let arm = ArmNet::new(schema, tiny_cfg(1, 3, 3, 1.5)).unwrap();
        let mut store = arm.init_params(11);
        let mut rng = Prng::new(4);
        let e_x = Tensor2::from_vec(4, 3, (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut e_perm = Tensor2::zeros(4, 3);
        for (new_j, &old_j) in perm.iter().enumerate() {
            e_perm.row_mut(new_j).copy_from_slice(e_x.row(old_j));
        }
        let v = store.value("head0.v").clone();
        let base = arm.gated_attention(&store, &e_x, 0).unwrap();
        // Permute the value rows the same way, then compare columns.
        let mut v_perm = Tensor2::zeros(4, 3);
        for (new_j, &old_j) in perm.iter().enumerate() {
            v_perm.row_mut(new_j).copy_from_slice(v.row(old_j));
        }
        *store.value_mut("head0.v") = v_perm;
        let permuted = arm.gated_attention(&store, &e_perm, 0).unwrap();
        for i in 0..3 {
            for (new_j, &old_j) in perm.iter().enumerate() {
                assert_eq!(permuted.gates.at(i, new_j), base.gates.at(i, old_j));
                assert_eq!(permuted.weights.at(i, new_j), base.weights.at(i, old_j));
            }
        }
    }

    #[test]
    fn zero_weights_give_all_ones_neuron() {
        let e_x = Tensor2::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.3, 0.0, -0.7]).unwrap();
        let w = Tensor2::zeros(2, 2);
        let out = ArmNet::exponential_neurons(&e_x, &w, 15.0).unwrap();
        assert!(out.outputs.as_slice().iter().all(|&y| y == 1.0));
    }

    #[test]
    fn one_hot_weight_selects_a_single_field() {
        let e_x = Tensor2::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.3, 0.0, -0.7]).unwrap();
        let w = Tensor2::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let out = ArmNet::exponential_neurons(&e_x, &w, 15.0).unwrap();
        for (y, e) in out.outputs.row(0).iter().zip(e_x.row(1)) {
            assert!((y - e.exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_product_form_oracle() {
        // y_i = prod_j exp(e_j)^(w_ij), elementwise.
        let mut rng = Prng::new(21);
        for _ in 0..50 {
            let e_x =
                Tensor2::from_vec(3, 2, (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
            let w =
                Tensor2::from_vec(2, 3, (0..6).map(|_| rng.uniform(-1.5, 1.5)).collect()).unwrap();
            let out = ArmNet::exponential_neurons(&e_x, &w, 50.0).unwrap();
            for i in 0..2 {
                for t in 0..2 {
                    let mut prod = 1.0;
                    for j in 0..3 {
                        prod *= e_x.at(j, t).exp().powf(w.at(i, j));
                    }
                    assert!((out.outputs.at(i, t) - prod).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn clamp_bounds_outputs_and_marks_mask() {
        let e_x = Tensor2::from_vec(1, 1, vec![10.0]).unwrap();
        let w = Tensor2::from_vec(1, 1, vec![3.0]).unwrap();
        let out = ArmNet::exponential_neurons(&e_x, &w, 15.0).unwrap();
        assert_eq!(out.outputs.at(0, 0), 15.0f64.exp());
        assert!(out.clamp_mask[0]);
    }

    #[test]
    fn zero_value_vectors_make_logits_instance_independent() {
        let schema = cat_schema(&[3, 3]);
        let arm = ArmNet::new(schema, tiny_cfg(1, 1, 2, 1.5)).unwrap();
        let mut store = arm.init_params(13);
        store.value_mut("head0.v").fill(0.0);
        let a = arm
            .forward(&store, &cat_inst(&[0, 1]), Mode::Eval, None)
            .unwrap();
        let b = arm
            .forward(&store, &cat_inst(&[2, 0]), Mode::Eval, None)
            .unwrap();
        assert_eq!(a.logits, b.logits);
    }

    #[test]
    fn eval_mode_is_deterministic_even_with_dropout_configured() {
        let schema = cat_schema(&[3, 3]);
        let mut cfg = tiny_cfg(2, 2, 3, 1.5);
        cfg.dropout = 0.5;
        let arm = ArmNet::new(schema, cfg).unwrap();
        let store = arm.init_params(7);
        let a = arm
            .forward(&store, &cat_inst(&[1, 2]), Mode::Eval, None)
            .unwrap();
        let b = arm
            .forward(&store, &cat_inst(&[1, 2]), Mode::Eval, None)
            .unwrap();
        assert_eq!(a.logits, b.logits);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        // Independent straight-line recomputation on m=2, n_e=2, K=1, o=2,
        // alpha=1, using its own naive softmax.
        let schema = cat_schema(&[3, 4]);
        let cfg = ArmConfig {
            emb_dim: 2,
            heads: 1,
            neurons_per_head: 2,
            alpha: 1.0,
            mlp_widths: vec![],
            mlp_out: 3,
            out_dim: 1,
            ..tiny_cfg(1, 2, 2, 1.0)
        };
        let arm = ArmNet::new(schema.clone(), cfg).unwrap();
        let store = arm.init_params(99);
        let inst = cat_inst(&[2, 1]);
        let trace = arm.forward(&store, &inst, Mode::Eval, None).unwrap();

        // --- oracle ---
        let layout = schema.embedding_layout();
        let table = store.value("embed");
        let e: Vec<Vec<f64>> = vec![
            table.row(layout.categorical_row(0, Some(2))).to_vec(),
            table.row(layout.categorical_row(1, Some(1))).to_vec(),
        ];
        let q = store.value("head0.q");
        let w_att = store.value("head0.w_att");
        let v = store.value("head0.v");
        let mut y_concat = Vec::new();
        for i in 0..2 {
            // p_i = q_i^T W_att
            let mut p = [0.0; 2];
            for b in 0..2 {
                for a in 0..2 {
                    p[b] += q.at(a, i) * w_att.at(a, b);
                }
            }
            // scores and naive softmax
            let mut scores = [0.0; 2];
            for (j, ej) in e.iter().enumerate() {
                scores[j] = p[0] * ej[0] + p[1] * ej[1];
            }
            let exps = [scores[0].exp(), scores[1].exp()];
            let denom = exps[0] + exps[1];
            let z = [exps[0] / denom, exps[1] / denom];
            let w = [z[0] * v.at(0, i), z[1] * v.at(1, i)];
            for t in 0..2 {
                let s = w[0] * e[0][t] + w[1] * e[1][t];
                y_concat.push(s.exp());
            }
        }
        // MLP (single layer to n_h=3, ReLU) then prediction layer.
        let w0 = store.value("mlp.0.w");
        let b0 = store.value("mlp.0.b");
        let mut h = [0.0; 3];
        for r in 0..3 {
            let mut u = b0.at(r, 0);
            for (c, y) in y_concat.iter().enumerate() {
                u += w0.at(r, c) * y;
            }
            h[r] = u.max(0.0);
        }
        let wp = store.value("pred.0.w");
        let bp = store.value("pred.0.b");
        let mut logit = bp.at(0, 0);
        for (c, hv) in h.iter().enumerate() {
            logit += wp.at(0, c) * hv;
        }
        assert!(
            (trace.logits[0] - logit).abs() < 1e-12,
            "{} vs {}",
            trace.logits[0],
            logit
        );
    }

    #[test]
    fn holding_gates_fixed_zero_weight_deactivates_the_field() {
        let mut rng = Prng::new(17);
        let mut e_x =
            Tensor2::from_vec(4, 3, (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let mut w =
            Tensor2::from_vec(2, 4, (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        w.set(0, 2, 0.0); // neuron 0 deactivates field 2
        let before = ArmNet::exponential_neurons(&e_x, &w, 15.0).unwrap();
        for t in 0..3 {
            e_x.set(2, t, rng.uniform(-5.0, 5.0));
        }
        let after = ArmNet::exponential_neurons(&e_x, &w, 15.0).unwrap();
        assert_eq!(before.outputs.row(0), after.outputs.row(0));
        assert_ne!(before.outputs.row(1), after.outputs.row(1));
    }

    #[test]
    fn gate_support_bounds() {
        let schema = cat_schema(&[2; 5]);
        let m = 5;
        // alpha = 2: support never exceeds m.
        let arm2 = ArmNet::new(schema.clone(), tiny_cfg(1, 3, 3, 2.0)).unwrap();
        let store2 = arm2.init_params(23);
        let e_x = arm2.embed_fields(&store2, &cat_inst(&[0, 1, 0, 1, 0])).unwrap();
        let gate2 = arm2.gated_attention(&store2, &e_x, 0).unwrap();
        for i in 0..3 {
            let support = gate2.weights.row(i).iter().filter(|&&w| w != 0.0).count();
            assert!(support <= m);
        }
        // alpha = 1 with nonzero v: support is exactly m.
        let arm1 = ArmNet::new(schema, tiny_cfg(1, 3, 3, 1.0)).unwrap();
        let mut store1 = arm1.init_params(23);
        for x in store1.value_mut("head0.v").as_mut_slice() {
            if *x == 0.0 {
                *x = 0.01;
            }
        }
        let gate1 = arm1.gated_attention(&store1, &e_x, 0).unwrap();
        for i in 0..3 {
            let support = gate1.weights.row(i).iter().filter(|&&w| w != 0.0).count();
            assert_eq!(support, m);
        }
    }

    #[test]
    fn trace_invariants_hold() {
        let schema = cat_schema(&[4, 3, 5]);
        let arm = ArmNet::new(schema, tiny_cfg(2, 3, 3, 1.5)).unwrap();
        let store = arm.init_params(31);
        let trace = arm
            .forward(&store, &cat_inst(&[3, 0, 4]), Mode::Eval, None)
            .unwrap();
        let bound = 15.0f64.exp();
        for head in &trace.heads {
            for i in 0..head.gates.rows() {
                SimplexVector::new(head.gates.row(i).to_vec()).unwrap();
            }
            for &y in head.outputs.as_slice() {
                assert!(y.is_finite() && y <= bound);
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic_with_zero_biases() {
        let schema = cat_schema(&[4, 3]);
        let arm = ArmNet::new(schema, tiny_cfg(2, 2, 3, 1.5)).unwrap();
        let a = arm.init_params(42);
        let b = arm.init_params(42);
        for name in a.names() {
            assert_eq!(a.value(name), b.value(name), "tensor {name}");
        }
        assert!(a.value("mlp.0.b").as_slice().iter().all(|&x| x == 0.0));
        assert!(a.value("pred.0.b").as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embedding_init_std_is_near_one_hundredth() {
        let schema = cat_schema(&[5000, 5000]);
        let arm = ArmNet::new(schema, tiny_cfg(1, 1, 2, 1.5)).unwrap();
        let store = arm.init_params(8);
        let data = store.value("embed").as_slice();
        let n = data.len() as f64;
        assert!(n >= 10_000.0);
        let mean: f64 = data.iter().sum::<f64>() / n;
        let var: f64 = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        // Sampling SE of the std is about sigma / sqrt(2n).
        let se = 0.01 / (2.0 * n).sqrt();
        assert!(
            (std - 0.01).abs() < 3.0 * se,
            "std {std} outside 0.01 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn cached_logits_are_bit_identical_to_uncached() {
        let schema = cat_schema(&[6, 4, 5]);
        let arm = ArmNet::new(schema, tiny_cfg(3, 2, 4, 1.7)).unwrap();
        let store = arm.init_params(55);
        let cache = arm.eval_cache(&store).unwrap();
        let mut rng = Prng::new(77);
        for _ in 0..50 {
            let inst = cat_inst(&[
                rng.index(6) as u32,
                rng.index(4) as u32,
                rng.index(5) as u32,
            ]);
            let direct = arm.forward(&store, &inst, Mode::Eval, None).unwrap().logits;
            let cached = arm.logits_cached(&store, &cache, &inst).unwrap();
            assert_eq!(direct[0].to_bits(), cached[0].to_bits());
        }
    }
}
