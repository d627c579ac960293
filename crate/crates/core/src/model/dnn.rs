//! Plain MLP over its own embedding table; the implicit-interaction half of
//! the ensemble.

use crate::data::{FeatureValue, Instance, Schema};
use crate::error::{Error, Result};
use crate::model::arm::{embed_with, scatter_embedding_grads};
use crate::model::{mlp, ArmConfig, MlpTrace, Mode};
use crate::numeric::{ParamStore, Prng, Tensor2};

#[derive(Clone, Debug)]
pub struct Dnn {
    pub schema: Schema,
    pub cfg: ArmConfig,
}

#[derive(Clone, Debug)]
pub struct DnnTrace {
    pub mode: Mode,
    pub features: Vec<FeatureValue>,
    pub e_x: Tensor2,
    pub mlp: MlpTrace,
    pub logits: Vec<f64>,
    pub stability_margin: f64,
}

impl Dnn {
    pub fn new(schema: Schema, cfg: ArmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Dnn { schema, cfg })
    }

    fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.schema.field_count() * self.cfg.emb_dim];
        dims.extend_from_slice(&self.cfg.dnn_widths);
        dims.push(self.cfg.out_dim);
        dims
    }

    fn layer_count(&self) -> usize {
        self.dims().len() - 1
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        self.init_into(&mut store, &mut rng);
        store
    }

    pub(crate) fn init_into(&self, store: &mut ParamStore, rng: &mut Prng) {
        let layout = self.schema.embedding_layout();
        let data = (0..layout.total_rows() * self.cfg.emb_dim)
            .map(|_| rng.normal(0.0, 0.01))
            .collect();
        store.insert(
            "dnn.embed",
            Tensor2::from_vec(layout.total_rows(), self.cfg.emb_dim, data).unwrap(),
        );
        mlp::init_layers(store, "dnn", &self.dims(), rng);
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        inst: &Instance,
        mode: Mode,
        rng: Option<&mut Prng>,
    ) -> Result<DnnTrace> {
        let e_x = embed_with(&self.schema, store.value("dnn.embed"), inst, self.cfg.emb_dim)?;
        let input: Vec<f64> = (0..e_x.rows()).flat_map(|r| e_x.row(r).to_vec()).collect();
        let mlp_trace = mlp::forward(
            store,
            "dnn",
            self.layer_count(),
            true,
            input,
            mode,
            self.cfg.dropout,
            rng,
        )?;
        let logits = mlp_trace.output().to_vec();
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Forward {
                layer: "dnn".into(),
            });
        }
        Ok(DnnTrace {
            mode,
            features: inst.features.clone(),
            e_x,
            stability_margin: mlp_trace.relu_margin,
            mlp: mlp_trace,
            logits,
        })
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: &DnnTrace,
        dlogits: &[f64],
    ) -> Result<()> {
        if trace.mode != Mode::Train {
            return Err(Error::Contract(
                "backward requires a train-mode trace".into(),
            ));
        }
        if dlogits.len() != self.cfg.out_dim {
            return Err(Error::Shape(format!(
                "dlogits has {} entries, expected {}",
                dlogits.len(),
                self.cfg.out_dim
            )));
        }
        let d_input = mlp::backward(store, "dnn", &trace.mlp, dlogits)?;
        let m = self.schema.field_count();
        let n_e = self.cfg.emb_dim;
        let mut d_e_x = Tensor2::zeros(m, n_e);
        for j in 0..m {
            d_e_x
                .row_mut(j)
                .copy_from_slice(&d_input[j * n_e..(j + 1) * n_e]);
        }
        let layout = self.schema.embedding_layout();
        scatter_embedding_grads(&layout, &trace.features, &d_e_x, store.grad_mut("dnn.embed"));
        Ok(())
    }
}
