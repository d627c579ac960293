//! Weighted sum of the attention net's and the DNN's logits:
//! `y+ = w1 * y_arm + w2 * y_dnn + b`, trained end to end.

use crate::data::{Instance, Schema};
use crate::error::{Error, Result};
use crate::model::{ArmConfig, ArmNet, ArmTrace, Dnn, DnnTrace, Mode};
use crate::numeric::{ParamStore, Prng, Tensor2};

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub arm: ArmNet,
    pub dnn: Dnn,
}

#[derive(Clone, Debug)]
pub struct EnsembleTrace {
    pub arm: ArmTrace,
    pub dnn: DnnTrace,
    pub logits: Vec<f64>,
}

impl EnsembleTrace {
    pub fn stability_margin(&self) -> f64 {
        self.arm.stability_margin.min(self.dnn.stability_margin)
    }
}

impl Ensemble {
    pub fn new(schema: Schema, cfg: ArmConfig) -> Result<Self> {
        Ok(Ensemble {
            arm: ArmNet::new(schema.clone(), cfg.clone())?,
            dnn: Dnn::new(schema, cfg)?,
        })
    }

    /// Both submodels' tensors plus the ensemble weights, which start at
    /// an even 0.5/0.5 blend with zero bias.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Prng::new(seed);
        self.arm.init_into(&mut store, &mut rng);
        self.dnn.init_into(&mut store, &mut rng);
        store.insert("ens.w1", Tensor2::from_vec(1, 1, vec![0.5]).unwrap());
        store.insert("ens.w2", Tensor2::from_vec(1, 1, vec![0.5]).unwrap());
        store.insert("ens.b", Tensor2::zeros(self.arm.cfg.out_dim, 1));
        store
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        inst: &Instance,
        mode: Mode,
        mut rng: Option<&mut Prng>,
    ) -> Result<EnsembleTrace> {
        let arm = self.arm.forward(store, inst, mode, rng.as_deref_mut())?;
        let dnn = self.dnn.forward(store, inst, mode, rng)?;
        let w1 = store.value("ens.w1").at(0, 0);
        let w2 = store.value("ens.w2").at(0, 0);
        let b = store.value("ens.b");
        let logits: Vec<f64> = arm
            .logits
            .iter()
            .zip(&dnn.logits)
            .enumerate()
            .map(|(r, (&a, &d))| w1 * a + w2 * d + b.at(r, 0))
            .collect();
        Ok(EnsembleTrace { arm, dnn, logits })
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: &EnsembleTrace,
        dlogits: &[f64],
    ) -> Result<()> {
        if dlogits.len() != trace.logits.len() {
            return Err(Error::Shape(format!(
                "dlogits has {} entries, expected {}",
                dlogits.len(),
                trace.logits.len()
            )));
        }
        let w1 = store.value("ens.w1").at(0, 0);
        let w2 = store.value("ens.w2").at(0, 0);
        let mut dw1 = 0.0;
        let mut dw2 = 0.0;
        for (r, &d) in dlogits.iter().enumerate() {
            dw1 += d * trace.arm.logits[r];
            dw2 += d * trace.dnn.logits[r];
            store.grad_mut("ens.b").add_at(r, 0, d);
        }
        store.grad_mut("ens.w1").add_at(0, 0, dw1);
        store.grad_mut("ens.w2").add_at(0, 0, dw2);
        let d_arm: Vec<f64> = dlogits.iter().map(|&d| w1 * d).collect();
        let d_dnn: Vec<f64> = dlogits.iter().map(|&d| w2 * d).collect();
        self.arm.backward(store, &trace.arm, &d_arm)?;
        self.dnn.backward(store, &trace.dnn, &d_dnn)?;
        Ok(())
    }
}
