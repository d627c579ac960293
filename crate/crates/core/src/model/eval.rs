//! Batched eval-mode inference. Batching is a loop over the single-instance
//! path (plus the per-store attention cache), so batched and per-instance
//! logits are bit-identical.

use crate::data::Instance;
use crate::error::Result;
use crate::model::{EvalCache, Model};
use crate::numeric::ParamStore;

/// Read-only view of a frozen model ready for inference. Shareable across
/// threads.
pub struct Evaluator<'a> {
    model: &'a Model,
    store: &'a ParamStore,
    arm_cache: Option<EvalCache>,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a Model, store: &'a ParamStore) -> Result<Self> {
        let arm_cache = match model {
            Model::Arm(m) => Some(m.eval_cache(store)?),
            Model::ArmPlus(m) => Some(m.arm.eval_cache(store)?),
            _ => None,
        };
        Ok(Evaluator {
            model,
            store,
            arm_cache,
        })
    }

    pub fn logit(&self, inst: &Instance) -> Result<f64> {
        match (self.model, &self.arm_cache) {
            (Model::Arm(m), Some(cache)) => Ok(m.logits_cached(self.store, cache, inst)?[0]),
            (Model::ArmPlus(m), Some(cache)) => {
                let arm = m.arm.logits_cached(self.store, cache, inst)?;
                let dnn = m
                    .dnn
                    .forward(self.store, inst, crate::model::Mode::Eval, None)?
                    .logits;
                let w1 = self.store.value("ens.w1").at(0, 0);
                let w2 = self.store.value("ens.w2").at(0, 0);
                let b = self.store.value("ens.b");
                Ok(w1 * arm[0] + w2 * dnn[0] + b.at(0, 0))
            }
            _ => self.model.logit_eval(self.store, inst),
        }
    }
}

/// Eval-mode logits for a batch, preserving instance order. `threads <= 1`
/// runs sequentially; more threads chunk the batch, and because each logit
/// is a pure function of (params, instance) the result does not depend on
/// the thread count.
pub fn batch_logits(
    model: &Model,
    store: &ParamStore,
    instances: &[Instance],
    threads: usize,
) -> Result<Vec<f64>> {
    let evaluator = Evaluator::new(model, store)?;
    if threads <= 1 || instances.len() < 2 {
        return instances.iter().map(|i| evaluator.logit(i)).collect();
    }
    let chunk = instances.len().div_ceil(threads);
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = instances
            .chunks(chunk)
            .map(|slice| {
                let ev = &evaluator;
                scope.spawn(move || slice.iter().map(|i| ev.logit(i)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut out = Vec::with_capacity(instances.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
