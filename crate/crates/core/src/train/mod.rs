//! Mini-batch training with seeded shuffling, periodic validation, and
//! early stopping on validation AUC.

mod metrics;

pub use metrics::{auc, dlogloss, logloss, EvalReport};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{batch_logits, Model, ModelKind, Mode};
use crate::model::ArmConfig;
use crate::numeric::{AdamConfig, ParamStore, Prng};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving validation evals before stopping.
    pub patience: usize,
    /// Validate every this many optimizer steps; `None` = once per epoch.
    #[serde(default)]
    pub eval_every_steps: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 20,
            patience: 3,
            eval_every_steps: None,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) {
            return Err(Error::Argument("train: lr must be >= 0".into()));
        }
        if self.batch_size < 1 || self.patience < 1 {
            return Err(Error::Argument(
                "train: batch_size and patience must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One validation record.
#[derive(Clone, Debug, Serialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub step: usize,
    pub train_logloss: f64,
    pub valid_auc: f64,
    pub valid_logloss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters at the best recorded validation AUC.
    pub params: ParamStore,
    pub history: Vec<HistoryRecord>,
    pub best_valid_auc: f64,
    pub epochs_run: usize,
}

/// Evaluate a frozen model on a dataset.
pub fn evaluate(
    model: &Model,
    store: &ParamStore,
    data: &Dataset,
    threads: usize,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Metric("cannot evaluate an empty dataset".into()));
    }
    let logits = batch_logits(model, store, &data.instances, threads)?;
    let labels: Vec<f64> = data.instances.iter().map(|i| i.label_f64()).collect();
    Ok(EvalReport {
        auc: auc(&logits, &labels)?,
        logloss: logloss(&logits, &labels)?,
        n: data.len(),
    })
}

/// Train `kind` on the given splits. Shuffling, dropout, and initialization
/// all derive from `tcfg.seed`, so the whole run is a pure function of
/// (datasets, configs, seed). Returns the parameters from the best
/// validation AUC.
pub fn train(
    kind: ModelKind,
    train_set: &Dataset,
    valid_set: &Dataset,
    cfg: &ArmConfig,
    tcfg: &TrainConfig,
) -> Result<(Model, TrainOutcome)> {
    tcfg.validate()?;
    cfg.validate()?;
    if cfg.out_dim != 1 {
        return Err(Error::Argument(
            "training is binary: configure n_p = 1".into(),
        ));
    }
    if train_set.is_empty() {
        return Err(Error::Argument("train split is empty".into()));
    }
    let model = Model::new(kind, train_set.schema.clone(), cfg.clone())?;
    let mut store = model.init_params(tcfg.seed);
    let adam = AdamConfig {
        lr: tcfg.lr,
        ..AdamConfig::default()
    };
    let mut shuffle_rng = Prng::derive(tcfg.seed, 1);
    let mut dropout_rng = Prng::derive(tcfg.seed, 2);

    let mut history = Vec::new();
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_params = store.snapshot();
    let mut evals_since_best = 0usize;
    let mut step = 0usize;
    let mut loss_accum = 0.0;
    let mut loss_batches = 0usize;
    let mut epochs_run = 0usize;

    'epochs: for epoch in 1..=tcfg.max_epochs {
        epochs_run = epoch;
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let n_batches = order.len().div_ceil(tcfg.batch_size);
        for (batch_idx, batch) in order.chunks(tcfg.batch_size).enumerate() {
            let mut batch_loss = 0.0;
            for &i in batch {
                let inst = &train_set.instances[i];
                let trace = model.forward(&store, inst, Mode::Train, Some(&mut dropout_rng))?;
                let logit = trace.logits()[0];
                let y = inst.label_f64();
                batch_loss += logloss(&[logit], &[y])?;
                let d = dlogloss(logit, y, batch.len());
                model.backward(&mut store, &trace, &[d])?;
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    details: diverged_details(&store),
                });
            }
            store.adam_step(&adam)?;
            step += 1;
            loss_accum += batch_loss;
            loss_batches += 1;

            let eval_now = match tcfg.eval_every_steps {
                Some(k) => step % k == 0,
                None => batch_idx + 1 == n_batches,
            };
            if !eval_now {
                continue;
            }
            let report = evaluate(&model, &store, valid_set, 1)?;
            history.push(HistoryRecord {
                epoch,
                step,
                train_logloss: loss_accum / loss_batches.max(1) as f64,
                valid_auc: report.auc,
                valid_logloss: report.logloss,
            });
            loss_accum = 0.0;
            loss_batches = 0;
            if report.auc > best_auc {
                best_auc = report.auc;
                best_params = store.snapshot();
                evals_since_best = 0;
            } else {
                evals_since_best += 1;
                if evals_since_best >= tcfg.patience {
                    break 'epochs;
                }
            }
        }
    }

    store.restore(&best_params);
    Ok((
        model,
        TrainOutcome {
            params: store,
            history,
            best_valid_auc: best_auc,
            epochs_run,
        },
    ))
}

fn diverged_details(store: &ParamStore) -> String {
    let mut parts = Vec::new();
    for name in store.names() {
        let t = store.value(name);
        let norm: f64 = t.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        parts.push(format!("{name}: |.| = {norm:.3e}"));
    }
    parts.join(", ")
}

/// Render history records as the line format consumed by the CLI.
pub fn history_lines(history: &[HistoryRecord]) -> String {
    let mut out = String::from("epoch,step,train_logloss,valid_auc,valid_logloss\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            r.epoch, r.step, r.train_logloss, r.valid_auc, r.valid_logloss
        ));
    }
    out
}
