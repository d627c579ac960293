//! The attention network, its DNN ensemble partner, and the LR/FM baselines.
//!
//! Every model follows the same shape: `init_params` seeds a [`ParamStore`],
//! `forward` returns a trace of intermediates ending in logits, and
//! `backward` accumulates gradients into the store from the trace. Backward
//! passes are hand-derived and checked against the central-difference oracle
//! in the test suites. Logits are raw scores; the sigmoid lives in the loss
//! and metrics only.

mod arm;
mod baselines;
mod dnn;
mod ensemble;
mod eval;
mod mlp;
mod persist;

pub use arm::{ArmNet, ArmTrace, EvalCache, GateOutput, HeadTrace, NeuronOutput};
pub use baselines::{Fm, FmPlus, FmPlusTrace, FmTrace, Lr, LrTrace};
pub use dnn::{Dnn, DnnTrace};
pub use ensemble::{Ensemble, EnsembleTrace};
pub use eval::{batch_logits, Evaluator};
pub use mlp::MlpTrace;
pub use persist::{load_model, save_model, LoadedModel, ModelFile, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::data::{Instance, Schema};
use crate::error::{Error, Result};
use crate::numeric::{ParamStore, Prng};

/// Forward-pass mode. Dropout is live only in `Train`; `Eval` is fully
/// deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Hyperparameters for the attention network and its companions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    /// Embedding size (n_e).
    #[serde(rename = "n_emb")]
    pub emb_dim: usize,
    /// Attention heads (K).
    #[serde(rename = "k")]
    pub heads: usize,
    /// Exponential neurons per head (o).
    #[serde(rename = "o")]
    pub neurons_per_head: usize,
    /// Entmax exponent; 1 = softmax, 2 = sparsemax.
    pub alpha: f64,
    /// Hidden widths of the interaction MLP.
    #[serde(default = "default_mlp_widths")]
    pub mlp_widths: Vec<usize>,
    /// Output width of the interaction MLP (n_h).
    #[serde(rename = "n_h", default = "default_mlp_out")]
    pub mlp_out: usize,
    /// Prediction targets (n_p); 1 for binary tasks.
    #[serde(rename = "n_p", default = "default_out_dim")]
    pub out_dim: usize,
    /// Hard bound on each exponential neuron's inner sum.
    #[serde(default = "default_exp_clamp")]
    pub exp_clamp: f64,
    /// Hidden widths of the ensemble DNN.
    #[serde(default = "default_dnn_widths")]
    pub dnn_widths: Vec<usize>,
    /// Dropout rate in [0, 1), applied inside MLPs in train mode.
    #[serde(default)]
    pub dropout: f64,
}

fn default_mlp_widths() -> Vec<usize> {
    vec![100]
}
fn default_mlp_out() -> usize {
    100
}
fn default_out_dim() -> usize {
    1
}
fn default_exp_clamp() -> f64 {
    15.0
}
fn default_dnn_widths() -> Vec<usize> {
    vec![100, 100]
}

impl Default for ArmConfig {
    fn default() -> Self {
        ArmConfig {
            emb_dim: 10,
            heads: 4,
            neurons_per_head: 32,
            alpha: 1.5,
            mlp_widths: default_mlp_widths(),
            mlp_out: default_mlp_out(),
            out_dim: default_out_dim(),
            exp_clamp: default_exp_clamp(),
            dnn_widths: default_dnn_widths(),
            dropout: 0.0,
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads < 1
            || self.neurons_per_head < 1
            || self.emb_dim < 1
            || self.out_dim < 1
            || self.mlp_out < 1
        {
            return Err(Error::Argument(
                "config: k, o, n_emb, n_h, n_p must all be >= 1".into(),
            ));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Argument(format!(
                "config: alpha must be >= 1, got {}",
                self.alpha
            )));
        }
        if !(self.exp_clamp > 0.0) {
            return Err(Error::Argument("config: exp_clamp must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument(format!(
                "config: dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Which model `train`/`eval`/`predict` operate on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Arm,
    ArmPlus,
    Lr,
    Fm,
    FmPlus,
    Dnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Arm => "arm",
            ModelKind::ArmPlus => "arm_plus",
            ModelKind::Lr => "lr",
            ModelKind::Fm => "fm",
            ModelKind::FmPlus => "fm_plus",
            ModelKind::Dnn => "dnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arm" => Ok(ModelKind::Arm),
            "arm_plus" => Ok(ModelKind::ArmPlus),
            "lr" => Ok(ModelKind::Lr),
            "fm" => Ok(ModelKind::Fm),
            "fm_plus" => Ok(ModelKind::FmPlus),
            "dnn" => Ok(ModelKind::Dnn),
            other => Err(Error::Argument(format!("unknown model kind '{other}'"))),
        }
    }
}

/// A model of any kind, dispatching forward/backward to the concrete type.
#[derive(Clone, Debug)]
pub enum Model {
    Arm(ArmNet),
    ArmPlus(Ensemble),
    Lr(Lr),
    Fm(Fm),
    FmPlus(FmPlus),
    Dnn(Dnn),
}

/// Per-call forward intermediates, consumed by `backward`.
#[derive(Clone, Debug)]
pub enum ModelTrace {
    Arm(ArmTrace),
    ArmPlus(EnsembleTrace),
    Lr(LrTrace),
    Fm(FmTrace),
    FmPlus(FmPlusTrace),
    Dnn(DnnTrace),
}

impl ModelTrace {
    pub fn logits(&self) -> &[f64] {
        match self {
            ModelTrace::Arm(t) => &t.logits,
            ModelTrace::ArmPlus(t) => &t.logits,
            ModelTrace::Lr(t) => &t.logits,
            ModelTrace::Fm(t) => &t.logits,
            ModelTrace::FmPlus(t) => &t.logits,
            ModelTrace::Dnn(t) => &t.logits,
        }
    }

    /// Minimum distance of the forward pass to any gradient kink (entmax
    /// support boundary, ReLU zero, clamp bound). Infinite for models
    /// without kinks; the gradient-gate tests use it to pick
    /// support-stable points.
    pub fn stability_margin(&self) -> f64 {
        match self {
            ModelTrace::Arm(t) => t.stability_margin,
            ModelTrace::ArmPlus(t) => t.stability_margin(),
            ModelTrace::Lr(_) => f64::INFINITY,
            ModelTrace::Fm(_) => f64::INFINITY,
            ModelTrace::FmPlus(t) => t.clamp_margin,
            ModelTrace::Dnn(t) => t.stability_margin,
        }
    }
}

impl Model {
    pub fn new(kind: ModelKind, schema: Schema, cfg: ArmConfig) -> Result<Model> {
        cfg.validate()?;
        Ok(match kind {
            ModelKind::Arm => Model::Arm(ArmNet::new(schema, cfg)?),
            ModelKind::ArmPlus => Model::ArmPlus(Ensemble::new(schema, cfg)?),
            ModelKind::Lr => Model::Lr(Lr::new(schema)),
            ModelKind::Fm => Model::Fm(Fm::new(schema, cfg.emb_dim)),
            ModelKind::FmPlus => Model::FmPlus(FmPlus::new(
                schema,
                cfg.emb_dim,
                cfg.neurons_per_head,
                cfg.exp_clamp,
            )),
            ModelKind::Dnn => Model::Dnn(Dnn::new(schema, cfg)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Arm(_) => ModelKind::Arm,
            Model::ArmPlus(_) => ModelKind::ArmPlus,
            Model::Lr(_) => ModelKind::Lr,
            Model::Fm(_) => ModelKind::Fm,
            Model::FmPlus(_) => ModelKind::FmPlus,
            Model::Dnn(_) => ModelKind::Dnn,
        }
    }

    pub fn schema(&self) -> &Schema {
        match self {
            Model::Arm(m) => &m.schema,
            Model::ArmPlus(m) => &m.arm.schema,
            Model::Lr(m) => &m.schema,
            Model::Fm(m) => &m.schema,
            Model::FmPlus(m) => &m.schema,
            Model::Dnn(m) => &m.schema,
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        match self {
            Model::Arm(m) => m.init_params(seed),
            Model::ArmPlus(m) => m.init_params(seed),
            Model::Lr(m) => m.init_params(seed),
            Model::Fm(m) => m.init_params(seed),
            Model::FmPlus(m) => m.init_params(seed),
            Model::Dnn(m) => m.init_params(seed),
        }
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        inst: &Instance,
        mode: Mode,
        rng: Option<&mut Prng>,
    ) -> Result<ModelTrace> {
        Ok(match self {
            Model::Arm(m) => ModelTrace::Arm(m.forward(store, inst, mode, rng)?),
            Model::ArmPlus(m) => ModelTrace::ArmPlus(m.forward(store, inst, mode, rng)?),
            Model::Lr(m) => ModelTrace::Lr(m.forward(store, inst)?),
            Model::Fm(m) => ModelTrace::Fm(m.forward(store, inst)?),
            Model::FmPlus(m) => ModelTrace::FmPlus(m.forward(store, inst)?),
            Model::Dnn(m) => ModelTrace::Dnn(m.forward(store, inst, mode, rng)?),
        })
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        trace: &ModelTrace,
        dlogits: &[f64],
    ) -> Result<()> {
        match (self, trace) {
            (Model::Arm(m), ModelTrace::Arm(t)) => m.backward(store, t, dlogits),
            (Model::ArmPlus(m), ModelTrace::ArmPlus(t)) => m.backward(store, t, dlogits),
            (Model::Lr(m), ModelTrace::Lr(t)) => m.backward(store, t, dlogits),
            (Model::Fm(m), ModelTrace::Fm(t)) => m.backward(store, t, dlogits),
            (Model::FmPlus(m), ModelTrace::FmPlus(t)) => m.backward(store, t, dlogits),
            (Model::Dnn(m), ModelTrace::Dnn(t)) => m.backward(store, t, dlogits),
            _ => Err(Error::Contract(
                "trace does not belong to this model kind".into(),
            )),
        }
    }

    /// Eval-mode logit for a single-target model.
    pub fn logit_eval(&self, store: &ParamStore, inst: &Instance) -> Result<f64> {
        let trace = self.forward(store, inst, Mode::Eval, None)?;
        let logits = trace.logits();
        if logits.len() != 1 {
            return Err(Error::Contract(format!(
                "expected a single logit, model has {}",
                logits.len()
            )));
        }
        Ok(logits[0])
    }
}
