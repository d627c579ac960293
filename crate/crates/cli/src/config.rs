//! Run configuration: one flat JSON file per run, overridable by flags
//! (flags win).

use std::path::PathBuf;

use serde::Deserialize;

use armlet_core::model::ArmConfig;
use armlet_core::train::TrainConfig;

use crate::CliError;

/// Everything a run can specify. All fields optional; unset fields fall
/// back to flag values and then to defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model_kind: Option<String>,
    pub schema: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub valid_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Single file to split in-process (with `split_ratios`/`data_seed`).
    pub data: Option<PathBuf>,
    pub split_ratios: Option<[f64; 3]>,
    pub data_seed: Option<u64>,
    pub format: Option<String>,
    pub model_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,

    pub n_emb: Option<usize>,
    pub k: Option<usize>,
    pub o: Option<usize>,
    pub alpha: Option<f64>,
    pub mlp_widths: Option<Vec<usize>>,
    pub n_h: Option<usize>,
    pub n_p: Option<usize>,
    pub exp_clamp: Option<f64>,
    pub dnn_widths: Option<Vec<usize>>,
    pub dropout: Option<f64>,

    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub eval_every_steps: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub parallel: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &PathBuf) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("--config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))
    }

    pub fn arm_config(&self) -> ArmConfig {
        let d = ArmConfig::default();
        ArmConfig {
            emb_dim: self.n_emb.unwrap_or(d.emb_dim),
            heads: self.k.unwrap_or(d.heads),
            neurons_per_head: self.o.unwrap_or(d.neurons_per_head),
            alpha: self.alpha.unwrap_or(d.alpha),
            mlp_widths: self.mlp_widths.clone().unwrap_or(d.mlp_widths),
            mlp_out: self.n_h.unwrap_or(d.mlp_out),
            out_dim: self.n_p.unwrap_or(d.out_dim),
            exp_clamp: self.exp_clamp.unwrap_or(d.exp_clamp),
            dnn_widths: self.dnn_widths.clone().unwrap_or(d.dnn_widths),
            dropout: self.dropout.unwrap_or(d.dropout),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            lr: self.lr.unwrap_or(d.lr),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            patience: self.patience.unwrap_or(d.patience),
            eval_every_steps: self.eval_every_steps,
            seed,
        }
    }
}

macro_rules! override_field {
    ($cfg:expr, $args:expr, $($field:ident),+ $(,)?) => {
        $(if $args.$field.is_some() {
            $cfg.$field = $args.$field.clone();
        })+
    };
}
pub(crate) use override_field;
