//! Model files: JSON with the config, schema, and every tensor as nested
//! arrays, downcast to 32-bit on disk (flagged in the header). Loading
//! rebuilds the canonical parameter layout for the stored kind and fills it
//! from the file, restoring eval behavior within f32 round-off.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Schema;
use crate::error::{Error, Result};
use crate::model::{ArmConfig, Model, ModelKind};
use crate::numeric::{ParamStore, Tensor2};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorFile {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// On-disk precision of tensor data.
    pub precision: String,
    pub model_kind: ModelKind,
    pub config: ArmConfig,
    pub schema: Schema,
    tensors: BTreeMap<String, TensorFile>,
}

pub fn save_model(
    path: &Path,
    kind: ModelKind,
    cfg: &ArmConfig,
    schema: &Schema,
    store: &ParamStore,
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    for name in store.names() {
        let t = store.value(name);
        tensors.insert(
            name.to_string(),
            TensorFile {
                rows: t.rows(),
                cols: t.cols(),
                data: t.as_slice().iter().map(|&x| x as f32).collect(),
            },
        );
    }
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        precision: "f32".to_string(),
        model_kind: kind,
        config: cfg.clone(),
        schema: schema.clone(),
        tensors,
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub struct LoadedModel {
    pub model: Model,
    pub cfg: ArmConfig,
    pub store: ParamStore,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Contract(format!(
            "unsupported model format_version {}",
            file.format_version
        )));
    }
    if file.precision != "f32" {
        return Err(Error::Contract(format!(
            "unsupported tensor precision '{}'",
            file.precision
        )));
    }
    let model = Model::new(file.model_kind, file.schema.clone(), file.config.clone())?;
    // Seed value is irrelevant; init only fixes the canonical tensor set and
    // shapes, every value is overwritten below.
    let mut store = model.init_params(0);
    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    if names.len() != file.tensors.len() {
        return Err(Error::Contract(format!(
            "model file has {} tensors, kind '{}' expects {}",
            file.tensors.len(),
            file.model_kind.as_str(),
            names.len()
        )));
    }
    for name in names {
        let tf = file.tensors.get(&name).ok_or_else(|| {
            Error::Contract(format!("model file is missing tensor '{name}'"))
        })?;
        let expected = store.value(&name);
        if (tf.rows, tf.cols) != (expected.rows(), expected.cols()) {
            return Err(Error::Contract(format!(
                "tensor '{name}' has shape {}x{}, expected {}x{}",
                tf.rows,
                tf.cols,
                expected.rows(),
                expected.cols()
            )));
        }
        let data: Vec<f64> = tf.data.iter().map(|&x| x as f64).collect();
        *store.value_mut(&name) = Tensor2::from_vec(tf.rows, tf.cols, data)?;
    }
    Ok(LoadedModel {
        model,
        cfg: file.config,
        store,
    })
}
