//! Schemas, dataset parsing, splits, and synthetic data with planted
//! multiplicative interactions.

mod loader;
mod schema;
mod split;
mod synthetic;

pub use loader::{
    load_dataset, parse_dataset, DataFormat, LoadOptions, LoadReport, LoadedDataset, OovPolicy,
    SCALE_EPSILON,
};
pub use schema::{load_schema, parse_schema, EmbeddingLayout, FieldKind, FieldSpec, Schema};
pub use split::split;
pub use synthetic::{
    generate_synthetic, load_synthetic_spec, PlantedTerm, SyntheticData, SyntheticSpec,
    SyntheticTruth,
};

use crate::error::{Error, Result};

/// One field's value inside an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureValue {
    /// Category index in `[0, cardinality)`; `None` is the reserved
    /// out-of-vocabulary slot filled in at inference time.
    Categorical(Option<u32>),
    /// Numerical value after min-max rescaling into `(0, 1]`.
    Numerical(f64),
}

/// One labeled tuple, with features in schema field order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub features: Vec<FeatureValue>,
    pub label: bool,
}

impl Instance {
    pub fn label_f64(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    /// Check conformance against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.features.len() != schema.field_count() {
            return Err(Error::Data {
                row: 0,
                msg: format!(
                    "instance has {} features, schema declares {}",
                    self.features.len(),
                    schema.field_count()
                ),
            });
        }
        for (f, spec) in self.features.iter().zip(schema.fields()) {
            match (f, &spec.kind) {
                (FeatureValue::Categorical(Some(idx)), FieldKind::Categorical { cardinality }) => {
                    if *idx as usize >= *cardinality {
                        return Err(Error::Data {
                            row: 0,
                            msg: format!(
                                "category index {idx} out of range for field '{}' (cardinality {cardinality})",
                                spec.name
                            ),
                        });
                    }
                }
                (FeatureValue::Categorical(None), FieldKind::Categorical { .. }) => {}
                (FeatureValue::Numerical(x), FieldKind::Numerical { .. }) => {
                    if !(*x > 0.0 && *x <= 1.0) {
                        return Err(Error::Data {
                            row: 0,
                            msg: format!(
                                "scaled numerical value {x} for field '{}' outside (0, 1]",
                                spec.name
                            ),
                        });
                    }
                }
                _ => {
                    return Err(Error::Data {
                        row: 0,
                        msg: format!("feature kind mismatch for field '{}'", spec.name),
                    });
                }
            }
        }
        Ok(())
    }
}

/// An immutable, schema-conformant collection of instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(schema: Schema, instances: Vec<Instance>) -> Self {
        Dataset { schema, instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.label).count()
    }
}
