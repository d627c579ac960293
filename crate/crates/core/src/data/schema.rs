//! Field declarations and the embedding-row layout derived from them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldKind {
    Categorical { cardinality: usize },
    Numerical { range: (f64, f64) },
}

impl FieldKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FieldKind::Categorical { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    /// Position of the field; defaults to declaration order.
    #[serde(default)]
    pub field_id: usize,
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(mut fields: Vec<FieldSpec>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Schema("schema declares no fields".into()));
        }
        // Accept either explicit ids or all-default (0) ids meaning
        // declaration order.
        let all_default = fields.iter().all(|f| f.field_id == 0);
        if all_default {
            for (i, f) in fields.iter_mut().enumerate() {
                f.field_id = i;
            }
        }
        let mut seen = vec![false; fields.len()];
        for f in &fields {
            if f.field_id >= fields.len() || seen[f.field_id] {
                return Err(Error::Schema(format!(
                    "duplicate or out-of-range field_id {} for field '{}'",
                    f.field_id, f.name
                )));
            }
            seen[f.field_id] = true;
        }
        for f in &fields {
            match &f.kind {
                FieldKind::Categorical { cardinality } => {
                    if *cardinality < 1 {
                        return Err(Error::Schema(format!(
                            "field '{}': cardinality must be >= 1",
                            f.name
                        )));
                    }
                }
                FieldKind::Numerical { range: (lo, hi) } => {
                    if !(hi > lo) {
                        return Err(Error::Schema(format!(
                            "field '{}': range max must exceed min",
                            f.name
                        )));
                    }
                }
            }
        }
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                if fields[i].name == fields[j].name {
                    return Err(Error::Schema(format!(
                        "duplicate field name '{}'",
                        fields[i].name
                    )));
                }
            }
        }
        fields.sort_by_key(|f| f.field_id);
        Ok(Schema { fields })
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field(&self, id: usize) -> &FieldSpec {
        &self.fields[id]
    }

    /// Number of attribute fields (m).
    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    /// Total distinct feature count (M): categorical cardinalities summed,
    /// plus one slot per numerical field.
    pub fn distinct_features(&self) -> usize {
        self.fields
            .iter()
            .map(|f| match &f.kind {
                FieldKind::Categorical { cardinality } => *cardinality,
                FieldKind::Numerical { .. } => 1,
            })
            .sum()
    }

    pub fn embedding_layout(&self) -> EmbeddingLayout {
        EmbeddingLayout::new(self)
    }
}

/// Maps fields onto rows of the shared feature table. Every categorical
/// field gets `cardinality + 1` rows: row 0 of the block is the reserved
/// out-of-vocabulary slot, known category `i` lives at block row `i + 1`.
/// Numerical fields get a single row holding the field embedding that the
/// scalar value scales.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingLayout {
    offsets: Vec<usize>,
    total_rows: usize,
}

impl EmbeddingLayout {
    fn new(schema: &Schema) -> Self {
        let mut offsets = Vec::with_capacity(schema.field_count());
        let mut next = 0usize;
        for f in schema.fields() {
            offsets.push(next);
            next += match &f.kind {
                FieldKind::Categorical { cardinality } => cardinality + 1,
                FieldKind::Numerical { .. } => 1,
            };
        }
        EmbeddingLayout {
            offsets,
            total_rows: next,
        }
    }

    pub fn total_rows(&self) -> usize {
        self.total_rows
    }

    pub fn field_offset(&self, field: usize) -> usize {
        self.offsets[field]
    }

    /// Row for a categorical value (`None` = the reserved unknown slot).
    pub fn categorical_row(&self, field: usize, index: Option<u32>) -> usize {
        match index {
            Some(i) => self.offsets[field] + 1 + i as usize,
            None => self.offsets[field],
        }
    }

    /// Row holding a numerical field's embedding.
    pub fn numerical_row(&self, field: usize) -> usize {
        self.offsets[field]
    }
}

#[derive(Deserialize)]
struct SchemaFile {
    fields: Vec<FieldSpec>,
}

/// Parse a schema file (JSON, top-level `fields` list).
pub fn load_schema(path: &Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path)?;
    parse_schema(&text)
}

pub fn parse_schema(text: &str) -> Result<Schema> {
    let file: SchemaFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    Schema::new(file.fields)
}
