//! Dataset parsers for the indexed and CSV formats.
//!
//! Indexed format: one instance per line, whitespace-separated. First token
//! is the 0/1 label, followed by exactly m `field:feature:value` tokens with
//! `field` the 0-based field id, `feature` the per-field category index
//! (0 for numerical fields) and `value` a real (ignored for categorical
//! fields, the raw numerical value otherwise).
//!
//! CSV format: a header row of the schema's field names plus a final
//! `label` column; categorical cells hold category indices, numerical cells
//! raw reals.
//!
//! Numerical values are min-max rescaled into `(0, 1]` with
//! `x' = (x - min) / (max - min)` floored at `1e-6`; a zero scaled value
//! would erase the field embedding entirely. Values outside the declared
//! range are clamped and counted in the load report.

use std::path::Path;

use crate::data::{Dataset, FeatureValue, FieldKind, Instance, Schema};
use crate::error::{Error, Result};

/// Floor applied after min-max rescaling so scaled values stay in (0, 1].
pub const SCALE_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Indexed,
    Csv,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indexed" => Ok(DataFormat::Indexed),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::Argument(format!("unknown data format '{other}'"))),
        }
    }
}

/// How to treat out-of-range categorical indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Reject the row (training-time behavior).
    #[default]
    Strict,
    /// Map to the reserved per-field unknown slot (inference-time behavior).
    MapToUnknown,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    pub oov: OovPolicy,
}

/// Non-fatal findings from a load.
#[derive(Clone, Debug, Default)]
pub struct LoadReport {
    pub warnings: Vec<String>,
    /// Numerical values clamped into their declared range.
    pub clamped: usize,
    /// Categorical values mapped to the unknown slot.
    pub oov_mapped: usize,
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub report: LoadReport,
}

pub fn load_dataset(
    path: &Path,
    schema: &Schema,
    format: DataFormat,
    options: LoadOptions,
) -> Result<LoadedDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, schema, format, options)
}

pub fn parse_dataset(
    text: &str,
    schema: &Schema,
    format: DataFormat,
    options: LoadOptions,
) -> Result<LoadedDataset> {
    match format {
        DataFormat::Indexed => parse_indexed(text, schema, options),
        DataFormat::Csv => parse_csv(text, schema, options),
    }
}

fn parse_label(token: &str, row: usize) -> Result<bool> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Data {
            row,
            msg: format!("label must be 0 or 1, got '{other}'"),
        }),
    }
}

fn scale_numerical(
    raw: f64,
    lo: f64,
    hi: f64,
    field: &str,
    row: usize,
    report: &mut LoadReport,
) -> f64 {
    let clamped = if raw < lo || raw > hi {
        report.clamped += 1;
        report.warnings.push(format!(
            "row {row}: value {raw} for field '{field}' outside [{lo}, {hi}], clamped"
        ));
        raw.clamp(lo, hi)
    } else {
        raw
    };
    ((clamped - lo) / (hi - lo)).max(SCALE_EPSILON)
}

fn categorical_value(
    index: u64,
    cardinality: usize,
    field: &str,
    row: usize,
    options: LoadOptions,
    report: &mut LoadReport,
) -> Result<FeatureValue> {
    if (index as usize) < cardinality {
        Ok(FeatureValue::Categorical(Some(index as u32)))
    } else {
        match options.oov {
            OovPolicy::Strict => Err(Error::Data {
                row,
                msg: format!(
                    "category index {index} out of range for field '{field}' (cardinality {cardinality})"
                ),
            }),
            OovPolicy::MapToUnknown => {
                report.oov_mapped += 1;
                Ok(FeatureValue::Categorical(None))
            }
        }
    }
}

fn parse_indexed(text: &str, schema: &Schema, options: LoadOptions) -> Result<LoadedDataset> {
    let m = schema.field_count();
    let mut report = LoadReport::default();
    let mut instances = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = parse_label(
            tokens.next().ok_or_else(|| Error::Parse {
                line: row,
                msg: "missing label token".into(),
            })?,
            row,
        )?;
        let mut features: Vec<Option<FeatureValue>> = vec![None; m];
        let mut count = 0usize;
        for token in tokens {
            count += 1;
            let mut parts = token.split(':');
            let (f, v, x) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(f), Some(v), Some(x), None) => (f, v, x),
                _ => {
                    return Err(Error::Parse {
                        line: row,
                        msg: format!("token '{token}' is not field:feature:value"),
                    })
                }
            };
            let field: usize = f.parse().map_err(|_| Error::Parse {
                line: row,
                msg: format!("bad field id '{f}'"),
            })?;
            if field >= m {
                return Err(Error::Data {
                    row,
                    msg: format!("field id {field} out of range (m = {m})"),
                });
            }
            if features[field].is_some() {
                return Err(Error::Data {
                    row,
                    msg: format!("field {field} appears twice"),
                });
            }
            let feature: u64 = v.parse().map_err(|_| Error::Parse {
                line: row,
                msg: format!("bad feature index '{v}'"),
            })?;
            let value: f64 = x.parse().map_err(|_| Error::Parse {
                line: row,
                msg: format!("bad value '{x}'"),
            })?;
            let spec = schema.field(field);
            let fv = match &spec.kind {
                FieldKind::Categorical { cardinality } => {
                    categorical_value(feature, *cardinality, &spec.name, row, options, &mut report)?
                }
                FieldKind::Numerical { range: (lo, hi) } => {
                    if feature != 0 {
                        return Err(Error::Data {
                            row,
                            msg: format!(
                                "numerical field '{}' must use feature index 0",
                                spec.name
                            ),
                        });
                    }
                    FeatureValue::Numerical(scale_numerical(
                        value,
                        *lo,
                        *hi,
                        &spec.name,
                        row,
                        &mut report,
                    ))
                }
            };
            features[field] = Some(fv);
        }
        if count != m || features.iter().any(|f| f.is_none()) {
            return Err(Error::Data {
                row,
                msg: format!("expected exactly {m} field tokens covering every field"),
            });
        }
        instances.push(Instance {
            features: features.into_iter().map(|f| f.unwrap()).collect(),
            label,
        });
    }
    if instances.is_empty() {
        report.warnings.push("dataset is empty".into());
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(schema.clone(), instances),
        report,
    })
}

fn parse_csv(text: &str, schema: &Schema, options: LoadOptions) -> Result<LoadedDataset> {
    let m = schema.field_count();
    let mut report = LoadReport::default();
    let mut lines = text.lines().enumerate();

    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break Some(l),
            None => break None,
        }
    };
    let Some(header) = header else {
        report.warnings.push("dataset is empty".into());
        return Ok(LoadedDataset {
            dataset: Dataset::new(schema.clone(), Vec::new()),
            report,
        });
    };
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let expected: Vec<&str> = schema
        .fields()
        .iter()
        .map(|f| f.name.as_str())
        .chain(std::iter::once("label"))
        .collect();
    if cols != expected {
        return Err(Error::Schema(format!(
            "csv header {cols:?} does not match schema fields {expected:?}"
        )));
    }

    let mut instances = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != m + 1 {
            return Err(Error::Parse {
                line: row,
                msg: format!("expected {} cells, got {}", m + 1, cells.len()),
            });
        }
        let label = parse_label(cells[m], row)?;
        let mut features = Vec::with_capacity(m);
        for (cell, spec) in cells[..m].iter().zip(schema.fields()) {
            let fv = match &spec.kind {
                FieldKind::Categorical { cardinality } => {
                    let index: u64 = cell.parse().map_err(|_| Error::Parse {
                        line: row,
                        msg: format!("bad category index '{cell}' for field '{}'", spec.name),
                    })?;
                    categorical_value(index, *cardinality, &spec.name, row, options, &mut report)?
                }
                FieldKind::Numerical { range: (lo, hi) } => {
                    let raw: f64 = cell.parse().map_err(|_| Error::Parse {
                        line: row,
                        msg: format!("bad numerical value '{cell}' for field '{}'", spec.name),
                    })?;
                    FeatureValue::Numerical(scale_numerical(
                        raw, *lo, *hi, &spec.name, row, &mut report,
                    ))
                }
            };
            features.push(fv);
        }
        instances.push(Instance { features, label });
    }
    if instances.is_empty() {
        report.warnings.push("dataset is empty".into());
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(schema.clone(), instances),
        report,
    })
}
