//! Reading the model's own weights back out as explanations.
//!
//! Global importance aggregates the absolute values of every head's value
//! vectors: those are the instance-independent attention weights each field
//! carries into the interaction terms. Local attribution aggregates the
//! gated interaction weights `|w_i|` a single instance actually received.
//! The interaction catalog counts, per neuron and instance, the set of
//! fields with nonzero gated weight - the cross feature that neuron
//! captured - and reports terms by how often they occur per instance.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::model::{ArmNet, Mode};
use crate::numeric::ParamStore;

/// Per-field importance, normalized to sum 1 in schema field order.
#[derive(Clone, Debug, Serialize)]
pub struct GlobalImportance {
    pub scores: Vec<f64>,
    /// True when every value vector was zero and the scores fell back to
    /// uniform.
    pub degenerate: bool,
}

/// Per-field attribution for one instance, plus per-neuron |w| rows
/// (K*o x m) for drill-down.
#[derive(Clone, Debug, Serialize)]
pub struct LocalAttribution {
    pub scores: Vec<f64>,
    pub neuron_weights: Vec<Vec<f64>>,
    pub degenerate: bool,
}

/// One captured cross feature: the fields involved, how often it occurred
/// per instance, and its interaction order.
#[derive(Clone, Debug, Serialize)]
pub struct InteractionTerm {
    pub fields: Vec<usize>,
    pub frequency: f64,
    pub order: usize,
    pub occurrences: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogDiagnostics {
    /// K * o: each neuron contributes exactly one term per instance.
    pub neurons: usize,
    pub instances: usize,
    /// Occurrences summed over every non-degenerate term (not only top_n).
    pub term_occurrences: u64,
    /// Neuron-instance pairs whose gated weights were all zero.
    pub degenerate_occurrences: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InteractionCatalog {
    /// Top terms by frequency (descending; field set breaks ties).
    pub terms: Vec<InteractionTerm>,
    pub diagnostics: CatalogDiagnostics,
}

fn normalize_or_uniform(scores: &mut [f64]) -> bool {
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in scores.iter_mut() {
            *s /= total;
        }
        false
    } else {
        let u = 1.0 / scores.len() as f64;
        for s in scores.iter_mut() {
            *s = u;
        }
        true
    }
}

/// `score_j = sum_k sum_i |V^(k)[j, i]|`, normalized to sum 1.
pub fn global_importance(arm: &ArmNet, store: &ParamStore) -> Result<GlobalImportance> {
    let m = arm.schema.field_count();
    let mut scores = vec![0.0; m];
    for k in 0..arm.cfg.heads {
        let v = store.value(&format!("head{k}.v"));
        for j in 0..m {
            for i in 0..arm.cfg.neurons_per_head {
                scores[j] += v.at(j, i).abs();
            }
        }
    }
    let degenerate = normalize_or_uniform(&mut scores);
    Ok(GlobalImportance { scores, degenerate })
}

/// Eval-mode forward, then aggregate `|w_i|` over all K*o neurons.
pub fn local_attribution(
    arm: &ArmNet,
    store: &ParamStore,
    inst: &Instance,
) -> Result<LocalAttribution> {
    let trace = arm.forward(store, inst, Mode::Eval, None)?;
    let m = arm.schema.field_count();
    let mut neuron_weights = Vec::with_capacity(arm.cfg.heads * arm.cfg.neurons_per_head);
    let mut scores = vec![0.0; m];
    for head in &trace.heads {
        for i in 0..head.weights.rows() {
            let row: Vec<f64> = head.weights.row(i).iter().map(|w| w.abs()).collect();
            for (s, w) in scores.iter_mut().zip(&row) {
                *s += w;
            }
            neuron_weights.push(row);
        }
    }
    let degenerate = normalize_or_uniform(&mut scores);
    Ok(LocalAttribution {
        scores,
        neuron_weights,
        degenerate,
    })
}

/// Count captured field sets over a dataset and return the `top_n` most
/// frequent. Instance chunks may be processed in parallel; counts merge
/// into a sorted map, so the result is independent of the thread count.
pub fn interaction_catalog(
    arm: &ArmNet,
    store: &ParamStore,
    dataset: &Dataset,
    top_n: usize,
    threads: usize,
) -> Result<InteractionCatalog> {
    if dataset.is_empty() {
        return Err(Error::Argument(
            "interaction catalog needs a nonempty dataset".into(),
        ));
    }
    let count_chunk = |instances: &[Instance]| -> Result<(BTreeMap<Vec<usize>, u64>, u64)> {
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        let mut degenerate = 0u64;
        for inst in instances {
            let trace = arm.forward(store, inst, Mode::Eval, None)?;
            for head in &trace.heads {
                for i in 0..head.weights.rows() {
                    let support: Vec<usize> = head
                        .weights
                        .row(i)
                        .iter()
                        .enumerate()
                        .filter(|(_, &w)| w != 0.0)
                        .map(|(j, _)| j)
                        .collect();
                    if support.is_empty() {
                        degenerate += 1;
                    } else {
                        *counts.entry(support).or_insert(0) += 1;
                    }
                }
            }
        }
        Ok((counts, degenerate))
    };

    let (mut counts, mut degenerate) = (BTreeMap::new(), 0u64);
    if threads <= 1 || dataset.len() < 2 {
        let (c, d) = count_chunk(&dataset.instances)?;
        counts = c;
        degenerate = d;
    } else {
        let chunk = dataset.len().div_ceil(threads);
        let results: Vec<Result<(BTreeMap<Vec<usize>, u64>, u64)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = dataset
                    .instances
                    .chunks(chunk)
                    .map(|slice| scope.spawn(move || count_chunk(slice)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        for r in results {
            let (c, d) = r?;
            degenerate += d;
            for (k, v) in c {
                *counts.entry(k).or_insert(0) += v;
            }
        }
    }

    let n = dataset.len() as f64;
    let term_occurrences: u64 = counts.values().sum();
    let mut terms: Vec<InteractionTerm> = counts
        .into_iter()
        .map(|(fields, occurrences)| InteractionTerm {
            order: fields.len(),
            frequency: occurrences as f64 / n,
            fields,
            occurrences,
        })
        .collect();
    terms.sort_by(|a, b| {
        b.frequency
            .partial_cmp(&a.frequency)
            .unwrap()
            .then_with(|| a.fields.cmp(&b.fields))
    });
    terms.truncate(top_n);
    Ok(InteractionCatalog {
        terms,
        diagnostics: CatalogDiagnostics {
            neurons: arm.cfg.heads * arm.cfg.neurons_per_head,
            instances: dataset.len(),
            term_occurrences,
            degenerate_occurrences: degenerate,
        },
    })
}

// ---------------------------------------------------------------------------
// Report file
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FieldScore {
    pub field: String,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermReport {
    pub fields: Vec<String>,
    pub frequency: f64,
    pub order: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalReport {
    pub index: usize,
    pub fields: Vec<FieldScore>,
    pub degenerate: bool,
    pub neuron_weights: Vec<Vec<f64>>,
}

/// The attribution report emitted by `explain`, with field ids resolved to
/// schema names.
#[derive(Clone, Debug, Serialize)]
pub struct AttributionReport {
    pub global: Vec<FieldScore>,
    pub global_degenerate: bool,
    pub terms: Vec<TermReport>,
    pub diagnostics: CatalogDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<Vec<LocalReport>>,
}

pub fn build_report(
    arm: &ArmNet,
    store: &ParamStore,
    dataset: &Dataset,
    top_n: usize,
    instance_ids: &[usize],
    threads: usize,
) -> Result<AttributionReport> {
    let field_name = |j: usize| arm.schema.field(j).name.clone();
    let global = global_importance(arm, store)?;
    let catalog = interaction_catalog(arm, store, dataset, top_n, threads)?;
    let local = if instance_ids.is_empty() {
        None
    } else {
        let mut entries = Vec::with_capacity(instance_ids.len());
        for &idx in instance_ids {
            let inst = dataset.instances.get(idx).ok_or_else(|| {
                Error::Argument(format!(
                    "instance id {idx} out of range (dataset has {})",
                    dataset.len()
                ))
            })?;
            let attribution = local_attribution(arm, store, inst)?;
            entries.push(LocalReport {
                index: idx,
                fields: attribution
                    .scores
                    .iter()
                    .enumerate()
                    .map(|(j, &score)| FieldScore {
                        field: field_name(j),
                        score,
                    })
                    .collect(),
                degenerate: attribution.degenerate,
                neuron_weights: attribution.neuron_weights,
            });
        }
        Some(entries)
    };
    Ok(AttributionReport {
        global: global
            .scores
            .iter()
            .enumerate()
            .map(|(j, &score)| FieldScore {
                field: field_name(j),
                score,
            })
            .collect(),
        global_degenerate: global.degenerate,
        terms: catalog
            .terms
            .iter()
            .map(|t| TermReport {
                fields: t.fields.iter().map(|&j| field_name(j)).collect(),
                frequency: t.frequency,
                order: t.order,
            })
            .collect(),
        diagnostics: catalog.diagnostics,
        local,
    })
}
