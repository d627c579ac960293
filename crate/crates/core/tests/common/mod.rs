//! Shared helpers for the integration suites: random tiny schemas and
//! instances, and the analytic-vs-finite-difference gradient harness.

#![allow(dead_code)]

use armlet_core::data::{FeatureValue, FieldKind, FieldSpec, Instance, Schema};
use armlet_core::model::{ArmConfig, Mode, Model, ModelKind};
use armlet_core::numeric::{finite_diff_grad, rel_err, ParamStore, Prng};
use armlet_core::train::{dlogloss, logloss};

/// Random schema with `m` fields; roughly one in four fields is numerical
/// when `allow_numerical` is set.
pub fn random_schema(rng: &mut Prng, m: usize, allow_numerical: bool) -> Schema {
    let fields = (0..m)
        .map(|i| {
            let numerical = allow_numerical && rng.index(4) == 0;
            FieldSpec {
                field_id: i,
                name: format!("f{i}"),
                kind: if numerical {
                    FieldKind::Numerical { range: (0.0, 1.0) }
                } else {
                    FieldKind::Categorical {
                        cardinality: 2 + rng.index(3),
                    }
                },
            }
        })
        .collect();
    Schema::new(fields).unwrap()
}

pub fn random_instance(rng: &mut Prng, schema: &Schema) -> Instance {
    let features = schema
        .fields()
        .iter()
        .map(|f| match &f.kind {
            FieldKind::Categorical { cardinality } => {
                FeatureValue::Categorical(Some(rng.index(*cardinality) as u32))
            }
            FieldKind::Numerical { .. } => FeatureValue::Numerical(rng.uniform(0.05, 1.0)),
        })
        .collect();
    Instance {
        features,
        label: rng.index(2) == 1,
    }
}

/// Scale the embedding/attention tensors after init so scores spread enough
/// to exercise sparse gates and keep every gradient comfortably above
/// finite-difference noise.
pub fn inflate_attention_params(store: &mut ParamStore, factor: f64) {
    let names: Vec<String> = store
        .names()
        .filter(|n| {
            *n == "embed"
                || n.ends_with(".q")
                || n.ends_with(".v")
                || n.ends_with(".w_att")
                || *n == "fm.v"
                || *n == "dnn.embed"
                || *n == "fmp.w"
        })
        .map(|s| s.to_string())
        .collect();
    for name in names {
        for x in store.value_mut(&name).as_mut_slice() {
            *x *= factor;
        }
    }
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub checked_coords: usize,
}

/// Compare the model's accumulated analytic gradient of the mean logloss
/// against central finite differences over every coordinate of every
/// parameter. Returns `None` if the forward pass sits closer than `margin`
/// to a gradient kink (caller should resample).
pub fn grad_check(
    model: &Model,
    store: &mut ParamStore,
    instances: &[Instance],
    h: f64,
    margin: f64,
) -> Option<GradCheck> {
    // Analytic pass (train mode, dropout must be off).
    store.zero_grads();
    for inst in instances {
        let trace = model.forward(store, inst, Mode::Train, None).unwrap();
        if trace.stability_margin() < margin {
            return None;
        }
        let d = dlogloss(trace.logits()[0], inst.label_f64(), instances.len());
        model.backward(store, &trace, &[d]).unwrap();
    }
    let analytic: Vec<(String, Vec<f64>)> = store
        .names()
        .map(|n| (n.to_string(), store.grad(n).as_slice().to_vec()))
        .collect();
    store.zero_grads();

    let numeric = finite_diff_grad(store, h, |s| {
        let mut logits = Vec::with_capacity(instances.len());
        let mut labels = Vec::with_capacity(instances.len());
        for inst in instances {
            let trace = model.forward(s, inst, Mode::Train, None)?;
            logits.push(trace.logits()[0]);
            labels.push(inst.label_f64());
        }
        logloss(&logits, &labels)
    })
    .unwrap();

    let mut worst = 0.0;
    let mut worst_tensor = String::new();
    let mut checked = 0;
    for ((name, a), (n_name, n)) in analytic.iter().zip(&numeric) {
        assert_eq!(name, n_name);
        for (&av, &nv) in a.iter().zip(n.as_slice()) {
            let e = rel_err(av, nv);
            checked += 1;
            if e > worst {
                worst = e;
                worst_tensor = name.clone();
            }
        }
    }
    Some(GradCheck {
        max_rel_err: worst,
        worst_tensor,
        checked_coords: checked,
    })
}

/// Sample a random tiny config in the gradient-gate ranges.
pub fn random_tiny_config(rng: &mut Prng) -> ArmConfig {
    let alphas = [1.0, 1.5, 2.0];
    ArmConfig {
        emb_dim: 2 + rng.index(3),
        heads: 1 + rng.index(3),
        neurons_per_head: 1 + rng.index(4),
        alpha: alphas[rng.index(3)],
        mlp_widths: if rng.index(2) == 0 { vec![3] } else { vec![] },
        mlp_out: 2 + rng.index(3),
        out_dim: 1,
        exp_clamp: 15.0,
        dnn_widths: vec![3],
        dropout: 0.0,
    }
}

/// Smallest strictly positive attention gate in the trace. A gate can sit
/// just inside the support with a vanishing value; the analytic gradient
/// through it is then legitimately tiny and central differences see only
/// rounding noise, so the gradient harness also skips such points.
pub fn min_positive_gate(trace: &armlet_core::model::ModelTrace) -> f64 {
    use armlet_core::model::{ArmTrace, ModelTrace};
    fn scan(arm: &ArmTrace) -> f64 {
        let mut min = f64::INFINITY;
        for head in &arm.heads {
            for i in 0..head.gates.rows() {
                for &g in head.gates.row(i) {
                    if g > 0.0 {
                        min = min.min(g);
                    }
                }
            }
        }
        min
    }
    match trace {
        ModelTrace::Arm(t) => scan(t),
        ModelTrace::ArmPlus(t) => scan(&t.arm),
        _ => f64::INFINITY,
    }
}

/// Build a model of `kind` with random tiny shapes, inflated params, and a
/// few random instances; retries until the forward pass is support-stable
/// and every active gate is comfortably nonzero.
pub fn stable_case(
    kind: ModelKind,
    seed: u64,
    n_instances: usize,
) -> (Model, ParamStore, Vec<Instance>) {
    let mut rng = Prng::new(seed);
    for attempt in 0..50 {
        let m = 2 + rng.index(5);
        let schema = random_schema(&mut rng, m, true);
        let cfg = random_tiny_config(&mut rng);
        let model = Model::new(kind, schema.clone(), cfg).unwrap();
        let mut store = model.init_params(seed.wrapping_add(attempt));
        inflate_attention_params(&mut store, 100.0);
        let instances: Vec<Instance> = (0..n_instances)
            .map(|_| random_instance(&mut rng, &schema))
            .collect();
        let stable = instances.iter().all(|inst| {
            let trace = model.forward(&store, inst, Mode::Train, None).unwrap();
            // A saturated sigmoid makes (sigmoid(z) - y) vanish, scaling the
            // whole instance gradient below what h = 1e-5 differences can
            // resolve; keep logits in the responsive band.
            trace.stability_margin() > 1e-3
                && min_positive_gate(&trace) > 1e-3
                && trace.logits()[0].abs() < 3.5
        });
        if stable {
            return (model, store, instances);
        }
    }
    panic!("no support-stable case found for {kind:?} at seed {seed}");
}
