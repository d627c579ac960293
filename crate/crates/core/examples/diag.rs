// Diagnostic: where does a trained model put field importance?
use armlet_core::data::{generate_synthetic, split, Dataset, PlantedTerm, SyntheticSpec};
use armlet_core::interpret::{global_importance, interaction_catalog, local_attribution};
use armlet_core::model::{ArmConfig, Model, ModelKind};
use armlet_core::train::{evaluate, train, TrainConfig};

fn main() {
    let spec = SyntheticSpec {
        m: 10,
        cardinalities: vec![6; 10],
        terms: vec![
            PlantedTerm { fields: vec![0, 1, 2], coeff: 3.0 },
            PlantedTerm { fields: vec![2, 3, 4], coeff: 3.0 },
        ],
        bias: 0.0,
        n: 50_000,
        noise: 0.0,
    };
    let seed = 1;
    let data = generate_synthetic(&spec, seed).unwrap();
    let (train_set, valid_set, test_set) = split(&data.dataset, (0.8, 0.1, 0.1), seed).unwrap();
    let cfg = ArmConfig {
        emb_dim: 8, heads: 2, neurons_per_head: 8, alpha: 2.0,
        mlp_widths: vec![32], mlp_out: 16, out_dim: 1,
        exp_clamp: 15.0, dnn_widths: vec![32], dropout: 0.0,
    };
    let tcfg = TrainConfig { lr: 0.002, batch_size: 256, max_epochs: 60, patience: 6, eval_every_steps: None, seed };
    let (model, out) = train(ModelKind::Arm, &train_set, &valid_set, &cfg, &tcfg).unwrap();
    let auc = evaluate(&model, &out.params, &test_set, 1).unwrap().auc;
    println!("test auc {auc:.4} epochs {}", out.epochs_run);
    let arm = match &model { Model::Arm(a) => a, _ => unreachable!() };
    let gi = global_importance(arm, &out.params).unwrap();
    println!("global importance: {:?}", gi.scores.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    // Mean |w| per field over 200 instances (local attribution mass).
    let sample = Dataset::new(test_set.schema.clone(), test_set.instances[..200].to_vec());
    let mut mean_absw = vec![0.0; 10];
    for inst in &sample.instances {
        let la = local_attribution(arm, &out.params, inst).unwrap();
        for (j, s) in la.scores.iter().enumerate() { mean_absw[j] += s / 200.0; }
    }
    println!("mean local attribution: {:?}", mean_absw.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    let catalog = interaction_catalog(arm, &out.params, &sample, 12, 1).unwrap();
    for t in &catalog.terms {
        println!("term {:?} freq {:.2} order {}", t.fields, t.frequency, t.order);
    }
    // Per-field |v| by head and per-field mean |embed| row norms of used categories.
    for k in 0..2 {
        let v = out.params.value(&format!("head{k}.v"));
        let sums: Vec<f64> = (0..10).map(|j| (0..8).map(|i| v.at(j, i).abs()).sum::<f64>()).collect();
        println!("head{k} |v| by field: {:?}", sums.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    let layout = arm.schema.embedding_layout();
    let table = out.params.value("embed");
    let enorm: Vec<f64> = (0..10).map(|j| {
        (0..6).map(|c| {
            let row = table.row(layout.categorical_row(j, Some(c)));
            row.iter().map(|x| x * x).sum::<f64>().sqrt()
        }).sum::<f64>() / 6.0
    }).collect();
    println!("mean |e| by field: {:?}", enorm.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>());
}
