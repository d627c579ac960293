// Scratch harness for calibrating the synthetic acceptance experiments.
// Not part of the deliverable surface; run with:
//   cargo run -p armlet-core --release --example tune <c5a|c5b|c6a|c6b>

use armlet_core::data::{generate_synthetic, split, PlantedTerm, SyntheticSpec};
use armlet_core::interpret::global_importance;
use armlet_core::model::{ArmConfig, Model, ModelKind};
use armlet_core::train::{evaluate, train, TrainConfig};
use std::time::Instant;

fn spec_a() -> SyntheticSpec {
    let card: usize = std::env::var("TUNE_CARD").map(|v| v.parse().unwrap()).unwrap_or(6);
    let coeff: f64 = std::env::var("TUNE_COEFF").map(|v| v.parse().unwrap()).unwrap_or(3.0);
    SyntheticSpec {
        m: 10,
        cardinalities: vec![card; 10],
        terms: vec![
            PlantedTerm {
                fields: vec![0, 1, 2],
                coeff,
            },
            PlantedTerm {
                fields: vec![2, 3, 4],
                coeff,
            },
        ],
        bias: 0.0,
        n: 50_000,
        noise: 0.0,
    }
}

fn spec_b() -> SyntheticSpec {
    SyntheticSpec {
        m: 10,
        cardinalities: vec![6; 10],
        terms: vec![
            PlantedTerm {
                fields: vec![0, 1, 2],
                coeff: 3.0,
            },
            PlantedTerm {
                fields: vec![1, 2, 3],
                coeff: 3.0,
            },
        ],
        bias: 0.0,
        n: 50_000,
        noise: 0.0,
    }
}

fn arm_cfg(alpha: f64) -> ArmConfig {
    ArmConfig {
        emb_dim: 8,
        heads: 2,
        neurons_per_head: 8,
        alpha,
        mlp_widths: vec![32],
        mlp_out: 16,
        out_dim: 1,
        exp_clamp: 15.0,
        dnn_widths: vec![32],
        dropout: 0.0,
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "c5a".into());
    match which.as_str() {
        "c5a" => criterion5(spec_a(), &[0, 1, 2, 3, 4]),
        "c5b" => criterion5(spec_b(), &[0, 1, 2, 3]),
        "c6a" => criterion6(spec_a()),
        "c6b" => criterion6(spec_b()),
        _ => panic!("unknown experiment"),
    }
}

fn criterion5(spec: SyntheticSpec, planted: &[usize]) {
    let mut passes = 0;
    let data_seed: u64 = std::env::var("TUNE_DS").map(|v| v.parse().unwrap()).unwrap_or(1);
    let data = generate_synthetic(&spec, data_seed).unwrap();
    let (train_set, valid_set, test_set) =
        split(&data.dataset, (0.8, 0.1, 0.1), data_seed).unwrap();
    for seed in 101..=105u64 {
        let t0 = Instant::now();

        let tcfg_lr = TrainConfig {
            lr: 0.05,
            batch_size: 256,
            max_epochs: 15,
            patience: 3,
            eval_every_steps: None,
            seed,
        };
        let (lr_model, lr_out) =
            train(ModelKind::Lr, &train_set, &valid_set, &arm_cfg(1.5), &tcfg_lr).unwrap();
        let lr_auc = evaluate(&lr_model, &lr_out.params, &test_set, 1).unwrap().auc;

        let sweep_lr: f64 = std::env::var("TUNE_LR").map(|v| v.parse().unwrap()).unwrap_or(0.002);
        let sweep_bs: usize = std::env::var("TUNE_BS").map(|v| v.parse().unwrap()).unwrap_or(256);
        let sweep_ep: usize = std::env::var("TUNE_EP").map(|v| v.parse().unwrap()).unwrap_or(60);
        let sweep_k: usize = std::env::var("TUNE_K").map(|v| v.parse().unwrap()).unwrap_or(2);
        let sweep_o: usize = std::env::var("TUNE_O").map(|v| v.parse().unwrap()).unwrap_or(8);
        let sweep_alpha: f64 = std::env::var("TUNE_A").map(|v| v.parse().unwrap()).unwrap_or(2.0);
        let tcfg = TrainConfig {
            lr: sweep_lr,
            batch_size: sweep_bs,
            max_epochs: sweep_ep,
            patience: 6,
            eval_every_steps: None,
            seed,
        };
        let sweep_ne: usize = std::env::var("TUNE_NE").map(|v| v.parse().unwrap()).unwrap_or(8);
        let sweep_drop: f64 = std::env::var("TUNE_DROP").map(|v| v.parse().unwrap()).unwrap_or(0.0);
        let sweep_mlp: usize = std::env::var("TUNE_MLP").map(|v| v.parse().unwrap()).unwrap_or(32);
        let cfg5 = ArmConfig {
            heads: sweep_k,
            neurons_per_head: sweep_o,
            emb_dim: sweep_ne,
            dropout: sweep_drop,
            mlp_widths: vec![sweep_mlp],
            mlp_out: sweep_mlp / 2,
            ..arm_cfg(sweep_alpha)
        };
        let (arm_model, arm_out) =
            train(ModelKind::Arm, &train_set, &valid_set, &cfg5, &tcfg).unwrap();
        let arm_auc = evaluate(&arm_model, &arm_out.params, &test_set, 1)
            .unwrap()
            .auc;
        let arm = match &arm_model {
            Model::Arm(a) => a,
            _ => unreachable!(),
        };
        let gi = global_importance(arm, &arm_out.params).unwrap();
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| gi.scores[b].partial_cmp(&gi.scores[a]).unwrap());
        let top5 = &order[..5];
        let recovered = planted.iter().all(|f| top5.contains(f));
        let margin_ok = arm_auc - lr_auc >= 0.05;
        if recovered && margin_ok {
            passes += 1;
        }
        let mut top5s = top5.to_vec();
        top5s.sort_unstable();
        println!(
            "seed {seed}: LR {lr_auc:.4} ARM {arm_auc:.4} margin {:+.4} top5 {top5s:?} recovered {recovered} epochs {} ({:.0}s)",
            arm_auc - lr_auc,
            arm_out.epochs_run,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("passes: {passes}/5");
}

fn criterion6(spec: SyntheticSpec) {
    let mut means = [0.0f64; 4];
    let mut fm1_deltas = Vec::new();
    for seed in 1..=5u64 {
        let data = generate_synthetic(&spec, seed).unwrap();
        let (train_set, valid_set, test_set) =
            split(&data.dataset, (0.8, 0.1, 0.1), seed).unwrap();
        let mut line = format!("seed {seed}:");
        let mut aucs = [0.0f64; 4];
        for (slot, neurons) in [0usize, 1, 4, 8].into_iter().enumerate() {
            let cfg = ArmConfig {
                emb_dim: 16,
                neurons_per_head: neurons.max(1),
                ..arm_cfg(1.5)
            };
            let kind = if neurons == 0 {
                ModelKind::Fm
            } else {
                ModelKind::FmPlus
            };
            let tcfg = TrainConfig {
                lr: 0.02,
                batch_size: 256,
                max_epochs: 60,
                patience: 8,
                eval_every_steps: None,
                seed,
            };
            let t0 = Instant::now();
            let (model, out) = train(kind, &train_set, &valid_set, &cfg, &tcfg).unwrap();
            let auc = evaluate(&model, &out.params, &test_set, 1).unwrap().auc;
            aucs[slot] = auc;
            means[slot] += auc / 5.0;
            line.push_str(&format!(
                " o{neurons}={auc:.4}({}ep,{:.0}s)",
                out.epochs_run,
                t0.elapsed().as_secs_f64()
            ));
        }
        fm1_deltas.push(aucs[1] - aucs[0]);
        println!("{line}");
    }
    println!("means: {means:?}");
    println!(
        "fm+1 mean delta: {:+.4}; monotone within band: {}",
        fm1_deltas.iter().sum::<f64>() / 5.0,
        means.windows(2).all(|w| w[1] >= w[0] - 0.001)
    );
}
