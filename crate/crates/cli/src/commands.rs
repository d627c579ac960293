//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use armlet_core::bench::{run_bench, BenchConfig};
use armlet_core::data::{
    load_dataset, load_schema, split, DataFormat, Dataset, LoadOptions, OovPolicy, Schema,
};
use armlet_core::interpret::build_report;
use armlet_core::model::{batch_logits, load_model, save_model, ArmNet, Model, ModelKind};
use armlet_core::numeric::sigmoid;
use armlet_core::train::{self, evaluate, history_lines, EvalReport, TrainConfig};

use crate::config::{override_field, RunConfig};
use crate::{
    env_threads, parse_u64_list, parse_usize_list, BenchArgs, CliError, EvalArgs, ExplainArgs,
    PredictArgs, TrainArgs,
};

fn parse_format(text: &str) -> Result<DataFormat, CliError> {
    DataFormat::from_str(text).map_err(CliError::from)
}

fn require_path<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    match path {
        Some(p) if p.exists() => Ok(p),
        Some(p) => Err(CliError::config(format!(
            "{flag}: path '{}' does not exist",
            p.display()
        ))),
        None => Err(CliError::config(format!("missing required {flag}"))),
    }
}

fn load_split(
    path: &Path,
    schema: &Schema,
    format: DataFormat,
    oov: OovPolicy,
) -> Result<Dataset, CliError> {
    let loaded = load_dataset(path, schema, format, LoadOptions { oov })?;
    for w in &loaded.report.warnings {
        eprintln!("armlet: warning: {}: {w}", path.display());
    }
    Ok(loaded.dataset)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SeedResult {
    seed: u64,
    best_valid_auc: f64,
    epochs_run: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_logloss: Option<f64>,
    model_path: String,
}

#[derive(Serialize)]
struct TrainSummary {
    model_kind: String,
    seeds: Vec<SeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_test_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_test_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_test_logloss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_test_logloss: Option<f64>,
}

fn seed_path(base: &Path, seed: u64, multi: bool) -> PathBuf {
    if !multi {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "model".into());
    let ext = base
        .extension()
        .map(|s| format!(".{}", s.to_string_lossy()))
        .unwrap_or_default();
    base.with_file_name(format!("{stem}.seed{seed}{ext}"))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut run = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    // Flags win over the config file.
    override_field!(
        run, args, schema, train_data, valid_data, test_data, data, format, model_kind,
        model_out, report_out, k, o, alpha, n_emb, lr, batch_size, patience, max_epochs
    );
    if let Some(seed_text) = &args.seed {
        run.seeds = Some(parse_u64_list(seed_text, "--seed")?);
    }
    let parallel = args.parallel || run.parallel.unwrap_or(false);

    let kind: ModelKind = run
        .model_kind
        .as_deref()
        .unwrap_or("arm")
        .parse()
        .map_err(CliError::from)?;
    let format = parse_format(run.format.as_deref().unwrap_or("indexed"))?;
    let schema = load_schema(require_path(&run.schema, "--schema")?)?;
    let cfg = run.arm_config();
    cfg.validate()?;

    let (train_set, valid_set, test_set) = if run.data.is_some() {
        let full = load_split(
            require_path(&run.data, "--data")?,
            &schema,
            format,
            OovPolicy::Strict,
        )?;
        let ratios = run.split_ratios.unwrap_or([0.8, 0.1, 0.1]);
        let (tr, va, te) = split(&full, (ratios[0], ratios[1], ratios[2]), run.data_seed.unwrap_or(1))?;
        (tr, va, Some(te))
    } else {
        let tr = load_split(
            require_path(&run.train_data, "--train-data")?,
            &schema,
            format,
            OovPolicy::Strict,
        )?;
        let va = load_split(
            require_path(&run.valid_data, "--valid-data")?,
            &schema,
            format,
            OovPolicy::Strict,
        )?;
        let te = match &run.test_data {
            Some(_) => Some(load_split(
                require_path(&run.test_data, "--test-data")?,
                &schema,
                format,
                OovPolicy::Strict,
            )?),
            None => None,
        };
        (tr, va, te)
    };

    let seeds = run.seeds.clone().unwrap_or_else(|| vec![1]);
    if seeds.is_empty() {
        return Err(CliError::argument("--seed: at least one seed required"));
    }
    let model_out = run
        .model_out
        .clone()
        .unwrap_or_else(|| PathBuf::from("model.json"));
    let multi = seeds.len() > 1;
    let threads = env_threads();

    let run_one = |seed: u64| -> Result<SeedResult, CliError> {
        let tcfg: TrainConfig = run.train_config(seed);
        let (model, outcome) = train::train(kind, &train_set, &valid_set, &cfg, &tcfg)?;
        let path = seed_path(&model_out, seed, multi);
        save_model(&path, kind, &cfg, &schema, &outcome.params)?;
        std::fs::write(
            path.with_extension("history.csv"),
            history_lines(&outcome.history),
        )?;
        let (test_auc, test_logloss) = match &test_set {
            Some(te) => {
                let report = evaluate(&model, &outcome.params, te, threads)?;
                (Some(report.auc), Some(report.logloss))
            }
            None => (None, None),
        };
        Ok(SeedResult {
            seed,
            best_valid_auc: outcome.best_valid_auc,
            epochs_run: outcome.epochs_run,
            test_auc,
            test_logloss,
            model_path: path.display().to_string(),
        })
    };

    let mut results: Vec<SeedResult> = if parallel && seeds.len() > 1 {
        let outputs: Vec<Result<SeedResult, CliError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| scope.spawn(move || run_one(seed)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        outputs.into_iter().collect::<Result<Vec<_>, _>>()?
    } else {
        let mut out = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            out.push(run_one(seed)?);
        }
        out
    };
    results.sort_by_key(|r| r.seed);

    for r in &results {
        match (r.test_auc, r.test_logloss) {
            (Some(auc), Some(ll)) => println!(
                "seed {}: valid_auc={:.6} test_auc={:.6} test_logloss={:.6} epochs={} model={}",
                r.seed, r.best_valid_auc, auc, ll, r.epochs_run, r.model_path
            ),
            _ => println!(
                "seed {}: valid_auc={:.6} epochs={} model={}",
                r.seed, r.best_valid_auc, r.epochs_run, r.model_path
            ),
        }
    }

    let aucs: Vec<f64> = results.iter().filter_map(|r| r.test_auc).collect();
    let lls: Vec<f64> = results.iter().filter_map(|r| r.test_logloss).collect();
    let mut summary = TrainSummary {
        model_kind: kind.as_str().to_string(),
        seeds: results,
        mean_test_auc: None,
        std_test_auc: None,
        mean_test_logloss: None,
        std_test_logloss: None,
    };
    if aucs.len() == seeds.len() && !aucs.is_empty() {
        let (mean, std) = mean_std(&aucs);
        summary.mean_test_auc = Some(mean);
        summary.std_test_auc = Some(std);
        let (mean_ll, std_ll) = mean_std(&lls);
        summary.mean_test_logloss = Some(mean_ll);
        summary.std_test_logloss = Some(std_ll);
        println!(
            "summary: mean_test_auc={mean:.6} std={std:.6} mean_test_logloss={mean_ll:.6} over {} seeds",
            seeds.len()
        );
    }
    let report_path = run
        .report_out
        .clone()
        .unwrap_or_else(|| model_out.with_extension("summary.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let model_path = Some(args.model);
    let loaded = load_model(require_path(&model_path, "--model")?)?;
    let data_path = Some(args.data);
    let dataset = load_split(
        require_path(&data_path, "--data")?,
        loaded.model.schema(),
        parse_format(&args.format)?,
        OovPolicy::MapToUnknown,
    )?;
    let report: EvalReport = evaluate(&loaded.model, &loaded.store, &dataset, env_threads())?;
    println!(
        "auc={:.6} logloss={:.6} n={}",
        report.auc, report.logloss, report.n
    );
    let json = serde_json::to_string(&report)?;
    println!("{json}");
    if let Some(out) = args.out {
        std::fs::write(out, json)?;
    }
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let model_path = Some(args.model);
    let loaded = load_model(require_path(&model_path, "--model")?)?;
    let data_path = Some(args.data);
    let dataset = load_split(
        require_path(&data_path, "--data")?,
        loaded.model.schema(),
        parse_format(&args.format)?,
        OovPolicy::MapToUnknown,
    )?;
    let logits = batch_logits(
        &loaded.model,
        &loaded.store,
        &dataset.instances,
        env_threads(),
    )?;
    let mut out = String::with_capacity(logits.len() * 12);
    for (i, &z) in logits.iter().enumerate() {
        out.push_str(&format!("{i},{:.6}\n", sigmoid(z)));
    }
    match args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

fn attribution_net(model: &Model) -> Result<&ArmNet, CliError> {
    match model {
        Model::Arm(arm) => Ok(arm),
        Model::ArmPlus(ens) => Ok(&ens.arm),
        other => Err(CliError::config(format!(
            "model kind '{}' has no attention weights to explain",
            other.kind().as_str()
        ))),
    }
}

pub fn explain(args: ExplainArgs) -> Result<(), CliError> {
    let model_path = Some(args.model);
    let loaded = load_model(require_path(&model_path, "--model")?)?;
    let arm = attribution_net(&loaded.model)?;
    let data_path = Some(args.data);
    let dataset = load_split(
        require_path(&data_path, "--data")?,
        loaded.model.schema(),
        parse_format(&args.format)?,
        OovPolicy::MapToUnknown,
    )?;
    let instance_ids = match &args.instances {
        Some(text) => parse_usize_list(text, "--instances")?,
        None => Vec::new(),
    };
    for &id in &instance_ids {
        if id >= dataset.len() {
            return Err(CliError::argument(format!(
                "--instances: id {id} out of range (dataset has {})",
                dataset.len()
            )));
        }
    }
    let report = build_report(
        arm,
        &loaded.store,
        &dataset,
        args.top_n,
        &instance_ids,
        env_threads(),
    )?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "wrote {} terms and {} field scores to {}",
        report.terms.len(),
        report.global.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = BenchConfig {
        m_list: parse_usize_list(&args.m_list, "--m-list")?,
        batch: args.batch,
        reps: args.reps,
        heads: args.k,
        neurons_per_head: args.o,
        emb_dim: args.n_emb,
        alpha: args.alpha,
        seed: args.seed,
    };
    let result = run_bench(&cfg)?;
    println!("{:>6} {:>16} {:>14}", "m", "tuples/s", "ns/tuple");
    for row in &result.rows {
        println!(
            "{:>6} {:>16.0} {:>14.0}",
            row.m, row.tuples_per_sec, row.per_tuple_ns
        );
    }
    println!("per-tuple time vs m: R^2 = {:.4}", result.r_squared);
    if let Some(out) = args.out {
        std::fs::write(out, serde_json::to_string_pretty(&result)?)?;
    }
    Ok(())
}
