//! Inference throughput measurement across field counts.
//!
//! For each `m` a fresh model and synthetic batch are built from the seed,
//! the eval-time attention cache is installed, and the batch is timed over
//! several repetitions on a monotonic clock. The first repetition is a
//! warm-up and is dropped; the median of the rest is reported. Per-tuple
//! time is fitted against `m` by least squares; the model's per-instance
//! cost is linear in the field count, so the fit's R^2 should be close
//! to 1.

use std::time::Instant;

use serde::Serialize;

use crate::data::{FeatureValue, FieldKind, FieldSpec, Instance, Schema};
use crate::error::{Error, Result};
use crate::model::{ArmConfig, ArmNet};
use crate::numeric::Prng;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub m_list: Vec<usize>,
    /// Instances per timed repetition.
    pub batch: usize,
    /// Repetitions per field count (first is warm-up).
    pub reps: usize,
    pub heads: usize,
    pub neurons_per_head: usize,
    pub emb_dim: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            m_list: vec![4, 8, 16, 32, 64],
            batch: 2048,
            reps: 5,
            heads: 4,
            neurons_per_head: 64,
            emb_dim: 10,
            alpha: 2.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub tuples_per_sec: f64,
    pub per_tuple_ns: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    /// R^2 of the least-squares line through (m, per-tuple time).
    pub r_squared: f64,
}

const BENCH_CARDINALITY: usize = 100;

fn bench_schema(m: usize) -> Schema {
    Schema::new(
        (0..m)
            .map(|i| FieldSpec {
                field_id: i,
                name: format!("f{i}"),
                kind: FieldKind::Categorical {
                    cardinality: BENCH_CARDINALITY,
                },
            })
            .collect(),
    )
    .expect("bench schema is valid")
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.reps < 3 {
        return Err(Error::Argument(format!(
            "bench needs reps >= 3, got {}",
            cfg.reps
        )));
    }
    if cfg.m_list.is_empty() || cfg.batch == 0 {
        return Err(Error::Argument("bench needs m values and a batch size".into()));
    }
    let mut rows = Vec::with_capacity(cfg.m_list.len());
    for &m in &cfg.m_list {
        let schema = bench_schema(m);
        let arm_cfg = ArmConfig {
            emb_dim: cfg.emb_dim,
            heads: cfg.heads,
            neurons_per_head: cfg.neurons_per_head,
            alpha: cfg.alpha,
            mlp_widths: vec![16],
            mlp_out: 16,
            out_dim: 1,
            ..ArmConfig::default()
        };
        let arm = ArmNet::new(schema, arm_cfg)?;
        let store = arm.init_params(cfg.seed);
        let cache = arm.eval_cache(&store)?;
        let mut rng = Prng::derive(cfg.seed, m as u64);
        let instances: Vec<Instance> = (0..cfg.batch)
            .map(|_| Instance {
                features: (0..m)
                    .map(|_| {
                        FeatureValue::Categorical(Some(rng.index(BENCH_CARDINALITY) as u32))
                    })
                    .collect(),
                label: false,
            })
            .collect();

        let mut times = Vec::with_capacity(cfg.reps);
        for _ in 0..cfg.reps {
            let start = Instant::now();
            for inst in &instances {
                let logits = arm.logits_cached(&store, &cache, inst)?;
                std::hint::black_box(logits);
            }
            times.push(start.elapsed().as_secs_f64());
        }
        times.remove(0); // warm-up
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        let per_tuple = median / cfg.batch as f64;
        rows.push(BenchRow {
            m,
            tuples_per_sec: 1.0 / per_tuple,
            per_tuple_ns: per_tuple * 1e9,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.per_tuple_ns).collect();
    Ok(BenchResult {
        r_squared: linear_fit_r2(&xs, &ys),
        rows,
    })
}

/// R^2 of the least-squares line through (x, y).
pub fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_reps() {
        let cfg = BenchConfig {
            reps: 2,
            ..BenchConfig::default()
        };
        assert!(matches!(run_bench(&cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn perfect_line_has_unit_r2() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert!((linear_fit_r2(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_bench_runs_and_is_positive() {
        let cfg = BenchConfig {
            m_list: vec![2, 4],
            batch: 32,
            reps: 3,
            neurons_per_head: 4,
            heads: 1,
            emb_dim: 4,
            ..BenchConfig::default()
        };
        let result = run_bench(&cfg).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert!(result.rows.iter().all(|r| r.tuples_per_sec > 0.0));
    }
}
