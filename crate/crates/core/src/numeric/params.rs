//! Named parameter tensors with parallel gradient and Adam moment buffers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numeric::Tensor2;

#[derive(Clone, Debug, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Tensor2,
    grad: Tensor2,
    m1: Tensor2,
    m2: Tensor2,
}

/// Single-writer container for everything trainable. Entries keep insertion
/// order, which pins both the seeding order at init time and the update
/// order at step time, so runs are reproducible.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor2) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter '{name}'"
        );
        let (r, c) = (value.rows(), value.cols());
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad: Tensor2::zeros(r, c),
            m1: Tensor2::zeros(r, c),
            m2: Tensor2::zeros(r, c),
        });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn value(&self, name: &str) -> &Tensor2 {
        &self.entries[self.idx(name)].value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Tensor2 {
        let i = self.idx(name);
        &mut self.entries[i].value
    }

    pub fn grad(&self, name: &str) -> &Tensor2 {
        &self.entries[self.idx(name)].grad
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut Tensor2 {
        let i = self.idx(name);
        &mut self.entries[i].grad
    }

    fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Copy of all parameter values, for best-checkpoint snapshots.
    pub fn snapshot(&self) -> Vec<Tensor2> {
        self.entries.iter().map(|e| e.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor2]) {
        assert_eq!(snapshot.len(), self.entries.len());
        for (e, s) in self.entries.iter_mut().zip(snapshot) {
            e.value = s.clone();
        }
    }

    /// One bias-corrected Adam update over every parameter; increments the
    /// step counter and zeroes gradients afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for e in &mut self.entries {
            if !e.grad.is_finite() {
                return Err(Error::Optimizer {
                    tensor: e.name.clone(),
                    msg: "non-finite gradient".to_string(),
                });
            }
            let g = e.grad.as_slice();
            let m1 = e.m1.as_mut_slice();
            let m2 = e.m2.as_mut_slice();
            let v = e.value.as_mut_slice();
            for i in 0..g.len() {
                m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i];
                m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m1[i] / bc1;
                let v_hat = m2[i] / bc2;
                v[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            e.grad.fill(0.0);
        }
        Ok(())
    }
}
