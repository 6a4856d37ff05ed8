use std::collections::HashMap;

use super::{NumError, Tensor};

/// Adam hyperparameters. Defaults are the usual decay rates with a
/// learning rate of 3e-4.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    value: Tensor,
    m: Option<Tensor>,
    v: Option<Tensor>,
}

/// Named trainable tensors in insertion order, plus Adam moments and the
/// optimizer step counter.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    index: HashMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter and returns its position. Names must be unique.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<usize, NumError> {
        if self.index.contains_key(name) {
            return Err(NumError::Argument(format!("duplicate parameter {name}")));
        }
        let id = self.slots.len();
        self.slots.push(Slot {
            name: name.to_string(),
            value,
            m: None,
            v: None,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.slots[id].name
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.slots[id].value
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.slots[id].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|i| self.get(i))
    }

    /// `(name, value)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &s.value))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn num_values(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Zero gradients with the same names and shapes.
    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            names: self.slots.iter().map(|s| s.name.clone()).collect(),
            tensors: self.slots.iter().map(|s| Tensor::zeros(s.value.shape())).collect(),
        }
    }

    pub fn moments(&self, id: usize) -> (Option<&Tensor>, Option<&Tensor>) {
        (self.slots[id].m.as_ref(), self.slots[id].v.as_ref())
    }
}

/// Gradient tensors keyed by parameter name, in the store's order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn new() -> Self {
        Gradients {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, grad: Tensor) {
        self.names.push(name.to_string());
        self.tensors.push(grad);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<(), NumError> {
        if self.names != other.names {
            return Err(NumError::Argument("gradient sets have different keys".into()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

impl Default for Gradients {
    fn default() -> Self {
        Self::new()
    }
}

/// One bias-corrected Adam update. Every gradient name must exist in the
/// store with an identical shape; parameters without a gradient are left
/// alone. The step counter advances once per call, except that an all-zero
/// gradient set leaves the store untouched: no step, no moment decay and
/// no drift from stale momentum.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) -> Result<(), NumError> {
    let mut targets = Vec::with_capacity(grads.len());
    for (name, g) in grads.iter() {
        let id = store
            .id(name)
            .ok_or_else(|| NumError::Argument(format!("gradient for unknown parameter {name}")))?;
        if store.get(id).shape() != g.shape() {
            return Err(NumError::Dimension(format!(
                "gradient {name} has shape {:?}, parameter has {:?}",
                g.shape(),
                store.get(id).shape()
            )));
        }
        targets.push(id);
    }
    if grads.iter().all(|(_, g)| g.data().iter().all(|&x| x == 0.0)) {
        return Ok(());
    }

    store.step += 1;
    let t = store.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for (id, (_, g)) in targets.into_iter().zip(grads.iter()) {
        let slot = &mut store.slots[id];
        let shape = slot.value.shape().to_vec();
        let m = slot.m.get_or_insert_with(|| Tensor::zeros(&shape));
        let v = slot.v.get_or_insert_with(|| Tensor::zeros(&shape));
        let (p, m, v) = (slot.value.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::vector(&[x])).unwrap();
        s
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = scalar_store(0.7);
        let g = s.zero_grads();
        for _ in 0..3 {
            adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        }
        assert_eq!(s.by_name("x").unwrap().data(), &[0.7]);
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn zero_gradient_ignores_stale_momentum() {
        let mut s = scalar_store(0.7);
        let mut g = s.zero_grads();
        g.get_mut(0).data_mut()[0] = 2.0;
        adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        let (x, m) = (s.by_name("x").unwrap().data()[0], s.moments(0).0.unwrap().data()[0]);
        let zero = s.zero_grads();
        adam_step(&mut s, &zero, &AdamConfig::default()).unwrap();
        assert_eq!(s.by_name("x").unwrap().data()[0], x);
        assert_eq!(s.moments(0).0.unwrap().data()[0], m);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t = 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        let mut s = scalar_store(0.0);
        let mut g = s.zero_grads();
        g.get_mut(0).data_mut()[0] = 1.0;
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut s, &g, &cfg).unwrap();
        let expected = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((s.by_name("x").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn repeated_calls_are_not_idempotent() {
        let mut s = scalar_store(0.0);
        let mut g = s.zero_grads();
        g.get_mut(0).data_mut()[0] = 1.0;
        let cfg = AdamConfig::default();
        adam_step(&mut s, &g, &cfg).unwrap();
        let after_one = s.by_name("x").unwrap().data()[0];
        adam_step(&mut s, &g, &cfg).unwrap();
        assert_eq!(s.step(), 2);
        assert_ne!(s.by_name("x").unwrap().data()[0], after_one);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = scalar_store(0.0);
        let mut g = Gradients::new();
        g.push("x", Tensor::zeros(&[2]));
        assert!(matches!(
            adam_step(&mut s, &g, &AdamConfig::default()),
            Err(NumError::Dimension(_))
        ));
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn moments_match_parameter_shapes() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::zeros(&[3, 2])).unwrap();
        assert_eq!(s.moments(0), (None, None));
        let mut g = s.zero_grads();
        g.get_mut(0).data_mut()[4] = 0.5;
        adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        let (m, v) = s.moments(0);
        assert_eq!(m.unwrap().shape(), &[3, 2]);
        assert_eq!(v.unwrap().shape(), &[3, 2]);
    }

    #[test]
    fn insertion_order_is_kept() {
        let mut s = ParamStore::new();
        for name in ["zeta", "alpha", "mid"] {
            s.insert(name, Tensor::zeros(&[1])).unwrap();
        }
        assert_eq!(s.names().collect::<Vec<_>>(), ["zeta", "alpha", "mid"]);
        assert!(s.insert("mid", Tensor::zeros(&[1])).is_err());
    }
}
