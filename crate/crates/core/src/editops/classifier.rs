use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::EditError;
use crate::numcore::kernels::sigmoid;
use crate::numcore::{adam_step, AdamConfig, Gradients, ParamStore, Rng, Tensor};

/// Probabilities are kept this far from 0 and 1.
const PROB_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: 64,
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
        }
    }
}

/// One-hidden-layer perceptron over standardized features:
/// `p = σ(w2 · relu(W1 x̂ + b1) + b2)` with `x̂ = (x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditClassifier {
    pub config: ClassifierConfig,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `hidden × input`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

struct Forward {
    x: Vec<f64>,
    hidden: Vec<f64>,
    p: f64,
}

impl EditClassifier {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn forward(&self, raw: &[f64]) -> Forward {
        let x = self.standardize(raw);
        let n = x.len();
        let hidden: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(j, b)| (b + crate::numcore::kernels::dot(&self.w1[j * n..(j + 1) * n], &x)).max(0.0))
            .collect();
        let z = self.b2 + crate::numcore::kernels::dot(&self.w2, &hidden);
        Forward {
            x,
            hidden,
            p: sigmoid(z).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN),
        }
    }

    /// Probability that the edit behind `features` is a good correction.
    pub fn predict(&self, features: &[f64]) -> Result<f64, EditError> {
        if features.len() != self.input_dim() {
            return Err(EditError::Argument(format!(
                "classifier expects {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        Ok(self.forward(features).p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("classifier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EditError> {
        let c: EditClassifier = serde_json::from_str(text).map_err(|e| EditError::Format(e.to_string()))?;
        let (n, h) = (c.mean.len(), c.b1.len());
        if c.std.len() != n || c.w1.len() != n * h || c.w2.len() != h {
            return Err(EditError::Format("classifier parameter shapes disagree".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), EditError> {
        std::fs::write(path, self.to_json()).map_err(|e| EditError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EditError> {
        let text = std::fs::read_to_string(path).map_err(|e| EditError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Trains on `(features, is_good)` pairs with mini-batch Adam on the mean
/// logistic loss. The output layer starts at zero, so flipping every label
/// yields the mirrored model.
pub fn train_classifier(
    examples: &[(Vec<f64>, bool)],
    cfg: &ClassifierConfig,
    rng: &mut Rng,
) -> Result<EditClassifier, EditError> {
    let Some(first) = examples.first() else {
        return Err(EditError::Argument("no training examples".into()));
    };
    let n = first.0.len();
    if n == 0 || examples.iter().any(|(x, _)| x.len() != n) {
        return Err(EditError::Argument("feature vectors differ in length".into()));
    }
    if examples.iter().any(|(x, _)| x.iter().any(|v| !v.is_finite())) {
        return Err(EditError::Argument("non-finite feature".into()));
    }
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(EditError::Argument(
            "training data needs both good and bad edits".into(),
        ));
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(EditError::Argument(format!("invalid classifier config {cfg:?}")));
    }

    let count = examples.len() as f64;
    let mut mean = vec![0.0; n];
    for (x, _) in examples {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / count;
        }
    }
    let mut std = vec![0.0; n];
    for (x, _) in examples {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / count;
        }
    }
    for s in &mut std {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }

    let h = cfg.hidden;
    let bound = (6.0 / (n + h) as f64).sqrt();
    let w1: Vec<f64> = (0..n * h).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut store = ParamStore::new();
    let tensor = |shape: &[usize], v: Vec<f64>| Tensor::from_vec(shape, v).expect("shape matches");
    store.insert("w1", tensor(&[h, n], w1)).map_err(num)?;
    store.insert("b1", Tensor::zeros(&[h])).map_err(num)?;
    store.insert("w2", Tensor::zeros(&[h])).map_err(num)?;
    store.insert("b2", Tensor::zeros(&[1])).map_err(num)?;

    let snapshot = |store: &ParamStore| EditClassifier {
        config: cfg.clone(),
        mean: mean.clone(),
        std: std.clone(),
        w1: store.get(0).data().to_vec(),
        b1: store.get(1).data().to_vec(),
        w2: store.get(2).data().to_vec(),
        b2: store.get(3).data()[0],
    };
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let model = snapshot(&store);
            let mut grads = store.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (raw, y) = &examples[i];
                let fw = model.forward(raw);
                let dz = (fw.p - f64::from(u8::from(*y))) * scale;
                grads.get_mut(3).data_mut()[0] += dz;
                for j in 0..h {
                    grads.get_mut(2).data_mut()[j] += dz * fw.hidden[j];
                    if fw.hidden[j] > 0.0 {
                        let dh = dz * model.w2[j];
                        grads.get_mut(1).data_mut()[j] += dh;
                        crate::numcore::kernels::axpy(dh, &fw.x, &mut grads.get_mut(0).data_mut()[j * n..(j + 1) * n]);
                    }
                }
            }
            step(&mut store, &grads, &adam)?;
        }
    }
    Ok(snapshot(&store))
}

fn step(store: &mut ParamStore, grads: &Gradients, adam: &AdamConfig) -> Result<(), EditError> {
    if !grads.is_finite() {
        return Err(EditError::Argument("non-finite classifier gradient".into()));
    }
    adam_step(store, grads, adam).map_err(num)
}

fn num(e: crate::numcore::NumError) -> EditError {
    EditError::Argument(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng::seeded;

    /// Two Gaussian-ish clusters split by the sign of the first coordinate.
    fn toy(seed: u64) -> Vec<(Vec<f64>, bool)> {
        let mut rng = seeded(seed);
        (0..80)
            .map(|i| {
                let good = i % 2 == 0;
                let centre = if good { 2.0 } else { -2.0 };
                let x = (0..6)
                    .map(|k| if k == 0 { centre } else { 0.0 } + rng.gen_range(-1.0..1.0))
                    .collect();
                (x, good)
            })
            .collect()
    }

    fn cfg() -> ClassifierConfig {
        ClassifierConfig {
            hidden: 8,
            epochs: 60,
            batch_size: 16,
            lr: 1e-2,
        }
    }

    #[test]
    fn separable_set_is_learned() {
        let data = toy(1);
        let clf = train_classifier(&data, &cfg(), &mut seeded(5)).unwrap();
        for (x, y) in &data {
            let p = clf.predict(x).unwrap();
            assert!(p > 0.0 && p < 1.0);
            assert_eq!(p > 0.5, *y);
        }
    }

    #[test]
    fn flipped_labels_mirror_predictions() {
        let data = toy(2);
        let flipped: Vec<_> = data.iter().map(|(x, y)| (x.clone(), !y)).collect();
        let a = train_classifier(&data, &cfg(), &mut seeded(9)).unwrap();
        let b = train_classifier(&flipped, &cfg(), &mut seeded(9)).unwrap();
        for (x, _) in &data {
            let (pa, pb) = (a.predict(x).unwrap(), b.predict(x).unwrap());
            assert!((pa - (1.0 - pb)).abs() < 1e-6, "{pa} vs {pb}");
        }
    }

    #[test]
    fn seed_determines_parameters() {
        let data = toy(3);
        let a = train_classifier(&data, &cfg(), &mut seeded(4)).unwrap();
        let b = train_classifier(&data, &cfg(), &mut seeded(4)).unwrap();
        assert_eq!(a, b);
        let back = EditClassifier::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<_> = toy(4).into_iter().map(|(x, _)| (x, true)).collect();
        assert!(matches!(
            train_classifier(&data, &cfg(), &mut seeded(1)),
            Err(EditError::Argument(_))
        ));
    }
}
