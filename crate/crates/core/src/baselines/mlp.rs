//! One-hidden-layer perceptron with a tanh hidden layer and softmax output,
//! trained by mini-batch gradient descent on mean cross-entropy.

use super::features::{Sample, FEATURE_LEN};
use super::BaselineError;
use crate::model::BehaviourClass;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const K: usize = BehaviourClass::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Weights are row-major: `w1[j * FEATURE_LEN + i]` feeds input `i` into
/// hidden unit `j`, `w2[c * hidden + j]` feeds hidden `j` into class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; K],
}

/// Same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; K],
}

impl MlpModel {
    /// Uniform(−r, r) initialisation with r = 1/√fan_in for each layer.
    pub fn initialize(params: MlpParams) -> Result<Self, BaselineError> {
        validate(&params)?;
        let h = params.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let r1 = 1.0 / (FEATURE_LEN as f64).sqrt();
        let r2 = 1.0 / (h as f64).sqrt();
        let w1 = (0..h * FEATURE_LEN).map(|_| rng.random_range(-r1..r1)).collect();
        let b1 = (0..h).map(|_| rng.random_range(-r1..r1)).collect();
        let w2 = (0..K * h).map(|_| rng.random_range(-r2..r2)).collect();
        let b2 = std::array::from_fn(|_| rng.random_range(-r2..r2));
        Ok(Self { params, w1, b1, w2, b2 })
    }

    fn hidden(&self, x: &[f64; FEATURE_LEN]) -> Vec<f64> {
        self.b1
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let row = &self.w1[j * FEATURE_LEN..(j + 1) * FEATURE_LEN];
                (b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> [f64; K] {
        let n = hidden.len();
        let logits: [f64; K] = std::array::from_fn(|c| {
            self.b2[c]
                + self.w2[c * n..(c + 1) * n]
                    .iter()
                    .zip(hidden)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        });
        softmax(logits)
    }

    pub fn probabilities(&self, x: &[f64; FEATURE_LEN]) -> [f64; K] {
        self.output(&self.hidden(x))
    }

    /// Argmax of the softmax; ties go to the earlier class.
    pub fn predict(&self, x: &[f64; FEATURE_LEN]) -> BehaviourClass {
        let p = self.probabilities(x);
        let mut best = 0;
        for c in 1..K {
            if p[c] > p[best] {
                best = c;
            }
        }
        BehaviourClass::ALL[best]
    }

    /// Mean cross-entropy over `batch` and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, batch: &[Sample]) -> (f64, Gradient) {
        let h = self.params.hidden;
        let mut g = Gradient {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; h],
            w2: vec![0.0; self.w2.len()],
            b2: [0.0; K],
        };
        if batch.is_empty() {
            return (0.0, g);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            let x = &s.features.values;
            let a = self.hidden(x);
            let p = self.output(&a);
            let y = s.label.index();
            loss -= p[y].max(f64::MIN_POSITIVE).ln() * scale;
            // dL/dlogit = p − onehot
            let mut delta = p;
            delta[y] -= 1.0;
            let mut back = vec![0.0; h];
            #[allow(clippy::needless_range_loop)]
            for c in 0..K {
                let d = delta[c] * scale;
                g.b2[c] += d;
                for j in 0..h {
                    g.w2[c * h + j] += d * a[j];
                    back[j] += delta[c] * self.w2[c * h + j];
                }
            }
            for j in 0..h {
                let dz = back[j] * (1.0 - a[j] * a[j]) * scale;
                g.b1[j] += dz;
                let row = &mut g.w1[j * FEATURE_LEN..(j + 1) * FEATURE_LEN];
                for (gw, v) in row.iter_mut().zip(x) {
                    *gw += dz * v;
                }
            }
        }
        (loss, g)
    }

    fn step(&mut self, g: &Gradient, lr: f64) {
        let pairs = [
            (&mut self.w1[..], &g.w1[..]),
            (&mut self.b1[..], &g.b1[..]),
            (&mut self.w2[..], &g.w2[..]),
            (&mut self.b2[..], &g.b2[..]),
        ];
        for (p, d) in pairs {
            for (w, dw) in p.iter_mut().zip(d) {
                *w -= lr * dw;
            }
        }
    }
}

fn softmax(logits: [f64; K]) -> [f64; K] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - m).exp());
    let total: f64 = e.iter().sum();
    e.map(|v| v / total)
}

fn validate(p: &MlpParams) -> Result<(), BaselineError> {
    if p.hidden == 0 || p.batch_size == 0 || !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
        return Err(BaselineError::InvalidParams(format!("{p:?}")));
    }
    Ok(())
}

/// Trains from a seeded initialisation; each epoch visits the samples in a
/// fresh seeded order.
pub fn train_mlp(data: &[Sample], params: &MlpParams) -> Result<MlpModel, BaselineError> {
    if data.is_empty() {
        return Err(BaselineError::InsufficientData { needed: 1, got: 0 });
    }
    let mut model = MlpModel::initialize(*params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(params.batch_size);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            let (_, g) = model.loss_and_gradient(&batch);
            model.step(&g, params.learning_rate);
        }
    }
    Ok(model)
}
