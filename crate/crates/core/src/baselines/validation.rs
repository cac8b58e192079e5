//! k-fold cross-validation and the training-size sweep.

use super::features::{Sample, FEATURE_LEN};
use super::forest::{train_forest, ForestModel, ForestParams};
use super::mlp::{train_mlp, MlpModel, MlpParams};
use super::BaselineError;
use crate::metrics::evaluate;
use crate::model::BehaviourClass;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelSpec {
    Forest(ForestParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Mlp(_) => "mlp",
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::Forest(p) => ModelSpec::Forest(ForestParams { seed, ..p }),
            ModelSpec::Mlp(p) => ModelSpec::Mlp(MlpParams { seed, ..p }),
        }
    }

    pub fn train(&self, data: &[Sample]) -> Result<TrainedModel, BaselineError> {
        Ok(match self {
            ModelSpec::Forest(p) => TrainedModel::Forest(train_forest(data, p)?),
            ModelSpec::Mlp(p) => TrainedModel::Mlp(train_mlp(data, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64; FEATURE_LEN]) -> BehaviourClass {
        match self {
            TrainedModel::Forest(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        }
    }

    /// Weighted F1 of the predictions on `test`.
    pub fn score(&self, test: &[Sample]) -> f64 {
        let pairs: Vec<_> = test
            .iter()
            .map(|s| (self.predict(&s.features.values), s.label))
            .collect();
        evaluate(&pairs).weighted_f1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub per_fold: Vec<f64>,
    pub mean: f64,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle, then `k` contiguous folds; fold `i` covers shuffled
/// positions `[i·n/k, (i+1)·n/k)`.
pub fn cross_validate(data: &[Sample], k: usize, spec: &ModelSpec, seed: u64) -> Result<CvResult, BaselineError> {
    if k < 2 || data.len() < k {
        return Err(BaselineError::TooFewSamples {
            folds: k.max(2),
            got: data.len(),
        });
    }
    let n = data.len();
    let order = shuffled(n, seed);
    let per_fold = (0..k)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = (i * n / k, (i + 1) * n / k);
            let test: Vec<Sample> = order[lo..hi].iter().map(|&j| data[j]).collect();
            let train: Vec<Sample> = order[..lo].iter().chain(&order[hi..]).map(|&j| data[j]).collect();
            Ok(spec.train(&train)?.score(&test))
        })
        .collect::<Result<Vec<f64>, BaselineError>>()?;
    let mean = per_fold.iter().sum::<f64>() / k as f64;
    Ok(CvResult { per_fold, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub model: String,
    pub seed: u64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub fractions: Vec<f64>,
    /// Ordered by seed, then fraction, then model.
    pub rows: Vec<SweepRow>,
    pub rule_based_f1: f64,
}

impl SweepResult {
    /// Mean over seeds of one model's score at each fraction.
    pub fn mean_curve(&self, model: &str) -> Vec<f64> {
        self.fractions
            .iter()
            .map(|&f| {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.model == model && r.fraction == f)
                    .map(|r| r.weighted_f1)
                    .collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            })
            .collect()
    }
}

/// For each seed and fraction `f`: seeded shuffle, train on the first
/// `round(f·n)` samples, score on the rest. Rows come back in a fixed order
/// regardless of scheduling.
pub fn run_sweep(
    data: &[Sample],
    fractions: &[f64],
    specs: &[ModelSpec],
    rule_based_f1: f64,
    seeds: &[u64],
) -> Result<SweepResult, BaselineError> {
    if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) || fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BaselineError::InvalidParams(format!(
            "fractions must be strictly increasing within (0, 1): {fractions:?}"
        )));
    }
    let n = data.len();
    let jobs: Vec<(u64, f64, ModelSpec)> = seeds
        .iter()
        .flat_map(|&s| {
            fractions
                .iter()
                .flat_map(move |&f| specs.iter().map(move |m| (s, f, m.with_seed(s))))
        })
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(seed, fraction, spec)| {
            let order = shuffled(n, seed);
            let cut = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
            let train: Vec<Sample> = order[..cut].iter().map(|&j| data[j]).collect();
            let test: Vec<Sample> = order[cut..].iter().map(|&j| data[j]).collect();
            Ok(SweepRow {
                fraction,
                model: spec.name().to_string(),
                seed,
                weighted_f1: spec.train(&train)?.score(&test),
            })
        })
        .collect::<Result<Vec<_>, BaselineError>>()?;
    Ok(SweepResult {
        fractions: fractions.to_vec(),
        rows,
        rule_based_f1,
    })
}

/// `fraction,model,weighted_f1,seed`; the rule-based row comes last with
/// empty fraction and seed.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fraction", "model", "weighted_f1", "seed"])?;
    for r in &result.rows {
        out.write_record([
            r.fraction.to_string(),
            r.model.clone(),
            r.weighted_f1.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.write_record(["", "rule_based", &result.rule_based_f1.to_string(), ""])?;
    out.flush()?;
    Ok(())
}
