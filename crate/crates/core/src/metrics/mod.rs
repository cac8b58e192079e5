//! Classification metrics, inter-rater agreement and the Friedman test.

mod chi2;
mod friedman;
mod kappa;

pub use chi2::{chi_square_sf, ln_gamma, regularized_gamma_q};
pub use friedman::{friedman_test, rank_with_ties, FriedmanError, FriedmanResult};
pub use kappa::{cohens_kappa, KappaError, KappaResult};

use crate::model::BehaviourClass;
use serde::Serialize;
use serde_json::json;

const K: usize = BehaviourClass::COUNT;

/// Rows are the true class, columns the predicted class, both in
/// `BehaviourClass::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: &[(BehaviourClass, BehaviourClass)]) -> Self {
        let mut counts = [[0u64; K]; K];
        for (pred, truth) in pairs {
            counts[truth.index()][pred.index()] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    /// Expands the matrix back into `(predicted, true)` pairs, row by row.
    pub fn to_pairs(&self) -> Vec<(BehaviourClass, BehaviourClass)> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    out.push((BehaviourClass::ALL[p], BehaviourClass::ALL[t]));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Confusion matrix, per-class scores and support-weighted F1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    /// Indexed by `BehaviourClass::index()`.
    pub per_class: [ClassMetrics; K],
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// Cells whose value was a 0/0 and was reported as 0, e.g. `precision:O`.
    pub degenerate: Vec<String>,
    pub unmatched_pred: usize,
    pub unmatched_true: usize,
}

impl EvalReport {
    pub fn class(&self, c: BehaviourClass) -> &ClassMetrics {
        &self.per_class[c.index()]
    }

    pub fn with_unmatched(mut self, unmatched_pred: usize, unmatched_true: usize) -> Self {
        self.unmatched_pred = unmatched_pred;
        self.unmatched_true = unmatched_true;
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        let per_class: serde_json::Map<String, serde_json::Value> = BehaviourClass::ALL
            .iter()
            .map(|c| (c.code().to_string(), serde_json::to_value(self.class(*c)).unwrap()))
            .collect();
        json!({
            "matrix": self.matrix.counts,
            "classes": BehaviourClass::ALL.iter().map(|c| c.code()).collect::<Vec<_>>(),
            "per_class": per_class,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "degenerate": self.degenerate,
            "pairs": self.matrix.total(),
            "unmatched_pred": self.unmatched_pred,
            "unmatched_true": self.unmatched_true,
        })
    }
}

fn ratio(num: f64, den: f64, flag: impl FnOnce() -> String, degenerate: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        degenerate.push(flag());
        0.0
    } else {
        num / den
    }
}

/// Scores `(predicted, true)` pairs. Empty input yields an all-zero report
/// flagged as degenerate rather than an error.
pub fn evaluate(pairs: &[(BehaviourClass, BehaviourClass)]) -> EvalReport {
    report_from_matrix(ConfusionMatrix::from_pairs(pairs))
}

pub fn report_from_matrix(matrix: ConfusionMatrix) -> EvalReport {
    let m = &matrix.counts;
    let mut degenerate = Vec::new();
    let total = matrix.total();
    if total == 0 {
        degenerate.push("empty".to_string());
    }
    let mut per_class = [ClassMetrics::default(); K];
    for (c, cls) in BehaviourClass::ALL.iter().enumerate() {
        let tp = m[c][c] as f64;
        let predicted: u64 = (0..K).map(|r| m[r][c]).sum();
        let support: u64 = m[c].iter().sum();
        let precision = ratio(tp, predicted as f64, || format!("precision:{cls}"), &mut degenerate);
        let recall = ratio(tp, support as f64, || format!("recall:{cls}"), &mut degenerate);
        let f1 = ratio(
            2.0 * precision * recall,
            precision + recall,
            || format!("f1:{cls}"),
            &mut degenerate,
        );
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
            support,
        };
    }
    let weighted_f1 = weighted_f1(&per_class);
    let accuracy = if total == 0 {
        0.0
    } else {
        matrix.trace() as f64 / total as f64
    };
    EvalReport {
        matrix,
        per_class,
        weighted_f1,
        accuracy,
        degenerate,
        unmatched_pred: 0,
        unmatched_true: 0,
    }
}

/// Support-weighted mean of class F1 scores; 0 when there is no support.
pub fn weighted_f1(per_class: &[ClassMetrics]) -> f64 {
    let support: u64 = per_class.iter().map(|c| c.support).sum();
    if support == 0 {
        return 0.0;
    }
    per_class.iter().map(|c| c.support as f64 * c.f1).sum::<f64>() / support as f64
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
