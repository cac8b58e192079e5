use super::AnnotationRecord;
use crate::model::{BehaviourClass, GazeDecision, PersonId};
use std::collections::BTreeMap;

/// Predicted/true pairs for every (frame, person) key present on both sides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    /// `(predicted, true)` in (frame, person) order.
    pub pairs: Vec<(BehaviourClass, BehaviourClass)>,
    /// Non-absent decisions with no annotation.
    pub unmatched_pred: usize,
    /// Annotations with no usable decision, including absent seats.
    pub unmatched_true: usize,
}

/// Pairs decisions with annotations from a single annotator. Absent
/// decisions never produce a pair.
pub fn align(decisions: &[GazeDecision], annotations: &[AnnotationRecord]) -> Alignment {
    let predicted: BTreeMap<(u64, PersonId), BehaviourClass> = decisions
        .iter()
        .filter_map(|d| d.behaviour().map(|b| ((d.frame_index, d.person), b)))
        .collect();
    let truth: BTreeMap<(u64, PersonId), BehaviourClass> = annotations
        .iter()
        .map(|a| ((a.frame_index, a.person), a.behaviour))
        .collect();

    let pairs: Vec<_> = truth
        .iter()
        .filter_map(|(k, t)| predicted.get(k).map(|p| (*p, *t)))
        .collect();
    Alignment {
        unmatched_pred: predicted.len() - pairs.len(),
        unmatched_true: truth.len() - pairs.len(),
        pairs,
    }
}
