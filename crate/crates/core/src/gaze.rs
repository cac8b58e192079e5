//! Gaze point to target mapping and behaviour classification.
//!
//! A gaze point is matched against the head boxes of the other tracked
//! group members and every detected object box. Containment is tested on
//! closed boxes; when several boxes contain the point, the box whose centre
//! is nearest wins. Remaining exact ties go to persons (by ordinal) before
//! objects (by detection index).

use crate::geometry::{euclidean_distance, point_in_box, BoundingBox, Point2D};
use crate::model::{BehaviourClass, FrameRecord, GazeDecision, GazeTarget, ObjectClass, Observation, PersonId};
use crate::seating::TrackedFrame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GazeError {
    #[error("{0} is absent in frame {1}")]
    SubjectAbsent(PersonId, u64),
}

/// A box the gaze may land on. Never carries `GazeTarget::Unassigned`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTarget {
    pub target: GazeTarget,
    pub bbox: BoundingBox,
}

/// Candidates in tie-break order: tracked peers by ordinal (the subject
/// excluded), then objects by detection index. Untracked heads are skipped.
pub fn candidates(subject: PersonId, tracked: &TrackedFrame, frame: &FrameRecord) -> Vec<CandidateTarget> {
    let peers = tracked
        .matched()
        .filter(|(p, _)| *p != subject)
        .map(|(p, h)| CandidateTarget {
            target: GazeTarget::Person(p),
            bbox: frame.heads[h].bbox,
        });
    let objects = frame.objects.iter().enumerate().map(|(i, o)| CandidateTarget {
        target: GazeTarget::Object(o.class, i),
        bbox: o.bbox,
    });
    peers.chain(objects).collect()
}

/// Picks the containing candidate whose box centre is nearest `point`.
/// The first candidate wins exact ties.
pub fn select_target(point: Point2D, candidates: &[CandidateTarget]) -> GazeTarget {
    let mut best: Option<(f64, GazeTarget)> = None;
    for c in candidates.iter().filter(|c| point_in_box(point, &c.bbox)) {
        let d = euclidean_distance(point, c.bbox.center());
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c.target));
        }
    }
    best.map_or(GazeTarget::Unassigned, |(_, t)| t)
}

/// Maps `subject`'s gaze point to a peer, an object, or nothing.
pub fn assign_gaze(
    point: Point2D,
    subject: PersonId,
    tracked: &TrackedFrame,
    frame: &FrameRecord,
) -> Result<GazeTarget, GazeError> {
    if tracked.head_for(subject).is_none() {
        return Err(GazeError::SubjectAbsent(subject, frame.frame_index));
    }
    Ok(select_target(point, &candidates(subject, tracked, frame)))
}

/// How targets map onto the three behaviour classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BehaviourPolicy {
    /// Count tablets as laptops instead of "other".
    pub tablet_as_laptop: bool,
}

impl BehaviourPolicy {
    pub fn classify(&self, target: &GazeTarget) -> BehaviourClass {
        match target {
            GazeTarget::Person(_) => BehaviourClass::Student,
            GazeTarget::Object(ObjectClass::Laptop, _) => BehaviourClass::Laptop,
            GazeTarget::Object(ObjectClass::Tablet, _) if self.tablet_as_laptop => BehaviourClass::Laptop,
            GazeTarget::Object(..) | GazeTarget::Unassigned => BehaviourClass::Other,
        }
    }
}

/// Behaviour under the default policy (tablets are "other").
pub fn classify_behaviour(target: &GazeTarget) -> BehaviourClass {
    BehaviourPolicy::default().classify(target)
}

/// One decision per seat, in ordinal order. A tracked person without a gaze
/// estimate is Unassigned; an untracked seat is Absent.
pub fn decide_frame(frame: &FrameRecord, tracked: &TrackedFrame, policy: BehaviourPolicy) -> Vec<GazeDecision> {
    tracked
        .assignments
        .iter()
        .enumerate()
        .map(|(i, head)| {
            let person = PersonId::from_index(i);
            let observation = match head {
                None => Observation::Absent,
                Some(h) => {
                    let target = match frame.gaze_for_head(*h) {
                        Some(g) => select_target(g.point, &candidates(person, tracked, frame)),
                        None => GazeTarget::Unassigned,
                    };
                    Observation::Seen {
                        target,
                        behaviour: policy.classify(&target),
                    }
                }
            };
            GazeDecision {
                frame_index: frame.frame_index,
                person,
                observation,
            }
        })
        .collect()
}
