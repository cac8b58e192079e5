//! Domain values shared by every stage: detections, identities, targets and
//! per-frame decisions.

use crate::geometry::{BoundingBox, Point2D};
use std::fmt;
use std::str::FromStr;

/// Number of body keypoints emitted by the pose model (COCO layout).
pub const KEYPOINT_COUNT: usize = 17;

/// 1-based seat index of a group member. The display label is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PersonId(u32);

impl PersonId {
    pub fn new(ordinal: u32) -> Option<Self> {
        (ordinal >= 1).then_some(Self(ordinal))
    }

    /// Person for a zero-based seat slot.
    pub fn from_index(index: usize) -> Self {
        Self(index as u32 + 1)
    }

    pub fn ordinal(&self) -> u32 {
        self.0
    }

    pub fn index(&self) -> usize {
        self.0 as usize - 1
    }

    pub fn label(&self) -> String {
        format!("Person{}", self.0)
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Person{}", self.0)
    }
}

impl FromStr for PersonId {
    type Err = String;

    /// Accepts either the label form (`Person3`) or a bare ordinal (`3`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let digits = s.strip_prefix("Person").unwrap_or(s);
        digits
            .parse::<u32>()
            .ok()
            .and_then(PersonId::new)
            .ok_or_else(|| format!("invalid person id {s:?}: expected PersonN or N with N >= 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    Laptop,
    Tablet,
    Phone,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::Laptop, ObjectClass::Tablet, ObjectClass::Phone];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Laptop => "laptop",
            ObjectClass::Tablet => "tablet",
            ObjectClass::Phone => "phone",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "laptop" => Ok(ObjectClass::Laptop),
            "tablet" => Ok(ObjectClass::Tablet),
            "phone" => Ok(ObjectClass::Phone),
            other => Err(format!(
                "unknown object class {other:?}: expected one of laptop, tablet, phone"
            )),
        }
    }
}

/// The three-way annotation taxonomy. Declaration order (S < L < O) is the
/// tie-break order used wherever classes compete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BehaviourClass {
    Student,
    Laptop,
    Other,
}

impl BehaviourClass {
    pub const ALL: [BehaviourClass; 3] = [BehaviourClass::Student, BehaviourClass::Laptop, BehaviourClass::Other];
    pub const COUNT: usize = 3;

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(&self) -> &'static str {
        match self {
            BehaviourClass::Student => "S",
            BehaviourClass::Laptop => "L",
            BehaviourClass::Other => "O",
        }
    }
}

impl fmt::Display for BehaviourClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for BehaviourClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "S" => Ok(BehaviourClass::Student),
            "L" => Ok(BehaviourClass::Laptop),
            "O" => Ok(BehaviourClass::Other),
            other => Err(format!("invalid behaviour {other:?}: allowed values are {{S,L,O}}")),
        }
    }
}

/// What a gaze point landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GazeTarget {
    Person(PersonId),
    /// Object class plus its index in the frame's object list.
    Object(ObjectClass, usize),
    Unassigned,
}

impl GazeTarget {
    pub fn kind(&self) -> &'static str {
        match self {
            GazeTarget::Person(_) => "person",
            GazeTarget::Object(..) => "object",
            GazeTarget::Unassigned => "unassigned",
        }
    }

    /// Detail column of the decision file: `Person2`, `laptop:0`, or empty.
    pub fn detail(&self) -> String {
        match self {
            GazeTarget::Person(p) => p.label(),
            GazeTarget::Object(cls, idx) => format!("{cls}:{idx}"),
            GazeTarget::Unassigned => String::new(),
        }
    }

    pub fn parse(kind: &str, detail: &str) -> Result<Self, String> {
        match kind {
            "person" => Ok(GazeTarget::Person(detail.parse()?)),
            "object" => {
                let (cls, idx) = detail
                    .split_once(':')
                    .ok_or_else(|| format!("object detail {detail:?} must be class:index"))?;
                let idx = idx
                    .parse::<usize>()
                    .map_err(|_| format!("object index {idx:?} is not a non-negative integer"))?;
                Ok(GazeTarget::Object(cls.parse()?, idx))
            }
            "unassigned" => Ok(GazeTarget::Unassigned),
            other => Err(format!(
                "unknown target kind {other:?}: expected person, object or unassigned"
            )),
        }
    }
}

impl fmt::Display for GazeTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GazeTarget::Unassigned => f.write_str("unassigned"),
            other => f.write_str(&other.detail()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub point: Point2D,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadDetection {
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub keypoints: Option<[Keypoint; KEYPOINT_COUNT]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDetection {
    pub class: ObjectClass,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeEstimate {
    /// Index into the frame's head list.
    pub head: usize,
    pub point: Point2D,
    /// Peak heatmap response.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("{what} confidence {value} outside [0, 1]")]
    Confidence { what: &'static str, value: f64 },
    #[error("gaze refers to head {head} but the frame has {heads} heads")]
    GazeHeadOutOfRange { head: usize, heads: usize },
    #[error("more than one gaze estimate for head {0}")]
    DuplicateGaze(usize),
    #[error("non-finite gaze point")]
    NonFiniteGaze,
    #[error("non-finite keypoint")]
    NonFiniteKeypoint,
    #[error("timestamp must be finite and non-negative, got {0}")]
    Timestamp(f64),
}

/// All detections for one sampled frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub heads: Vec<HeadDetection>,
    pub objects: Vec<ObjectDetection>,
    pub gazes: Vec<GazeEstimate>,
}

impl FrameRecord {
    pub fn validate(&self) -> Result<(), FrameError> {
        if !self.timestamp_s.is_finite() || self.timestamp_s < 0.0 {
            return Err(FrameError::Timestamp(self.timestamp_s));
        }
        for h in &self.heads {
            check_unit("head", h.confidence)?;
            if let Some(kps) = &h.keypoints {
                if kps.iter().any(|k| !k.point.is_finite()) {
                    return Err(FrameError::NonFiniteKeypoint);
                }
            }
        }
        for o in &self.objects {
            check_unit("object", o.confidence)?;
        }
        let mut seen = vec![false; self.heads.len()];
        for g in &self.gazes {
            check_unit("gaze", g.score)?;
            if !g.point.is_finite() {
                return Err(FrameError::NonFiniteGaze);
            }
            let slot = seen.get_mut(g.head).ok_or(FrameError::GazeHeadOutOfRange {
                head: g.head,
                heads: self.heads.len(),
            })?;
            if *slot {
                return Err(FrameError::DuplicateGaze(g.head));
            }
            *slot = true;
        }
        Ok(())
    }

    pub fn gaze_for_head(&self, head: usize) -> Option<&GazeEstimate> {
        self.gazes.iter().find(|g| g.head == head)
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<(), FrameError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(FrameError::Confidence { what, value })
    }
}

/// Either a judgment for a visible person or the marker that the seat had
/// no matched head this frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Absent,
    Seen {
        target: GazeTarget,
        behaviour: BehaviourClass,
    },
}

/// One (frame, person) judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GazeDecision {
    pub frame_index: u64,
    pub person: PersonId,
    pub observation: Observation,
}

impl GazeDecision {
    pub fn behaviour(&self) -> Option<BehaviourClass> {
        match self.observation {
            Observation::Seen { behaviour, .. } => Some(behaviour),
            Observation::Absent => None,
        }
    }

    pub fn target(&self) -> Option<GazeTarget> {
        match self.observation {
            Observation::Seen { target, .. } => Some(target),
            Observation::Absent => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self.observation, Observation::Absent)
    }
}
