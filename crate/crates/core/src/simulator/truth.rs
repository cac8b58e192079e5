use crate::geometry::{BoundingBox, Point2D};
use crate::model::{BehaviourClass, GazeTarget, PersonId};
use crate::seating::SeatMap;
use std::io::Write;

/// What one person really did in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub frame_index: u64,
    pub person: PersonId,
    pub behaviour: BehaviourClass,
    /// Object indices refer to the noiseless object list.
    pub target: GazeTarget,
    pub head_box: BoundingBox,
    pub gaze_point: Point2D,
    /// Position of this person's head in the frame's detections, if detected.
    pub detected_head: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub seat_map: SeatMap,
    /// Frame-major, then by person ordinal.
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn frame(&self, frame_index: u64) -> &[TruthRecord] {
        let n = self.seat_map.len();
        let start = frame_index as usize * n;
        self.records.get(start..start + n).unwrap_or(&[])
    }

    /// `frame,person,behaviour,target_kind,target_detail`
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["frame", "person", "behaviour", "target_kind", "target_detail"])?;
        for r in &self.records {
            out.write_record([
                r.frame_index.to_string(),
                r.person.label(),
                r.behaviour.code().to_string(),
                r.target.kind().to_string(),
                r.target.detail(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Count of true (frame, person) labels per class, in S, L, O order.
pub fn truth_behaviour_distribution(gt: &GroundTruth) -> [u64; 3] {
    let mut counts = [0; 3];
    for r in &gt.records {
        counts[r.behaviour.index()] += 1;
    }
    counts
}
