//! The full per-session pass: seat initialisation, then tracking, anchor
//! smoothing and gaze decisions frame by frame.

use crate::baselines::{featurize, FeatureError, Sample};
use crate::gaze::{decide_frame, BehaviourPolicy};
use crate::io::{AnnotationRecord, DetectionStream, SessionConfig};
use crate::model::{GazeDecision, PersonId};
use crate::seating::{initialize_seats, track_frame, update_anchors, SeatError, SeatInit, SeatMap, TrackedFrame};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub init: SeatInit,
    /// Seat map after the last anchor update.
    pub final_seats: SeatMap,
    pub gate: f64,
    pub tracked: Vec<TrackedFrame>,
    /// Frame-major, one per seat.
    pub decisions: Vec<GazeDecision>,
}

pub fn run_pipeline(stream: &DetectionStream, cfg: &SessionConfig) -> Result<PipelineRun, SeatError> {
    let init = initialize_seats(stream, cfg, cfg.seat_init_sample_count)?;
    let gate = init.gate(cfg.tracking_gate);
    let policy = BehaviourPolicy {
        tablet_as_laptop: cfg.tablet_as_laptop,
    };
    let mut seats = init.seat_map.clone();
    let mut tracked: Vec<TrackedFrame> = Vec::with_capacity(stream.frames.len());
    let mut decisions = Vec::with_capacity(stream.frames.len() * seats.len());
    for frame in &stream.frames {
        let t = track_frame(frame, &seats, tracked.last(), gate);
        seats = update_anchors(&seats, &t, cfg.alpha);
        decisions.extend(decide_frame(frame, &t, policy));
        tracked.push(t);
    }
    Ok(PipelineRun {
        init,
        final_seats: seats,
        gate,
        tracked,
        decisions,
    })
}

/// Labelled keypoint features for every annotated (frame, person) whose
/// seat was tracked to a head. Output follows annotation order.
pub fn labelled_features(
    stream: &DetectionStream,
    run: &PipelineRun,
    annotations: &[AnnotationRecord],
) -> Result<Vec<Sample>, FeatureError> {
    let by_frame: BTreeMap<u64, usize> = stream
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| (f.frame_index, i))
        .collect();
    let mut out = Vec::with_capacity(annotations.len());
    for a in annotations {
        let Some(&i) = by_frame.get(&a.frame_index) else {
            continue;
        };
        let Some(h) = run.tracked[i].head_for(a.person) else {
            continue;
        };
        out.push(Sample {
            features: featurize(&stream.frames[i].heads[h])?,
            label: a.behaviour,
        });
    }
    Ok(out)
}

/// Persons covered by a run, in ordinal order.
pub fn persons(run: &PipelineRun) -> Vec<PersonId> {
    run.init.seat_map.persons().collect()
}
