//! Seat initialization and per-frame identity tracking.
//!
//! Identities are seat-anchored: an initialization sample of frames showing
//! the whole group is clustered into one anchor per seat, anchors are
//! numbered clockwise around the table centre, and every frame's heads are
//! then matched to seats by minimum total distance.

use crate::assignment::min_cost_assignment;
use crate::geometry::{euclidean_distance, Point2D};
use crate::io::{DetectionStream, SessionConfig, TrackingGate};
use crate::model::{FrameRecord, PersonId};
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeatError {
    #[error("insufficient frames: {found} usable frames showing exactly {group_size} seated heads, need at least {group_size}")]
    InsufficientFrames { found: usize, group_size: usize },
    #[error("degenerate seat geometry: {0} and {1} lie at the same angle from the table centre")]
    DegenerateGeometry(PersonId, PersonId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seat {
    pub person: PersonId,
    pub anchor: Point2D,
}

/// Persistent identities anchored around the table centre.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatMap {
    seats: Vec<Seat>,
    table_center: Point2D,
    order_warnings: usize,
}

impl SeatMap {
    /// Builds a seat map from anchors, numbering them clockwise: Person1 is
    /// the anchor with the smallest angle in `[0, 2π)` measured in image
    /// coordinates.
    pub fn from_anchors(anchors: &[Point2D], table_center: Point2D) -> Result<Self, SeatError> {
        let mut sorted: Vec<Point2D> = anchors.to_vec();
        sorted.sort_by(|a, b| clockwise_cmp(a, b, &table_center));
        for (i, pair) in sorted.windows(2).enumerate() {
            if pair[0].angle_from(&table_center) == pair[1].angle_from(&table_center) {
                return Err(SeatError::DegenerateGeometry(
                    PersonId::from_index(i),
                    PersonId::from_index(i + 1),
                ));
            }
        }
        Ok(Self {
            seats: sorted
                .into_iter()
                .enumerate()
                .map(|(i, anchor)| Seat {
                    person: PersonId::from_index(i),
                    anchor,
                })
                .collect(),
            table_center,
            order_warnings: 0,
        })
    }

    pub fn seats(&self) -> &[Seat] {
        &self.seats
    }

    pub fn len(&self) -> usize {
        self.seats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seats.is_empty()
    }

    pub fn table_center(&self) -> Point2D {
        self.table_center
    }

    pub fn persons(&self) -> impl Iterator<Item = PersonId> + '_ {
        self.seats.iter().map(|s| s.person)
    }

    pub fn anchor(&self, person: PersonId) -> Option<Point2D> {
        self.seats.get(person.index()).map(|s| s.anchor)
    }

    /// Number of smoothing updates rejected because they would have broken
    /// the clockwise order.
    pub fn order_warnings(&self) -> usize {
        self.order_warnings
    }

    /// `person,anchor_x,anchor_y` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["person", "anchor_x", "anchor_y"])?;
        for s in &self.seats {
            wtr.write_record([s.person.label(), s.anchor.x.to_string(), s.anchor.y.to_string()])?;
        }
        wtr.flush()
    }
}

/// Clockwise order around `center`; equal angles fall back to distance.
fn clockwise_cmp(a: &Point2D, b: &Point2D, center: &Point2D) -> Ordering {
    a.angle_from(center)
        .total_cmp(&b.angle_from(center))
        .then_with(|| a.distance(center).total_cmp(&b.distance(center)))
}

/// True when `points`, read cyclically, visit the angles around `center` in
/// clockwise order (the sequence is a rotation of its sorted order).
fn is_cyclic_clockwise(points: &[Point2D], center: &Point2D) -> bool {
    let angles: Vec<f64> = points.iter().map(|p| p.angle_from(center)).collect();
    let n = angles.len();
    if n < 2 {
        return true;
    }
    let descents = (0..n).filter(|&i| angles[(i + 1) % n] <= angles[i]).count();
    descents == 1 && !has_duplicates(&angles)
}

fn has_duplicates(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}

/// Result of seat initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatInit {
    pub seat_map: SeatMap,
    /// Frame indices that made up the accepted sample.
    pub sample_frames: Vec<u64>,
    /// Median head-box diagonal over the accepted sample.
    pub median_head_diagonal: f64,
}

impl SeatInit {
    pub fn gate(&self, gate: TrackingGate) -> f64 {
        match gate {
            TrackingGate::Pixels(p) => p,
            TrackingGate::Auto => 1.5 * self.median_head_diagonal,
        }
    }
}

/// Heads of one frame that lie within the seating radius.
struct Candidate<'a> {
    frame: &'a FrameRecord,
    heads: Vec<usize>,
}

/// Establishes the seat map from up to `sample_count` frames that show
/// exactly `group_size` heads within `seat_distance_max` of the table
/// centre.
///
/// Frames are drawn evenly across the stream; a frame whose heads disagree
/// with the running seat order is discarded and the next candidate is tried,
/// up to `5 × sample_count` attempts.
pub fn initialize_seats(
    stream: &DetectionStream,
    cfg: &SessionConfig,
    sample_count: usize,
) -> Result<SeatInit, SeatError> {
    let n = cfg.group_size;
    let center = cfg.table_center;
    let qualifying: Vec<Candidate> = stream
        .frames
        .iter()
        .filter_map(|frame| {
            let heads: Vec<usize> = frame
                .heads
                .iter()
                .enumerate()
                .filter(|(_, h)| euclidean_distance(h.bbox.center(), center) <= cfg.seat_distance_max)
                .map(|(i, _)| i)
                .collect();
            (heads.len() == n).then_some(Candidate { frame, heads })
        })
        .collect();
    if qualifying.len() < n {
        return Err(SeatError::InsufficientFrames {
            found: qualifying.len(),
            group_size: n,
        });
    }

    let wanted = sample_count.max(1).min(qualifying.len());
    let max_attempts = 5 * sample_count.max(1);
    let mut clusters: Vec<(Point2D, usize)> = Vec::new(); // (sum, count)
    let mut accepted: Vec<&Candidate> = Vec::new();
    for (attempt, cand) in candidate_order(qualifying.len(), wanted)
        .map(|i| &qualifying[i])
        .enumerate()
    {
        if accepted.len() == wanted || attempt == max_attempts {
            break;
        }
        let centers: Vec<Point2D> = cand.heads.iter().map(|&h| cand.frame.heads[h].bbox.center()).collect();
        if clusters.is_empty() {
            let mut sorted = centers.clone();
            sorted.sort_by(|a, b| clockwise_cmp(a, b, &center));
            clusters = sorted.into_iter().map(|c| (c, 1)).collect();
            accepted.push(cand);
            continue;
        }
        let centroids: Vec<Point2D> = clusters
            .iter()
            .map(|(s, k)| Point2D::new(s.x / *k as f64, s.y / *k as f64))
            .collect();
        let cost: Vec<Vec<f64>> = centers
            .iter()
            .map(|c| centroids.iter().map(|m| euclidean_distance(*c, *m)).collect())
            .collect();
        let matching = min_cost_assignment(&cost);
        if !rotation_consistent(&centers, &matching, &centroids, &center) {
            continue;
        }
        for (h, cl) in matching.iter().enumerate() {
            let cl = cl.expect("square assignment matches every head");
            let (sum, k) = &mut clusters[cl];
            *sum = Point2D::new(sum.x + centers[h].x, sum.y + centers[h].y);
            *k += 1;
        }
        accepted.push(cand);
    }
    if accepted.len() < n {
        return Err(SeatError::InsufficientFrames {
            found: accepted.len(),
            group_size: n,
        });
    }

    let anchors: Vec<Point2D> = clusters
        .iter()
        .map(|(s, k)| Point2D::new(s.x / *k as f64, s.y / *k as f64))
        .collect();
    let seat_map = SeatMap::from_anchors(&anchors, center)?;
    let mut diagonals: Vec<f64> = accepted
        .iter()
        .flat_map(|c| c.heads.iter().map(|&h| c.frame.heads[h].bbox.diagonal()))
        .collect();
    Ok(SeatInit {
        seat_map,
        sample_frames: accepted.iter().map(|c| c.frame.frame_index).collect(),
        median_head_diagonal: median(&mut diagonals),
    })
}

/// `wanted` evenly spaced positions first, then every other position in
/// stream order as replacements.
fn candidate_order(len: usize, wanted: usize) -> impl Iterator<Item = usize> {
    let stride = len as f64 / wanted as f64;
    let primary: Vec<usize> = (0..wanted).map(|i| (i as f64 * stride) as usize).collect();
    let rest: Vec<usize> = (0..len).filter(|i| !primary.contains(i)).collect();
    primary.into_iter().chain(rest)
}

/// The heads, visited clockwise, must hit the clusters in the clusters' own
/// clockwise order up to a rotation.
fn rotation_consistent(heads: &[Point2D], matching: &[Option<usize>], centroids: &[Point2D], center: &Point2D) -> bool {
    let mut head_order: Vec<usize> = (0..heads.len()).collect();
    head_order.sort_by(|&a, &b| clockwise_cmp(&heads[a], &heads[b], center));
    let seq: Vec<usize> = head_order.iter().filter_map(|&h| matching[h]).collect();
    let mut cluster_order: Vec<usize> = (0..centroids.len()).collect();
    cluster_order.sort_by(|&a, &b| clockwise_cmp(&centroids[a], &centroids[b], center));
    if seq.len() != cluster_order.len() {
        return false;
    }
    let n = seq.len();
    (0..n).any(|shift| (0..n).all(|i| seq[i] == cluster_order[(i + shift) % n]))
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Identity assignment for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub frame_index: u64,
    /// Head index per seat, indexed by `PersonId::index()`; `None` is Absent.
    pub assignments: Vec<Option<usize>>,
    /// Center of the matched head per seat.
    pub centers: Vec<Option<Point2D>>,
    pub unmatched_heads: Vec<usize>,
}

impl TrackedFrame {
    pub fn head_for(&self, person: PersonId) -> Option<usize> {
        self.assignments.get(person.index()).copied().flatten()
    }

    pub fn person_for_head(&self, head: usize) -> Option<PersonId> {
        self.assignments
            .iter()
            .position(|a| *a == Some(head))
            .map(PersonId::from_index)
    }

    /// Matched persons in ordinal order with their head index.
    pub fn matched(&self) -> impl Iterator<Item = (PersonId, usize)> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|h| (PersonId::from_index(i), h)))
    }
}

/// Matches the frame's heads to seats by minimum total center distance.
///
/// Each seat's reference point is its head center from `previous` when it
/// was matched there, otherwise its anchor. Pairs farther apart than `gate`
/// are cut: the seat becomes Absent and the head unmatched.
pub fn track_frame(
    frame: &FrameRecord,
    seat_map: &SeatMap,
    previous: Option<&TrackedFrame>,
    gate: f64,
) -> TrackedFrame {
    let refs: Vec<Point2D> = seat_map
        .seats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            previous
                .and_then(|p| p.centers.get(i).copied().flatten())
                .unwrap_or(s.anchor)
        })
        .collect();
    let centers: Vec<Point2D> = frame.heads.iter().map(|h| h.bbox.center()).collect();
    let cost: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| centers.iter().map(|c| euclidean_distance(*r, *c)).collect())
        .collect();
    let mut assignments = min_cost_assignment(&cost);
    for (seat, slot) in assignments.iter_mut().enumerate() {
        if let Some(h) = *slot {
            if cost[seat][h] > gate {
                *slot = None;
            }
        }
    }
    let mut used = vec![false; centers.len()];
    for h in assignments.iter().flatten() {
        used[*h] = true;
    }
    TrackedFrame {
        frame_index: frame.frame_index,
        centers: assignments.iter().map(|a| a.map(|h| centers[h])).collect(),
        unmatched_heads: (0..centers.len()).filter(|h| !used[*h]).collect(),
        assignments,
    }
}

/// Exponentially smooths matched seat anchors toward their head centers.
/// If the update would break the cyclic clockwise order, anchors stay put
/// and the warning counter is bumped.
pub fn update_anchors(seat_map: &SeatMap, tracked: &TrackedFrame, alpha: f64) -> SeatMap {
    let mut next = seat_map.clone();
    for (seat, center) in next.seats.iter_mut().zip(&tracked.centers) {
        if let Some(c) = center {
            seat.anchor = Point2D::new(
                (1.0 - alpha) * seat.anchor.x + alpha * c.x,
                (1.0 - alpha) * seat.anchor.y + alpha * c.y,
            );
        }
    }
    let anchors: Vec<Point2D> = next.seats.iter().map(|s| s.anchor).collect();
    if is_cyclic_clockwise(&anchors, &next.table_center) {
        next
    } else {
        let mut frozen = seat_map.clone();
        frozen.order_warnings += 1;
        frozen
    }
}
