//! Synthetic group sessions with known ground truth.
//!
//! Seats sit on a ring around the table centre. Each person's behaviour
//! follows a Markov chain over {S, L, O}; the true gaze point is drawn
//! uniformly inside the target's box (a random peer's head, the seat's
//! laptop, or for O either the seat's phone/tablet or a point looking away
//! from the table). Detections are the truth plus Gaussian jitter,
//! Bernoulli misses and Poisson spurious object boxes.
//!
//! Draw order. One ChaCha8 generator seeded with `seed` supplies two
//! streams. Stream 0 drives the truth: per frame, per seat in ordinal
//! order, one uniform for the behaviour transition (from the long-run
//! distribution on frame 0), then for S one peer index, and for O one
//! uniform choosing object-vs-away plus one object index when the seat has
//! several; then the point (two uniforms inside a box, or two per attempt
//! for an away point). Stream 1 drives the noise: per frame, per seat, a
//! head-miss uniform, four box-jitter normals, 34 keypoint normals, a
//! gaze-miss uniform and two gaze normals; then a Fisher-Yates shuffle of
//! the detected heads; per object a miss uniform and four jitter normals;
//! then the spurious count and, per spurious box, a class index and four
//! uniforms. Every noise draw is made even when its magnitude is zero, so
//! the truth never depends on the noise settings.

mod layout;
mod truth;

pub use layout::{build_layout, pose_keypoints, seat_angle, SceneLayout, SeatLayout};
pub use truth::{truth_behaviour_distribution, GroundTruth, TruthRecord};

use crate::geometry::{BoundingBox, Point2D};
use crate::io::{point_array, AnnotationRecord, DetectionStream, SessionConfig, StreamMeta};
use crate::model::{
    BehaviourClass, FrameRecord, GazeEstimate, GazeTarget, HeadDetection, Keypoint, ObjectClass, ObjectDetection,
    KEYPOINT_COUNT,
};
use crate::seating::SeatMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Recorded in the stream metadata of every generated session.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9), stream 0 truth, stream 1 noise";

/// Annotator id of generated annotations.
pub const ANNOTATOR: &str = "A1";

const AWAY_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("{0} overlaps {1}")]
    Overlap(String, String),
    #[error("scene does not fit inside the image")]
    OutOfImage,
    #[error("behaviour L is reachable but the scene has no laptop")]
    NoLaptop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeatObjects {
    #[serde(default = "yes")]
    pub laptop: bool,
    #[serde(default)]
    pub tablet: bool,
    #[serde(default)]
    pub phone: bool,
}

fn yes() -> bool {
    true
}

impl Default for SeatObjects {
    fn default() -> Self {
        Self {
            laptop: true,
            tablet: false,
            phone: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub group_size: usize,
    #[serde(with = "point_array")]
    pub table_center: Point2D,
    pub seat_radius: f64,
    pub head_size: f64,
    #[serde(default = "default_image_size")]
    pub image_size: [f64; 2],
    /// One entry per seat; empty means the default for every seat.
    #[serde(default)]
    pub seats: Vec<SeatObjects>,
    /// Row-stochastic transition matrix over (S, L, O).
    pub behaviour_markov: [[f64; 3]; 3],
    /// Chance that an O frame looks at the seat's phone or tablet rather
    /// than away from the table. Ignored for seats with neither.
    #[serde(default = "default_other_object_prob")]
    pub other_object_prob: f64,
    pub n_frames: usize,
    pub seed: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_image_size() -> [f64; 2] {
    [1920.0, 1080.0]
}

fn default_other_object_prob() -> f64 {
    0.5
}

fn default_fps() -> f64 {
    1.0
}

/// Class proportions S:L:O of the largest annotated dataset.
pub const REFERENCE_CLASS_COUNTS: [u64; 3] = [32448, 10606, 2392];

impl SceneSpec {
    /// A 1920×1080 scene with `group_size` seats of radius 350 px, 90 px
    /// heads, a laptop and a phone per seat, and [`reference_chain`] dynamics.
    pub fn ring(group_size: usize, n_frames: usize, seed: u64) -> Self {
        Self {
            group_size,
            table_center: Point2D::new(960.0, 540.0),
            seat_radius: 350.0,
            head_size: 90.0,
            image_size: default_image_size(),
            seats: vec![SeatObjects::default(); group_size],
            behaviour_markov: reference_chain(0.8),
            other_object_prob: default_other_object_prob(),
            n_frames,
            seed,
            fps: 1.0,
        }
    }

    pub fn seat_objects(&self, i: usize) -> SeatObjects {
        self.seats.get(i).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        if !(2..=8).contains(&self.group_size) {
            return bad(format!("group_size {} outside [2, 8]", self.group_size));
        }
        if !self.seats.is_empty() && self.seats.len() != self.group_size {
            return bad(format!(
                "{} seat entries for {} seats",
                self.seats.len(),
                self.group_size
            ));
        }
        for (name, v) in [
            ("seat_radius", self.seat_radius),
            ("head_size", self.head_size),
            ("fps", self.fps),
            ("image width", self.image_size[0]),
            ("image height", self.image_size[1]),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.table_center.is_finite() {
            return bad("table_center must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.other_object_prob) {
            return bad(format!("other_object_prob {} outside [0, 1]", self.other_object_prob));
        }
        for (i, row) in self.behaviour_markov.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("markov row {i} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return bad(format!("markov row {i} sums to {sum}"));
            }
        }
        Ok(())
    }

    /// Long-run state distribution, found by iterating the lazy chain
    /// (P + I)/2 from uniform. The lazy chain shares P's stationary
    /// distributions and is aperiodic, so this also settles for periodic
    /// chains; reducible chains land on the limit reached from uniform.
    pub fn long_run_distribution(&self) -> [f64; 3] {
        let p = &self.behaviour_markov;
        let mut state = [1.0 / 3.0; 3];
        for _ in 0..100_000 {
            let next: [f64; 3] =
                std::array::from_fn(|j| 0.5 * state[j] + 0.5 * (0..3).map(|i| state[i] * p[i][j]).sum::<f64>());
            let moved = (0..3).map(|j| (next[j] - state[j]).abs()).fold(0.0, f64::max);
            state = next;
            if moved < 1e-17 {
                break;
            }
        }
        state
    }

    /// Engine settings that match this scene.
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig::new(self.group_size, self.table_center, self.seat_radius + self.head_size)
    }
}

/// Chain with stationary distribution proportional to [`REFERENCE_CLASS_COUNTS`]:
/// stay with probability `persistence`, otherwise redraw from the target
/// distribution.
pub fn reference_chain(persistence: f64) -> [[f64; 3]; 3] {
    let total: u64 = REFERENCE_CLASS_COUNTS.iter().sum();
    let pi = REFERENCE_CLASS_COUNTS.map(|c| c as f64 / total as f64);
    chain_with_stationary(pi, persistence)
}

/// `λI + (1 − λ)·1πᵀ`, whose stationary distribution is `pi` for any λ < 1.
pub fn chain_with_stationary(pi: [f64; 3], persistence: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for j in 0..3 {
            row[j] = (1.0 - persistence) * pi[j] + if i == j { persistence } else { 0.0 };
        }
        // absorb rounding so each row sums to one within 1e-12
        let s: f64 = row.iter().sum();
        row[i] += 1.0 - s;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub box_jitter_sigma: f64,
    pub gaze_jitter_sigma: f64,
    pub head_miss_prob: f64,
    pub object_miss_prob: f64,
    pub gaze_miss_prob: f64,
    /// Expected spurious object boxes per frame.
    pub spurious_box_rate: f64,
    pub keypoint_noise_sigma: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        for (name, p) in [
            ("head_miss_prob", self.head_miss_prob),
            ("object_miss_prob", self.object_miss_prob),
            ("gaze_miss_prob", self.gaze_miss_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SpecError::Invalid(format!("{name} {p} outside [0, 1]")));
            }
        }
        for (name, s) in [
            ("box_jitter_sigma", self.box_jitter_sigma),
            ("gaze_jitter_sigma", self.gaze_jitter_sigma),
            ("spurious_box_rate", self.spurious_box_rate),
            ("keypoint_noise_sigma", self.keypoint_noise_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(SpecError::Invalid(format!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Scene plus noise, as read from a simulation config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub scene: SceneSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("simulation config always serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub stream: DetectionStream,
    pub truth: GroundTruth,
    pub annotations: Vec<AnnotationRecord>,
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &BoundingBox) -> Point2D {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Point2D::new(b.x_min() + u * b.width(), b.y_min() + v * b.height())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Shifts the box centre by (dx, dy) and grows it by (dw, dh), keeping the
/// corners exact when every offset is zero.
fn jitter_box(b: &BoundingBox, rng: &mut ChaCha8Rng, sigma: f64) -> BoundingBox {
    let (dx, dy) = (sigma * normal(rng), sigma * normal(rng));
    let (dw, dh) = (0.5 * sigma * normal(rng), 0.5 * sigma * normal(rng));
    let x0 = (b.x_min() + dx - dw / 2.0).max(0.0);
    let y0 = (b.y_min() + dy - dh / 2.0).max(0.0);
    let x1 = (b.x_max() + dx + dw / 2.0).max(x0 + 1.0);
    let y1 = (b.y_max() + dy + dh / 2.0).max(y0 + 1.0);
    BoundingBox::new(x0, y0, x1, y1).expect("clamped box is valid")
}

fn draw_class(rng: &mut ChaCha8Rng, probs: &[f64; 3]) -> BehaviourClass {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return BehaviourClass::ALL[i];
        }
    }
    // rounding left u above the cumulative sum; take the last possible class
    let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    BehaviourClass::ALL[last]
}

pub fn generate(scene: &SceneSpec, noise: &NoiseSpec) -> Result<Simulation, SpecError> {
    scene.validate()?;
    noise.validate()?;
    let layout = build_layout(scene)?;
    let start = scene.long_run_distribution();
    let laptop_reachable = start[1] > 0.0 || scene.behaviour_markov.iter().any(|r| r[1] > 0.0);
    if laptop_reachable && layout.seats.iter().any(|s| s.laptop.is_none()) {
        return Err(SpecError::NoLaptop);
    }
    let n = scene.group_size;
    let mut truth_rng = ChaCha8Rng::seed_from_u64(scene.seed);
    truth_rng.set_stream(0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(scene.seed);
    noise_rng.set_stream(1);
    let spurious =
        (noise.spurious_box_rate > 0.0).then(|| Poisson::new(noise.spurious_box_rate).expect("positive rate"));

    let anchors: Vec<Point2D> = layout.seats.iter().map(|s| s.head_center).collect();
    let seat_map =
        SeatMap::from_anchors(&anchors, scene.table_center).map_err(|e| SpecError::Invalid(e.to_string()))?;
    let mut state = vec![BehaviourClass::Student; n];
    let mut frames = Vec::with_capacity(scene.n_frames);
    let mut records = Vec::with_capacity(scene.n_frames * n);
    let mut annotations = Vec::with_capacity(scene.n_frames * n);

    for t in 0..scene.n_frames {
        let frame_index = t as u64;
        // truth
        let mut targets = Vec::with_capacity(n);
        for (i, seat) in layout.seats.iter().enumerate() {
            let probs = if t == 0 {
                start
            } else {
                scene.behaviour_markov[state[i].index()]
            };
            state[i] = draw_class(&mut truth_rng, &probs);
            let (target, point) = match state[i] {
                BehaviourClass::Student => {
                    let mut j = truth_rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    let peer = &layout.seats[j];
                    (GazeTarget::Person(peer.person), uniform_in(&mut truth_rng, &peer.head))
                }
                BehaviourClass::Laptop => {
                    let k = seat.laptop.expect("checked above");
                    (
                        GazeTarget::Object(ObjectClass::Laptop, k),
                        uniform_in(&mut truth_rng, &layout.objects[k].bbox),
                    )
                }
                BehaviourClass::Other => {
                    let u: f64 = truth_rng.random();
                    if !seat.others.is_empty() && u < scene.other_object_prob {
                        let k = if seat.others.len() > 1 {
                            seat.others[truth_rng.random_range(0..seat.others.len())]
                        } else {
                            seat.others[0]
                        };
                        let o = &layout.objects[k];
                        (GazeTarget::Object(o.class, k), uniform_in(&mut truth_rng, &o.bbox))
                    } else {
                        (
                            GazeTarget::Unassigned,
                            away_point(&mut truth_rng, seat, &layout, scene.head_size),
                        )
                    }
                }
            };
            targets.push((target, point));
        }

        // detections
        let mut heads = Vec::with_capacity(n);
        let mut gaze_points = Vec::with_capacity(n);
        for (i, seat) in layout.seats.iter().enumerate() {
            let missed = noise_rng.random::<f64>() < noise.head_miss_prob;
            let bbox = jitter_box(&seat.head, &mut noise_rng, noise.box_jitter_sigma);
            let truth_kps = pose_keypoints(
                seat.head_center,
                seat.inward,
                targets[i].1,
                scene.head_size,
                scene.seat_radius,
            );
            let kps: [Keypoint; KEYPOINT_COUNT] = truth_kps.map(|k| {
                let (ex, ey) = (normal(&mut noise_rng), normal(&mut noise_rng));
                if k.visible {
                    Keypoint {
                        point: Point2D::new(
                            k.point.x + noise.keypoint_noise_sigma * ex,
                            k.point.y + noise.keypoint_noise_sigma * ey,
                        ),
                        visible: true,
                    }
                } else {
                    k
                }
            });
            let gaze_missed = noise_rng.random::<f64>() < noise.gaze_miss_prob;
            let (gx, gy) = (normal(&mut noise_rng), normal(&mut noise_rng));
            if missed {
                continue;
            }
            heads.push((
                i,
                HeadDetection {
                    bbox,
                    confidence: 1.0,
                    keypoints: Some(kps),
                },
            ));
            let p = targets[i].1;
            gaze_points.push(
                (!gaze_missed)
                    .then(|| Point2D::new(p.x + noise.gaze_jitter_sigma * gx, p.y + noise.gaze_jitter_sigma * gy)),
            );
        }
        let mut order: Vec<usize> = (0..heads.len()).collect();
        order.shuffle(&mut noise_rng);
        // order[k] is the pre-shuffle slot placed at position k
        let mut detected_head = vec![None; n];
        let mut frame_heads = Vec::with_capacity(heads.len());
        let mut gazes = Vec::new();
        for (pos, &slot) in order.iter().enumerate() {
            let (seat, head) = &heads[slot];
            detected_head[*seat] = Some(pos);
            frame_heads.push(head.clone());
            if let Some(point) = gaze_points[slot] {
                gazes.push(GazeEstimate {
                    head: pos,
                    point,
                    score: 1.0,
                });
            }
        }
        let mut objects = Vec::with_capacity(layout.objects.len());
        for o in &layout.objects {
            let missed = noise_rng.random::<f64>() < noise.object_miss_prob;
            let bbox = jitter_box(&o.bbox, &mut noise_rng, noise.box_jitter_sigma);
            if !missed {
                objects.push(ObjectDetection { bbox, ..*o });
            }
        }
        let extra = spurious.map_or(0, |d| d.sample(&mut noise_rng) as usize);
        for _ in 0..extra {
            let class = [ObjectClass::Laptop, ObjectClass::Tablet, ObjectClass::Phone][noise_rng.random_range(0..3)];
            let cx = noise_rng.random::<f64>() * scene.image_size[0];
            let cy = noise_rng.random::<f64>() * scene.image_size[1];
            let w = scene.head_size * (0.5 + noise_rng.random::<f64>());
            let h = scene.head_size * (0.5 + noise_rng.random::<f64>());
            let x0 = (cx - w / 2.0).max(0.0);
            let y0 = (cy - h / 2.0).max(0.0);
            objects.push(ObjectDetection {
                class,
                bbox: BoundingBox::new(x0, y0, cx + w / 2.0, cy + h / 2.0).expect("positive size"),
                confidence: 0.5,
            });
        }

        for (i, seat) in layout.seats.iter().enumerate() {
            records.push(TruthRecord {
                frame_index,
                person: seat.person,
                behaviour: state[i],
                target: targets[i].0,
                head_box: seat.head,
                gaze_point: targets[i].1,
                detected_head: detected_head[i],
            });
            annotations.push(AnnotationRecord {
                frame_index,
                person: seat.person,
                behaviour: state[i],
                annotator: ANNOTATOR.to_string(),
            });
        }
        gazes.sort_by_key(|g| g.head);
        frames.push(FrameRecord {
            frame_index,
            timestamp_s: t as f64 / scene.fps,
            heads: frame_heads,
            objects,
            gazes,
        });
    }

    Ok(Simulation {
        stream: DetectionStream {
            meta: StreamMeta {
                session_id: format!("sim-{}", scene.seed),
                fps_sampled: scene.fps,
                generator: Some(GENERATOR.to_string()),
            },
            frames,
        },
        truth: GroundTruth { seat_map, records },
        annotations,
    })
}

/// A point beyond the seat, facing away from the table, that lies in no
/// scene box. Falls back to straight outward after repeated collisions.
fn away_point(rng: &mut ChaCha8Rng, seat: &SeatLayout, layout: &SceneLayout, head: f64) -> Point2D {
    let c = seat.head_center;
    let at = |angle: f64, dist: f64| Point2D::new(c.x + dist * angle.cos(), c.y + dist * angle.sin());
    for _ in 0..AWAY_ATTEMPTS {
        let angle = seat.angle + (rng.random::<f64>() - 0.5) * 120f64.to_radians();
        let dist = head * (0.8 + 0.8 * rng.random::<f64>());
        let p = at(angle, dist);
        if !layout.boxes().any(|b| b.contains(p)) {
            return p;
        }
    }
    at(seat.angle, 1.2 * head)
}
