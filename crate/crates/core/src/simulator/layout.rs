//! Scene geometry: where seats, heads and objects sit, and the pose
//! keypoints a head shows for a given gaze point.

use super::{SceneSpec, SpecError};
use crate::geometry::{BoundingBox, Point2D};
use crate::model::{Keypoint, ObjectClass, ObjectDetection, PersonId, KEYPOINT_COUNT};
use std::f64::consts::PI;

// Object placement relative to the seat, in units of seat_radius, with the
// bearing measured from the inward direction.
const LAPTOP_DISTANCE: f64 = 0.42;
const TABLET_DISTANCE: f64 = 0.36;
const TABLET_BEARING: f64 = 55.0;
const PHONE_DISTANCE: f64 = 0.30;
const PHONE_BEARING: f64 = -75.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SeatLayout {
    pub person: PersonId,
    pub head_center: Point2D,
    pub head: BoundingBox,
    /// Unit vector from the seat towards the table centre.
    pub inward: (f64, f64),
    /// Outward bearing of the seat in radians.
    pub angle: f64,
    /// Laptop this seat works on (its own, or the nearest one).
    pub laptop: Option<usize>,
    /// The seat's phone and tablet, as object indices.
    pub others: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub seats: Vec<SeatLayout>,
    pub objects: Vec<ObjectDetection>,
}

fn rotate((x, y): (f64, f64), degrees: f64) -> (f64, f64) {
    let (s, c) = degrees.to_radians().sin_cos();
    (x * c - y * s, x * s + y * c)
}

/// Seat `i` of `n` sits at angle π/n + 2πi/n, so the seat with the smallest
/// clockwise angle is `Person1` and no seat starts on the 0/2π seam.
pub fn seat_angle(i: usize, n: usize) -> f64 {
    PI / n as f64 + 2.0 * PI * i as f64 / n as f64
}

pub fn build_layout(scene: &SceneSpec) -> Result<SceneLayout, SpecError> {
    let n = scene.group_size;
    let c = scene.table_center;
    let r = scene.seat_radius;
    let h = scene.head_size;
    let mut seats = Vec::with_capacity(n);
    let mut objects = Vec::new();
    let place = |from: Point2D, dir: (f64, f64), dist: f64, w: f64, hgt: f64| {
        BoundingBox::centered(Point2D::new(from.x + dir.0 * dist, from.y + dir.1 * dist), w, hgt)
            .map_err(|_| SpecError::OutOfImage)
    };
    for i in 0..n {
        let angle = seat_angle(i, n);
        let (s, co) = angle.sin_cos();
        let head_center = Point2D::new(c.x + r * co, c.y + r * s);
        let head = BoundingBox::centered(head_center, h, h).map_err(|_| SpecError::OutOfImage)?;
        let inward = (-co, -s);
        let layout = scene.seat_objects(i);
        let laptop = if layout.laptop {
            objects.push(ObjectDetection {
                class: ObjectClass::Laptop,
                bbox: place(head_center, inward, LAPTOP_DISTANCE * r, 1.4 * h, h)?,
                confidence: 1.0,
            });
            Some(objects.len() - 1)
        } else {
            None
        };
        let mut others = Vec::new();
        if layout.tablet {
            objects.push(ObjectDetection {
                class: ObjectClass::Tablet,
                bbox: place(
                    head_center,
                    rotate(inward, TABLET_BEARING),
                    TABLET_DISTANCE * r,
                    0.9 * h,
                    0.7 * h,
                )?,
                confidence: 1.0,
            });
            others.push(objects.len() - 1);
        }
        if layout.phone {
            objects.push(ObjectDetection {
                class: ObjectClass::Phone,
                bbox: place(
                    head_center,
                    rotate(inward, PHONE_BEARING),
                    PHONE_DISTANCE * r,
                    0.45 * h,
                    0.6 * h,
                )?,
                confidence: 1.0,
            });
            others.push(objects.len() - 1);
        }
        seats.push(SeatLayout {
            person: PersonId::from_index(i),
            head_center,
            head,
            inward,
            angle,
            laptop,
            others,
        });
    }
    // seats without a laptop share the nearest one
    for seat in seats.iter_mut() {
        if seat.laptop.is_none() {
            let from = seat.head_center;
            seat.laptop = objects
                .iter()
                .enumerate()
                .filter(|(_, o)| o.class == ObjectClass::Laptop)
                .min_by(|a, b| {
                    from.distance(&a.1.bbox.center())
                        .total_cmp(&from.distance(&b.1.bbox.center()))
                })
                .map(|(k, _)| k);
        }
    }
    let layout = SceneLayout { seats, objects };
    layout.check(scene)?;
    Ok(layout)
}

impl SceneLayout {
    pub fn boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.seats
            .iter()
            .map(|s| &s.head)
            .chain(self.objects.iter().map(|o| &o.bbox))
    }

    fn check(&self, scene: &SceneSpec) -> Result<(), SpecError> {
        let all: Vec<&BoundingBox> = self.boxes().collect();
        for b in &all {
            if b.x_max() > scene.image_size[0] || b.y_max() > scene.image_size[1] {
                return Err(SpecError::OutOfImage);
            }
        }
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if all[i].intersects(all[j]) {
                    return Err(SpecError::Overlap(describe(self, i), describe(self, j)));
                }
            }
        }
        Ok(())
    }
}

fn describe(layout: &SceneLayout, k: usize) -> String {
    match k.checked_sub(layout.seats.len()) {
        None => format!("head of {}", layout.seats[k].person),
        Some(o) => format!("{} {o}", layout.objects[o].class),
    }
}

/// Seventeen body points in the usual order (nose, eyes, ears, shoulders,
/// elbows, wrists, hips, knees, ankles). The face turns towards the gaze
/// point and reaches further for distant targets; the arms point at the
/// table; the lower body is hidden behind it.
pub fn pose_keypoints(
    head_center: Point2D,
    inward: (f64, f64),
    gaze: Point2D,
    head_size: f64,
    seat_radius: f64,
) -> [Keypoint; KEYPOINT_COUNT] {
    let (dx, dy) = (gaze.x - head_center.x, gaze.y - head_center.y);
    let d = dx.hypot(dy);
    let g = if d > 0.0 { (dx / d, dy / d) } else { inward };
    let reach = head_size * (0.2 + 0.25 * (d / (2.0 * seat_radius)).min(1.0));
    let at = |dir: (f64, f64), along: f64, side: f64| {
        // side is measured along the clockwise perpendicular
        let perp = (-dir.1, dir.0);
        Keypoint {
            point: Point2D::new(
                head_center.x + along * dir.0 + side * perp.0,
                head_center.y + along * dir.1 + side * perp.1,
            ),
            visible: true,
        }
    };
    let hidden = Keypoint {
        point: head_center,
        visible: false,
    };
    let h = head_size;
    [
        at(g, reach, 0.0),
        at(g, 0.6 * reach, -0.12 * h),
        at(g, 0.6 * reach, 0.12 * h),
        at(g, -0.1 * h, -0.3 * h),
        at(g, -0.1 * h, 0.3 * h),
        at(inward, 0.1 * h, -0.55 * h),
        at(inward, 0.1 * h, 0.55 * h),
        at(inward, 0.5 * h, -0.7 * h),
        at(inward, 0.5 * h, 0.7 * h),
        at(inward, 0.9 * h, -0.4 * h),
        at(inward, 0.9 * h, 0.4 * h),
        hidden,
        hidden,
        hidden,
        hidden,
        hidden,
        hidden,
    ]
}
