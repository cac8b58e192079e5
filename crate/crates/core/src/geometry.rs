//! Planar geometry in image pixel coordinates.
//!
//! The image frame has its origin at the top-left corner with `y` growing
//! downward, which is the convention every detector in the pipeline emits.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A point in image pixel coordinates. Sub-pixel values are allowed because
/// heatmap peaks are not quantized.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        euclidean_distance(*self, *other)
    }

    /// Angle of `self` seen from `origin`, in `[0, 2π)`.
    ///
    /// Because `y` points down, increasing angle sweeps clockwise on screen.
    pub fn angle_from(&self, origin: &Point2D) -> f64 {
        let theta = (self.y - origin.y).atan2(self.x - origin.x);
        if theta < 0.0 {
            theta + std::f64::consts::TAU
        } else {
            theta
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite and non-negative: {0:?}")]
    NonFinite([f64; 4]),
    #[error("degenerate box {0:?}: need x_min < x_max and y_min < y_max")]
    Degenerate([f64; 4]),
}

/// Axis-aligned box. Construct through [`BoundingBox::new`] so the
/// ordering and finiteness invariants always hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let raw = [x_min, y_min, x_max, y_max];
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GeometryError::NonFinite(raw));
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(GeometryError::Degenerate(raw));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box of the given size centred on `center`.
    pub fn centered(center: Point2D, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point2D {
        box_center(self)
    }

    pub fn contains(&self, p: Point2D) -> bool {
        point_in_box(p, self)
    }

    /// True when the closed boxes share at least one point.
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_max && other.x_min <= self.x_max && self.y_min <= other.y_max && other.y_min <= self.y_max
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.as_array()
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(d)?;
        BoundingBox::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x_min, self.y_min, self.x_max, self.y_max)
    }
}

/// Closed-boundary containment: a point on the edge is inside.
pub fn point_in_box(p: Point2D, b: &BoundingBox) -> bool {
    b.x_min <= p.x && p.x <= b.x_max && b.y_min <= p.y && p.y <= b.y_max
}

pub fn box_center(b: &BoundingBox) -> Point2D {
    Point2D::new((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)
}

pub fn euclidean_distance(a: Point2D, b: Point2D) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> BoundingBox {
        BoundingBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn containment_examples() {
        let b = bx(0.0, 0.0, 10.0, 10.0);
        assert!(point_in_box(Point2D::new(5.0, 5.0), &b));
        assert!(point_in_box(Point2D::new(10.0, 10.0), &b));
        assert!(!point_in_box(Point2D::new(10.01, 5.0), &b));
    }

    #[test]
    fn center_examples() {
        assert_eq!(box_center(&bx(0.0, 0.0, 10.0, 10.0)), Point2D::new(5.0, 5.0));
        assert_eq!(box_center(&bx(2.0, 4.0, 6.0, 8.0)), Point2D::new(4.0, 6.0));
        assert_eq!(box_center(&bx(0.0, 0.0, 1.0, 3.0)), Point2D::new(0.5, 1.5));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(Point2D::new(0.0, 0.0), Point2D::new(3.0, 4.0)), 5.0);
        assert_eq!(euclidean_distance(Point2D::new(1.0, 1.0), Point2D::new(1.0, 1.0)), 0.0);
        assert_eq!(euclidean_distance(Point2D::new(-1.0, 0.0), Point2D::new(1.0, 0.0)), 2.0);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(matches!(
            BoundingBox::new(5.0, 0.0, 1.0, 1.0),
            Err(GeometryError::Degenerate(_))
        ));
        assert!(matches!(
            BoundingBox::new(1.0, 1.0, 1.0, 2.0),
            Err(GeometryError::Degenerate(_))
        ));
        assert!(matches!(
            BoundingBox::new(-1.0, 0.0, 1.0, 1.0),
            Err(GeometryError::NonFinite(_))
        ));
        assert!(matches!(
            BoundingBox::new(0.0, 0.0, f64::NAN, 1.0),
            Err(GeometryError::NonFinite(_))
        ));
    }

    #[test]
    fn angles_sweep_clockwise_on_screen() {
        let c = Point2D::new(0.0, 0.0);
        // east, south (screen-down), west, north
        let e = Point2D::new(1.0, 0.0).angle_from(&c);
        let s = Point2D::new(0.0, 1.0).angle_from(&c);
        let w = Point2D::new(-1.0, 0.0).angle_from(&c);
        let n = Point2D::new(0.0, -1.0).angle_from(&c);
        assert!(e < s && s < w && w < n);
        assert!(n < std::f64::consts::TAU);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0..500.0f64, 0.0..500.0f64, 0.1..200.0f64, 0.1..200.0f64).prop_map(|(x, y, w, h)| bx(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn containment_monotone_under_expansion(
            b in arb_box(),
            px in 0.0..800.0f64, py in 0.0..800.0f64,
            grow in (0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64),
        ) {
            let big = bx(
                (b.x_min() - grow.0).max(0.0),
                (b.y_min() - grow.1).max(0.0),
                b.x_max() + grow.2,
                b.y_max() + grow.3,
            );
            let p = Point2D::new(px, py);
            if point_in_box(p, &b) {
                prop_assert!(point_in_box(p, &big));
            }
        }

        #[test]
        fn center_is_inside(b in arb_box()) {
            prop_assert!(point_in_box(box_center(&b), &b));
        }

        #[test]
        fn distance_is_a_metric(
            a in (-1e3..1e3f64, -1e3..1e3f64),
            b in (-1e3..1e3f64, -1e3..1e3f64),
            c in (-1e3..1e3f64, -1e3..1e3f64),
        ) {
            let (a, b, c) = (Point2D::new(a.0, a.1), Point2D::new(b.0, b.1), Point2D::new(c.0, c.1));
            let ab = euclidean_distance(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, euclidean_distance(b, a));
            prop_assert!(euclidean_distance(a, c) <= ab + euclidean_distance(b, c) + 1e-9);
        }
    }
}
