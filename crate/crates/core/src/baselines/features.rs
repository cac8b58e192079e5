use crate::model::{BehaviourClass, HeadDetection, KEYPOINT_COUNT};

/// Two coordinates per keypoint.
pub const FEATURE_LEN: usize = 2 * KEYPOINT_COUNT;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("head detection carries no keypoints")]
    MissingKeypoints,
}

/// Keypoints relative to the head box: centred on the box centre and scaled
/// by its diagonal. Invisible points are encoded as (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_LEN],
    pub visible_keypoints: usize,
}

impl FeatureVector {
    /// No keypoint was visible; the vector is all zeros.
    pub fn is_blank(&self) -> bool {
        self.visible_keypoints == 0
    }
}

/// A feature vector with its training label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: BehaviourClass,
}

pub fn featurize(head: &HeadDetection) -> Result<FeatureVector, FeatureError> {
    let kps = head.keypoints.as_ref().ok_or(FeatureError::MissingKeypoints)?;
    let c = head.bbox.center();
    let s = head.bbox.diagonal();
    let mut values = [0.0; FEATURE_LEN];
    let mut visible = 0;
    for (i, k) in kps.iter().enumerate() {
        if k.visible {
            values[2 * i] = (k.point.x - c.x) / s;
            values[2 * i + 1] = (k.point.y - c.y) / s;
            visible += 1;
        }
    }
    Ok(FeatureVector {
        values,
        visible_keypoints: visible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundingBox, Point2D};
    use crate::model::Keypoint;
    use proptest::prelude::*;

    fn head_with(points: [(f64, f64, bool); KEYPOINT_COUNT], bbox: BoundingBox) -> HeadDetection {
        HeadDetection {
            bbox,
            confidence: 1.0,
            keypoints: Some(points.map(|(x, y, v)| Keypoint {
                point: Point2D::new(x, y),
                visible: v,
            })),
        }
    }

    #[test]
    fn center_keypoint_is_origin() {
        let b = BoundingBox::new(10.0, 10.0, 40.0, 50.0).unwrap();
        let c = b.center();
        let mut pts = [(0.0, 0.0, false); KEYPOINT_COUNT];
        pts[0] = (c.x, c.y, true);
        pts[1] = (c.x + 50.0, c.y, true);
        let f = featurize(&head_with(pts, b)).unwrap();
        assert_eq!((f.values[0], f.values[1]), (0.0, 0.0));
        assert_eq!(f.values[2], 1.0); // 50 / diagonal(30, 40)
        assert_eq!(f.visible_keypoints, 2);
    }

    #[test]
    fn all_invisible_is_blank() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let f = featurize(&head_with([(3.0, 4.0, false); KEYPOINT_COUNT], b)).unwrap();
        assert!(f.is_blank());
        assert!(f.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn missing_keypoints() {
        let h = HeadDetection {
            bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            confidence: 1.0,
            keypoints: None,
        };
        assert_eq!(featurize(&h), Err(FeatureError::MissingKeypoints));
    }

    proptest! {
        #[test]
        fn similarity_invariant(
            raw in prop::array::uniform17((0.0..200.0f64, 0.0..200.0f64, any::<bool>())),
            scale_pow in -2i32..4, dx in 0.0..500.0f64, dy in 0.0..500.0f64,
        ) {
            // power-of-two scales keep the arithmetic exact up to the shift
            let scale = 2f64.powi(scale_pow);
            let b = BoundingBox::new(50.0, 60.0, 110.0, 140.0).unwrap();
            let base = featurize(&head_with(raw, b)).unwrap();
            let moved_pts = raw.map(|(x, y, v)| (x * scale + dx, y * scale + dy, v));
            let mb = BoundingBox::new(50.0 * scale + dx, 60.0 * scale + dy, 110.0 * scale + dx, 140.0 * scale + dy).unwrap();
            let moved = featurize(&head_with(moved_pts, mb)).unwrap();
            for (a, b) in base.values.iter().zip(moved.values.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
