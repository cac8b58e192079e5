use super::IngestError;
use crate::geometry::{BoundingBox, Point2D};
use crate::model::{FrameRecord, GazeEstimate, HeadDetection, Keypoint, ObjectDetection, KEYPOINT_COUNT};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Optional first line of a detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub session_id: String,
    pub fps_sampled: f64,
    /// Pseudo-random generator that produced a synthetic stream, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

impl Default for StreamMeta {
    fn default() -> Self {
        Self {
            session_id: String::new(),
            fps_sampled: 1.0,
            generator: None,
        }
    }
}

/// A validated, frame-ordered detection stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    pub meta: StreamMeta,
    pub frames: Vec<FrameRecord>,
}

impl DetectionStream {
    pub fn session_id(&self) -> &str {
        &self.meta.session_id
    }

    pub fn fps_sampled(&self) -> f64 {
        self.meta.fps_sampled
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    meta: StreamMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    frame: u64,
    t: f64,
    heads: Vec<HeadLine>,
    objects: Vec<ObjectLine>,
    gazes: Vec<GazeLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadLine {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    conf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kp: Option<Vec<(f64, f64, u8)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectLine {
    cls: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    conf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GazeLine {
    head: usize,
    point: [f64; 2],
    score: f64,
}

/// Parses a JSON-lines detection stream. Blank lines are skipped; a first
/// line of the form `{"meta": {...}}` sets the session metadata.
pub fn parse_detection_stream<R: BufRead>(reader: R) -> Result<DetectionStream, IngestError> {
    let mut stream = DetectionStream::default();
    let mut previous: Option<u64> = None;
    let mut seen_content = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if text.starts_with("{\"meta\"") {
                let header: HeaderLine =
                    serde_json::from_str(text).map_err(|e| IngestError::schema(line_no, e.to_string()))?;
                if !(header.meta.fps_sampled.is_finite() && header.meta.fps_sampled > 0.0) {
                    return Err(IngestError::schema(line_no, "fps_sampled must be > 0"));
                }
                stream.meta = header.meta;
                continue;
            }
        }
        let wire: FrameLine = serde_json::from_str(text).map_err(|e| IngestError::schema(line_no, e.to_string()))?;
        let frame = frame_from_wire(wire, line_no)?;
        if let Some(prev) = previous {
            if frame.frame_index <= prev {
                return Err(IngestError::Order {
                    line: line_no,
                    previous: prev,
                    found: frame.frame_index,
                });
            }
        }
        previous = Some(frame.frame_index);
        stream.frames.push(frame);
    }
    Ok(stream)
}

fn to_box(raw: [f64; 4], line: usize) -> Result<BoundingBox, IngestError> {
    BoundingBox::try_from(raw).map_err(|source| IngestError::Geometry { line, source })
}

fn frame_from_wire(wire: FrameLine, line: usize) -> Result<FrameRecord, IngestError> {
    let mut heads = Vec::with_capacity(wire.heads.len());
    for h in wire.heads {
        let keypoints = match h.kp {
            None => None,
            Some(kp) => {
                let kps: Vec<Keypoint> = kp
                    .into_iter()
                    .map(|(x, y, v)| Keypoint {
                        point: Point2D::new(x, y),
                        visible: v > 0,
                    })
                    .collect();
                let n = kps.len();
                let arr: [Keypoint; KEYPOINT_COUNT] = kps.try_into().map_err(|_| {
                    IngestError::schema(
                        line,
                        format!("keypoint list must have exactly {KEYPOINT_COUNT} entries, got {n}"),
                    )
                })?;
                Some(arr)
            }
        };
        heads.push(HeadDetection {
            bbox: to_box(h.bbox, line)?,
            confidence: h.conf,
            keypoints,
        });
    }
    let mut objects = Vec::with_capacity(wire.objects.len());
    for o in wire.objects {
        objects.push(ObjectDetection {
            class: o.cls.parse().map_err(|e: String| IngestError::schema(line, e))?,
            bbox: to_box(o.bbox, line)?,
            confidence: o.conf,
        });
    }
    let gazes = wire
        .gazes
        .into_iter()
        .map(|g| GazeEstimate {
            head: g.head,
            point: Point2D::new(g.point[0], g.point[1]),
            score: g.score,
        })
        .collect();
    let frame = FrameRecord {
        frame_index: wire.frame,
        timestamp_s: wire.t,
        heads,
        objects,
        gazes,
    };
    frame.validate().map_err(|e| IngestError::schema(line, e.to_string()))?;
    Ok(frame)
}

fn frame_to_wire(f: &FrameRecord) -> FrameLine {
    FrameLine {
        frame: f.frame_index,
        t: f.timestamp_s,
        heads: f
            .heads
            .iter()
            .map(|h| HeadLine {
                bbox: h.bbox.as_array(),
                conf: h.confidence,
                kp: h.keypoints.as_ref().map(|kps| {
                    kps.iter()
                        .map(|k| (k.point.x, k.point.y, u8::from(k.visible)))
                        .collect()
                }),
            })
            .collect(),
        objects: f
            .objects
            .iter()
            .map(|o| ObjectLine {
                cls: o.class.as_str().to_string(),
                bbox: o.bbox.as_array(),
                conf: o.confidence,
            })
            .collect(),
        gazes: f
            .gazes
            .iter()
            .map(|g| GazeLine {
                head: g.head,
                point: [g.point.x, g.point.y],
                score: g.score,
            })
            .collect(),
    }
}

/// Writes the canonical form: one metadata line, then one line per frame.
pub fn write_detection_stream<W: Write>(stream: &DetectionStream, mut w: W) -> std::io::Result<()> {
    let header = HeaderLine {
        meta: stream.meta.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for f in &stream.frames {
        serde_json::to_writer(&mut w, &frame_to_wire(f))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
