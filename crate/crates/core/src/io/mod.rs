//! Wire formats: detection streams (JSON lines), annotation and decision
//! files (CSV), session configuration (TOML), and prediction/annotation
//! alignment.

mod align;
mod annotations;
mod config;
mod decisions;
mod detections;

pub use align::{align, Alignment};
pub use annotations::{annotator_ids, filter_annotator, parse_annotations, write_annotations, AnnotationRecord};
pub(crate) use config::point_array;
pub use config::{SessionConfig, TrackingGate};
pub use decisions::{parse_decisions, write_decisions};
pub use detections::{parse_detection_stream, write_detection_stream, DetectionStream, StreamMeta};

use crate::geometry::GeometryError;

/// Errors raised while reading any of the engine's input files. Line numbers
/// are 1-based and count header lines.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("order error on line {line}: frame {found} does not follow frame {previous}")]
    Order { line: usize, previous: u64, found: u64 },
    #[error("geometry error on line {line}: {source}")]
    Geometry {
        line: usize,
        #[source]
        source: GeometryError,
    },
    #[error("duplicate record on line {line}: {key}")]
    Duplicate { line: usize, key: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub(crate) fn schema(line: usize, message: impl Into<String>) -> Self {
        IngestError::Schema {
            line,
            message: message.into(),
        }
    }

    /// Line the error points at, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Schema { line, .. }
            | IngestError::Order { line, .. }
            | IngestError::Geometry { line, .. }
            | IngestError::Duplicate { line, .. } => Some(*line),
            IngestError::Config(_) | IngestError::Io(_) => None,
        }
    }
}

/// Shared CSV plumbing: reads a header-checked CSV into string records with
/// their line numbers.
pub(crate) fn read_csv_rows<R: std::io::Read>(
    reader: R,
    expected_header: &[&str],
) -> Result<Vec<(usize, csv::StringRecord)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e)),
    };
    // An empty file has no header row at all; treat it as zero records.
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected_header {
        return Err(IngestError::schema(
            1,
            format!(
                "expected header `{}`, found `{}`",
                expected_header.join(","),
                got.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::schema(line, format!("{other:?}")),
    }
}
