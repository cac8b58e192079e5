use super::{read_csv_rows, IngestError};
use crate::model::{GazeDecision, GazeTarget, Observation};
use std::collections::HashSet;
use std::io::{Read, Write};

const HEADER: [&str; 5] = ["frame", "person", "target_kind", "target_detail", "behaviour"];

pub fn write_decisions<W: Write>(decisions: &[GazeDecision], w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for d in decisions {
        let (kind, detail, behaviour) = match d.observation {
            Observation::Absent => ("absent", String::new(), ""),
            Observation::Seen { target, behaviour } => (target.kind(), target.detail(), behaviour.code()),
        };
        wtr.write_record([
            d.frame_index.to_string().as_str(),
            d.person.label().as_str(),
            kind,
            detail.as_str(),
            behaviour,
        ])?;
    }
    wtr.flush()
}

pub fn parse_decisions<R: Read>(reader: R) -> Result<Vec<GazeDecision>, IngestError> {
    let rows = read_csv_rows(reader, &HEADER)?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let frame_index = rec[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| IngestError::schema(line, format!("frame {:?} is not an integer", &rec[0])))?;
        let person = rec[1].parse().map_err(|e: String| IngestError::schema(line, e))?;
        let kind = rec[2].trim();
        let detail = rec[3].trim();
        let behaviour = rec[4].trim();
        let observation = if kind == "absent" {
            if !detail.is_empty() || !behaviour.is_empty() {
                return Err(IngestError::schema(
                    line,
                    "absent rows must leave target_detail and behaviour empty",
                ));
            }
            Observation::Absent
        } else {
            let target = GazeTarget::parse(kind, detail).map_err(|e| IngestError::schema(line, e))?;
            let behaviour = behaviour.parse().map_err(|e: String| IngestError::schema(line, e))?;
            Observation::Seen { target, behaviour }
        };
        if !seen.insert((frame_index, person)) {
            return Err(IngestError::Duplicate {
                line,
                key: format!("frame {frame_index}, {person}"),
            });
        }
        out.push(GazeDecision {
            frame_index,
            person,
            observation,
        });
    }
    Ok(out)
}
