use super::{read_csv_rows, IngestError};
use crate::model::{BehaviourClass, PersonId};
use std::collections::HashSet;
use std::io::{Read, Write};

const HEADER: [&str; 4] = ["frame", "person", "behaviour", "annotator"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub frame_index: u64,
    pub person: PersonId,
    pub behaviour: BehaviourClass,
    pub annotator: String,
}

/// Reads `frame,person,behaviour,annotator` rows. A repeated
/// (frame, person, annotator) triple is rejected.
pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>, IngestError> {
    let rows = read_csv_rows(reader, &HEADER)?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let frame_index = rec[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| IngestError::schema(line, format!("frame {:?} is not an integer", &rec[0])))?;
        let person: PersonId = rec[1].parse().map_err(|e: String| IngestError::schema(line, e))?;
        let behaviour: BehaviourClass = rec[2].parse().map_err(|e: String| IngestError::schema(line, e))?;
        let annotator = rec[3].trim().to_string();
        if annotator.is_empty() {
            return Err(IngestError::schema(line, "annotator must not be empty"));
        }
        if !seen.insert((frame_index, person, annotator.clone())) {
            return Err(IngestError::Duplicate {
                line,
                key: format!("frame {frame_index}, {person}, annotator {annotator}"),
            });
        }
        out.push(AnnotationRecord {
            frame_index,
            person,
            behaviour,
            annotator,
        });
    }
    Ok(out)
}

pub fn write_annotations<W: Write>(records: &[AnnotationRecord], w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record([
            r.frame_index.to_string(),
            r.person.label(),
            r.behaviour.code().to_string(),
            r.annotator.clone(),
        ])?;
    }
    wtr.flush()
}

/// Annotator ids in order of first appearance.
pub fn annotator_ids(records: &[AnnotationRecord]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for r in records {
        if !ids.contains(&r.annotator) {
            ids.push(r.annotator.clone());
        }
    }
    ids
}

pub fn filter_annotator(records: &[AnnotationRecord], annotator: &str) -> Vec<AnnotationRecord> {
    records.iter().filter(|r| r.annotator == annotator).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let text = "frame,person,behaviour,annotator\n0,1,S,a\n0,2,L,a\n0,Person3,O,a\n";
        let recs = parse_annotations(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].person.ordinal(), 3);
        assert_eq!(recs[1].behaviour, BehaviourClass::Laptop);
    }

    #[test]
    fn duplicate_rejected() {
        let text = "frame,person,behaviour,annotator\n0,1,S,a\n0,1,L,a\n";
        match parse_annotations(text.as_bytes()) {
            Err(IngestError::Duplicate { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        // a second annotator on the same key is fine
        let ok = "frame,person,behaviour,annotator\n0,1,S,a\n0,1,L,b\n";
        assert_eq!(parse_annotations(ok.as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn bad_token_lists_allowed_values() {
        let text = "frame,person,behaviour,annotator\n0,1,X,a\n";
        match parse_annotations(text.as_bytes()) {
            Err(IngestError::Schema { line: 2, message }) => assert!(message.contains("{S,L,O}")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header() {
        let text = "frame,who,behaviour,annotator\n";
        assert!(matches!(
            parse_annotations(text.as_bytes()),
            Err(IngestError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn round_trip_and_filters() {
        let text = "frame,person,behaviour,annotator\n0,Person1,S,b\n0,Person1,L,a\n1,Person2,O,b\n";
        let recs = parse_annotations(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_annotations(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
        assert_eq!(annotator_ids(&recs), vec!["b".to_string(), "a".to_string()]);
        assert_eq!(filter_annotator(&recs, "b").len(), 2);
    }
}
