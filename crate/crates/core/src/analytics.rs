//! Session-level summaries: behaviour proportions per person, shared
//! attention episodes, and drops in peer-directed gaze.

use crate::model::{BehaviourClass, GazeDecision, GazeTarget, PersonId};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct PersonSummary {
    pub person: PersonId,
    /// Non-absent frames per class, S, L, O.
    pub counts: [u64; 3],
    pub absent: u64,
    /// `None` when the person was never seen.
    pub proportions: Option<[f64; 3]>,
}

impl PersonSummary {
    pub fn seen(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionSummary {
    pub persons: Vec<PersonSummary>,
    pub totals: [u64; 3],
    pub absent: u64,
    /// Distinct frames covered by the decisions.
    pub frames: u64,
}

fn proportions(counts: [u64; 3]) -> Option<[f64; 3]> {
    let n: u64 = counts.iter().sum();
    (n > 0).then(|| counts.map(|c| c as f64 / n as f64))
}

pub fn summarize(decisions: &[GazeDecision]) -> SessionSummary {
    let mut per: BTreeMap<PersonId, ([u64; 3], u64)> = BTreeMap::new();
    let mut frames = BTreeSet::new();
    for d in decisions {
        frames.insert(d.frame_index);
        let e = per.entry(d.person).or_default();
        match d.behaviour() {
            Some(b) => e.0[b.index()] += 1,
            None => e.1 += 1,
        }
    }
    let mut totals = [0; 3];
    let mut absent = 0;
    let persons = per
        .into_iter()
        .map(|(person, (counts, a))| {
            for c in 0..3 {
                totals[c] += counts[c];
            }
            absent += a;
            PersonSummary {
                person,
                counts,
                absent: a,
                proportions: proportions(counts),
            }
        })
        .collect();
    SessionSummary {
        persons,
        totals,
        absent,
        frames: frames.len() as u64,
    }
}

fn class_map<T: Into<Value> + Copy>(v: [T; 3]) -> Value {
    let mut m = serde_json::Map::new();
    for c in BehaviourClass::ALL {
        m.insert(c.code().to_string(), v[c.index()].into());
    }
    Value::Object(m)
}

impl SessionSummary {
    pub fn to_json(&self) -> Value {
        let persons: Vec<Value> = self
            .persons
            .iter()
            .map(|p| {
                json!({
                    "person": p.person.label(),
                    "counts": class_map(p.counts),
                    "absent": p.absent,
                    "proportions": p.proportions.map_or(Value::Null, class_map),
                    "undefined": p.proportions.is_none(),
                })
            })
            .collect();
        json!({
            "frames": self.frames,
            "persons": persons,
            "totals": {
                "counts": class_map(self.totals),
                "absent": self.absent,
                "proportions": proportions(self.totals).map_or(Value::Null, class_map),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JvaEpisode {
    /// Always an object target.
    pub target: GazeTarget,
    /// Sorted by ordinal.
    pub participants: Vec<PersonId>,
    pub start_frame: u64,
    pub end_frame: u64,
}

/// Maximal runs of consecutive frames (consecutive among the frames present
/// in `decisions`) in which at least `min_participants` persons look at the
/// same object instance. Runs shorter than `min_duration` frames are
/// dropped. Participants are everyone who looked at the object in a frame
/// of the run while the condition held. Episodes are ordered by start
/// frame, then target.
pub fn detect_jva(decisions: &[GazeDecision], min_participants: usize, min_duration: usize) -> Vec<JvaEpisode> {
    let frames: Vec<u64> = decisions
        .iter()
        .map(|d| d.frame_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let position: BTreeMap<u64, usize> = frames.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    // target -> frame position -> lookers
    let mut looks: BTreeMap<String, (GazeTarget, BTreeMap<usize, BTreeSet<PersonId>>)> = BTreeMap::new();
    for d in decisions {
        if let Some(t @ GazeTarget::Object(..)) = d.target() {
            looks
                .entry(t.detail())
                .or_insert_with(|| (t, BTreeMap::new()))
                .1
                .entry(position[&d.frame_index])
                .or_default()
                .insert(d.person);
        }
    }
    let mut out = Vec::new();
    for (target, by_frame) in looks.into_values() {
        let mut run: Option<(usize, usize, BTreeSet<PersonId>)> = None;
        let close = |run: Option<(usize, usize, BTreeSet<PersonId>)>, out: &mut Vec<JvaEpisode>| {
            if let Some((s, e, who)) = run {
                if e - s + 1 >= min_duration.max(1) {
                    out.push(JvaEpisode {
                        target,
                        participants: who.into_iter().collect(),
                        start_frame: frames[s],
                        end_frame: frames[e],
                    });
                }
            }
        };
        for (&pos, who) in &by_frame {
            if who.len() < min_participants.max(1) {
                continue;
            }
            run = match run {
                Some((s, e, mut all)) if e + 1 == pos => {
                    all.extend(who.iter().copied());
                    Some((s, pos, all))
                }
                other => {
                    close(other, &mut out);
                    Some((pos, pos, who.clone()))
                }
            };
        }
        close(run, &mut out);
    }
    out.sort_by_key(|e| (e.start_frame, e.target.detail()));
    out
}

/// Per-frame share of non-absent decisions that look at a peer, for frames
/// with at least one non-absent decision.
pub fn peer_gaze_rates(decisions: &[GazeDecision]) -> Vec<(u64, f64)> {
    let mut per: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for d in decisions {
        if let Some(b) = d.behaviour() {
            let e = per.entry(d.frame_index).or_default();
            e.1 += 1;
            if b == BehaviourClass::Student {
                e.0 += 1;
            }
        }
    }
    per.into_iter().map(|(f, (s, n))| (f, s as f64 / n as f64)).collect()
}

/// Frames where the mean peer-gaze rate of the trailing `window` frames
/// falls below `drop_ratio` times the session mean so far. Evaluation
/// starts once a full window is available; a window longer than the session
/// evaluates only the final frame.
pub fn peer_gaze_drop_alert(decisions: &[GazeDecision], window: usize, drop_ratio: f64) -> Vec<(u64, f64)> {
    let rates = peer_gaze_rates(decisions);
    let window = window.max(1);
    let mut alerts = Vec::new();
    let mut running = 0.0;
    let first = window.min(rates.len()).saturating_sub(1);
    for (i, (frame, rate)) in rates.iter().enumerate() {
        running += rate;
        if i < first {
            continue;
        }
        let lo = (i + 1).saturating_sub(window);
        let recent = rates[lo..=i].iter().map(|r| r.1).sum::<f64>() / (i + 1 - lo) as f64;
        let session = running / (i + 1) as f64;
        if recent < drop_ratio * session {
            alerts.push((*frame, recent));
        }
    }
    alerts
}

/// `target,participants,start,end`, participants joined by `;`.
pub fn write_jva_csv<W: Write>(episodes: &[JvaEpisode], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["target", "participants", "start", "end"])?;
    for e in episodes {
        let who: Vec<String> = e.participants.iter().map(PersonId::label).collect();
        out.write_record([
            e.target.detail(),
            who.join(";"),
            e.start_frame.to_string(),
            e.end_frame.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `frame,peer_gaze_rate`
pub fn write_alerts_csv<W: Write>(alerts: &[(u64, f64)], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["frame", "peer_gaze_rate"])?;
    for (f, r) in alerts {
        out.write_record([f.to_string(), r.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
