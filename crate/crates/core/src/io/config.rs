use super::IngestError;
use crate::geometry::Point2D;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum head-to-reference distance for a frame-to-frame identity match.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TrackingGate {
    /// 1.5 × the median head-box diagonal of the initialization sample.
    #[default]
    Auto,
    Pixels(f64),
}

impl Serialize for TrackingGate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TrackingGate::Auto => s.serialize_str("auto"),
            TrackingGate::Pixels(p) => s.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for TrackingGate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(TrackingGate::Pixels(p)),
            Raw::Text(s) if s == "auto" => Ok(TrackingGate::Auto),
            Raw::Text(s) => s
                .parse::<f64>()
                .map(TrackingGate::Pixels)
                .map_err(|_| serde::de::Error::custom(format!("tracking_gate {s:?}: expected pixels or \"auto\""))),
        }
    }
}

impl std::str::FromStr for TrackingGate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(TrackingGate::Auto);
        }
        s.parse::<f64>()
            .map(TrackingGate::Pixels)
            .map_err(|_| format!("gate {s:?}: expected pixels or \"auto\""))
    }
}

fn default_sample_count() -> usize {
    20
}

fn default_alpha() -> f64 {
    0.2
}

/// Flat key/value session settings, normally read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub group_size: usize,
    #[serde(with = "point_array")]
    pub table_center: Point2D,
    pub seat_distance_max: f64,
    #[serde(default = "default_sample_count")]
    pub seat_init_sample_count: usize,
    #[serde(default)]
    pub tracking_gate: TrackingGate,
    /// Anchor smoothing factor in (0, 1].
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tablet_as_laptop: bool,
}

impl SessionConfig {
    pub fn new(group_size: usize, table_center: Point2D, seat_distance_max: f64) -> Self {
        Self {
            group_size,
            table_center,
            seat_distance_max,
            seat_init_sample_count: default_sample_count(),
            tracking_gate: TrackingGate::Auto,
            alpha: default_alpha(),
            tablet_as_laptop: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let cfg: SessionConfig = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("session config always serializes")
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::Config(m));
        if !(2..=8).contains(&self.group_size) {
            return bad(format!("group_size {} outside [2, 8]", self.group_size));
        }
        if self.seat_init_sample_count < self.group_size {
            return bad(format!(
                "seat_init_sample_count {} must be >= group_size {}",
                self.seat_init_sample_count, self.group_size
            ));
        }
        if !self.table_center.is_finite() {
            return bad("table_center must be finite".into());
        }
        if !(self.seat_distance_max.is_finite() && self.seat_distance_max > 0.0) {
            return bad(format!("seat_distance_max {} must be > 0", self.seat_distance_max));
        }
        if let TrackingGate::Pixels(g) = self.tracking_gate {
            if !(g.is_finite() && g > 0.0) {
                return bad(format!("tracking_gate {g} must be > 0"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        Ok(())
    }
}

pub(crate) mod point_array {
    use crate::geometry::Point2D;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Point2D, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([p.x, p.y])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point2D, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Point2D::new(x, y))
    }
}
