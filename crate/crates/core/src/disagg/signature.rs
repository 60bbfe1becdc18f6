use super::edges::Edge;
use crate::series::{Millis, Switch};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;
use tracing::warn;

pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("signature table is empty")]
    Empty,
    #[error("signature `{label}`: {reason}")]
    Invalid { label: String, reason: String },
    #[error("signature label `{0}` declared twice")]
    Duplicate(String),
    #[error("overlapping signature bands: {}", .0.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>().join(", "))]
    Overlap(Vec<(String, String)>),
    #[error("cannot read signatures: {0}")]
    Csv(#[from] csv::Error),
}

/// Nominal power step identifying one appliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub label: String,
    #[serde(rename = "nominal_w")]
    pub nominal_w: f64,
    #[serde(rename = "rel_tol")]
    pub rel_tolerance: f64,
    #[serde(rename = "abs_tol_w")]
    pub abs_tolerance_w: f64,
    pub expects_spike: bool,
}

impl Signature {
    pub fn new(label: impl Into<String>, nominal_w: f64) -> Self {
        Self {
            label: label.into(),
            nominal_w,
            rel_tolerance: 0.15,
            abs_tolerance_w: 15.0,
            expects_spike: false,
        }
    }

    pub fn with_spike(mut self) -> Self {
        self.expects_spike = true;
        self
    }

    pub fn with_tolerance(mut self, rel: f64, abs_w: f64) -> Self {
        self.rel_tolerance = rel;
        self.abs_tolerance_w = abs_w;
        self
    }

    /// Half-width of the acceptance band around `nominal_w`.
    pub fn tolerance_w(&self) -> f64 {
        (self.rel_tolerance * self.nominal_w).max(self.abs_tolerance_w)
    }

    fn band(&self) -> (f64, f64) {
        let tol = self.tolerance_w();
        (self.nominal_w - tol, self.nominal_w + tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureTable {
    signatures: Vec<Signature>,
}

impl SignatureTable {
    pub fn new(signatures: Vec<Signature>) -> Result<Self, SignatureError> {
        if signatures.is_empty() {
            return Err(SignatureError::Empty);
        }
        for (i, s) in signatures.iter().enumerate() {
            let invalid = |reason: &str| SignatureError::Invalid {
                label: s.label.clone(),
                reason: reason.into(),
            };
            if s.label.is_empty() || s.label == UNKNOWN_LABEL {
                return Err(invalid("label must be non-empty and not `unknown`"));
            }
            if !(s.nominal_w.is_finite() && s.nominal_w > 0.0) {
                return Err(invalid("nominal_w must be > 0"));
            }
            if !(s.rel_tolerance >= 0.0 && s.abs_tolerance_w >= 0.0) {
                return Err(invalid("tolerances must be >= 0"));
            }
            if signatures[..i].iter().any(|o| o.label == s.label) {
                return Err(SignatureError::Duplicate(s.label.clone()));
            }
        }
        Ok(Self { signatures })
    }

    /// Like [`SignatureTable::new`], but refuses tables whose bands overlap.
    pub fn new_strict(signatures: Vec<Signature>) -> Result<Self, SignatureError> {
        let table = Self::new(signatures)?;
        let collisions = table.collisions();
        if collisions.is_empty() {
            Ok(table)
        } else {
            Err(SignatureError::Overlap(collisions))
        }
    }

    /// Reads `label,nominal_w,rel_tol,abs_tol_w,expects_spike` CSV and logs a
    /// warning listing every pair of overlapping bands.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, SignatureError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let signatures = reader
            .deserialize()
            .collect::<Result<Vec<Signature>, _>>()?;
        let table = Self::new(signatures)?;
        let collisions = table.collisions();
        if !collisions.is_empty() {
            warn!(
                pairs = %collisions.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>().join(", "),
                "signature bands overlap; ties resolve to the nearest nominal"
            );
        }
        Ok(table)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), SignatureError> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.signatures {
            w.serialize(s)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn get(&self, label: &str) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.label == label)
    }

    /// Label pairs whose acceptance bands intersect.
    pub fn collisions(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.signatures.iter().enumerate() {
            for b in &self.signatures[i + 1..] {
                let ((alo, ahi), (blo, bhi)) = (a.band(), b.band());
                if alo <= bhi && blo <= ahi {
                    out.push((a.label.clone(), b.label.clone()));
                }
            }
        }
        out
    }

    /// Largest band half-width in the table.
    pub fn max_tolerance_w(&self) -> f64 {
        self.signatures
            .iter()
            .map(Signature::tolerance_w)
            .fold(0.0, f64::max)
    }
}

/// A labeled appliance switching event. Serializes as an events-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub t_ms: Millis,
    pub label: String,
    pub verb: Switch,
    pub delta_w: f64,
    pub confidence: f64,
}

impl DetectedEvent {
    pub fn is_unknown(&self) -> bool {
        self.label == UNKNOWN_LABEL
    }

    pub(crate) fn demote(&mut self) {
        self.label = UNKNOWN_LABEL.to_string();
        self.confidence = 0.0;
    }
}

/// Matches every edge to the signature with the nearest nominal step among
/// those whose band contains `|delta|`. Signatures expecting a turn-on spike
/// only accept ON edges whose transient peak exceeds the post-step level.
pub fn label_edges(edges: &[Edge], table: &SignatureTable) -> Vec<DetectedEvent> {
    edges
        .iter()
        .map(|edge| {
            let magnitude = edge.delta_w.abs();
            let verb = if edge.delta_w > 0.0 {
                Switch::On
            } else {
                Switch::Off
            };
            let best = table
                .signatures()
                .iter()
                .filter(|s| (magnitude - s.nominal_w).abs() <= s.tolerance_w())
                .filter(|s| {
                    !(s.expects_spike && verb == Switch::On)
                        || edge.transient_peak_w > edge.post_mean_w
                })
                .min_by(|a, b| {
                    let da = (magnitude - a.nominal_w).abs();
                    let db = (magnitude - b.nominal_w).abs();
                    da.total_cmp(&db)
                });
            let (label, confidence) = match best {
                Some(s) => {
                    let tol = s.tolerance_w();
                    let mismatch = (magnitude - s.nominal_w).abs();
                    let confidence = if tol > 0.0 {
                        (1.0 - mismatch / tol).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    (s.label.clone(), confidence)
                }
                None => (UNKNOWN_LABEL.to_string(), 0.0),
            };
            DetectedEvent {
                t_ms: edge.t_ms,
                label,
                verb,
                delta_w: edge.delta_w,
                confidence,
            }
        })
        .collect()
}
