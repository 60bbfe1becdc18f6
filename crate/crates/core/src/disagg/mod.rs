//! Event-based disaggregation of the aggregate signal.
//!
//! The pipeline is classic steady-state/edge NILM: split the series into
//! steady runs, turn each significant jump between adjacent runs into an
//! [`Edge`], match edges against declared appliance [`Signature`]s, then pair
//! ON/OFF events per appliance to reconstruct individual load curves.

mod edges;
mod segment;
mod signature;
mod stream;
mod tracking;

pub use edges::{extract_edges, Edge};
pub use segment::{segment_steady, SteadySegment};
pub use signature::{
    label_edges, DetectedEvent, Signature, SignatureError, SignatureTable, UNKNOWN_LABEL,
};
pub use stream::{StreamingDetector, STREAM_WINDOW};
pub use tracking::{track_states, ApplianceState, OnInterval, Tracking};

use crate::series::PowerSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Minimum samples in a steady segment (`m`).
    pub steady_window: usize,
    /// Max−min spread allowed inside a steady segment, W.
    pub steady_eps_w: f64,
    /// Smallest step reported as an edge, W.
    pub min_delta_w: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            steady_window: 3,
            steady_eps_w: 10.0,
            min_delta_w: 20.0,
        }
    }
}

/// Everything one batch run produces.
#[derive(Debug, Clone)]
pub struct Detection {
    pub segments: Vec<SteadySegment>,
    pub edges: Vec<Edge>,
    pub tracking: Tracking,
}

impl Detection {
    /// Labeled events after ON/OFF pairing (orphans demoted to unknown).
    pub fn events(&self) -> &[DetectedEvent] {
        &self.tracking.events
    }
}

#[derive(Debug, Clone)]
pub struct Detector {
    pub config: DetectorConfig,
    pub signatures: SignatureTable,
}

impl Detector {
    pub fn new(signatures: SignatureTable) -> Self {
        Self {
            config: DetectorConfig::default(),
            signatures,
        }
    }

    pub fn with_config(mut self, config: DetectorConfig) -> Self {
        self.config = config;
        self
    }

    pub fn run(&self, series: &PowerSeries) -> Detection {
        let c = &self.config;
        let segments = segment_steady(series, c.steady_window, c.steady_eps_w);
        let edges = extract_edges(&segments, series, c.min_delta_w);
        let labeled = label_edges(&edges, &self.signatures);
        let baseline = estimate_baseline(&segments, series);
        let tracking = track_states(&labeled, series, baseline);
        Detection {
            segments,
            edges,
            tracking,
        }
    }
}

/// Standby level: the lowest steady-segment mean, or the lowest sample if
/// nothing was steady.
pub fn estimate_baseline(segments: &[SteadySegment], series: &PowerSeries) -> f64 {
    segments
        .iter()
        .map(|s| s.mean_w)
        .reduce(f64::min)
        .or_else(|| series.watts.iter().copied().reduce(f64::min))
        .unwrap_or(0.0)
}
