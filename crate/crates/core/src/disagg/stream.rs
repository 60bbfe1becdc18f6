use super::edges::extract_edges;
use super::segment::segment_steady;
use super::signature::{label_edges, DetectedEvent};
use super::Detector;
use crate::series::{Millis, PowerSeries, Switch};
use std::collections::{HashMap, VecDeque};

/// Samples kept in the sliding tail window.
pub const STREAM_WINDOW: usize = 120;

/// Online wrapper around the batch detector: every new sample re-runs
/// segmentation over the last [`STREAM_WINDOW`] samples and emits edges
/// newer than anything emitted before, paired through a running ON/OFF map.
#[derive(Debug)]
pub struct StreamingDetector {
    detector: Detector,
    window: VecDeque<(Millis, f64)>,
    last_emitted: Option<Millis>,
    on: HashMap<String, bool>,
}

impl StreamingDetector {
    pub fn new(detector: Detector) -> Self {
        Self {
            detector,
            window: VecDeque::with_capacity(STREAM_WINDOW + 1),
            last_emitted: None,
            on: HashMap::new(),
        }
    }

    pub fn push(&mut self, t_ms: Millis, watts: f64) -> Vec<DetectedEvent> {
        self.window.push_back((t_ms, watts));
        if self.window.len() > STREAM_WINDOW {
            self.window.pop_front();
        }
        let series = PowerSeries::new(
            self.window.iter().map(|s| s.0).collect(),
            self.window.iter().map(|s| s.1).collect(),
        );
        let c = &self.detector.config;
        let segments = segment_steady(&series, c.steady_window, c.steady_eps_w);
        let edges: Vec<_> = extract_edges(&segments, &series, c.min_delta_w)
            .into_iter()
            .filter(|e| self.last_emitted.is_none_or(|last| e.t_ms > last))
            .collect();
        let mut events = label_edges(&edges, &self.detector.signatures);
        for ev in events.iter_mut() {
            self.last_emitted = Some(ev.t_ms);
            if ev.is_unknown() {
                continue;
            }
            let on = self.on.entry(ev.label.clone()).or_insert(false);
            match (ev.verb, *on) {
                (Switch::On, false) => *on = true,
                (Switch::Off, true) => *on = false,
                _ => ev.demote(),
            }
        }
        events
    }

    pub fn is_on(&self, label: &str) -> bool {
        self.on.get(label).copied().unwrap_or(false)
    }
}
