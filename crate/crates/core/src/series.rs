//! Time-series types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Simulated-domain timestamp in milliseconds since scenario start.
pub type Millis = i64;

/// ON/OFF verb used by ground truth, detected events and state tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Switch {
    #[serde(rename = "ON")]
    On,
    #[serde(rename = "OFF")]
    Off,
}

impl fmt::Display for Switch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Switch::On => "ON",
            Switch::Off => "OFF",
        })
    }
}

/// One meter reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub t_ms: Millis,
    pub active_w: f64,
    pub reactive_var: f64,
    pub voltage_v: f64,
    pub current_a: f64,
    pub energy_wh: f64,
}

/// Active power over time, column-oriented so detectors can work on slices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerSeries {
    pub t_ms: Vec<Millis>,
    pub watts: Vec<f64>,
}

impl PowerSeries {
    pub fn new(t_ms: Vec<Millis>, watts: Vec<f64>) -> Self {
        assert_eq!(
            t_ms.len(),
            watts.len(),
            "time and value columns differ in length"
        );
        Self { t_ms, watts }
    }

    pub fn from_samples(samples: &[PowerSample]) -> Self {
        Self {
            t_ms: samples.iter().map(|s| s.t_ms).collect(),
            watts: samples.iter().map(|s| s.active_w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }

    /// Nominal sampling period: the median spacing between samples, so a few
    /// gaps do not skew it. `None` for fewer than two samples.
    pub fn period_ms(&self) -> Option<Millis> {
        if self.t_ms.len() < 2 {
            return None;
        }
        let mut diffs: Vec<Millis> = self.t_ms.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.sort_unstable();
        Some(diffs[diffs.len() / 2])
    }

    /// Sample-period weighted integral in watt-hours. Each sample holds until
    /// the next one; the last sample holds for one nominal period.
    pub fn energy_wh(&self) -> f64 {
        integrate_wh(&self.t_ms, &self.watts, self.period_ms().unwrap_or(0))
    }
}

/// Left-Riemann integral of `watts` over `t_ms` in Wh, with the final sample
/// held for `last_hold_ms`.
pub fn integrate_wh(t_ms: &[Millis], watts: &[f64], last_hold_ms: Millis) -> f64 {
    let mut wms = 0.0;
    for (i, w) in watts.iter().enumerate() {
        let dt = match t_ms.get(i + 1) {
            Some(next) => next - t_ms[i],
            None => last_hold_ms,
        };
        wms += w * dt as f64;
    }
    wms / 3.6e6
}

/// Anything that records an appliance switching at an instant.
pub trait SwitchEvent {
    fn t_ms(&self) -> Millis;
    fn label(&self) -> &str;
    fn verb(&self) -> Switch;
}

impl SwitchEvent for crate::disagg::DetectedEvent {
    fn t_ms(&self) -> Millis {
        self.t_ms
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn verb(&self) -> Switch {
        self.verb
    }
}

impl SwitchEvent for crate::sim::TruthEvent {
    fn t_ms(&self) -> Millis {
        self.t_ms
    }
    fn label(&self) -> &str {
        &self.appliance
    }
    fn verb(&self) -> Switch {
        self.verb
    }
}
