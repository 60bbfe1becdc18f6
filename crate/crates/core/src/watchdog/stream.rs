use super::anomaly::{detect_anomalies, Anomaly, AnomalyKind};
use super::cycles::build_cycles_until;
use crate::series::{Millis, SwitchEvent};
use crate::sim::TruthEvent;
use std::collections::HashSet;

/// Where flagged anomalies go. Implement this to forward alerts (mail,
/// pager, home automation); `Vec<Anomaly>` collects them.
pub trait AnomalySink {
    fn deliver(&mut self, anomaly: &Anomaly);
}

impl AnomalySink for Vec<Anomaly> {
    fn deliver(&mut self, anomaly: &Anomaly) {
        self.push(anomaly.clone());
    }
}

/// Online watchdog for one label. Each anomaly is delivered exactly once,
/// the first time it becomes visible; an elongated ON is delivered while the
/// appliance is still running.
#[derive(Debug)]
pub struct Watchdog {
    label: String,
    n: usize,
    k: f64,
    events: Vec<TruthEvent>,
    reported: HashSet<(AnomalyKind, Millis)>,
}

impl Watchdog {
    pub fn new(label: impl Into<String>, n: usize, k: f64) -> Self {
        Self {
            label: label.into(),
            n,
            k,
            events: Vec::new(),
            reported: HashSet::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Feeds one event (other labels are ignored) and re-evaluates at its time.
    pub fn observe<E: SwitchEvent>(&mut self, event: &E, sink: &mut dyn AnomalySink) -> usize {
        if event.label() != self.label {
            return 0;
        }
        self.events.push(TruthEvent {
            t_ms: event.t_ms(),
            appliance: self.label.clone(),
            verb: event.verb(),
        });
        self.tick(event.t_ms(), sink)
    }

    /// Re-evaluates with the open cycle measured up to `now_ms`.
    pub fn tick(&mut self, now_ms: Millis, sink: &mut dyn AnomalySink) -> usize {
        let cycles = build_cycles_until(&self.events, &self.label, now_ms);
        let mut delivered = 0;
        for a in detect_anomalies(&cycles, self.n, self.k).anomalies {
            if self.reported.insert((a.kind, a.t_start_ms)) {
                sink.deliver(&a);
                delivered += 1;
            }
        }
        delivered
    }
}
