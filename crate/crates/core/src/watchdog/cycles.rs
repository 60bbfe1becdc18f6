use crate::series::{Millis, Switch, SwitchEvent};
use serde::Serialize;

/// One ON period of a label plus the OFF period that followed it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub label: String,
    pub on_start_ms: Millis,
    /// For an in-progress cycle this is the horizon it was observed up to.
    pub on_end_ms: Millis,
    pub on_duration_s: f64,
    pub following_off_s: Option<f64>,
    pub in_progress: bool,
    /// The following OFF period has not ended yet; `following_off_s` runs to
    /// the horizon.
    pub off_in_progress: bool,
}

impl CycleRecord {
    pub fn is_closed(&self) -> bool {
        !self.in_progress
    }
}

/// Pairs consecutive ON/OFF events for `label`. A trailing ON yields an
/// in-progress record ending at the last event in `events`.
pub fn build_cycles<E: SwitchEvent>(events: &[E], label: &str) -> Vec<CycleRecord> {
    let horizon = events.iter().map(SwitchEvent::t_ms).max().unwrap_or(0);
    pair(events, label, horizon, false)
}

/// Like [`build_cycles`], but measures an open ON (or the last OFF) up to
/// `now_ms`.
pub fn build_cycles_until<E: SwitchEvent>(
    events: &[E],
    label: &str,
    now_ms: Millis,
) -> Vec<CycleRecord> {
    pair(events, label, now_ms, true)
}

fn pair<E: SwitchEvent>(
    events: &[E],
    label: &str,
    horizon: Millis,
    open_off: bool,
) -> Vec<CycleRecord> {
    let mut out: Vec<CycleRecord> = Vec::new();
    let mut on_since: Option<Millis> = None;
    for ev in events.iter().filter(|e| e.label() == label) {
        match (ev.verb(), on_since) {
            (Switch::On, None) => {
                if let Some(prev) = out.last_mut() {
                    prev.following_off_s = Some(secs(ev.t_ms() - prev.on_end_ms));
                }
                on_since = Some(ev.t_ms());
            }
            (Switch::Off, Some(start)) if ev.t_ms() > start => {
                out.push(CycleRecord {
                    label: label.to_string(),
                    on_start_ms: start,
                    on_end_ms: ev.t_ms(),
                    on_duration_s: secs(ev.t_ms() - start),
                    following_off_s: None,
                    in_progress: false,
                    off_in_progress: false,
                });
                on_since = None;
            }
            _ => {}
        }
    }
    match on_since {
        Some(start) => {
            let end = horizon.max(start);
            out.push(CycleRecord {
                label: label.to_string(),
                on_start_ms: start,
                on_end_ms: end,
                on_duration_s: secs(end - start),
                following_off_s: None,
                in_progress: true,
                off_in_progress: false,
            });
        }
        None if open_off => {
            if let Some(last) = out.last_mut() {
                if horizon > last.on_end_ms {
                    last.following_off_s = Some(secs(horizon - last.on_end_ms));
                    last.off_in_progress = true;
                }
            }
        }
        None => {}
    }
    out
}

fn secs(ms: Millis) -> f64 {
    ms as f64 / 1000.0
}
