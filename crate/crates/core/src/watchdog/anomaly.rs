use super::cycles::CycleRecord;
use crate::series::Millis;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MIN_BASELINE: usize = 3;
pub const DEFAULT_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    ElongatedOn,
    ElongatedOff,
    MissingCycle,
}

/// One flagged duty-cycle deviation. Serializes as an anomaly-file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub label: String,
    pub kind: AnomalyKind,
    pub observed_s: f64,
    pub baseline_s: f64,
    pub ratio: f64,
    pub t_start_ms: Millis,
    pub t_end_ms: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WatchStatus {
    Ok,
    InsufficientBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WatchReport {
    pub status: WatchStatus,
    pub anomalies: Vec<Anomaly>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Flags cycles whose ON (or OFF) duration exceeds `k` times the median of
/// the last `n` healthy closed cycles. Flagged cycles never enter a baseline.
///
/// # Panics
/// If `n < 1`.
pub fn detect_anomalies(cycles: &[CycleRecord], n: usize, k: f64) -> WatchReport {
    assert!(n >= 1, "baseline needs at least one cycle");
    if cycles.iter().filter(|c| c.is_closed()).count() < n {
        return WatchReport {
            status: WatchStatus::InsufficientBaseline,
            anomalies: Vec::new(),
        };
    }

    let mut on_hist: Vec<f64> = Vec::new();
    let mut off_hist: Vec<f64> = Vec::new();
    let mut anomalies = Vec::new();

    for c in cycles {
        let mut flagged = false;

        if let Some(base) = baseline(&on_hist, n) {
            if c.on_duration_s > k * base {
                flagged = true;
                anomalies.push(anomaly(
                    c,
                    AnomalyKind::ElongatedOn,
                    c.on_duration_s,
                    base,
                    c.on_start_ms,
                    c.on_end_ms,
                ));
            }
        }

        if let (Some(off), Some(base)) = (c.following_off_s, baseline(&off_hist, n)) {
            if off > k * base {
                flagged = true;
                let end = c.on_end_ms + (off * 1000.0).round() as Millis;
                anomalies.push(anomaly(
                    c,
                    AnomalyKind::ElongatedOff,
                    off,
                    base,
                    c.on_end_ms,
                    end,
                ));
                if off > 2.0 * k * base {
                    anomalies.push(anomaly(
                        c,
                        AnomalyKind::MissingCycle,
                        off,
                        base,
                        c.on_end_ms,
                        end,
                    ));
                }
            }
        }

        if !flagged && c.is_closed() {
            on_hist.push(c.on_duration_s);
            if let (Some(off), false) = (c.following_off_s, c.off_in_progress) {
                off_hist.push(off);
            }
        }
    }

    WatchReport {
        status: WatchStatus::Ok,
        anomalies,
    }
}

fn baseline(history: &[f64], n: usize) -> Option<f64> {
    (history.len() >= n)
        .then(|| median(&history[history.len() - n..]))
        .flatten()
}

fn anomaly(
    c: &CycleRecord,
    kind: AnomalyKind,
    observed_s: f64,
    baseline_s: f64,
    t_start_ms: Millis,
    t_end_ms: Millis,
) -> Anomaly {
    Anomaly {
        label: c.label.clone(),
        kind,
        observed_s,
        baseline_s,
        ratio: if baseline_s > 0.0 {
            observed_s / baseline_s
        } else {
            f64::INFINITY
        },
        t_start_ms,
        t_end_ms,
    }
}
