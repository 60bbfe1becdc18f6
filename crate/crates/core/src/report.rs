//! Detection scoring against ground truth and the end-of-run summary.

use crate::disagg::{
    estimate_baseline, segment_steady, track_states, DetectedEvent, DetectorConfig, SignatureTable,
};
use crate::series::{integrate_wh, Millis, PowerSeries, Switch, SwitchEvent};
use crate::watchdog::Anomaly;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

/// Steps below this size are reported separately as hard to detect.
pub const SIGNIFICANT_DELTA_W: f64 = 100.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    /// `matched / detected`; 0 with `precision_defined = false` when nothing
    /// was detected.
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
    pub per_label: BTreeMap<String, LabelCounts>,
}

/// One-to-one greedy matching in detection order: each detection claims the
/// earliest unclaimed truth entry with the same label and verb within
/// `tolerance_ms`.
pub fn score<D: SwitchEvent, T: SwitchEvent>(
    detected: &[D],
    truth: &[T],
    tolerance_ms: Millis,
) -> Score {
    let mut det: Vec<&D> = detected.iter().collect();
    det.sort_by_key(|e| e.t_ms());
    let mut claimed = vec![false; truth.len()];
    let mut per_label: BTreeMap<String, LabelCounts> = BTreeMap::new();
    let mut matched = 0;

    for d in det {
        let hit = truth.iter().enumerate().find(|(i, t)| {
            !claimed[*i]
                && t.label() == d.label()
                && t.verb() == d.verb()
                && (t.t_ms() - d.t_ms()).abs() <= tolerance_ms
        });
        let counts = per_label.entry(d.label().to_string()).or_default();
        match hit {
            Some((i, _)) => {
                claimed[i] = true;
                counts.tp += 1;
                matched += 1;
            }
            None => counts.fp += 1,
        }
    }
    for (t, _) in truth.iter().zip(&claimed).filter(|(_, c)| !**c) {
        per_label.entry(t.label().to_string()).or_default().fn_ += 1;
    }

    let precision_defined = !detected.is_empty();
    Score {
        precision: if precision_defined {
            matched as f64 / detected.len() as f64
        } else {
            0.0
        },
        precision_defined,
        recall: if truth.is_empty() {
            1.0
        } else {
            matched as f64 / truth.len() as f64
        },
        matched,
        detected: detected.len(),
        truth: truth.len(),
        per_label,
    }
}

/// Scores only the appliances in `labels`. Unknown detections whose step is
/// at least `min_delta_w` still count against precision.
pub fn score_restricted<T: SwitchEvent + Clone>(
    detected: &[DetectedEvent],
    truth: &[T],
    tolerance_ms: Millis,
    labels: &BTreeSet<String>,
    min_delta_w: f64,
) -> Score {
    let det: Vec<DetectedEvent> = detected
        .iter()
        .filter(|e| labels.contains(&e.label) || (e.is_unknown() && e.delta_w.abs() >= min_delta_w))
        .cloned()
        .collect();
    let tr: Vec<T> = truth
        .iter()
        .filter(|e| labels.contains(e.label()))
        .cloned()
        .collect();
    score(&det, &tr, tolerance_ms)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplianceSummary {
    pub label: String,
    pub on_events: usize,
    pub off_events: usize,
    pub energy_wh: f64,
    pub nominal_w: Option<f64>,
    pub sub_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub events: usize,
    pub unknown_events: usize,
    pub appliances: Vec<ApplianceSummary>,
    /// Present when the aggregate series was supplied.
    pub energy: Option<EnergyBalance>,
    pub score: Option<Score>,
    /// Appliances whose step is below [`SIGNIFICANT_DELTA_W`].
    pub sub_threshold: Vec<String>,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub aggregate_wh: f64,
    pub baseline_w: f64,
    pub baseline_wh: f64,
    pub residual_wh: f64,
    /// Residual as a fraction of `aggregate − baseline` energy.
    pub residual_share: f64,
}

#[derive(Debug, Default)]
pub struct ReportInputs<'a> {
    pub events: &'a [DetectedEvent],
    pub series: Option<&'a PowerSeries>,
    pub signatures: Option<&'a SignatureTable>,
    pub truth: Option<&'a [crate::sim::TruthEvent]>,
    pub tolerance_ms: Millis,
    pub anomalies: &'a [Anomaly],
}

impl RunReport {
    pub fn build(inputs: &ReportInputs<'_>) -> Self {
        let events = inputs.events;
        let mut labels: BTreeSet<String> = events
            .iter()
            .filter(|e| !e.is_unknown())
            .map(|e| e.label.clone())
            .collect();
        if let Some(table) = inputs.signatures {
            labels.extend(table.signatures().iter().map(|s| s.label.clone()));
        }

        let (energies, energy) = match inputs.series {
            Some(series) => {
                let config = DetectorConfig::default();
                let segments = segment_steady(series, config.steady_window, config.steady_eps_w);
                let baseline_w = estimate_baseline(&segments, series);
                let tracking = track_states(events, series, baseline_w);
                let (per, residual_wh, baseline_wh) = tracking.energy_wh(series);
                let aggregate_wh = series.energy_wh();
                let above = aggregate_wh - baseline_wh;
                let balance = EnergyBalance {
                    aggregate_wh,
                    baseline_w,
                    baseline_wh,
                    residual_wh,
                    residual_share: if above.abs() > f64::EPSILON {
                        residual_wh / above
                    } else {
                        0.0
                    },
                };
                (per, Some(balance))
            }
            None => (energy_from_events(events), None),
        };

        let appliances: Vec<ApplianceSummary> = labels
            .iter()
            .map(|label| {
                let of = |v: Switch| {
                    events
                        .iter()
                        .filter(|e| &e.label == label && e.verb == v)
                        .count()
                };
                let nominal_w = inputs
                    .signatures
                    .and_then(|t| t.get(label))
                    .map(|s| s.nominal_w)
                    .or_else(|| typical_step(events, label));
                ApplianceSummary {
                    label: label.clone(),
                    on_events: of(Switch::On),
                    off_events: of(Switch::Off),
                    energy_wh: energies.get(label).copied().unwrap_or(0.0),
                    nominal_w,
                    sub_threshold: nominal_w.is_some_and(|w| w < SIGNIFICANT_DELTA_W),
                }
            })
            .collect();

        RunReport {
            events: events.len(),
            unknown_events: events.iter().filter(|e| e.is_unknown()).count(),
            sub_threshold: appliances
                .iter()
                .filter(|a| a.sub_threshold)
                .map(|a| a.label.clone())
                .collect(),
            appliances,
            energy,
            score: inputs.truth.map(|t| score(events, t, inputs.tolerance_ms)),
            anomalies: inputs.anomalies.to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn typical_step(events: &[DetectedEvent], label: &str) -> Option<f64> {
    let steps: Vec<f64> = events
        .iter()
        .filter(|e| e.label == label)
        .map(|e| e.delta_w.abs())
        .collect();
    crate::watchdog::median(&steps)
}

/// Energy of each label's ON intervals when no series is available; an open
/// interval runs to the last event.
fn energy_from_events(events: &[DetectedEvent]) -> BTreeMap<String, f64> {
    let horizon = events.iter().map(|e| e.t_ms).max().unwrap_or(0);
    let mut open: BTreeMap<&str, (Millis, f64)> = BTreeMap::new();
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for e in events.iter().filter(|e| !e.is_unknown()) {
        match e.verb {
            Switch::On => {
                open.entry(&e.label).or_insert((e.t_ms, e.delta_w.abs()));
            }
            Switch::Off => {
                if let Some((start, w)) = open.remove(e.label.as_str()) {
                    *out.entry(e.label.clone()).or_default() +=
                        integrate_wh(&[start], &[w], e.t_ms - start);
                }
            }
        }
    }
    for (label, (start, w)) in open {
        *out.entry(label.to_string()).or_default() += integrate_wh(&[start], &[w], horizon - start);
    }
    out
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "events: {} ({} unknown)",
            self.events, self.unknown_events
        );
        let _ = writeln!(
            s,
            "{:<14} {:>4} {:>4} {:>12}",
            "appliance", "on", "off", "energy_wh"
        );
        for a in &self.appliances {
            let mark = if a.sub_threshold { "  *" } else { "" };
            let _ = writeln!(
                s,
                "{:<14} {:>4} {:>4} {:>12.3}{mark}",
                a.label, a.on_events, a.off_events, a.energy_wh
            );
        }
        if let Some(e) = &self.energy {
            let _ = writeln!(
                s,
                "aggregate {:.3} Wh, baseline {:.1} W ({:.3} Wh), residual {:.3} Wh ({:.1}%)",
                e.aggregate_wh,
                e.baseline_w,
                e.baseline_wh,
                e.residual_wh,
                100.0 * e.residual_share
            );
        }
        if let Some(sc) = &self.score {
            let precision = if sc.precision_defined {
                format!("{:.3}", sc.precision)
            } else {
                "undefined".to_string()
            };
            let _ = writeln!(
                s,
                "precision {precision}, recall {:.3} ({} matched / {} detected / {} truth)",
                sc.recall, sc.matched, sc.detected, sc.truth
            );
            for (label, c) in &sc.per_label {
                let _ = writeln!(
                    s,
                    "  {label:<12} tp {:>3} fp {:>3} fn {:>3}",
                    c.tp, c.fp, c.fn_
                );
            }
        }
        if !self.sub_threshold.is_empty() {
            let _ = writeln!(
                s,
                "* low-power devices (step < {SIGNIFICANT_DELTA_W} W), detection not guaranteed: {}",
                self.sub_threshold.join(", ")
            );
        }
        for a in &self.anomalies {
            let _ = writeln!(
                s,
                "anomaly: {} {:?} {:.0} s vs baseline {:.0} s (x{:.2}) [{} ms, {} ms]",
                a.label, a.kind, a.observed_s, a.baseline_s, a.ratio, a.t_start_ms, a.t_end_ms
            );
        }
        f.write_str(s.trim_end())
    }
}
