use super::signature::DetectedEvent;
use crate::series::{Millis, PowerSeries, Switch};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApplianceState {
    Off,
    OnSince(Millis),
}

/// `[start_ms, end_ms)`; an open interval runs to the end of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnInterval {
    pub start_ms: Millis,
    pub end_ms: Option<Millis>,
    /// Reconstructed draw: the magnitude of the ON edge.
    pub power_w: f64,
}

impl OnInterval {
    pub fn contains(&self, t_ms: Millis) -> bool {
        self.start_ms <= t_ms && self.end_ms.is_none_or(|end| t_ms < end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    /// Input events with unpaired OFFs (and repeated ONs) demoted to unknown.
    pub events: Vec<DetectedEvent>,
    pub states: BTreeMap<String, ApplianceState>,
    pub intervals: BTreeMap<String, Vec<OnInterval>>,
    /// Reconstructed per-appliance power aligned with the input series.
    pub curves: BTreeMap<String, Vec<f64>>,
    /// `aggregate − baseline − Σ curves`.
    pub residual: Vec<f64>,
    pub baseline_w: f64,
}

impl Tracking {
    /// Energy of each reconstructed curve, in Wh, plus the residual and
    /// baseline energies, all on the same sample-hold integral.
    pub fn energy_wh(&self, series: &PowerSeries) -> (BTreeMap<String, f64>, f64, f64) {
        let hold = series.period_ms().unwrap_or(0);
        let per = self
            .curves
            .iter()
            .map(|(label, curve)| {
                (
                    label.clone(),
                    crate::series::integrate_wh(&series.t_ms, curve, hold),
                )
            })
            .collect();
        let residual = crate::series::integrate_wh(&series.t_ms, &self.residual, hold);
        let baseline =
            crate::series::integrate_wh(&series.t_ms, &vec![self.baseline_w; series.len()], hold);
        (per, residual, baseline)
    }
}

/// Pairs ON/OFF events per label and rebuilds each appliance's curve.
///
/// An OFF only closes an appliance that is currently ON; an OFF without a
/// matching ON, or a second ON for an appliance already ON, is re-labeled
/// unknown. Unknown events are not tracked.
pub fn track_states(events: &[DetectedEvent], series: &PowerSeries, baseline_w: f64) -> Tracking {
    let mut events = events.to_vec();
    let mut states: BTreeMap<String, ApplianceState> = BTreeMap::new();
    let mut intervals: BTreeMap<String, Vec<OnInterval>> = BTreeMap::new();

    for ev in events.iter_mut() {
        if ev.is_unknown() {
            continue;
        }
        let state = states
            .entry(ev.label.clone())
            .or_insert(ApplianceState::Off);
        match (ev.verb, *state) {
            (Switch::On, ApplianceState::Off) => {
                *state = ApplianceState::OnSince(ev.t_ms);
                intervals
                    .entry(ev.label.clone())
                    .or_default()
                    .push(OnInterval {
                        start_ms: ev.t_ms,
                        end_ms: None,
                        power_w: ev.delta_w.abs(),
                    });
            }
            (Switch::Off, ApplianceState::OnSince(_)) => {
                *state = ApplianceState::Off;
                if let Some(open) = intervals.get_mut(&ev.label).and_then(|v| v.last_mut()) {
                    open.end_ms = Some(ev.t_ms);
                }
            }
            _ => ev.demote(),
        }
    }
    states.retain(|label, _| intervals.contains_key(label));

    let curves: BTreeMap<String, Vec<f64>> = intervals
        .iter()
        .map(|(label, ivs)| {
            let curve = series
                .t_ms
                .iter()
                .map(|&t| {
                    ivs.iter()
                        .find(|iv| iv.contains(t))
                        .map_or(0.0, |iv| iv.power_w)
                })
                .collect();
            (label.clone(), curve)
        })
        .collect();

    let residual = series
        .watts
        .iter()
        .enumerate()
        .map(|(i, &w)| curves.values().fold(w - baseline_w, |acc, c| acc - c[i]))
        .collect();

    Tracking {
        events,
        states,
        intervals,
        curves,
        residual,
        baseline_w,
    }
}
